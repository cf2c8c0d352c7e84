//! Grouping and aggregation with contribution-aware quality derivation.
//!
//! Every aggregation function follows an initialize/iterate/finalize
//! protocol and maintains a *contribution array* marking each input tuple
//! `+` (certainly contributes to the output value), `-` (certainly not),
//! or `?` (in doubt). Two invariants make the grouping operator correct:
//! `+` and `-` are permanent, and by finalize no `?` may remain.
//!
//! The grouping operator consolidates the per-aggregator statuses into a
//! per-group *global array*: any `+` merges the tuple's trail into the
//! group's output trail immediately, all `-` purges it, and otherwise the
//! trail is buffered until the doubt resolves. The buffer is bounded
//! (counted in transitions); on pressure the operator first re-polls the
//! aggregators' arrays to evict freshly resolved entries (BufferClean) and
//! only then spills the buffer to a temporary file that finalize reads back.
//!
//! In *open-box* mode the output trail merges exactly the trails of tuples
//! whose final global status is `+`. In *black-box* mode every tuple is
//! treated as contributing, which is pessimistic: merged qualities only
//! ever decrease.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};

use tempfile::NamedTempFile;

use crate::config::EngineConfig;
use crate::error::{AggregateError, PlanError};
use crate::merge::{merge, CanonicalTrail};
use crate::relation::{Column, QTuple, Relation, Schema};
use crate::text::{parse_trail, serialize_trail};
use crate::trail::QualityTrail;
use crate::value::{row_key, ColumnType, KeyValue, Value};

/// Per-tuple contribution status. `?` may later resolve to `+` or `-`;
/// `+` and `-` are permanent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContributionStatus {
    Plus,
    Minus,
    Question,
}

impl fmt::Display for ContributionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContributionStatus::Plus => write!(f, "+"),
            ContributionStatus::Minus => write!(f, "-"),
            ContributionStatus::Question => write!(f, "?"),
        }
    }
}

/// Contribution log enforcing the permanence invariant: the only legal
/// changes are `?` to `+` and `?` to `-`.
#[derive(Debug, Default, Clone)]
pub(crate) struct StatusLog(Vec<ContributionStatus>);

impl StatusLog {
    fn push(&mut self, status: ContributionStatus) -> usize {
        self.0.push(status);
        self.0.len() - 1
    }

    fn resolve(&mut self, ordinal: usize, status: ContributionStatus) -> Result<(), AggregateError> {
        match (self.0[ordinal], status) {
            (ContributionStatus::Question, ContributionStatus::Plus)
            | (ContributionStatus::Question, ContributionStatus::Minus) => {
                self.0[ordinal] = status;
                Ok(())
            }
            (old, new) => Err(AggregateError::InternalInvariant(format!(
                "illegal contribution change '{old}' -> '{new}' at ordinal {ordinal}"
            ))),
        }
    }

    fn get(&self, ordinal: usize) -> ContributionStatus {
        self.0[ordinal]
    }

    fn as_slice(&self) -> &[ContributionStatus] {
        &self.0
    }
}

/// Built-in aggregation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFn {
    pub fn parse(s: &str) -> Option<AggFn> {
        match s {
            "count" => Some(AggFn::Count),
            "sum" => Some(AggFn::Sum),
            "avg" => Some(AggFn::Avg),
            "min" => Some(AggFn::Min),
            "max" => Some(AggFn::Max),
            _ => None,
        }
    }

    fn requires_numeric(self) -> bool {
        !matches!(self, AggFn::Count)
    }

    fn output_type(self, input: Option<ColumnType>) -> ColumnType {
        match self {
            AggFn::Count => ColumnType::Int,
            AggFn::Avg => ColumnType::Real,
            AggFn::Sum | AggFn::Min | AggFn::Max => input.unwrap_or(ColumnType::Int),
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AggFn::Count => write!(f, "count"),
            AggFn::Sum => write!(f, "sum"),
            AggFn::Avg => write!(f, "avg"),
            AggFn::Min => write!(f, "min"),
            AggFn::Max => write!(f, "max"),
        }
    }
}

/// One aggregate in a grouping query: function, target column (optional for
/// count), and output column name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatorSpec {
    pub func: AggFn,
    pub column: Option<String>,
    pub output: String,
}

/// Quality-derivation semantics for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggMode {
    /// Aggregation-aware: only tuples that influenced the aggregate value
    /// contribute to the output trail.
    Open,
    /// Aggregation-unaware: all group members assumed to contribute.
    Black,
}

/// The initialize/iterate/finalize protocol every aggregation function
/// implements.
///
/// `iterate` records and returns the tuple's contribution status; the
/// returned `?` may later be demoted inside `contribution_array` (the hook
/// BufferClean relies on). After `finalize` the array must contain no `?`.
/// A function that blindly returns `+` for each input reverts to black-box
/// semantics with no buffering.
pub trait Aggregator {
    fn iterate(&mut self, value: &Value) -> Result<ContributionStatus, PlanError>;
    fn contribution_array(&self) -> &[ContributionStatus];
    fn finalize(&mut self) -> Result<Value, PlanError>;
}

fn protocol_err(msg: &str) -> PlanError {
    PlanError::Aggregate(AggregateError::Protocol(msg.into()))
}

fn internal_err(msg: impl Into<String>) -> PlanError {
    PlanError::Aggregate(AggregateError::InternalInvariant(msg.into()))
}

struct CountAggregator {
    count: i64,
    log: StatusLog,
    finalized: bool,
}

impl CountAggregator {
    fn new() -> Self {
        CountAggregator {
            count: 0,
            log: StatusLog::default(),
            finalized: false,
        }
    }
}

impl Aggregator for CountAggregator {
    fn iterate(&mut self, _value: &Value) -> Result<ContributionStatus, PlanError> {
        if self.finalized {
            return Err(protocol_err("iterate after finalize"));
        }
        self.count += 1;
        self.log.push(ContributionStatus::Plus);
        Ok(ContributionStatus::Plus)
    }

    fn contribution_array(&self) -> &[ContributionStatus] {
        self.log.as_slice()
    }

    fn finalize(&mut self) -> Result<Value, PlanError> {
        if self.finalized {
            return Err(protocol_err("finalize called twice"));
        }
        self.finalized = true;
        Ok(Value::Int(self.count))
    }
}

/// Shared accumulator for sum and avg: every tuple contributes; nulls are
/// skipped in the arithmetic.
struct SumAggregator {
    average: bool,
    int_sum: i128,
    real_sum: f64,
    non_null: u64,
    saw_real: bool,
    log: StatusLog,
    finalized: bool,
}

impl SumAggregator {
    fn new(average: bool) -> Self {
        SumAggregator {
            average,
            int_sum: 0,
            real_sum: 0.0,
            non_null: 0,
            saw_real: false,
            log: StatusLog::default(),
            finalized: false,
        }
    }
}

impl Aggregator for SumAggregator {
    fn iterate(&mut self, value: &Value) -> Result<ContributionStatus, PlanError> {
        if self.finalized {
            return Err(protocol_err("iterate after finalize"));
        }
        match value {
            Value::Int(i) => {
                self.int_sum += i128::from(*i);
                self.real_sum += *i as f64;
                self.non_null += 1;
            }
            Value::Real(r) => {
                self.real_sum += r;
                self.saw_real = true;
                self.non_null += 1;
            }
            Value::Null => {}
            Value::Text(_) => {
                return Err(PlanError::TypeMismatch(
                    "numeric aggregator over text value".into(),
                ))
            }
        }
        self.log.push(ContributionStatus::Plus);
        Ok(ContributionStatus::Plus)
    }

    fn contribution_array(&self) -> &[ContributionStatus] {
        self.log.as_slice()
    }

    fn finalize(&mut self) -> Result<Value, PlanError> {
        if self.finalized {
            return Err(protocol_err("finalize called twice"));
        }
        self.finalized = true;
        if self.non_null == 0 {
            return Ok(Value::Null);
        }
        if self.average {
            return Ok(Value::Real(self.real_sum / self.non_null as f64));
        }
        if self.saw_real {
            Ok(Value::Real(self.real_sum))
        } else {
            let v = i64::try_from(self.int_sum)
                .map_err(|_| PlanError::TypeMismatch("integer sum overflow".into()))?;
            Ok(Value::Int(v))
        }
    }
}

fn cmp_numeric(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Real(x), Value::Real(y)) => x.total_cmp(y),
        (Value::Int(x), Value::Real(y)) => (*x as f64).total_cmp(y),
        (Value::Real(x), Value::Int(y)) => x.total_cmp(&(*y as f64)),
        _ => Ordering::Equal,
    }
}

/// Min/max: a tuple strictly worse than the running extremum is `-`; one
/// that equals or improves it is `?`. A strictly better value demotes all
/// earlier `?` candidates to `-` (the eager demotion BufferClean reclaims).
/// Finalize promotes the surviving candidates — the extremum holders,
/// including ties — to `+`.
struct ExtremumAggregator {
    maximum: bool,
    current: Option<Value>,
    candidates: Vec<usize>,
    log: StatusLog,
    finalized: bool,
}

impl ExtremumAggregator {
    fn new(maximum: bool) -> Self {
        ExtremumAggregator {
            maximum,
            current: None,
            candidates: Vec::new(),
            log: StatusLog::default(),
            finalized: false,
        }
    }

    fn beats(&self, v: &Value, current: &Value) -> Ordering {
        let ord = cmp_numeric(v, current);
        if self.maximum {
            ord
        } else {
            ord.reverse()
        }
    }
}

impl Aggregator for ExtremumAggregator {
    fn iterate(&mut self, value: &Value) -> Result<ContributionStatus, PlanError> {
        if self.finalized {
            return Err(protocol_err("iterate after finalize"));
        }
        if matches!(value, Value::Text(_)) {
            return Err(PlanError::TypeMismatch(
                "numeric aggregator over text value".into(),
            ));
        }
        if value.is_null() {
            self.log.push(ContributionStatus::Minus);
            return Ok(ContributionStatus::Minus);
        }
        let status = match &self.current {
            None => {
                self.current = Some(value.clone());
                ContributionStatus::Question
            }
            Some(current) => match self.beats(value, current) {
                Ordering::Less => ContributionStatus::Minus,
                Ordering::Equal => ContributionStatus::Question,
                Ordering::Greater => {
                    for ordinal in self.candidates.drain(..) {
                        self.log.resolve(ordinal, ContributionStatus::Minus)?;
                    }
                    self.current = Some(value.clone());
                    ContributionStatus::Question
                }
            },
        };
        let ordinal = self.log.push(status);
        if status == ContributionStatus::Question {
            self.candidates.push(ordinal);
        }
        Ok(status)
    }

    fn contribution_array(&self) -> &[ContributionStatus] {
        self.log.as_slice()
    }

    fn finalize(&mut self) -> Result<Value, PlanError> {
        if self.finalized {
            return Err(protocol_err("finalize called twice"));
        }
        self.finalized = true;
        for ordinal in self.candidates.drain(..) {
            self.log.resolve(ordinal, ContributionStatus::Plus)?;
        }
        if self
            .log
            .as_slice()
            .contains(&ContributionStatus::Question)
        {
            return Err(internal_err("contribution array holds '?' after finalize"));
        }
        Ok(self.current.clone().unwrap_or(Value::Null))
    }
}

/// Constructs a fresh built-in aggregation function; custom functions
/// implement [`Aggregator`] directly.
pub fn builtin_aggregator(func: AggFn) -> Box<dyn Aggregator> {
    match func {
        AggFn::Count => Box::new(CountAggregator::new()),
        AggFn::Sum => Box::new(SumAggregator::new(false)),
        AggFn::Avg => Box::new(SumAggregator::new(true)),
        AggFn::Min => Box::new(ExtremumAggregator::new(false)),
        AggFn::Max => Box::new(ExtremumAggregator::new(true)),
    }
}

/// Per-query grouping metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupMetrics {
    pub buffer_clean_calls: u64,
    pub spill_count: u64,
    pub max_buffered_transitions: u64,
}

impl GroupMetrics {
    pub fn absorb(&mut self, other: &GroupMetrics) {
        self.buffer_clean_calls += other.buffer_clean_calls;
        self.spill_count += other.spill_count;
        self.max_buffered_transitions = self
            .max_buffered_transitions
            .max(other.max_buffered_transitions);
    }
}

struct GroupState {
    key_values: Vec<Value>,
    key_hash: u64,
    aggregators: Vec<Box<dyn Aggregator>>,
    global: StatusLog,
    merged: Option<CanonicalTrail>,
    ordinals: usize,
}

/// Bounded in-memory buffer of in-doubt trails with whole-buffer spill.
struct TrailBuffer {
    mem: HashMap<(usize, usize), QualityTrail>,
    usage: u64,
    spill: Option<NamedTempFile>,
}

impl TrailBuffer {
    fn new() -> Self {
        TrailBuffer {
            mem: HashMap::new(),
            usage: 0,
            spill: None,
        }
    }
}

fn hash_key(key: &[KeyValue]) -> u64 {
    let mut hasher = DefaultHasher::new();
    key.hash(&mut hasher);
    hasher.finish()
}

/// The grouping operator: consumes tuples, runs the aggregators, tracks the
/// global contribution state, and derives output trails.
pub struct GroupOperator<'a> {
    columns: Vec<Option<usize>>,
    outputs: Vec<Column>,
    key_indices: Vec<usize>,
    key_columns: Vec<Column>,
    mode: AggMode,
    quality: bool,
    config: &'a EngineConfig,
    key_lookup: HashMap<Vec<KeyValue>, usize>,
    groups: Vec<GroupState>,
    buffer: TrailBuffer,
    metrics: GroupMetrics,
    make_aggregators: Box<dyn Fn() -> Vec<Box<dyn Aggregator>> + 'a>,
}

impl<'a> GroupOperator<'a> {
    /// Builds an operator for the built-in aggregate functions.
    pub fn from_specs(
        schema: &Schema,
        by: &[String],
        specs: &'a [AggregatorSpec],
        mode: AggMode,
        config: &'a EngineConfig,
    ) -> Result<Self, PlanError> {
        let mut columns = Vec::with_capacity(specs.len());
        let mut outputs = Vec::with_capacity(specs.len());
        for spec in specs {
            let idx = match (&spec.column, spec.func.requires_numeric()) {
                (Some(col), required) => {
                    let i = schema.col_index(col)?;
                    let ty = schema.columns()[i].ty;
                    if required && ty == ColumnType::Text {
                        return Err(PlanError::TypeMismatch(format!(
                            "{} requires a numeric column, '{col}' is text",
                            spec.func
                        )));
                    }
                    Some(i)
                }
                (None, false) => None,
                (None, true) => {
                    return Err(PlanError::TypeMismatch(format!(
                        "{} requires a target column",
                        spec.func
                    )))
                }
            };
            let input_ty = idx.map(|i| schema.columns()[i].ty);
            outputs.push(Column::new(
                spec.output.clone(),
                spec.func.output_type(input_ty),
            ));
            columns.push(idx);
        }
        let funcs: Vec<AggFn> = specs.iter().map(|s| s.func).collect();
        Self::new(
            schema,
            by,
            columns,
            outputs,
            mode,
            config,
            Box::new(move || funcs.iter().map(|f| builtin_aggregator(*f)).collect()),
        )
    }

    /// Builds an operator around caller-supplied aggregation functions.
    /// `columns[i]` names the input column fed to aggregator `i` (None feeds
    /// NULL), `outputs[i]` describes its output column, and `make` produces
    /// a fresh set of aggregator states for each group.
    pub fn with_aggregators(
        schema: &Schema,
        by: &[String],
        columns: Vec<Option<String>>,
        outputs: Vec<Column>,
        mode: AggMode,
        config: &'a EngineConfig,
        make: Box<dyn Fn() -> Vec<Box<dyn Aggregator>> + 'a>,
    ) -> Result<Self, PlanError> {
        let columns = columns
            .into_iter()
            .map(|c| c.map(|c| schema.col_index(&c)).transpose())
            .collect::<Result<_, _>>()?;
        Self::new(schema, by, columns, outputs, mode, config, make)
    }

    fn new(
        schema: &Schema,
        by: &[String],
        columns: Vec<Option<usize>>,
        outputs: Vec<Column>,
        mode: AggMode,
        config: &'a EngineConfig,
        make: Box<dyn Fn() -> Vec<Box<dyn Aggregator>> + 'a>,
    ) -> Result<Self, PlanError> {
        let key_indices = by
            .iter()
            .map(|c| schema.col_index(c))
            .collect::<Result<Vec<_>, _>>()?;
        let key_columns = key_indices
            .iter()
            .map(|&i| schema.columns()[i].clone())
            .collect();
        Ok(GroupOperator {
            columns,
            outputs,
            key_indices,
            key_columns,
            mode,
            quality: true,
            config,
            key_lookup: HashMap::new(),
            groups: Vec::new(),
            buffer: TrailBuffer::new(),
            metrics: GroupMetrics::default(),
            make_aggregators: make,
        })
    }

    pub(crate) fn set_quality(&mut self, quality: bool) {
        self.quality = quality;
    }

    fn group_for(&mut self, tuple: &QTuple) -> Result<usize, PlanError> {
        let key_values: Vec<Value> = self
            .key_indices
            .iter()
            .map(|&i| tuple.values[i].clone())
            .collect();
        let key = row_key(&key_values);
        if let Some(&gi) = self.key_lookup.get(&key) {
            return Ok(gi);
        }
        let key_hash = hash_key(&key);
        if self.groups.iter().any(|g| g.key_hash == key_hash) {
            return Err(internal_err("group key hash collision"));
        }
        let gi = self.groups.len();
        self.groups.push(GroupState {
            key_values,
            key_hash,
            aggregators: (self.make_aggregators)(),
            global: StatusLog::default(),
            merged: None,
            ordinals: 0,
        });
        self.key_lookup.insert(key, gi);
        Ok(gi)
    }

    fn merge_into_group(&mut self, gi: usize, trail: &QualityTrail) -> Result<(), PlanError> {
        if !self.quality {
            if self.groups[gi].merged.is_none() {
                self.groups[gi].merged = Some(merge([trail])?);
            }
            return Ok(());
        }
        let merged = match self.groups[gi].merged.take() {
            None => merge([trail])?,
            Some(acc) => merge([acc.as_trail(), trail])?,
        };
        self.groups[gi].merged = Some(merged);
        Ok(())
    }

    /// Feeds one tuple through every aggregator and the global state.
    pub fn consume(&mut self, tuple: &QTuple) -> Result<(), PlanError> {
        let gi = self.group_for(tuple)?;
        let mut any_plus = false;
        let mut all_minus = true;
        for ai in 0..self.columns.len() {
            let value = match self.columns[ai] {
                Some(ci) => tuple.values[ci].clone(),
                None => Value::Null,
            };
            let status = self.groups[gi].aggregators[ai].iterate(&value)?;
            match status {
                ContributionStatus::Plus => {
                    any_plus = true;
                    all_minus = false;
                }
                ContributionStatus::Question => all_minus = false,
                ContributionStatus::Minus => {}
            }
        }
        // Black-box semantics: every tuple is assumed to participate.
        if self.mode == AggMode::Black {
            any_plus = true;
        }
        let group = &mut self.groups[gi];
        let ordinal = group.ordinals;
        group.ordinals += 1;
        if any_plus {
            group.global.push(ContributionStatus::Plus);
            self.merge_into_group(gi, &tuple.trail)?;
        } else if all_minus {
            self.groups[gi].global.push(ContributionStatus::Minus);
        } else {
            self.groups[gi].global.push(ContributionStatus::Question);
            self.buffer_insert(gi, ordinal, tuple.trail.clone())?;
        }
        Ok(())
    }

    /// Global status of one ordinal as derivable from the aggregators'
    /// current contribution arrays.
    fn poll_status(&self, gi: usize, ordinal: usize) -> ContributionStatus {
        let mut all_minus = true;
        for agg in &self.groups[gi].aggregators {
            match agg.contribution_array()[ordinal] {
                ContributionStatus::Plus => return ContributionStatus::Plus,
                ContributionStatus::Question => all_minus = false,
                ContributionStatus::Minus => {}
            }
        }
        if all_minus {
            ContributionStatus::Minus
        } else {
            ContributionStatus::Question
        }
    }

    /// Re-polls the aggregators' contribution arrays and evicts buffered
    /// trails whose status resolved; returns the number of transitions
    /// freed from the buffer.
    fn buffer_clean(&mut self) -> Result<u64, PlanError> {
        self.metrics.buffer_clean_calls += 1;
        let mut keys: Vec<(usize, usize)> = self.buffer.mem.keys().copied().collect();
        keys.sort_unstable();
        let mut freed = 0;
        for (gi, ordinal) in keys {
            let status = self.poll_status(gi, ordinal);
            if status == ContributionStatus::Question {
                continue;
            }
            let trail = self
                .buffer
                .mem
                .remove(&(gi, ordinal))
                .expect("key taken from the buffer map");
            let len = trail.size() as u64;
            self.buffer.usage -= len;
            freed += len;
            self.groups[gi]
                .global
                .resolve(ordinal, status)
                .map_err(PlanError::Aggregate)?;
            if status == ContributionStatus::Plus {
                self.merge_into_group(gi, &trail)?;
            }
        }
        Ok(freed)
    }

    /// Writes the entire in-memory buffer to the spill file and resets
    /// memory usage.
    fn spill(&mut self) -> Result<(), PlanError> {
        self.metrics.spill_count += 1;
        if self.buffer.spill.is_none() {
            self.buffer.spill = Some(
                NamedTempFile::new().map_err(|e| PlanError::Aggregate(AggregateError::Storage(e)))?,
            );
        }
        let file = self
            .buffer
            .spill
            .as_mut()
            .expect("spill file just created")
            .as_file_mut();
        let mut entries: Vec<((usize, usize), QualityTrail)> = self.buffer.mem.drain().collect();
        entries.sort_unstable_by_key(|(k, _)| *k);
        for ((gi, ordinal), trail) in entries {
            writeln!(
                file,
                "{:016x}\t{}\t{}",
                self.groups[gi].key_hash,
                ordinal,
                serialize_trail(&trail)
            )
            .map_err(|e| PlanError::Aggregate(AggregateError::Storage(e)))?;
        }
        self.buffer.usage = 0;
        Ok(())
    }

    /// Reads every spilled trail back, keyed by (group, ordinal).
    fn reload_spilled(&mut self) -> Result<HashMap<(usize, usize), QualityTrail>, PlanError> {
        let mut out = HashMap::new();
        let Some(spill) = self.buffer.spill.as_mut() else {
            return Ok(out);
        };
        let by_hash: HashMap<u64, usize> = self
            .groups
            .iter()
            .enumerate()
            .map(|(gi, g)| (g.key_hash, gi))
            .collect();
        let file = spill.as_file_mut();
        file.seek(SeekFrom::Start(0))
            .map_err(|e| PlanError::Aggregate(AggregateError::Storage(e)))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| PlanError::Aggregate(AggregateError::Storage(e)))?;
            let mut fields = line.splitn(3, '\t');
            let (Some(hash), Some(ordinal), Some(text)) =
                (fields.next(), fields.next(), fields.next())
            else {
                return Err(internal_err("malformed spill record"));
            };
            let hash = u64::from_str_radix(hash, 16)
                .map_err(|_| internal_err("malformed spill group hash"))?;
            let ordinal: usize = ordinal
                .parse()
                .map_err(|_| internal_err("malformed spill ordinal"))?;
            let gi = *by_hash
                .get(&hash)
                .ok_or_else(|| internal_err("spill record for unknown group"))?;
            let trail = parse_trail(text, self.config.max_quality)
                .map_err(|e| internal_err(format!("spilled trail unreadable: {e}")))?;
            out.insert((gi, ordinal), trail);
        }
        Ok(out)
    }

    fn buffer_insert(
        &mut self,
        gi: usize,
        ordinal: usize,
        trail: QualityTrail,
    ) -> Result<(), PlanError> {
        let len = trail.size() as u64;
        if let Some(limit) = self.config.buffer_limit {
            if self.buffer.usage + len > limit && self.config.buffer_clean_enabled {
                self.buffer_clean()?;
            }
            if self.buffer.usage + len > limit && !self.buffer.mem.is_empty() {
                self.spill()?;
            }
        }
        self.buffer.mem.insert((gi, ordinal), trail);
        self.buffer.usage += len;
        self.metrics.max_buffered_transitions =
            self.metrics.max_buffered_transitions.max(self.buffer.usage);
        if let Some(limit) = self.config.buffer_limit {
            if self.buffer.usage > limit {
                self.spill()?;
            }
        }
        Ok(())
    }

    /// Finalizes all aggregators, resolves remaining in-doubt trails from
    /// the buffer (and the spill file, if any), and emits one output tuple
    /// per group.
    pub fn finish(mut self) -> Result<(Relation, GroupMetrics), PlanError> {
        let mut spilled = self.reload_spilled()?;

        let mut out_schema = self.key_columns.clone();
        out_schema.extend(self.outputs.iter().cloned());
        let mut out = Relation::new(Schema::new(out_schema));

        for gi in 0..self.groups.len() {
            let mut values: Vec<Value> = self.groups[gi].key_values.clone();
            for ai in 0..self.groups[gi].aggregators.len() {
                values.push(self.groups[gi].aggregators[ai].finalize()?);
            }
            for ordinal in 0..self.groups[gi].ordinals {
                if self.groups[gi].global.get(ordinal) != ContributionStatus::Question {
                    continue;
                }
                let status = self.poll_status(gi, ordinal);
                if status == ContributionStatus::Question {
                    return Err(internal_err(
                        "global array holds '?' after aggregator finalize",
                    ));
                }
                self.groups[gi]
                    .global
                    .resolve(ordinal, status)
                    .map_err(PlanError::Aggregate)?;
                let trail = self
                    .buffer
                    .mem
                    .remove(&(gi, ordinal))
                    .or_else(|| spilled.remove(&(gi, ordinal)));
                let trail =
                    trail.ok_or_else(|| internal_err("buffered trail missing at finalize"))?;
                if status == ContributionStatus::Plus {
                    self.merge_into_group(gi, &trail)?;
                }
            }
            let group = &mut self.groups[gi];
            if !group
                .global
                .as_slice()
                .contains(&ContributionStatus::Plus)
            {
                return Err(internal_err("group finished with no contributing tuples"));
            }
            let trail = group
                .merged
                .take()
                .ok_or_else(|| internal_err("group finished without a merged trail"))?
                .into_trail();
            out.push_unchecked(QTuple::new(values, trail));
        }
        Ok((out, self.metrics))
    }
}

/// Groups `rel` by the `by` columns and computes `specs`, deriving output
/// trails per `mode`. Returns the result and the buffering metrics.
pub fn group_aggregate(
    rel: &Relation,
    by: &[String],
    specs: &[AggregatorSpec],
    mode: AggMode,
    config: &EngineConfig,
) -> Result<(Relation, GroupMetrics), PlanError> {
    group_aggregate_impl(rel, by, specs, mode, config, true)
}

pub(crate) fn group_aggregate_impl(
    rel: &Relation,
    by: &[String],
    specs: &[AggregatorSpec],
    mode: AggMode,
    config: &EngineConfig,
    quality: bool,
) -> Result<(Relation, GroupMetrics), PlanError> {
    let mut op = GroupOperator::from_specs(rel.schema(), by, specs, mode, config)?;
    op.set_quality(quality);
    for tuple in rel.tuples() {
        op.consume(tuple)?;
    }
    op.finish()
}
