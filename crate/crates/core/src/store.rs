//! Catalog, CSV ingestion, physical trail-storage schemes, and
//! quality-event replay.
//!
//! Tables store trails either *inline* (every tuple embeds its trail) or
//! *off-table* (a companion map keyed by a designated unique tuple id, the
//! analogue of an `R-QTrail (OID, QTrail)` side table). Scans attach trails
//! transparently, so everything downstream is scheme-agnostic.
//!
//! Quality maintenance is an ordered event stream replayed against the
//! catalog: `inc`/`dec` move a tuple's score one step (clamped to the score
//! range by appending a same-score transition), `hold` repeats the previous
//! score, and `set` installs a given score. Events that target unknown
//! tuples or that would break timestamp monotonicity are rejected and
//! logged, never applied.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::config::EngineConfig;
use crate::error::StoreError;
use crate::relation::{Column, QTuple, Relation, Schema};
use crate::text::{parse_trail, serialize_trail};
use crate::trail::{QualityScore, QualityTrail, QualityTransition, Timestamp, TrimDirection};
use crate::value::{ColumnType, KeyValue, Value};

/// Physical placement of quality trails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageScheme {
    /// Trails embedded with the data tuples.
    Inline,
    /// Trails in a companion id-keyed map.
    OffTable,
}

impl StorageScheme {
    pub fn parse(s: &str) -> Option<StorageScheme> {
        match s {
            "inline" => Some(StorageScheme::Inline),
            "off-table" | "offtable" => Some(StorageScheme::OffTable),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StorageScheme::Inline => "inline",
            StorageScheme::OffTable => "off-table",
        }
    }
}

/// Reserved name of the trail column in CSV files.
pub const QTRAIL_COLUMN: &str = "__qtrail";

/// Table metadata.
#[derive(Debug, Clone)]
pub struct TableDef {
    pub name: String,
    pub schema: Schema,
    pub scheme: StorageScheme,
    pub id_column: Option<String>,
}

#[derive(Debug)]
enum TrailStore {
    Inline(Vec<QualityTrail>),
    OffTable(HashMap<KeyValue, QualityTrail>),
}

/// A registered table: rows plus trail storage per the scheme.
#[derive(Debug)]
pub struct StoredTable {
    def: TableDef,
    rows: Vec<Vec<Value>>,
    trails: TrailStore,
    /// id value -> row position; present whenever an id column is declared.
    id_index: Option<HashMap<KeyValue, usize>>,
}

impl StoredTable {
    pub fn def(&self) -> &TableDef {
        &self.def
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn id_col_index(&self) -> Option<usize> {
        let name = self.def.id_column.as_deref()?;
        self.def.schema.col_index(name).ok()
    }

    fn trail_for_row(&self, row_idx: usize) -> Result<&QualityTrail, StoreError> {
        match &self.trails {
            TrailStore::Inline(trails) => Ok(&trails[row_idx]),
            TrailStore::OffTable(map) => {
                let id_idx = self
                    .id_col_index()
                    .expect("off-table tables always have an id column");
                let id = &self.rows[row_idx][id_idx];
                map.get(&KeyValue::from(id))
                    .ok_or_else(|| StoreError::DanglingTrail {
                        table: self.def.name.clone(),
                        id: id.render(),
                    })
            }
        }
    }
}

/// Ingestion options for [`Catalog::load_csv`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub scheme: Option<StorageScheme>,
    pub id_column: Option<String>,
    /// Score of the initial transition for rows without a trail; defaults to
    /// the configured maximum quality.
    pub default_score: Option<u32>,
    /// Timestamp of that initial transition.
    pub default_timestamp: u64,
    /// Explicit column types, overriding inference.
    pub types: HashMap<String, ColumnType>,
}

/// One quality-maintenance event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityEvent {
    pub table: String,
    pub tuple_id: String,
    pub action: EventAction,
    pub score: Option<u32>,
    pub timestamp: u64,
    pub event_text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    Set,
    Inc,
    Dec,
    Hold,
}

impl EventAction {
    pub fn parse(s: &str) -> Option<EventAction> {
        match s {
            "set" => Some(EventAction::Set),
            "inc" => Some(EventAction::Inc),
            "dec" => Some(EventAction::Dec),
            "hold" => Some(EventAction::Hold),
            _ => None,
        }
    }
}

/// A logged, non-fatal event rejection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    /// Zero-based position in the replayed stream.
    pub index: usize,
    pub reason: String,
}

/// Result of replaying an event stream.
#[derive(Debug, Clone, Default)]
pub struct ApplyOutcome {
    pub applied: usize,
    pub rejections: Vec<Rejection>,
}

/// Per-table storage report line.
#[derive(Debug, Clone)]
pub struct TableReport {
    pub table: String,
    pub scheme: StorageScheme,
    pub tuples: usize,
    pub transitions: u64,
    pub data_bytes: u64,
    pub trail_bytes: u64,
    pub overhead_ratio: f64,
}

/// Named tables with their data and trail stores.
#[derive(Debug, Default)]
pub struct Catalog {
    tables: HashMap<String, StoredTable>,
}

impl Catalog {
    pub fn new() -> Self {
        Catalog::default()
    }

    pub fn table(&self, name: &str) -> Result<&StoredTable, StoreError> {
        self.tables
            .get(name)
            .ok_or_else(|| StoreError::UnknownTable(name.to_string()))
    }

    pub fn table_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.tables.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }

    pub fn remove_table(&mut self, name: &str) -> bool {
        self.tables.remove(name).is_some()
    }

    /// Loads a CSV file (header required; optional `__qtrail` column) into a
    /// new table. Returns the number of tuples loaded.
    pub fn load_csv(
        &mut self,
        path: &Path,
        table: &str,
        options: &LoadOptions,
        config: &EngineConfig,
    ) -> Result<usize, StoreError> {
        let file = File::open(path)?;
        self.load_csv_reader(file, table, options, config)
    }

    pub fn load_csv_reader<R: Read>(
        &mut self,
        reader: R,
        table: &str,
        options: &LoadOptions,
        config: &EngineConfig,
    ) -> Result<usize, StoreError> {
        if self.tables.contains_key(table) {
            return Err(StoreError::DuplicateTable(table.to_string()));
        }
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = csv
            .headers()?
            .iter()
            .map(str::to_owned)
            .collect();
        let trail_col = headers.iter().position(|h| h == QTRAIL_COLUMN);
        let data_cols: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| *h != QTRAIL_COLUMN)
            .map(|(i, h)| (i, h.clone()))
            .collect();

        let mut raw_rows: Vec<(u64, Vec<String>)> = Vec::new();
        for record in csv.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != headers.len() {
                return Err(StoreError::Malformed {
                    line: line as usize,
                    message: format!(
                        "row has {} fields, header has {}",
                        record.len(),
                        headers.len()
                    ),
                });
            }
            raw_rows.push((line, record.iter().map(str::to_owned).collect()));
        }

        // Column types: explicit override, else inferred over all rows.
        let mut columns = Vec::with_capacity(data_cols.len());
        for (ci, name) in &data_cols {
            let ty = match options.types.get(name) {
                Some(ty) => *ty,
                None => infer_type(raw_rows.iter().map(|(_, r)| r[*ci].as_str())),
            };
            columns.push(Column::new(name.clone(), ty));
        }
        let schema = Schema::new(columns);

        let scheme = options.scheme.unwrap_or(StorageScheme::Inline);
        let id_column = options.id_column.clone();
        if scheme == StorageScheme::OffTable && id_column.is_none() {
            return Err(StoreError::Malformed {
                line: 0,
                message: "off-table scheme requires a tuple-id column".into(),
            });
        }
        if let Some(idc) = &id_column {
            schema
                .col_index(idc)
                .map_err(|_| StoreError::UnknownColumn(idc.clone()))?;
        }

        let default_score = options.default_score.unwrap_or(config.max_quality);
        let default_score = QualityScore::new(default_score, config.max_quality)?;
        let default_ts = Timestamp::new(options.default_timestamp);

        let mut rows = Vec::with_capacity(raw_rows.len());
        let mut trails = Vec::with_capacity(raw_rows.len());
        for (line, raw) in &raw_rows {
            let mut row = Vec::with_capacity(schema.arity());
            for ((ci, _), col) in data_cols.iter().zip(schema.columns()) {
                row.push(parse_cell(&raw[*ci], col.ty).map_err(|message| {
                    StoreError::Malformed {
                        line: *line as usize,
                        message,
                    }
                })?);
            }
            let trail = match trail_col.map(|ti| raw[ti].as_str()).filter(|t| !t.is_empty()) {
                Some(text) => parse_trail(text, config.max_quality).map_err(|source| {
                    StoreError::TrailParse {
                        line: *line as usize,
                        source,
                    }
                })?,
                None => QualityTrail::new(QualityTransition::new(default_score, default_ts, None)),
            };
            rows.push(row);
            trails.push(trail);
        }

        let stored = build_table(
            TableDef {
                name: table.to_string(),
                schema,
                scheme,
                id_column,
            },
            rows,
            trails,
        )?;
        self.tables.insert(table.to_string(), stored);
        Ok(raw_rows.len())
    }

    /// Registers an in-memory relation as a table (used by the bench data
    /// generator and scheme-conversion tests).
    pub fn register_relation(
        &mut self,
        name: &str,
        scheme: StorageScheme,
        id_column: Option<&str>,
        rel: &Relation,
    ) -> Result<usize, StoreError> {
        if self.tables.contains_key(name) {
            return Err(StoreError::DuplicateTable(name.to_string()));
        }
        if scheme == StorageScheme::OffTable && id_column.is_none() {
            return Err(StoreError::Malformed {
                line: 0,
                message: "off-table scheme requires a tuple-id column".into(),
            });
        }
        let rows: Vec<Vec<Value>> = rel.tuples().iter().map(|t| t.values.clone()).collect();
        let trails: Vec<QualityTrail> = rel.tuples().iter().map(|t| t.trail.clone()).collect();
        let stored = build_table(
            TableDef {
                name: name.to_string(),
                schema: rel.schema().clone(),
                scheme,
                id_column: id_column.map(str::to_owned),
            },
            rows,
            trails,
        )?;
        self.tables.insert(name.to_string(), stored);
        Ok(rel.len())
    }

    /// Streams a table's tuples with trails attached; the off-table scheme
    /// performs the id-keyed lookup transparently.
    pub fn scan(&self, table: &str) -> Result<ScanIter<'_>, StoreError> {
        Ok(ScanIter {
            table: self.table(table)?,
            next: 0,
            unit_trail: None,
        })
    }

    /// Scan that attaches a fixed trail instead of reading stored ones;
    /// the propagation-disabled execution path.
    pub(crate) fn scan_with_unit(
        &self,
        table: &str,
        unit: QualityTrail,
    ) -> Result<ScanIter<'_>, StoreError> {
        Ok(ScanIter {
            table: self.table(table)?,
            next: 0,
            unit_trail: Some(unit),
        })
    }

    /// Materializes a table as a relation.
    pub fn relation(&self, table: &str) -> Result<Relation, StoreError> {
        let scan = self.scan(table)?;
        let mut rel = Relation::new(scan.schema().clone());
        for tuple in scan {
            rel.push_unchecked(tuple?);
        }
        Ok(rel)
    }

    /// Replays an ordered event stream. Rejected events (unknown table or
    /// tuple, non-monotone timestamp, invalid score) are logged; valid ones
    /// append a transition and re-apply the trail limit.
    pub fn apply_events(
        &mut self,
        events: &[QualityEvent],
        config: &EngineConfig,
    ) -> ApplyOutcome {
        let mut outcome = ApplyOutcome::default();
        for (index, event) in events.iter().enumerate() {
            match self.apply_one(event, config) {
                Ok(()) => outcome.applied += 1,
                Err(reason) => outcome.rejections.push(Rejection { index, reason }),
            }
        }
        outcome
    }

    fn apply_one(&mut self, event: &QualityEvent, config: &EngineConfig) -> Result<(), String> {
        let table = self
            .tables
            .get_mut(&event.table)
            .ok_or_else(|| format!("unknown table '{}'", event.table))?;
        let id_idx = table
            .id_col_index()
            .ok_or_else(|| format!("table '{}' has no tuple-id column", event.table))?;
        let id_ty = table.def.schema.columns()[id_idx].ty;
        let id = parse_cell(&event.tuple_id, id_ty)
            .map_err(|_| format!("malformed tuple id '{}'", event.tuple_id))?;
        if id.is_null() {
            return Err("empty tuple id".into());
        }
        let key = KeyValue::from(&id);

        let trail = match &mut table.trails {
            TrailStore::Inline(trails) => {
                let index = table.id_index.as_ref().expect("id column implies index");
                let row = *index
                    .get(&key)
                    .ok_or_else(|| format!("unknown tuple id '{}'", event.tuple_id))?;
                &mut trails[row]
            }
            TrailStore::OffTable(map) => map
                .get_mut(&key)
                .ok_or_else(|| format!("unknown tuple id '{}'", event.tuple_id))?,
        };

        let prev = trail.last().score().get();
        let score = match event.action {
            EventAction::Inc => prev.saturating_add(1).min(config.max_quality),
            EventAction::Dec => prev.saturating_sub(1).max(1),
            EventAction::Hold => prev,
            EventAction::Set => {
                let s = event.score.ok_or("set action requires a score")?;
                QualityScore::new(s, config.max_quality)
                    .map_err(|e| e.to_string())?
                    .get()
            }
        };
        let score = QualityScore::new(score, config.max_quality).expect("clamped into range");
        let transition = QualityTransition::new(
            score,
            Timestamp::new(event.timestamp),
            event.event_text.as_deref(),
        );
        let mut updated = trail.add_transition(transition).map_err(|e| e.to_string())?;
        if let Some(limit) = config.trail_limit {
            updated = updated
                .trim(TrimDirection::KeepNewest, limit as usize)
                .map_err(|e| e.to_string())?;
        }
        *trail = updated;
        Ok(())
    }

    /// Per-table storage report, sorted by table name.
    pub fn storage_report(&self) -> Vec<TableReport> {
        let mut reports: Vec<TableReport> = self
            .tables
            .values()
            .map(|table| {
                let mut data_bytes = 0u64;
                for row in &table.rows {
                    for v in row {
                        data_bytes += v.render().len() as u64;
                    }
                }
                let mut transitions = 0u64;
                let mut trail_bytes = 0u64;
                let mut each_trail = |trail: &QualityTrail| {
                    transitions += trail.size() as u64;
                    trail_bytes += serialize_trail(trail).len() as u64;
                };
                match &table.trails {
                    TrailStore::Inline(trails) => trails.iter().for_each(&mut each_trail),
                    TrailStore::OffTable(map) => {
                        map.values().for_each(&mut each_trail);
                        // The companion table repeats the id key per trail.
                        if let Some(id_idx) = table.id_col_index() {
                            for row in &table.rows {
                                trail_bytes += row[id_idx].render().len() as u64;
                            }
                        }
                    }
                }
                TableReport {
                    table: table.def.name.clone(),
                    scheme: table.def.scheme,
                    tuples: table.rows.len(),
                    transitions,
                    data_bytes,
                    trail_bytes,
                    overhead_ratio: if data_bytes == 0 {
                        0.0
                    } else {
                        trail_bytes as f64 / data_bytes as f64
                    },
                }
            })
            .collect();
        reports.sort_by(|a, b| a.table.cmp(&b.table));
        reports
    }
}

fn build_table(
    def: TableDef,
    rows: Vec<Vec<Value>>,
    trails: Vec<QualityTrail>,
) -> Result<StoredTable, StoreError> {
    let id_idx = def
        .id_column
        .as_deref()
        .map(|c| def.schema.col_index(c))
        .transpose()
        .map_err(|_| StoreError::UnknownColumn(def.id_column.clone().unwrap_or_default()))?;

    let id_index = match id_idx {
        Some(idx) => {
            let mut index = HashMap::with_capacity(rows.len());
            for (ri, row) in rows.iter().enumerate() {
                let id = &row[idx];
                if id.is_null() {
                    return Err(StoreError::Malformed {
                        line: 0,
                        message: format!("null tuple id in table '{}'", def.name),
                    });
                }
                if index.insert(KeyValue::from(id), ri).is_some() {
                    return Err(StoreError::DuplicateTupleId {
                        table: def.name.clone(),
                        id: id.render(),
                    });
                }
            }
            Some(index)
        }
        None => None,
    };

    let trail_store = match def.scheme {
        StorageScheme::Inline => TrailStore::Inline(trails),
        StorageScheme::OffTable => {
            let idx = id_idx.expect("off-table scheme validated to have an id column");
            let mut map = HashMap::with_capacity(rows.len());
            for (row, trail) in rows.iter().zip(trails) {
                map.insert(KeyValue::from(&row[idx]), trail);
            }
            TrailStore::OffTable(map)
        }
    };

    Ok(StoredTable {
        def,
        rows,
        trails: trail_store,
        id_index,
    })
}

/// Streaming scan over a stored table.
pub struct ScanIter<'a> {
    table: &'a StoredTable,
    next: usize,
    unit_trail: Option<QualityTrail>,
}

impl ScanIter<'_> {
    pub fn schema(&self) -> &Schema {
        &self.table.def.schema
    }
}

impl Iterator for ScanIter<'_> {
    type Item = Result<QTuple, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.table.rows.len() {
            return None;
        }
        let row = self.table.rows[self.next].clone();
        let trail = match &self.unit_trail {
            Some(unit) => Ok(unit.clone()),
            None => self.table.trail_for_row(self.next).cloned(),
        };
        self.next += 1;
        Some(trail.map(|trail| QTuple::new(row, trail)))
    }
}

fn infer_type<'a>(cells: impl Iterator<Item = &'a str>) -> ColumnType {
    let mut any = false;
    let mut all_int = true;
    let mut all_real = true;
    for cell in cells {
        if cell.is_empty() {
            continue;
        }
        any = true;
        if all_int && cell.parse::<i64>().is_err() {
            all_int = false;
        }
        if all_real && !cell.parse::<f64>().map(f64::is_finite).unwrap_or(false) {
            all_real = false;
        }
        if !all_int && !all_real {
            break;
        }
    }
    if !any {
        ColumnType::Text
    } else if all_int {
        ColumnType::Int
    } else if all_real {
        ColumnType::Real
    } else {
        ColumnType::Text
    }
}

/// Parses one CSV cell per the column type; the empty field is NULL.
pub fn parse_cell(cell: &str, ty: ColumnType) -> Result<Value, String> {
    if cell.is_empty() {
        return Ok(Value::Null);
    }
    match ty {
        ColumnType::Int => cell
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|_| format!("'{cell}' is not an integer")),
        ColumnType::Real => {
            let r: f64 = cell.parse().map_err(|_| format!("'{cell}' is not a number"))?;
            if !r.is_finite() {
                return Err(format!("'{cell}' is not a finite number"));
            }
            Ok(Value::Real(r))
        }
        ColumnType::Text => Ok(Value::Text(cell.to_string())),
    }
}

/// Writes a relation as CSV with a trailing `__qtrail` column.
pub fn write_relation_csv<W: Write>(rel: &Relation, writer: W) -> Result<(), StoreError> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = rel
        .schema()
        .columns()
        .iter()
        .map(|c| c.name.as_str())
        .collect();
    header.push(QTRAIL_COLUMN);
    csv.write_record(&header)?;
    for t in rel.tuples() {
        let mut record: Vec<String> = t.values.iter().map(Value::render).collect();
        record.push(serialize_trail(&t.trail));
        csv.write_record(&record)?;
    }
    csv.flush().map_err(StoreError::Io)?;
    Ok(())
}

/// Saves a relation to a CSV file; `load_csv` inverts this.
pub fn save_relation(rel: &Relation, path: &Path) -> Result<(), StoreError> {
    let file = File::create(path)?;
    write_relation_csv(rel, file)
}

/// Reads a quality-event CSV with the fixed header
/// `table,tuple_id,action,score,timestamp,event`.
pub fn read_events_csv(path: &Path) -> Result<Vec<QualityEvent>, StoreError> {
    let file = File::open(path)?;
    read_events_reader(file)
}

pub fn read_events_reader<R: Read>(reader: R) -> Result<Vec<QualityEvent>, StoreError> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected = ["table", "tuple_id", "action", "score", "timestamp", "event"];
    let headers = csv.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(StoreError::Malformed {
            line: 1,
            message: format!("event header must be '{}'", expected.join(",")),
        });
    }
    let mut events = Vec::new();
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        if record.len() != expected.len() {
            return Err(StoreError::Malformed {
                line,
                message: format!("event row has {} fields, expected 6", record.len()),
            });
        }
        let action = EventAction::parse(&record[2]).ok_or_else(|| StoreError::Malformed {
            line,
            message: format!("unknown action '{}'", &record[2]),
        })?;
        let score = if record[3].is_empty() {
            None
        } else {
            Some(record[3].parse::<u32>().map_err(|_| StoreError::Malformed {
                line,
                message: format!("malformed score '{}'", &record[3]),
            })?)
        };
        let timestamp = record[4].parse::<u64>().map_err(|_| StoreError::Malformed {
            line,
            message: format!("malformed timestamp '{}'", &record[4]),
        })?;
        let event_text = if record[5].is_empty() {
            None
        } else {
            Some(record[5].to_string())
        };
        events.push(QualityEvent {
            table: record[0].to_string(),
            tuple_id: record[1].to_string(),
            action,
            score,
            timestamp,
            event_text,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GENES: &str = "\
id,name,start
1,brca1,100
2,tp53,200
3,egfr,300
";

    const GENES_WITH_TRAILS: &str = "\
id,name,__qtrail
1,brca1,\"5|0|import|min:5,max:5,sum:5,cnt:1;4|7|CAUTION|min:4,max:4,sum:4,cnt:1\"
2,tp53,\"8|2||min:8,max:8,sum:8,cnt:1\"
";

    fn load(
        catalog: &mut Catalog,
        csv: &str,
        table: &str,
        scheme: StorageScheme,
        id: Option<&str>,
    ) -> usize {
        let options = LoadOptions {
            scheme: Some(scheme),
            id_column: id.map(str::to_owned),
            ..LoadOptions::default()
        };
        catalog
            .load_csv_reader(csv.as_bytes(), table, &options, &EngineConfig::default())
            .unwrap()
    }

    #[test]
    fn load_without_trails_gets_default_initial_transition() {
        let mut catalog = Catalog::new();
        let n = load(&mut catalog, GENES, "gene", StorageScheme::Inline, Some("id"));
        assert_eq!(n, 3);
        let rel = catalog.relation("gene").unwrap();
        for t in rel.tuples() {
            assert_eq!(t.trail.size(), 1);
            assert_eq!(t.trail.first().score().get(), 10);
            assert_eq!(t.trail.first().timestamp().get(), 0);
        }
        // Types inferred: id/start int, name text.
        assert_eq!(rel.schema().columns()[0].ty, ColumnType::Int);
        assert_eq!(rel.schema().columns()[1].ty, ColumnType::Text);
        assert_eq!(rel.schema().columns()[2].ty, ColumnType::Int);
    }

    #[test]
    fn trail_column_is_parsed_and_schemes_stream_identically() {
        let mut inline = Catalog::new();
        load(
            &mut inline,
            GENES_WITH_TRAILS,
            "gene",
            StorageScheme::Inline,
            Some("id"),
        );
        let mut off = Catalog::new();
        load(
            &mut off,
            GENES_WITH_TRAILS,
            "gene",
            StorageScheme::OffTable,
            Some("id"),
        );
        let a = inline.relation("gene").unwrap();
        let b = off.relation("gene").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tuples()[0].trail.size(), 2);
        assert_eq!(
            a.tuples()[0].trail.transition(1).unwrap().triggering_event(),
            Some("CAUTION")
        );
    }

    #[test]
    fn off_table_requires_id_and_unique_ids() {
        let mut catalog = Catalog::new();
        let options = LoadOptions {
            scheme: Some(StorageScheme::OffTable),
            ..LoadOptions::default()
        };
        let err = catalog
            .load_csv_reader(GENES.as_bytes(), "gene", &options, &EngineConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("tuple-id"));

        let dup = "id,name\n1,a\n1,b\n";
        let options = LoadOptions {
            scheme: Some(StorageScheme::OffTable),
            id_column: Some("id".into()),
            ..LoadOptions::default()
        };
        let err = catalog
            .load_csv_reader(dup.as_bytes(), "gene", &options, &EngineConfig::default())
            .unwrap_err();
        assert!(matches!(err, StoreError::DuplicateTupleId { .. }));
    }

    #[test]
    fn malformed_trail_reports_line() {
        let csv = "id,__qtrail\n1,\"5|0||min:5,max:5,sum:5,cnt:1\"\n2,not-a-trail\n";
        let mut catalog = Catalog::new();
        let err = catalog
            .load_csv_reader(
                csv.as_bytes(),
                "t",
                &LoadOptions::default(),
                &EngineConfig::default(),
            )
            .unwrap_err();
        match err {
            StoreError::TrailParse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_table_rejected() {
        let mut catalog = Catalog::new();
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, None);
        let err = catalog
            .load_csv_reader(
                GENES.as_bytes(),
                "gene",
                &LoadOptions::default(),
                &EngineConfig::default(),
            )
            .unwrap_err();
        assert!(matches!(err, StoreError::DuplicateTable(_)));
        assert!(catalog.remove_table("gene"));
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, None);
    }

    fn event(
        table: &str,
        id: &str,
        action: EventAction,
        score: Option<u32>,
        ts: u64,
        text: Option<&str>,
    ) -> QualityEvent {
        QualityEvent {
            table: table.into(),
            tuple_id: id.into(),
            action,
            score,
            timestamp: ts,
            event_text: text.map(str::to_owned),
        }
    }

    #[test]
    fn event_replay_clamps_and_rejects() {
        let mut catalog = Catalog::new();
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, Some("id"));
        let config = EngineConfig::default();

        let events = vec![
            // Initial score is 10; inc clamps by repeating the same score.
            event("gene", "1", EventAction::Inc, None, 5, Some("new publication")),
            event("gene", "1", EventAction::Dec, None, 9, Some("CAUTION: possible error")),
            event("gene", "1", EventAction::Dec, None, 12, None),
            // Non-monotone timestamp: rejected.
            event("gene", "1", EventAction::Inc, None, 12, None),
            event("gene", "2", EventAction::Set, Some(3), 4, None),
            // Out-of-range set: rejected.
            event("gene", "2", EventAction::Set, Some(11), 6, None),
            // Unknown tuple and table: rejected.
            event("gene", "99", EventAction::Inc, None, 7, None),
            event("nope", "1", EventAction::Inc, None, 8, None),
            event("gene", "3", EventAction::Hold, None, 3, Some("revalidated")),
        ];
        let outcome = catalog.apply_events(&events, &config);
        assert_eq!(outcome.applied, 5);
        assert_eq!(outcome.rejections.len(), 4);
        assert_eq!(
            outcome.rejections.iter().map(|r| r.index).collect::<Vec<_>>(),
            vec![3, 5, 6, 7]
        );

        let rel = catalog.relation("gene").unwrap();
        let g1 = &rel.tuples()[0].trail;
        assert_eq!(
            g1.transitions()
                .iter()
                .map(|t| (t.score().get(), t.timestamp().get()))
                .collect::<Vec<_>>(),
            vec![(10, 0), (10, 5), (9, 9), (8, 12)]
        );
        let g3 = &rel.tuples()[2].trail;
        assert_eq!(g3.last().score().get(), 10, "hold repeats the score");
        assert_eq!(g3.size(), 2, "hold still materializes a transition");
    }

    #[test]
    fn trail_limit_trims_after_each_event() {
        let mut catalog = Catalog::new();
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, Some("id"));
        let config = EngineConfig {
            trail_limit: Some(5),
            ..EngineConfig::default()
        };
        let events: Vec<QualityEvent> = (1..=37)
            .map(|i| event("gene", "1", if i % 2 == 0 { EventAction::Inc } else { EventAction::Dec }, None, i, None))
            .collect();
        let outcome = catalog.apply_events(&events, &config);
        assert_eq!(outcome.applied, 37);
        let rel = catalog.relation("gene").unwrap();
        let trail = &rel.tuples()[0].trail;
        assert_eq!(trail.size(), 5);
        assert_eq!(trail.last().timestamp().get(), 37);
        assert_eq!(trail.first().timestamp().get(), 33);
    }

    #[test]
    fn save_and_reload_round_trips() {
        let mut catalog = Catalog::new();
        load(
            &mut catalog,
            GENES_WITH_TRAILS,
            "gene",
            StorageScheme::Inline,
            Some("id"),
        );
        let rel = catalog.relation("gene").unwrap();

        let mut bytes = Vec::new();
        write_relation_csv(&rel, &mut bytes).unwrap();

        let mut catalog2 = Catalog::new();
        catalog2
            .load_csv_reader(
                bytes.as_slice(),
                "gene2",
                &LoadOptions::default(),
                &EngineConfig::default(),
            )
            .unwrap();
        let rel2 = catalog2.relation("gene2").unwrap();
        assert_eq!(rel.schema().columns(), rel2.schema().columns());
        assert_eq!(rel.tuples(), rel2.tuples());
    }

    #[test]
    fn event_text_with_delimiters_survives_save_load() {
        let mut catalog = Catalog::new();
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, Some("id"));
        let config = EngineConfig::default();
        catalog.apply_events(
            &[event(
                "gene",
                "1",
                EventAction::Dec,
                None,
                5,
                Some("odd|text;with,delims%20"),
            )],
            &config,
        );
        let rel = catalog.relation("gene").unwrap();
        let mut bytes = Vec::new();
        write_relation_csv(&rel, &mut bytes).unwrap();
        let mut catalog2 = Catalog::new();
        catalog2
            .load_csv_reader(bytes.as_slice(), "g2", &LoadOptions::default(), &config)
            .unwrap();
        let rel2 = catalog2.relation("g2").unwrap();
        assert_eq!(
            rel2.tuples()[0].trail.last().triggering_event(),
            Some("odd|text;with,delims%20")
        );
    }

    #[test]
    fn storage_report_counts_transitions_and_bytes() {
        let mut catalog = Catalog::new();
        load(&mut catalog, GENES, "gene", StorageScheme::Inline, Some("id"));
        let reports = catalog.storage_report();
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert_eq!(r.tuples, 3);
        assert_eq!(r.transitions, 3, "initial transitions only");
        assert!(r.trail_bytes > 0 && r.data_bytes > 0);

        // Off-table report for the same data differs only by id-key bytes.
        let mut off = Catalog::new();
        load(&mut off, GENES, "gene", StorageScheme::OffTable, Some("id"));
        let off_report = off.storage_report();
        let id_bytes: u64 = ["1", "2", "3"].iter().map(|s| s.len() as u64).sum();
        assert_eq!(off_report[0].trail_bytes, r.trail_bytes + id_bytes);
        assert_eq!(off_report[0].data_bytes, r.data_bytes);
    }

    #[test]
    fn dangling_off_table_trail_is_an_integrity_error() {
        let mut catalog = Catalog::new();
        load(
            &mut catalog,
            GENES_WITH_TRAILS,
            "gene",
            StorageScheme::OffTable,
            Some("id"),
        );
        // Corrupt the companion map directly.
        if let TrailStore::OffTable(map) = &mut catalog.tables.get_mut("gene").unwrap().trails {
            map.remove(&KeyValue::Int(2));
        }
        let err = catalog
            .scan("gene")
            .unwrap()
            .collect::<Result<Vec<_>, _>>()
            .unwrap_err();
        match err {
            StoreError::DanglingTrail { id, .. } => assert_eq!(id, "2"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn events_csv_parses_fixed_header() {
        let csv = "table,tuple_id,action,score,timestamp,event\n\
                   gene,1,inc,,5,new publication\n\
                   gene,2,set,3,6,\n";
        let events = read_events_reader(csv.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].action, EventAction::Inc);
        assert_eq!(events[0].score, None);
        assert_eq!(events[0].event_text.as_deref(), Some("new publication"));
        assert_eq!(events[1].action, EventAction::Set);
        assert_eq!(events[1].score, Some(3));

        let bad = "table,id,action,score,timestamp,event\n";
        assert!(read_events_reader(bad.as_bytes()).is_err());
        let bad = "table,tuple_id,action,score,timestamp,event\ngene,1,frobnicate,,5,\n";
        assert!(read_events_reader(bad.as_bytes()).is_err());
    }

    #[test]
    fn empty_relation_saves_header_only() {
        let rel = Relation::new(Schema::new(vec![Column::new("a", ColumnType::Int)]));
        let mut bytes = Vec::new();
        write_relation_csv(&rel, &mut bytes).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,__qtrail\n");
    }
}
