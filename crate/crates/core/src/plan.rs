//! Logical plans: the JSON plan grammar and the pull-based executor.
//!
//! A plan node is a JSON object with an `"op"` of `scan`, `select`,
//! `project`, `join`, `outer_join`, `cross`, `union`, `intersect`,
//! `difference`, `distinct`, or `group`. Unary operators take their child
//! under `"input"`, binary ones under `"left"`/`"right"`. Predicates are
//! expression trees of `{"cmp": op, "col": name, "lit": value}` (or
//! `"col2"` for column-column comparisons) composed with `{"and": [...]}`,
//! `{"or": [...]}` and `{"not": ...}`.
//!
//! Execution pulls tuples through per-operator pipelines: scans, selections
//! and projections stream; joins, set operators, duplicate elimination and
//! grouping materialize their inputs.

use serde_json::Value as Json;

use crate::aggregate::{
    group_aggregate_impl, AggFn, AggMode, AggregatorSpec, GroupMetrics,
};
use crate::algebra::{
    cross_product_impl, difference_impl, distinct_impl, intersect_impl, natural_join_impl,
    outer_join_impl, theta_join_impl, union_impl, OuterKind,
};
use crate::config::EngineConfig;
use crate::error::PlanError;
use crate::predicate::{CmpOp, Operand, Predicate};
use crate::relation::{QTuple, Relation, Schema};
use crate::store::Catalog;
use crate::trail::{QualityScore, QualityTrail, QualityTransition, Timestamp};
use crate::value::Value;

/// A logical plan tree.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanNode {
    Scan {
        table: String,
    },
    Select {
        pred: Predicate,
        input: Box<PlanNode>,
    },
    Project {
        cols: Vec<String>,
        input: Box<PlanNode>,
    },
    Join {
        natural: bool,
        on: Option<Predicate>,
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    OuterJoin {
        kind: OuterKind,
        on: Predicate,
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    Cross {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    Union {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    Intersect {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    Difference {
        left: Box<PlanNode>,
        right: Box<PlanNode>,
    },
    Distinct {
        input: Box<PlanNode>,
    },
    Group {
        by: Vec<String>,
        aggs: Vec<AggregatorSpec>,
        mode: AggMode,
        input: Box<PlanNode>,
    },
}

/// Parses a plan from JSON text. Errors carry the JSON path of the
/// offending node.
pub fn parse_plan(text: &str) -> Result<PlanNode, PlanError> {
    let json: Json = serde_json::from_str(text)
        .map_err(|e| PlanError::json("$", format!("invalid JSON: {e}")))?;
    parse_node(&json, "$")
}

fn err(path: &str, message: impl Into<String>) -> PlanError {
    PlanError::json(path, message)
}

fn obj<'a>(v: &'a Json, path: &str) -> Result<&'a serde_json::Map<String, Json>, PlanError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn get<'a>(
    map: &'a serde_json::Map<String, Json>,
    key: &str,
    path: &str,
) -> Result<&'a Json, PlanError> {
    map.get(key)
        .ok_or_else(|| err(path, format!("missing field \"{key}\"")))
}

fn str_field(map: &serde_json::Map<String, Json>, key: &str, path: &str) -> Result<String, PlanError> {
    get(map, key, path)?
        .as_str()
        .map(str::to_owned)
        .ok_or_else(|| err(&format!("{path}.{key}"), "expected a string"))
}

fn str_array(v: &Json, path: &str) -> Result<Vec<String>, PlanError> {
    let arr = v.as_array().ok_or_else(|| err(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, s)| {
            s.as_str()
                .map(str::to_owned)
                .ok_or_else(|| err(&format!("{path}[{i}]"), "expected a string"))
        })
        .collect()
}

fn child(
    map: &serde_json::Map<String, Json>,
    key: &str,
    path: &str,
) -> Result<Box<PlanNode>, PlanError> {
    Ok(Box::new(parse_node(
        get(map, key, path)?,
        &format!("{path}.{key}"),
    )?))
}

fn parse_node(v: &Json, path: &str) -> Result<PlanNode, PlanError> {
    let map = obj(v, path)?;
    let op = str_field(map, "op", path)?;
    match op.as_str() {
        "scan" => Ok(PlanNode::Scan {
            table: str_field(map, "table", path)?,
        }),
        "select" => Ok(PlanNode::Select {
            pred: parse_pred(get(map, "pred", path)?, &format!("{path}.pred"))?,
            input: child(map, "input", path)?,
        }),
        "project" => Ok(PlanNode::Project {
            cols: str_array(get(map, "cols", path)?, &format!("{path}.cols"))?,
            input: child(map, "input", path)?,
        }),
        "join" => {
            let natural = match map.get("natural") {
                None => false,
                Some(v) => v
                    .as_bool()
                    .ok_or_else(|| err(&format!("{path}.natural"), "expected a boolean"))?,
            };
            let on = map
                .get("on")
                .map(|v| parse_pred(v, &format!("{path}.on")))
                .transpose()?;
            if natural == on.is_some() {
                return Err(err(
                    path,
                    "join requires exactly one of \"natural\": true or \"on\"",
                ));
            }
            Ok(PlanNode::Join {
                natural,
                on,
                left: child(map, "left", path)?,
                right: child(map, "right", path)?,
            })
        }
        "outer_join" => {
            let kind = match str_field(map, "kind", path)?.as_str() {
                "left" => OuterKind::Left,
                "right" => OuterKind::Right,
                "full" => OuterKind::Full,
                other => {
                    return Err(err(
                        &format!("{path}.kind"),
                        format!("unknown outer join kind '{other}'"),
                    ))
                }
            };
            Ok(PlanNode::OuterJoin {
                kind,
                on: parse_pred(get(map, "on", path)?, &format!("{path}.on"))?,
                left: child(map, "left", path)?,
                right: child(map, "right", path)?,
            })
        }
        "cross" => Ok(PlanNode::Cross {
            left: child(map, "left", path)?,
            right: child(map, "right", path)?,
        }),
        "union" => Ok(PlanNode::Union {
            left: child(map, "left", path)?,
            right: child(map, "right", path)?,
        }),
        "intersect" => Ok(PlanNode::Intersect {
            left: child(map, "left", path)?,
            right: child(map, "right", path)?,
        }),
        "difference" => Ok(PlanNode::Difference {
            left: child(map, "left", path)?,
            right: child(map, "right", path)?,
        }),
        "distinct" => Ok(PlanNode::Distinct {
            input: child(map, "input", path)?,
        }),
        "group" => {
            let by = str_array(get(map, "by", path)?, &format!("{path}.by"))?;
            let aggs_json = get(map, "aggs", path)?
                .as_array()
                .ok_or_else(|| err(&format!("{path}.aggs"), "expected an array"))?;
            let mut aggs = Vec::with_capacity(aggs_json.len());
            for (i, a) in aggs_json.iter().enumerate() {
                aggs.push(parse_agg(a, &format!("{path}.aggs[{i}]"))?);
            }
            let mode = match map.get("mode") {
                None => AggMode::Open,
                Some(v) => match v.as_str() {
                    Some("open") => AggMode::Open,
                    Some("black") => AggMode::Black,
                    _ => {
                        return Err(err(
                            &format!("{path}.mode"),
                            "expected \"open\" or \"black\"",
                        ))
                    }
                },
            };
            Ok(PlanNode::Group {
                by,
                aggs,
                mode,
                input: child(map, "input", path)?,
            })
        }
        other => Err(err(path, format!("unknown op '{other}'"))),
    }
}

fn parse_agg(v: &Json, path: &str) -> Result<AggregatorSpec, PlanError> {
    let map = obj(v, path)?;
    let func_name = str_field(map, "fn", path)?;
    let func = AggFn::parse(&func_name).ok_or_else(|| {
        err(
            &format!("{path}.fn"),
            format!("unknown aggregate '{func_name}' (count, sum, avg, min, max)"),
        )
    })?;
    let column = match map.get("col") {
        None | Some(Json::Null) => None,
        Some(v) => Some(
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| err(&format!("{path}.col"), "expected a string"))?,
        ),
    };
    if column.is_none() && func != AggFn::Count {
        return Err(err(path, format!("{func_name} requires \"col\"")));
    }
    let output = match map.get("as") {
        None => match &column {
            Some(c) => format!("{func_name}_{c}"),
            None => func_name.clone(),
        },
        Some(v) => v
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| err(&format!("{path}.as"), "expected a string"))?,
    };
    Ok(AggregatorSpec {
        func,
        column,
        output,
    })
}

fn parse_pred(v: &Json, path: &str) -> Result<Predicate, PlanError> {
    let map = obj(v, path)?;
    if let Some(cmp) = map.get("cmp") {
        let op_name = cmp
            .as_str()
            .ok_or_else(|| err(&format!("{path}.cmp"), "expected a string"))?;
        let op = CmpOp::parse(op_name).ok_or_else(|| {
            err(
                &format!("{path}.cmp"),
                format!("unknown comparison '{op_name}'"),
            )
        })?;
        let column = str_field(map, "col", path)?;
        let rhs = match (map.get("lit"), map.get("col2")) {
            (Some(lit), None) => Operand::Literal(parse_literal(lit, &format!("{path}.lit"))?),
            (None, Some(c)) => Operand::Column(
                c.as_str()
                    .map(str::to_owned)
                    .ok_or_else(|| err(&format!("{path}.col2"), "expected a string"))?,
            ),
            _ => {
                return Err(err(
                    path,
                    "comparison requires exactly one of \"lit\" or \"col2\"",
                ))
            }
        };
        return Ok(Predicate::Cmp { op, column, rhs });
    }
    if let Some(v) = map.get("and") {
        let arr = v
            .as_array()
            .ok_or_else(|| err(&format!("{path}.and"), "expected an array"))?;
        let ps = arr
            .iter()
            .enumerate()
            .map(|(i, p)| parse_pred(p, &format!("{path}.and[{i}]")))
            .collect::<Result<_, _>>()?;
        return Ok(Predicate::And(ps));
    }
    if let Some(v) = map.get("or") {
        let arr = v
            .as_array()
            .ok_or_else(|| err(&format!("{path}.or"), "expected an array"))?;
        let ps = arr
            .iter()
            .enumerate()
            .map(|(i, p)| parse_pred(p, &format!("{path}.or[{i}]")))
            .collect::<Result<_, _>>()?;
        return Ok(Predicate::Or(ps));
    }
    if let Some(v) = map.get("not") {
        return Ok(Predicate::Not(Box::new(parse_pred(
            v,
            &format!("{path}.not"),
        )?)));
    }
    Err(err(
        path,
        "expected a predicate object (\"cmp\", \"and\", \"or\", or \"not\")",
    ))
}

fn parse_literal(v: &Json, path: &str) -> Result<Value, PlanError> {
    match v {
        Json::Null => Ok(Value::Null),
        Json::String(s) => Ok(Value::Text(s.clone())),
        Json::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Value::Int(i))
            } else if let Some(f) = n.as_f64() {
                Ok(Value::Real(f))
            } else {
                Err(err(path, "numeric literal out of range"))
            }
        }
        _ => Err(err(path, "expected a literal (number, string, or null)")),
    }
}

/// Execution switches.
#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    /// When false, scans attach a fixed unit trail and operators skip trail
    /// derivation entirely; used to measure propagation overhead.
    pub propagate_quality: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            propagate_quality: true,
        }
    }
}

/// One pipeline stage.
trait Operator {
    fn schema(&self) -> &Schema;
    fn next(&mut self) -> Option<Result<QTuple, PlanError>>;
}

struct ScanOp<'a> {
    iter: crate::store::ScanIter<'a>,
    schema: Schema,
}

impl Operator for ScanOp<'_> {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next(&mut self) -> Option<Result<QTuple, PlanError>> {
        self.iter.next().map(|r| r.map_err(PlanError::Store))
    }
}

struct SelectOp<'a> {
    child: Box<dyn Operator + 'a>,
    pred: Predicate,
}

impl Operator for SelectOp<'_> {
    fn schema(&self) -> &Schema {
        self.child.schema()
    }

    fn next(&mut self) -> Option<Result<QTuple, PlanError>> {
        loop {
            let tuple = match self.child.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e)),
            };
            match self.pred.eval(self.child.schema(), &tuple.values) {
                Ok(true) => return Some(Ok(tuple)),
                Ok(false) => continue,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

struct ProjectOp<'a> {
    child: Box<dyn Operator + 'a>,
    indices: Vec<usize>,
    schema: Schema,
}

impl Operator for ProjectOp<'_> {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next(&mut self) -> Option<Result<QTuple, PlanError>> {
        let tuple = match self.child.next()? {
            Ok(t) => t,
            Err(e) => return Some(Err(e)),
        };
        let values = self.indices.iter().map(|&i| tuple.values[i].clone()).collect();
        Some(Ok(QTuple::new(values, tuple.trail)))
    }
}

struct Materialized {
    schema: Schema,
    iter: std::vec::IntoIter<QTuple>,
}

impl Materialized {
    fn new(rel: Relation) -> Self {
        let schema = rel.schema().clone();
        Materialized {
            schema,
            iter: rel.into_tuples().into_iter(),
        }
    }
}

impl Operator for Materialized {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn next(&mut self) -> Option<Result<QTuple, PlanError>> {
        self.iter.next().map(Ok)
    }
}

fn drain(op: &mut dyn Operator) -> Result<Relation, PlanError> {
    let mut rel = Relation::new(op.schema().clone());
    while let Some(tuple) = op.next() {
        rel.push_unchecked(tuple?);
    }
    Ok(rel)
}

struct ExecContext<'a> {
    catalog: &'a Catalog,
    config: &'a EngineConfig,
    quality: bool,
    metrics: GroupMetrics,
}

impl<'a> ExecContext<'a> {
    fn unit_trail(&self) -> QualityTrail {
        let score = QualityScore::new(self.config.max_quality, self.config.max_quality)
            .expect("max quality is a valid score");
        QualityTrail::new(QualityTransition::new(score, Timestamp::new(0), None))
    }

    fn build(&mut self, plan: &PlanNode) -> Result<Box<dyn Operator + 'a>, PlanError> {
        match plan {
            PlanNode::Scan { table } => {
                let iter = if self.quality {
                    self.catalog.scan(table)?
                } else {
                    self.catalog.scan_with_unit(table, self.unit_trail())?
                };
                let schema = iter.schema().clone();
                Ok(Box::new(ScanOp { iter, schema }))
            }
            PlanNode::Select { pred, input } => {
                let child = self.build(input)?;
                pred.validate(child.schema())?;
                Ok(Box::new(SelectOp {
                    child,
                    pred: pred.clone(),
                }))
            }
            PlanNode::Project { cols, input } => {
                let child = self.build(input)?;
                let indices: Vec<usize> = cols
                    .iter()
                    .map(|c| child.schema().col_index(c))
                    .collect::<Result<_, _>>()?;
                let schema = Schema::new(
                    indices
                        .iter()
                        .map(|&i| child.schema().columns()[i].clone())
                        .collect(),
                );
                Ok(Box::new(ProjectOp {
                    child,
                    indices,
                    schema,
                }))
            }
            PlanNode::Join {
                natural,
                on,
                left,
                right,
            } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                let rel = if *natural {
                    natural_join_impl(&l, &r, self.quality)?
                } else {
                    theta_join_impl(
                        &l,
                        &r,
                        on.as_ref().expect("parser enforces on for non-natural joins"),
                        self.quality,
                    )?
                };
                Ok(Box::new(Materialized::new(rel)))
            }
            PlanNode::OuterJoin {
                kind,
                on,
                left,
                right,
            } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                Ok(Box::new(Materialized::new(outer_join_impl(
                    &l,
                    &r,
                    on,
                    *kind,
                    self.quality,
                )?)))
            }
            PlanNode::Cross { left, right } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                Ok(Box::new(Materialized::new(cross_product_impl(
                    &l,
                    &r,
                    self.quality,
                )?)))
            }
            PlanNode::Union { left, right } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                Ok(Box::new(Materialized::new(union_impl(&l, &r, self.quality)?)))
            }
            PlanNode::Intersect { left, right } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                Ok(Box::new(Materialized::new(intersect_impl(
                    &l,
                    &r,
                    self.quality,
                )?)))
            }
            PlanNode::Difference { left, right } => {
                let l = self.materialize(left)?;
                let r = self.materialize(right)?;
                Ok(Box::new(Materialized::new(difference_impl(
                    &l,
                    &r,
                    self.quality,
                )?)))
            }
            PlanNode::Distinct { input } => {
                let rel = self.materialize(input)?;
                Ok(Box::new(Materialized::new(distinct_impl(&rel, self.quality)?)))
            }
            PlanNode::Group {
                by,
                aggs,
                mode,
                input,
            } => {
                let rel = self.materialize(input)?;
                let (out, metrics) =
                    group_aggregate_impl(&rel, by, aggs, *mode, self.config, self.quality)?;
                self.metrics.absorb(&metrics);
                Ok(Box::new(Materialized::new(out)))
            }
        }
    }

    fn materialize(&mut self, plan: &PlanNode) -> Result<Relation, PlanError> {
        let mut op = self.build(plan)?;
        drain(op.as_mut())
    }
}

/// Executes a plan against a catalog snapshot, returning the result and the
/// grouping metrics accumulated across the plan's group operators.
pub fn execute_plan(
    plan: &PlanNode,
    catalog: &Catalog,
    config: &EngineConfig,
) -> Result<(Relation, GroupMetrics), PlanError> {
    execute_plan_with(plan, catalog, config, ExecOptions::default())
}

pub fn execute_plan_with(
    plan: &PlanNode,
    catalog: &Catalog,
    config: &EngineConfig,
    options: ExecOptions,
) -> Result<(Relation, GroupMetrics), PlanError> {
    let mut ctx = ExecContext {
        catalog,
        config,
        quality: options.propagate_quality,
        metrics: GroupMetrics::default(),
    };
    let mut root = ctx.build(plan)?;
    let rel = drain(root.as_mut())?;
    let metrics = ctx.metrics;
    Ok((rel, metrics))
}
