//! Synthetic-workload bench: relative quality-propagation overhead.
//!
//! Generates seeded random tables, registers them under both storage
//! schemes, and times each query class with trail propagation on and off.
//! Only relative numbers are reported; the data and result fingerprints
//! make the rows comparable across runs and configurations.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::{self, Write};
use std::time::Instant;

use qtrail_core::aggregate::{AggFn, AggMode, AggregatorSpec};
use qtrail_core::plan::{execute_plan_with, ExecOptions, PlanNode};
use qtrail_core::predicate::{CmpOp, Predicate};
use qtrail_core::relation::{Column, QTuple, Relation, Schema};
use qtrail_core::store::{Catalog, StorageScheme};
use qtrail_core::trail::{
    QualityScore, QualityTrail, QualityTransition, Timestamp, TrimDirection,
};
use qtrail_core::value::{ColumnType, Value};
use qtrail_core::EngineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

pub struct Params {
    pub seed: u64,
    pub tuples: usize,
    pub groups: i64,
    pub trail_len: usize,
    pub minimal: bool,
}

fn random_trail(rng: &mut ChaCha8Rng, params: &Params, config: &EngineConfig) -> QualityTrail {
    let len = rng.gen_range(1..=params.trail_len.max(1));
    let mut score = rng.gen_range(1..=config.max_quality);
    let mut ts = rng.gen_range(0..16u64);
    let mut transitions = Vec::with_capacity(len);
    for i in 0..len {
        let event = if params.minimal {
            None
        } else {
            Some(format!("event {i} on tick {ts}"))
        };
        transitions.push(QualityTransition::new(
            QualityScore::new(score, config.max_quality).expect("generated in range"),
            Timestamp::new(ts),
            event.as_deref(),
        ));
        ts += rng.gen_range(1..8u64);
        score = if rng.gen_bool(0.5) {
            (score + 1).min(config.max_quality)
        } else {
            (score - 1).max(1)
        };
    }
    let trail = QualityTrail::from_transitions(transitions).expect("timestamps increase");
    match config.trail_limit {
        Some(k) => trail
            .trim(TrimDirection::KeepNewest, k as usize)
            .expect("limit validated nonzero"),
        None => trail,
    }
}

fn generate(params: &Params, config: &EngineConfig) -> (Relation, Relation) {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let r_schema = Schema::new(vec![
        Column::new("id", ColumnType::Int),
        Column::new("grp", ColumnType::Int),
        Column::new("val", ColumnType::Int),
    ]);
    let mut r = Relation::new(r_schema);
    for id in 0..params.tuples {
        let values = vec![
            Value::Int(id as i64),
            Value::Int(rng.gen_range(0..params.groups.max(1))),
            Value::Int(rng.gen_range(0..1000)),
        ];
        let trail = random_trail(&mut rng, params, config);
        r.push(QTuple::new(values, trail)).expect("schema conformant");
    }
    let s_schema = Schema::new(vec![
        Column::new("sid", ColumnType::Int),
        Column::new("rid", ColumnType::Int),
        Column::new("w", ColumnType::Int),
    ]);
    let mut s = Relation::new(s_schema);
    for sid in 0..params.tuples {
        let values = vec![
            Value::Int(sid as i64),
            Value::Int(rng.gen_range(0..params.tuples.max(1)) as i64),
            Value::Int(rng.gen_range(0..1000)),
        ];
        let trail = random_trail(&mut rng, params, config);
        s.push(QTuple::new(values, trail)).expect("schema conformant");
    }
    (r, s)
}

fn fingerprint(rel: &Relation) -> String {
    let mut hasher = DefaultHasher::new();
    for row in rel.fingerprint() {
        row.hash(&mut hasher);
    }
    format!("{:016x}", hasher.finish())
}

fn plans() -> Vec<(&'static str, PlanNode)> {
    let scan_r = PlanNode::Scan { table: "r".into() };
    let scan_s = PlanNode::Scan { table: "s".into() };
    vec![
        (
            "sp",
            PlanNode::Project {
                cols: vec!["id".into(), "val".into()],
                input: Box::new(PlanNode::Select {
                    pred: Predicate::cmp_lit(CmpOp::Ge, "val", Value::Int(500)),
                    input: Box::new(scan_r.clone()),
                }),
            },
        ),
        (
            "join",
            PlanNode::Join {
                natural: false,
                on: Some(Predicate::cmp_cols(CmpOp::Eq, "id", "rid")),
                left: Box::new(scan_r.clone()),
                right: Box::new(scan_s),
            },
        ),
        (
            "agg",
            PlanNode::Group {
                by: vec!["grp".into()],
                aggs: vec![
                    AggregatorSpec {
                        func: AggFn::Min,
                        column: Some("val".into()),
                        output: "lo".into(),
                    },
                    AggregatorSpec {
                        func: AggFn::Max,
                        column: Some("val".into()),
                        output: "hi".into(),
                    },
                ],
                mode: AggMode::Open,
                input: Box::new(scan_r),
            },
        ),
    ]
}

fn limit_str(limit: Option<u64>) -> String {
    match limit {
        Some(n) => n.to_string(),
        None => "unlimited".into(),
    }
}

pub fn run(config: &EngineConfig, params: Params) -> Result<(), CliError> {
    let (r, s) = generate(&params, config);
    let data_fp = {
        let mut hasher = DefaultHasher::new();
        fingerprint(&r).hash(&mut hasher);
        fingerprint(&s).hash(&mut hasher);
        format!("{:016x}", hasher.finish())
    };

    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "query_class,scheme,trail_limit,buffer_limit,rows,data_fingerprint,result_fingerprint,\
         buffer_clean_calls,spill_count,with_trails_ms,without_trails_ms,relative_overhead"
    )?;

    for scheme in [StorageScheme::Inline, StorageScheme::OffTable] {
        let mut catalog = Catalog::new();
        catalog.register_relation("r", scheme, Some("id"), &r)?;
        catalog.register_relation("s", scheme, Some("sid"), &s)?;
        for (class, plan) in plans() {
            // Warm up both paths, then time one run each.
            let quality_on = ExecOptions {
                propagate_quality: true,
            };
            let quality_off = ExecOptions {
                propagate_quality: false,
            };
            execute_plan_with(&plan, &catalog, config, quality_on)?;
            execute_plan_with(&plan, &catalog, config, quality_off)?;

            let start = Instant::now();
            let (result, metrics) = execute_plan_with(&plan, &catalog, config, quality_on)?;
            let with_ms = start.elapsed().as_secs_f64() * 1e3;

            let start = Instant::now();
            let (_, _) = execute_plan_with(&plan, &catalog, config, quality_off)?;
            let without_ms = start.elapsed().as_secs_f64() * 1e3;

            // Overhead as a ratio of wall times; >= 0 by construction.
            let overhead = with_ms / without_ms.max(f64::MIN_POSITIVE);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.4}",
                class,
                scheme.as_str(),
                limit_str(config.trail_limit),
                limit_str(config.buffer_limit),
                result.len(),
                data_fp,
                fingerprint(&result),
                metrics.buffer_clean_calls,
                metrics.spill_count,
                with_ms,
                without_ms,
                overhead
            )?;
        }
    }
    Ok(())
}
