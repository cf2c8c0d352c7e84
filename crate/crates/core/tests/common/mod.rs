#![allow(dead_code)]

use proptest::prelude::*;

use qtrail_core::relation::{Column, QTuple, Relation, Schema};
use qtrail_core::trail::{
    QualityScore, QualityTrail, QualityTransition, Timestamp, TransitionStats,
};
use qtrail_core::value::{ColumnType, Value};

pub fn score(v: u32) -> QualityScore {
    QualityScore::new(v, 10).unwrap()
}

pub fn trail_from(points: &[(u32, u64)]) -> QualityTrail {
    QualityTrail::from_transitions(
        points
            .iter()
            .map(|&(s, t)| QualityTransition::new(score(s), Timestamp::new(t), None))
            .collect(),
    )
    .unwrap()
}

/// Valid statistics: fresh for the score, or an arbitrary valid combination
/// (as if this transition came out of earlier merges).
fn arb_stats(s: u32) -> impl Strategy<Value = TransitionStats> {
    prop_oneof![
        3 => Just(TransitionStats::for_score(score(s))),
        1 => (1u32..=10, 0u32..=9, 1u64..=5).prop_flat_map(|(min, spread, count)| {
            let max = (min + spread).min(10);
            let lo = u64::from(min) * count;
            let hi = u64::from(max) * count;
            (lo..=hi).prop_map(move |sum| {
                TransitionStats::from_parts(score(min), score(max), sum, count).unwrap()
            })
        }),
    ]
}

fn arb_event() -> impl Strategy<Value = Option<String>> {
    prop_oneof![
        3 => Just(None),
        1 => "[a-z ;|,%]{1,12}".prop_map(Some),
    ]
}

/// A valid trail: 1..=max_len transitions, scores 1..=10, strictly
/// increasing timestamps starting anywhere in a small window.
pub fn arb_trail(max_len: usize) -> impl Strategy<Value = QualityTrail> {
    (1..=max_len)
        .prop_flat_map(|len| {
            (
                0u64..30,
                proptest::collection::vec((1u32..=10, 1u64..=12), len),
            )
        })
        .prop_flat_map(|(start, points)| {
            let mut ts = start;
            let mut parts = Vec::with_capacity(points.len());
            for (s, gap) in points {
                parts.push((s, ts));
                ts += gap;
            }
            parts
                .into_iter()
                .map(|(s, t)| {
                    (arb_stats(s), arb_event()).prop_map(move |(stats, event)| {
                        QualityTransition::with_stats(score(s), Timestamp::new(t), event, stats)
                    })
                })
                .collect::<Vec<_>>()
        })
        .prop_map(|transitions| QualityTrail::from_transitions(transitions).unwrap())
}

/// Every timestamp worth probing a merge at: all breakpoints, interval
/// midpoints, one point before the start and one past the end.
pub fn probe_points(inputs: &[&QualityTrail]) -> Vec<Timestamp> {
    let mut pts: Vec<u64> = inputs
        .iter()
        .flat_map(|q| q.transitions().iter().map(|t| t.timestamp().get()))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    let mut probes = pts.clone();
    for w in pts.windows(2) {
        probes.push((w[0] + w[1]) / 2);
    }
    if let (Some(&first), Some(&last)) = (pts.first(), pts.last()) {
        probes.push(first.saturating_sub(1));
        probes.push(last + 1000);
    }
    probes.sort_unstable();
    probes.dedup();
    probes.into_iter().map(Timestamp::new).collect()
}

/// Minimum of the participating inputs' qualities at `t`: the independent
/// oracle for the sweep-line merge.
pub fn pointwise_min(inputs: &[&QualityTrail], t: Timestamp) -> Option<u32> {
    inputs
        .iter()
        .filter_map(|q| q.quality_at(t))
        .map(QualityScore::get)
        .min()
}

/// A small relation with integer key/value columns and arbitrary trails.
pub fn arb_relation(max_rows: usize) -> impl Strategy<Value = Relation> {
    proptest::collection::vec(((0i64..4, 0i64..10), arb_trail(5)), 0..=max_rows).prop_map(
        |rows| {
            let schema = Schema::new(vec![
                Column::new("k", ColumnType::Int),
                Column::new("v", ColumnType::Int),
            ]);
            let mut rel = Relation::new(schema);
            for ((k, v), trail) in rows {
                rel.push(QTuple::new(vec![Value::Int(k), Value::Int(v)], trail))
                    .unwrap();
            }
            rel
        },
    )
}

/// Like `arb_relation` but with column names from `names` (two int columns).
pub fn arb_relation_named(
    names: [&'static str; 2],
    max_rows: usize,
) -> impl Strategy<Value = Relation> {
    proptest::collection::vec(((0i64..4, 0i64..10), arb_trail(5)), 0..=max_rows).prop_map(
        move |rows| {
            let schema = Schema::new(vec![
                Column::new(names[0], ColumnType::Int),
                Column::new(names[1], ColumnType::Int),
            ]);
            let mut rel = Relation::new(schema);
            for ((k, v), trail) in rows {
                rel.push(QTuple::new(vec![Value::Int(k), Value::Int(v)], trail))
                    .unwrap();
            }
            rel
        },
    )
}

/// A permutation of a relation's tuples.
pub fn permute(rel: &Relation, seed: u64) -> Relation {
    // Deterministic Fisher-Yates driven by a tiny LCG; good enough to
    // scramble input order.
    let mut tuples: Vec<QTuple> = rel.tuples().to_vec();
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    for i in (1..tuples.len()).rev() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let j = (state >> 33) as usize % (i + 1);
        tuples.swap(i, j);
    }
    let mut out = Relation::new(rel.schema().clone());
    for t in tuples {
        out.push(t).unwrap();
    }
    out
}
