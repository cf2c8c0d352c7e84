//! Grouping properties: buffer-limit independence, open-box dominance,
//! and permanence of contribution statuses.

mod common;

use common::{arb_relation, arb_trail, probe_points};
use proptest::prelude::*;
use qtrail_core::aggregate::{
    builtin_aggregator, group_aggregate, AggFn, AggMode, AggregatorSpec, Aggregator,
    ContributionStatus,
};
use qtrail_core::config::EngineConfig;
use qtrail_core::relation::Relation;
use qtrail_core::store::write_relation_csv;
use qtrail_core::value::Value;

fn spec(func: AggFn, column: Option<&str>, output: &str) -> AggregatorSpec {
    AggregatorSpec {
        func,
        column: column.map(str::to_owned),
        output: output.into(),
    }
}

fn csv_bytes(rel: &Relation) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_relation_csv(rel, &mut bytes).unwrap();
    bytes
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any buffer limit, with or without BufferClean, yields byte-identical
    /// results to the unlimited run.
    #[test]
    fn buffer_limit_independence(r in arb_relation(24)) {
        let specs = [
            spec(AggFn::Min, Some("v"), "lo"),
            spec(AggFn::Max, Some("v"), "hi"),
        ];
        let unlimited = EngineConfig::default();
        let (baseline, _) =
            group_aggregate(&r, &["k".into()], &specs, AggMode::Open, &unlimited).unwrap();
        let baseline_bytes = csv_bytes(&baseline);
        for limit in [1u64, 3, 50] {
            for clean in [true, false] {
                let cfg = EngineConfig {
                    buffer_limit: Some(limit),
                    buffer_clean_enabled: clean,
                    ..EngineConfig::default()
                };
                let (out, _) =
                    group_aggregate(&r, &["k".into()], &specs, AggMode::Open, &cfg).unwrap();
                prop_assert_eq!(csv_bytes(&out), baseline_bytes.clone());
            }
        }
    }

    /// Open-box trails dominate black-box trails pointwise wherever both
    /// are defined, and aggregate values are identical.
    #[test]
    fn open_box_dominates_black_box(r in arb_relation(20)) {
        let specs = [
            spec(AggFn::Min, Some("v"), "lo"),
            spec(AggFn::Max, Some("v"), "hi"),
        ];
        let cfg = EngineConfig::default();
        let (open, _) =
            group_aggregate(&r, &["k".into()], &specs, AggMode::Open, &cfg).unwrap();
        let (black, _) =
            group_aggregate(&r, &["k".into()], &specs, AggMode::Black, &cfg).unwrap();
        prop_assert_eq!(open.len(), black.len());
        for o in open.tuples() {
            let b = black
                .tuples()
                .iter()
                .find(|b| b.values[0] == o.values[0])
                .expect("same groups in both modes");
            prop_assert_eq!(&o.values, &b.values, "aggregate values must agree");
            for t in probe_points(&[&o.trail, &b.trail]) {
                if let (Some(os), Some(bs)) = (o.trail.quality_at(t), b.trail.quality_at(t)) {
                    prop_assert!(os >= bs, "open {} < black {} at t={}", os, bs, t);
                }
            }
        }
    }

    /// Aggregate values equal a plain quality-ignorant recomputation.
    #[test]
    fn values_match_plain_aggregation(r in arb_relation(20)) {
        let specs = [
            spec(AggFn::Count, None, "n"),
            spec(AggFn::Sum, Some("v"), "s"),
            spec(AggFn::Min, Some("v"), "lo"),
            spec(AggFn::Max, Some("v"), "hi"),
        ];
        let cfg = EngineConfig::default();
        let (out, _) =
            group_aggregate(&r, &["k".into()], &specs, AggMode::Open, &cfg).unwrap();
        for t in out.tuples() {
            let key = &t.values[0];
            let group: Vec<i64> = r
                .tuples()
                .iter()
                .filter(|x| &x.values[0] == key)
                .map(|x| match x.values[1] {
                    Value::Int(v) => v,
                    _ => unreachable!("generator emits ints"),
                })
                .collect();
            prop_assert_eq!(&t.values[1], &Value::Int(group.len() as i64));
            prop_assert_eq!(&t.values[2], &Value::Int(group.iter().sum::<i64>()));
            prop_assert_eq!(&t.values[3], &Value::Int(*group.iter().min().unwrap()));
            prop_assert_eq!(&t.values[4], &Value::Int(*group.iter().max().unwrap()));
        }
    }

    /// Statuses never leave '+' or '-' across an aggregator's lifetime.
    #[test]
    fn contribution_statuses_are_permanent(
        values in proptest::collection::vec(0i64..6, 1..40),
        maximum in proptest::bool::ANY,
    ) {
        let mut agg = builtin_extremum(maximum);
        let mut snapshot: Vec<ContributionStatus> = Vec::new();
        let check = |arr: &[ContributionStatus], snapshot: &mut Vec<ContributionStatus>| {
            for (i, prev) in snapshot.iter().enumerate() {
                match prev {
                    ContributionStatus::Plus | ContributionStatus::Minus => {
                        assert_eq!(arr[i], *prev, "permanent status changed at {i}");
                    }
                    ContributionStatus::Question => {}
                }
            }
            *snapshot = arr.to_vec();
        };
        for v in &values {
            agg.iterate(&Value::Int(*v)).unwrap();
            check(agg.contribution_array(), &mut snapshot);
        }
        agg.finalize().unwrap();
        check(agg.contribution_array(), &mut snapshot);
        prop_assert!(agg
            .contribution_array()
            .iter()
            .all(|s| *s != ContributionStatus::Question));
        // The extremum holders (ties included) are exactly the '+' entries.
        let target = if maximum {
            *values.iter().max().unwrap()
        } else {
            *values.iter().min().unwrap()
        };
        for (i, v) in values.iter().enumerate() {
            let expected = if *v == target {
                ContributionStatus::Plus
            } else {
                ContributionStatus::Minus
            };
            prop_assert_eq!(agg.contribution_array()[i], expected);
        }
    }

    /// The trails of a group's '+' tuples fully determine the output trail:
    /// recomputing the merge over extremum holders matches.
    #[test]
    fn open_box_trail_matches_contributor_merge(
        rows in proptest::collection::vec((0i64..3, 0i64..5), 1..16),
        trails in proptest::collection::vec(arb_trail(5), 16),
    ) {
        use qtrail_core::merge::{merge, trails_equal};
        use qtrail_core::relation::{Column, QTuple, Schema};
        use qtrail_core::value::ColumnType;

        let schema = Schema::new(vec![
            Column::new("k", ColumnType::Int),
            Column::new("v", ColumnType::Int),
        ]);
        let mut rel = Relation::new(schema);
        for ((k, v), trail) in rows.iter().zip(&trails) {
            rel.push(QTuple::new(
                vec![Value::Int(*k), Value::Int(*v)],
                trail.clone(),
            ))
            .unwrap();
        }
        let cfg = EngineConfig::default();
        let (out, _) = group_aggregate(
            &rel,
            &["k".into()],
            &[spec(AggFn::Max, Some("v"), "hi")],
            AggMode::Open,
            &cfg,
        )
        .unwrap();
        for t in out.tuples() {
            let key = &t.values[0];
            let hi = &t.values[1];
            let winners: Vec<_> = rel
                .tuples()
                .iter()
                .filter(|x| &x.values[0] == key && &x.values[1] == hi)
                .map(|x| &x.trail)
                .collect();
            let expected = merge(winners.into_iter()).unwrap();
            prop_assert!(trails_equal(&t.trail, expected.as_trail()));
        }
    }
}

fn builtin_extremum(maximum: bool) -> Box<dyn Aggregator> {
    builtin_aggregator(if maximum { AggFn::Max } else { AggFn::Min })
}
