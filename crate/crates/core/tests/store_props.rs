//! Storage properties: scheme transparency, event-replay determinism, and
//! CSV round-trips.

mod common;

use common::arb_trail;
use proptest::prelude::*;
use qtrail_core::config::EngineConfig;
use qtrail_core::plan::{execute_plan, parse_plan};
use qtrail_core::relation::{Column, QTuple, Relation, Schema};
use qtrail_core::store::{
    save_relation, Catalog, EventAction, LoadOptions, QualityEvent, StorageScheme,
};
use qtrail_core::text::serialize_trail;
use qtrail_core::value::{ColumnType, Value};

fn arb_cell(ty: ColumnType) -> BoxedStrategy<Value> {
    match ty {
        ColumnType::Int => prop_oneof![
            9 => any::<i32>().prop_map(|v| Value::Int(v as i64)),
            1 => Just(Value::Null),
        ]
        .boxed(),
        ColumnType::Real => prop_oneof![
            9 => (-1.0e6f64..1.0e6).prop_map(Value::Real),
            1 => Just(Value::Null),
        ]
        .boxed(),
        ColumnType::Text => prop_oneof![
            // Text that cannot be mistaken for a number on reload.
            9 => "[a-z][a-z ,\";|]{0,10}".prop_map(Value::Text),
            1 => Just(Value::Null),
        ]
        .boxed(),
    }
}

fn arb_typed_relation() -> impl Strategy<Value = Relation> {
    proptest::collection::vec(
        (
            arb_cell(ColumnType::Int),
            arb_cell(ColumnType::Real),
            arb_cell(ColumnType::Text),
            arb_trail(6),
        ),
        0..12,
    )
    .prop_map(|rows| {
        let schema = Schema::new(vec![
            Column::new("a", ColumnType::Int),
            Column::new("b", ColumnType::Real),
            Column::new("c", ColumnType::Text),
        ]);
        let mut rel = Relation::new(schema);
        for (a, b, c, trail) in rows {
            rel.push(QTuple::new(vec![a, b, c], trail)).unwrap();
        }
        rel
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// save -> load reproduces (data, trail) exactly, provided every column
    /// keeps at least one typed witness for inference.
    #[test]
    fn save_load_round_trip(rel in arb_typed_relation()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rel.csv");
        save_relation(&rel, &path).unwrap();

        let mut catalog = Catalog::new();
        let options = LoadOptions {
            // Explicit types: an all-null or empty column has no witness.
            types: [
                ("a".to_string(), ColumnType::Int),
                ("b".to_string(), ColumnType::Real),
                ("c".to_string(), ColumnType::Text),
            ]
            .into_iter()
            .collect(),
            ..LoadOptions::default()
        };
        catalog
            .load_csv(&path, "t", &options, &EngineConfig::default())
            .unwrap();
        let back = catalog.relation("t").unwrap();
        prop_assert_eq!(back.schema().columns(), rel.schema().columns());
        prop_assert_eq!(back.tuples(), rel.tuples());
    }

    /// Inline and off-table loads of the same data are indistinguishable to
    /// every downstream query.
    #[test]
    fn schemes_are_transparent(rel in arb_typed_relation(), key in 0i64..100) {
        // Give every row a unique id column for the off-table map.
        let mut schema_cols = vec![Column::new("id", ColumnType::Int)];
        schema_cols.extend_from_slice(rel.schema().columns());
        let mut with_id = Relation::new(Schema::new(schema_cols));
        for (i, t) in rel.tuples().iter().enumerate() {
            let mut values = vec![Value::Int(key + i as i64)];
            values.extend_from_slice(&t.values);
            with_id.push(QTuple::new(values, t.trail.clone())).unwrap();
        }

        let mut inline = Catalog::new();
        inline
            .register_relation("t", StorageScheme::Inline, Some("id"), &with_id)
            .unwrap();
        let mut off = Catalog::new();
        off.register_relation("t", StorageScheme::OffTable, Some("id"), &with_id)
            .unwrap();

        let plans = [
            r#"{"op":"scan","table":"t"}"#,
            r#"{"op":"select","pred":{"cmp":"ge","col":"id","lit":0},"input":{"op":"scan","table":"t"}}"#,
            r#"{"op":"distinct","input":{"op":"project","cols":["c"],"input":{"op":"scan","table":"t"}}}"#,
            r#"{"op":"group","by":["c"],"aggs":[{"fn":"count","as":"n"},{"fn":"min","col":"id","as":"lo"}],"input":{"op":"scan","table":"t"}}"#,
        ];
        let cfg = EngineConfig::default();
        for text in plans {
            let plan = parse_plan(text).unwrap();
            let (a, _) = execute_plan(&plan, &inline, &cfg).unwrap();
            let (b, _) = execute_plan(&plan, &off, &cfg).unwrap();
            prop_assert_eq!(a, b, "plan {} differs across schemes", text);
        }
    }

    /// Replaying the same events interleaved differently across tuples, but
    /// in order per tuple, yields identical trails.
    #[test]
    fn event_replay_is_deterministic_per_tuple(
        per_tuple in proptest::collection::vec(
            proptest::collection::vec((0u8..4, 1u64..8), 0..10),
            1..4,
        ),
        seed in 0u64..1000,
    ) {
        let csv = "id,name\n0,a\n1,b\n2,c\n";
        let make_catalog = || {
            let mut c = Catalog::new();
            c.load_csv_reader(
                csv.as_bytes(),
                "t",
                &LoadOptions {
                    id_column: Some("id".into()),
                    ..LoadOptions::default()
                },
                &EngineConfig::default(),
            )
            .unwrap();
            c
        };
        // Build one event stream per tuple with increasing timestamps.
        let mut streams: Vec<Vec<QualityEvent>> = Vec::new();
        for (tuple, ops) in per_tuple.iter().enumerate() {
            let mut ts = 1;
            let mut events = Vec::new();
            for (kind, gap) in ops {
                let action = match kind {
                    0 => EventAction::Inc,
                    1 => EventAction::Dec,
                    2 => EventAction::Hold,
                    _ => EventAction::Set,
                };
                events.push(QualityEvent {
                    table: "t".into(),
                    tuple_id: tuple.to_string(),
                    action,
                    score: if action == EventAction::Set { Some(5) } else { None },
                    timestamp: ts,
                    event_text: None,
                });
                ts += gap;
            }
            streams.push(events);
        }
        // Interleaving A: round-robin; interleaving B: seeded weave.
        let mut a_order = Vec::new();
        let mut cursors = vec![0usize; streams.len()];
        loop {
            let mut progressed = false;
            for (si, stream) in streams.iter().enumerate() {
                if cursors[si] < stream.len() {
                    a_order.push(stream[cursors[si]].clone());
                    cursors[si] += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        let mut b_order = Vec::new();
        let mut cursors = vec![0usize; streams.len()];
        let mut state = seed.wrapping_add(1);
        while b_order.len() < a_order.len() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let pick = (state >> 33) as usize % streams.len();
            for offset in 0..streams.len() {
                let si = (pick + offset) % streams.len();
                if cursors[si] < streams[si].len() {
                    b_order.push(streams[si][cursors[si]].clone());
                    cursors[si] += 1;
                    break;
                }
            }
        }

        let cfg = EngineConfig::default();
        let mut ca = make_catalog();
        let oa = ca.apply_events(&a_order, &cfg);
        let mut cb = make_catalog();
        let ob = cb.apply_events(&b_order, &cfg);
        prop_assert_eq!(oa.applied, ob.applied);
        let ra = ca.relation("t").unwrap();
        let rb = cb.relation("t").unwrap();
        prop_assert_eq!(ra.tuples(), rb.tuples());
        // Clamping: every score stays in range after any stream.
        for t in ca.relation("t").unwrap().tuples() {
            for tr in t.trail.transitions() {
                prop_assert!((1..=10).contains(&tr.score().get()));
            }
        }
    }

    /// Serialized trail bytes in the report equal recomputed serialization.
    #[test]
    fn storage_report_is_consistent(rel in arb_typed_relation()) {
        let mut catalog = Catalog::new();
        catalog
            .register_relation("t", StorageScheme::Inline, None, &rel)
            .unwrap();
        let report = &catalog.storage_report()[0];
        let expected_transitions: u64 = rel.tuples().iter().map(|t| t.trail.size() as u64).sum();
        let expected_bytes: u64 = rel
            .tuples()
            .iter()
            .map(|t| serialize_trail(&t.trail).len() as u64)
            .sum();
        prop_assert_eq!(report.tuples, rel.len());
        prop_assert_eq!(report.transitions, expected_transitions);
        prop_assert_eq!(report.trail_bytes, expected_bytes);
    }
}
