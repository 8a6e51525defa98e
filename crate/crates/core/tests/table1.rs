use crashscene::pipeline::{run_document, PipelineConfig};

const FIXTURES: [(&str, &str, usize); 6] = [
    ("straight_1", include_str!("../fixtures/table1/straight_1.yaml"), 1),
    ("straight_2", include_str!("../fixtures/table1/straight_2.yaml"), 2),
    ("intersection_1", include_str!("../fixtures/table1/intersection_1.yaml"), 3),
    ("intersection_2", include_str!("../fixtures/table1/intersection_2.yaml"), 3),
    ("t_intersection", include_str!("../fixtures/table1/t_intersection.yaml"), 2),
    ("curve", include_str!("../fixtures/table1/curve.yaml"), 2),
];

#[test]
fn every_fixture_hits_its_oracle_with_table_counts() {
    let cfg = PipelineConfig {
        samples: 200,
        ..PipelineConfig::default()
    };
    for (name, doc, expected) in FIXTURES {
        let run = run_document(name, doc, &cfg, None).unwrap();
        for o in &run.outcomes {
            let r = &o.report;
            assert!(
                r.targeted_hit,
                "{name} seed {} missed: {:?} bindings {:?}",
                r.instance_seed,
                r.distinct_rules(),
                o.instance.bindings
            );
            assert_eq!(
                r.distinct_rules().len(),
                expected,
                "{name} seed {}: {:?}",
                r.instance_seed,
                r.violations
            );
        }
    }
}
