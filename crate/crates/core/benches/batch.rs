//! Sequential versus rayon execution of the sample, simulate, monitor loop.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crashscene::batch::ExecMode;
use crashscene::pipeline::{compile, run_batch, PipelineConfig, Sinks};

const DOCS: [(&str, &str); 2] = [
    ("straight_1", include_str!("../fixtures/table1/straight_1.yaml")),
    ("intersection_1", include_str!("../fixtures/table1/intersection_1.yaml")),
];

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_batch_64");
    group.sample_size(10);
    for (name, doc) in DOCS {
        for (label, mode) in [
            ("sequential", ExecMode::Sequential),
            ("parallel", ExecMode::Parallel { workers: None }),
        ] {
            let cfg = PipelineConfig {
                samples: 64,
                mode,
                ..PipelineConfig::default()
            };
            let compiled = compile(doc, &cfg).expect("fixture compiles");
            group.bench_with_input(BenchmarkId::new(label, name), &compiled, |b, compiled| {
                b.iter(|| black_box(run_batch(compiled, &cfg, Sinks::NONE).expect("batch runs")))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
