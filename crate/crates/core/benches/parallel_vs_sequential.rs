//! Batch evaluation of one configuration over a corpus, data-parallel versus
//! a plain sequential loop. Build with `--no-default-features` to see the
//! fallback path `par::map` takes when rayon is disabled.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clusterbench::clusterers::{self, Algorithm, ClustererConfig};
use clusterbench::datagen::{self, Dataset};
use clusterbench::metrics;
use clusterbench::par;

fn corpus() -> Vec<Dataset> {
    let cells = datagen::grid(&[2, 10], &[10], &[50], 1.5);
    datagen::generate_corpus(&cells, 4, 2024).expect("corpus")
}

fn evaluate(cfg: &ClustererConfig, ds: &Dataset) -> f64 {
    let cfg = ClustererConfig {
        k: ds.spec().num_classes,
        ..cfg.clone()
    };
    let found = clusterers::run(&cfg, ds, 7).expect("clusterer run");
    metrics::score(&ds.ground_truth(), &found.partition)
        .expect("scores")
        .ari
}

fn batch(c: &mut Criterion) {
    let corpus = corpus();
    let mut group = c.benchmark_group("batch_evaluation");
    group.sample_size(10);
    for alg in [Algorithm::KMeans, Algorithm::Hierarchical, Algorithm::Em] {
        let cfg = ClustererConfig::defaults(alg, 2);
        group.bench_with_input(BenchmarkId::new("parallel", alg), &cfg, |b, cfg| {
            b.iter(|| par::map(&corpus, |ds| evaluate(cfg, ds)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", alg), &cfg, |b, cfg| {
            b.iter(|| par::map_sequential(&corpus, |ds| evaluate(cfg, ds)))
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
