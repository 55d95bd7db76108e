use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use locallll::augmentation::augment;
use locallll::corpus;
use locallll::pipeline::{sample_lll, PipelineConfig, RuntimeMode};
use locallll::rational::ratio;
use locallll::sampler::IntervalMode;
use locallll::verify::exact_distribution;
use locallll::{ExactOracle, Region};

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("sample_lll");
    for name in corpus::END_TO_END {
        let inst = corpus::by_name(name).unwrap();
        for (label, mode, runtime) in [
            ("estimate", IntervalMode::Estimate, RuntimeMode::Sequential),
            ("oracle-check", IntervalMode::OracleCheck, RuntimeMode::Sequential),
            ("local-sim", IntervalMode::Estimate, RuntimeMode::LocalSim),
        ] {
            let mut cfg = PipelineConfig { runtime, ..PipelineConfig::default() };
            cfg.sampler.mode = mode;
            let mut seed = 0u64;
            g.bench_with_input(BenchmarkId::new(label, name), &inst, |b, inst| {
                b.iter(|| {
                    seed += 1;
                    black_box(sample_lll(inst, seed, &cfg).unwrap())
                })
            });
        }
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let o = ExactOracle::default();
    let mut g = c.benchmark_group("oracle");
    for k in [4usize, 8, 12] {
        let inst = corpus::chain(k);
        g.bench_with_input(BenchmarkId::new("exact_distribution/chain", k), &inst, |b, inst| {
            b.iter(|| black_box(exact_distribution(&o, inst).unwrap()))
        });
    }
    let inst = corpus::chain_counterexample(8);
    let gamma = o.satisfiability(&inst).unwrap();
    for ell in [1u64, 2, 4] {
        g.bench_with_input(BenchmarkId::new("augment/chain-counterexample-8", ell), &ell, |b, ell| {
            b.iter(|| black_box(augment(&o, &inst, &Region::from([0]), &ratio(1, 2), &gamma, &ratio(1, 16), *ell, &ratio(1, 8)).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, pipeline, oracle);
criterion_main!(benches);
