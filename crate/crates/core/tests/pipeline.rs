use locallll::corpus::*;
use locallll::pipeline::{sample_lll, simulate_las_vegas, FreeBits, PipelineConfig, RuntimeMode};
use locallll::verify::{empirical_tv, exact_distribution, ExactTable};
use locallll::{ExactOracle, Graph, LLLInstance, Region};

fn law(inst: &LLLInstance, cfg: &PipelineConfig, runs: u64) -> locallll::verify::DistributionReport {
    let exact = exact_distribution(&ExactOracle::default(), inst).unwrap();
    let vars: Vec<u32> = inst.var_ids().collect();
    let f = |s: u64| sample_lll(inst, s, cfg).map(|(y, _)| y.values_on(&vars).unwrap());
    empirical_tv(&f, exact, runs, 21, 1).unwrap()
}

#[test]
fn local_simulation_mode_samples_the_product_of_pairs() {
    let cfg = PipelineConfig { runtime: RuntimeMode::LocalSim, ..PipelineConfig::default() };
    let r = law(&two_pairs(), &cfg, 20_000);
    assert_eq!(r.exact.outcomes.len(), 9);
    assert!(r.p_value > 1e-3, "p = {}", r.p_value);
}

#[test]
fn never_occurring_events_give_the_product_law() {
    let inst = trivial(3);
    let r = law(&inst, &PipelineConfig::default(), 20_000);
    let product = exact_distribution(&ExactOracle::default(), &inst.restrict(&inst.all_vars(), &Region::new()).unwrap()).unwrap();
    assert_eq!(r.exact, product);
    assert!(r.p_value > 1e-3);
}

#[test]
fn round_totals_are_monotone() {
    for inst in [pair(), cycle(5), chain(4), two_pairs()] {
        for seed in 0..50 {
            let (_, t) = sample_lll(&inst, seed, &PipelineConfig::default()).unwrap();
            let c = t.rounds.cumulative();
            assert!(c.windows(2).all(|w| w[0] <= w[1]), "{c:?}");
            assert!(t.rounds.total() >= c[2]);
        }
    }
}

#[test]
fn free_bits_follow_the_raw_product() {
    let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
    let cfg = PipelineConfig::default();
    let uniform = ExactTable::from_pairs(
        vec![0, 1, 2],
        (0..8u32).map(|i| (vec![i >> 2 & 1, i >> 1 & 1, i & 1], locallll::rational::ratio(1, 8))).collect(),
    );
    let f = |s: u64| simulate_las_vegas(&FreeBits, &g, s, &cfg).map(|(y, _)| y);
    let r = empirical_tv(&f, uniform, 16_000, 3, 1).unwrap();
    assert!(r.p_value > 1e-3);
}

#[test]
fn unsatisfiable_instances_are_rejected() {
    let mut b = locallll::InstanceBuilder::new();
    let x = b.bit("x");
    b.event("all", &[x], vec![vec![0], vec![1]]).unwrap();
    let inst = b.build().unwrap();
    assert!(matches!(sample_lll(&inst, 0, &PipelineConfig::default()), Err(locallll::Error::Infeasible(_))));
}
