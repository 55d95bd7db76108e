use locallll::augmentation::Constants;
use locallll::corpus::*;
use locallll::rational::ratio;
use locallll::sampler::*;
use locallll::verify::{empirical_tv, exact_distribution};
use locallll::{Assignment, ExactOracle, LLLInstance, Rational, Region, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicU64, Ordering};

struct Probe {
    cfg: SamplerConfig,
    params: Params,
    sigma: u32,
}

#[derive(Default)]
struct Tally {
    lower: AtomicU64,
    upper: AtomicU64,
    indecision: AtomicU64,
    violations: AtomicU64,
}

fn run(inst: &LLLInstance, p: &Probe, seed: u64, tally: &Tally) -> Result<Vec<u32>> {
    let region = Region::from([0]);
    let sigma = Assignment::from_pairs(inst.vbl(&region).into_iter().map(|x| (x, p.sigma)));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = gibbs_entry(inst, &region, &sigma, &p.params, &p.cfg, &mut rng)?;
    let mut tr = ExecutionTrace::default();
    recursive_sampling(inst, &region, &mut y, &p.params, &p.cfg, &mut rng, &mut tr)?;
    assert!(inst.violated(&y)?.is_empty());
    tally.violations.fetch_add(tr.violations.len() as u64, Ordering::Relaxed);
    for c in &tr.calls {
        tally.indecision.fetch_add(c.iterations as u64 - 1, Ordering::Relaxed);
        match c.branch {
            Some(Branch::Lower { .. }) => tally.lower.fetch_add(1, Ordering::Relaxed),
            Some(Branch::Upper { .. }) => tally.upper.fetch_add(1, Ordering::Relaxed),
            _ => 0,
        };
    }
    Ok(y.iter().map(|(_, v)| v).collect())
}

fn probe(cap: u64, eps0: Rational, delta: Rational, zeta0: Rational, sigma: u32) -> Probe {
    Probe {
        cfg: SamplerConfig {
            consts: Constants { ell_cap: Some(cap), eps0, ..Constants::default() },
            mode: IntervalMode::OracleCheck,
            zeta0,
            ..SamplerConfig::default()
        },
        params: Params { eps: ratio(1, 2), gamma: ratio(1, 4), delta, alpha: ratio(1, 4) },
        sigma,
    }
}

fn check(inst: LLLInstance, p: Probe, runs: u64) -> Tally {
    let tally = Tally::default();
    let exact = exact_distribution(&ExactOracle::default(), &inst).unwrap();
    let f = |seed: u64| run(&inst, &p, seed, &tally);
    let report = empirical_tv(&f, exact, runs, 11, 4).unwrap();
    assert_eq!(report.outside, 0);
    assert!(report.p_value > 1e-4, "p = {} tv = {}", report.p_value, report.tv);
    tally
}

#[test]
fn lower_branch_is_exact_on_short_balls() {
    let t = check(chain(6), probe(1, ratio(1, 8), ratio(1, 64), ratio(1, 64), 0), 10_000);
    assert!(t.lower.load(Ordering::Relaxed) > 0);
    assert_eq!(t.violations.load(Ordering::Relaxed), 0);
}

#[test]
fn upper_branch_is_exact_with_large_eps0() {
    let t = check(chain_counterexample(6), probe(5, ratio(4, 1), ratio(1, 10), ratio(1, 2), 0), 20_000);
    assert!(t.upper.load(Ordering::Relaxed) > 0);
    assert_eq!(t.violations.load(Ordering::Relaxed), 0);
}

#[test]
fn indecision_refines_and_stays_exact() {
    let t = check(chain_counterexample(12), probe(5, ratio(4, 1), ratio(1, 10), ratio(1, 2), 0), 10_000);
    assert!(t.indecision.load(Ordering::Relaxed) > 0);
    assert_eq!(t.violations.load(Ordering::Relaxed), 0);
}
