//! Verification suites shared by the `verify` command and the acceptance tests.

use locallll::augmentation::Constants;
use locallll::pipeline::{initialization_phase, sample_lll, PhaseRounds, PipelineConfig, PipelineTrace};
use locallll::oracle::decode;
use locallll::rational::ratio;
use locallll::sampler::IntervalMode;
use locallll::verify::{
    check_augmentation, check_conditional_gibbs, check_estimation, check_substitution, collect_runs, exact_distribution,
    report_from_samples, run_seed,
};
use locallll::{Assignment, BadEvent, Error, LLLInstance, Rational, Region, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::{distribution, f12, histogram, q};

/// TV bound at [`TV_RUNS`] runs; smaller runs scale it by √(TV_RUNS/runs).
pub const TV_BOUND: f64 = 0.01;
pub const TV_RUNS: u64 = 200_000;
pub const P_MIN: f64 = 1e-3;
pub const GIBBS_MIN_MASS: u64 = 500;
pub const MUTATIONS: usize = 20;
/// Regions tried per instance by the checker suites.
pub const REGIONS: usize = 3;

pub fn tv_tolerance(runs: u64) -> f64 {
    TV_BOUND * (TV_RUNS as f64 / runs.max(1) as f64).sqrt().max(1.0)
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: String,
    pub passed: bool,
    pub checked: usize,
    pub skipped: usize,
    pub detail: Value,
}

impl SuiteOutcome {
    pub fn to_json(&self) -> Value {
        json!({"suite": self.name, "passed": self.passed, "checked": self.checked, "skipped": self.skipped, "detail": self.detail})
    }
}

pub fn mode_name(m: IntervalMode) -> &'static str {
    match m {
        IntervalMode::Estimate => "estimate",
        IntervalMode::OracleCheck => "oracle-check",
    }
}

pub fn pipeline_config(mode: IntervalMode, gamma: Option<Rational>) -> PipelineConfig {
    let mut cfg = PipelineConfig { gamma, ..PipelineConfig::default() };
    cfg.sampler.mode = mode;
    cfg
}

/// The per-run facts kept from a pipeline trace.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub values: Vec<u32>,
    pub potential: u64,
    pub rounds: PhaseRounds,
    pub violations: usize,
    pub balls: usize,
    pub clustering_radius: u64,
    pub resampling_radius: u64,
}

pub fn summarize(inst: &LLLInstance, y: &Assignment, t: &PipelineTrace) -> RunSummary {
    let vars: Vec<u32> = inst.var_ids().collect();
    RunSummary {
        values: y.values_on(&vars).expect("pipeline output covers every variable"),
        potential: t.sampler.potential,
        rounds: t.rounds.clone(),
        violations: t.sampler.violations.len(),
        balls: t.balls.len(),
        clustering_radius: t.clustering.max_radius(),
        resampling_radius: t.resampling.max_radius(),
    }
}

pub fn pipeline_runs(
    inst: &LLLInstance,
    cfg: &PipelineConfig,
    runs: u64,
    seed: u64,
    threads: usize,
) -> Result<(Vec<u64>, Vec<RunSummary>)> {
    let f = |s: u64| -> Result<RunSummary> {
        let (y, t) = sample_lll(inst, s, cfg)?;
        Ok(summarize(inst, &y, &t))
    };
    collect_runs(&f, runs, seed, threads)
}

pub fn rounds_json(sums: &[RunSummary]) -> Value {
    let col = |f: &dyn Fn(&RunSummary) -> u64| crate::report::stats(&sums.iter().map(f).collect::<Vec<_>>());
    json!({
        "initialization": col(&|s| s.rounds.initialization),
        "clustering": col(&|s| s.rounds.clustering),
        "resampling": col(&|s| s.rounds.resampling),
        "substitution_overhead": col(&|s| s.rounds.substitution_overhead),
        "total": col(&|s| s.rounds.total()),
        "clustering_radius": col(&|s| s.clustering_radius),
        "resampling_radius": col(&|s| s.resampling_radius),
        "balls": col(&|s| s.balls as u64),
    })
}

/// End-to-end law against the exact table, plus zero containment violations.
pub fn pipeline_suite(inst: &LLLInstance, cfg: &PipelineConfig, runs: u64, seed: u64, threads: usize) -> Result<SuiteOutcome> {
    let exact = exact_distribution(&cfg.sampler.oracle(), inst)?;
    let (seeds, sums) = pipeline_runs(inst, cfg, runs, seed, threads)?;
    let values: Vec<Vec<u32>> = sums.iter().map(|s| s.values.clone()).collect();
    let report = report_from_samples(exact, &values, seed, seeds);
    let violations: usize = sums.iter().map(|s| s.violations).sum();
    let tol = tv_tolerance(runs);
    let passed = report.tv <= tol && report.p_value >= P_MIN && violations == 0;
    let potentials: Vec<u64> = sums.iter().map(|s| s.potential).collect();
    Ok(SuiteOutcome {
        name: format!("pipeline/{}", mode_name(cfg.sampler.mode)),
        passed,
        checked: runs as usize,
        skipped: 0,
        detail: json!({
            "distribution": distribution(&report),
            "tv_tolerance": f12(tol),
            "p_min": f12(P_MIN),
            "violations": violations,
            "potential_histogram": histogram(&potentials),
            "rounds": rounds_json(&sums),
        }),
    })
}

fn regions(inst: &LLLInstance) -> Vec<Region> {
    inst.event_ids().take(REGIONS).map(|e| Region::from([e])).collect()
}

fn skippable(e: &Error) -> bool {
    matches!(e, Error::Budget { .. } | Error::Infeasible(_))
}

/// Rarity, locality and (where asserted) correlation over a parameter grid.
pub fn augment_suite(inst: &LLLInstance, seed: u64) -> Result<SuiteOutcome> {
    let consts = Constants::default();
    let o = locallll::ExactOracle::default();
    let gamma = o.satisfiability(inst)?;
    let (mut checked, mut skipped, mut mutations) = (0, 0, 0);
    let mut failures = Vec::new();
    let mut stream = 0u64;
    for region in regions(inst) {
        for eps in [ratio(1, 2), ratio(1, 4)] {
            for delta in [ratio(1, 16), ratio(1, 256)] {
                for ell in 1..=3u64 {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    stream += 1;
                    match check_augmentation(&o, inst, &region, &eps, &gamma, &delta, ell, &consts.eps0, MUTATIONS, &mut rng) {
                        Ok(r) => {
                            checked += 1;
                            mutations += r.mutations;
                            if !r.passed() {
                                failures.push(json!({
                                    "region": region, "eps": q(&eps), "delta": q(&delta), "ell": ell,
                                    "rarity": q(&r.rarity), "locality": r.locality_ok, "correlated": r.correlated,
                                }));
                            }
                        }
                        Err(e) if skippable(&e) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "augment".into(),
        passed: failures.is_empty() && checked > 0,
        checked,
        skipped,
        detail: json!({"gamma": q(&gamma), "mutations": mutations, "failures": failures}),
    })
}

/// Containment where guaranteed, margins reported, for point events on each region.
pub fn estimate_suite(inst: &LLLInstance) -> Result<SuiteOutcome> {
    let o = locallll::ExactOracle::default();
    let gamma = o.satisfiability(inst)?;
    let eps = ratio(1, 2);
    let (mut checked, mut skipped, mut asserted, mut within) = (0, 0, 0, 0);
    let mut failures = Vec::new();
    for region in regions(inst) {
        let vbl: Vec<u32> = inst.vbl(&region).into_iter().collect();
        let dims: Vec<u32> = vbl.iter().map(|x| inst.domain(*x)).collect();
        let total: usize = dims.iter().map(|d| *d as usize).product();
        for idx in 0..total {
            let tuple = decode(&dims, idx);
            let a = BadEvent::new("A", vbl.clone(), dims.clone(), [tuple.clone()])?;
            for k in 1..=4 {
                for cap in [None, Some(1)] {
                    let consts = Constants { ell_cap: cap, ..Constants::default() };
                    match check_estimation(&o, inst, &region, &a, &eps, k, &gamma, &gamma, &consts) {
                        Ok(r) => {
                            checked += 1;
                            asserted += r.asserted as usize;
                            within += (r.margin <= r.width) as usize;
                            if !r.passed() {
                                failures.push(json!({
                                    "region": region, "tuple": tuple, "k": k, "cap": cap,
                                    "p": q(&r.p), "lo": q(&r.lo), "hi": q(&r.hi),
                                }));
                            }
                        }
                        Err(e) if skippable(&e) => skipped += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "estimate".into(),
        passed: failures.is_empty() && checked > 0,
        checked,
        skipped,
        detail: json!({"asserted": asserted, "margin_within_width": within, "failures": failures}),
    })
}

/// Exterior marginal identity and the satisfiability bound over σ and a parameter grid.
pub fn substitute_suite(inst: &LLLInstance) -> Result<SuiteOutcome> {
    let o = locallll::ExactOracle::default();
    let gamma = o.satisfiability(inst)?;
    let consts = Constants::default();
    let (mut checked, mut skipped, mut identities, mut bounds) = (0, 0, 0, 0);
    let mut failures = Vec::new();
    for region in regions(inst) {
        let vbl: Vec<u32> = inst.vbl(&region).into_iter().collect();
        let dims: Vec<u32> = vbl.iter().map(|x| inst.domain(*x)).collect();
        let total: usize = dims.iter().map(|d| *d as usize).product();
        for idx in 0..total {
            let sigma = Assignment::from_pairs(vbl.iter().copied().zip(decode(&dims, idx)));
            for eps in [ratio(1, 2), ratio(1, 4)] {
                for delta in [ratio(1, 16), ratio(1, 64), ratio(1, 256)] {
                    let full = locallll::augmentation::ell0(&eps, &gamma, &delta, &consts.c0)?;
                    for ell in [1, 2, full] {
                        match check_substitution(&o, inst, &region, &sigma, &eps, &gamma, &delta, ell, &consts) {
                            Ok(r) => {
                                checked += 1;
                                identities += r.identities;
                                bounds += r.bound_asserted as usize;
                                if !r.passed() {
                                    failures.push(json!({
                                        "region": region, "sigma": decode(&dims, idx), "eps": q(&eps), "delta": q(&delta), "ell": ell,
                                        "identity": r.identity_ok, "satisfiability": q(&r.satisfiability), "bound": q(&r.bound),
                                    }));
                                }
                            }
                            Err(e) if skippable(&e) || matches!(e, Error::Argument(_)) => skipped += 1,
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
    }
    Ok(SuiteOutcome {
        name: "substitute".into(),
        passed: failures.is_empty() && checked > 0,
        checked,
        skipped,
        detail: json!({"identities": identities, "bounds_asserted": bounds, "failures": failures}),
    })
}

/// Post-initialization law against ν, and the clustered conditional law per cell.
pub fn gibbs_suite(inst: &LLLInstance, cfg: &PipelineConfig, runs: u64, seed: u64) -> Result<SuiteOutcome> {
    let o = cfg.sampler.oracle();
    let product = inst.restrict(&inst.all_vars(), &Region::new())?;
    let nu = exact_distribution(&o, &product)?;
    let vars: Vec<u32> = inst.var_ids().collect();
    let mut ys = Vec::with_capacity(runs as usize);
    for i in 0..runs {
        let init = initialization_phase(inst, run_seed(seed, i), cfg.decomposition)?;
        ys.push(init.y.values_on(&vars).unwrap());
    }
    let init_report = report_from_samples(nu, &ys, seed, vec![]);
    let cells = check_conditional_gibbs(inst, cfg, runs, seed, GIBBS_MIN_MASS)?;
    let tested = cells.iter().filter(|c| c.report.is_some()).count();
    let cells_json: Vec<Value> = cells
        .iter()
        .map(|c| {
            json!({
                "balls": c.balls,
                "sigma": c.sigma,
                "count": c.count,
                "p_value": c.report.as_ref().map(|r| f12(r.p_value)),
                "tv": c.report.as_ref().map(|r| f12(r.tv)),
            })
        })
        .collect();
    let passed = init_report.p_value >= P_MIN && cells.iter().all(|c| c.passed(P_MIN));
    Ok(SuiteOutcome {
        name: "gibbs".into(),
        passed,
        checked: tested + 1,
        skipped: cells.len() - tested,
        detail: json!({"initialization": distribution(&init_report), "cells": cells_json}),
    })
}

pub const SUITES: [&str; 5] = ["pipeline", "augment", "estimate", "substitute", "gibbs"];

pub fn run_suite(name: &str, inst: &LLLInstance, gamma: Option<Rational>, runs: u64, seed: u64, threads: usize) -> Result<Vec<SuiteOutcome>> {
    Ok(match name {
        "pipeline" => {
            let mut out = Vec::new();
            for mode in [IntervalMode::Estimate, IntervalMode::OracleCheck] {
                out.push(pipeline_suite(inst, &pipeline_config(mode, gamma.clone()), runs, seed, threads)?);
            }
            out
        }
        "augment" => vec![augment_suite(inst, seed)?],
        "estimate" => vec![estimate_suite(inst)?],
        "substitute" => vec![substitute_suite(inst)?],
        "gibbs" => vec![gibbs_suite(inst, &pipeline_config(IntervalMode::Estimate, gamma), runs, seed)?],
        other => return Err(Error::Argument(format!("unknown suite `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use locallll::corpus;

    #[test]
    fn tolerance_scaling() {
        assert_eq!(tv_tolerance(TV_RUNS), TV_BOUND);
        assert_eq!(tv_tolerance(4 * TV_RUNS), TV_BOUND);
        assert!((tv_tolerance(TV_RUNS / 4) - 2.0 * TV_BOUND).abs() < 1e-12);
    }

    #[test]
    fn checker_suites_pass_on_pair() {
        let inst = corpus::pair();
        for s in [augment_suite(&inst, 1).unwrap(), estimate_suite(&inst).unwrap(), substitute_suite(&inst).unwrap()] {
            assert!(s.passed, "{}: {}", s.name, s.detail);
        }
    }
}
