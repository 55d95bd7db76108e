//! Exact distributions, statistical comparators and checkers for the per-step guarantees.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::augmentation::{augment, ell0, estimate_interval, substitute, Constants};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::instance::{Assignment, BadEvent, EventId, LLLInstance, Region, VarId};
use crate::oracle::ExactOracle;
use crate::pipeline::{clustering_phase, initialization_phase, Ball, PipelineConfig};
use crate::rational::{self, Rational};

/// μ_I over the declared variable order, support only, outcomes in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTable {
    pub vars: Vec<VarId>,
    pub outcomes: Vec<Vec<u32>>,
    pub probs: Vec<Rational>,
}

impl ExactTable {
    pub fn index(&self) -> BTreeMap<Vec<u32>, usize> {
        self.outcomes.iter().enumerate().map(|(i, o)| (o.clone(), i)).collect()
    }

    pub fn from_pairs(vars: Vec<VarId>, pairs: Vec<(Vec<u32>, Rational)>) -> Self {
        let mut pairs: Vec<_> = pairs.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        pairs.sort();
        let (outcomes, probs) = pairs.into_iter().unzip();
        ExactTable { vars, outcomes, probs }
    }
}

pub fn exact_distribution(oracle: &ExactOracle, inst: &LLLInstance) -> Result<ExactTable> {
    let vars: Vec<VarId> = inst.var_ids().collect();
    if vars.is_empty() {
        return Ok(ExactTable { vars, outcomes: vec![vec![]], probs: vec![Rational::one()] });
    }
    let m = oracle.marginal(inst, &Assignment::new(), &vars)?;
    Ok(ExactTable::from_pairs(vars, m.entries().map(|(v, p)| (v, p.clone())).collect()))
}

/// Law of a function of a uniform draw from a finite reference, e.g. outputs of an LV algorithm.
pub fn pushforward(vars: Vec<VarId>, table: &ExactTable, f: impl Fn(&[u32]) -> Vec<u32>) -> ExactTable {
    let mut acc: BTreeMap<Vec<u32>, Rational> = BTreeMap::new();
    for (o, p) in table.outcomes.iter().zip(&table.probs) {
        *acc.entry(f(o)).or_insert_with(Rational::zero) += p;
    }
    ExactTable::from_pairs(vars, acc.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistributionReport {
    pub exact: ExactTable,
    pub counts: Vec<u64>,
    /// Samples outside the support of the exact table.
    pub outside: u64,
    pub runs: u64,
    pub base_seed: u64,
    pub seeds: Vec<u64>,
    pub tv: f64,
    pub chi2: f64,
    pub df: u64,
    pub p_value: f64,
}

/// Seed of run `i` under `base`: a draw from ChaCha8 stream `i`.
pub fn run_seed(base: u64, i: u64) -> u64 {
    let mut r = ChaCha8Rng::seed_from_u64(base);
    r.set_stream(i);
    r.gen()
}

pub fn total_variation(exact: &[Rational], counts: &[u64], outside: u64) -> f64 {
    let runs: u64 = counts.iter().sum::<u64>() + outside;
    if runs == 0 {
        return 0.0;
    }
    let n = runs as f64;
    let inside: f64 = exact.iter().zip(counts).map(|(p, c)| (rational::to_f64(p) - *c as f64 / n).abs()).sum();
    (inside + outside as f64 / n) / 2.0
}

/// Pearson statistic, degrees of freedom and upper-tail p-value.
pub fn chi_square(exact: &[Rational], counts: &[u64], outside: u64) -> (f64, u64, f64) {
    let runs: u64 = counts.iter().sum::<u64>() + outside;
    if outside > 0 {
        return (f64::INFINITY, exact.len().saturating_sub(1) as u64, 0.0);
    }
    let n = runs as f64;
    let stat: f64 = exact
        .iter()
        .zip(counts)
        .map(|(p, c)| {
            let e = rational::to_f64(p) * n;
            (*c as f64 - e).powi(2) / e
        })
        .sum();
    let df = exact.len().saturating_sub(1) as u64;
    (stat, df, chi_square_p(stat, df))
}

pub fn chi_square_p(stat: f64, df: u64) -> f64 {
    if df == 0 {
        return 1.0;
    }
    if !stat.is_finite() {
        return 0.0;
    }
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

pub fn report_from_samples(exact: ExactTable, samples: &[Vec<u32>], base_seed: u64, seeds: Vec<u64>) -> DistributionReport {
    let idx = exact.index();
    let mut counts = vec![0u64; exact.outcomes.len()];
    let mut outside = 0;
    for s in samples {
        match idx.get(s) {
            Some(i) => counts[*i] += 1,
            None => outside += 1,
        }
    }
    let tv = total_variation(&exact.probs, &counts, outside);
    let (chi2, df, p_value) = chi_square(&exact.probs, &counts, outside);
    DistributionReport { exact, counts, outside, runs: samples.len() as u64, base_seed, seeds, tv, chi2, df, p_value }
}

/// Runs `f(run_seed(base, i))` for i < runs on `threads` workers; results depend only on
/// (base, runs).
pub fn collect_runs<T: Send>(
    f: &(dyn Fn(u64) -> Result<T> + Sync),
    runs: u64,
    base_seed: u64,
    threads: usize,
) -> Result<(Vec<u64>, Vec<T>)> {
    let seeds: Vec<u64> = (0..runs).map(|i| run_seed(base_seed, i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Argument(format!("thread pool: {e}")))?;
    let out: Result<Vec<T>> = pool.install(|| seeds.par_iter().map(|s| f(*s)).collect());
    Ok((seeds, out?))
}

pub fn empirical_tv(
    sampler: &(dyn Fn(u64) -> Result<Vec<u32>> + Sync),
    exact: ExactTable,
    runs: u64,
    base_seed: u64,
    threads: usize,
) -> Result<DistributionReport> {
    if runs == 0 {
        return Err(Error::Argument("runs must be at least 1".into()));
    }
    let (seeds, samples) = collect_runs(sampler, runs, base_seed, threads)?;
    Ok(report_from_samples(exact, &samples, base_seed, seeds))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentationReport {
    pub ell: u64,
    pub ell0: u64,
    pub rarity: Rational,
    pub delta: Rational,
    pub rarity_ok: bool,
    pub mutations: usize,
    pub locality_ok: bool,
    /// None when vbl(B_ℓ(Λ)) = vbl(Λ) and T ≠ ∅, where the correlation test is undefined.
    pub correlated: Option<bool>,
    /// Correlation is asserted when T = ∅ or ℓ ≥ ℓ0.
    pub correlation_asserted: bool,
}

impl AugmentationReport {
    pub fn passed(&self) -> bool {
        self.rarity_ok && self.locality_ok && (self.correlated == Some(true) || !self.correlation_asserted)
    }
}

fn replace_event(inst: &LLLInstance, id: EventId, e: BadEvent) -> Result<LLLInstance> {
    let events: Region = inst.event_ids().filter(|x| *x != id).collect();
    inst.restrict(&inst.all_vars(), &events)?.extend(vec![], vec![(id, e)])
}

/// Rarity, locality under `mutations` random rewrites of events outside B_ℓ(Λ), and
/// ε-correlation of vbl(Λ) and U ∖ vbl(B_ℓ(Λ)) once A_λ is added.
#[allow(clippy::too_many_arguments)]
pub fn check_augmentation(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    eps: &Rational,
    gamma: &Rational,
    delta: &Rational,
    ell: u64,
    eps0: &Rational,
    mutations: usize,
    rng: &mut dyn RngCore,
) -> Result<AugmentationReport> {
    let a = augment(oracle, inst, region, eps, gamma, delta, ell, eps0)?;
    let ev = a.to_event(inst, "λ")?;
    let rarity = a.rarity(oracle, inst)?;
    let geo = Geometry::new(inst, region)?;
    let ball = geo.ball(ell);
    let outside: Vec<EventId> = inst.event_ids().filter(|e| !ball.contains(e)).collect();
    let mut done = 0;
    let mut locality_ok = true;
    if !outside.is_empty() {
        for _ in 0..mutations {
            let id = outside[rng.gen_range(0..outside.len())];
            let old = inst.event(id).unwrap();
            let n = old.tuple_count();
            let forbidden: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
            let dims = old.dims().to_vec();
            let tuples: Vec<Vec<u32>> = forbidden.iter().map(|i| old.decode(*i)).collect();
            let new = BadEvent::new(old.name(), old.vbl().to_vec(), dims, tuples)?.with_origin(old.origin().clone());
            let mutated = replace_event(inst, id, new)?;
            let b = augment(oracle, &mutated, region, eps, gamma, delta, ell, eps0)?;
            let evb = b.to_event(&mutated, "λ")?;
            if evb.vbl() != ev.vbl() || evb.forbidden_tuples() != ev.forbidden_tuples() {
                locality_ok = false;
            }
            done += 1;
        }
    }
    let full = ell0(eps, gamma, delta, &Constants::default().c0)?;
    let s: Vec<VarId> = inst.vbl(region).into_iter().collect();
    let inner = geo.ring(0, Some(ell));
    let t: Vec<VarId> = inst.var_ids().filter(|x| !inner.contains(x)).collect();
    let correlated = if t.is_empty() {
        Some(true)
    } else if s.len() + t.len() == inst.num_vars() {
        None
    } else {
        let (hat, _) = inst.with_event(ev)?;
        Some(oracle.is_eps_correlated(&hat, &s, &t, eps)?)
    };
    Ok(AugmentationReport {
        ell,
        ell0: full,
        rarity_ok: rarity <= *delta,
        rarity,
        delta: delta.clone(),
        mutations: done,
        locality_ok,
        correlated,
        correlation_asserted: t.is_empty() || ell >= full,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationReport {
    pub p: Rational,
    pub p_hat: Rational,
    pub lo: Rational,
    pub hi: Rational,
    pub contained: bool,
    pub asserted: bool,
    /// |P − P̂| and the 2ε^k it is compared with.
    pub margin: Rational,
    pub width: Rational,
}

impl EstimationReport {
    pub fn passed(&self) -> bool {
        self.contained || !self.asserted
    }
}

#[allow(clippy::too_many_arguments)]
pub fn check_estimation(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    a: &BadEvent,
    eps: &Rational,
    k: u32,
    alpha1: &Rational,
    alpha2: &Rational,
    consts: &Constants,
) -> Result<EstimationReport> {
    let e = estimate_interval(oracle, inst, region, a, eps, k, alpha1, alpha2, consts, false)?;
    let p = oracle.avoid_probability(inst, a)?;
    let margin = if p > e.p_hat { &p - &e.p_hat } else { &e.p_hat - &p };
    Ok(EstimationReport {
        contained: e.lo <= p && p <= e.hi,
        asserted: e.guaranteed,
        margin,
        width: rational::pow(eps, k) * rational::int(2),
        p,
        p_hat: e.p_hat,
        lo: e.lo,
        hi: e.hi,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionReport {
    pub t_size: usize,
    pub identities: usize,
    pub identity_ok: bool,
    pub satisfiability: Rational,
    pub bound: Rational,
    pub bound_ok: bool,
    /// The bound is asserted when T = ∅ or ℓ ≥ ℓ0.
    pub bound_asserted: bool,
}

impl SubstitutionReport {
    pub fn passed(&self) -> bool {
        self.identity_ok && (self.bound_ok || !self.bound_asserted)
    }
}

fn marginal_or_none(oracle: &ExactOracle, inst: &LLLInstance, tau: &Assignment, s: &[VarId]) -> Result<Option<Vec<Rational>>> {
    match oracle.marginal(inst, tau, s) {
        Ok(m) => Ok(Some(m.probs)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Exterior marginal identity for every W ⊆ T and ω, and the (1−ε)(α−δ) bound with
/// α = ν(Ω_I). |T| is limited to 6.
#[allow(clippy::too_many_arguments)]
pub fn check_substitution(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    sigma: &Assignment,
    eps: &Rational,
    gamma: &Rational,
    delta: &Rational,
    ell: u64,
    consts: &Constants,
) -> Result<SubstitutionReport> {
    let beta = inst.fresh_var_id();
    let kappa = inst.fresh_event_id();
    let sub = substitute(oracle, inst, region, sigma, eps, gamma, delta, ell, consts, beta, kappa)?;
    let i_sigma = sub.instance(inst)?;
    let a = augment(oracle, inst, region, eps, gamma, delta, ell, &consts.eps0)?;
    let (hat, _) = inst.with_event(a.to_event(inst, "λ")?)?;
    let t: Vec<VarId> = inst.var_ids().filter(|x| !sub.inner_vars.contains(x)).collect();
    if t.len() > 6 {
        return Err(Error::Argument(format!("|T| = {} is too large to exhaust", t.len())));
    }
    let mut identities = 0;
    let mut identity_ok = true;
    for mask in 0u32..(1 << t.len()) {
        let w: Vec<VarId> = t.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| *x).collect();
        let wbar: Vec<VarId> = t.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 0).map(|(_, x)| *x).collect();
        if wbar.is_empty() {
            continue;
        }
        let dims: Vec<u32> = w.iter().map(|x| inst.domain(*x)).collect();
        let n: usize = dims.iter().map(|d| *d as usize).product();
        for idx in 0..n {
            let omega = Assignment::from_pairs(w.iter().copied().zip(crate::oracle::decode(&dims, idx)));
            let mut os = omega.clone();
            os.overwrite(sigma);
            let lhs = marginal_or_none(oracle, &hat, &os, &wbar)?;
            let rhs = marginal_or_none(oracle, &i_sigma, &omega, &wbar)?;
            identities += 1;
            if lhs != rhs {
                identity_ok = false;
            }
        }
    }
    let alpha = oracle.satisfiability(inst)?;
    let sat = oracle.satisfiability(&i_sigma)?;
    let bound = (Rational::one() - eps) * (&alpha - delta);
    let full = ell0(eps, gamma, delta, &consts.c0)?;
    Ok(SubstitutionReport {
        bound_asserted: t.is_empty() || ell >= full,
        t_size: t.len(),
        identities,
        identity_ok,
        bound_ok: sat >= bound,
        satisfiability: sat,
        bound,
    })
}

/// Bayes filter acceptance probability by enumerating Σ_T globally, T = U ∖ vbl(B_ℓ(Λ)):
/// f(τ) = ω(τ)/ω(τ ∧ Y_S) and the result is f(Y_T)/max f. None when f(Y_T) is undefined.
pub fn filter_reference(oracle: &ExactOracle, inst: &LLLInstance, region: &Region, y: &Assignment, ell: u64) -> Result<Option<Rational>> {
    let geo = Geometry::new(inst, region)?;
    let inner = geo.ring(0, Some(ell));
    let t: Vec<VarId> = inst.var_ids().filter(|x| !inner.contains(x)).collect();
    let ys = y.restrict(&inst.vbl(region));
    let dims: Vec<u32> = t.iter().map(|x| inst.domain(*x)).collect();
    let total: u128 = dims.iter().map(|d| *d as u128).product();
    if total > oracle.budget as u128 {
        return Err(Error::Budget { needed: total, budget: oracle.budget });
    }
    let yt = y.values_on(&t).ok_or_else(|| Error::Argument("assignment does not cover T".into()))?;
    let mut fmax = Rational::zero();
    let mut fy = None;
    for idx in 0..total as usize {
        let vals = crate::oracle::decode(&dims, idx);
        let tau = Assignment::from_pairs(t.iter().copied().zip(vals.iter().copied()));
        let mut st = tau.clone();
        st.overwrite(&ys);
        let den = oracle.omega_weight(inst, &st)?;
        if den.is_zero() {
            continue;
        }
        let f = oracle.omega_weight(inst, &tau)? / den;
        if vals == yt {
            fy = Some(f.clone());
        }
        if f > fmax {
            fmax = f;
        }
    }
    Ok(fy.map(|f| f / fmax))
}

/// One conditioning cell of the post-clustering law.
#[derive(Clone, Debug, PartialEq)]
pub struct GibbsCell {
    pub balls: Vec<Region>,
    pub sigma: Vec<(VarId, u32)>,
    pub count: u64,
    /// None when the cell has fewer runs than the mass threshold.
    pub report: Option<DistributionReport>,
}

impl GibbsCell {
    pub fn passed(&self, p_min: f64) -> bool {
        self.report.as_ref().is_none_or(|r| r.p_value >= p_min)
    }
}

/// μ^σ_{Î,T} for T = U ∖ ⋃ vbl(B_ℓ(Λ)), with Î carrying A_λ for each ball.
pub fn clustered_target(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    balls: &[Region],
    sigma: &Assignment,
    params: (&Rational, &Rational, &Rational),
    ell: u64,
    eps0: &Rational,
) -> Result<ExactTable> {
    let (eps, gamma, delta) = params;
    let mut hat = inst.clone();
    let mut inner = BTreeSet::new();
    for b in balls {
        let a = augment(oracle, inst, b, eps, gamma, delta, ell, eps0)?;
        hat = hat.with_event(a.to_event(inst, "λ")?)?.0;
        inner.extend(Geometry::new(inst, b)?.ring(0, Some(ell)));
    }
    let t: Vec<VarId> = inst.var_ids().filter(|x| !inner.contains(x)).collect();
    if t.is_empty() {
        return Ok(ExactTable { vars: t, outcomes: vec![vec![]], probs: vec![Rational::one()] });
    }
    let m = oracle.marginal(&hat, sigma, &t)?;
    Ok(ExactTable::from_pairs(t, m.entries().map(|(v, p)| (v, p.clone())).collect()))
}

/// Runs initialization and clustering, groups runs by (balls, Y_S) and compares Y_T in each
/// cell against the oracle.
pub fn check_conditional_gibbs(
    inst: &LLLInstance,
    cfg: &PipelineConfig,
    runs: u64,
    base_seed: u64,
    min_mass: u64,
) -> Result<Vec<GibbsCell>> {
    let oracle = cfg.sampler.oracle();
    let gamma = match &cfg.gamma {
        Some(g) => g.clone(),
        None => oracle.satisfiability(inst)?,
    };
    let params = crate::pipeline::phase_params(inst.num_events(), &gamma, &cfg.sampler.zeta0);
    let ell = cfg.sampler.consts.ell(&params.eps, &params.gamma, &params.delta)?;
    type Key = (Vec<Region>, Vec<(VarId, u32)>);
    let mut cells: BTreeMap<Key, Vec<Assignment>> = BTreeMap::new();
    for i in 0..runs {
        let seed = run_seed(base_seed, i);
        let init = initialization_phase(inst, seed, cfg.decomposition)?;
        let state = clustering_phase(inst, &init, seed, cfg)?;
        let balls: Vec<Region> = state.balls.iter().map(|b: &Ball| b.events.clone()).collect();
        let s: BTreeSet<VarId> = balls.iter().flat_map(|b| inst.vbl(b)).collect();
        let sigma: Vec<(VarId, u32)> = s.iter().map(|x| (*x, init.y.get(*x).unwrap())).collect();
        cells.entry((balls, sigma)).or_default().push(init.y);
    }
    let mut out = Vec::new();
    for ((balls, sigma), ys) in cells {
        let count = ys.len() as u64;
        let report = if count >= min_mass {
            let sig = Assignment::from_pairs(sigma.iter().copied());
            let exact = clustered_target(
                &oracle,
                inst,
                &balls,
                &sig,
                (&params.eps, &params.gamma, &params.delta),
                ell,
                &cfg.sampler.consts.eps0,
            )?;
            let samples: Vec<Vec<u32>> = ys.iter().map(|y| y.values_on(&exact.vars).unwrap()).collect();
            Some(report_from_samples(exact, &samples, base_seed, vec![]))
        } else {
            None
        };
        out.push(GibbsCell { balls, sigma, count, report });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;
    use crate::rational::ratio;

    #[test]
    fn exact_examples() {
        let o = ExactOracle::default();
        let t = exact_distribution(&o, &pair()).unwrap();
        assert_eq!(t.outcomes, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert!(t.probs.iter().all(|p| *p == ratio(1, 3)));
        let t = exact_distribution(&o, &path3()).unwrap();
        assert_eq!(t.outcomes.len(), 5);
        let t = exact_distribution(&o, &trivial(2)).unwrap();
        assert_eq!(t.outcomes.len(), 4);
        assert!(t.probs.iter().all(|p| *p == ratio(1, 4)));
    }

    #[test]
    fn chi_square_calibration() {
        assert_eq!(chi_square_p(0.0, 1), 1.0);
        let half = [ratio(1, 2), ratio(1, 2)];
        let (_, df, p) = chi_square(&half, &[5000, 5000], 0);
        assert_eq!((df, p), (1, 1.0));
        // 1 df at 3.841459 is the 5% point
        assert!((chi_square_p(3.841458820694124, 1) - 0.05).abs() < 1e-9);
        let (_, _, p) = chi_square(&half, &[5200, 4800], 0);
        assert!(p < 1e-4);
        let (_, _, p) = chi_square(&half, &[1, 1], 1);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn tv_bounds() {
        let half = [ratio(1, 2), ratio(1, 2)];
        assert_eq!(total_variation(&half, &[1, 0], 0), 0.5);
        assert_eq!(total_variation(&half, &[0, 0], 2), 1.0);
        assert_eq!(total_variation(&half, &[3, 3], 0), 0.0);
    }

    #[test]
    fn parallelism_does_not_change_counts() {
        let o = ExactOracle::default();
        let exact = exact_distribution(&o, &pair()).unwrap();
        let f = |seed: u64| -> Result<Vec<u32>> {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            Ok(vec![r.gen_range(0..2), 0])
        };
        let a = empirical_tv(&f, exact.clone(), 500, 7, 1).unwrap();
        let b = empirical_tv(&f, exact, 500, 7, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn substitution_on_chain4() {
        let o = ExactOracle::default();
        let inst = chain(4);
        let consts = Constants::default();
        for s in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let sigma = Assignment::from_pairs([(0, s[0]), (1, s[1])]);
            let r = check_substitution(&o, &inst, &Region::from([0]), &sigma, &ratio(1, 2), &ratio(1, 8), &ratio(1, 64), 1, &consts);
            match r {
                Ok(r) => assert!(r.identity_ok, "{s:?}"),
                Err(Error::Infeasible(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn augmentation_report_on_path3() {
        let o = ExactOracle::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = check_augmentation(&o, &path3(), &Region::from([0]), &ratio(1, 2), &ratio(1, 4), &ratio(1, 16), 1, &ratio(1, 8), 20, &mut rng)
            .unwrap();
        assert!(r.passed());
        assert_eq!(r.rarity, Rational::zero());
    }
}
