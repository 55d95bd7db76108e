//! Bayes filter, RecursiveSampling-with-decay and RecursiveSampling with its potential.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, RngCore};

use crate::augmentation::{augment, estimate_interval, Constants};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::instance::{Assignment, BadEvent, EventId, LLLInstance, Origin, Region, VarId};
use crate::oracle::{self, ExactOracle, DEFAULT_BUDGET};
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalMode {
    Estimate,
    /// Also computes the global P for every estimate and checks containment.
    OracleCheck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub consts: Constants,
    pub zeta0: Rational,
    pub d: u64,
    pub mode: IntervalMode,
    pub budget: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            consts: Constants::default(),
            zeta0: rational::ratio(1, 64),
            d: 2,
            mode: IntervalMode::Estimate,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl SamplerConfig {
    pub fn oracle(&self) -> ExactOracle {
        ExactOracle::new(self.budget)
    }

    pub fn validate(&self) -> Result<()> {
        if !rational::in_unit_open(&self.zeta0) {
            return Err(Error::Argument("ζ0 must lie in (0,1)".into()));
        }
        if self.consts.eps0 <= Rational::zero() {
            return Err(Error::Argument("ε0 must be positive".into()));
        }
        if self.consts.c0 <= Rational::zero() {
            return Err(Error::Argument("C0 must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::Argument("d must be positive".into()));
        }
        Ok(())
    }
}

/// A uniform ρ ∈ [0,1) revealed one bit at a time: ρ ∈ [k/2^n, (k+1)/2^n).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LazyUniform {
    k: BigUint,
    n: u64,
}

impl LazyUniform {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bits(&self) -> u64 {
        self.n
    }

    pub fn push_bit(&mut self, b: bool) {
        self.k = (&self.k << 1u32) + BigUint::from(b as u32);
        self.n += 1;
    }

    /// Current interval [lo, hi).
    pub fn interval(&self) -> (Rational, Rational) {
        let den = BigUint::one() << self.n;
        (rational::from_biguints(&self.k, &den), rational::from_biguints(&(&self.k + 1u32), &den))
    }

    /// Decides from the bits drawn so far, if possible.
    pub fn decided(&self, t: &Rational) -> Option<bool> {
        let p = t.numer().to_biguint().unwrap_or_default();
        let q = t.denom().to_biguint().unwrap();
        let scaled = p << self.n;
        if (&self.k + 1u32) * &q <= scaled {
            Some(true)
        } else if &self.k * &q >= scaled {
            Some(false)
        } else {
            None
        }
    }

    /// Is ρ < t? Draws bits only while the current interval straddles t.
    pub fn below(&mut self, t: &Rational, rng: &mut dyn RngCore) -> bool {
        loop {
            if let Some(ans) = self.decided(t) {
                return ans;
            }
            let b: bool = rng.gen();
            self.push_bit(b);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Branch {
    /// ρ < L and the filter accepted.
    Accept,
    /// ρ < L, the filter rejected, the ball grew to `radius` and the call recursed.
    Lower { radius: u64 },
    /// ρ ≥ R; `surcharge` is ⌈log2 1/(1−R)⌉ + 1.
    Upper { radius: u64, surcharge: u64 },
}

/// One RecursiveSampling call.
#[derive(Clone, Debug, PartialEq)]
pub struct CallRecord {
    pub depth: u32,
    pub region: Vec<EventId>,
    pub eps: Rational,
    pub gamma: Rational,
    pub delta: Rational,
    pub alpha: Rational,
    pub ell0: u64,
    pub iterations: u32,
    pub interval: (Rational, Rational),
    pub branch: Option<Branch>,
    /// Increments made by this call itself (refinements, growth steps, surcharge).
    pub own: u64,
    pub children: Vec<usize>,
    pub potential: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionTrace {
    pub potential: u64,
    pub calls: Vec<CallRecord>,
    pub rho_bits: u64,
    pub filter_bits: u64,
    pub filter_trials: u64,
    pub filter_rejections: u64,
    /// Estimates outside their containment guarantee that missed the true P.
    pub violations: Vec<String>,
}

impl ExecutionTrace {
    /// 𝒫 recomputed from the recursion tree rooted at `idx`.
    pub fn replay_potential(&self, idx: usize) -> u64 {
        let c = &self.calls[idx];
        c.own + c.children.iter().map(|ch| self.replay_potential(*ch)).sum::<u64>()
    }

    pub fn merge(&mut self, other: ExecutionTrace) {
        let base = self.calls.len();
        for mut c in other.calls {
            for ch in &mut c.children {
                *ch += base;
            }
            self.calls.push(c);
        }
        self.potential += other.potential;
        self.rho_bits += other.rho_bits;
        self.filter_bits += other.filter_bits;
        self.filter_trials += other.filter_trials;
        self.filter_rejections += other.filter_rejections;
        self.violations.extend(other.violations);
    }
}

/// Draws every variable of `inst` from its own distribution.
pub fn sample_product(inst: &LLLInstance, rng: &mut dyn RngCore) -> Assignment {
    let mut y = Assignment::new();
    for x in inst.var_ids() {
        let d = &inst.var(x).unwrap().dist;
        y.set(x, oracle::draw_index(d.scaled(), rng) as u32);
    }
    y
}

/// Pieces of the filter on ring R_{ℓ+1}(Λ), shared by the filter and its global check.
struct FilterSetup {
    inner: BTreeSet<VarId>,
    ring: Vec<VarId>,
}

fn filter_setup(inst: &LLLInstance, region: &Region, ell: u64) -> Result<FilterSetup> {
    let geo = Geometry::new(inst, region)?;
    Ok(FilterSetup { inner: geo.ring(0, Some(ell)), ring: geo.ring_at(ell + 1) })
}

/// f(Y_T)/max f for T = U ∖ vbl(B_ℓ(Λ)), enumerated over B_{ℓ+1}(Λ) only.
pub fn filter_probability(oracle: &ExactOracle, inst: &LLLInstance, region: &Region, y: &Assignment, ell: u64) -> Result<Rational> {
    let FilterSetup { inner, ring } = filter_setup(inst, region, ell)?;
    let s = inst.vbl(region);
    let num_events: Vec<&BadEvent> =
        inst.events().map(|(_, e)| e).filter(|e| e.vbl().iter().any(|x| inner.contains(x))).collect();
    let den_events: Vec<&BadEvent> = num_events
        .iter()
        .copied()
        .filter(|e| e.vbl().iter().any(|x| inner.contains(x) && !s.contains(x)))
        .collect();
    let ys = y.restrict(&s);
    if ys.scope() != s {
        return Err(Error::Uncovered(*s.iter().find(|x| !y.is_set(**x)).unwrap()));
    }
    // constant factors from components away from the ring cancel in f/max f
    let gn = oracle.weigh_relative(inst, &num_events, &Assignment::new(), &ring, false)?;
    let gd = oracle.weigh_relative(inst, &den_events, &ys, &ring, false)?;
    let dims = &gn.dims;
    let positive = |idx: usize| -> bool {
        let vals = oracle::decode(dims, idx);
        ring.iter().zip(&vals).all(|(x, v)| !inst.var(*x).unwrap().dist.weight(*v).is_zero())
    };
    let mut fmax: Option<Rational> = None;
    for idx in 0..gn.nums.len() {
        if gd.nums[idx].is_zero() || !positive(idx) {
            continue;
        }
        let f = rational::from_biguints(&gn.nums[idx], &gd.nums[idx]);
        if fmax.as_ref().is_none_or(|m| &f > m) {
            fmax = Some(f);
        }
    }
    let fmax = fmax.ok_or_else(|| Error::Invariant("max f = 0 in the Bayes filter".into()))?;
    let yr = y.values_on(&ring).ok_or_else(|| Error::Invariant("Y does not cover the filter ring".into()))?;
    let yi = oracle::index_of(dims, &yr);
    if gd.nums[yi].is_zero() {
        return Err(Error::Invariant("f(Y_T) undefined in the Bayes filter".into()));
    }
    Ok(rational::from_biguints(&gn.nums[yi], &gd.nums[yi]) / fmax)
}

/// Runs the filter; on success redraws Y on vbl(B_ℓ(Λ)) from μ^{Y_T}.
pub fn bayes_filter(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    y: &mut Assignment,
    ell: u64,
    rng: &mut dyn RngCore,
    trace: &mut ExecutionTrace,
) -> Result<bool> {
    let p = filter_probability(oracle, inst, region, y, ell)?;
    let mut u = LazyUniform::new();
    let accept = u.below(&p, rng);
    trace.filter_bits += u.bits();
    trace.filter_trials += 1;
    if !accept {
        trace.filter_rejections += 1;
        return Ok(false);
    }
    let inner = filter_setup(inst, region, ell)?.inner;
    let tvars: BTreeSet<VarId> = inst.var_ids().filter(|x| !inner.contains(x)).collect();
    let tau = y.restrict(&tvars);
    let free: Vec<VarId> = inner.into_iter().collect();
    let vals = oracle.sample_marginal(inst, &tau, &free, rng)?;
    y.set_values(&free, &vals);
    Ok(true)
}

/// Filter at radius 1, otherwise retry on B_2(Λ).
pub fn recursive_sampling_with_decay(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    y: &mut Assignment,
    rng: &mut dyn RngCore,
    trace: &mut ExecutionTrace,
) -> Result<()> {
    if inst.num_events() == 0 {
        return Ok(());
    }
    let mut region = region.clone();
    loop {
        if bayes_filter(oracle, inst, &region, y, 1, rng, trace)? {
            return Ok(());
        }
        region = Geometry::new(inst, &region)?.ball(2);
    }
}

/// An entry state for [`recursive_sampling`]: Y_S = σ and the rest drawn from μ^σ of the
/// instance augmented with the same A_λ the call will build.
pub fn gibbs_entry(
    inst: &LLLInstance,
    region: &Region,
    sigma: &Assignment,
    params: &Params,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
) -> Result<Assignment> {
    let oracle = cfg.oracle();
    let Params { eps, gamma, delta, .. } = params;
    let l0 = cfg.consts.ell(eps, gamma, delta)?;
    let aug = augment(&oracle, inst, region, eps, gamma, delta, l0, &cfg.consts.eps0)?;
    let lam_id = inst.fresh_event_id();
    let hat = inst.extend(vec![], vec![(lam_id, aug.to_event(inst, format!("λ{lam_id}"))?)])?;
    let s = inst.vbl(region);
    if sigma.scope() != s {
        return Err(Error::Argument("σ must cover exactly vbl(Λ)".into()));
    }
    let rest: Vec<VarId> = inst.var_ids().filter(|x| !s.contains(x)).collect();
    let mut y = sigma.clone();
    if !rest.is_empty() {
        let vals = oracle.sample_marginal(&hat, sigma, &rest, rng)?;
        y.set_values(&rest, &vals);
    }
    Ok(y)
}

const MAX_DEPTH: u32 = 4096;

/// Recursion parameters (ε, γ, δ, α).
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub eps: Rational,
    pub gamma: Rational,
    pub delta: Rational,
    pub alpha: Rational,
}

/// Recursive sampler driven by the decreasing potential. Returns 𝒫 and records the call tree.
pub fn recursive_sampling(
    inst: &LLLInstance,
    region: &Region,
    y: &mut Assignment,
    params: &Params,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
    trace: &mut ExecutionTrace,
) -> Result<u64> {
    let root = trace.calls.len();
    let p = call(inst, region, y, params, cfg, rng, trace, 0)?;
    debug_assert_eq!(trace.replay_potential(root), p);
    trace.potential += p;
    Ok(p)
}

#[allow(clippy::too_many_arguments)]
fn call(
    inst: &LLLInstance,
    region: &Region,
    y: &mut Assignment,
    params: &Params,
    cfg: &SamplerConfig,
    rng: &mut dyn RngCore,
    trace: &mut ExecutionTrace,
    depth: u32,
) -> Result<u64> {
    if depth > MAX_DEPTH {
        return Err(Error::Invariant("recursion depth limit reached".into()));
    }
    let oracle = cfg.oracle();
    let consts = &cfg.consts;
    let Params { eps, gamma, delta, alpha } = params;
    let l0 = consts.ell(eps, gamma, delta)?;
    let me = trace.calls.len();
    trace.calls.push(CallRecord {
        depth,
        region: region.iter().copied().collect(),
        eps: eps.clone(),
        gamma: gamma.clone(),
        delta: delta.clone(),
        alpha: alpha.clone(),
        ell0: l0,
        iterations: 0,
        interval: (Rational::zero(), Rational::one()),
        branch: None,
        own: 0,
        children: vec![],
        potential: 0,
    });

    let aug = augment(&oracle, inst, region, eps, gamma, delta, l0, &consts.eps0)?;
    let lam_id = inst.fresh_event_id();
    let lam = aug.to_event(inst, format!("λ{lam_id}"))?;
    let hat = inst.extend(vec![], vec![(lam_id, lam.clone())])?;
    let est_region = Geometry::new(inst, region)?.ball(l0);
    let check = cfg.mode == IntervalMode::OracleCheck;

    let mut rho = LazyUniform::new();
    let mut lo = Rational::zero();
    let mut hi = Rational::one();
    let mut own = 0u64;
    let mut i = 1u32;
    let half = rational::ratio(1, 2);
    let outcome = loop {
        let e = estimate_interval(&oracle, inst, &est_region, &lam, &cfg.zeta0, i, alpha, gamma, consts, check)?;
        if e.violation {
            trace.violations.push(format!(
                "call {me} iteration {i}: P = {} outside [{}, {}]",
                rational::format(e.exact.as_ref().unwrap()),
                rational::format(&e.lo),
                rational::format(&e.hi)
            ));
        }
        lo = lo.max(e.lo);
        hi = hi.min(e.hi);
        if lo > hi {
            return Err(Error::Invariant("empty interval intersection".into()));
        }
        if rho.below(&lo, rng) {
            if bayes_filter(&oracle, &hat, region, y, l0, rng, trace)? {
                break (Branch::Accept, None);
            }
            let d1 = &cfg.zeta0 * alpha / rational::int(2);
            let step = consts.ell(&half, gamma, &d1)?;
            let (ball, radius, grown) = grow(&oracle, &hat, region, y, l0 + 1, step, gamma, &d1, consts)?;
            own += grown;
            let mut next = ball;
            next.insert(lam_id);
            let sub = Params { eps: half.clone(), gamma: gamma.clone(), delta: d1, alpha: alpha / rational::int(2) };
            break (Branch::Lower { radius }, Some((hat, next, sub)));
        }
        if !rho.below(&hi, rng) {
            let rest = Rational::one() - &hi;
            let d2 = &cfg.zeta0 * alpha * &rest / rational::int(2);
            let comp = lam.complement(format!("λ̄{lam_id}")).with_origin(Origin::Complement { of: lam_id });
            let hat2 = inst.extend(vec![], vec![(lam_id, comp)])?;
            let step = consts.ell(&half, gamma, &d2)?;
            let (ball, radius, grown) = grow(&oracle, &hat2, region, y, l0 + 1, step, gamma, &d2, consts)?;
            let surcharge = rational::ceil_log2(&(Rational::one() / &rest)) + 1;
            own += grown + surcharge;
            let mut next = ball;
            next.insert(lam_id);
            let sub = Params { eps: half.clone(), gamma: gamma.clone(), delta: d2, alpha: alpha * &rest };
            break (Branch::Upper { radius, surcharge }, Some((hat2, next, sub)));
        }
        i += 1;
        own += 1;
    };
    trace.rho_bits += rho.bits();
    let mut total = own;
    let (branch, recurse) = outcome;
    {
        let rec = &mut trace.calls[me];
        rec.iterations = i;
        rec.interval = (lo, hi);
        rec.branch = Some(branch);
        rec.own = own;
    }
    if let Some((next_inst, next_region, sub)) = recurse {
        let child = trace.calls.len();
        trace.calls[me].children.push(child);
        total += call(&next_inst, &next_region, y, &sub, cfg, rng, trace, depth + 1)?;
    }
    trace.calls[me].potential = total;
    Ok(total)
}

/// Grows r by `step` while Y hits the augmenting event around B_r(Λ); returns the ball,
/// the final radius and the number of growth steps.
#[allow(clippy::too_many_arguments)]
fn grow(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    y: &Assignment,
    start: u64,
    step: u64,
    gamma: &Rational,
    delta: &Rational,
    consts: &Constants,
) -> Result<(Region, u64, u64)> {
    let half = rational::ratio(1, 2);
    let geo = Geometry::new(inst, region)?;
    let mut r = start;
    let mut steps = 0;
    loop {
        let ball = geo.ball(r);
        let a = augment(oracle, inst, &ball, &half, gamma, delta, step, &consts.eps0)?;
        if !a.occurs(inst, y)? {
            return Ok((ball, r, steps));
        }
        r += step;
        steps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;
    use crate::rational::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Bits(Vec<bool>, usize);

    impl RngCore for Bits {
        fn next_u32(&mut self) -> u32 {
            let b = self.0[self.1];
            self.1 += 1;
            if b {
                u32::MAX
            } else {
                0
            }
        }
        fn next_u64(&mut self) -> u64 {
            self.next_u32() as u64
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            for d in dest {
                *d = self.next_u32() as u8;
            }
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
            self.fill_bytes(dest);
            Ok(())
        }
    }

    #[test]
    fn lazy_compare_examples() {
        let mut u = LazyUniform::new();
        u.push_bit(true);
        assert_eq!(u.decided(&ratio(1, 3)), Some(false));
        assert_eq!(u.bits(), 1);

        let mut u = LazyUniform::new();
        u.push_bit(false);
        u.push_bit(true);
        assert_eq!(u.decided(&ratio(1, 3)), None);
        let mut rng = Bits(vec![false, false], 0);
        assert!(u.below(&ratio(1, 3), &mut rng));
        assert_eq!(u.bits(), 4);

        let mut u = LazyUniform::new();
        let mut rng = Bits(vec![], 0);
        assert!(!u.below(&Rational::zero(), &mut rng));
        assert!(u.below(&Rational::one(), &mut rng));
        assert_eq!(u.bits(), 0);
    }

    #[test]
    fn lazy_compare_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut u = LazyUniform::new();
            let a = u.below(&ratio(1, 3), &mut rng);
            let b = u.below(&ratio(2, 5), &mut rng);
            assert!(!a || b);
            assert_eq!(u.below(&ratio(1, 3), &mut rng), a);
        }
    }

    #[test]
    fn filter_is_certain_when_ball_covers_graph() {
        let o = ExactOracle::default();
        let inst = path3();
        let y = Assignment::full(vec![1, 1, 1]);
        assert_eq!(filter_probability(&o, &inst, &Region::from([0]), &y, 1).unwrap(), Rational::one());
    }

    #[test]
    fn filter_matches_global_enumeration() {
        let o = ExactOracle::default();
        let inst = chain(5);
        let region = Region::from([0]);
        let ell = 1;
        let inner: BTreeSet<VarId> = [0, 1, 2].into();
        let t: Vec<VarId> = vec![3, 4, 5];
        for yv in 0..64u32 {
            let vals: Vec<u32> = (0..6).map(|k| yv >> k & 1).collect();
            let y = Assignment::full(vals.clone());
            let s = Assignment::from_pairs([(0, vals[0]), (1, vals[1])]);
            // global f over every τ on T
            let mut fmax = Rational::zero();
            let mut fy = None;
            for tv in 0..8u32 {
                let tau = Assignment::from_pairs(t.iter().enumerate().map(|(k, x)| (*x, tv >> k & 1)));
                let mut st = tau.clone();
                st.overwrite(&s);
                let den = o.omega_weight(&inst, &st).unwrap();
                if den.is_zero() {
                    continue;
                }
                let f = o.omega_weight(&inst, &tau).unwrap() / den;
                if tau.iter().all(|(x, v)| vals[x as usize] == v) {
                    fy = Some(f.clone());
                }
                fmax = fmax.max(f);
            }
            let local = filter_probability(&o, &inst, &region, &y, ell);
            match fy {
                Some(f) => assert_eq!(local.unwrap(), f / fmax),
                None => assert!(local.is_err()),
            }
            let _ = &inner;
        }
    }

    #[test]
    fn with_decay_samples_pair() {
        let o = ExactOracle::default();
        let inst = pair();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; 4];
        let n = 30_000;
        for _ in 0..n {
            let mut y = Assignment::full(vec![1, 1]);
            let mut tr = ExecutionTrace::default();
            recursive_sampling_with_decay(&o, &inst, &Region::from([0]), &mut y, &mut rng, &mut tr).unwrap();
            counts[(y.get(0).unwrap() * 2 + y.get(1).unwrap()) as usize] += 1;
        }
        assert_eq!(counts[3], 0);
        for c in &counts[..3] {
            assert!((*c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn basis_call_resamples_once() {
        let inst = pair();
        let cfg = SamplerConfig::default();
        let params = Params { eps: ratio(1, 16), gamma: ratio(3, 32), delta: ratio(1, 1024), alpha: ratio(3, 32) };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = Assignment::full(vec![1, 1]);
        let mut tr = ExecutionTrace::default();
        let p = recursive_sampling(&inst, &Region::from([0]), &mut y, &params, &cfg, &mut rng, &mut tr).unwrap();
        assert_eq!(p, 0);
        assert_eq!(tr.calls.len(), 1);
        assert_eq!(tr.calls[0].branch, Some(Branch::Accept));
        assert_eq!(tr.filter_trials, 1);
        assert!(inst.violated(&y).unwrap().is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = cycle(5);
        let cfg = SamplerConfig { consts: Constants { ell_cap: Some(1), ..Constants::default() }, ..SamplerConfig::default() };
        let params = Params { eps: ratio(1, 16), gamma: ratio(1, 32), delta: ratio(1, 4096), alpha: ratio(1, 32) };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut y = Assignment::full(vec![1, 1, 0, 0, 0]);
            let mut tr = ExecutionTrace::default();
            let p = recursive_sampling(&inst, &Region::from([0]), &mut y, &params, &cfg, &mut rng, &mut tr).unwrap();
            (y, tr, p)
        };
        for seed in 0..20 {
            let (y1, t1, p1) = run(seed);
            let (y2, t2, p2) = run(seed);
            assert_eq!((y1, p1), (y2, p2));
            assert_eq!(t1, t2);
            assert_eq!(t1.replay_potential(0), p1);
        }
    }
}
