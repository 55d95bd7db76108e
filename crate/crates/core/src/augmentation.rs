//! The augmenting event A_λ, the interval estimate of its avoid-probability, and the
//! substitution of a ball by one synthetic variable and one synthetic event.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::instance::{Assignment, BadEvent, Distribution, EventId, LLLInstance, Origin, Region, VarId, Variable};
use crate::oracle::{self, ExactOracle};
use crate::rational::{self, Rational};

/// Tunable constants shared by the constructions.
#[derive(Clone, Debug, PartialEq)]
pub struct Constants {
    pub c0: Rational,
    pub eps0: Rational,
    /// Caps every radius derived from ℓ0. `None` runs the constructions at full radius.
    pub ell_cap: Option<u64>,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c0: rational::int(1), eps0: rational::ratio(1, 8), ell_cap: None }
    }
}

impl Constants {
    /// ℓ0 after the optional cap.
    pub fn ell(&self, eps: &Rational, gamma: &Rational, delta: &Rational) -> Result<u64> {
        let l = ell0(eps, gamma, delta, &self.c0)?;
        Ok(self.ell_cap.map_or(l, |c| l.min(c.max(1))))
    }
}

/// ⌈C0·a·b·c·log2(2abc)⌉ with a = log2(2/ε), b = log2(2/γ), c = log2(1/δ).
pub fn ell0(eps: &Rational, gamma: &Rational, delta: &Rational, c0: &Rational) -> Result<u64> {
    if !rational::in_unit_open(eps) || !rational::in_unit_open(gamma) {
        return Err(Error::Argument("ell0 needs 0 < ε, γ < 1".into()));
    }
    if !delta.is_positive() || delta * rational::int(2) > *gamma {
        return Err(Error::Argument("ell0 needs 0 < δ ≤ γ/2".into()));
    }
    if !c0.is_positive() {
        return Err(Error::Argument("C0 must be positive".into()));
    }
    let two = rational::int(2);
    let a = rational::log2(&(&two / eps));
    let b = rational::log2(&(&two / gamma));
    let c = rational::log2(&(Rational::one() / delta));
    let prod = a * b * c;
    let v = rational::to_f64(c0) * prod * (2.0 * prod).log2();
    Ok(v.ceil().max(1.0) as u64)
}

/// Smallest integer g with g > log2(ℓ/δ)/ε0, decided in exact integer arithmetic.
pub fn gap(ell: u64, delta: &Rational, eps0: &Rational) -> Result<u64> {
    if !eps0.is_positive() {
        return Err(Error::Argument("ε0 must be positive".into()));
    }
    let p = eps0.numer().to_biguint().unwrap();
    let q = eps0.denom().to_u32().ok_or_else(|| Error::Argument("ε0 denominator too large".into()))?;
    let dn = delta.numer().to_biguint().unwrap();
    let dd = delta.denom().to_biguint().unwrap();
    // g > D  <=>  2^(g·p) · δn^q > ℓ^q · δd^q
    let rhs = num_traits::pow(BigUint::from(ell), q as usize) * num_traits::pow(dd, q as usize);
    let lhs0 = num_traits::pow(dn, q as usize);
    let pf = p.to_f64().unwrap_or(f64::MAX);
    let approx = rational::log2(&(rational::int(ell as i64) / delta)) * q as f64 / pf;
    let mut g = (approx.floor() as i64 - 2).max(0) as u64;
    loop {
        let bits = (BigUint::from(g) * &p).to_u64().ok_or_else(|| Error::Argument("gap overflow".into()))?;
        if (&lhs0 << bits) > rhs {
            return Ok(g);
        }
        g += 1;
    }
}

/// One recorded addition to a forbidden set.
#[derive(Clone, Debug, PartialEq)]
pub struct Inclusion {
    /// Ring that received the assignment; 0 marks the rings past the last nonempty one.
    pub ring: u64,
    pub index: usize,
    pub partner: u64,
    pub expectation: Rational,
}

/// Output of the fixpoint construction.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentingEvent {
    pub region: Region,
    pub ell: u64,
    pub eps: Rational,
    pub gamma: Rational,
    pub delta: Rational,
    pub eps0: Rational,
    pub gap: u64,
    /// `rings[k-1]` is R_k for every nonempty ring with k ≤ ℓ.
    pub rings: Vec<Vec<VarId>>,
    pub ring_dims: Vec<Vec<u32>>,
    /// Forbidden assignments per ring, as lexicographic indices.
    pub forbidden: Vec<BTreeSet<usize>>,
    /// The empty rings in range received their single (empty) assignment.
    pub beyond: bool,
    /// Declared events contained in R_[1,ℓ].
    pub contained: Region,
    pub inclusions: Vec<Inclusion>,
}

fn ring_event(ring: &[VarId], dims: &[u32], forbidden: &BTreeSet<usize>, k: usize) -> Result<BadEvent> {
    BadEvent::from_predicate(format!("λ{k}"), ring.to_vec(), dims.to_vec(), |t| {
        forbidden.contains(&oracle::index_of(dims, t))
    })
}

/// Grow the forbidden sets F_k until no pair (i, j) with j − i ≥ g admits
/// an assignment whose expected partial satisfiability falls below δ/(2ℓ).
///
/// The expectation is monotone in the distance between the two rings, so only the
/// farthest partner needs checking: ring ℓ for the inner direction, ring 1 for the outer.
pub fn augment(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    eps: &Rational,
    gamma: &Rational,
    delta: &Rational,
    ell: u64,
    eps0: &Rational,
) -> Result<AugmentingEvent> {
    if ell == 0 {
        return Err(Error::Argument("augment needs ℓ ≥ 1".into()));
    }
    let geo = Geometry::new(inst, region)?;
    let m = geo.max_layer().min(ell);
    let g = gap(ell, delta, eps0)?;
    let rings: Vec<Vec<VarId>> = (1..=m).map(|k| geo.ring_at(k)).collect();
    let ring_dims: Vec<Vec<u32>> = rings.iter().map(|r| r.iter().map(|x| inst.domain(*x)).collect()).collect();
    let mut forbidden: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m as usize];
    let mut inclusions = Vec::new();
    let threshold = delta / rational::int(2 * ell as i64);
    let below = |num: &BigUint, den: &BigUint| rational::from_biguints(num, den) < threshold;

    // E∩ over rings [a, b] of the declared events, plus the current λ_k for a ≤ k ≤ b.
    let window = |a: u64, b: u64, forbidden: &[BTreeSet<usize>]| -> Result<Vec<BadEvent>> {
        let mut out: Vec<BadEvent> = Vec::new();
        if a > b {
            return Ok(out);
        }
        let (meet, _) = geo.event_rings(inst, a, Some(b));
        for e in meet {
            out.push(inst.event(e).unwrap().clone());
        }
        for k in a..=b.min(m) {
            let f = &forbidden[k as usize - 1];
            if !f.is_empty() {
                out.push(ring_event(&rings[k as usize - 1], &ring_dims[k as usize - 1], f, k as usize)?);
            }
        }
        Ok(out)
    };

    loop {
        let mut changed = false;
        // inner ring i against the outermost ring ℓ
        if ell > g {
            for i in 1..=m.min(ell - g) {
                let events = window(i + 1, ell - 1, &forbidden)?;
                let refs: Vec<&BadEvent> = events.iter().collect();
                let t = oracle.weigh(inst, &refs, &Assignment::new(), &rings[i as usize - 1], false)?;
                for (idx, num) in t.nums.iter().enumerate() {
                    if !forbidden[i as usize - 1].contains(&idx) && below(num, &t.denom) {
                        forbidden[i as usize - 1].insert(idx);
                        inclusions.push(Inclusion { ring: i, index: idx, partner: ell, expectation: t.value(idx) });
                        changed = true;
                    }
                }
            }
        }
        // outer ring j against ring 1
        for j in (g + 1)..=m {
            let events = window(2, j - 1, &forbidden)?;
            let refs: Vec<&BadEvent> = events.iter().collect();
            let t = oracle.weigh(inst, &refs, &Assignment::new(), &rings[j as usize - 1], false)?;
            for (idx, num) in t.nums.iter().enumerate() {
                if !forbidden[j as usize - 1].contains(&idx) && below(num, &t.denom) {
                    forbidden[j as usize - 1].insert(idx);
                    inclusions.push(Inclusion { ring: j, index: idx, partner: 1, expectation: t.value(idx) });
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Empty rings hold a single assignment; it is forbidden once ring 1 alone starves it.
    let mut beyond = false;
    if ell > geo.max_layer() && ell > g && m >= 2 {
        let events = window(2, m, &forbidden)?;
        let refs: Vec<&BadEvent> = events.iter().collect();
        let t = oracle.weigh(inst, &refs, &Assignment::new(), &[], false)?;
        if below(&t.nums[0], &t.denom) {
            beyond = true;
            inclusions.push(Inclusion { ring: 0, index: 0, partner: 1, expectation: t.value(0) });
        }
    }
    let contained = if m == 0 { Region::new() } else { geo.event_rings(inst, 1, Some(ell)).1 };
    Ok(AugmentingEvent {
        region: region.clone(),
        ell,
        eps: eps.clone(),
        gamma: gamma.clone(),
        delta: delta.clone(),
        eps0: eps0.clone(),
        gap: g,
        rings,
        ring_dims,
        forbidden,
        beyond,
        contained,
        inclusions,
    })
}

impl AugmentingEvent {
    /// R_[1,ℓ] in ascending id order.
    pub fn vbl(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.rings.iter().flatten().copied().collect();
        v.sort_unstable();
        v
    }

    /// True when no assignment can trigger the event.
    pub fn is_never(&self) -> bool {
        self.rings.is_empty() || (!self.beyond && self.forbidden.iter().all(|f| f.is_empty()))
    }

    fn decide(&self, inst: &LLLInstance, get: impl Fn(VarId) -> Result<u32>) -> Result<bool> {
        if self.is_never() {
            return Ok(false);
        }
        let mut hit = self.beyond;
        if !hit {
            for (k, ring) in self.rings.iter().enumerate() {
                if self.forbidden[k].is_empty() {
                    continue;
                }
                let vals = ring.iter().map(|x| get(*x)).collect::<Result<Vec<u32>>>()?;
                if self.forbidden[k].contains(&oracle::index_of(&self.ring_dims[k], &vals)) {
                    hit = true;
                    break;
                }
            }
        }
        if !hit {
            return Ok(false);
        }
        for e in &self.contained {
            let ev = inst.event(*e).ok_or_else(|| Error::Argument(format!("unknown event {e}")))?;
            let vals = ev.vbl().iter().map(|x| get(*x)).collect::<Result<Vec<u32>>>()?;
            if ev.occurs_tuple(&vals) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn occurs(&self, inst: &LLLInstance, y: &Assignment) -> Result<bool> {
        self.decide(inst, |x| y.get(x).ok_or(Error::Uncovered(x)))
    }

    /// The extensional bad event on R_[1,ℓ]; the never-occurring event when the rings are empty.
    pub fn to_event(&self, inst: &LLLInstance, name: impl Into<String>) -> Result<BadEvent> {
        let origin = Origin::Augmenting { region: self.region.iter().copied().collect(), ell: self.ell };
        let vbl = self.vbl();
        if vbl.is_empty() {
            return Ok(BadEvent::never(name).with_origin(origin));
        }
        let dims: Vec<u32> = vbl.iter().map(|x| inst.domain(*x)).collect();
        let pos: std::collections::HashMap<VarId, usize> = vbl.iter().enumerate().map(|(i, x)| (*x, i)).collect();
        let e = BadEvent::from_predicate(name, vbl.clone(), dims, |t| {
            self.decide(inst, |x| Ok(t[pos[&x]])).unwrap_or(false)
        })?;
        Ok(e.with_origin(origin))
    }

    /// ν(A_λ) under the product measure.
    pub fn rarity(&self, oracle: &ExactOracle, inst: &LLLInstance) -> Result<Rational> {
        let e = self.to_event(inst, "λ")?;
        Ok(Rational::one() - oracle.weigh(inst, &[&e], &Assignment::new(), &[], false)?.scalar())
    }
}

/// Result of one interval estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub p_hat: Rational,
    pub lo: Rational,
    pub hi: Rational,
    pub ell: u64,
    /// R_{ℓ+1} is empty: the estimate is the exact probability.
    pub degenerate: bool,
    /// Containment is guaranteed (degenerate, or ℓ not capped below ℓ0).
    pub guaranteed: bool,
    /// The global P, when computed in oracle-check mode.
    pub exact: Option<Rational>,
    pub violation: bool,
}

/// Interval for P = Pr_μ(avoid A) from the ball B_{ℓ+1}(Λ), ℓ = ℓ0(ε^k, α2, α1·ε^k).
#[allow(clippy::too_many_arguments)]
pub fn estimate_interval(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    a: &BadEvent,
    eps: &Rational,
    k: u32,
    alpha1: &Rational,
    alpha2: &Rational,
    consts: &Constants,
    check: bool,
) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::Argument("estimate needs k ≥ 1".into()));
    }
    let geo = Geometry::new(inst, region)?;
    let svars = inst.vbl(region);
    if !a.vbl().iter().all(|x| svars.contains(x)) {
        return Err(Error::Argument(format!("event {} is not inside vbl(Λ)", a.name())));
    }
    let ek = rational::pow(eps, k);
    let delta = alpha1 * &ek;
    let full = ell0(&ek, alpha2, &delta, &consts.c0)?;
    let ell = consts.ell_cap.map_or(full, |c| full.min(c.max(1)));
    let degenerate = geo.max_layer() <= ell;
    if a.forbidden_count() == 0 {
        let one = Rational::one();
        return Ok(Estimate {
            p_hat: one.clone(),
            lo: one.clone(),
            hi: one.clone(),
            ell,
            degenerate,
            guaranteed: true,
            exact: check.then_some(one),
            violation: false,
        });
    }
    let mut events: Vec<BadEvent> = inst
        .events()
        .filter(|(_, e)| e.vbl().iter().any(|x| geo.layer(*x).is_some_and(|l| l <= ell)))
        .map(|(_, e)| e.clone())
        .collect();
    if !degenerate {
        let w = augment(oracle, inst, region, &ek, alpha2, &delta, ell, &consts.eps0)?;
        events.push(w.to_event(inst, "w")?);
    }
    let mut refs: Vec<&BadEvent> = events.iter().collect();
    let den = oracle.weigh(inst, &refs, &Assignment::new(), &[], false)?;
    if den.nums[0].is_zero() {
        return Err(Error::Infeasible("estimate has zero denominator".into()));
    }
    refs.push(a);
    let num = oracle.weigh(inst, &refs, &Assignment::new(), &[], false)?;
    let p_hat = num.scalar() / den.scalar();
    let (lo, hi) = if degenerate {
        (p_hat.clone(), p_hat.clone())
    } else {
        let w = &ek * rational::int(2);
        ((&p_hat - &w).max(Rational::zero()), (&p_hat + &w).min(Rational::one()))
    };
    let guaranteed = degenerate || ell >= full;
    let mut out = Estimate { p_hat, lo, hi, ell, degenerate, guaranteed, exact: None, violation: false };
    if check {
        let p = oracle.avoid_probability(inst, a)?;
        out.violation = p < out.lo || p > out.hi;
        if out.violation && guaranteed {
            return Err(Error::Invariant(format!(
                "P = {} outside [{}, {}]",
                rational::format(&p),
                rational::format(&out.lo),
                rational::format(&out.hi)
            )));
        }
        out.exact = Some(p);
    }
    Ok(out)
}

/// The synthetic variable X_β and event A_κ that stand in for a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Substitution {
    pub region: Region,
    pub ell: u64,
    /// R = R_{ℓ+1}(Λ), ascending.
    pub ring: Vec<VarId>,
    pub dims: Vec<u32>,
    /// P(π) per lexicographic index of Σ_R.
    pub p: Vec<Rational>,
    /// Indices of Σ_R sorted by P, ties by index.
    pub order: Vec<usize>,
    pub beta: VarId,
    pub beta_var: Variable,
    pub kappa: EventId,
    pub kappa_event: BadEvent,
    /// vbl(B_ℓ(Λ)), replaced by β.
    pub inner_vars: BTreeSet<VarId>,
    /// B_{ℓ+1}(Λ), replaced by κ.
    pub inner_events: Region,
}

/// Builds (X_β, A_κ) for the ball around Λ with boundary σ on vbl(Λ).
#[allow(clippy::too_many_arguments)]
pub fn substitute(
    oracle: &ExactOracle,
    inst: &LLLInstance,
    region: &Region,
    sigma: &Assignment,
    eps: &Rational,
    gamma: &Rational,
    delta: &Rational,
    ell: u64,
    consts: &Constants,
    beta: VarId,
    kappa: EventId,
) -> Result<Substitution> {
    let geo = Geometry::new(inst, region)?;
    let s = inst.vbl(region);
    if sigma.scope() != s {
        return Err(Error::Argument("σ must cover exactly vbl(Λ)".into()));
    }
    if inst.has_var(beta) || inst.has_event(kappa) {
        return Err(Error::Argument("β and κ need fresh ids".into()));
    }
    let aug = augment(oracle, inst, region, eps, gamma, delta, ell, &consts.eps0)?;
    let lambda = aug.to_event(inst, "λ")?;
    let inner_vars = geo.ring(0, Some(ell));
    let ring = geo.ring_at(ell + 1);
    let dims: Vec<u32> = ring.iter().map(|x| inst.domain(*x)).collect();
    // events with vbl ⊄ S ∪ T are exactly those touching the open shell between them
    let mut events: Vec<&BadEvent> = inst
        .events()
        .map(|(_, e)| e)
        .filter(|e| e.vbl().iter().any(|x| inner_vars.contains(x) && !s.contains(x)))
        .collect();
    events.push(&lambda);
    let t = oracle.weigh(inst, &events, sigma, &ring, false)?;
    let p: Vec<Rational> = (0..t.nums.len()).map(|i| t.value(i)).collect();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|a, b| p[*a].cmp(&p[*b]).then(a.cmp(b)));
    let pmax = p[*order.last().unwrap()].clone();
    if pmax.is_zero() {
        return Err(Error::Infeasible("no feasible extension of σ".into()));
    }
    let mut weights = vec![Rational::zero(); p.len()];
    let mut prev = Rational::zero();
    for &i in &order {
        weights[i] = (&p[i] - &prev) / &pmax;
        prev = p[i].clone();
    }
    let region_ids: Vec<EventId> = region.iter().copied().collect();
    let beta_var = Variable {
        name: format!("β{}", region_ids.first().copied().unwrap_or(0)),
        dist: Distribution::new_nonnegative(weights)?,
        origin: Origin::Beta { region: region_ids.clone() },
    };
    let mut vbl = ring.clone();
    vbl.push(beta);
    let mut kdims = dims.clone();
    kdims.push(p.len() as u32);
    let n = ring.len();
    let kappa_event = BadEvent::from_predicate(format!("κ{}", region_ids.first().copied().unwrap_or(0)), vbl, kdims, |tup| {
        let r = oracle::index_of(&dims, &tup[..n]);
        p[r] < p[tup[n] as usize]
    })?
    .with_origin(Origin::Kappa { region: region_ids });
    Ok(Substitution {
        region: region.clone(),
        ell,
        ring,
        dims: dims.clone(),
        p: p.clone(),
        order,
        beta,
        beta_var,
        kappa,
        kappa_event,
        inner_vars,
        inner_events: geo.ball(ell + 1),
    })
}

impl Substitution {
    /// I_σ: the variables outside vbl(B_ℓ(Λ)) plus β, the events outside B_{ℓ+1}(Λ) plus κ.
    pub fn instance(&self, inst: &LLLInstance) -> Result<LLLInstance> {
        let vars: BTreeSet<VarId> = inst.var_ids().filter(|x| !self.inner_vars.contains(x)).collect();
        let events: Region = inst.event_ids().filter(|e| !self.inner_events.contains(e)).collect();
        inst.restrict(&vars, &events)?
            .extend(vec![(self.beta, self.beta_var.clone())], vec![(self.kappa, self.kappa_event.clone())])
    }

    /// Value of β that encodes the ring assignment `values` (ascending ring order).
    pub fn beta_value_of(&self, values: &[u32]) -> u32 {
        oracle::index_of(&self.dims, values) as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;
    use crate::rational::ratio;

    #[test]
    fn ell0_examples() {
        let c0 = rational::int(1);
        assert_eq!(ell0(&ratio(1, 2), &ratio(1, 2), &ratio(1, 4), &c0).unwrap(), 32);
        let base = ell0(&ratio(1, 4), &ratio(1, 2), &ratio(1, 8), &c0).unwrap();
        assert!(ell0(&ratio(1, 8), &ratio(1, 2), &ratio(1, 8), &c0).unwrap() >= base);
        assert!(ell0(&ratio(1, 4), &ratio(1, 3), &ratio(1, 8), &c0).unwrap() >= base);
        assert!(ell0(&ratio(1, 4), &ratio(1, 2), &ratio(1, 16), &c0).unwrap() >= base);
        assert!(ell0(&ratio(1, 2), &ratio(1, 2), &ratio(249, 1000), &c0).unwrap() >= 1);
        assert!(ell0(&ratio(1, 2), &ratio(1, 2), &(ratio(1, 4) + ratio(1, 100)), &c0).is_err());
        assert!(ell0(&ratio(3, 2), &ratio(1, 2), &ratio(1, 8), &c0).is_err());
    }

    #[test]
    fn gap_is_exact() {
        // ℓ/δ = 16, ε0 = 1: D = 4, so g = 5
        assert_eq!(gap(4, &ratio(1, 4), &ratio(1, 1)).unwrap(), 5);
        // D = 4.5 with ε0 = 1/2 and ℓ/δ = 2^2.25 is irrational; use ℓ/δ = 8: D = 6
        assert_eq!(gap(2, &ratio(1, 4), &ratio(1, 2)).unwrap(), 7);
        assert_eq!(gap(3, &ratio(1, 2), &ratio(1, 1)).unwrap(), 3);
    }

    #[test]
    fn short_radius_never_occurs() {
        let o = ExactOracle::default();
        let i = path3();
        let a = augment(&o, &i, &Region::from([0]), &ratio(1, 2), &ratio(1, 2), &ratio(1, 8), 1, &ratio(1, 8)).unwrap();
        assert!(a.is_never());
        assert_eq!(a.vbl(), vec![2]);
        assert_eq!(a.rarity(&o, &i).unwrap(), Rational::zero());
    }

    #[test]
    fn chain_counterexample_forbids_rare_propagation() {
        let o = ExactOracle::default();
        let inst = chain_counterexample(6);
        let region = Region::from([0]);
        let delta = ratio(1, 10);
        let eps0 = ratio(4, 1);
        let ell = 5;
        let a = augment(&o, &inst, &region, &ratio(1, 2), &ratio(1, 2), &delta, ell, &eps0).unwrap();
        assert!(a.gap < ell - 1);
        assert!(!a.inclusions.is_empty());
        let thr = &delta / rational::int(2 * ell as i64);
        for inc in &a.inclusions {
            assert!(inc.expectation < thr);
        }
        assert!(a.rarity(&o, &inst).unwrap() <= delta);
        let again = augment(&o, &inst, &region, &ratio(1, 2), &ratio(1, 2), &delta, ell, &eps0).unwrap();
        assert_eq!(a, again);
    }

    #[test]
    fn estimate_pair_example() {
        let o = ExactOracle::default();
        let inst = pair();
        let a = BadEvent::new("A", vec![0], vec![2], vec![vec![1]]).unwrap();
        let e = estimate_interval(&o, &inst, &Region::from([0]), &a, &ratio(1, 4), 1, &ratio(1, 4), &ratio(1, 2), &Constants::default(), true)
            .unwrap();
        assert_eq!(e.p_hat, ratio(2, 3));
        assert!(e.degenerate && e.guaranteed && !e.violation);
        assert_eq!((e.lo.clone(), e.hi.clone()), (ratio(2, 3), ratio(2, 3)));
        let never = BadEvent::never("n");
        let e = estimate_interval(&o, &inst, &Region::from([0]), &never, &ratio(1, 4), 2, &ratio(1, 4), &ratio(1, 2), &Constants::default(), true)
            .unwrap();
        assert_eq!(e.p_hat, Rational::one());
    }

    #[test]
    fn estimate_width_with_capped_radius() {
        let o = ExactOracle::default();
        let inst = chain(6);
        let a = BadEvent::new("A", vec![0], vec![2], vec![vec![1]]).unwrap();
        let consts = Constants { ell_cap: Some(2), ..Constants::default() };
        let eps = ratio(1, 4);
        let e = estimate_interval(&o, &inst, &Region::from([0]), &a, &eps, 1, &ratio(1, 8), &ratio(1, 4), &consts, true).unwrap();
        assert!(!e.degenerate && !e.guaranteed);
        assert!(&e.hi - &e.lo <= &eps * rational::int(4));
        let p = e.exact.clone().unwrap();
        assert!((&p - &e.p_hat).abs() <= &eps * rational::int(2));
    }

    #[test]
    fn empty_ring_substitution_is_trivial() {
        let o = ExactOracle::default();
        let inst = path3();
        let region = Region::from([0]);
        let sigma = Assignment::from_pairs([(0, 0), (1, 0)]);
        let s = substitute(&o, &inst, &region, &sigma, &ratio(1, 2), &ratio(1, 2), &ratio(1, 8), 1, &Constants::default(), 3, 2)
            .unwrap();
        assert!(s.ring.is_empty());
        assert_eq!(s.beta_var.dist.weights(), &[Rational::one()]);
        assert_eq!(s.kappa_event.forbidden_count(), 0);
        let is = s.instance(&inst).unwrap();
        assert_eq!(is.num_vars(), 1);
        assert_eq!(is.num_events(), 1);
    }

    #[test]
    fn substitution_preserves_exterior_marginals() {
        let o = ExactOracle::default();
        let inst = chain(4);
        let region = Region::from([0]);
        let c = Constants::default();
        for sv in 0..3u32 {
            let sigma = Assignment::from_pairs([(0, sv & 1), (1, sv >> 1)]);
            let s = substitute(&o, &inst, &region, &sigma, &ratio(1, 2), &ratio(1, 2), &ratio(1, 8), 1, &c, 5, 4).unwrap();
            let is = s.instance(&inst).unwrap();
            let (lambda_inst, _) = {
                let aug = augment(&o, &inst, &region, &ratio(1, 2), &ratio(1, 2), &ratio(1, 8), 1, &c.eps0).unwrap();
                inst.with_event(aug.to_event(&inst, "λ").unwrap()).unwrap()
            };
            let t: Vec<VarId> = vec![3, 4];
            // every W ⊆ T and every ω on W
            for wmask in 0..4u32 {
                let w: Vec<VarId> = t.iter().copied().filter(|x| wmask >> (x - 3) & 1 == 1).collect();
                let wbar: Vec<VarId> = t.iter().copied().filter(|x| !w.contains(x)).collect();
                if wbar.is_empty() {
                    continue;
                }
                for ov in 0..(1u32 << w.len()) {
                    let omega = Assignment::from_pairs(w.iter().enumerate().map(|(i, x)| (*x, ov >> i & 1)));
                    let mut both = omega.clone();
                    both.overwrite(&sigma);
                    let lhs = o.marginal(&lambda_inst, &both, &wbar);
                    let rhs = o.marginal(&is, &omega, &wbar);
                    match (lhs, rhs) {
                        (Ok(l), Ok(r)) => assert_eq!(l.probs, r.probs),
                        (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
                        (l, r) => panic!("mismatch {l:?} {r:?}"),
                    }
                }
            }
        }
    }
}
