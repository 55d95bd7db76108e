//! Exact enumeration of weights, marginals and conditional samples.
//!
//! Every query reduces to [`ExactOracle::weigh`]: sum the product weight ν over the
//! free variables of a set of events, with some variables pinned, keeping one entry
//! per assignment of a target set. The free variables split into components that
//! share no event, and each component is enumerated on its own.

use std::collections::{BTreeSet, HashMap};

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::instance::{Assignment, BadEvent, LLLInstance, Region, VarId, UNSET};
use crate::rational::{self, Rational};

pub const DEFAULT_BUDGET: u64 = 1 << 24;

/// Weight per target assignment, as integers over one common denominator.
/// Entries are indexed lexicographically, first target variable most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable {
    pub target: Vec<VarId>,
    pub dims: Vec<u32>,
    pub nums: Vec<BigUint>,
    pub denom: BigUint,
}

impl WeightTable {
    pub fn total(&self) -> BigUint {
        self.nums.iter().sum()
    }

    pub fn value(&self, idx: usize) -> Rational {
        rational::from_biguints(&self.nums[idx], &self.denom)
    }

    pub fn scalar(&self) -> Rational {
        self.value(0)
    }

    pub fn index_of(&self, values: &[u32]) -> usize {
        index_of(&self.dims, values)
    }

    pub fn decode(&self, idx: usize) -> Vec<u32> {
        decode(&self.dims, idx)
    }
}

pub(crate) fn index_of(dims: &[u32], values: &[u32]) -> usize {
    let mut idx = 0usize;
    for (d, v) in dims.iter().zip(values) {
        idx = idx * *d as usize + *v as usize;
    }
    idx
}

pub fn decode(dims: &[u32], mut idx: usize) -> Vec<u32> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = (idx % dims[k] as usize) as u32;
        idx /= dims[k] as usize;
    }
    out
}

/// Exact marginal law of a variable set.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalTable {
    pub scope: Vec<VarId>,
    pub dims: Vec<u32>,
    pub probs: Vec<Rational>,
}

impl MarginalTable {
    pub fn prob(&self, values: &[u32]) -> &Rational {
        &self.probs[index_of(&self.dims, values)]
    }

    pub fn entries(&self) -> impl Iterator<Item = (Vec<u32>, &Rational)> + '_ {
        self.probs.iter().enumerate().map(|(i, p)| (decode(&self.dims, i), p))
    }
}

struct Component<'a> {
    order: Vec<VarId>,
    dims: Vec<u32>,
    weights: Vec<&'a [BigUint]>,
    checks: Vec<Vec<&'a BadEvent>>,
}

impl Component<'_> {
    fn sum(&self, p: usize, vals: &mut [u32]) -> BigUint {
        if p == self.order.len() {
            return BigUint::one();
        }
        let x = self.order[p] as usize;
        let mut acc = BigUint::zero();
        for v in 0..self.dims[p] {
            let w = &self.weights[p][v as usize];
            if w.is_zero() {
                continue;
            }
            vals[x] = v;
            if self.checks[p].iter().any(|e| e.occurs_dense(vals)) {
                continue;
            }
            let s = self.sum(p + 1, vals);
            if !s.is_zero() {
                acc += s * w;
            }
        }
        vals[x] = UNSET;
        acc
    }

    /// Is there any avoiding assignment with positive weight? Depth-first, stops at the first.
    fn feasible(&self, p: usize, vals: &mut [u32]) -> bool {
        if p == self.order.len() {
            return true;
        }
        let x = self.order[p] as usize;
        for v in 0..self.dims[p] {
            if self.weights[p][v as usize].is_zero() {
                continue;
            }
            vals[x] = v;
            if !self.checks[p].iter().any(|e| e.occurs_dense(vals)) && self.feasible(p + 1, vals) {
                vals[x] = UNSET;
                return true;
            }
        }
        vals[x] = UNSET;
        false
    }
}

fn find(parent: &mut [usize], mut a: usize) -> usize {
    while parent[a] != a {
        parent[a] = parent[parent[a]];
        a = parent[a];
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactOracle {
    pub budget: u64,
}

impl Default for ExactOracle {
    fn default() -> Self {
        ExactOracle { budget: DEFAULT_BUDGET }
    }
}

impl ExactOracle {
    pub fn new(budget: u64) -> Self {
        ExactOracle { budget }
    }

    fn check_budget(&self, dims: impl Iterator<Item = u32>) -> Result<()> {
        let mut n: u128 = 1;
        for d in dims {
            n = n.saturating_mul(d as u128);
        }
        if n > self.budget as u128 {
            return Err(Error::Budget { needed: n, budget: self.budget });
        }
        Ok(())
    }

    /// For each assignment σ of `target`: the ν-weight of the free variables of `events`
    /// (those neither pinned by `fixed` nor in `target`) on which no event occurs, times
    /// ν(σ) when `weight_target` is set. Pinned variables carry no weight.
    pub fn weigh(
        &self,
        inst: &LLLInstance,
        events: &[&BadEvent],
        fixed: &Assignment,
        target: &[VarId],
        weight_target: bool,
    ) -> Result<WeightTable> {
        self.weigh_impl(inst, events, fixed, target, weight_target, false)
    }

    /// As [`weigh`](Self::weigh), up to a positive constant: components not holding the
    /// target are only checked for feasibility, never enumerated.
    pub fn weigh_relative(
        &self,
        inst: &LLLInstance,
        events: &[&BadEvent],
        fixed: &Assignment,
        target: &[VarId],
        weight_target: bool,
    ) -> Result<WeightTable> {
        self.weigh_impl(inst, events, fixed, target, weight_target, true)
    }

    fn weigh_impl(
        &self,
        inst: &LLLInstance,
        events: &[&BadEvent],
        fixed: &Assignment,
        target: &[VarId],
        weight_target: bool,
        relative: bool,
    ) -> Result<WeightTable> {
        let mut vals = vec![UNSET; inst.var_capacity().max(fixed.raw().len())];
        for (x, v) in fixed.iter() {
            let var = inst.var(x).ok_or_else(|| Error::Argument(format!("pinned variable {x} is not in the instance")))?;
            if v >= var.domain() {
                return Err(Error::Argument(format!("value {v} out of domain for {}", var.name)));
            }
            vals[x as usize] = v;
        }
        let mut slot: HashMap<VarId, usize> = HashMap::new();
        let mut slots: Vec<VarId> = Vec::new();
        for &x in target {
            if !inst.has_var(x) {
                return Err(Error::Argument(format!("target variable {x} is not in the instance")));
            }
            if fixed.is_set(x) {
                return Err(Error::Argument(format!("target variable {x} is also pinned")));
            }
            if slot.insert(x, slots.len()).is_some() {
                return Err(Error::Argument(format!("target variable {x} listed twice")));
            }
            slots.push(x);
        }
        let mut ev_free: Vec<Vec<usize>> = Vec::with_capacity(events.len());
        for e in events {
            let mut free = Vec::new();
            for &x in e.vbl() {
                if vals.get(x as usize).is_some_and(|v| *v != UNSET) {
                    continue;
                }
                if !inst.has_var(x) {
                    return Err(Error::Argument(format!("event {} uses unknown variable {x}", e.name())));
                }
                let s = *slot.entry(x).or_insert_with(|| {
                    slots.push(x);
                    slots.len() - 1
                });
                free.push(s);
            }
            ev_free.push(free);
        }
        let zero_table = |denom: BigUint| -> Result<WeightTable> {
            let dims: Vec<u32> = target.iter().map(|x| inst.domain(*x)).collect();
            self.check_budget(dims.iter().copied())?;
            let n: usize = dims.iter().map(|d| *d as usize).product();
            Ok(WeightTable { target: target.to_vec(), dims, nums: vec![BigUint::zero(); n], denom })
        };
        for (e, free) in events.iter().zip(&ev_free) {
            if free.is_empty() && e.occurs_dense(&vals) {
                return zero_table(BigUint::one());
            }
        }

        let mut parent: Vec<usize> = (0..slots.len()).collect();
        for k in 1..target.len() {
            let (a, b) = (find(&mut parent, 0), find(&mut parent, k));
            parent[b] = a;
        }
        for free in &ev_free {
            for w in free.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
        let target_root = if target.is_empty() { None } else { Some(find(&mut parent, 0)) };
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for s in 0..slots.len() {
            let r = find(&mut parent, s);
            match groups.iter_mut().find(|(root, _)| *root == r) {
                Some((_, g)) => g.push(s),
                None => groups.push((r, vec![s])),
            }
        }

        let mut factor_num = BigUint::one();
        let mut factor_den = BigUint::one();
        let mut table: Option<WeightTable> = None;
        for (root, members) in &groups {
            let is_target = Some(*root) == target_root;
            let mut order: Vec<VarId> = members.iter().map(|s| slots[*s]).collect();
            if is_target {
                // slots of target vars come first, in target order
                order.sort_by_key(|x| slot[x]);
            }
            let pos: HashMap<VarId, usize> = order.iter().enumerate().map(|(i, x)| (*x, i)).collect();
            let dims: Vec<u32> = order.iter().map(|x| inst.domain(*x)).collect();
            if is_target || !relative {
                self.check_budget(dims.iter().copied())?;
            }
            let mut checks: Vec<Vec<&BadEvent>> = vec![Vec::new(); order.len()];
            for (e, free) in events.iter().zip(&ev_free) {
                if let Some(&s) = free.first() {
                    if find(&mut parent, s) == *root {
                        let last = free.iter().map(|s| pos[&slots[*s]]).max().unwrap();
                        checks[last].push(*e);
                    }
                }
            }
            let weighted = |k: usize| !is_target || k >= target.len() || weight_target;
            let ones: Vec<BigUint> = vec![BigUint::one(); dims.iter().copied().max().unwrap_or(1) as usize];
            let mut den = BigUint::one();
            let mut weights: Vec<&[BigUint]> = Vec::with_capacity(order.len());
            for (k, x) in order.iter().enumerate() {
                let d = &inst.var(*x).unwrap().dist;
                if weighted(k) {
                    den *= d.scale();
                    weights.push(d.scaled());
                } else {
                    weights.push(&ones[..dims[k] as usize]);
                }
            }
            let comp = Component { order, dims, weights, checks };
            if is_target {
                let tlen = target.len();
                let tdims = comp.dims[..tlen].to_vec();
                let n: usize = tdims.iter().map(|d| *d as usize).product();
                let mut nums = Vec::with_capacity(n);
                for idx in 0..n {
                    let sigma = decode(&tdims, idx);
                    let mut w = BigUint::one();
                    let mut dead = false;
                    for k in 0..tlen {
                        vals[comp.order[k] as usize] = sigma[k];
                        w *= &comp.weights[k][sigma[k] as usize];
                    }
                    for k in 0..tlen {
                        if comp.checks[k].iter().any(|e| e.occurs_dense(&vals)) {
                            dead = true;
                            break;
                        }
                    }
                    if dead || w.is_zero() {
                        nums.push(BigUint::zero());
                    } else {
                        nums.push(w * comp.sum(tlen, &mut vals));
                    }
                }
                for k in 0..tlen {
                    vals[comp.order[k] as usize] = UNSET;
                }
                table = Some(WeightTable { target: target.to_vec(), dims: tdims, nums, denom: den });
            } else if relative {
                if !comp.feasible(0, &mut vals) {
                    return zero_table(BigUint::one());
                }
            } else {
                let s = comp.sum(0, &mut vals);
                if s.is_zero() {
                    return zero_table(BigUint::one());
                }
                factor_num *= s;
                factor_den *= den;
            }
        }
        let mut t = table.unwrap_or(WeightTable { target: vec![], dims: vec![], nums: vec![BigUint::one()], denom: BigUint::one() });
        if !factor_num.is_one() {
            for n in &mut t.nums {
                *n *= &factor_num;
            }
        }
        t.denom *= factor_den;
        Ok(t)
    }

    /// ν(Ω^τ): total weight of full assignments extending τ that avoid every event
    /// whose vbl is not inside the scope of τ.
    pub fn omega_weight(&self, inst: &LLLInstance, tau: &Assignment) -> Result<Rational> {
        let scope = tau.scope();
        let events = checked_events(inst, &scope);
        let w = self.weigh(inst, &events, tau, &[], false)?;
        Ok(w.scalar() * inst.nu(tau)?)
    }

    pub fn satisfiability(&self, inst: &LLLInstance) -> Result<Rational> {
        self.omega_weight(inst, &Assignment::new())
    }

    pub fn marginal(&self, inst: &LLLInstance, tau: &Assignment, s: &[VarId]) -> Result<MarginalTable> {
        let w = self.boundary_table(inst, tau, s)?;
        let total = w.total();
        let probs = w.nums.iter().map(|n| rational::from_biguints(n, &total)).collect();
        Ok(MarginalTable { scope: s.to_vec(), dims: w.dims, probs })
    }

    fn boundary_table(&self, inst: &LLLInstance, tau: &Assignment, s: &[VarId]) -> Result<WeightTable> {
        if s.is_empty() {
            return Err(Error::Argument("empty marginal scope".into()));
        }
        let scope = tau.scope();
        let events = checked_events(inst, &scope);
        let w = self.weigh_relative(inst, &events, tau, s, true)?;
        if w.nums.iter().all(|n| n.is_zero()) {
            return Err(Error::Infeasible("ν(Ω^τ) = 0".into()));
        }
        Ok(w)
    }

    /// Draws σ ~ μ^τ_S; returns the values in the order of `s`.
    pub fn sample_marginal(&self, inst: &LLLInstance, tau: &Assignment, s: &[VarId], rng: &mut dyn RngCore) -> Result<Vec<u32>> {
        let w = self.boundary_table(inst, tau, s)?;
        Ok(w.decode(draw_index(&w.nums, rng)))
    }

    /// Pr over μ_I of avoiding `a` (which need not belong to the instance).
    pub fn avoid_probability(&self, inst: &LLLInstance, a: &BadEvent) -> Result<Rational> {
        let mut events: Vec<&BadEvent> = inst.events().map(|(_, e)| e).collect();
        let base = self.weigh(inst, &events, &Assignment::new(), &[], false)?;
        if base.nums[0].is_zero() {
            return Err(Error::Infeasible("instance is unsatisfiable".into()));
        }
        events.push(a);
        let with = self.weigh(inst, &events, &Assignment::new(), &[], false)?;
        Ok(with.scalar() / base.scalar())
    }

    /// Pr_ν(avoid every event meeting R_[i+1,j-1](Λ) | X_{R_i} = σ, X_{R_j} = τ).
    pub fn partial_sat(
        &self,
        inst: &LLLInstance,
        region: &Region,
        i: u64,
        sigma: &Assignment,
        j: u64,
        tau: &Assignment,
    ) -> Result<Rational> {
        if i >= j {
            return Err(Error::Argument(format!("partial_sat needs i < j, got {i}, {j}")));
        }
        let g = Geometry::new(inst, region)?;
        if sigma.scope() != g.ring(i, Some(i)) || tau.scope() != g.ring(j, Some(j)) {
            return Err(Error::Argument("boundary assignments must cover exactly the rings R_i and R_j".into()));
        }
        if j == i + 1 {
            return Ok(Rational::one());
        }
        let (meet, _) = g.event_rings(inst, i + 1, Some(j - 1));
        let events: Vec<&BadEvent> = meet.iter().map(|e| inst.event(*e).unwrap()).collect();
        let mut fixed = sigma.clone();
        fixed.overwrite(tau);
        Ok(self.weigh(inst, &events, &fixed, &[], false)?.scalar())
    }

    /// Are S and T ε-correlated? Every cross pair of boundary conditions is compared.
    pub fn is_eps_correlated(&self, inst: &LLLInstance, s: &[VarId], t: &[VarId], eps: &Rational) -> Result<bool> {
        let ss: BTreeSet<VarId> = s.iter().copied().collect();
        let ts: BTreeSet<VarId> = t.iter().copied().collect();
        if !ss.is_disjoint(&ts) {
            return Err(Error::Argument("S and T overlap".into()));
        }
        let union: BTreeSet<VarId> = ss.union(&ts).copied().collect();
        if union == inst.all_vars() {
            return Err(Error::Argument("S ∪ T covers every variable".into()));
        }
        if s.is_empty() || t.is_empty() {
            return Ok(true);
        }
        let events = checked_events(inst, &union);
        let mut target = s.to_vec();
        target.extend_from_slice(t);
        let w = self.weigh(inst, &events, &Assignment::new(), &target, true)?;
        let ns: usize = s.iter().map(|x| inst.domain(*x) as usize).product();
        let nt: usize = t.iter().map(|x| inst.domain(*x) as usize).product();
        let at = |a: usize, b: usize| &w.nums[a * nt + b];
        let p = eps.numer().to_biguint().ok_or_else(|| Error::Argument("negative ε".into()))?;
        let q = eps.denom().to_biguint().unwrap();
        let pq = &p + &q;
        for s1 in 0..ns {
            for s2 in 0..ns {
                for t1 in 0..nt {
                    for t2 in 0..nt {
                        let direct = at(s1, t1) * at(s2, t2);
                        if direct.is_zero() {
                            continue;
                        }
                        let cross = at(s1, t2) * at(s2, t1);
                        if &q * direct > &pq * cross {
                            return Ok(false);
                        }
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Events of `inst` whose vbl is not contained in `scope`.
pub fn checked_events<'a>(inst: &'a LLLInstance, scope: &BTreeSet<VarId>) -> Vec<&'a BadEvent> {
    inst.events().filter(|(_, e)| !e.vbl().iter().all(|x| scope.contains(x))).map(|(_, e)| e).collect()
}

/// Index drawn with probability proportional to `weights`, from one uniform integer.
pub fn draw_index(weights: &[BigUint], rng: &mut dyn RngCore) -> usize {
    let total: BigUint = weights.iter().sum();
    assert!(!total.is_zero(), "draw from an all-zero table");
    let mut u = rng.gen_biguint_below(&total);
    for (i, w) in weights.iter().enumerate() {
        if &u < w {
            return i;
        }
        u -= w;
    }
    unreachable!()
}
