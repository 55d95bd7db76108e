//! Instance model: variables, bad events, assignments and the dependency graph.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rational::{self, Rational};

pub type VarId = u32;
pub type EventId = u32;
/// A set of bad events.
pub type Region = BTreeSet<EventId>;

pub(crate) const UNSET: u32 = u32::MAX;
/// Largest tuple space an extensional event may span.
pub const MAX_EVENT_TUPLES: usize = 1 << 26;

/// Where a variable or event came from. Carried for trace output only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Declared,
    Augmenting { region: Vec<EventId>, ell: u64 },
    Complement { of: EventId },
    Beta { region: Vec<EventId> },
    Kappa { region: Vec<EventId> },
}

impl Origin {
    pub fn is_synthetic(&self) -> bool {
        !matches!(self, Origin::Declared)
    }
}

/// A distribution over `0..len` with exact rational weights.
#[derive(Clone, Debug)]
pub struct Distribution {
    weights: Vec<Rational>,
    scaled: Vec<BigUint>,
    scale: BigUint,
}

impl PartialEq for Distribution {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl Distribution {
    /// Strictly positive weights summing to one.
    pub fn new(weights: Vec<Rational>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_positive()) {
            return Err(Error::Model(format!(
                "weight of value {i} is {}; weights must be strictly positive",
                rational::format(&weights[i])
            )));
        }
        Self::build(weights)
    }

    /// Nonnegative weights; used for synthetic variables whose construction can produce zeros.
    pub fn new_nonnegative(weights: Vec<Rational>) -> Result<Self> {
        if weights.iter().any(|w| w.is_negative()) {
            return Err(Error::Model("negative weight".into()));
        }
        Self::build(weights)
    }

    fn build(weights: Vec<Rational>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Model("empty domain".into()));
        }
        let total: Rational = weights.iter().sum();
        if !total.is_one() {
            return Err(Error::Model(format!("weights sum to {}, not 1", rational::format(&total))));
        }
        let mut scale = BigUint::one();
        for w in &weights {
            scale = rational::lcm(&scale, w.denom().magnitude());
        }
        let scaled = weights
            .iter()
            .map(|w| (w.numer().magnitude() * &scale) / w.denom().magnitude())
            .collect();
        Ok(Distribution { weights, scaled, scale })
    }

    pub fn uniform(k: u32) -> Self {
        Self::new(vec![rational::ratio(1, k as i64); k as usize]).expect("uniform distribution")
    }

    pub fn point() -> Self {
        Self::uniform(1)
    }

    pub fn len(&self) -> u32 {
        self.weights.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, x: u32) -> &Rational {
        &self.weights[x as usize]
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    /// Weights as integers over the common denominator [`Self::scale`].
    pub fn scaled(&self) -> &[BigUint] {
        &self.scaled
    }

    pub fn scale(&self) -> &BigUint {
        &self.scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub dist: Distribution,
    pub origin: Origin,
}

impl Variable {
    pub fn new(name: impl Into<String>, dist: Distribution) -> Self {
        Variable { name: name.into(), dist, origin: Origin::Declared }
    }

    pub fn domain(&self) -> u32 {
        self.dist.len()
    }
}

/// A bad event stored as the set of tuples over `vbl` on which it occurs.
#[derive(Clone, PartialEq, Eq)]
pub struct BadEvent {
    name: String,
    vbl: Vec<VarId>,
    dims: Vec<u32>,
    strides: Vec<usize>,
    bits: Vec<u64>,
    size: usize,
    origin: Origin,
}

impl fmt::Debug for BadEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BadEvent")
            .field("name", &self.name)
            .field("vbl", &self.vbl)
            .field("forbidden", &self.forbidden_count())
            .finish()
    }
}

impl BadEvent {
    fn empty_over(name: String, vbl: Vec<VarId>, dims: Vec<u32>) -> Result<Self> {
        if vbl.len() != dims.len() {
            return Err(Error::Model(format!("event {name}: vbl and dims differ in length")));
        }
        let mut seen = BTreeSet::new();
        if !vbl.iter().all(|x| seen.insert(*x)) {
            return Err(Error::Model(format!("event {name}: duplicate variable in vbl")));
        }
        if dims.iter().any(|d| *d == 0) {
            return Err(Error::Model(format!("event {name}: zero-size domain")));
        }
        let mut size: usize = 1;
        let mut strides = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            strides[k] = size;
            size = size
                .checked_mul(dims[k] as usize)
                .filter(|s| *s <= MAX_EVENT_TUPLES)
                .ok_or_else(|| Error::Model(format!("event {name}: tuple space too large")))?;
        }
        Ok(BadEvent {
            name,
            vbl,
            dims,
            strides,
            bits: vec![0; size.div_ceil(64)],
            size,
            origin: Origin::Declared,
        })
    }

    /// Event over `vbl` (domain sizes `dims`) occurring exactly on the listed tuples.
    pub fn new<I>(name: impl Into<String>, vbl: Vec<VarId>, dims: Vec<u32>, forbidden: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<u32>>,
    {
        let name = name.into();
        if vbl.is_empty() {
            return Err(Error::Model(format!("event {name}: empty vbl")));
        }
        let mut e = Self::empty_over(name, vbl, dims)?;
        for t in forbidden {
            let idx = e.index_of(&t).ok_or_else(|| {
                Error::Model(format!("event {}: tuple {:?} has wrong arity or is out of domain", e.name, t))
            })?;
            e.set_bit(idx);
        }
        Ok(e)
    }

    /// Compiles a predicate into the extensional form by enumerating all tuples.
    pub fn from_predicate(
        name: impl Into<String>,
        vbl: Vec<VarId>,
        dims: Vec<u32>,
        occurs: impl Fn(&[u32]) -> bool,
    ) -> Result<Self> {
        let name = name.into();
        let mut e = Self::empty_over(name, vbl, dims)?;
        let mut t = vec![0u32; e.dims.len()];
        for idx in 0..e.size {
            e.decode_into(idx, &mut t);
            if occurs(&t) {
                e.set_bit(idx);
            }
        }
        Ok(e)
    }

    /// The event on no variables that never occurs.
    pub fn never(name: impl Into<String>) -> Self {
        Self::empty_over(name.into(), vec![], vec![]).unwrap()
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vbl(&self) -> &[VarId] {
        &self.vbl
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn tuple_count(&self) -> usize {
        self.size
    }

    fn set_bit(&mut self, idx: usize) {
        self.bits[idx / 64] |= 1 << (idx % 64);
    }

    pub fn occurs_index(&self, idx: usize) -> bool {
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn index_of(&self, tuple: &[u32]) -> Option<usize> {
        if tuple.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0;
        for k in 0..tuple.len() {
            if tuple[k] >= self.dims[k] {
                return None;
            }
            idx += tuple[k] as usize * self.strides[k];
        }
        Some(idx)
    }

    fn decode_into(&self, mut idx: usize, out: &mut [u32]) {
        for k in 0..self.dims.len() {
            out[k] = (idx / self.strides[k]) as u32;
            idx %= self.strides[k];
        }
    }

    pub fn decode(&self, idx: usize) -> Vec<u32> {
        let mut t = vec![0; self.dims.len()];
        self.decode_into(idx, &mut t);
        t
    }

    pub fn occurs_tuple(&self, tuple: &[u32]) -> bool {
        self.index_of(tuple).is_some_and(|i| self.occurs_index(i))
    }

    /// Occurrence given values indexed by variable id; every vbl entry must be set.
    #[inline]
    pub(crate) fn occurs_dense(&self, vals: &[u32]) -> bool {
        let mut idx = 0;
        for (k, &x) in self.vbl.iter().enumerate() {
            idx += vals[x as usize] as usize * self.strides[k];
        }
        self.occurs_index(idx)
    }

    pub fn occurs(&self, y: &Assignment) -> Result<bool> {
        let mut idx = 0;
        for (k, &x) in self.vbl.iter().enumerate() {
            let v = y.get(x).ok_or(Error::Uncovered(x))?;
            if v >= self.dims[k] {
                return Err(Error::Argument(format!("value {v} out of domain for variable {x}")));
            }
            idx += v as usize * self.strides[k];
        }
        Ok(self.occurs_index(idx))
    }

    pub fn forbidden_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn forbidden_tuples(&self) -> Vec<Vec<u32>> {
        (0..self.size).filter(|&i| self.occurs_index(i)).map(|i| self.decode(i)).collect()
    }

    pub fn complement(&self, name: impl Into<String>) -> BadEvent {
        let mut e = self.clone();
        e.name = name.into();
        for i in 0..self.size {
            if !self.occurs_index(i) {
                e.set_bit(i);
            } else {
                e.bits[i / 64] &= !(1 << (i % 64));
            }
        }
        e
    }
}

/// Free function form of [`BadEvent::occurs`].
pub fn event_occurs(e: &BadEvent, y: &Assignment) -> Result<bool> {
    e.occurs(y)
}

/// Partial map from variables to values. Equality ignores capacity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    vals: Vec<u32>,
}

/// An assignment read together with its scope.
pub type PartialAssignment = Assignment;

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Values for variables `0..values.len()`.
    pub fn full(values: Vec<u32>) -> Self {
        let mut a = Assignment { vals: values };
        a.trim();
        a
    }

    pub fn from_pairs<I: IntoIterator<Item = (VarId, u32)>>(pairs: I) -> Self {
        let mut a = Self::new();
        for (x, v) in pairs {
            a.set(x, v);
        }
        a
    }

    fn trim(&mut self) {
        while self.vals.last() == Some(&UNSET) {
            self.vals.pop();
        }
    }

    pub fn get(&self, x: VarId) -> Option<u32> {
        self.vals.get(x as usize).copied().filter(|v| *v != UNSET)
    }

    pub fn set(&mut self, x: VarId, v: u32) {
        assert!(v != UNSET);
        let i = x as usize;
        if i >= self.vals.len() {
            self.vals.resize(i + 1, UNSET);
        }
        self.vals[i] = v;
    }

    pub fn unset(&mut self, x: VarId) {
        if let Some(slot) = self.vals.get_mut(x as usize) {
            *slot = UNSET;
        }
        self.trim();
    }

    pub fn is_set(&self, x: VarId) -> bool {
        self.get(x).is_some()
    }

    pub fn scope(&self) -> BTreeSet<VarId> {
        self.iter().map(|(x, _)| x).collect()
    }

    pub fn len(&self) -> usize {
        self.vals.iter().filter(|v| **v != UNSET).count()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, u32)> + '_ {
        self.vals.iter().enumerate().filter(|(_, v)| **v != UNSET).map(|(i, v)| (i as VarId, *v))
    }

    pub fn restrict(&self, scope: &BTreeSet<VarId>) -> Assignment {
        Assignment::from_pairs(self.iter().filter(|(x, _)| scope.contains(x)))
    }

    pub fn without(&self, scope: &BTreeSet<VarId>) -> Assignment {
        Assignment::from_pairs(self.iter().filter(|(x, _)| !scope.contains(x)))
    }

    pub fn values_on(&self, vars: &[VarId]) -> Option<Vec<u32>> {
        vars.iter().map(|x| self.get(*x)).collect()
    }

    pub fn set_values(&mut self, vars: &[VarId], values: &[u32]) {
        for (x, v) in vars.iter().zip(values) {
            self.set(*x, *v);
        }
    }

    /// Copies every value of `other` into `self`.
    pub fn overwrite(&mut self, other: &Assignment) {
        for (x, v) in other.iter() {
            self.set(x, v);
        }
    }

    pub(crate) fn raw(&self) -> &[u32] {
        &self.vals
    }
}

/// An LLL instance. Ids are stable under restriction and extension.
#[derive(Clone, Debug)]
pub struct LLLInstance {
    vars: Vec<Option<Arc<Variable>>>,
    events: Vec<Option<Arc<BadEvent>>>,
    var_events: Vec<Vec<EventId>>,
    graph: Graph,
}

impl PartialEq for LLLInstance {
    fn eq(&self, other: &Self) -> bool {
        let vs = |i: &LLLInstance| i.var_ids().map(|x| (x, i.var(x).unwrap().clone())).collect::<Vec<_>>();
        let es = |i: &LLLInstance| i.event_ids().map(|e| (e, i.event(e).unwrap().clone())).collect::<Vec<_>>();
        vs(self) == vs(other) && es(self) == es(other)
    }
}

impl LLLInstance {
    /// Variables get ids `0..`, events get ids `0..`, in the given order.
    pub fn new(vars: Vec<Variable>, events: Vec<BadEvent>) -> Result<Self> {
        Self::from_parts(
            vars.into_iter().map(|v| Some(Arc::new(v))).collect(),
            events.into_iter().map(|e| Some(Arc::new(e))).collect(),
        )
    }

    pub fn empty() -> Self {
        Self::new(vec![], vec![]).unwrap()
    }

    fn from_parts(vars: Vec<Option<Arc<Variable>>>, events: Vec<Option<Arc<BadEvent>>>) -> Result<Self> {
        let mut var_events = vec![Vec::new(); vars.len()];
        for (id, e) in events.iter().enumerate() {
            let Some(e) = e else { continue };
            for (k, &x) in e.vbl.iter().enumerate() {
                let var = vars
                    .get(x as usize)
                    .and_then(|v| v.as_ref())
                    .ok_or_else(|| Error::Model(format!("event {} refers to undeclared variable {x}", e.name)))?;
                if var.domain() != e.dims[k] {
                    return Err(Error::Model(format!(
                        "event {}: variable {} has domain {} but the event assumes {}",
                        e.name,
                        var.name,
                        var.domain(),
                        e.dims[k]
                    )));
                }
                var_events[x as usize].push(id as EventId);
            }
        }
        let mut graph = Graph::with_nodes(events.iter().map(|e| e.is_some()).collect());
        for list in &var_events {
            for (i, &a) in list.iter().enumerate() {
                for &b in &list[i + 1..] {
                    graph.add_edge(a, b);
                }
            }
        }
        graph.finish();
        Ok(LLLInstance { vars, events, var_events, graph })
    }

    pub fn var(&self, x: VarId) -> Option<&Variable> {
        self.vars.get(x as usize).and_then(|v| v.as_deref())
    }

    pub fn event(&self, e: EventId) -> Option<&BadEvent> {
        self.events.get(e as usize).and_then(|v| v.as_deref())
    }

    pub fn has_var(&self, x: VarId) -> bool {
        self.var(x).is_some()
    }

    pub fn has_event(&self, e: EventId) -> bool {
        self.event(e).is_some()
    }

    pub fn var_ids(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(i, _)| i as VarId)
    }

    pub fn event_ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.events.iter().enumerate().filter(|(_, v)| v.is_some()).map(|(i, _)| i as EventId)
    }

    pub fn events(&self) -> impl Iterator<Item = (EventId, &BadEvent)> + '_ {
        self.events.iter().enumerate().filter_map(|(i, e)| e.as_deref().map(|e| (i as EventId, e)))
    }

    pub fn all_vars(&self) -> BTreeSet<VarId> {
        self.var_ids().collect()
    }

    pub fn all_events(&self) -> Region {
        self.event_ids().collect()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.iter().filter(|v| v.is_some()).count()
    }

    pub fn num_events(&self) -> usize {
        self.events.iter().filter(|v| v.is_some()).count()
    }

    pub fn var_capacity(&self) -> usize {
        self.vars.len()
    }

    pub fn event_capacity(&self) -> usize {
        self.events.len()
    }

    pub fn fresh_var_id(&self) -> VarId {
        self.vars.len() as VarId
    }

    pub fn fresh_event_id(&self) -> EventId {
        self.events.len() as EventId
    }

    pub fn domain(&self, x: VarId) -> u32 {
        self.var(x).map(|v| v.domain()).unwrap_or(0)
    }

    pub fn events_of(&self, x: VarId) -> &[EventId] {
        self.var_events.get(x as usize).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.var_ids().find(|x| self.var(*x).unwrap().name == name)
    }

    pub fn find_event(&self, name: &str) -> Option<EventId> {
        self.event_ids().find(|e| self.event(*e).unwrap().name == name)
    }

    /// Union of the vbl sets of a region.
    pub fn vbl(&self, region: &Region) -> BTreeSet<VarId> {
        region.iter().filter_map(|e| self.event(*e)).flat_map(|e| e.vbl.iter().copied()).collect()
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        match region.iter().find(|e| !self.has_event(**e)) {
            Some(e) => Err(Error::Argument(format!("region refers to unknown event {e}"))),
            None => Ok(()),
        }
    }

    /// Keeps the listed variables and events; every kept event must keep its variables.
    pub fn restrict(&self, vars: &BTreeSet<VarId>, events: &Region) -> Result<Self> {
        self.check_region(events)?;
        let nv = self.vars.iter().enumerate().map(|(i, v)| v.clone().filter(|_| vars.contains(&(i as VarId)))).collect();
        let ne = self.events.iter().enumerate().map(|(i, e)| e.clone().filter(|_| events.contains(&(i as EventId)))).collect();
        Self::from_parts(nv, ne)
    }

    /// The sub-instance on `vbl(region)` with events `region`.
    pub fn sub_instance(&self, region: &Region) -> Result<Self> {
        self.check_region(region)?;
        self.restrict(&self.vbl(region), region)
    }

    /// Adds variables and events under fresh ids; the receiver is left untouched.
    pub fn extend(&self, new_vars: Vec<(VarId, Variable)>, new_events: Vec<(EventId, BadEvent)>) -> Result<Self> {
        let mut vars = self.vars.clone();
        let mut events = self.events.clone();
        for (x, v) in new_vars {
            let i = x as usize;
            if i < vars.len() && vars[i].is_some() {
                return Err(Error::Argument(format!("variable id {x} already in use")));
            }
            if i >= vars.len() {
                vars.resize(i + 1, None);
            }
            vars[i] = Some(Arc::new(v));
        }
        for (e, ev) in new_events {
            let i = e as usize;
            if i < events.len() && events[i].is_some() {
                return Err(Error::Argument(format!("event id {e} already in use")));
            }
            if i >= events.len() {
                events.resize(i + 1, None);
            }
            events[i] = Some(Arc::new(ev));
        }
        Self::from_parts(vars, events)
    }

    /// Adds one event under the next free id.
    pub fn with_event(&self, e: BadEvent) -> Result<(Self, EventId)> {
        let id = self.fresh_event_id();
        Ok((self.extend(vec![], vec![(id, e)])?, id))
    }

    /// Product weight ν of the values in `a` (variables unknown to the instance are an error).
    pub fn nu(&self, a: &Assignment) -> Result<Rational> {
        let mut w = Rational::one();
        for (x, v) in a.iter() {
            let var = self.var(x).ok_or_else(|| Error::Argument(format!("unknown variable {x}")))?;
            if v >= var.domain() {
                return Err(Error::Argument(format!("value {v} out of domain for {}", var.name)));
            }
            w *= var.dist.weight(v);
        }
        Ok(w)
    }

    pub fn check_assignment(&self, a: &Assignment) -> Result<()> {
        self.nu(a).map(|_| ())
    }

    /// Does any event of the instance occur on the (covering) assignment?
    pub fn violated(&self, y: &Assignment) -> Result<Vec<EventId>> {
        let mut out = Vec::new();
        for (id, e) in self.events() {
            if e.occurs(y)? {
                out.push(id);
            }
        }
        Ok(out)
    }
}

/// The dependency graph: an edge joins two events iff their vbl sets meet.
pub fn dependency_graph(inst: &LLLInstance) -> Graph {
    inst.graph().clone()
}

/// Builds instances with names instead of raw ids.
#[derive(Default)]
pub struct InstanceBuilder {
    vars: Vec<Variable>,
    events: Vec<BadEvent>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(&mut self, name: impl Into<String>, dist: Distribution) -> VarId {
        self.vars.push(Variable::new(name, dist));
        (self.vars.len() - 1) as VarId
    }

    pub fn bit(&mut self, name: impl Into<String>) -> VarId {
        self.var(name, Distribution::uniform(2))
    }

    pub fn event(&mut self, name: impl Into<String>, vbl: &[VarId], forbidden: Vec<Vec<u32>>) -> Result<EventId> {
        let dims = vbl.iter().map(|x| self.vars[*x as usize].domain()).collect();
        self.events.push(BadEvent::new(name, vbl.to_vec(), dims, forbidden)?);
        Ok((self.events.len() - 1) as EventId)
    }

    pub fn predicate(&mut self, name: impl Into<String>, vbl: &[VarId], occurs: impl Fn(&[u32]) -> bool) -> Result<EventId> {
        let dims = vbl.iter().map(|x| self.vars[*x as usize].domain()).collect();
        self.events.push(BadEvent::from_predicate(name, vbl.to_vec(), dims, occurs)?);
        Ok((self.events.len() - 1) as EventId)
    }

    pub fn build(self) -> Result<LLLInstance> {
        LLLInstance::new(self.vars, self.events)
    }
}
