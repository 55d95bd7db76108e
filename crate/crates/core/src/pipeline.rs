//! Initialization, Clustering and Resampling over the dependency graph, and the
//! Las Vegas perfect-simulation wrapper.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::augmentation::{augment, substitute, Substitution};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::instance::{Assignment, BadEvent, Distribution, EventId, LLLInstance, Region, VarId, Variable};
use crate::oracle::{self, ExactOracle};
use crate::rational::{self, Rational};
use crate::runtime::{
    network_decomposition, slocal_run_local_sim, slocal_run_sequential, Decomposition, DecompositionMethod, Memories,
    MemoryView, RadiusLog, SimReport, SlocalAlgorithm,
};
use crate::sampler::{recursive_sampling, ExecutionTrace, Params, SamplerConfig};

const PHASE_DRAW: u64 = 0;
const PHASE_DECOMPOSE: u64 = 1;
const PHASE_RESAMPLE: u64 = 2;
const ORPHAN_STREAM: u32 = u32::MAX;

/// The replayable rng stream of node `v` in one phase.
pub fn node_rng(seed: u64, v: u32, phase: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((v as u64) << 8) | phase);
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuntimeMode {
    Sequential,
    /// Both SLOCAL phases run through the doubling-guess LOCAL simulation.
    LocalSim,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    /// ν(Ω) lower bound; computed by the oracle when absent.
    pub gamma: Option<Rational>,
    pub runtime: RuntimeMode,
    pub decomposition: DecompositionMethod,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sampler: SamplerConfig::default(),
            gamma: None,
            runtime: RuntimeMode::Sequential,
            decomposition: DecompositionMethod::Auto,
        }
    }
}

/// (ε0, γ0, δ0) = (1/(2n³), γ/8, ζ0·γ/(24n³)).
pub fn phase_params(n: usize, gamma: &Rational, zeta0: &Rational) -> Params {
    let n3 = rational::int(n.max(1) as i64).pow(3);
    let gamma0 = gamma / rational::int(8);
    Params {
        eps: rational::int(1) / (rational::int(2) * &n3),
        delta: zeta0 * gamma / (rational::int(24) * &n3),
        alpha: gamma0.clone(),
        gamma: gamma0,
    }
}

/// max(1, ⌈d·log2 n·max(1, log2 log2 log2 n)⌉) + 1.
pub fn clamped_radius(n: usize, d: u64) -> u64 {
    let l = (n.max(1) as f64).log2();
    let lll = l.log2().log2().max(1.0);
    let core = (d as f64 * l * lll).ceil();
    (core as u64).max(1) + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeMemory {
    pub id: EventId,
    pub seed: u64,
    /// Y on the variables this node owns.
    pub values: BTreeMap<VarId, u32>,
    pub active: bool,
    pub p: Option<EventId>,
    pub r: Option<u64>,
    pub b: Option<EventId>,
    pub trace: Option<ExecutionTrace>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Initialization {
    pub y: Assignment,
    pub active: BTreeSet<EventId>,
    pub owner: BTreeMap<VarId, EventId>,
    pub decomposition: Decomposition,
    pub rounds: u64,
}

fn partial_ownership(inst: &LLLInstance) -> BTreeMap<VarId, EventId> {
    inst.var_ids().filter_map(|x| inst.events_of(x).iter().min().map(|e| (x, *e))).collect()
}

/// Owners draw Y ∼ ν; the union event of each cluster marks its smallest node.
pub fn initialization_phase(inst: &LLLInstance, seed: u64, method: DecompositionMethod) -> Result<Initialization> {
    let owner = partial_ownership(inst);
    let mut owned: BTreeMap<u32, Vec<VarId>> = BTreeMap::new();
    for x in inst.var_ids() {
        owned.entry(owner.get(&x).copied().unwrap_or(ORPHAN_STREAM)).or_default().push(x);
    }
    let mut y = Assignment::new();
    for (v, xs) in &owned {
        let mut rng = node_rng(seed, *v, PHASE_DRAW);
        for x in xs {
            y.set(*x, oracle::draw_index(inst.var(*x).unwrap().dist.scaled(), &mut rng) as u32);
        }
    }
    let g = inst.graph();
    let decomposition = network_decomposition(g, method, &mut |v| Box::new(node_rng(seed, v, PHASE_DECOMPOSE)))?;
    let violated: BTreeSet<EventId> = inst.violated(&y)?.into_iter().collect();
    let mut active = BTreeSet::new();
    for c in &decomposition.clusters {
        if c.iter().any(|e| violated.contains(e)) {
            active.insert(*c.iter().next().unwrap());
        }
    }
    for &e in &violated {
        let d = g.distances_from(active.iter().copied(), None)[e as usize];
        if d.is_none_or(|d| d > decomposition.diameter_bound) {
            return Err(Error::Invariant(format!("occurred event {e} is far from every marked node")));
        }
    }
    let rounds = 2 + decomposition.rounds + decomposition.diameter_bound;
    Ok(Initialization { y, active, owner, decomposition, rounds })
}

/// A committed clustering ball B_r(p), identified by the active node that owns it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    pub owner: EventId,
    pub center: EventId,
    pub radius: u64,
    pub events: Region,
}

fn set_distance(g: &Graph, a: &Region, b: &Region) -> Option<u64> {
    let d = g.distances_from(a.iter().copied(), None);
    b.iter().filter_map(|w| d[*w as usize]).min()
}

/// Disjointness and dist ≥ 2(ℓ+2) between distinct balls.
pub fn check_clustering(g: &Graph, balls: &[Ball], ell: u64) -> Result<()> {
    for (i, a) in balls.iter().enumerate() {
        for b in &balls[i + 1..] {
            if !a.events.is_disjoint(&b.events) {
                return Err(Error::Invariant(format!("balls of {} and {} intersect", a.owner, b.owner)));
            }
            if let Some(d) = set_distance(g, &a.events, &b.events) {
                if d < 2 * (ell + 2) {
                    return Err(Error::Invariant(format!(
                        "balls of {} and {} are at distance {d} < 2(ℓ+2) = {}",
                        a.owner,
                        b.owner,
                        2 * (ell + 2)
                    )));
                }
            }
        }
    }
    Ok(())
}

struct Context<'a> {
    inst: &'a LLLInstance,
    owner: &'a BTreeMap<VarId, EventId>,
    oracle: ExactOracle,
    cfg: &'a SamplerConfig,
    params: Params,
    ell: u64,
    r0: u64,
}

struct ClusteringAlg<'a>(&'a Context<'a>);

impl SlocalAlgorithm for ClusteringAlg<'_> {
    type Memory = NodeMemory;

    fn step(&self, _: usize, v: u32, view: &mut MemoryView<'_, NodeMemory>) -> Result<()> {
        let ctx = self.0;
        let g = ctx.inst.graph();
        let ell = ctx.ell;
        {
            let m = view.write(v)?;
            m.p = Some(v);
            m.r = Some(ctx.r0);
        }
        loop {
            let (p, r) = {
                let m = view.read(v)?;
                (m.p.unwrap(), m.r.unwrap())
            };
            let mut merge = None;
            for w in g.ball([p], 2 * (ell + 2) + r) {
                if let Some(u) = view.read(w)?.b {
                    if u != v {
                        merge = Some(u);
                        break;
                    }
                }
            }
            if let Some(u) = merge {
                let (pu, ru) = {
                    let m = view.read(u)?;
                    match (m.p, m.r) {
                        (Some(pu), Some(ru)) => (pu, ru),
                        _ => return Err(Error::Invariant(format!("stamp points at dissolved ball {u}"))),
                    }
                };
                let dp = g.distances_from([p], None);
                let du = g.distances_from([pu], None);
                let c = g
                    .nodes()
                    .find(|c| {
                        dp[*c as usize].is_some_and(|d| d <= ru + ell + 2) && du[*c as usize].is_some_and(|d| d <= r + ell + 2)
                    })
                    .ok_or_else(|| Error::Invariant("no merge centre".into()))?;
                view.touch(c)?;
                {
                    let m = view.write(v)?;
                    m.p = Some(c);
                    m.r = Some(ru + r + 2 * (ell + 2));
                }
                for w in g.ball([pu], ru) {
                    view.write(w)?.b = None;
                }
                let m = view.write(u)?;
                m.p = None;
                m.r = None;
                continue;
            }
            let ball = g.ball([p], r);
            let Params { eps, gamma, delta, .. } = &ctx.params;
            let a = augment(&ctx.oracle, ctx.inst, &ball, eps, gamma, delta, ell, &ctx.cfg.consts.eps0)?;
            let mut y = Assignment::new();
            for x in a.vbl() {
                let o = ctx.owner[&x];
                y.set(x, view.read(o)?.values[&x]);
            }
            if !a.is_never() && a.occurs(ctx.inst, &y)? {
                view.write(v)?.r = Some(r + ell);
                continue;
            }
            for w in ball {
                view.write(w)?.b = Some(v);
            }
            return Ok(());
        }
    }
}

struct ResamplingAlg<'a>(&'a Context<'a>);

impl SlocalAlgorithm for ResamplingAlg<'_> {
    type Memory = NodeMemory;

    fn step(&self, _: usize, v: u32, view: &mut MemoryView<'_, NodeMemory>) -> Result<()> {
        let ctx = self.0;
        let g = ctx.inst.graph();
        let (p, r, seed) = {
            let m = view.read(v)?;
            match (m.p, m.r) {
                (Some(p), Some(r)) => (p, r, m.seed),
                _ => return Ok(()),
            }
        };
        let comp: Region = g.ball([v], u64::MAX);
        let mut y = Assignment::new();
        let mut later = BTreeSet::new();
        for &w in &comp {
            let m = view.read(w)?;
            for (x, val) in &m.values {
                y.set(*x, *val);
            }
            if let Some(j) = m.b {
                if j > v {
                    later.insert(j);
                }
            }
        }
        let inst_c = ctx.inst.restrict(&ctx.inst.vbl(&comp), &comp)?;
        let Params { eps, gamma, delta, .. } = &ctx.params;
        let fresh_var = ctx.inst.fresh_var_id();
        let fresh_event = ctx.inst.fresh_event_id();
        let mut subs: Vec<Substitution> = Vec::new();
        for (k, &j) in later.iter().enumerate() {
            let (pj, rj) = {
                let m = view.read(j)?;
                (m.p.unwrap(), m.r.unwrap())
            };
            let lam_j = g.ball([pj], rj);
            let sigma = y.restrict(&inst_c.vbl(&lam_j));
            subs.push(substitute(
                &ctx.oracle,
                &inst_c,
                &lam_j,
                &sigma,
                eps,
                gamma,
                delta,
                ctx.ell,
                &ctx.cfg.consts,
                fresh_var + k as u32,
                fresh_event + k as u32,
            )?);
        }
        let lam = g.ball([p], r);
        let u_prime: BTreeSet<VarId> =
            inst_c.var_ids().filter(|x| subs.iter().all(|s| !s.inner_vars.contains(x))).collect();
        let v_prime: Region = comp.iter().copied().filter(|e| subs.iter().all(|s| !s.inner_events.contains(e))).collect();
        if !lam.is_subset(&v_prime) {
            return Err(Error::Invariant(format!("ball of {v} meets a substituted ball")));
        }
        let inst_p = inst_c.restrict(&u_prime, &v_prime)?.extend(
            subs.iter().map(|s| (s.beta, s.beta_var.clone())).collect(),
            subs.iter().map(|s| (s.kappa, s.kappa_event.clone())).collect(),
        )?;
        let mut rng = node_rng(seed, v, PHASE_RESAMPLE);
        let mut y_p = y.restrict(&u_prime);
        for s in &subs {
            let tau = y_p.restrict(&s.ring.iter().copied().collect());
            let val = ctx.oracle.sample_marginal(&inst_p, &tau, &[s.beta], &mut rng)?;
            y_p.set(s.beta, val[0]);
        }
        let mut trace = ExecutionTrace::default();
        recursive_sampling(&inst_p, &lam, &mut y_p, &ctx.params, ctx.cfg, &mut rng, &mut trace)?;
        for &x in &u_prime {
            let new = y_p.get(x).unwrap();
            if y.get(x) != Some(new) {
                view.write(ctx.owner[&x])?.values.insert(x, new);
            }
        }
        view.write(v)?.trace = Some(trace);
        Ok(())
    }
}

fn run_phase<A: SlocalAlgorithm<Memory = NodeMemory>>(
    alg: &A,
    g: &Graph,
    mems: &mut Memories<NodeMemory>,
    active: &BTreeSet<u32>,
    mode: RuntimeMode,
) -> Result<(RadiusLog, Option<SimReport>)> {
    match mode {
        RuntimeMode::Sequential => Ok((slocal_run_sequential(alg, g, mems, active)?, None)),
        RuntimeMode::LocalSim => {
            let rep = slocal_run_local_sim(alg, g, mems, active)?;
            Ok((rep.log.clone(), Some(rep)))
        }
    }
}

/// Rounds charged per phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PhaseRounds {
    pub initialization: u64,
    pub clustering: u64,
    pub resampling: u64,
    /// 2(𝒟 + |ℛ|·ℓ + 1), the extra radius for reading substituted balls.
    pub substitution_overhead: u64,
}

impl PhaseRounds {
    /// Running totals after each phase.
    pub fn cumulative(&self) -> [u64; 3] {
        let a = self.initialization;
        let b = a + self.clustering;
        [a, b, b + self.resampling + self.substitution_overhead]
    }

    pub fn total(&self) -> u64 {
        self.cumulative()[2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineTrace {
    pub seed: u64,
    pub n: usize,
    pub gamma: Rational,
    pub ell: u64,
    pub r0: u64,
    pub colors: usize,
    pub diameter_bound: u64,
    pub active: Vec<EventId>,
    pub balls: Vec<Ball>,
    pub rounds: PhaseRounds,
    pub clustering: RadiusLog,
    pub resampling: RadiusLog,
    pub clustering_sim: Option<SimReport>,
    pub resampling_sim: Option<SimReport>,
    pub sampler: ExecutionTrace,
}

/// Clustering state after the first scan.
pub struct ClusterState {
    pub memories: Memories<NodeMemory>,
    pub balls: Vec<Ball>,
    pub log: RadiusLog,
    pub sim: Option<SimReport>,
}

fn memories_from(inst: &LLLInstance, init: &Initialization, seed: u64) -> Memories<NodeMemory> {
    let mut mems: Memories<NodeMemory> = inst
        .graph()
        .nodes()
        .map(|v| {
            let m = NodeMemory {
                id: v,
                seed,
                values: BTreeMap::new(),
                active: init.active.contains(&v),
                p: None,
                r: None,
                b: None,
                trace: None,
            };
            (v, m)
        })
        .collect();
    for (x, o) in &init.owner {
        mems.get_mut(o).unwrap().values.insert(*x, init.y.get(*x).unwrap());
    }
    mems
}

fn collect_balls(g: &Graph, mems: &Memories<NodeMemory>) -> Vec<Ball> {
    mems.values()
        .filter(|m| m.active)
        .filter_map(|m| match (m.p, m.r) {
            (Some(p), Some(r)) => Some(Ball { owner: m.id, center: p, radius: r, events: g.ball([p], r) }),
            _ => None,
        })
        .collect()
}

/// Draws Y ∼ μ_I by the three phases.
pub fn sample_lll(inst: &LLLInstance, seed: u64, cfg: &PipelineConfig) -> Result<(Assignment, PipelineTrace)> {
    cfg.sampler.validate()?;
    let oracle = cfg.sampler.oracle();
    let gamma = match &cfg.gamma {
        Some(g) => g.clone(),
        None => oracle.satisfiability(inst)?,
    };
    if gamma.is_zero() {
        return Err(Error::Infeasible("instance is unsatisfiable".into()));
    }
    if !rational::in_unit_open(&gamma) && gamma != rational::int(1) {
        return Err(Error::Argument("γ must lie in (0,1]".into()));
    }
    let n = inst.num_events();
    let params = phase_params(n, &gamma, &cfg.sampler.zeta0);
    let ell = cfg.sampler.consts.ell(&params.eps, &params.gamma, &params.delta)?;

    let init = initialization_phase(inst, seed, cfg.decomposition)?;
    let r0 = clamped_radius(n, cfg.sampler.d).max(init.decomposition.diameter_bound + 1);
    let ctx = Context { inst, owner: &init.owner, oracle, cfg: &cfg.sampler, params, ell, r0 };
    let g = inst.graph();

    let mut mems = memories_from(inst, &init, seed);
    let (clog, csim) = run_phase(&ClusteringAlg(&ctx), g, &mut mems, &init.active, cfg.runtime)?;
    let balls = collect_balls(g, &mems);
    check_clustering(g, &balls, ell)?;

    let (rlog, rsim) = run_phase(&ResamplingAlg(&ctx), g, &mut mems, &init.active, cfg.runtime)?;
    let mut y = Assignment::new();
    for x in inst.var_ids() {
        match init.owner.get(&x) {
            Some(o) => y.set(x, mems[o].values[&x]),
            None => y.set(x, init.y.get(x).unwrap()),
        }
    }
    let mut sampler = ExecutionTrace::default();
    for m in mems.values_mut() {
        if let Some(t) = m.trace.take() {
            sampler.merge(t);
        }
    }
    if !inst.violated(&y)?.is_empty() {
        return Err(Error::Invariant("output violates a bad event".into()));
    }
    let radii: u64 = balls.iter().map(|b| b.radius).sum();
    let rounds = PhaseRounds {
        initialization: init.rounds,
        clustering: clog.rounds,
        resampling: rlog.rounds,
        substitution_overhead: if balls.is_empty() { 0 } else { 2 * (radii + init.active.len() as u64 * ell + 1) },
    };
    let trace = PipelineTrace {
        seed,
        n,
        gamma,
        ell,
        r0,
        colors: init.decomposition.num_colors(),
        diameter_bound: init.decomposition.diameter_bound,
        active: init.active.iter().copied().collect(),
        balls,
        rounds,
        clustering: clog,
        resampling: rlog,
        clustering_sim: csim,
        resampling_sim: rsim,
        sampler,
    };
    Ok((y, trace))
}

/// Runs clustering only, from a given initialization.
pub fn clustering_phase(
    inst: &LLLInstance,
    init: &Initialization,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<ClusterState> {
    let oracle = cfg.sampler.oracle();
    let gamma = match &cfg.gamma {
        Some(g) => g.clone(),
        None => oracle.satisfiability(inst)?,
    };
    let n = inst.num_events();
    let params = phase_params(n, &gamma, &cfg.sampler.zeta0);
    let ell = cfg.sampler.consts.ell(&params.eps, &params.gamma, &params.delta)?;
    let r0 = clamped_radius(n, cfg.sampler.d).max(init.decomposition.diameter_bound + 1);
    let ctx = Context { inst, owner: &init.owner, oracle, cfg: &cfg.sampler, params, ell, r0 };
    let g = inst.graph();
    let mut memories = memories_from(inst, init, seed);
    let (log, sim) = run_phase(&ClusteringAlg(&ctx), g, &mut memories, &init.active, cfg.runtime)?;
    let balls = collect_balls(g, &memories);
    check_clustering(g, &balls, ell)?;
    Ok(ClusterState { memories, balls, log, sim })
}

/// A fixed-round Las Vegas LOCAL algorithm with finite per-node randomness.
pub trait LasVegasAlgorithm: Send + Sync {
    fn name(&self) -> &str;

    /// t(n): the radius of the output map.
    fn radius(&self) -> u64;

    fn randomness(&self, g: &Graph, v: u32) -> Distribution;

    /// (Y_v, F_v) from the random values on `ball` = B_t(v), ascending.
    fn evaluate(&self, g: &Graph, v: u32, ball: &[u32], values: &[u32]) -> (u32, bool);
}

fn value_at(ball: &[u32], values: &[u32], w: u32) -> u32 {
    values[ball.binary_search(&w).unwrap()]
}

/// Uniform bit per node; fails when a node and a neighbour both hold 1.
pub struct NoAdjacentOnes;

impl LasVegasAlgorithm for NoAdjacentOnes {
    fn name(&self) -> &str {
        "no-adjacent-ones"
    }
    fn radius(&self) -> u64 {
        1
    }
    fn randomness(&self, _: &Graph, _: u32) -> Distribution {
        Distribution::uniform(2)
    }
    fn evaluate(&self, g: &Graph, v: u32, ball: &[u32], values: &[u32]) -> (u32, bool) {
        let own = value_at(ball, values, v);
        let fail = own == 1 && g.neighbors(v).iter().any(|w| value_at(ball, values, *w) == 1);
        (own, fail)
    }
}

/// Uniform colour in {0,1,2}; fails on a monochromatic incident edge.
pub struct ThreeColoring;

impl LasVegasAlgorithm for ThreeColoring {
    fn name(&self) -> &str {
        "3-coloring"
    }
    fn radius(&self) -> u64 {
        1
    }
    fn randomness(&self, _: &Graph, _: u32) -> Distribution {
        Distribution::uniform(3)
    }
    fn evaluate(&self, g: &Graph, v: u32, ball: &[u32], values: &[u32]) -> (u32, bool) {
        let own = value_at(ball, values, v);
        (own, g.neighbors(v).iter().any(|w| value_at(ball, values, *w) == own))
    }
}

/// t = 0 and never fails: the output law is the raw product law.
pub struct FreeBits;

impl LasVegasAlgorithm for FreeBits {
    fn name(&self) -> &str {
        "free-bits"
    }
    fn radius(&self) -> u64 {
        0
    }
    fn randomness(&self, _: &Graph, _: u32) -> Distribution {
        Distribution::uniform(2)
    }
    fn evaluate(&self, _: &Graph, v: u32, ball: &[u32], values: &[u32]) -> (u32, bool) {
        (value_at(ball, values, v), false)
    }
}

pub const BUILTINS: [&str; 3] = ["no-adjacent-ones", "3-coloring", "free-bits"];

pub fn builtin(name: &str) -> Option<Box<dyn LasVegasAlgorithm>> {
    match name {
        "no-adjacent-ones" => Some(Box::new(NoAdjacentOnes)),
        "3-coloring" => Some(Box::new(ThreeColoring)),
        "free-bits" => Some(Box::new(FreeBits)),
        _ => None,
    }
}

fn check_network(g: &Graph) -> Result<()> {
    if g.node_count() == 0 || g.node_count() != g.capacity() {
        return Err(Error::Model("LV networks need nodes 0..n-1 and at least one node".into()));
    }
    Ok(())
}

/// One variable per node (its randomness) and one event per node (F_v = 1) on B_t(v).
pub fn lv_instance(alg: &dyn LasVegasAlgorithm, g: &Graph) -> Result<LLLInstance> {
    check_network(g)?;
    let vars: Vec<Variable> = g.nodes().map(|v| Variable::new(format!("X{v}"), alg.randomness(g, v))).collect();
    let mut events = Vec::new();
    for v in g.nodes() {
        let ball: Vec<u32> = g.ball([v], alg.radius()).into_iter().collect();
        let dims: Vec<u32> = ball.iter().map(|w| vars[*w as usize].domain()).collect();
        let b2 = ball.clone();
        events.push(BadEvent::from_predicate(format!("F{v}"), ball, dims, move |t| alg.evaluate(g, v, &b2, t).1)?);
    }
    LLLInstance::new(vars, events)
}

pub fn lv_outputs(alg: &dyn LasVegasAlgorithm, g: &Graph, y: &Assignment) -> Vec<u32> {
    g.nodes()
        .map(|v| {
            let ball: Vec<u32> = g.ball([v], alg.radius()).into_iter().collect();
            let vals = y.values_on(&ball).unwrap();
            alg.evaluate(g, v, &ball, &vals).0
        })
        .collect()
}

/// Perfect simulation: samples the randomness from μ of the failure instance and
/// evaluates the outputs.
pub fn simulate_las_vegas(
    alg: &dyn LasVegasAlgorithm,
    g: &Graph,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<(Vec<u32>, PipelineTrace)> {
    let inst = lv_instance(alg, g)?;
    let (y, trace) = sample_lll(&inst, seed, cfg).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible("the algorithm fails with probability 1".into()),
        e => e,
    })?;
    Ok((lv_outputs(alg, g, &y), trace))
}

/// Reference: rerun the algorithm with fresh randomness until no node fails.
pub fn lv_rejection(alg: &dyn LasVegasAlgorithm, g: &Graph, rng: &mut dyn RngCore) -> Result<Vec<u32>> {
    let inst = lv_instance(alg, g)?;
    for _ in 0..1_000_000 {
        let y = crate::sampler::sample_product(&inst, rng);
        if inst.violated(&y)?.is_empty() {
            return Ok(lv_outputs(alg, g, &y));
        }
    }
    Err(Error::Infeasible("rejection sampling did not succeed".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;

    #[test]
    fn radius_clamp() {
        assert_eq!(clamped_radius(1, 2), 2);
        assert_eq!(clamped_radius(2, 2), 3);
        assert!(clamped_radius(1000, 2) > clamped_radius(16, 2));
    }

    #[test]
    fn initialization_marks_violated_pair() {
        for seed in 0..200 {
            let init = initialization_phase(&pair(), seed, DecompositionMethod::Auto).unwrap();
            let bad = init.y.get(0) == Some(1) && init.y.get(1) == Some(1);
            assert_eq!(init.active, if bad { BTreeSet::from([0]) } else { BTreeSet::new() });
        }
    }

    #[test]
    fn pair_single_ball_covers_component() {
        let cfg = PipelineConfig::default();
        let mut seen = false;
        for seed in 0..200 {
            let (y, tr) = sample_lll(&pair(), seed, &cfg).unwrap();
            assert!(pair().violated(&y).unwrap().is_empty());
            if !tr.active.is_empty() {
                seen = true;
                assert_eq!(tr.balls.len(), 1);
                assert_eq!(tr.balls[0].events, BTreeSet::from([0]));
            }
        }
        assert!(seen);
    }

    #[test]
    fn two_components_two_balls() {
        let cfg = PipelineConfig::default();
        let mut both = false;
        for seed in 0..400 {
            let (_, tr) = sample_lll(&two_pairs(), seed, &cfg).unwrap();
            if tr.active.len() == 2 {
                both = true;
                assert_eq!(tr.balls.len(), 2);
                assert!(tr.balls[0].events.is_disjoint(&tr.balls[1].events));
            }
        }
        assert!(both);
    }

    #[test]
    fn modes_agree_end_to_end() {
        let seq = PipelineConfig::default();
        let sim = PipelineConfig { runtime: RuntimeMode::LocalSim, ..PipelineConfig::default() };
        for inst in [path3(), cycle(5), two_pairs()] {
            for seed in 0..20 {
                let (a, ta) = sample_lll(&inst, seed, &seq).unwrap();
                let (b, tb) = sample_lll(&inst, seed, &sim).unwrap();
                assert_eq!(a, b);
                assert_eq!(ta.balls, tb.balls);
                assert_eq!(ta.sampler, tb.sampler);
            }
        }
    }

    #[test]
    fn lv_instance_shapes() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let inst = lv_instance(&NoAdjacentOnes, &g).unwrap();
        assert_eq!(inst.num_events(), 3);
        assert_eq!(oracle::ExactOracle::default().satisfiability(&inst).unwrap(), rational::ratio(5, 8));
        let free = lv_instance(&FreeBits, &g).unwrap();
        assert_eq!(free.event(0).unwrap().vbl(), &[0]);
    }
}
