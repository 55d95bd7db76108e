//! Dependency-graph network: weak network decomposition, variable ownership and the
//! metered SLOCAL-LV engine with its sequential and LOCAL-simulation modes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::RngCore;
use rand_distr::{Distribution as _, Exp};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::instance::{EventId, LLLInstance, VarId};

/// Constant of the implemented round-cost model.
pub const COST_CONSTANT: u64 = 16;

/// Graphs at most this large use the one-cluster-per-component fallback.
pub const FALLBACK_NODES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecompositionMethod {
    /// Fallback for small graphs, ball carving otherwise.
    Auto,
    Fallback,
    BallCarving,
}

/// Weak network decomposition: clusters, a proper cluster colouring and a diameter bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomposition {
    pub clusters: Vec<BTreeSet<u32>>,
    pub color: Vec<usize>,
    pub diameter_bound: u64,
    /// Rounds charged for building it.
    pub rounds: u64,
}

impl Decomposition {
    pub fn num_colors(&self) -> usize {
        self.color.iter().max().map_or(0, |c| c + 1)
    }

    pub fn cluster_of(&self, v: u32) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(&v))
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        let mut owner = vec![None; g.capacity()];
        for (i, c) in self.clusters.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Invariant(format!("cluster {i} is empty")));
            }
            for &v in c {
                if !g.contains(v) || owner[v as usize].is_some() {
                    return Err(Error::Invariant(format!("node {v} is not covered exactly once")));
                }
                owner[v as usize] = Some(i);
            }
            match g.diameter_of(c) {
                Some(d) if d <= self.diameter_bound => {}
                _ => return Err(Error::Invariant(format!("cluster {i} exceeds diameter bound {}", self.diameter_bound))),
            }
        }
        if g.nodes().any(|v| owner[v as usize].is_none()) {
            return Err(Error::Invariant("decomposition does not cover every node".into()));
        }
        for (a, b) in g.edges() {
            let (ca, cb) = (owner[a as usize].unwrap(), owner[b as usize].unwrap());
            if ca != cb && self.color[ca] == self.color[cb] {
                return Err(Error::Invariant(format!("adjacent clusters {ca} and {cb} share a colour")));
            }
        }
        Ok(())
    }
}

fn greedy_colors(g: &Graph, clusters: &[BTreeSet<u32>]) -> Vec<usize> {
    let mut owner = vec![usize::MAX; g.capacity()];
    for (i, c) in clusters.iter().enumerate() {
        for &v in c {
            owner[v as usize] = i;
        }
    }
    let mut color = vec![usize::MAX; clusters.len()];
    for (i, c) in clusters.iter().enumerate() {
        let used: BTreeSet<usize> = c
            .iter()
            .flat_map(|v| g.neighbors(*v))
            .map(|w| owner[*w as usize])
            .filter(|o| *o != i && color[*o] != usize::MAX)
            .map(|o| color[o])
            .collect();
        color[i] = (0..).find(|k| !used.contains(k)).unwrap();
    }
    color
}

/// One cluster per connected component, coloured by component index.
pub fn fallback_decomposition(g: &Graph) -> Decomposition {
    let clusters = g.components();
    let diameter_bound = clusters.iter().map(|c| g.diameter_of(c).unwrap_or(0)).max().unwrap_or(0);
    let color = (0..clusters.len()).collect();
    Decomposition { clusters, color, diameter_bound, rounds: diameter_bound + 1 }
}

/// Ball carving with exponential delays. Node `u` draws its delay from `streams(u)`;
/// every node joins the centre minimising dist − delay (ties by id). Draws repeat
/// until every cluster has diameter at most 2⌈4 ln n/β⌉; the recorded bound is the
/// largest diameter actually produced.
pub fn ball_carving(g: &Graph, streams: &mut dyn FnMut(u32) -> Box<dyn RngCore>) -> Decomposition {
    let n = g.node_count().max(2) as f64;
    let beta = 0.5;
    let exp = Exp::new(beta).unwrap();
    let bound = 2 * (4.0 * n.ln() / beta).ceil() as u64;
    let nodes: Vec<u32> = g.nodes().collect();
    let dists: BTreeMap<u32, Vec<Option<u64>>> = nodes.iter().map(|v| (*v, g.distances_from([*v], None))).collect();
    let mut rngs: BTreeMap<u32, Box<dyn RngCore>> = nodes.iter().map(|v| (*v, streams(*v))).collect();
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let delay: BTreeMap<u32, f64> = nodes.iter().map(|v| (*v, exp.sample(rngs.get_mut(v).unwrap()))).collect();
        let mut by_centre: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for &v in &nodes {
            let mut best: Option<(f64, u32)> = None;
            for &u in &nodes {
                if let Some(d) = dists[&u][v as usize] {
                    let key = d as f64 - delay[&u];
                    if best.is_none_or(|(b, _)| key < b) {
                        best = Some((key, u));
                    }
                }
            }
            by_centre.entry(best.unwrap().1).or_default().insert(v);
        }
        let mut clusters: Vec<BTreeSet<u32>> = by_centre.into_values().collect();
        clusters.sort_by_key(|c| *c.iter().next().unwrap());
        let diams: Vec<Option<u64>> = clusters.iter().map(|c| g.diameter_of(c)).collect();
        if diams.iter().all(|d| d.is_some_and(|d| d <= bound)) {
            let color = greedy_colors(g, &clusters);
            let colors = color.iter().max().map_or(0, |c| c + 1) as u64;
            let observed = diams.into_iter().flatten().max().unwrap_or(0);
            return Decomposition {
                clusters,
                color,
                diameter_bound: observed,
                rounds: attempts * (bound + 1) * (colors + 1),
            };
        }
    }
}

pub fn network_decomposition(
    g: &Graph,
    method: DecompositionMethod,
    streams: &mut dyn FnMut(u32) -> Box<dyn RngCore>,
) -> Result<Decomposition> {
    let d = match method {
        DecompositionMethod::Fallback => fallback_decomposition(g),
        DecompositionMethod::Auto if g.node_count() <= FALLBACK_NODES => fallback_decomposition(g),
        _ => ball_carving(g, streams),
    };
    d.validate(g)?;
    Ok(d)
}

/// Owner of each variable: the smallest-id event containing it.
pub fn variable_ownership(inst: &LLLInstance) -> Result<BTreeMap<VarId, EventId>> {
    inst.var_ids()
        .map(|x| {
            inst.events_of(x)
                .iter()
                .min()
                .map(|e| (x, *e))
                .ok_or_else(|| Error::Model(format!("variable {} appears in no event", inst.var(x).unwrap().name)))
        })
        .collect()
}

/// Memories of all nodes, keyed by node id.
pub type Memories<M> = BTreeMap<u32, M>;

/// Read/write access to node memories, charged by distance from the active node.
pub struct MemoryView<'a, M> {
    graph: &'a Graph,
    mems: &'a mut Memories<M>,
    center: u32,
    dist: Vec<Option<u64>>,
    radius: u64,
    limit: Option<u64>,
    exceeded: bool,
}

impl<'a, M> MemoryView<'a, M> {
    fn new(graph: &'a Graph, mems: &'a mut Memories<M>, center: u32, limit: Option<u64>) -> Self {
        let dist = graph.distances_from([center], None);
        MemoryView { graph, mems, center, dist, radius: 0, limit, exceeded: false }
    }

    pub fn center(&self) -> u32 {
        self.center
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn dist(&self, w: u32) -> Option<u64> {
        self.dist.get(w as usize).copied().flatten()
    }

    /// Largest distance charged so far.
    pub fn radius(&self) -> u64 {
        self.radius
    }

    /// Charges access to `w` without reading it.
    pub fn touch(&mut self, w: u32) -> Result<()> {
        let d = self.dist(w).ok_or_else(|| Error::Invariant(format!("node {w} is unreachable from {}", self.center)))?;
        if self.limit.is_some_and(|l| d > l) {
            self.exceeded = true;
            return Err(Error::Invariant("access radius limit exceeded".into()));
        }
        self.radius = self.radius.max(d);
        Ok(())
    }

    pub fn touch_all<I: IntoIterator<Item = u32>>(&mut self, ws: I) -> Result<()> {
        for w in ws {
            self.touch(w)?;
        }
        Ok(())
    }

    pub fn read(&mut self, w: u32) -> Result<&M> {
        self.touch(w)?;
        self.mems.get(&w).ok_or_else(|| Error::Invariant(format!("node {w} has no memory")))
    }

    pub fn write(&mut self, w: u32) -> Result<&mut M> {
        self.touch(w)?;
        self.mems.get_mut(&w).ok_or_else(|| Error::Invariant(format!("node {w} has no memory")))
    }
}

/// An N-scan SLOCAL-LV algorithm. Each step must be a deterministic function of the
/// memories it reads.
pub trait SlocalAlgorithm {
    type Memory: Clone + PartialEq + fmt::Debug;

    fn scans(&self) -> usize {
        1
    }

    fn step(&self, scan: usize, v: u32, view: &mut MemoryView<'_, Self::Memory>) -> Result<()>;
}

/// Per (node, scan) radii and the LOCAL rounds charged for a phase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RadiusLog {
    pub radii: BTreeMap<(u32, usize), u64>,
    pub rounds: u64,
}

impl RadiusLog {
    pub fn max_radius(&self) -> u64 {
        self.radii.values().copied().max().unwrap_or(0)
    }
}

fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

/// c·|A|·max(1, max radius)·max(1, ⌈log2 n⌉).
pub fn round_bound(active: usize, max_radius: u64, n: usize) -> u64 {
    COST_CONSTANT * active as u64 * max_radius.max(1) * ceil_log2(n).max(1)
}

enum Run {
    Done(RadiusLog),
    Exceeded,
}

fn run_scans<A: SlocalAlgorithm>(
    alg: &A,
    g: &Graph,
    mems: &mut Memories<A::Memory>,
    active: &BTreeSet<u32>,
    limit: Option<u64>,
) -> Result<Run> {
    let mut log = RadiusLog::default();
    for scan in 0..alg.scans() {
        for &v in active {
            let mut view = MemoryView::new(g, mems, v, limit);
            let res = alg.step(scan, v, &mut view);
            if view.exceeded {
                return Ok(Run::Exceeded);
            }
            res?;
            log.radii.insert((v, scan), view.radius);
        }
    }
    Ok(Run::Done(log))
}

/// Processes the active nodes in ascending id order, scan after scan.
pub fn slocal_run_sequential<A: SlocalAlgorithm>(
    alg: &A,
    g: &Graph,
    mems: &mut Memories<A::Memory>,
    active: &BTreeSet<u32>,
) -> Result<RadiusLog> {
    check_active(g, active)?;
    match run_scans(alg, g, mems, active, None)? {
        Run::Done(mut log) => {
            log.rounds = round_bound(active.len(), log.max_radius(), g.node_count());
            Ok(log)
        }
        Run::Exceeded => unreachable!(),
    }
}

fn check_active(g: &Graph, active: &BTreeSet<u32>) -> Result<()> {
    match active.iter().find(|v| !g.contains(**v)) {
        Some(v) => Err(Error::Argument(format!("active node {v} is not in the network"))),
        None => Ok(()),
    }
}

/// Outcome of the LOCAL simulation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimReport {
    pub log: RadiusLog,
    /// Per active node: the successful guess i and the simulated set A_v.
    pub guesses: BTreeMap<u32, (u32, BTreeSet<u32>)>,
    pub canceled: BTreeSet<u32>,
}

/// Doubling-guess simulation: each active node simulates the algorithm on its component of
/// G^(2^(i+1))[A], failing when an access exceeds 2^i; nested simulated sets are cancelled,
/// equal sets keep the smallest id.
pub fn slocal_run_local_sim<A: SlocalAlgorithm>(
    alg: &A,
    g: &Graph,
    mems: &mut Memories<A::Memory>,
    active: &BTreeSet<u32>,
) -> Result<SimReport> {
    check_active(g, active)?;
    let initial = mems.clone();
    let dists: BTreeMap<u32, Vec<Option<u64>>> = active.iter().map(|v| (*v, g.distances_from([*v], None))).collect();
    let component = |v: u32, t: u64| -> BTreeSet<u32> {
        let mut comp = BTreeSet::from([v]);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for &w in active {
                if !comp.contains(&w) && dists[&u][w as usize].is_some_and(|d| d <= t) {
                    comp.insert(w);
                    stack.push(w);
                }
            }
        }
        comp
    };

    struct Outcome<M> {
        set: BTreeSet<u32>,
        mems: Memories<M>,
        log: RadiusLog,
        cost: u64,
        guess: u32,
    }
    let mut outcomes: BTreeMap<u32, Outcome<A::Memory>> = BTreeMap::new();
    for &v in active {
        let mut cost = 0u64;
        let mut i = 1u32;
        loop {
            if i > 62 {
                return Err(Error::Invariant("simulation never succeeded".into()));
            }
            let t = 1u64 << (i + 1);
            let set = component(v, t);
            cost += set.len() as u64 * t + (1u64 << i);
            let mut sim = initial.clone();
            if let Run::Done(log) = run_scans(alg, g, &mut sim, &set, Some(1u64 << i))? {
                outcomes.insert(v, Outcome { set, mems: sim, log, cost, guess: i });
                break;
            }
            i += 1;
        }
    }

    let mut report = SimReport::default();
    for (&u, ou) in &outcomes {
        let canceled = outcomes.iter().any(|(&w, ow)| {
            w != u && ou.set.is_subset(&ow.set) && (ou.set != ow.set || w < u)
        });
        if canceled {
            report.canceled.insert(u);
        }
        report.guesses.insert(u, (ou.guess, ou.set.clone()));
    }

    let mut result = initial.clone();
    let mut writer: BTreeMap<u32, u32> = BTreeMap::new();
    for (&u, ou) in &outcomes {
        if report.canceled.contains(&u) {
            continue;
        }
        for (w, m) in &ou.mems {
            if initial.get(w) != Some(m) {
                if let Some(prev) = writer.insert(*w, u) {
                    return Err(Error::Invariant(format!("nodes {prev} and {u} both updated node {w}")));
                }
                result.insert(*w, m.clone());
            }
        }
        for (k, r) in &ou.log.radii {
            if ou.set.contains(&k.0) {
                report.log.radii.insert(*k, *r);
            }
        }
    }
    report.log.rounds = outcomes.values().map(|o| o.cost).max().unwrap_or(0);
    *mems = result;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn streams(seed: u64) -> impl FnMut(u32) -> Box<dyn RngCore> {
        move |v| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(v as u64);
            Box::new(r)
        }
    }

    #[test]
    fn fallback_examples() {
        let g = Graph::complete_nodes(1);
        let d = network_decomposition(&g, DecompositionMethod::Auto, &mut streams(0)).unwrap();
        assert_eq!((d.clusters.len(), d.num_colors()), (1, 1));
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]);
        let d = network_decomposition(&g, DecompositionMethod::Fallback, &mut streams(0)).unwrap();
        assert_eq!(d.clusters, vec![BTreeSet::from([0, 1, 2])]);
        assert_eq!(d.diameter_bound, 2);
    }

    #[test]
    fn carving_invariants_on_random_graphs() {
        use rand::Rng;
        let mut grng = ChaCha8Rng::seed_from_u64(99);
        let mut edges = vec![];
        for a in 0..50u32 {
            for b in a + 1..50 {
                if grng.gen_bool(0.06) {
                    edges.push((a, b));
                }
            }
        }
        let mut g = Graph::from_edges(50, &edges);
        g.finish();
        for seed in 0..100 {
            let d = network_decomposition(&g, DecompositionMethod::Auto, &mut streams(seed)).unwrap();
            d.validate(&g).unwrap();
        }
    }

    #[test]
    fn ownership_examples() {
        let own = variable_ownership(&path3()).unwrap();
        assert_eq!(own, BTreeMap::from([(0, 0), (1, 0), (2, 1)]));
        let own = variable_ownership(&pair()).unwrap();
        assert!(own.values().all(|e| *e == 0));
    }

    /// Each active node stamps every unclaimed node within distance 2 with its id and
    /// records how many it claimed.
    struct Claim;

    impl SlocalAlgorithm for Claim {
        type Memory = (Option<u32>, u32);

        fn step(&self, _: usize, v: u32, view: &mut MemoryView<'_, Self::Memory>) -> Result<()> {
            let ball = view.graph().ball([v], 2);
            let mut n = 0;
            for w in ball {
                let m = view.write(w)?;
                if m.0.is_none() {
                    m.0 = Some(v);
                    n += 1;
                }
            }
            view.write(v)?.1 = n;
            Ok(())
        }
    }

    #[test]
    fn modes_agree_on_claims() {
        let mut g = Graph::from_edges(12, &(0..11).map(|i| (i, i + 1)).collect::<Vec<_>>());
        g.finish();
        for active in [vec![], vec![3], vec![0, 2, 9], vec![0, 5, 6, 11], (0..12).collect()] {
            let active: BTreeSet<u32> = active.into_iter().collect();
            let init: Memories<(Option<u32>, u32)> = (0..12).map(|v| (v, (None, 0))).collect();
            let mut a = init.clone();
            let seq = slocal_run_sequential(&Claim, &g, &mut a, &active).unwrap();
            let mut b = init.clone();
            let sim = slocal_run_local_sim(&Claim, &g, &mut b, &active).unwrap();
            assert_eq!(a, b);
            assert!(sim.log.rounds <= round_bound(active.len(), seq.max_radius(), 12));
            if active.len() == 1 {
                assert!(sim.canceled.is_empty());
            }
            if active.is_empty() {
                assert_eq!(a, init);
            }
        }
    }
}
