use std::collections::{BTreeSet, VecDeque};

/// Undirected simple graph on node ids `0..capacity`; ids may be absent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
    present: Vec<bool>,
}

impl Graph {
    pub fn with_nodes(present: Vec<bool>) -> Self {
        Graph { adj: vec![Vec::new(); present.len()], present }
    }

    pub fn complete_nodes(n: usize) -> Self {
        Self::with_nodes(vec![true; n])
    }

    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut g = Self::complete_nodes(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn add_edge(&mut self, a: u32, b: u32) {
        if a == b {
            return;
        }
        let (ai, bi) = (a as usize, b as usize);
        if !self.adj[ai].contains(&b) {
            self.adj[ai].push(b);
            self.adj[bi].push(a);
        }
    }

    pub fn finish(&mut self) {
        for l in &mut self.adj {
            l.sort_unstable();
        }
    }

    pub fn capacity(&self) -> usize {
        self.adj.len()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.present.get(v as usize).copied().unwrap_or(false)
    }

    pub fn nodes(&self) -> impl Iterator<Item = u32> + '_ {
        self.present.iter().enumerate().filter(|(_, p)| **p).map(|(i, _)| i as u32)
    }

    pub fn node_count(&self) -> usize {
        self.present.iter().filter(|p| **p).count()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for v in self.nodes() {
            for &w in self.neighbors(v) {
                if v < w {
                    out.push((v, w));
                }
            }
        }
        out
    }

    /// BFS distances from a source set, exploring at most `limit` hops.
    pub fn distances_from<I: IntoIterator<Item = u32>>(&self, sources: I, limit: Option<u64>) -> Vec<Option<u64>> {
        let mut dist = vec![None; self.capacity()];
        let mut queue = VecDeque::new();
        for s in sources {
            if self.contains(s) && dist[s as usize].is_none() {
                dist[s as usize] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize].unwrap();
            if limit.is_some_and(|l| d >= l) {
                continue;
            }
            for &w in self.neighbors(v) {
                if dist[w as usize].is_none() {
                    dist[w as usize] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn distance(&self, a: u32, b: u32) -> Option<u64> {
        self.distances_from([a], None)[b as usize]
    }

    pub fn ball<I: IntoIterator<Item = u32>>(&self, sources: I, r: u64) -> BTreeSet<u32> {
        self.distances_from(sources, Some(r))
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_some())
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn components(&self) -> Vec<BTreeSet<u32>> {
        let mut seen = vec![false; self.capacity()];
        let mut out = Vec::new();
        for v in self.nodes() {
            if seen[v as usize] {
                continue;
            }
            let comp: BTreeSet<u32> = self.ball([v], u64::MAX);
            for &w in &comp {
                seen[w as usize] = true;
            }
            out.push(comp);
        }
        out
    }

    /// Largest pairwise distance inside `set`, measured in the whole graph.
    pub fn diameter_of(&self, set: &BTreeSet<u32>) -> Option<u64> {
        let mut best = 0;
        for &v in set {
            let d = self.distances_from([v], None);
            for &w in set {
                best = best.max(d[w as usize]?);
            }
        }
        Some(best)
    }

    /// Smallest ecc-bound: every node reachable from `v` lies within the returned radius.
    pub fn eccentricity(&self, v: u32) -> u64 {
        self.distances_from([v], None).into_iter().flatten().max().unwrap_or(0)
    }

    pub fn induced(&self, keep: &BTreeSet<u32>) -> Graph {
        let present = (0..self.capacity() as u32).map(|v| keep.contains(&v) && self.contains(v)).collect();
        let mut g = Graph::with_nodes(present);
        for (a, b) in self.edges() {
            if keep.contains(&a) && keep.contains(&b) {
                g.add_edge(a, b);
            }
        }
        g.finish();
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_distances() {
        let mut g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        g.finish();
        assert_eq!(g.distance(0, 3), Some(3));
        assert_eq!(g.ball([0], 1), BTreeSet::from([0, 1]));
        assert_eq!(g.diameter_of(&BTreeSet::from([0, 1, 2, 3])), Some(3));
        assert_eq!(g.components().len(), 1);
        assert_eq!(g.eccentricity(1), 2);
    }

    #[test]
    fn disconnected() {
        let g = Graph::from_edges(3, &[(0, 1)]);
        assert_eq!(g.distance(0, 2), None);
        assert_eq!(g.components().len(), 2);
        assert_eq!(g.diameter_of(&BTreeSet::from([0, 2])), None);
    }
}
