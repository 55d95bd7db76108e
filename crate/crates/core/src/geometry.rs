//! Balls, rings and event rings around a region of the dependency graph.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::instance::{EventId, LLLInstance, Region, VarId};

/// Distances of every event and ring index of every variable, relative to one region.
///
/// The ring index of a variable is the smallest distance of an event containing it;
/// variables in no reachable event have no ring index (they sit at infinity).
#[derive(Clone, Debug)]
pub struct Geometry {
    dist: Vec<Option<u64>>,
    layer: Vec<Option<u64>>,
    vars: BTreeSet<VarId>,
    max_layer: u64,
}

impl Geometry {
    pub fn new(inst: &LLLInstance, region: &Region) -> Result<Self> {
        if region.is_empty() {
            return Err(Error::Argument("empty region".into()));
        }
        inst.check_region(region)?;
        let dist = inst.graph().distances_from(region.iter().copied(), None);
        let mut layer = vec![None; inst.var_capacity()];
        let mut max_layer = 0;
        for x in inst.var_ids() {
            let l = inst.events_of(x).iter().filter_map(|e| dist[*e as usize]).min();
            if let Some(l) = l {
                max_layer = max_layer.max(l);
            }
            layer[x as usize] = l;
        }
        Ok(Geometry { dist, layer, vars: inst.all_vars(), max_layer })
    }

    pub fn dist(&self, e: EventId) -> Option<u64> {
        self.dist.get(e as usize).copied().flatten()
    }

    pub fn layer(&self, x: VarId) -> Option<u64> {
        self.layer.get(x as usize).copied().flatten()
    }

    /// Index of the last nonempty ring. Rings past it are all empty.
    pub fn max_layer(&self) -> u64 {
        self.max_layer
    }

    pub fn ball(&self, r: u64) -> Region {
        (0..self.dist.len() as EventId).filter(|e| self.dist(*e).is_some_and(|d| d <= r)).collect()
    }

    fn in_range(&self, x: VarId, i: u64, j: Option<u64>) -> bool {
        match (self.layer(x), j) {
            (Some(l), Some(j)) => i <= l && l <= j,
            (Some(l), None) => i <= l,
            (None, None) => true,
            (None, Some(_)) => false,
        }
    }

    /// R_[i,j]; `j = None` stands for infinity.
    pub fn ring(&self, i: u64, j: Option<u64>) -> BTreeSet<VarId> {
        self.vars.iter().copied().filter(|x| self.in_range(*x, i, j)).collect()
    }

    /// Ring R_r as a sorted vector.
    pub fn ring_at(&self, r: u64) -> Vec<VarId> {
        self.ring(r, Some(r)).into_iter().collect()
    }

    /// Events meeting R_[i,j] and events contained in R_[i,j].
    pub fn event_rings(&self, inst: &LLLInstance, i: u64, j: Option<u64>) -> (Region, Region) {
        let mut meet = Region::new();
        let mut inside = Region::new();
        for (id, e) in inst.events() {
            let hits = e.vbl().iter().filter(|x| self.in_range(**x, i, j)).count();
            if hits > 0 {
                meet.insert(id);
                if hits == e.vbl().len() {
                    inside.insert(id);
                }
            }
        }
        (meet, inside)
    }
}

fn check_range(i: u64, j: Option<u64>) -> Result<()> {
    match j {
        Some(j) if i > j => Err(Error::Argument(format!("ring range [{i},{j}] is empty"))),
        _ => Ok(()),
    }
}

pub fn ball(inst: &LLLInstance, region: &Region, r: u64) -> Result<Region> {
    if region.is_empty() {
        return Err(Error::Argument("empty region".into()));
    }
    inst.check_region(region)?;
    Ok(inst.graph().ball(region.iter().copied(), r))
}

pub fn ring(inst: &LLLInstance, region: &Region, i: u64, j: Option<u64>) -> Result<BTreeSet<VarId>> {
    check_range(i, j)?;
    Ok(Geometry::new(inst, region)?.ring(i, j))
}

pub fn event_rings(inst: &LLLInstance, region: &Region, i: u64, j: Option<u64>) -> Result<(Region, Region)> {
    check_range(i, j)?;
    Ok(Geometry::new(inst, region)?.event_rings(inst, i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::*;

    #[test]
    fn path3_geometry() {
        let i = path3();
        let a = Region::from([0]);
        assert_eq!(ball(&i, &a, 0).unwrap(), a);
        assert_eq!(ball(&i, &a, 1).unwrap(), Region::from([0, 1]));
        assert_eq!(ball(&i, &a, 5).unwrap(), Region::from([0, 1]));
        assert_eq!(ring(&i, &a, 0, Some(0)).unwrap(), BTreeSet::from([0, 1]));
        assert_eq!(ring(&i, &a, 1, Some(1)).unwrap(), BTreeSet::from([2]));
        assert!(ring(&i, &a, 2, Some(2)).unwrap().is_empty());
        assert_eq!(event_rings(&i, &a, 1, Some(1)).unwrap(), (Region::from([1]), Region::new()));
        assert_eq!(event_rings(&i, &a, 0, Some(1)).unwrap(), (Region::from([0, 1]), Region::from([0, 1])));
        assert!(ring(&i, &a, 2, Some(1)).is_err());
        assert!(ball(&i, &Region::new(), 1).is_err());
    }

    #[test]
    fn infinite_ring_includes_unreachable_variables() {
        let i = two_pairs();
        let g = Geometry::new(&i, &Region::from([0])).unwrap();
        assert_eq!(g.ring(1, None), BTreeSet::from([2, 3]));
        assert_eq!(g.ring(0, None), i.all_vars());
        assert_eq!(g.max_layer(), 0);
    }
}
