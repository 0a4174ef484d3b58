use std::sync::Arc;

use super::{combine, counter_exp1, SeedSpec};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::topology::Topology;

/// I.i.d. mean-one exponential passage times on the undirected edges of a
/// finite graph, generated on demand.
///
/// Weights are rounded to multiples of `2^-32`, so every path sum below
/// `2^21` is exact in `f64` and does not depend on summation order.
const TICKS: f64 = 4294967296.0;

#[derive(Clone, Debug)]
pub struct EdgeWeightField {
    topology: Arc<Topology>,
    key: u64,
}

impl EdgeWeightField {
    pub fn new(topology: Arc<Topology>, seed: &SeedSpec) -> Self {
        EdgeWeightField {
            topology,
            key: seed.key("weights"),
        }
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    /// Weight of the edge `{x, y}` for adjacent indices; symmetric.
    #[inline]
    pub fn weight(&self, x: usize, y: usize) -> f64 {
        let (a, b) = (self.topology.site_key(x), self.topology.site_key(y));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let w = counter_exp1(combine(self.key, lo), hi);
        (w * TICKS).round().max(1.0) / TICKS
    }

    pub fn weight_for_edge(&self, x: &Site, y: &Site) -> Result<f64> {
        let i = self
            .topology
            .index(x)
            .ok_or_else(|| Error::domain(format!("{x:?} is outside the field")))?;
        let j = self
            .topology
            .index(y)
            .ok_or_else(|| Error::domain(format!("{y:?} is outside the field")))?;
        if self.topology.slot_of(i, j).is_none() {
            return Err(Error::domain(format!("{x:?} and {y:?} are not adjacent")));
        }
        Ok(self.weight(i, j))
    }
}
