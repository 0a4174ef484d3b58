//! Lattice sites, norms, angular sectors and the special site sets used by
//! the stabilization and nested-sector experiments.

mod norm;
mod region;
mod stabilization;

pub(crate) use norm::grid_angle;
pub use norm::{Norm, RadialTable};
pub use region::{AngularSector, Annulus, RegionPredicate};
pub use stabilization::{build_stabilization_sets, slice_richardson, StabilizationParams, StabilizationSets};

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use std::fmt;

/// A point of `Z^d`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub SmallVec<[i64; 4]>);

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        Site(SmallVec::from_slice(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Site(SmallVec::from_elem(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn to_real(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }

    /// Unit vector along coordinate `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut s = Site::origin(dim);
        s.0[axis] = 1;
        s
    }

    pub fn l1(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site(SmallVec::from_vec(v))
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(v: [i64; N]) -> Self {
        Site::new(&v)
    }
}

/// The `2d` nearest neighbours of `x`: ascending axis, minus before plus.
pub fn neighbors(x: &Site) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * x.dim());
    for axis in 0..x.dim() {
        for delta in [-1, 1] {
            let mut y = x.clone();
            y.0[axis] += delta;
            out.push(y);
        }
    }
    out
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_d1() {
        assert_eq!(
            neighbors(&Site::from([0])),
            vec![Site::from([-1]), Site::from([1])]
        );
    }

    #[test]
    fn neighbors_d2_order() {
        assert_eq!(
            neighbors(&Site::from([0, 0])),
            vec![
                Site::from([-1, 0]),
                Site::from([1, 0]),
                Site::from([0, -1]),
                Site::from([0, 1])
            ]
        );
    }

    #[test]
    fn neighbors_d3_are_at_l1_distance_one() {
        let x = Site::from([1, 1, 1]);
        let ns = neighbors(&x);
        assert_eq!(ns.len(), 6);
        for y in ns {
            let d: i64 = x.0.iter().zip(y.0.iter()).map(|(a, b)| (a - b).abs()).sum();
            assert_eq!(d, 1);
        }
    }

    #[test]
    fn site_serializes_as_array() {
        let s = Site::from([3, -4]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[3,-4]");
        let back: Site = serde_json::from_str("[3,-4]").unwrap();
        assert_eq!(back, s);
    }
}
