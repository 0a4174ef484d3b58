use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use super::{Norm, Site};
use crate::error::{Error, Result};

/// Cone of points whose radial projection lies within norm distance
/// `aperture` (strictly) of `center`, a point of the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularSector {
    pub center: Vec<f64>,
    pub aperture: f64,
}

impl AngularSector {
    /// Sector around the direction of `toward`, which is projected onto the
    /// unit sphere of `nu`.
    pub fn new(nu: &Norm, toward: &[f64], aperture: f64) -> Result<Self> {
        if !(aperture > 0.0) {
            return Err(Error::config(
                "aperture",
                format!("must be positive, got {aperture}"),
            ));
        }
        Ok(AngularSector {
            center: nu.project(toward)?,
            aperture,
        })
    }

    pub fn contains(&self, nu: &Norm, y: &[f64]) -> Result<bool> {
        let p = nu.project(y)?;
        Ok(nu.dist(&p, &self.center) < self.aperture)
    }

    /// Same center, narrower by `by`.
    pub fn shrink(&self, by: f64) -> Result<Self> {
        let aperture = self.aperture - by;
        if !(aperture > 0.0) {
            return Err(Error::config(
                "aperture",
                format!("inner sector aperture {} - {by} is not positive", self.aperture),
            ));
        }
        Ok(AngularSector {
            center: self.center.clone(),
            aperture,
        })
    }
}

/// `D(c; inner, outer) = D(c; outer) \ D(c; inner)` with closed disks;
/// `inner == 0` gives the full closed disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Annulus {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner) {
            return Err(Error::config(
                "annulus",
                format!("need 0 <= inner < outer, got {inner}, {outer}"),
            ));
        }
        Ok(Annulus { center, inner, outer })
    }

    pub fn disk(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(center, 0.0, radius)
    }

    pub fn contains(&self, nu: &Norm, x: &[f64]) -> bool {
        let r = nu.dist(x, &self.center);
        r <= self.outer && (self.inner == 0.0 || r > self.inner)
    }
}

type Membership = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A subset of `R^d` given by a membership test, plus a bounding box that
/// limits enumeration of its lattice points.
#[derive(Clone)]
pub struct RegionPredicate {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    test: Arc<Membership>,
}

impl fmt::Debug for RegionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegionPredicate")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish_non_exhaustive()
    }
}

impl RegionPredicate {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, test: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        RegionPredicate {
            lo,
            hi,
            test: Arc::new(test),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (self.test)(x)
    }

    pub fn contains_site(&self, x: &Site) -> bool {
        self.contains(&x.to_real())
    }

    /// `{x : dist_inf(x, Z) <= 1/2}`, the union of closed unit cubes centred
    /// on the sites of `Z`.
    pub fn fatten(sites: &[Site]) -> Self {
        let dim = sites.first().map_or(0, Site::dim);
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for s in sites {
            for (i, &c) in s.coords().iter().enumerate() {
                lo[i] = lo[i].min(c as f64 - 0.5);
                hi[i] = hi[i].max(c as f64 + 0.5);
            }
        }
        let set: HashSet<Site> = sites.iter().cloned().collect();
        RegionPredicate::new(lo, hi, move |x| {
            // candidate integers k with |x_i - k| <= 1/2 in every coordinate
            let ranges: Vec<(i64, i64)> = x
                .iter()
                .map(|&v| ((v - 0.5).ceil() as i64, (v + 0.5).floor() as i64))
                .collect();
            let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                if ranges.iter().all(|r| r.0 <= r.1) && set.contains(&Site::new(&cur)) {
                    return true;
                }
                let mut i = 0;
                loop {
                    if i == cur.len() {
                        return false;
                    }
                    if cur[i] < ranges[i].1 {
                        cur[i] += 1;
                        break;
                    }
                    cur[i] = ranges[i].0;
                    i += 1;
                }
            }
        })
    }

    /// `Z / s = {y / s : y in Z}`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::domain(format!("scale factor must be positive, got {s}")));
        }
        let inner = self.test.clone();
        Ok(RegionPredicate {
            lo: self.lo.iter().map(|v| v / s).collect(),
            hi: self.hi.iter().map(|v| v / s).collect(),
            test: Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().map(|v| v * s).collect();
                inner(&y)
            }),
        })
    }

    pub fn union(&self, other: &Self) -> Self {
        let (a, b) = (self.test.clone(), other.test.clone());
        RegionPredicate {
            lo: self.lo.iter().zip(&other.lo).map(|(p, q)| p.min(*q)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(p, q)| p.max(*q)).collect(),
            test: Arc::new(move |x: &[f64]| a(x) || b(x)),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (a, b) = (self.test.clone(), other.test.clone());
        RegionPredicate {
            lo: self.lo.iter().zip(&other.lo).map(|(p, q)| p.max(*q)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(p, q)| p.min(*q)).collect(),
            test: Arc::new(move |x: &[f64]| a(x) && b(x)),
        }
    }

    /// Complement within the given bounding box.
    pub fn complement_within(&self, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let a = self.test.clone();
        RegionPredicate {
            lo,
            hi,
            test: Arc::new(move |x: &[f64]| !a(x)),
        }
    }

    /// Lattice points inside the bounding box that satisfy the predicate.
    pub fn lattice_sites(&self) -> Vec<Site> {
        let lo: Vec<i64> = self.lo.iter().map(|v| v.ceil() as i64).collect();
        let hi: Vec<i64> = self.hi.iter().map(|v| v.floor() as i64).collect();
        let mut out = Vec::new();
        if lo.is_empty() || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return out;
        }
        let mut cur = lo.clone();
        loop {
            let x: Vec<f64> = cur.iter().map(|&c| c as f64).collect();
            if self.contains(&x) {
                out.push(Site::new(&cur));
            }
            let mut i = 0;
            loop {
                if i == cur.len() {
                    return out;
                }
                if cur[i] < hi[i] {
                    cur[i] += 1;
                    break;
                }
                cur[i] = lo[i];
                i += 1;
            }
        }
    }
}
