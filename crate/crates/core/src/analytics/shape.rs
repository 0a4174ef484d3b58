//! Estimating the asymptotic Richardson shape from simulated growth.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{box_for, run_richardson, CellState, Configuration, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::fpp::set_passage_time;
use crate::lattice::{Norm, RadialTable, Site};
use crate::media::{EdgeWeightField, SeedSpec};
use crate::topology::{LatticeBox, Topology};

/// Largest `r` with `r u` in the fattened occupied set (union of the unit
/// cubes around occupied sites), scanning cells along the ray up to `r_max`.
pub fn ray_extent(c: &Configuration, u: [f64; 2], r_max: f64) -> f64 {
    let mut cell = [0i64, 0i64];
    let mut t_next = [f64::INFINITY; 2];
    let mut t_step = [f64::INFINITY; 2];
    let mut step = [0i64; 2];
    for a in 0..2 {
        if u[a] != 0.0 {
            step[a] = if u[a] > 0.0 { 1 } else { -1 };
            t_step[a] = 1.0 / u[a].abs();
            t_next[a] = 0.5 / u[a].abs();
        }
    }
    let mut last = 0.0;
    loop {
        let exit = t_next[0].min(t_next[1]);
        match c.state_at(&Site::from(cell)) {
            Some(s) if s.is_occupied() => last = exit,
            None => break,
            _ => {}
        }
        if exit > r_max {
            break;
        }
        for a in 0..2 {
            if t_next[a] == exit {
                cell[a] += step[a];
                t_next[a] += t_step[a];
            }
        }
    }
    last
}

/// Occupied sites of a configuration as a bitset over its graph.
#[derive(Clone, Debug)]
pub struct Occupancy {
    topology: Arc<Topology>,
    bits: Vec<u64>,
}

impl Occupancy {
    pub fn of(c: &Configuration) -> Self {
        let n = c.topology().n_sites();
        let mut bits = vec![0u64; n.div_ceil(64)];
        for (i, s) in c.cells().enumerate() {
            if s.is_occupied() {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        Occupancy {
            topology: c.topology().clone(),
            bits,
        }
    }

    #[inline]
    pub fn contains_index(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.topology.index(s).is_some_and(|i| self.contains_index(i))
    }
}

/// Whether `(1 - eps) T S` is covered by the fattened occupied set and the
/// fattened set lies inside `(1 + eps) T S`, where `S` is the unit ball of
/// `norm`. Inner coverage is tested on lattice sites: every site with
/// `|y| <= (1 - eps) T` must be occupied.
pub fn sandwich(occ: &Occupancy, norm: &Norm, scale: f64, eps: f64) -> (bool, bool) {
    let topo = &occ.topology;
    let dim = topo.dim();
    let outer = (1.0 + eps) * scale;
    let mut outer_ok = true;
    let mut corner = vec![0.0; dim];
    'sites: for i in (0..topo.n_sites()).filter(|&i| occ.contains_index(i)) {
        let s = topo.site(i);
        for mask in 0..(1u32 << dim) {
            for (a, (c, &x)) in corner.iter_mut().zip(s.coords()).enumerate() {
                *c = x as f64 + if mask >> a & 1 == 1 { 0.5 } else { -0.5 };
            }
            if norm.eval(&corner) > outer {
                outer_ok = false;
                break 'sites;
            }
        }
    }
    let inner = (1.0 - eps) * scale;
    let reach = (inner * norm.max_euclidean_radius(dim)).floor() as i64;
    let mut inner_ok = true;
    let mut coords = vec![-reach; dim];
    'grid: loop {
        let s = Site::new(&coords);
        if norm.eval_site(s.coords()) <= inner && !occ.contains(&s) {
            inner_ok = false;
            break 'grid;
        }
        let mut a = 0;
        loop {
            if a == dim {
                break 'grid;
            }
            coords[a] += 1;
            if coords[a] <= reach {
                break;
            }
            coords[a] = -reach;
            a += 1;
        }
    }
    (inner_ok, outer_ok)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeParams {
    pub dimension: usize,
    pub t: f64,
    pub reps: u64,
    /// Number of planar directions, a multiple of 8.
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_eps")]
    pub sandwich_eps: f64,
    /// Distance `n` for the passage-time cross-check; skipped when absent.
    #[serde(default)]
    pub fpp_n: Option<i64>,
    #[serde(default = "default_fpp_reps")]
    pub fpp_reps: u64,
}

fn default_directions() -> usize {
    256
}

fn default_eps() -> f64 {
    0.1
}

fn default_fpp_reps() -> u64 {
    20
}

impl ShapeParams {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.dimension, 1 | 2) {
            return Err(Error::config("dimension", "shape estimation supports d = 1 or 2"));
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::config("t", "must be positive"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be positive"));
        }
        if self.dimension == 2 && (self.directions == 0 || !self.directions.is_multiple_of(8)) {
            return Err(Error::config("directions", "must be a positive multiple of 8"));
        }
        if !(self.sandwich_eps > 0.0 && self.sandwich_eps < 1.0) {
            return Err(Error::config("sandwich_eps", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Passage-time speed `n |u| / mean T(0, n u)` along one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FppSpeed {
    pub direction: String,
    pub n: i64,
    pub speed: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShapeEstimate {
    pub dimension: usize,
    pub t: f64,
    pub reps_used: u64,
    pub box_hits: u64,
    /// Direction angles (planar) or `[0, pi]` for d = 1.
    pub angles: Vec<f64>,
    /// Mean extent per unit time along each direction, before any
    /// post-processing, with its standard error.
    pub speed: Vec<f64>,
    pub speed_se: Vec<f64>,
    pub raw_asymmetry: Option<f64>,
    /// Largest relative radius increase made by convexification.
    pub convex_gap: Option<f64>,
    /// Radii of the final (symmetrized, convexified) unit ball.
    pub radii: Vec<f64>,
    /// Fraction of replicates passing the shape sandwich at `sandwich_eps`.
    pub sandwich_fraction: f64,
    pub fpp: Vec<FppSpeed>,
}

impl ShapeEstimate {
    /// The estimated shape as a norm whose unit ball is `S`; time units.
    pub fn norm(&self) -> Result<Norm> {
        if self.dimension != 2 {
            return Err(Error::domain("only planar estimates define a radial norm"));
        }
        Ok(Norm::Radial(RadialTable::planar(
            self.angles.clone(),
            self.radii.clone(),
        )?))
    }

    pub fn raw_table(&self) -> Result<RadialTable> {
        RadialTable::planar(self.angles.clone(), self.speed.clone())
    }

    /// Final radius along the first axis.
    pub fn axis_speed(&self) -> f64 {
        self.radii[0]
    }
}

/// Isotropic stand-in for the shape: a disk of radius `speed`.
pub fn isotropic_norm(speed: f64, directions: usize) -> Result<Norm> {
    Ok(Norm::Radial(RadialTable::constant(directions, speed)?))
}

fn extents(c: &Configuration, angles: &[f64], dim: usize, r_max: f64) -> Vec<f64> {
    if dim == 1 {
        let reds: Vec<i64> = c
            .indices_with(CellState::Red)
            .map(|i| c.topology().site(i).coords()[0])
            .collect();
        let hi = reds.iter().max().copied().unwrap_or(0) as f64 + 0.5;
        let lo = reds.iter().min().copied().unwrap_or(0) as f64 - 0.5;
        return vec![hi, -lo];
    }
    angles
        .iter()
        .map(|a| ray_extent(c, [a.cos(), a.sin()], r_max))
        .collect()
}

/// Run Richardson growth from the origin `reps` times to time `t` and
/// average the extents per unit time along each direction.
pub fn estimate_shape(p: &ShapeParams, seed: &SeedSpec) -> Result<ShapeEstimate> {
    p.validate()?;
    let dim = p.dimension;
    let origin = [Site::origin(dim)];
    let topo = Arc::new(Topology::Lattice(box_for(dim, &origin, p.t)?));
    let r_max = topo.as_lattice().unwrap().extent()[0] as f64;
    let angles: Vec<f64> = if dim == 1 {
        vec![0.0, std::f64::consts::PI]
    } else {
        (0..p.directions)
            .map(|k| crate::lattice::grid_angle(k, p.directions))
            .collect()
    };
    // per replicate: extents / t, or None on a box hit, plus the final
    // occupancy for the sandwich test
    let runs: Vec<Option<(Vec<f64>, Occupancy)>> = (0..p.reps)
        .into_par_iter()
        .map(|r| {
            let (rec, c) = run_richardson(
                topo.clone(),
                &origin,
                &StopRule::time(p.t),
                &seed.with_replicate(r),
                false,
                |_, _| {},
            )?;
            if rec.stop == StopReason::BoxHit {
                return Ok(None);
            }
            let e = extents(&c, &angles, dim, r_max)
                .into_iter()
                .map(|x| x / p.t)
                .collect();
            Ok(Some((e, Occupancy::of(&c))))
        })
        .collect::<Result<_>>()?;
    let box_hits = runs.iter().filter(|r| r.is_none()).count() as u64;
    let good: Vec<&(Vec<f64>, Occupancy)> = runs.iter().flatten().collect();
    if good.is_empty() {
        return Err(Error::domain("every replicate hit the box boundary"));
    }
    let m = good.len() as f64;
    let k = angles.len();
    let speed: Vec<f64> = (0..k)
        .map(|j| good.iter().map(|g| g.0[j]).sum::<f64>() / m)
        .collect();
    let speed_se: Vec<f64> = (0..k)
        .map(|j| {
            let xs: Vec<f64> = good.iter().map(|g| g.0[j]).collect();
            (super::stats::variance(&xs) / m).sqrt()
        })
        .collect();

    let (radii, raw_asymmetry, convex_gap, norm) = if dim == 2 {
        let raw = RadialTable::planar(angles.clone(), speed.clone())?;
        let asym = raw.dihedral_asymmetry()?;
        let (conv, gap) = raw.symmetrized()?.convexified()?;
        let fin = conv.symmetrized()?;
        (fin.radii().to_vec(), Some(asym), Some(gap), Norm::Radial(fin))
    } else {
        let s = (speed[0] + speed[1]) / 2.0;
        (vec![s, s], None, None, Norm::Linf)
    };
    let pass = good
        .iter()
        .filter(|g| {
            let (inner, outer) = if dim == 2 {
                sandwich(&g.1, &norm, p.t, p.sandwich_eps)
            } else {
                let s = radii[0] * p.t;
                sandwich(&g.1, &Norm::Linf, s, p.sandwich_eps)
            };
            inner && outer
        })
        .count();

    let mut fpp = Vec::new();
    if let Some(n) = p.fpp_n {
        if n <= 0 {
            return Err(Error::config("fpp_n", "must be positive"));
        }
        let dirs: Vec<Vec<i64>> = if dim == 1 {
            vec![vec![1]]
        } else {
            vec![vec![1, 0], vec![1, 1]]
        };
        for u in dirs {
            let label = u.iter().map(i64::to_string).collect::<Vec<_>>().join(":");
            let half =
                n * u.iter().map(|c| c.abs()).max().unwrap() + (n as f64).powf(0.75).ceil() as i64 + 10;
            let t = Arc::new(Topology::Lattice(LatticeBox::centered(dim, half)?));
            let target = Site::new(&u.iter().map(|c| c * n).collect::<Vec<_>>());
            let times: Vec<f64> = (0..p.fpp_reps)
                .into_par_iter()
                .map(|r| {
                    let s = SeedSpec::new(
                        seed.master_seed,
                        format!("{}/shape-fpp/{label}", seed.experiment),
                        r,
                    );
                    let f = EdgeWeightField::new(t.clone(), &s);
                    set_passage_time(&f, &[Site::origin(dim)], std::slice::from_ref(&target))
                })
                .collect::<Result<_>>()?;
            let len = (u.iter().map(|c| (c * c) as f64).sum::<f64>()).sqrt() * n as f64;
            fpp.push(FppSpeed {
                direction: label,
                n,
                speed: len / super::stats::mean(&times),
            });
        }
    }

    Ok(ShapeEstimate {
        dimension: dim,
        t: p.t,
        reps_used: good.len() as u64,
        box_hits,
        angles,
        speed,
        speed_se,
        raw_asymmetry,
        convex_gap,
        radii,
        sandwich_fraction: pass as f64 / m,
        fpp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filled(half: i64, pred: impl Fn(i64, i64) -> bool) -> Configuration {
        let t = Arc::new(Topology::Lattice(LatticeBox::centered(2, half + 3).unwrap()));
        let mut red = Vec::new();
        for x in -half..=half {
            for y in -half..=half {
                if pred(x, y) {
                    red.push(Site::from([x, y]));
                }
            }
        }
        Configuration::from_sites(t, &red, &[]).unwrap()
    }

    #[test]
    fn ray_extent_on_a_square() {
        let c = filled(5, |_, _| true);
        assert!((ray_extent(&c, [1.0, 0.0], 100.0) - 5.5).abs() < 1e-12);
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ray_extent(&c, [d, d], 100.0) - 5.5 * 2f64.sqrt()).abs() < 1e-9);
        assert!((ray_extent(&c, [-1.0, 0.0], 100.0) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn ray_extent_sees_detached_sites() {
        let c = filled(8, |x, y| (x.abs() <= 2 && y.abs() <= 2) || (x == 7 && y == 0));
        assert!((ray_extent(&c, [1.0, 0.0], 100.0) - 7.5).abs() < 1e-12);
    }

    #[test]
    fn sandwich_of_an_l1_ball() {
        let c = filled(10, |x, y| x.abs() + y.abs() <= 10);
        let o = Occupancy::of(&c);
        assert_eq!(sandwich(&o, &Norm::L1, 10.0, 0.15), (true, true));
        assert_eq!(sandwich(&o, &Norm::L1, 10.0, 0.05), (true, false));
        assert_eq!(sandwich(&o, &Norm::L1, 13.0, 0.15), (false, true));
    }

    #[test]
    fn one_d_speed_is_one() {
        let p = ShapeParams {
            dimension: 1,
            t: 200.0,
            reps: 100,
            directions: 8,
            sandwich_eps: 0.1,
            fpp_n: Some(50),
            fpp_reps: 200,
        };
        let s = estimate_shape(&p, &SeedSpec::new(1, "shape1", 0)).unwrap();
        for v in &s.speed {
            assert!((v - 1.0).abs() < 0.03, "speed {v}");
        }
        assert!((s.fpp[0].speed - 1.0).abs() < 0.05);
        // Poisson fronts: each end is within 10% with probability ~0.84
        assert!(s.sandwich_fraction > 0.5);
    }

    #[test]
    fn small_planar_estimate_is_symmetric() {
        let p = ShapeParams {
            dimension: 2,
            t: 20.0,
            reps: 8,
            directions: 64,
            sandwich_eps: 0.3,
            fpp_n: None,
            fpp_reps: 1,
        };
        let s = estimate_shape(&p, &SeedSpec::new(2, "shape2", 0)).unwrap();
        let t = s.norm().unwrap();
        let Norm::Radial(tab) = &t else { unreachable!() };
        assert!(tab.dihedral_asymmetry().unwrap() < 1e-12);
        // theta and pi - theta carry the same radius
        assert_eq!(s.radii[5], s.radii[32 - 5]);
        assert!(s.speed.iter().all(|&v| v > 0.0));
        let gap = s.convex_gap.unwrap();
        let raw_sym = s.raw_table().unwrap().symmetrized().unwrap();
        for (a, b) in s.radii.iter().zip(raw_sym.radii()) {
            assert!(a + 1e-12 >= *b && (a - b) / b <= gap + 1e-12);
        }
    }

    #[test]
    fn validation() {
        let mut p = ShapeParams {
            dimension: 3,
            t: 1.0,
            reps: 1,
            directions: 8,
            sandwich_eps: 0.1,
            fpp_n: None,
            fpp_reps: 1,
        };
        assert!(estimate_shape(&p, &SeedSpec::new(1, "v", 0)).is_err());
        p.dimension = 2;
        p.directions = 12;
        let e = estimate_shape(&p, &SeedSpec::new(1, "v", 0)).unwrap_err();
        assert!(e.to_string().contains("directions"));
    }
}
