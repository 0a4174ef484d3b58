//! The one-dimensional competition model: edges and the interface.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, variance};
use crate::engine::{drive, CellState, Configuration, ExtinctionTracker, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::media::SeedSpec;
use crate::topology::{LatticeBox, Topology};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDParams {
    pub t_grid: Vec<f64>,
    pub reps: u64,
    /// Red occupies `[-red_len, -1]`, blue `[0, blue_len - 1]`.
    #[serde(default = "one")]
    pub red_len: i64,
    #[serde(default = "one")]
    pub blue_len: i64,
}

fn one() -> i64 {
    1
}

/// Leftmost occupied `X`, rightmost occupied `Y` and leftmost blue `Z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interface {
    pub t: f64,
    pub x: i64,
    pub y: i64,
    pub z: Option<i64>,
    pub both_alive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneDRow {
    pub t: f64,
    pub mean_x_over_t: f64,
    pub mean_y_over_t: f64,
    /// Runs with both colours alive at `t`; extinction is absorbing, so
    /// these are the runs whose interface never left `(X, Y)`.
    pub inside: u64,
    pub var_z: f64,
    pub var_z_over_2t: f64,
    pub both_alive_frac: f64,
}

fn measure(c: &Configuration, tracker: &ExtinctionTracker) -> Interface {
    let topo = c.topology();
    let coord = |i: usize| topo.site(i).coords()[0];
    let occ: Vec<usize> = (0..topo.n_sites())
        .filter(|&i| c.state(i).is_occupied())
        .collect();
    Interface {
        t: c.time(),
        x: coord(occ[0]),
        y: coord(*occ.last().unwrap()),
        z: c.indices_with(CellState::Blue).next().map(coord),
        both_alive: tracker.both_alive(),
    }
}

/// Track `X_t, Y_t, Z_t` at the grid times for every replicate.
pub fn oned_paths(p: &OneDParams, seed: &SeedSpec) -> Result<Vec<Vec<Interface>>> {
    if p.red_len < 1 || p.blue_len < 1 {
        return Err(Error::config("red_len", "both intervals need at least one site"));
    }
    if p.reps == 0 {
        return Err(Error::config("reps", "must be positive"));
    }
    let mut grid = p.t_grid.clone();
    if grid.is_empty() || grid.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(Error::config("t_grid", "need finite nonnegative times"));
    }
    grid.sort_by(f64::total_cmp);
    let t_max = *grid.last().unwrap();
    let half = p.red_len.max(p.blue_len)
        + (crate::engine::BOX_SPEED * t_max).ceil() as i64
        + crate::engine::BOX_MARGIN;
    let topo = Arc::new(Topology::Lattice(LatticeBox::centered(1, half)?));
    let red: Vec<Site> = (-p.red_len..0).map(|x| Site::from([x])).collect();
    let blue: Vec<Site> = (0..p.blue_len).map(|x| Site::from([x])).collect();
    (0..p.reps)
        .into_par_iter()
        .map(|r| {
            let mut c = Configuration::from_sites(topo.clone(), &red, &blue)?;
            let mut rng = seed.with_replicate(r).rng("gillespie");
            let mut tracker = ExtinctionTracker::default();
            let mut out = Vec::with_capacity(grid.len());
            for &t in &grid {
                let (stop, _) = drive(&mut c, &StopRule::time(t), &mut rng, &mut tracker, |_, _| {});
                if stop == StopReason::BoxHit {
                    return Err(Error::domain(format!("replicate {r} hit the box boundary")));
                }
                c.set_time(t);
                out.push(measure(&c, &tracker));
            }
            Ok(out)
        })
        .collect()
}

pub fn oned_interface_stats(p: &OneDParams, seed: &SeedSpec) -> Result<Vec<OneDRow>> {
    let paths = oned_paths(p, seed)?;
    let k = paths[0].len();
    Ok((0..k)
        .map(|j| {
            let at: Vec<&Interface> = paths.iter().map(|p| &p[j]).collect();
            let t = at[0].t;
            let inside: Vec<f64> = at
                .iter()
                .filter(|i| i.both_alive)
                .map(|i| i.z.unwrap() as f64)
                .collect();
            let var_z = variance(&inside);
            let tt = if t > 0.0 { t } else { f64::NAN };
            OneDRow {
                t,
                mean_x_over_t: mean(&at.iter().map(|i| i.x as f64 / tt).collect::<Vec<_>>()),
                mean_y_over_t: mean(&at.iter().map(|i| i.y as f64 / tt).collect::<Vec<_>>()),
                inside: inside.len() as u64,
                var_z,
                var_z_over_2t: var_z / (2.0 * tt),
                both_alive_frac: inside.len() as f64 / at.len() as f64,
            }
        })
        .collect())
}
