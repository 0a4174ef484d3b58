//! Random-walk dual of the voter model on a torus.
//!
//! Run backwards in time, the ancestry of a site is a continuous-time simple
//! random walk jumping at rate `2d`, so `P{x blue at t}` is the chance that
//! the walk from `x` sits in the initially blue set at time `t`.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::stats::slope;
use crate::error::{Error, Result};
use crate::lattice::{Norm, Site};
use crate::media::SeedSpec;
use crate::topology::Torus;

/// Position of a walk from torus index `x` after time `t`, and the number
/// of jumps made.
pub fn dual_walk<R: Rng + ?Sized>(torus: &Torus, x: usize, t: f64, rng: &mut R) -> (usize, u64) {
    let mut pos = torus_coords(torus, x);
    let jumps = walk_on(torus.side(), &mut pos, t, rng);
    (torus.index(&Site::new(&pos)).expect("wrapped"), jumps)
}

fn torus_coords(torus: &Torus, x: usize) -> Vec<i64> {
    (0..torus.dim()).map(|a| torus.coord(x, a)).collect()
}

/// Move `pos` for time `t` at rate `2d`, wrapping on `side`.
fn walk_on<R: Rng + ?Sized>(side: &[usize], pos: &mut [i64], t: f64, rng: &mut R) -> u64 {
    let d = side.len();
    let clock = Exp::new(2.0 * d as f64).expect("positive rate");
    let mut s = clock.sample(rng);
    let mut jumps = 0;
    while s <= t {
        let k = rng.random_range(0..2 * d);
        let (a, step) = (k / 2, if k % 2 == 0 { -1 } else { 1 });
        pos[a] = (pos[a] + step).rem_euclid(side[a] as i64);
        jumps += 1;
        s += clock.sample(rng);
    }
    jumps
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub p: f64,
    pub se: f64,
    pub reps: u64,
}

impl HitEstimate {
    fn from_hits(hits: u64, reps: u64) -> Self {
        let p = hits as f64 / reps as f64;
        HitEstimate {
            p,
            se: (p * (1.0 - p) / reps as f64).sqrt(),
            reps,
        }
    }
}

/// Monte Carlo estimate of `P{W_x(t) in blue0}`.
pub fn dual_hit_prob(
    torus: &Torus,
    x: &Site,
    t: f64,
    blue0: &[Site],
    reps: u64,
    seed: &SeedSpec,
) -> Result<HitEstimate> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be finite and nonnegative"));
    }
    if reps == 0 {
        return Err(Error::domain("reps must be positive"));
    }
    let xi = torus
        .index(x)
        .ok_or_else(|| Error::domain(format!("{x:?} has the wrong dimension")))?;
    let mut blue = vec![false; torus.n_sites()];
    for s in blue0 {
        let i = torus
            .index(s)
            .ok_or_else(|| Error::domain(format!("{s:?} has the wrong dimension")))?;
        blue[i] = true;
    }
    let mut rng = seed.rng(&format!(
        "dual/{}",
        torus_coords(torus, xi)
            .iter()
            .map(i64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    ));
    let mut hits = 0;
    for _ in 0..reps {
        let (end, _) = dual_walk(torus, xi, t, &mut rng);
        hits += blue[end] as u64;
    }
    Ok(HitEstimate::from_hits(hits, reps))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvasionParams {
    pub dimension: usize,
    pub rhos: Vec<f64>,
    pub beta: f64,
    /// Times as fractions of `rho`, each in `[0, 1]`.
    pub t_fracs: Vec<f64>,
    pub reps: u64,
    #[serde(default = "default_norm")]
    pub norm: String,
    /// Torus side; defaults to `2 ceil(rho^beta + rho) + 1` per `rho`.
    #[serde(default)]
    pub side: Option<usize>,
}

fn default_norm() -> String {
    "linf".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvasionRow {
    pub rho: f64,
    pub beta: f64,
    pub t: f64,
    pub prob: f64,
    pub stderr: f64,
    pub reps: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvasionReport {
    pub rows: Vec<InvasionRow>,
    /// Minus the slope of `ln max_t prob` against `rho^(beta - 1/2)`.
    pub fitted_c2: Option<f64>,
}

impl InvasionReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn parse_norm(name: &str) -> Result<Norm> {
    match name {
        "l1" => Ok(Norm::L1),
        "l2" => Ok(Norm::L2),
        "linf" => Ok(Norm::Linf),
        other => Err(Error::config(
            "norm",
            format!("unknown norm {other:?}; use l1, l2 or linf"),
        )),
    }
}

/// `P{x not in R(t)}` when a closed disk of radius `rho^beta` around `x`
/// starts red and everything else blue, via the dual walk.
pub fn invasion_experiment(p: &InvasionParams, seed: &SeedSpec) -> Result<InvasionReport> {
    if !(p.beta > 0.5 && p.beta < 1.0) {
        return Err(Error::config("beta", "must lie in (1/2, 1)"));
    }
    if p.dimension == 0 {
        return Err(Error::config("dimension", "must be positive"));
    }
    if p.rhos.is_empty() || p.rhos.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::config("rhos", "need positive finite radii"));
    }
    if p.t_fracs.is_empty() || p.t_fracs.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::config("t_fracs", "fractions must lie in [0, 1]"));
    }
    if p.reps == 0 {
        return Err(Error::config("reps", "must be positive"));
    }
    let norm = parse_norm(&p.norm)?;
    let mut fracs = p.t_fracs.clone();
    fracs.sort_by(f64::total_cmp);

    let mut rows = Vec::new();
    let mut fit = Vec::new();
    for &rho in &p.rhos {
        let r = rho.powf(p.beta);
        let need = 2 * (r + rho).ceil() as usize + 1;
        let side = match p.side {
            Some(s) if s < need => {
                return Err(Error::config(
                    "side",
                    format!("torus side {s} too small for rho {rho}: need at least {need}"),
                ))
            }
            Some(s) => s,
            None => need,
        };
        let sides = vec![side; p.dimension];
        let centre = vec![(side / 2) as i64; p.dimension];
        let ts: Vec<f64> = fracs.iter().map(|f| f * rho).collect();
        let label = format!("{}/invasion/{rho}", seed.experiment);
        // escape[k] = 1 if the walk is outside the disk at ts[k]
        let outside: Vec<Vec<bool>> = (0..p.reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = SeedSpec::new(seed.master_seed, label.clone(), rep).rng("walk");
                let mut pos = centre.clone();
                let mut now = 0.0;
                ts.iter()
                    .map(|&t| {
                        walk_on(&sides, &mut pos, t - now, &mut rng);
                        now = t;
                        let disp: Vec<f64> = pos
                            .iter()
                            .zip(&centre)
                            .map(|(&a, &c)| {
                                // shortest wrapped displacement
                                let d = (a - c).rem_euclid(side as i64);
                                d.min(side as i64 - d) as f64
                            })
                            .collect();
                        norm.eval(&disp) > r
                    })
                    .collect()
            })
            .collect();
        let mut best: f64 = 0.0;
        for (k, &t) in ts.iter().enumerate() {
            let hits = outside.iter().filter(|o| o[k]).count() as u64;
            let e = HitEstimate::from_hits(hits, p.reps);
            best = best.max(e.p);
            rows.push(InvasionRow {
                rho,
                beta: p.beta,
                t,
                prob: e.p,
                stderr: e.se,
                reps: p.reps,
            });
        }
        if best > 0.0 {
            fit.push((rho.powf(p.beta - 0.5), best.ln()));
        }
    }
    Ok(InvasionReport {
        rows,
        fitted_c2: slope(&fit).map(|s| -s),
    })
}
