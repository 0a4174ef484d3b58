//! Nested-sector monitor: a sliced Richardson shape run forward, checked
//! at the stage times `tau_n = T0 (1 + delta)^n - T0`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::shape::{sandwich, Occupancy};
use super::stats::Proportion;
use crate::engine::{box_for, drive, CellState, Configuration, ExtinctionTracker, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::lattice::{slice_richardson, AngularSector, Norm, Site};
use crate::media::SeedSpec;
use crate::topology::Topology;

/// Grid used to locate the widest sector point of the halfspace.
const HALFSPACE_SAMPLES: usize = 4096;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedParams {
    pub t0: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub t_max: f64,
    pub reps: u64,
}

impl NestedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= 1.0 && self.t0.is_finite()) {
            return Err(Error::config("t0", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(
                "delta",
                format!("must lie in (0, 1), got {}", self.delta),
            ));
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return Err(Error::config(
                "beta",
                format!("must lie in (1/2, 1), got {}", self.beta),
            ));
        }
        if !(self.alpha > 0.5 && self.alpha < 1.0) || (self.beta + 1.0) / 2.0 >= self.alpha {
            return Err(Error::config("alpha", "need (beta + 1)/2 < alpha < 1"));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::config("t_max", "must be finite and nonnegative"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be positive"));
        }
        Ok(())
    }

    pub fn t_n(&self, n: usize) -> f64 {
        self.t0 * (1.0 + self.delta).powi(n as i32)
    }

    pub fn tau_n(&self, n: usize) -> f64 {
        self.t_n(n) - self.t0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    BoxHit,
    /// The next sector aperture would not be positive.
    SectorExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub n: usize,
    pub t_n: f64,
    pub tau_n: f64,
    /// Aperture of `A^n_2`; `None` for the halfspace at stage zero.
    pub aperture: Option<f64>,
    pub g: bool,
    pub h: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedSectorTrace {
    pub t0: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub replicate: u64,
    pub stages: Vec<Stage>,
    pub nu: Option<usize>,
    pub truncated: Option<Truncation>,
}

impl NestedSectorTrace {
    pub fn all_hold(&self) -> bool {
        self.nu.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedSummary {
    pub reps: u64,
    pub box_hits: u64,
    pub all_hold: Proportion,
    /// Per stage: fraction of valid runs with `G_n` and `H_n`.
    pub stage_hold: Vec<Proportion>,
}

/// Largest norm distance from `pi(e1)` to a unit-sphere point with
/// nonnegative first coordinate: the aperture matching the halfspace.
pub fn halfspace_aperture(norm: &Norm) -> Result<f64> {
    let z = norm.project(&[1.0, 0.0])?;
    let mut r: f64 = 0.0;
    for k in 0..=HALFSPACE_SAMPLES {
        let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * k as f64 / HALFSPACE_SAMPLES as f64;
        let p = norm.project(&[th.cos(), th.sin()])?;
        r = r.max(norm.dist(&p, &z));
    }
    Ok(r)
}

/// Apertures `r2(n)` of `A^n_2` for the stages that fit in `t_max`; the
/// flag reports whether the schedule ran out of positive apertures first.
pub fn aperture_schedule(p: &NestedParams, r2_0: f64) -> (Vec<f64>, bool) {
    let mut out = vec![r2_0];
    let mut n = 0;
    loop {
        if p.tau_n(n + 1) > p.t_max {
            return (out, false);
        }
        let next = out[n] - p.t_n(n).powf(p.alpha - 1.0);
        if next <= 0.0 {
            return (out, true);
        }
        out.push(next);
        n += 1;
    }
}

fn blue_outside(c: &Configuration, norm: &Norm, radius: f64, within: impl Fn(&[f64]) -> bool) -> bool {
    let topo = c.topology();
    c.indices_with(CellState::Blue).any(|i| {
        let x = topo.site(i).to_real();
        norm.eval(&x) > radius && within(&x)
    })
}

fn monitor_one(
    p: &NestedParams,
    norm: &Norm,
    topo: &Arc<Topology>,
    r2: &[f64],
    exhausted: bool,
    seed: &SeedSpec,
) -> Result<NestedSectorTrace> {
    let mut trace = NestedSectorTrace {
        t0: p.t0,
        delta: p.delta,
        beta: p.beta,
        alpha: p.alpha,
        replicate: seed.replicate,
        stages: Vec::new(),
        nu: None,
        truncated: None,
    };
    let start = [Site::from([0, 0]), Site::from([1, 0])];
    let mut c = Configuration::from_sites(topo.clone(), &start, &[])?;
    let mut tracker = ExtinctionTracker::default();
    let mut rng = seed.rng("richardson");
    let (stop, _) = drive(&mut c, &StopRule::time(p.t0), &mut rng, &mut tracker, |_, _| {});
    if stop == StopReason::BoxHit {
        trace.truncated = Some(Truncation::BoxHit);
        return Ok(trace);
    }
    let occupied = c.sites_with(CellState::Red);
    let (_, blue) = slice_richardson(&occupied)?;
    for s in &blue {
        c.set(
            topo.index(s).expect("occupied site inside the box"),
            CellState::Blue,
        );
    }
    c.set_time(0.0);

    let mut tracker = ExtinctionTracker::default();
    let mut rng = seed.rng("competition");
    for (n, &ap) in r2.iter().enumerate() {
        let tau = p.tau_n(n);
        let (stop, _) = drive(&mut c, &StopRule::time(tau), &mut rng, &mut tracker, |_, _| {});
        if stop == StopReason::BoxHit {
            trace.truncated = Some(Truncation::BoxHit);
            return Ok(trace);
        }
        c.set_time(tau);
        let t_n = p.t_n(n);
        let (inner, outer) = sandwich(&Occupancy::of(&c), norm, t_n, t_n.powf(p.beta - 1.0));
        let (h, aperture) = if n == 0 {
            let r = p.t0 / (1.0 + p.delta);
            (!blue_outside(&c, norm, r, |x| x[0] > 0.0), None)
        } else {
            let sector = AngularSector::new(norm, &[1.0, 0.0], ap)?;
            let r = p.t_n(n - 1);
            (
                !blue_outside(&c, norm, r, |x| sector.contains(norm, x).unwrap_or(false)),
                Some(ap),
            )
        };
        let g = inner && outer;
        if !(g && h) && trace.nu.is_none() {
            trace.nu = Some(n);
        }
        trace.stages.push(Stage {
            n,
            t_n,
            tau_n: tau,
            aperture,
            g,
            h,
        });
    }
    if exhausted {
        trace.truncated = Some(Truncation::SectorExhausted);
    }
    Ok(trace)
}

pub fn nested_sector_monitor(
    p: &NestedParams,
    norm: &Norm,
    seed: &SeedSpec,
) -> Result<(NestedSummary, Vec<NestedSectorTrace>)> {
    p.validate()?;
    let (r2, exhausted) = aperture_schedule(p, halfspace_aperture(norm)?);
    let start = [Site::from([0, 0]), Site::from([1, 0])];
    let topo = Arc::new(Topology::Lattice(box_for(2, &start, p.t0 + p.t_max)?));
    let traces: Vec<NestedSectorTrace> = (0..p.reps)
        .into_par_iter()
        .map(|r| monitor_one(p, norm, &topo, &r2, exhausted, &seed.with_replicate(r)))
        .collect::<Result<_>>()?;
    let valid: Vec<&NestedSectorTrace> = traces
        .iter()
        .filter(|t| t.truncated != Some(Truncation::BoxHit))
        .collect();
    let n = valid.len() as u64;
    let summary = NestedSummary {
        reps: p.reps,
        box_hits: p.reps - n,
        all_hold: Proportion::new(valid.iter().filter(|t| t.all_hold()).count() as u64, n),
        stage_hold: (0..r2.len())
            .map(|k| {
                Proportion::new(
                    valid.iter().filter(|t| t.stages[k].g && t.stages[k].h).count() as u64,
                    n,
                )
            })
            .collect(),
    };
    Ok((summary, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::shape::isotropic_norm;

    fn params(reps: u64) -> NestedParams {
        NestedParams {
            t0: 20.0,
            delta: 0.5,
            beta: 0.6,
            alpha: 0.85,
            t_max: 12.0,
            reps,
        }
    }

    #[test]
    fn schedule_matches_closed_form() {
        let p = NestedParams {
            t_max: 1e6,
            ..params(1)
        };
        assert_eq!(p.tau_n(0), 0.0);
        assert!((p.t_n(2) - 45.0).abs() < 1e-12);
        let (r2, exhausted) = aperture_schedule(&p, 1.5);
        assert!(exhausted);
        for w in r2.windows(2) {
            assert!(w[1] < w[0] && w[1] > 0.0);
        }
        assert!((r2[1] - (1.5 - 20f64.powf(-0.15))).abs() < 1e-12);
        let short = NestedParams {
            t_max: 5.0,
            ..params(1)
        };
        assert_eq!(aperture_schedule(&short, 1.5), (vec![1.5], false));
    }

    #[test]
    fn halfspace_aperture_of_disk_is_root_two() {
        assert!((halfspace_aperture(&Norm::L2).unwrap() - 2f64.sqrt()).abs() < 1e-9);
        assert!((halfspace_aperture(&Norm::Linf).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stage_zero_h_holds_by_slicing() {
        let nu = isotropic_norm(2.4, 256).unwrap();
        let (s, traces) = nested_sector_monitor(&params(4), &nu, &SeedSpec::new(3, "n", 0)).unwrap();
        assert_eq!(s.box_hits, 0);
        for t in &traces {
            assert!(t.stages[0].h);
            assert_eq!(t.stages[0].aperture, None);
            assert_eq!(t.stages.len(), 2);
            assert!(t.stages.windows(2).all(|w| w[0].tau_n < w[1].tau_n));
        }
    }

    #[test]
    fn bad_alpha_is_rejected() {
        let p = NestedParams {
            alpha: 0.7,
            ..params(1)
        };
        assert!(nested_sector_monitor(&p, &Norm::L2, &SeedSpec::new(3, "n", 0)).is_err());
    }
}
