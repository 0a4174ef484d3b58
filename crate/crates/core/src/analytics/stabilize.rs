//! Annular-sector stabilization: red on `R0`, blue on `B0`, run for `delta n`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{slope, Proportion};
use crate::engine::{run_configuration, CellState, Configuration, StopReason, StopRule, BOX_MARGIN};
use crate::error::{Error, Result};
use crate::lattice::{build_stabilization_sets, AngularSector, Norm, StabilizationParams, StabilizationSets};
use crate::media::SeedSpec;
use crate::topology::{LatticeBox, Topology};

/// Extra radius allowed for blue growth, as a multiple of `delta n`.
const GROWTH_SLACK: f64 = 1.3;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizeParams {
    pub ns: Vec<f64>,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    /// Direction of the sector center; projected onto the unit sphere.
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    /// Aperture of the outer sector `A2`, in norm units.
    #[serde(default = "default_aperture")]
    pub aperture: f64,
    pub reps: u64,
}

fn default_center() -> Vec<f64> {
    vec![1.0, 0.0]
}

fn default_aperture() -> f64 {
    1.0
}

/// Pure set geometry at time zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationGeometry {
    pub r0: usize,
    pub b0: usize,
    pub r1: usize,
    pub r0_b0_disjoint: bool,
    pub r1_b1_disjoint: bool,
    pub b0_in_b1: bool,
    pub box_half_width: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilizationOutcome {
    pub n: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub outer_aperture: f64,
    pub inner_aperture: f64,
    pub reps: u64,
    pub box_hits: u64,
    pub geometry: StabilizationGeometry,
    /// `B(delta n)` not contained in `B1`.
    pub fail: Proportion,
    /// Some site of `R1` not red at the end.
    pub red_incomplete: Proportion,
    /// Blue reached `R1`.
    pub blue_in_r1: Proportion,
    /// Blue outside `R1 ∪ B1`.
    pub blue_escaped: Proportion,
}

/// Check the time-zero inclusions by enumeration.
pub fn check_geometry(sets: &StabilizationSets, half: i64) -> StabilizationGeometry {
    let in_b1 = |x: &[f64]| sets.in_b1(x);
    StabilizationGeometry {
        r0: sets.r0.len(),
        b0: sets.b0.len(),
        r1: sets.r1.len(),
        r0_b0_disjoint: sets.r0.iter().all(|s| !sets.in_b0(&s.to_real())),
        r1_b1_disjoint: sets.r1.iter().all(|s| !in_b1(&s.to_real())),
        b0_in_b1: sets.b0.iter().all(|s| in_b1(&s.to_real())),
        box_half_width: half,
    }
}

pub fn stabilization_experiment(
    p: &StabilizeParams,
    norm: &Norm,
    seed: &SeedSpec,
) -> Result<Vec<StabilizationOutcome>> {
    if p.reps == 0 {
        return Err(Error::config("reps", "must be positive"));
    }
    if p.ns.is_empty() {
        return Err(Error::config("ns", "need at least one n"));
    }
    let dim = p.center.len();
    p.ns.iter()
        .map(|&n| {
            let params = StabilizationParams {
                n,
                delta: p.delta,
                beta: p.beta,
                alpha: p.alpha,
                outer_sector: AngularSector::new(norm, &p.center, p.aperture)?,
            };
            params.validate()?;
            let t = p.delta * n;
            let reach = params.b0_outer().max(params.r1_outer()) + GROWTH_SLACK * t;
            let half = (reach * norm.max_euclidean_radius(dim)).ceil() as i64 + BOX_MARGIN;
            let sets = build_stabilization_sets(&params, norm, half)?;
            if sets.r0.is_empty() {
                return Err(Error::config("n", format!("R0 is empty at n = {n}")));
            }
            let geometry = check_geometry(&sets, half);
            let topo = Arc::new(Topology::Lattice(LatticeBox::centered(dim, half)?));
            let init = Configuration::from_sites(topo.clone(), &sets.r0, &sets.b0)?;
            let r1_idx: Vec<usize> = sets.r1.iter().filter_map(|s| topo.index(s)).collect();
            let exp = format!("{}/stabilize/{n}", seed.experiment);
            let flags: Vec<Option<[bool; 4]>> = (0..p.reps)
                .into_par_iter()
                .map(|r| {
                    let mut c = init.clone();
                    let s = SeedSpec::new(seed.master_seed, exp.clone(), r);
                    let (rec, _) = run_configuration(&mut c, &StopRule::time(t), &s, false, |_, _| {});
                    if rec.stop == StopReason::BoxHit {
                        return None;
                    }
                    let (mut in_r1, mut escaped) = (false, false);
                    for i in c.indices_with(CellState::Blue) {
                        let x = topo.site(i).to_real();
                        if sets.in_r1(&x) {
                            in_r1 = true;
                        } else if !sets.in_b1(&x) {
                            escaped = true;
                        }
                    }
                    let red_incomplete = r1_idx.iter().any(|&i| c.state(i) != CellState::Red);
                    Some([in_r1 || escaped, red_incomplete, in_r1, escaped])
                })
                .collect();
            let valid: Vec<[bool; 4]> = flags.iter().flatten().copied().collect();
            let prop =
                |k: usize| Proportion::new(valid.iter().filter(|f| f[k]).count() as u64, valid.len() as u64);
            Ok(StabilizationOutcome {
                n,
                delta: p.delta,
                beta: p.beta,
                alpha: p.alpha,
                outer_aperture: p.aperture,
                inner_aperture: sets.inner_sector.aperture,
                reps: p.reps,
                box_hits: (flags.len() - valid.len()) as u64,
                geometry,
                fail: prop(0),
                red_incomplete: prop(1),
                blue_in_r1: prop(2),
                blue_escaped: prop(3),
            })
        })
        .collect()
}

/// Whether the failure frequencies do not increase along the n grid by
/// more than `k` combined standard errors between consecutive points.
pub fn non_increasing(outcomes: &[StabilizationOutcome], k: f64) -> bool {
    outcomes.windows(2).all(|w| {
        let (a, b) = (&w[0].fail, &w[1].fail);
        let se = (a.se * a.se + b.se * b.se).sqrt();
        b.p - a.p <= k * se
    })
}

/// Fit `p(n) = c1 n^(3d) exp(-c2 (delta n)^(beta - 1/2))` through the
/// points with positive failure frequency; `(c1, c2)` needs two such points.
pub fn fit_bound(outcomes: &[StabilizationOutcome], dim: usize) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = outcomes
        .iter()
        .filter(|o| o.fail.p > 0.0)
        .map(|o| {
            let x = (o.delta * o.n).powf(o.beta - 0.5);
            (x, o.fail.p.ln() - 3.0 * dim as f64 * o.n.ln())
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let s = slope(&pts)?;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64,
        pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64,
    );
    Some(((my - s * mx).exp(), -s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(ns: Vec<f64>, reps: u64) -> StabilizeParams {
        StabilizeParams {
            ns,
            delta: 0.5,
            beta: 0.6,
            alpha: 0.85,
            center: vec![1.0, 0.0],
            aperture: 1.0,
            reps,
        }
    }

    #[test]
    fn time_zero_inclusions_hold() {
        let nu = Norm::L2;
        let p = params(vec![40.0], 1);
        let sp = StabilizationParams {
            n: 40.0,
            delta: p.delta,
            beta: p.beta,
            alpha: p.alpha,
            outer_sector: AngularSector::new(&nu, &p.center, p.aperture).unwrap(),
        };
        let sets = build_stabilization_sets(&sp, &nu, 120).unwrap();
        let g = check_geometry(&sets, 120);
        assert!(g.r0 > 0 && g.b0 > 0 && g.r1 > 0);
        assert!(g.r0_b0_disjoint && g.r1_b1_disjoint && g.b0_in_b1);
    }

    #[test]
    fn bad_beta_names_the_field() {
        let mut p = params(vec![40.0], 1);
        p.beta = 0.4;
        let e = stabilization_experiment(&p, &Norm::L2, &SeedSpec::new(1, "s", 0)).unwrap_err();
        assert!(e.to_string().contains("beta"), "{e}");
    }

    #[test]
    fn small_run_is_deterministic_and_sane() {
        let nu = crate::analytics::shape::isotropic_norm(2.4, 256).unwrap();
        let p = params(vec![40.0], 3);
        let seed = SeedSpec::new(2, "s", 0);
        let a = stabilization_experiment(&p, &nu, &seed).unwrap();
        let b = stabilization_experiment(&p, &nu, &seed).unwrap();
        assert_eq!(a, b);
        let o = &a[0];
        assert_eq!(o.box_hits, 0);
        assert_eq!(o.fail.n, 3);
        assert!(o.blue_in_r1.hits <= o.fail.hits && o.blue_escaped.hits <= o.fail.hits);
        assert!(o.inner_aperture < o.outer_aperture);
    }

    #[test]
    fn trend_gate_and_fit() {
        let mk = |n: f64, hits: u64| StabilizationOutcome {
            n,
            delta: 0.5,
            beta: 0.6,
            alpha: 0.85,
            outer_aperture: 1.0,
            inner_aperture: 0.5,
            reps: 100,
            box_hits: 0,
            geometry: StabilizationGeometry {
                r0: 1,
                b0: 1,
                r1: 1,
                r0_b0_disjoint: true,
                r1_b1_disjoint: true,
                b0_in_b1: true,
                box_half_width: 1,
            },
            fail: Proportion::new(hits, 100),
            red_incomplete: Proportion::new(0, 100),
            blue_in_r1: Proportion::new(0, 100),
            blue_escaped: Proportion::new(0, 100),
        };
        assert!(non_increasing(&[mk(40.0, 30), mk(80.0, 20), mk(160.0, 0)], 3.0));
        assert!(!non_increasing(&[mk(40.0, 0), mk(80.0, 40)], 3.0));
        let (c1, c2) = fit_bound(&[mk(40.0, 30), mk(80.0, 10)], 2).unwrap();
        assert!(c1 > 0.0 && c2 > 0.0);
        assert_eq!(fit_bound(&[mk(40.0, 30), mk(80.0, 0)], 2), None);
    }
}
