//! Batches of competition runs and survival statistics.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sectors::{sector_decomposition, SectorParams};
use super::stats::{mean, variance, Proportion};
use crate::engine::{box_for, run_competition, RunRecord, StopReason, StopRule};
use crate::error::{Error, Result};
use crate::lattice::{Norm, Site};
use crate::media::SeedSpec;
use crate::topology::Topology;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoexistParams {
    pub red: Vec<Site>,
    pub blue: Vec<Site>,
    pub t_max: f64,
    pub reps: u64,
    /// Times at which the both-alive frequency is reported.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    /// Decompose the outer layer into arcs for runs with both colours
    /// alive at the end (planar only).
    #[serde(default)]
    pub sectors: bool,
    #[serde(default = "default_hist_bins")]
    pub hist_bins: usize,
}

fn default_hist_bins() -> usize {
    10
}

impl CoexistParams {
    pub fn validate(&self) -> Result<()> {
        if self.red.is_empty() || self.blue.is_empty() {
            return Err(Error::config("red", "both colours need at least one site"));
        }
        let d = self.red[0].dim();
        if self.red.iter().chain(&self.blue).any(|s| s.dim() != d) {
            return Err(Error::config("blue", "all sites must have the same dimension"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config("t_max", "must be positive"));
        }
        if self.reps == 0 {
            return Err(Error::config("reps", "must be positive"));
        }
        if self.t_grid.iter().any(|&t| !(0.0..=self.t_max).contains(&t)) {
            return Err(Error::config("t_grid", "times must lie in [0, t_max]"));
        }
        if self.hist_bins == 0 {
            return Err(Error::config("hist_bins", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistRecord {
    pub replicate: u64,
    pub run: RunRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arcs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoexistSummary {
    pub reps: u64,
    pub valid: u64,
    pub box_hits: u64,
    pub both_alive: Proportion,
    pub red_survives: Proportion,
    pub blue_survives: Proportion,
    /// Paired z-score of red minus blue survival.
    pub survival_diff_z: f64,
    /// Valid runs stopped at `t_max` with both colours alive.
    pub censored: u64,
    pub both_alive_by_t: Vec<(f64, Proportion)>,
    /// Counts of extinction times in equal bins over `[0, t_max]`.
    pub red_extinction_hist: Vec<u64>,
    pub blue_extinction_hist: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_arcs: Option<f64>,
}

pub fn coexistence_batch(p: &CoexistParams, seed: &SeedSpec) -> Result<(CoexistSummary, Vec<CoexistRecord>)> {
    p.validate()?;
    let dim = p.red[0].dim();
    let all: Vec<Site> = p.red.iter().chain(&p.blue).cloned().collect();
    let topo = Arc::new(Topology::Lattice(box_for(dim, &all, p.t_max)?));
    let rule = StopRule {
        t_max: p.t_max,
        stop_on_extinction: true,
        region_hit: None,
    };
    let records: Vec<CoexistRecord> = (0..p.reps)
        .into_par_iter()
        .map(|r| {
            let (run, c) = run_competition(
                topo.clone(),
                &p.red,
                &p.blue,
                &rule,
                &seed.with_replicate(r),
                false,
                |_, _| {},
            )?;
            let arcs = if p.sectors && dim == 2 && run.censored {
                Some(
                    sector_decomposition(&c, &Norm::L2, &SectorParams::default())?
                        .arcs
                        .len(),
                )
            } else {
                None
            };
            Ok(CoexistRecord {
                replicate: r,
                run,
                arcs,
            })
        })
        .collect::<Result<_>>()?;
    Ok((summarize(p, &records), records))
}

fn summarize(p: &CoexistParams, records: &[CoexistRecord]) -> CoexistSummary {
    let valid: Vec<&RunRecord> = records.iter().map(|r| &r.run).filter(|r| r.valid()).collect();
    let n = valid.len() as u64;
    let count = |f: &dyn Fn(&RunRecord) -> bool| valid.iter().filter(|r| f(r)).count() as u64;
    let red_alive = |r: &RunRecord| r.extinction.red.is_none();
    let blue_alive = |r: &RunRecord| r.extinction.blue.is_none();
    let diffs: Vec<f64> = valid
        .iter()
        .map(|r| red_alive(r) as i32 as f64 - blue_alive(r) as i32 as f64)
        .collect();
    let survival_diff_z = if diffs.is_empty() {
        0.0
    } else {
        let se = (variance(&diffs) / diffs.len() as f64).sqrt();
        let m = mean(&diffs);
        if se == 0.0 {
            if m == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            m / se
        }
    };
    let hist = |pick: &dyn Fn(&RunRecord) -> Option<f64>| {
        let mut h = vec![0u64; p.hist_bins];
        for r in &valid {
            if let Some(t) = pick(r) {
                let b = ((t / p.t_max) * p.hist_bins as f64) as usize;
                h[b.min(p.hist_bins - 1)] += 1;
            }
        }
        h
    };
    let mut grid = p.t_grid.clone();
    grid.sort_by(f64::total_cmp);
    let arcs: Vec<f64> = records.iter().filter_map(|r| r.arcs.map(|a| a as f64)).collect();
    CoexistSummary {
        reps: records.len() as u64,
        valid: n,
        box_hits: records
            .iter()
            .filter(|r| r.run.stop == StopReason::BoxHit)
            .count() as u64,
        both_alive: Proportion::new(count(&|r| r.extinction.both_alive()), n),
        red_survives: Proportion::new(count(&red_alive), n),
        blue_survives: Proportion::new(count(&blue_alive), n),
        survival_diff_z,
        censored: count(&|r| r.censored),
        both_alive_by_t: grid
            .iter()
            .map(|&t| (t, Proportion::new(count(&|r| r.extinction.both_alive_at(t)), n)))
            .collect(),
        red_extinction_hist: hist(&|r| r.extinction.red),
        blue_extinction_hist: hist(&|r| r.extinction.blue),
        mean_arcs: (!arcs.is_empty()).then(|| mean(&arcs)),
    }
}
