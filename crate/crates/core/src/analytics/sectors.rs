//! Angular arcs of the outer occupied layer of a planar configuration.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::engine::{CellState, Configuration};
use crate::error::{Error, Result};
use crate::lattice::Norm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    /// Angles in `[0, 2 pi)`; an arc may wrap past zero, so `end < start`
    /// is allowed. A single full-circle arc has `start == end`.
    pub start: f64,
    pub end: f64,
    pub color: CellState,
    pub sites: usize,
}

impl Arc {
    pub fn width(&self) -> f64 {
        let w = (self.end - self.start).rem_euclid(TAU);
        if w == 0.0 {
            TAU
        } else {
            w
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorDecomposition {
    pub arcs: Vec<Arc>,
    /// Number of red/blue boundaries around the circle.
    pub interfaces: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorParams {
    /// Relative radial band defining the outer layer.
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_band() -> f64 {
    0.1
}

fn default_bins() -> usize {
    256
}

impl Default for SectorParams {
    fn default() -> Self {
        SectorParams {
            band: default_band(),
            bins: default_bins(),
        }
    }
}

/// Bin occupied sites by angle, keep those within `band` of the largest
/// norm in their bin, colour each bin by majority and merge neighbouring
/// bins of equal colour. Empty bins and ties take the previous bin's colour.
pub fn sector_decomposition(c: &Configuration, norm: &Norm, p: &SectorParams) -> Result<SectorDecomposition> {
    let topo = c.topology();
    if topo.dim() != 2 || topo.as_lattice().is_none() {
        return Err(Error::domain(
            "sector decomposition needs a planar lattice configuration",
        ));
    }
    if !(p.band > 0.0 && p.band < 1.0) {
        return Err(Error::config("band", "must lie in (0, 1)"));
    }
    if p.bins < 2 {
        return Err(Error::config("bins", "need at least two bins"));
    }
    let bin_of =
        |x: &[f64]| (((x[1].atan2(x[0])).rem_euclid(TAU) / TAU * p.bins as f64) as usize).min(p.bins - 1);
    let mut max_r = vec![0.0f64; p.bins];
    let occupied: Vec<(usize, f64, CellState)> = (0..topo.n_sites())
        .filter(|&i| c.state(i).is_occupied())
        .filter_map(|i| {
            let x = topo.site(i).to_real();
            let r = norm.eval(&x);
            (r > 0.0).then(|| (bin_of(&x), r, c.state(i)))
        })
        .collect();
    for &(b, r, _) in &occupied {
        max_r[b] = max_r[b].max(r);
    }
    let mut votes = vec![[0usize; 2]; p.bins];
    for &(b, r, s) in &occupied {
        if r >= (1.0 - p.band) * max_r[b] {
            votes[b][(s == CellState::Blue) as usize] += 1;
        }
    }
    let first = votes
        .iter()
        .position(|v| v[0] != v[1])
        .ok_or_else(|| Error::domain("outer layer is empty or evenly split everywhere; widen the band"))?;
    // colour per bin, walking once around from the first decided bin
    let mut colors = vec![CellState::Empty; p.bins];
    let mut prev = if votes[first][0] > votes[first][1] {
        CellState::Red
    } else {
        CellState::Blue
    };
    for k in 0..p.bins {
        let b = (first + k) % p.bins;
        let [r, bl] = votes[b];
        if r > bl {
            prev = CellState::Red;
        } else if bl > r {
            prev = CellState::Blue;
        }
        colors[b] = prev;
    }
    let width = TAU / p.bins as f64;
    if colors.iter().all(|&s| s == colors[0]) {
        return Ok(SectorDecomposition {
            arcs: vec![Arc {
                start: 0.0,
                end: 0.0,
                color: colors[0],
                sites: votes.iter().map(|v| v[0] + v[1]).sum(),
            }],
            interfaces: 0,
        });
    }
    // start at a colour change so no arc wraps around the walk
    let start = (0..p.bins)
        .find(|&b| colors[b] != colors[(b + p.bins - 1) % p.bins])
        .unwrap();
    let mut arcs: Vec<Arc> = Vec::new();
    for k in 0..p.bins {
        let b = (start + k) % p.bins;
        let n = votes[b][0] + votes[b][1];
        match arcs.last_mut() {
            Some(a) if a.color == colors[b] => {
                a.end = ((b + 1) as f64 * width).rem_euclid(TAU);
                a.sites += n;
            }
            _ => arcs.push(Arc {
                start: b as f64 * width,
                end: ((b + 1) as f64 * width).rem_euclid(TAU),
                color: colors[b],
                sites: n,
            }),
        }
    }
    let interfaces = arcs.len();
    Ok(SectorDecomposition { arcs, interfaces })
}

/// Mean angular distance from each arc boundary of `a` to the nearest arc
/// boundary of `b`; `None` unless both have boundaries.
pub fn arc_drift(a: &SectorDecomposition, b: &SectorDecomposition) -> Option<f64> {
    if a.interfaces == 0 || b.interfaces == 0 {
        return None;
    }
    let total: f64 = a
        .arcs
        .iter()
        .map(|x| {
            b.arcs
                .iter()
                .map(|y| {
                    let d = (x.start - y.start).rem_euclid(TAU);
                    d.min(TAU - d)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Some(total / a.arcs.len() as f64)
}
