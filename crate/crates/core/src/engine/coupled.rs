use super::run::{ConfigSummary, ExtinctionTracker, RunRecord, StopReason};
use super::{CellState, Configuration};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::media::{PercolationStructure, ScanEvent, SeedSpec};

/// What to do when a growth process occupies a site on the box face.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryPolicy {
    /// Stop and mark the records invalid.
    Abort,
    /// Treat the box as the whole world.
    Closed,
}

/// Initial states for the processes to build; any may be omitted.
#[derive(Clone, Debug, Default)]
pub struct CoupledInit {
    pub competition: Option<(Vec<Site>, Vec<Site>)>,
    /// Red sites of the voter model; every other site is blue.
    pub voter_red: Option<Vec<Site>>,
    pub richardson: Option<Vec<Site>>,
}

/// The three states at the current point of the scan.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub competition: Option<Configuration>,
    pub voter: Option<Configuration>,
    pub richardson: Option<Configuration>,
}

#[derive(Clone, Debug)]
pub struct CoupledOutcome {
    pub competition: Option<RunRecord>,
    pub voter: Option<RunRecord>,
    pub richardson: Option<RunRecord>,
    pub state: CoupledState,
    /// Arrows processed, no-ops included.
    pub arrows: u64,
}

/// Replay every arrow of `structure` in time order through all requested
/// processes. At an arrow `x -> y`: Richardson occupies `y` if `x` is
/// occupied; competition copies the colour of `x` if `x` is occupied and
/// `y` differs; the voter copies the colour of `x`. `observe` is called
/// after each arrow that changed at least one process.
pub fn run_coupled(
    structure: &PercolationStructure,
    init: &CoupledInit,
    policy: BoundaryPolicy,
    seed: &SeedSpec,
    mut observe: impl FnMut(&CoupledState, &ScanEvent),
) -> Result<CoupledOutcome> {
    let topo = structure.topology().clone();
    let build = |red: &[Site], blue: &[Site]| -> Result<Configuration> {
        let c = Configuration::from_sites(topo.clone(), red, blue)?;
        if policy == BoundaryPolicy::Abort
            && (0..topo.n_sites()).any(|i| topo.is_boundary(i) && c.state(i).is_occupied())
        {
            return Err(Error::config("init", "initial site on the box boundary"));
        }
        Ok(c)
    };
    let competition = match &init.competition {
        Some((r, b)) => Some(build(r, b)?),
        None => None,
    };
    let richardson = match &init.richardson {
        Some(z) => Some(build(z, &[])?),
        None => None,
    };
    let voter = match &init.voter_red {
        Some(red) => {
            let mut cells = vec![CellState::Blue; topo.n_sites()];
            for s in red {
                let i = topo
                    .index(s)
                    .ok_or_else(|| Error::config("voter_red", format!("site {s:?} is outside the box")))?;
                cells[i] = CellState::Red;
            }
            Some(Configuration::from_cells(topo.clone(), &cells)?)
        }
        None => None,
    };
    let summaries = (
        competition.as_ref().map(|c| ConfigSummary::of(c, false)),
        voter.as_ref().map(|c| ConfigSummary::of(c, false)),
        richardson.as_ref().map(|c| ConfigSummary::of(c, false)),
    );
    let mut state = CoupledState {
        competition,
        voter,
        richardson,
    };
    let mut trackers = [ExtinctionTracker::default(); 3];
    let mut events = [0u64; 3];
    let mut arrows = 0u64;
    let mut stop = StopReason::TimeReached;
    if let Some(c) = &state.competition {
        trackers[0].observe(c);
    }
    if let Some(c) = &state.voter {
        trackers[1].observe(c);
    }

    for ev in structure.scan() {
        arrows += 1;
        let mut changed = false;
        let mut hit = false;
        let mut apply = |c: &mut Configuration, k: usize, rule: fn(CellState, CellState) -> bool| {
            let (sx, sy) = (c.state(ev.from), c.state(ev.to));
            if rule(sx, sy) {
                c.set_time(ev.time);
                c.set(ev.to, sx);
                events[k] += 1;
                changed = true;
                if sy == CellState::Empty && topo.is_boundary(ev.to) {
                    hit = true;
                }
                if sy != CellState::Empty {
                    trackers[k].observe(c);
                }
            }
        };
        if let Some(c) = state.competition.as_mut() {
            apply(c, 0, |x, y| x.is_occupied() && y != x);
        }
        if let Some(c) = state.voter.as_mut() {
            apply(c, 1, |x, y| x != y);
        }
        if let Some(c) = state.richardson.as_mut() {
            apply(c, 2, |x, y| x.is_occupied() && y == CellState::Empty);
        }
        if changed {
            observe(&state, &ev);
        }
        if hit && policy == BoundaryPolicy::Abort {
            stop = StopReason::BoxHit;
            break;
        }
    }

    let t_end = if stop == StopReason::TimeReached {
        structure.horizon()
    } else {
        [&state.competition, &state.voter, &state.richardson]
            .iter()
            .filter_map(|c| c.as_ref().map(|c| c.time()))
            .fold(0.0, f64::max)
    };
    let record = |c: &Option<Configuration>, initial: Option<ConfigSummary>, k: usize| {
        c.as_ref().map(|c| RunRecord {
            seed: seed.clone(),
            initial: initial.unwrap_or_default(),
            stop,
            t_end,
            events: events[k],
            final_state: ConfigSummary::of(c, false),
            extinction: trackers[k],
            censored: stop == StopReason::TimeReached && trackers[k].both_alive(),
        })
    };
    for c in [&mut state.competition, &mut state.voter, &mut state.richardson]
        .into_iter()
        .flatten()
    {
        c.set_time(t_end);
    }
    Ok(CoupledOutcome {
        competition: record(&state.competition, summaries.0, 0),
        voter: record(&state.voter, summaries.1, 1),
        richardson: record(&state.richardson, summaries.2, 2),
        state,
        arrows,
    })
}
