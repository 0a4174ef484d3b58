use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CellState, Configuration, StepOutcome, TrajectoryEvent};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::media::SeedSpec;
use crate::topology::{LatticeBox, Topology};

/// Per-axis speed bound (lattice units per unit time) used to size boxes.
pub const BOX_SPEED: f64 = 3.0;
/// Extra layers added around every box.
pub const BOX_MARGIN: i64 = 11;

/// Centered box large enough for growth from `sites` up to time `t_max`:
/// half-width `max |x|_inf + ceil(BOX_SPEED * t_max) + BOX_MARGIN`.
pub fn box_for(dim: usize, sites: &[Site], t_max: f64) -> Result<LatticeBox> {
    let reach = sites.iter().map(Site::linf).max().unwrap_or(0);
    LatticeBox::centered(dim, reach + (BOX_SPEED * t_max).ceil() as i64 + BOX_MARGIN)
}

#[derive(Clone, Debug)]
pub struct StopRule {
    pub t_max: f64,
    /// Stop as soon as one colour has no sites.
    pub stop_on_extinction: bool,
    /// Stop when a site with `|x|_inf >= h` becomes occupied.
    pub region_hit: Option<i64>,
}

impl StopRule {
    pub fn time(t_max: f64) -> Self {
        StopRule {
            t_max,
            stop_on_extinction: false,
            region_hit: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeReached,
    Extinction,
    RegionHit,
    Absorbed,
    /// The process touched the outer face of the box; the run is invalid
    /// for growth statistics.
    BoxHit,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigSummary {
    pub red: usize,
    pub blue: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub red_sites: Option<Vec<Site>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blue_sites: Option<Vec<Site>>,
}

impl ConfigSummary {
    pub fn of(c: &Configuration, with_sites: bool) -> Self {
        ConfigSummary {
            red: c.count(CellState::Red),
            blue: c.count(CellState::Blue),
            red_sites: with_sites.then(|| c.sites_with(CellState::Red)),
            blue_sites: with_sites.then(|| c.sites_with(CellState::Blue)),
        }
    }
}

/// First time each colour's count reached zero. Extinction is absorbing in
/// the competition model, which is asserted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtinctionTracker {
    pub red: Option<f64>,
    pub blue: Option<f64>,
}

impl ExtinctionTracker {
    pub fn observe(&mut self, c: &Configuration) -> Option<(CellState, f64)> {
        let mut newly = None;
        for (color, slot) in [(CellState::Red, &mut self.red), (CellState::Blue, &mut self.blue)] {
            let alive = c.count(color) > 0;
            match *slot {
                Some(_) => assert!(!alive, "{color:?} reappeared after extinction"),
                None if !alive => {
                    *slot = Some(c.time());
                    newly = Some((color, c.time()));
                }
                None => {}
            }
        }
        newly
    }

    pub fn both_alive(&self) -> bool {
        self.red.is_none() && self.blue.is_none()
    }

    /// Whether both colours were alive at time `t`.
    pub fn both_alive_at(&self, t: f64) -> bool {
        self.red.is_none_or(|e| e > t) && self.blue.is_none_or(|e| e > t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: SeedSpec,
    pub initial: ConfigSummary,
    pub stop: StopReason,
    pub t_end: f64,
    pub events: u64,
    #[serde(rename = "final")]
    pub final_state: ConfigSummary,
    pub extinction: ExtinctionTracker,
    /// Both colours alive when the run stopped on its time limit.
    pub censored: bool,
}

impl RunRecord {
    pub fn valid(&self) -> bool {
        self.stop != StopReason::BoxHit
    }
}

/// Drive a configuration with the Gillespie engine until the stop rule
/// fires. `observe` sees every event after it has been applied.
pub fn drive(
    c: &mut Configuration,
    rule: &StopRule,
    rng: &mut impl rand::Rng,
    tracker: &mut ExtinctionTracker,
    mut observe: impl FnMut(&Configuration, &TrajectoryEvent),
) -> (StopReason, u64) {
    let mut events = 0u64;
    tracker.observe(c);
    if rule.stop_on_extinction && !tracker.both_alive() {
        return (StopReason::Extinction, 0);
    }
    let topo = c.topology().clone();
    let lattice = topo.as_lattice();
    loop {
        match c.step(rng, rule.t_max) {
            StepOutcome::TimeReached => return (StopReason::TimeReached, events),
            StepOutcome::Absorbed => return (StopReason::Absorbed, events),
            StepOutcome::Event(ev) => {
                events += 1;
                observe(c, &ev);
                if ev.old != CellState::Empty {
                    // only flips can extinguish a colour
                    tracker.observe(c);
                    if rule.stop_on_extinction && !tracker.both_alive() {
                        return (StopReason::Extinction, events);
                    }
                }
                if ev.old == CellState::Empty {
                    if topo.is_boundary(ev.to) {
                        return (StopReason::BoxHit, events);
                    }
                    if let (Some(h), Some(b)) = (rule.region_hit, lattice) {
                        if (0..b.dim()).any(|a| b.coord(ev.to, a).abs() >= h) {
                            return (StopReason::RegionHit, events);
                        }
                    }
                }
            }
        }
    }
}

fn check_initial_inside(c: &Configuration) -> Result<()> {
    let t = c.topology();
    if let Some(i) = (0..t.n_sites()).find(|&i| t.is_boundary(i) && c.state(i).is_occupied()) {
        return Err(Error::config(
            "box",
            format!("initial site {:?} lies on the box boundary", t.site(i)),
        ));
    }
    Ok(())
}

/// Run the competition model from `(red, blue)` with the Gillespie engine.
pub fn run_competition(
    topology: Arc<Topology>,
    red: &[Site],
    blue: &[Site],
    rule: &StopRule,
    seed: &SeedSpec,
    keep_sites: bool,
    observe: impl FnMut(&Configuration, &TrajectoryEvent),
) -> Result<(RunRecord, Configuration)> {
    let mut c = Configuration::from_sites(topology, red, blue)?;
    check_initial_inside(&c)?;
    Ok(run_configuration(&mut c, rule, seed, keep_sites, observe))
}

/// Run an already-built configuration; it is advanced in place.
pub fn run_configuration(
    c: &mut Configuration,
    rule: &StopRule,
    seed: &SeedSpec,
    keep_sites: bool,
    observe: impl FnMut(&Configuration, &TrajectoryEvent),
) -> (RunRecord, Configuration) {
    let initial = ConfigSummary::of(c, keep_sites);
    let mut rng = seed.rng("gillespie");
    let mut tracker = ExtinctionTracker::default();
    let (stop, events) = drive(c, rule, &mut rng, &mut tracker, observe);
    let censored = stop == StopReason::TimeReached && tracker.both_alive();
    let record = RunRecord {
        seed: seed.clone(),
        initial,
        stop,
        t_end: c.time(),
        events,
        final_state: ConfigSummary::of(c, keep_sites),
        extinction: tracker,
        censored,
    };
    (record, c.clone())
}

/// Richardson growth: the competition engine with a single colour.
pub fn run_richardson(
    topology: Arc<Topology>,
    init: &[Site],
    rule: &StopRule,
    seed: &SeedSpec,
    keep_sites: bool,
    observe: impl FnMut(&Configuration, &TrajectoryEvent),
) -> Result<(RunRecord, Configuration)> {
    run_competition(topology, init, &[], rule, seed, keep_sites, observe)
}

/// Voter model on a torus; every site must be coloured.
pub fn run_voter(
    topology: Arc<Topology>,
    coloring: &[CellState],
    rule: &StopRule,
    seed: &SeedSpec,
    observe: impl FnMut(&Configuration, &TrajectoryEvent),
) -> Result<(RunRecord, Configuration)> {
    if !matches!(topology.as_ref(), Topology::Torus(_) | Topology::Graph(_)) {
        return Err(Error::config("topology", "the voter model runs on a torus"));
    }
    if coloring.contains(&CellState::Empty) {
        return Err(Error::config(
            "coloring",
            "voter initial state must colour every site",
        ));
    }
    let mut c = Configuration::from_cells(topology, coloring)?;
    Ok(run_configuration(&mut c, rule, seed, false, observe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Torus;

    fn plane(half: i64) -> Arc<Topology> {
        Arc::new(Topology::Lattice(LatticeBox::centered(2, half).unwrap()))
    }

    #[test]
    fn richardson_equals_competition_without_blue() {
        let t = plane(40);
        let seed = SeedSpec::new(17, "eq", 0);
        let init = [Site::from([0, 0]), Site::from([1, 0])];
        let rule = StopRule::time(6.0);
        let (r1, c1) = run_richardson(t.clone(), &init, &rule, &seed, false, |_, _| {}).unwrap();
        let (r2, c2) = run_competition(t, &init, &[], &rule, &seed, false, |_, _| {}).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(c1.sites_with(CellState::Red), c2.sites_with(CellState::Red));
        assert_eq!(r1.extinction.blue, Some(0.0));
    }

    #[test]
    fn richardson_1d_is_interval_and_grows() {
        let t = Arc::new(Topology::Lattice(LatticeBox::centered(1, 200).unwrap()));
        let seed = SeedSpec::new(2, "1d", 0);
        let mut last = 1;
        run_richardson(
            t,
            &[Site::from([0])],
            &StopRule::time(50.0),
            &seed,
            false,
            |c, ev| {
                assert_eq!(ev.old, CellState::Empty);
                let n = c.occupied();
                assert!(n >= last);
                last = n;
                let reds: Vec<i64> = c.indices_with(CellState::Red).map(|i| i as i64).collect();
                assert_eq!(reds.last().unwrap() - reds[0] + 1, reds.len() as i64);
            },
        )
        .unwrap();
    }

    #[test]
    fn no_resurrection_and_flip_legality() {
        let t = plane(40);
        let seed = SeedSpec::new(5, "legal", 0);
        let red = [Site::from([0, 0])];
        let blue = [Site::from([1, 0])];
        let c0 = Configuration::from_sites(t.clone(), &red, &blue).unwrap();
        let mut prev = c0.clone();
        run_competition(t, &red, &blue, &StopRule::time(5.0), &seed, false, |c, ev| {
            assert_ne!(ev.new, CellState::Empty);
            // the fired edge was active just before the event
            assert_eq!(prev.state(ev.from), ev.new);
            assert_eq!(prev.state(ev.to), ev.old);
            assert_ne!(ev.old, ev.new);
            prev = c.clone();
        })
        .unwrap();
    }

    #[test]
    fn box_hit_is_reported() {
        let t = plane(3);
        let (rec, _) = run_richardson(
            t,
            &[Site::from([0, 0])],
            &StopRule::time(100.0),
            &SeedSpec::new(1, "box", 0),
            false,
            |_, _| {},
        )
        .unwrap();
        assert_eq!(rec.stop, StopReason::BoxHit);
        assert!(!rec.valid());
    }

    #[test]
    fn blue_empty_is_extinct_at_zero() {
        let mut tr = ExtinctionTracker::default();
        let c = Configuration::from_sites(plane(3), &[Site::from([0, 0])], &[]).unwrap();
        assert_eq!(tr.observe(&c), Some((CellState::Blue, 0.0)));
        assert!(!tr.both_alive());
    }

    #[test]
    fn one_d_never_both_extinct() {
        let t = Arc::new(Topology::Lattice(LatticeBox::centered(1, 400).unwrap()));
        for rep in 0..50 {
            let (rec, _) = run_competition(
                t.clone(),
                &[Site::from([-1])],
                &[Site::from([0])],
                &StopRule::time(100.0),
                &SeedSpec::new(9, "1d-ext", rep),
                false,
                |_, _| {},
            )
            .unwrap();
            assert!(rec.extinction.red.is_none() || rec.extinction.blue.is_none());
            assert!(rec.valid());
        }
    }

    #[test]
    fn voter_requires_full_coloring_and_absorbs() {
        let t = Arc::new(Topology::Torus(Torus::new(vec![3, 3]).unwrap()));
        let mut cells = vec![CellState::Red; 9];
        let (rec, _) = run_voter(
            t.clone(),
            &cells,
            &StopRule::time(5.0),
            &SeedSpec::new(1, "v", 0),
            |_, _| {},
        )
        .unwrap();
        assert_eq!(rec.stop, StopReason::Absorbed);
        assert_eq!(rec.events, 0);
        cells[0] = CellState::Empty;
        assert!(run_voter(
            t,
            &cells,
            &StopRule::time(1.0),
            &SeedSpec::new(1, "v", 0),
            |_, _| {}
        )
        .is_err());
    }

    #[test]
    fn two_site_voter_first_event_is_fair() {
        let t = Arc::new(Topology::Torus(Torus::new(vec![2]).unwrap()));
        let reps = 4000;
        let mut red_wins = 0;
        for r in 0..reps {
            let (_, c) = run_voter(
                t.clone(),
                &[CellState::Red, CellState::Blue],
                &StopRule::time(1e9),
                &SeedSpec::new(4, "v2", r),
                |_, _| {},
            )
            .unwrap();
            if c.count(CellState::Red) == 2 {
                red_wins += 1;
            }
        }
        let p = red_wins as f64 / reps as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / reps as f64).sqrt(), "p {p}");
    }

    #[test]
    fn same_seed_same_record() {
        let t = plane(60);
        let run = || {
            run_competition(
                t.clone(),
                &[Site::from([0, 0])],
                &[Site::from([1, 0])],
                &StopRule::time(8.0),
                &SeedSpec::new(123, "det", 4),
                true,
                |_, _| {},
            )
            .unwrap()
            .0
        };
        assert_eq!(run(), run());
    }
}
