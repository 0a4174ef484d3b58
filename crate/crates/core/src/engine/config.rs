use std::sync::Arc;

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::topology::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum CellState {
    Empty = 0,
    Red = 1,
    Blue = 2,
}

impl CellState {
    #[inline]
    pub fn from_u8(v: u8) -> Self {
        match v {
            0 => CellState::Empty,
            1 => CellState::Red,
            _ => CellState::Blue,
        }
    }

    pub fn is_occupied(self) -> bool {
        self != CellState::Empty
    }

    pub fn opposite(self) -> Self {
        match self {
            CellState::Red => CellState::Blue,
            CellState::Blue => CellState::Red,
            CellState::Empty => CellState::Empty,
        }
    }
}

/// One fired edge: `to` took the colour of `from`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
    pub old: CellState,
    pub new: CellState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    Event(TrajectoryEvent),
    /// The next event would fall after the time limit; the clock now reads
    /// the limit.
    TimeReached,
    /// No active edges remain.
    Absorbed,
}

const INACTIVE: u32 = u32::MAX;

/// Cell states on a finite graph plus the registry of active directed
/// edges, kept exact under every update.
///
/// Directed edge ids are `site * degree + slot`.
#[derive(Clone, Debug)]
pub struct Configuration {
    topology: Arc<Topology>,
    degree: usize,
    cells: Vec<u8>,
    // sparse set of active edge ids
    pos: Vec<u32>,
    active: Vec<u32>,
    counts: [usize; 3],
    time: f64,
}

impl Configuration {
    /// All-empty configuration.
    pub fn empty(topology: Arc<Topology>) -> Result<Self> {
        let n = topology.n_sites();
        let degree = topology.degree();
        let edges = n
            .checked_mul(degree)
            .filter(|&e| e < INACTIVE as usize)
            .ok_or_else(|| Error::config("box", "graph too large for the edge registry"))?;
        Ok(Configuration {
            degree,
            cells: vec![0; n],
            pos: vec![INACTIVE; edges],
            active: Vec::new(),
            counts: [n, 0, 0],
            time: 0.0,
            topology,
        })
    }

    pub fn from_cells(topology: Arc<Topology>, cells: &[CellState]) -> Result<Self> {
        if cells.len() != topology.n_sites() {
            return Err(Error::config(
                "cells",
                "cell vector length differs from graph size",
            ));
        }
        let mut c = Self::empty(topology)?;
        for (i, &s) in cells.iter().enumerate() {
            if s != CellState::Empty {
                c.cells[i] = s as u8;
                c.counts[0] -= 1;
                c.counts[s as usize] += 1;
            }
        }
        c.rebuild_active();
        Ok(c)
    }

    /// Red and blue site lists on a lattice or torus. The sets must be
    /// disjoint and inside the graph.
    pub fn from_sites(topology: Arc<Topology>, red: &[Site], blue: &[Site]) -> Result<Self> {
        let mut cells = vec![CellState::Empty; topology.n_sites()];
        for (sites, color, name) in [(red, CellState::Red, "red"), (blue, CellState::Blue, "blue")] {
            for s in sites {
                let i = topology
                    .index(s)
                    .ok_or_else(|| Error::config(name, format!("site {s:?} is outside the box")))?;
                if cells[i] != CellState::Empty {
                    return Err(Error::config(name, format!("site {s:?} is listed twice")));
                }
                cells[i] = color;
            }
        }
        Self::from_cells(topology, &cells)
    }

    fn rebuild_active(&mut self) {
        self.active.clear();
        self.pos.fill(INACTIVE);
        for x in 0..self.cells.len() {
            if self.cells[x] == 0 {
                continue;
            }
            for s in 0..self.degree {
                if self.edge_should_be_active(x, s) {
                    let e = (x * self.degree + s) as u32;
                    self.pos[e as usize] = self.active.len() as u32;
                    self.active.push(e);
                }
            }
        }
    }

    #[inline]
    fn edge_should_be_active(&self, x: usize, slot: usize) -> bool {
        let cx = self.cells[x];
        cx != 0
            && match self.topology.neighbor(x, slot) {
                Some(y) => self.cells[y] != cx,
                None => false,
            }
    }

    #[inline]
    fn refresh_edge(&mut self, e: usize, want: bool) {
        let p = self.pos[e];
        if want && p == INACTIVE {
            self.pos[e] = self.active.len() as u32;
            self.active.push(e as u32);
        } else if !want && p != INACTIVE {
            let last = *self.active.last().unwrap();
            self.active[p as usize] = last;
            self.pos[last as usize] = p;
            self.active.pop();
            self.pos[e] = INACTIVE;
        }
    }

    /// Set the state of one site and update the registries in O(degree).
    pub fn set(&mut self, y: usize, state: CellState) {
        let old = self.cells[y];
        if old == state as u8 {
            return;
        }
        self.counts[old as usize] -= 1;
        self.counts[state as usize] += 1;
        self.cells[y] = state as u8;
        for s in 0..self.degree {
            let want = self.edge_should_be_active(y, s);
            self.refresh_edge(y * self.degree + s, want);
            if let Some(z) = self.topology.neighbor(y, s) {
                let back = self.topology.reverse_slot(y, s);
                let want = self.edge_should_be_active(z, back);
                self.refresh_edge(z * self.degree + back, want);
            }
        }
    }

    /// One Gillespie step, unless the next event falls after `t_max`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R, t_max: f64) -> StepOutcome {
        let n = self.active.len();
        if n == 0 {
            return StepOutcome::Absorbed;
        }
        let dt: f64 = rng.sample::<f64, _>(Exp1) / n as f64;
        if self.time + dt > t_max {
            self.time = t_max;
            return StepOutcome::TimeReached;
        }
        self.time += dt;
        let e = self.active[rng.random_range(0..n)] as usize;
        let (from, slot) = (e / self.degree, e % self.degree);
        let to = self
            .topology
            .neighbor(from, slot)
            .expect("active edge has a target");
        let old = self.state(to);
        let new = self.state(from);
        self.set(to, new);
        StepOutcome::Event(TrajectoryEvent {
            time: self.time,
            from,
            to,
            old,
            new,
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    #[inline]
    pub fn state(&self, i: usize) -> CellState {
        CellState::from_u8(self.cells[i])
    }

    pub fn cells(&self) -> impl Iterator<Item = CellState> + '_ {
        self.cells.iter().map(|&v| CellState::from_u8(v))
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn count(&self, state: CellState) -> usize {
        self.counts[state as usize]
    }

    pub fn occupied(&self) -> usize {
        self.counts[1] + self.counts[2]
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    /// Active edges as `(from, to)` pairs, sorted.
    pub fn active_edges(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self
            .active
            .iter()
            .map(|&e| {
                let (x, s) = (e as usize / self.degree, e as usize % self.degree);
                (x, self.topology.neighbor(x, s).unwrap())
            })
            .collect();
        v.sort_unstable();
        v
    }

    /// Recompute the registries from scratch and compare.
    pub fn check_consistency(&self) -> bool {
        let mut fresh = self.clone();
        fresh.rebuild_active();
        let mut counts = [0usize; 3];
        for &c in &self.cells {
            counts[c as usize] += 1;
        }
        let mut mine: Vec<u32> = self.active.clone();
        let mut theirs: Vec<u32> = fresh.active.clone();
        mine.sort_unstable();
        theirs.sort_unstable();
        let pos_ok = self
            .active
            .iter()
            .enumerate()
            .all(|(i, &e)| self.pos[e as usize] == i as u32);
        mine == theirs && counts == self.counts && pos_ok
    }

    pub fn sites_with(&self, state: CellState) -> Vec<Site> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == state as u8)
            .map(|(i, _)| self.topology.site(i))
            .collect()
    }

    pub fn indices_with(&self, state: CellState) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == state as u8)
            .map(|(i, _)| i)
    }

    pub fn state_at(&self, s: &Site) -> Option<CellState> {
        self.topology.index(s).map(|i| self.state(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::SeedSpec;
    use crate::topology::{Graph, LatticeBox, Torus};

    fn line(half: i64) -> Arc<Topology> {
        Arc::new(Topology::Lattice(LatticeBox::centered(1, half).unwrap()))
    }

    fn site_pairs(c: &Configuration) -> Vec<(Site, Site)> {
        let t = c.topology();
        c.active_edges()
            .into_iter()
            .map(|(a, b)| (t.site(a), t.site(b)))
            .collect()
    }

    #[test]
    fn single_red_site_has_two_active_edges() {
        let c = Configuration::from_sites(line(5), &[Site::from([0])], &[]).unwrap();
        assert_eq!(c.active_len(), 2);
        let mut rng = SeedSpec::new(1, "t", 0).rng("gillespie");
        let mut c2 = c.clone();
        match c2.step(&mut rng, 100.0) {
            StepOutcome::Event(ev) => {
                assert_eq!(ev.new, CellState::Red);
                assert_eq!(ev.old, CellState::Empty);
            }
            other => panic!("{other:?}"),
        }
        let reds = c2.sites_with(CellState::Red);
        assert_eq!(reds.len(), 2);
        assert!(reds.contains(&Site::from([-1])) ^ reds.contains(&Site::from([1])));
    }

    #[test]
    fn red_blue_pair_rates() {
        // {0: R, 1: B}: 0->-1, 0->1, 1->0, 1->2
        let c = Configuration::from_sites(line(5), &[Site::from([0])], &[Site::from([1])]).unwrap();
        assert_eq!(
            site_pairs(&c),
            vec![
                (Site::from([0]), Site::from([-1])),
                (Site::from([0]), Site::from([1])),
                (Site::from([1]), Site::from([0])),
                (Site::from([1]), Site::from([2])),
            ]
        );
    }

    #[test]
    fn voter_torus_active_edges_are_bichromatic() {
        let t = Arc::new(Topology::Torus(Torus::new(vec![4, 4]).unwrap()));
        let cells: Vec<CellState> = (0..16)
            .map(|i| {
                if (i * 7) % 3 == 0 {
                    CellState::Red
                } else {
                    CellState::Blue
                }
            })
            .collect();
        let c = Configuration::from_cells(t.clone(), &cells).unwrap();
        let mut expect = Vec::new();
        for (x, _, y) in t.directed_edges() {
            if cells[x] != cells[y] {
                expect.push((x, y));
            }
        }
        expect.sort_unstable();
        assert_eq!(c.active_edges(), expect);
    }

    #[test]
    fn registry_stays_consistent() {
        let g = Arc::new(Topology::Graph(Graph::grid(4, 3).unwrap()));
        let mut cells = vec![CellState::Empty; 12];
        cells[0] = CellState::Red;
        cells[5] = CellState::Blue;
        let mut c = Configuration::from_cells(g, &cells).unwrap();
        let mut rng = SeedSpec::new(3, "t", 0).rng("gillespie");
        for _ in 0..200 {
            match c.step(&mut rng, f64::INFINITY) {
                StepOutcome::Event(ev) => {
                    assert_ne!(ev.new, CellState::Empty);
                    assert!(c.check_consistency());
                }
                _ => break,
            }
        }
    }

    #[test]
    fn absorbed_when_monochromatic_and_full() {
        let g = Arc::new(Topology::Graph(Graph::path(3).unwrap()));
        let mut c = Configuration::from_cells(g, &[CellState::Red; 3]).unwrap();
        let mut rng = SeedSpec::new(3, "t", 0).rng("gillespie");
        assert_eq!(c.step(&mut rng, 10.0), StepOutcome::Absorbed);
    }

    #[test]
    fn overlapping_sites_rejected() {
        let r = Configuration::from_sites(line(3), &[Site::from([0])], &[Site::from([0])]);
        assert!(r.is_err());
        let r = Configuration::from_sites(line(3), &[Site::from([9])], &[]);
        assert!(r.is_err());
    }
}
