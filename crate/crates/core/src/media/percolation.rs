use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use super::{combine, counter_exp1, SeedSpec};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::topology::Topology;

/// Independent rate-1 Poisson arrow processes on every directed edge of a
/// finite graph, over the window `[0, horizon]`.
///
/// Arrow times are generated on demand from counter-based streams; the
/// structure itself stores only its key.
#[derive(Clone, Debug)]
pub struct PercolationStructure {
    topology: Arc<Topology>,
    horizon: f64,
    key: u64,
}

/// One arrow `from -> to` at `time`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

impl PercolationStructure {
    pub fn new(topology: Arc<Topology>, horizon: f64, seed: &SeedSpec) -> Result<Self> {
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return Err(Error::config(
                "horizon",
                format!("must be finite and >= 0, got {horizon}"),
            ));
        }
        Ok(PercolationStructure {
            topology,
            horizon,
            key: seed.key("arrows"),
        })
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn edge_key(&self, from: usize, slot: usize) -> u64 {
        combine(combine(self.key, self.topology.site_key(from)), slot as u64)
    }

    /// Arrow times of the directed edge leaving `from` through `slot`.
    pub fn arrows(&self, from: usize, slot: usize) -> Vec<f64> {
        let key = self.edge_key(from, slot);
        let mut out = Vec::new();
        let mut t = 0.0;
        for i in 0.. {
            t += counter_exp1(key, i);
            if t > self.horizon {
                break;
            }
            out.push(t);
        }
        out
    }

    /// Arrow times of the directed edge `from -> to`, given by coordinates.
    pub fn arrows_for_edge(&self, from: &Site, to: &Site) -> Result<Vec<f64>> {
        let x = self
            .topology
            .index(from)
            .ok_or_else(|| Error::domain(format!("{from:?} is outside the structure")))?;
        let y = self
            .topology
            .index(to)
            .ok_or_else(|| Error::domain(format!("{to:?} is outside the structure")))?;
        let slot = self
            .topology
            .slot_of(x, y)
            .ok_or_else(|| Error::domain(format!("{from:?} and {to:?} are not adjacent")))?;
        Ok(self.arrows(x, slot))
    }

    /// All arrows in increasing time order; equal times are ordered by
    /// `(from, to)`.
    pub fn scan(&self) -> EventScan<'_> {
        let mut heap = BinaryHeap::new();
        for (x, slot, y) in self.topology.directed_edges() {
            let key = self.edge_key(x, slot);
            let t = counter_exp1(key, 0);
            if t <= self.horizon {
                heap.push(Pending {
                    time: t,
                    from: x,
                    to: y,
                    key,
                    counter: 0,
                });
            }
        }
        EventScan {
            horizon: self.horizon,
            heap,
            _structure: self,
        }
    }

    pub fn total_arrows(&self) -> usize {
        self.topology
            .directed_edges()
            .map(|(x, s, _)| self.arrows(x, s).len())
            .sum()
    }

    /// Debug dump: one line `t from to` per arrow, coordinates joined by
    /// commas, sorted by time.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        let fmt_site = |s: Site| {
            s.coords()
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        for ev in self.scan() {
            writeln!(
                w,
                "{} {} {}",
                ev.time,
                fmt_site(self.topology.site(ev.from)),
                fmt_site(self.topology.site(ev.to))
            )?;
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Pending {
    time: f64,
    from: usize,
    to: usize,
    key: u64,
    counter: u64,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.from.cmp(&self.from))
            .then(other.to.cmp(&self.to))
    }
}

/// Time-ordered merge of every edge's arrow stream.
pub struct EventScan<'a> {
    horizon: f64,
    heap: BinaryHeap<Pending>,
    _structure: &'a PercolationStructure,
}

impl Iterator for EventScan<'_> {
    type Item = ScanEvent;

    fn next(&mut self) -> Option<ScanEvent> {
        let mut top = self.heap.pop()?;
        let ev = ScanEvent {
            time: top.time,
            from: top.from,
            to: top.to,
        };
        top.counter += 1;
        top.time += counter_exp1(top.key, top.counter);
        if top.time <= self.horizon {
            self.heap.push(top);
        }
        Some(ev)
    }
}
