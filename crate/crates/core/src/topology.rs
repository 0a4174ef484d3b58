//! Finite graphs the engines run on: a box of `Z^d`, a torus, or an
//! explicit adjacency list.
//!
//! Sites are dense indices. Every site has `degree()` neighbour slots; a
//! slot may be empty (outside the box, or a low-degree vertex of a general
//! graph). On the lattice and torus, slot `2i` is `-e_i` and slot `2i + 1`
//! is `+e_i`.

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::media::mix64;

pub const NO_SITE: usize = usize::MAX;

/// Cube-shaped window of `Z^d`. Index order equals lexicographic order of
/// the coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeBox {
    lo: Vec<i64>,
    extent: Vec<usize>,
    strides: Vec<usize>,
    n_sites: usize,
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, extent: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != extent.len() || extent.contains(&0) {
            return Err(Error::config("box", "box needs d >= 1 and positive extents"));
        }
        let mut strides = vec![1; lo.len()];
        for i in (0..lo.len() - 1).rev() {
            strides[i] = strides[i + 1] * extent[i + 1];
        }
        let n_sites = strides[0] * extent[0];
        Ok(LatticeBox {
            lo,
            extent,
            strides,
            n_sites,
        })
    }

    /// `[-half, half]^d`.
    pub fn centered(dim: usize, half_width: i64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![(2 * half_width + 1) as usize; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn extent(&self) -> &[usize] {
        &self.extent
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn index(&self, s: &Site) -> Option<usize> {
        if s.dim() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for (i, &c) in s.coords().iter().enumerate() {
            let off = c - self.lo[i];
            if off < 0 || off >= self.extent[i] as i64 {
                return None;
            }
            idx += off as usize * self.strides[i];
        }
        Some(idx)
    }

    #[inline]
    pub fn coord(&self, idx: usize, axis: usize) -> i64 {
        ((idx / self.strides[axis]) % self.extent[axis]) as i64 + self.lo[axis]
    }

    pub fn site(&self, idx: usize) -> Site {
        Site((0..self.dim()).map(|a| self.coord(idx, a)).collect())
    }

    #[inline]
    fn neighbor(&self, idx: usize, slot: usize) -> Option<usize> {
        let axis = slot >> 1;
        let off = (idx / self.strides[axis]) % self.extent[axis];
        if slot & 1 == 0 {
            (off > 0).then(|| idx - self.strides[axis])
        } else {
            (off + 1 < self.extent[axis]).then(|| idx + self.strides[axis])
        }
    }

    /// Whether the site lies on the outer face of the box.
    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        (0..self.dim()).any(|a| {
            let off = (idx / self.strides[a]) % self.extent[a];
            off == 0 || off + 1 == self.extent[a]
        })
    }
}

/// `Z_{side_1} x ... x Z_{side_d}` with periodic wrap; coordinates run from
/// `0` to `side - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Torus {
    side: Vec<usize>,
    strides: Vec<usize>,
    n_sites: usize,
}

impl Torus {
    pub fn new(side: Vec<usize>) -> Result<Self> {
        if side.is_empty() || side.iter().any(|&s| s < 2) {
            return Err(Error::config("torus", "torus needs d >= 1 and every side >= 2"));
        }
        let mut strides = vec![1; side.len()];
        for i in (0..side.len() - 1).rev() {
            strides[i] = strides[i + 1] * side[i + 1];
        }
        let n_sites = strides[0] * side[0];
        Ok(Torus {
            side,
            strides,
            n_sites,
        })
    }

    pub fn dim(&self) -> usize {
        self.side.len()
    }

    pub fn side(&self) -> &[usize] {
        &self.side
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Index of a site, reducing coordinates modulo the sides.
    pub fn index(&self, s: &Site) -> Option<usize> {
        if s.dim() != self.dim() {
            return None;
        }
        Some(
            s.coords()
                .iter()
                .enumerate()
                .map(|(i, &c)| c.rem_euclid(self.side[i] as i64) as usize * self.strides[i])
                .sum(),
        )
    }

    pub fn coord(&self, idx: usize, axis: usize) -> i64 {
        ((idx / self.strides[axis]) % self.side[axis]) as i64
    }

    pub fn site(&self, idx: usize) -> Site {
        Site((0..self.dim()).map(|a| self.coord(idx, a)).collect())
    }

    #[inline]
    fn neighbor(&self, idx: usize, slot: usize) -> usize {
        let axis = slot >> 1;
        let off = (idx / self.strides[axis]) % self.side[axis];
        let base = idx - off * self.strides[axis];
        let n = self.side[axis];
        let next = if slot & 1 == 0 {
            (off + n - 1) % n
        } else {
            (off + 1) % n
        };
        base + next * self.strides[axis]
    }
}

/// Finite graph given by adjacency lists, for exact-oracle comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    reverse: Vec<Vec<usize>>,
    degree: usize,
}

impl Graph {
    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Result<Self> {
        let n = adj.len();
        if n == 0 {
            return Err(Error::config("graph", "graph has no vertices"));
        }
        let mut reverse = Vec::with_capacity(n);
        for (x, nbrs) in adj.iter().enumerate() {
            let mut rev = Vec::with_capacity(nbrs.len());
            for &y in nbrs {
                if y >= n || y == x {
                    return Err(Error::config("graph", format!("bad edge {x} -> {y}")));
                }
                let back = adj[y]
                    .iter()
                    .position(|&z| z == x)
                    .ok_or_else(|| Error::config("graph", format!("edge {x} -> {y} has no reverse")))?;
                rev.push(back);
            }
            reverse.push(rev);
        }
        let degree = adj.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Graph { adj, reverse, degree })
    }

    pub fn path(n: usize) -> Result<Self> {
        let adj = (0..n)
            .map(|i| {
                let mut v = Vec::new();
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < n {
                    v.push(i + 1);
                }
                v
            })
            .collect();
        Self::from_adjacency(adj)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::config("graph", "a cycle needs at least 3 vertices"));
        }
        Self::from_adjacency((0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect())
    }

    /// `w x h` grid; vertex `(i, j)` has index `i * h + j`.
    pub fn grid(w: usize, h: usize) -> Result<Self> {
        let mut adj = vec![Vec::new(); w * h];
        for i in 0..w {
            for j in 0..h {
                let v = i * h + j;
                if i > 0 {
                    adj[v].push(v - h);
                }
                if i + 1 < w {
                    adj[v].push(v + h);
                }
                if j > 0 {
                    adj[v].push(v - 1);
                }
                if j + 1 < h {
                    adj[v].push(v + 1);
                }
            }
        }
        Self::from_adjacency(adj)
    }

    pub fn n_sites(&self) -> usize {
        self.adj.len()
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adj
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Topology {
    Lattice(LatticeBox),
    Torus(Torus),
    Graph(Graph),
}

impl Topology {
    pub fn n_sites(&self) -> usize {
        match self {
            Topology::Lattice(b) => b.n_sites(),
            Topology::Torus(t) => t.n_sites(),
            Topology::Graph(g) => g.n_sites(),
        }
    }

    /// Number of neighbour slots per site.
    #[inline]
    pub fn degree(&self) -> usize {
        match self {
            Topology::Lattice(b) => 2 * b.dim(),
            Topology::Torus(t) => 2 * t.dim(),
            Topology::Graph(g) => g.degree,
        }
    }

    #[inline]
    pub fn neighbor(&self, idx: usize, slot: usize) -> Option<usize> {
        match self {
            Topology::Lattice(b) => b.neighbor(idx, slot),
            Topology::Torus(t) => Some(t.neighbor(idx, slot)),
            Topology::Graph(g) => g.adj[idx].get(slot).copied(),
        }
    }

    /// Slot at `neighbor(idx, slot)` that points back to `idx`.
    #[inline]
    pub fn reverse_slot(&self, idx: usize, slot: usize) -> usize {
        match self {
            Topology::Lattice(_) | Topology::Torus(_) => slot ^ 1,
            Topology::Graph(g) => g.reverse[idx][slot],
        }
    }

    /// Slot of `to` among the neighbours of `from`.
    pub fn slot_of(&self, from: usize, to: usize) -> Option<usize> {
        (0..self.degree()).find(|&s| self.neighbor(from, s) == Some(to))
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        match self {
            Topology::Lattice(b) => b.is_boundary(idx),
            _ => false,
        }
    }

    pub fn index(&self, s: &Site) -> Option<usize> {
        match self {
            Topology::Lattice(b) => b.index(s),
            Topology::Torus(t) => t.index(s),
            Topology::Graph(g) => (s.dim() == 1 && s.coords()[0] >= 0)
                .then(|| s.coords()[0] as usize)
                .filter(|&i| i < g.n_sites()),
        }
    }

    /// Coordinates of a site; graph vertices are 1-tuples of their index.
    pub fn site(&self, idx: usize) -> Site {
        match self {
            Topology::Lattice(b) => b.site(idx),
            Topology::Torus(t) => t.site(idx),
            Topology::Graph(_) => Site::new(&[idx as i64]),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Topology::Lattice(b) => b.dim(),
            Topology::Torus(t) => t.dim(),
            Topology::Graph(_) => 1,
        }
    }

    /// Stable label of a site, independent of the window it is viewed in.
    pub fn site_key(&self, idx: usize) -> u64 {
        match self {
            Topology::Lattice(b) => (0..b.dim()).fold(0x5157_e5ed, |h, a| mix64(h ^ b.coord(idx, a) as u64)),
            Topology::Torus(t) => (0..t.dim()).fold(0x070f_05ed, |h, a| mix64(h ^ t.coord(idx, a) as u64)),
            Topology::Graph(_) => mix64(0x9a9b ^ idx as u64),
        }
    }

    pub fn as_lattice(&self) -> Option<&LatticeBox> {
        match self {
            Topology::Lattice(b) => Some(b),
            _ => None,
        }
    }

    /// Every directed edge as `(from, slot, to)`, in index order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n_sites())
            .flat_map(move |x| (0..self.degree()).filter_map(move |s| self.neighbor(x, s).map(|y| (x, s, y))))
    }
}
