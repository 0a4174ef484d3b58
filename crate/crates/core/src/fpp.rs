//! First-passage percolation on mean-one exponential edge weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::media::{EdgeWeightField, SeedSpec};
use crate::topology::{LatticeBox, Topology};

/// Passage times `T(source, x)` for every site of a finite graph, or up to
/// a cutoff (sites beyond it hold `f64::INFINITY`).
#[derive(Clone, Debug)]
pub struct PassageField {
    topology: Arc<Topology>,
    source: Vec<usize>,
    times: Vec<f64>,
}

impl PassageField {
    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn time(&self, idx: usize) -> f64 {
        self.times[idx]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time_at(&self, s: &Site) -> Option<f64> {
        self.topology.index(s).map(|i| self.times[i])
    }
}

#[derive(PartialEq)]
struct Label(f64, usize);

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, ties by index
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn resolve(topology: &Topology, sites: &[Site], what: &str) -> Result<Vec<usize>> {
    if sites.is_empty() {
        return Err(Error::domain(format!("{what} set is empty")));
    }
    sites
        .iter()
        .map(|s| {
            topology
                .index(s)
                .ok_or_else(|| Error::domain(format!("{what} site {s:?} is outside the box")))
        })
        .collect()
}

/// Label-setting search from `source`. Stops when a site with `stop(idx)`
/// is settled (returning it) or when the next label exceeds `cutoff`.
fn dijkstra(
    field: &EdgeWeightField,
    source: &[usize],
    cutoff: f64,
    mut stop: impl FnMut(usize) -> bool,
) -> (Vec<f64>, Option<usize>) {
    let topo = field.topology();
    let mut times = vec![f64::INFINITY; topo.n_sites()];
    let mut done = vec![false; topo.n_sites()];
    let mut heap = BinaryHeap::new();
    for &s in source {
        times[s] = 0.0;
        heap.push(Label(0.0, s));
    }
    while let Some(Label(t, x)) = heap.pop() {
        if done[x] {
            continue;
        }
        if t > cutoff {
            times[x] = f64::INFINITY;
            break;
        }
        done[x] = true;
        if stop(x) {
            return (times, Some(x));
        }
        for slot in 0..topo.degree() {
            if let Some(y) = topo.neighbor(x, slot) {
                if done[y] {
                    continue;
                }
                let ty = t + field.weight(x, y);
                if ty < times[y] {
                    times[y] = ty;
                    heap.push(Label(ty, y));
                }
            }
        }
    }
    // unsettled tentative labels are not passage times
    for (t, d) in times.iter_mut().zip(&done) {
        if !d {
            *t = f64::INFINITY;
        }
    }
    (times, None)
}

/// Exact passage times from `source` to every site of the field's graph.
pub fn passage_times(field: &EdgeWeightField, source: &[Site]) -> Result<PassageField> {
    passage_times_until(field, source, f64::INFINITY)
}

/// As [`passage_times`], settling only sites with `T <= cutoff`.
pub fn passage_times_until(field: &EdgeWeightField, source: &[Site], cutoff: f64) -> Result<PassageField> {
    let src = resolve(field.topology(), source, "source")?;
    let (times, _) = dijkstra(field, &src, cutoff, |_| false);
    Ok(PassageField {
        topology: field.topology().clone(),
        source: src,
        times,
    })
}

/// `T(from, to)` for sets, stopping as soon as `to` is reached.
pub fn set_passage_time(field: &EdgeWeightField, from: &[Site], to: &[Site]) -> Result<f64> {
    let topo = field.topology();
    let src = resolve(topo, from, "source")?;
    let dst = resolve(topo, to, "target")?;
    let mut target = vec![false; topo.n_sites()];
    for &i in &dst {
        target[i] = true;
    }
    let (times, hit) = dijkstra(field, &src, f64::INFINITY, |i| target[i]);
    Ok(hit.map_or(f64::INFINITY, |i| times[i]))
}

/// Sublevel set `{x : T(source, x) <= t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FppGrowth {
    pub t: f64,
    pub sites: Vec<Site>,
    /// The set reached the box face, so it may be undercounted.
    pub touches_boundary: bool,
}

pub fn richardson_from_fpp(field: &PassageField, t: f64) -> FppGrowth {
    let topo = &field.topology;
    let mut touches = false;
    let mut sites = Vec::new();
    for (i, &ti) in field.times.iter().enumerate() {
        if ti <= t {
            touches |= topo.is_boundary(i);
            sites.push(topo.site(i));
        }
    }
    FppGrowth {
        t,
        sites,
        touches_boundary: touches,
    }
}

/// Both directed set-to-set passage times on the same weights.
pub fn duality_check(field: &EdgeWeightField, f: &[Site], g: &[Site]) -> Result<(f64, f64)> {
    if f.iter().any(|s| g.contains(s)) {
        return Err(Error::domain("duality sets must be disjoint"));
    }
    Ok((set_passage_time(field, f, g)?, set_passage_time(field, g, f)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KestenParams {
    pub dimension: usize,
    /// Integer direction vectors `u`; targets are `n * u`.
    pub directions: Vec<Vec<i64>>,
    pub ns: Vec<i64>,
    pub s_grid: Vec<f64>,
    pub reps: u64,
    /// Time constant per direction, `T(0, n u) ~ mu * n`. Estimated from
    /// the largest `n` when absent.
    #[serde(default)]
    pub mu_hat: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KestenRow {
    pub direction: String,
    pub n: i64,
    pub s: f64,
    pub freq: f64,
    pub reps: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KestenReport {
    pub rows: Vec<KestenRow>,
    pub mu_hat: Vec<f64>,
    /// Least-squares slope of `-ln freq` against `s`, per direction.
    pub decay_rate: Vec<Option<f64>>,
    /// Some requested tail had zero hits: the reps cannot resolve it.
    pub censored: bool,
    /// Replicates whose search reached the box face before the target.
    pub box_limited: u64,
}

impl KestenReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn direction_label(u: &[i64]) -> String {
    u.iter().map(i64::to_string).collect::<Vec<_>>().join(":")
}

/// Half-width used for a point-to-point time to `n u`: the target plus a
/// transverse allowance of `n^{3/4} + 10`.
fn kesten_box(dim: usize, u: &[i64], n: i64) -> Result<LatticeBox> {
    let reach = n * u.iter().map(|c| c.abs()).max().unwrap_or(0);
    LatticeBox::centered(dim, reach + (n as f64).powf(0.75).ceil() as i64 + 10)
}

fn point_time(dim: usize, u: &[i64], n: i64, seed: &SeedSpec) -> Result<(f64, bool)> {
    let b = kesten_box(dim, u, n)?;
    let topo = Arc::new(Topology::Lattice(b));
    let field = EdgeWeightField::new(topo.clone(), seed);
    let target = topo
        .index(&Site::new(&u.iter().map(|c| c * n).collect::<Vec<_>>()))
        .expect("target inside its box");
    let origin = topo.index(&Site::origin(dim)).expect("origin inside box");
    let mut limited = false;
    let (times, _) = dijkstra(&field, &[origin], f64::INFINITY, |i| {
        limited |= topo.is_boundary(i);
        i == target
    });
    Ok((times[target], limited))
}

/// Empirical tail frequencies of `|T(0, n u) - mu n| > s sqrt(n)`.
pub fn kesten_experiment(p: &KestenParams, seed: &SeedSpec) -> Result<KestenReport> {
    if p.directions.is_empty() || p.ns.is_empty() || p.s_grid.is_empty() {
        return Err(Error::config(
            "params",
            "directions, ns and s_grid must be nonempty",
        ));
    }
    if p.reps == 0 {
        return Err(Error::config("reps", "must be positive"));
    }
    for u in &p.directions {
        if u.len() != p.dimension || u.iter().all(|&c| c == 0) {
            return Err(Error::config("directions", format!("bad direction {u:?}")));
        }
    }
    if p.ns.iter().any(|&n| n <= 0) {
        return Err(Error::config("ns", "must be positive"));
    }
    if p.s_grid.iter().any(|&s| s < 0.0 || !s.is_finite()) {
        return Err(Error::config("s_grid", "must be finite and nonnegative"));
    }
    if let Some(m) = &p.mu_hat {
        if m.len() != p.directions.len() {
            return Err(Error::config("mu_hat", "one value per direction"));
        }
    }
    let mut s_grid = p.s_grid.clone();
    s_grid.sort_by(f64::total_cmp);
    let mut ns = p.ns.clone();
    ns.sort_unstable();

    let mut rows = Vec::new();
    let mut mu_hat = Vec::new();
    let mut decay = Vec::new();
    let mut censored = false;
    let mut box_limited = 0;
    for (k, u) in p.directions.iter().enumerate() {
        let label = direction_label(u);
        // one independent weight field per (direction, n, replicate)
        let samples: Vec<Vec<(f64, bool)>> = ns
            .iter()
            .map(|&n| {
                (0..p.reps)
                    .into_par_iter()
                    .map(|r| {
                        let s = SeedSpec::new(
                            seed.master_seed,
                            format!("{}/kesten/{label}/{n}", seed.experiment),
                            r,
                        );
                        point_time(p.dimension, u, n, &s)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        box_limited += samples.iter().flatten().filter(|x| x.1).count() as u64;
        let mu = match &p.mu_hat {
            Some(m) => m[k],
            None => {
                let last = samples.last().unwrap();
                let n = *ns.last().unwrap() as f64;
                last.iter().map(|x| x.0).sum::<f64>() / (last.len() as f64 * n)
            }
        };
        mu_hat.push(mu);
        let mut fit = Vec::new();
        for (&n, ts) in ns.iter().zip(&samples) {
            let nf = n as f64;
            for &s in &s_grid {
                let hits = ts
                    .iter()
                    .filter(|x| (x.0 - mu * nf).abs() > s * nf.sqrt())
                    .count();
                let freq = hits as f64 / p.reps as f64;
                if hits == 0 {
                    censored = true;
                } else if s > 0.0 {
                    fit.push((s, -freq.ln()));
                }
                rows.push(KestenRow {
                    direction: label.clone(),
                    n,
                    s,
                    freq,
                    reps: p.reps,
                });
            }
        }
        decay.push(crate::analytics::stats::slope(&fit));
    }
    Ok(KestenReport {
        rows,
        mu_hat,
        decay_rate: decay,
        censored,
        box_limited,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Graph;
    use proptest::prelude::*;

    fn field(half: i64, seed: u64) -> EdgeWeightField {
        let t = Arc::new(Topology::Lattice(LatticeBox::centered(2, half).unwrap()));
        EdgeWeightField::new(t, &SeedSpec::new(seed, "fpp", 0))
    }

    #[test]
    fn source_is_zero_and_single_edge() {
        let t = Arc::new(Topology::Graph(Graph::path(2).unwrap()));
        let f = EdgeWeightField::new(t, &SeedSpec::new(1, "e", 0));
        let pf = passage_times(&f, &[Site::from([0])]).unwrap();
        assert_eq!(pf.time(0), 0.0);
        assert_eq!(pf.time(1), f.weight(0, 1));
    }

    #[test]
    fn two_by_two_matches_path_enumeration() {
        // grid 2x2: 0-1 / 2-3; from 0 to 3 the self-avoiding paths are the
        // two monotone ones
        let t = Arc::new(Topology::Graph(Graph::grid(2, 2).unwrap()));
        for seed in 0..50 {
            let f = EdgeWeightField::new(t.clone(), &SeedSpec::new(seed, "2x2", 0));
            let pf = passage_times(&f, &[Site::from([0])]).unwrap();
            let w = |a, b| f.weight(a, b);
            let best3 = (w(0, 1) + w(1, 3)).min(w(0, 2) + w(2, 3));
            assert_eq!(pf.time(3), best3);
            let best1 = w(0, 1).min(w(0, 2) + w(2, 3) + w(3, 1));
            assert_eq!(pf.time(1), best1);
        }
    }

    #[test]
    fn relaxation_optimality() {
        let f = field(10, 3);
        let pf = passage_times(&f, &[Site::from([0, 0]), Site::from([3, -2])]).unwrap();
        let t = f.topology();
        for x in 0..t.n_sites() {
            let mut tight = pf.source().contains(&x);
            for s in 0..t.degree() {
                if let Some(y) = t.neighbor(x, s) {
                    let w = f.weight(x, y);
                    assert!(pf.time(x) <= pf.time(y) + w + 1e-12);
                    tight |= (pf.time(x) - (pf.time(y) + w)).abs() <= 1e-12;
                }
            }
            assert!(tight, "site {x} has no tight incoming edge");
        }
    }

    #[test]
    fn sublevel_sets_are_monotone() {
        let f = field(12, 8);
        let pf = passage_times(&f, &[Site::from([0, 0])]).unwrap();
        assert_eq!(richardson_from_fpp(&pf, 0.0).sites, vec![Site::from([0, 0])]);
        let mut prev = richardson_from_fpp(&pf, 0.0).sites;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let z = richardson_from_fpp(&pf, t);
            assert!(prev.iter().all(|s| z.sites.contains(s)));
            prev = z.sites;
        }
        assert!(richardson_from_fpp(&pf, 1e9).touches_boundary);
    }

    #[test]
    fn cutoff_leaves_far_sites_infinite() {
        let f = field(12, 2);
        let full = passage_times(&f, &[Site::from([0, 0])]).unwrap();
        let part = passage_times_until(&f, &[Site::from([0, 0])], 2.0).unwrap();
        for (a, b) in full.times().iter().zip(part.times()) {
            if *a <= 2.0 {
                assert_eq!(a, b);
            } else {
                assert!(b.is_infinite());
            }
        }
    }

    #[test]
    fn duality_on_adjacent_singletons() {
        let f = field(5, 4);
        let (x, y) = (Site::from([0, 0]), Site::from([0, 1]));
        let (a, b) = duality_check(&f, std::slice::from_ref(&x), std::slice::from_ref(&y)).unwrap();
        let w = f.weight_for_edge(&x, &y).unwrap();
        assert_eq!((a, b), (w, w));
        assert!(duality_check(&f, std::slice::from_ref(&x), std::slice::from_ref(&x)).is_err());
    }

    #[test]
    fn kesten_table_shape() {
        let p = KestenParams {
            dimension: 2,
            directions: vec![vec![1, 0]],
            ns: vec![8, 16],
            s_grid: vec![0.0, 0.5, 1.0, 50.0],
            reps: 40,
            mu_hat: None,
        };
        let r = kesten_experiment(&p, &SeedSpec::new(1, "k", 0)).unwrap();
        assert_eq!(r.rows.len(), 8);
        for chunk in r.rows.chunks(4) {
            assert_eq!(chunk[0].freq, 1.0);
            assert!(chunk.windows(2).all(|w| w[1].freq <= w[0].freq));
        }
        assert!(r.censored, "s = 50 cannot be resolved");
        assert!(r.mu_hat[0] > 0.2 && r.mu_hat[0] < 0.8);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("direction,n,s,freq,reps\n1:0,8,0.0,1.0,40\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn duality_is_exact(seed in 0u64..1000, fx in -9i64..=9, fy in -9i64..=9, gx in -9i64..=9, gy in -9i64..=9) {
            prop_assume!((fx, fy) != (gx, gy));
            let f = field(10, seed);
            let a = [Site::from([fx, fy])];
            let b = [Site::from([gx, gy])];
            let (t1, t2) = duality_check(&f, &a, &b).unwrap();
            prop_assert_eq!(t1.to_bits(), t2.to_bits());
        }
    }
}
