use std::f64::consts::TAU;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::l2;
use crate::error::{Error, Result};

/// A gauge on `R^d`: one of the standard norms or the gauge of an
/// empirically estimated star-shaped unit ball.
#[derive(Clone, Debug, PartialEq)]
pub enum Norm {
    L1,
    L2,
    Linf,
    Radial(RadialTable),
}

impl Norm {
    /// Gauge of `x` with respect to the unit ball.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Norm::L1 => x.iter().map(|v| v.abs()).sum(),
            Norm::L2 => l2(x),
            Norm::Linf => x.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
            Norm::Radial(t) => t.gauge(x),
        }
    }

    pub fn eval_site(&self, x: &[i64]) -> f64 {
        let v: smallvec::SmallVec<[f64; 4]> = x.iter().map(|&c| c as f64).collect();
        self.eval(&v)
    }

    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: smallvec::SmallVec<[f64; 4]> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        self.eval(&diff)
    }

    /// Radial projection `x / |x|` onto the unit sphere of the norm.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.eval(x);
        if g == 0.0 {
            return Err(Error::domain("projection is undefined at the origin"));
        }
        Ok(x.iter().map(|v| v / g).collect())
    }

    /// Largest Euclidean length of a point of the unit ball.
    pub fn max_euclidean_radius(&self, dim: usize) -> f64 {
        match self {
            Norm::L1 | Norm::L2 => 1.0,
            Norm::Linf => (dim as f64).sqrt(),
            Norm::Radial(t) => t.radii().iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Smallest Euclidean length of a point on the unit sphere.
    pub fn min_euclidean_radius(&self, dim: usize) -> f64 {
        match self {
            Norm::L1 => 1.0 / (dim as f64).sqrt(),
            Norm::L2 | Norm::Linf => 1.0,
            Norm::Radial(t) => t.inradius(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Layout {
    /// `d = 2`: directions given by angle, polygonal interpolation.
    Planar { angles: Vec<f64> },
    /// `d >= 3`: unit directions, nearest-direction lookup.
    Spatial { dirs: Vec<Vec<f64>> },
}

/// Radius of the boundary of a star-shaped unit ball along a finite set of
/// directions.
///
/// In the plane the unit ball is the polygon through the tabulated boundary
/// points, so the gauge is linear on every cone between consecutive
/// directions and a convex table yields an exactly convex gauge. In higher
/// dimensions the gauge uses the radius of the nearest tabulated direction,
/// which is only an approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialTable {
    layout: Layout,
    radii: Vec<f64>,
    // Planar cone data: outward normal (nx, ny) and offset c of each edge
    // p_k -> p_{k+1}; boundary satisfies n.x = c.
    edges: Vec<[f64; 3]>,
}

impl RadialTable {
    pub fn planar(angles: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || radii.is_empty() {
            return Err(Error::config("radial_table", "radial table is empty"));
        }
        if angles.len() != radii.len() {
            return Err(Error::config(
                "radial_table",
                "angle and radius columns have different lengths",
            ));
        }
        if angles.len() < 3 {
            return Err(Error::config(
                "radial_table",
                "a planar radial table needs at least 3 directions",
            ));
        }
        if let Some(r) = radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::config(
                "radial_table",
                format!("radii must be positive and finite, got {r}"),
            ));
        }
        let mut rows: Vec<(f64, f64)> = angles.into_iter().map(|a| a.rem_euclid(TAU)).zip(radii).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let k = rows.len();
        for i in 0..k {
            let next = if i + 1 < k { rows[i + 1].0 } else { rows[0].0 + TAU };
            let gap = next - rows[i].0;
            if gap <= 0.0 {
                return Err(Error::config("radial_table", "duplicate angle in radial table"));
            }
            if gap >= std::f64::consts::PI {
                return Err(Error::config(
                    "radial_table",
                    "consecutive directions must be less than pi apart",
                ));
            }
        }
        let (angles, radii): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let mut t = RadialTable {
            layout: Layout::Planar { angles },
            radii,
            edges: Vec::new(),
        };
        t.rebuild_edges();
        Ok(t)
    }

    pub fn spatial(dirs: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        if dirs.is_empty() || radii.is_empty() {
            return Err(Error::config("radial_table", "radial table is empty"));
        }
        if dirs.len() != radii.len() {
            return Err(Error::config(
                "radial_table",
                "direction and radius columns have different lengths",
            ));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::config("radial_table", "radii must be positive and finite"));
        }
        let dim = dirs[0].len();
        let mut unit = Vec::with_capacity(dirs.len());
        for d in dirs {
            let n = l2(&d);
            if d.len() != dim || n == 0.0 {
                return Err(Error::config("radial_table", "malformed direction vector"));
            }
            unit.push(d.iter().map(|v| v / n).collect());
        }
        Ok(RadialTable {
            layout: Layout::Spatial { dirs: unit },
            radii,
            edges: Vec::new(),
        })
    }

    /// Uniform planar grid `2 pi k / count` with radii from `f(angle)`.
    pub fn planar_from_fn(count: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let angles: Vec<f64> = (0..count).map(|k| grid_angle(k, count)).collect();
        let radii = angles.iter().map(|&a| f(a)).collect();
        Self::planar(angles, radii)
    }

    pub fn constant(count: usize, radius: f64) -> Result<Self> {
        Self::planar_from_fn(count, |_| radius)
    }

    pub fn dim(&self) -> usize {
        match &self.layout {
            Layout::Planar { .. } => 2,
            Layout::Spatial { dirs } => dirs[0].len(),
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> Option<&[f64]> {
        match &self.layout {
            Layout::Planar { angles } => Some(angles),
            Layout::Spatial { .. } => None,
        }
    }

    /// Boundary points `r_k u_k` of a planar table, in angular order.
    pub fn boundary_points(&self) -> Vec<[f64; 2]> {
        match &self.layout {
            Layout::Planar { angles } => angles
                .iter()
                .zip(&self.radii)
                .map(|(a, r)| [r * a.cos(), r * a.sin()])
                .collect(),
            Layout::Spatial { .. } => Vec::new(),
        }
    }

    fn rebuild_edges(&mut self) {
        let pts = self.boundary_points();
        let k = pts.len();
        self.edges = (0..k)
            .map(|i| {
                let p = pts[i];
                let q = pts[(i + 1) % k];
                // outward normal of a counter-clockwise edge
                let n = [q[1] - p[1], p[0] - q[0]];
                [n[0], n[1], n[0] * p[0] + n[1] * p[1]]
            })
            .collect();
    }

    fn gauge(&self, x: &[f64]) -> f64 {
        match &self.layout {
            Layout::Planar { angles } => {
                if x[0] == 0.0 && x[1] == 0.0 {
                    return 0.0;
                }
                let theta = x[1].atan2(x[0]).rem_euclid(TAU);
                // cone i spans [angles[i], angles[i+1])
                let i = match angles.partition_point(|&a| a <= theta) {
                    0 => angles.len() - 1,
                    p => p - 1,
                };
                let [nx, ny, c] = self.edges[i];
                (nx * x[0] + ny * x[1]) / c
            }
            Layout::Spatial { dirs } => {
                let n = l2(x);
                if n == 0.0 {
                    return 0.0;
                }
                let mut best = (f64::NEG_INFINITY, 0);
                for (j, u) in dirs.iter().enumerate() {
                    let dot: f64 = u.iter().zip(x).map(|(a, b)| a * b).sum();
                    if dot > best.0 {
                        best = (dot, j);
                    }
                }
                n / self.radii[best.1]
            }
        }
    }

    fn inradius(&self) -> f64 {
        match &self.layout {
            Layout::Planar { .. } => self
                .edges
                .iter()
                .map(|[nx, ny, c]| c / (nx * nx + ny * ny).sqrt())
                .fold(f64::INFINITY, f64::min),
            Layout::Spatial { .. } => self.radii.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    fn uniform_grid_size(&self) -> Option<usize> {
        let angles = self.angles()?;
        let k = angles.len();
        let uniform = angles
            .iter()
            .enumerate()
            .all(|(i, &a)| (a - grid_angle(i, k)).abs() < 1e-9);
        uniform.then_some(k)
    }

    /// Average the radii over the orbits of the symmetry group of the
    /// square (coordinate permutations and sign flips).
    ///
    /// Requires a uniform planar grid whose size is a multiple of 8, so the
    /// group maps grid directions to grid directions. Every member of an
    /// orbit receives the identical value.
    pub fn symmetrized(&self) -> Result<Self> {
        let k = match self.uniform_grid_size() {
            Some(k) if k % 8 == 0 => k,
            _ => {
                return Err(Error::config(
                    "radial_table",
                    "symmetrization needs a uniform planar grid with a multiple of 8 directions",
                ))
            }
        };
        let mut radii = self.radii.clone();
        let mut done = vec![false; k];
        for i in 0..k {
            if done[i] {
                continue;
            }
            let orbit = dihedral_orbit(i, k);
            let mean = orbit.iter().map(|&j| self.radii[j]).sum::<f64>() / orbit.len() as f64;
            for &j in &orbit {
                radii[j] = mean;
                done[j] = true;
            }
        }
        let mut t = self.clone();
        t.radii = radii;
        t.rebuild_edges();
        Ok(t)
    }

    /// Largest relative spread of the radii within a dihedral orbit.
    pub fn dihedral_asymmetry(&self) -> Result<f64> {
        let k = match self.uniform_grid_size() {
            Some(k) if k % 8 == 0 => k,
            _ => {
                return Err(Error::config(
                    "radial_table",
                    "asymmetry needs a uniform planar grid with a multiple of 8 directions",
                ))
            }
        };
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let vals: Vec<f64> = dihedral_orbit(i, k).iter().map(|&j| self.radii[j]).collect();
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            worst = worst.max((max - min) / mean);
        }
        Ok(worst)
    }

    /// Replace the planar unit ball by the convex hull of its boundary
    /// points, sampled back on the same directions.
    ///
    /// Returns the new table and the largest relative amount by which a
    /// radius grew.
    pub fn convexified(&self) -> Result<(Self, f64)> {
        let angles = self
            .angles()
            .ok_or_else(|| Error::config("radial_table", "convexification is planar only"))?
            .to_vec();
        let hull = convex_hull(&self.boundary_points());
        let h = hull.len();
        let edges: Vec<[f64; 3]> = (0..h)
            .map(|i| {
                let p = hull[i];
                let q = hull[(i + 1) % h];
                let n = [q[1] - p[1], p[0] - q[0]];
                [n[0], n[1], n[0] * p[0] + n[1] * p[1]]
            })
            .collect();
        let mut gap: f64 = 0.0;
        let mut radii = Vec::with_capacity(angles.len());
        for (a, r) in angles.iter().zip(&self.radii) {
            let u = [a.cos(), a.sin()];
            let g = edges
                .iter()
                .map(|[nx, ny, c]| (nx * u[0] + ny * u[1]) / c)
                .fold(f64::NEG_INFINITY, f64::max);
            let hull_r = (1.0 / g).max(*r);
            gap = gap.max((hull_r - r) / r);
            radii.push(hull_r);
        }
        Ok((RadialTable::planar(angles, radii)?, gap))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match &self.layout {
            Layout::Planar { angles } => {
                wr.write_record(["angle_radians", "radius"])?;
                for (a, r) in angles.iter().zip(&self.radii) {
                    wr.write_record([a.to_string(), r.to_string()])?;
                }
            }
            Layout::Spatial { dirs } => {
                let d = dirs[0].len();
                let mut header: Vec<String> = (1..=d).map(|i| format!("u{i}")).collect();
                header.push("radius".into());
                wr.write_record(&header)?;
                for (u, r) in dirs.iter().zip(&self.radii) {
                    let mut row: Vec<String> = u.iter().map(|v| v.to_string()).collect();
                    row.push(r.to_string());
                    wr.write_record(&row)?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let rows: Vec<Vec<f64>> = rd
            .records()
            .map(|rec| {
                let rec = rec?;
                rec.iter()
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::config("radial_table", format!("bad number `{f}`: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        if headers.len() == 2 {
            let (a, r) = rows.iter().map(|row| (row[0], row[1])).unzip();
            RadialTable::planar(a, r)
        } else if headers.len() >= 4 {
            let d = headers.len() - 1;
            let dirs = rows.iter().map(|row| row[..d].to_vec()).collect();
            let radii = rows.iter().map(|row| row[d]).collect();
            RadialTable::spatial(dirs, radii)
        } else {
            Err(Error::config(
                "radial_table",
                "expected 2 or at least 4 CSV columns",
            ))
        }
    }
}

pub(crate) fn grid_angle(k: usize, count: usize) -> f64 {
    TAU * k as f64 / count as f64
}

/// Grid indices of the images of direction `i` under the dihedral group of
/// the square, for a uniform grid of `k` directions (`k % 8 == 0`).
fn dihedral_orbit(i: usize, k: usize) -> Vec<usize> {
    let q = k / 4;
    let mut out = Vec::with_capacity(8);
    for rot in 0..4 {
        out.push((i + rot * q) % k);
        out.push((k - i % k + rot * q) % k);
    }
    out
}

/// Andrew's monotone chain; counter-clockwise, no collinear points.
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross =
        |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
