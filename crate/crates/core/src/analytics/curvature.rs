//! Uniform-curvature diagnostics for a planar shape given as a radial table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Norm;
use crate::media::SeedSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub x: [f64; 2],
    pub px: [f64; 2],
    pub y: [f64; 2],
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvatureReport {
    /// Per boundary point: radius of the smallest Euclidean ball through
    /// it that contains the shape, infinite where the boundary is flat.
    pub radii: Vec<f64>,
    pub rho_hat: f64,
    pub flat_points: Vec<usize>,
    /// Empirical infimum of `(|x - y| - |x - pi x|) / |pi x - y|^2`.
    pub c_hat: f64,
    pub c_argmin: Option<Triple>,
    /// Samples with a non-positive ratio, at most ten.
    pub violations: Vec<Triple>,
    pub half_diameter: f64,
}

impl CurvatureReport {
    pub fn flat(&self) -> bool {
        !self.flat_points.is_empty()
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Radius of the smallest ball with `z` on its surface, centred on the
/// inward normal `n` (unit) from `z`, containing every point of `pts`.
/// Infinite when some point lies on or beyond the tangent line.
fn tangent_ball_radius(z: [f64; 2], n: [f64; 2], pts: &[[f64; 2]], tol: f64) -> f64 {
    let mut r: f64 = 0.0;
    for &q in pts {
        let v = sub(q, z);
        let len2 = dot(v, v);
        if len2 == 0.0 {
            continue;
        }
        // |q - (z + r n)|^2 <= r^2  <=>  |v|^2 <= 2 r (v . n)
        let h = dot(v, n);
        if h <= tol * len2.sqrt() {
            return f64::INFINITY;
        }
        r = r.max(len2 / (2.0 * h));
    }
    r
}

/// `(|x - y| - |x - pi x|) / |pi x - y|^2` for `x` outside and `y` inside
/// the unit ball of `norm`; `None` when `y = pi x`.
pub fn gap_ratio(norm: &Norm, x: [f64; 2], y: [f64; 2]) -> Option<f64> {
    let g = norm.eval(&x);
    let px = [x[0] / g, x[1] / g];
    let d = norm.eval(&sub(px, y));
    (d > 1e-12).then(|| (norm.eval(&sub(x, y)) - norm.eval(&sub(x, px))) / (d * d))
}

/// Boundary points of the unit ball: the table's own points for a radial
/// norm, otherwise `directions` equally spaced directions.
fn boundary_points(norm: &Norm, directions: usize) -> Result<Vec<[f64; 2]>> {
    match norm {
        Norm::Radial(t) => {
            if t.angles().is_none() {
                return Err(Error::domain("curvature probe needs a planar shape"));
            }
            Ok(t.boundary_points())
        }
        _ => {
            if directions < 8 {
                return Err(Error::config("directions", "need at least 8 boundary points"));
            }
            Ok((0..directions)
                .map(|k| {
                    let a = crate::lattice::grid_angle(k, directions);
                    let u = [a.cos(), a.sin()];
                    let g = norm.eval(&u);
                    [u[0] / g, u[1] / g]
                })
                .collect())
        }
    }
}

/// Probe a planar shape, the unit ball of `norm`: tangent-ball radii at
/// boundary points and a sampled estimate of the quadratic gap constant.
/// Pairs with `|pi x - y| < min_separation` are not sampled, which lets a
/// tabulated (polygonal) shape be probed above its grid scale.
pub fn curvature_probe(
    norm: &Norm,
    directions: usize,
    samples: usize,
    min_separation: f64,
    seed: &SeedSpec,
) -> Result<CurvatureReport> {
    let pts = boundary_points(norm, directions)?;
    let k = pts.len();
    let scale = pts.iter().map(|p| dot(*p, *p).sqrt()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;

    let mut radii = Vec::with_capacity(k);
    let mut flat_points = Vec::new();
    for i in 0..k {
        let (prev, next) = (pts[(i + k - 1) % k], pts[(i + 1) % k]);
        // inward normal from the central difference of the neighbours
        let d = sub(next, prev);
        let len = dot(d, d).sqrt();
        let n = [-d[1] / len, d[0] / len];
        let r = tangent_ball_radius(pts[i], n, &pts, tol);
        if r.is_infinite() {
            flat_points.push(i);
        }
        radii.push(r);
    }
    let rho_hat = radii.iter().cloned().fold(0.0, f64::max);
    let mut half_diameter: f64 = 0.0;
    for a in &pts {
        for b in &pts {
            let v = sub(*a, *b);
            half_diameter = half_diameter.max(dot(v, v).sqrt() / 2.0);
        }
    }

    let mut rng = seed.rng("curvature");
    let mut c_hat = f64::INFINITY;
    let mut c_argmin = None;
    let mut violations = Vec::new();
    for s in 0..samples {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let u = [theta.cos(), theta.sin()];
        let g = norm.eval(&u);
        let px = [u[0] / g, u[1] / g];
        let x = {
            let f = 1.0 + rng.random_range(1e-3..2.0f64);
            [px[0] * f, px[1] * f]
        };
        // half the samples on the boundary, half inside
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let w = [phi.cos(), phi.sin()];
        let gw = norm.eval(&w);
        let shrink = if s % 2 == 0 {
            1.0
        } else {
            rng.random_range(0.0..1.0f64).sqrt()
        };
        let y = [w[0] / gw * shrink, w[1] / gw * shrink];
        if norm.dist(&px, &y) < min_separation {
            continue;
        }
        let Some(ratio) = gap_ratio(norm, x, y) else {
            continue;
        };
        let t = Triple { x, px, y, ratio };
        if ratio < c_hat {
            c_hat = ratio;
            c_argmin = Some(t);
        }
        if ratio <= 0.0 && violations.len() < 10 {
            violations.push(t);
        }
    }
    Ok(CurvatureReport {
        radii,
        rho_hat,
        flat_points,
        c_hat,
        c_argmin,
        violations,
        half_diameter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::RadialTable;

    #[test]
    fn disk_has_unit_radius() {
        let r = curvature_probe(&Norm::L2, 256, 20_000, 0.0, &SeedSpec::new(1, "c", 0)).unwrap();
        assert!(!r.flat());
        assert!((r.rho_hat - 1.0).abs() < 0.02, "rho {}", r.rho_hat);
        assert!(r.radii.iter().all(|&x| (x - 1.0).abs() < 0.02));
        assert!(r.c_hat > 0.0 && r.c_hat < 0.6, "c {}", r.c_hat);
        assert!(r.violations.is_empty());
        assert!(r.rho_hat >= r.half_diameter - 1e-9);
    }

    #[test]
    fn square_is_flat() {
        let r = curvature_probe(&Norm::Linf, 256, 2_000, 0.0, &SeedSpec::new(1, "c", 0)).unwrap();
        assert!(r.flat());
        assert!(r.rho_hat.is_infinite());
        // the midpoint of the right side is flat
        assert!(r.flat_points.contains(&0));
    }

    #[test]
    fn disk_gap_ratio_tends_to_one_half() {
        // x far out on the first axis, y on the circle at angle phi:
        // ratio = (|x - y| - (R - 1)) / (2 - 2 cos phi) -> 1/2
        let nu = Norm::L2;
        let phi = 0.01f64;
        let r = gap_ratio(&nu, [1e6, 0.0], [phi.cos(), phi.sin()]).unwrap();
        assert!((r - 0.5).abs() < 1e-4, "{r}");
        assert_eq!(gap_ratio(&nu, [2.0, 0.0], [1.0, 0.0]), None);
    }

    #[test]
    fn ellipse_radius_matches_closed_form() {
        // x^2/a^2 + y^2/b^2 = 1 with a = 2, b = 1: the largest radius of
        // curvature is a^2 / b = 4 at the ends of the minor axis, and the
        // smallest containing ball there has radius a^2/b as well
        let (a, b) = (2.0f64, 1.0f64);
        let e = RadialTable::planar_from_fn(1024, |t| {
            1.0 / ((t.cos() / a).powi(2) + (t.sin() / b).powi(2)).sqrt()
        })
        .unwrap();
        let r = curvature_probe(&Norm::Radial(e), 0, 10, 0.0, &SeedSpec::new(1, "e", 0)).unwrap();
        assert!((r.rho_hat - a * a / b).abs() < 0.05, "rho {}", r.rho_hat);
    }

    #[test]
    fn polygon_facets_show_up_unless_separated() {
        let poly = Norm::Radial(RadialTable::constant(64, 1.0).unwrap());
        let seed = SeedSpec::new(3, "p", 0);
        let fine = curvature_probe(&poly, 0, 20_000, 0.0, &seed).unwrap();
        let coarse = curvature_probe(&poly, 0, 20_000, 0.3, &seed).unwrap();
        assert!(fine.c_hat < 0.05);
        assert!(coarse.c_hat > 0.3, "c {}", coarse.c_hat);
        assert!(!fine.flat());
    }
}
