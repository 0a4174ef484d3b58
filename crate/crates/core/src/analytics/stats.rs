//! Small statistics helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Binomial proportion with its standard error and exact interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub hits: u64,
    pub n: u64,
    pub p: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    /// 95% Clopper-Pearson interval.
    pub fn new(hits: u64, n: u64) -> Self {
        assert!(hits <= n);
        if n == 0 {
            return Proportion {
                hits,
                n,
                p: 0.0,
                se: 0.0,
                ci_lo: 0.0,
                ci_hi: 1.0,
            };
        }
        let p = hits as f64 / n as f64;
        let (lo, hi) = clopper_pearson(hits, n, 0.05);
        Proportion {
            hits,
            n,
            p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
            ci_lo: lo,
            ci_hi: hi,
        }
    }
}

pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf)
            .unwrap()
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Least-squares slope of `y` on `x`; `None` with fewer than two distinct x.
pub fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// z-score of an empirical frequency against a known probability. When
/// `p` is 0 or 1 the score is 0 if the frequency matches and infinite
/// otherwise.
pub fn z_score(freq: f64, p: f64, n: u64) -> f64 {
    let se = (p * (1.0 - p) / n as f64).sqrt();
    if se == 0.0 {
        if (freq - p).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (freq - p) / se
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_known_values() {
        // 0 of 10: upper limit 1 - 0.025^(1/10)
        let (lo, hi) = clopper_pearson(0, 10, 0.05);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
        let (lo, hi) = clopper_pearson(5, 10, 0.05);
        assert!((lo - 0.18709).abs() < 1e-4 && (hi - 0.81291).abs() < 1e-4);
    }

    #[test]
    fn slope_and_moments() {
        assert_eq!(slope(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]), Some(2.0));
        assert_eq!(slope(&[(1.0, 1.0)]), None);
        assert_eq!(variance(&[1.0, 3.0]), 2.0);
        assert_eq!(z_score(0.0, 0.0, 10), 0.0);
        assert!(z_score(0.1, 0.0, 10).is_infinite());
    }
}
