use super::{AngularSector, Norm, RegionPredicate, Site};
use crate::error::{Error, Result};

/// Parameters of the red-annular-sector / blue-elsewhere configuration.
///
/// The inner sector `A1` is derived from the outer sector `A2` by shrinking
/// its aperture by exactly `n^(alpha - 1)`.
#[derive(Clone, Debug)]
pub struct StabilizationParams {
    pub n: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub outer_sector: AngularSector,
}

impl StabilizationParams {
    pub fn validate(&self) -> Result<()> {
        let StabilizationParams {
            n,
            delta,
            beta,
            alpha,
            ..
        } = *self;
        if !(n >= 1.0) {
            return Err(Error::config("n", format!("must be >= 1, got {n}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config("delta", format!("must lie in (0, 1), got {delta}")));
        }
        if !(beta > 0.5 && beta < 1.0) {
            return Err(Error::config("beta", format!("must lie in (1/2, 1), got {beta}")));
        }
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::config(
                "alpha",
                format!("must lie in (1/2, 1), got {alpha}"),
            ));
        }
        if !((beta + 1.0) / 2.0 < alpha) {
            return Err(Error::config(
                "alpha",
                format!("need (beta + 1)/2 < alpha, got beta = {beta}, alpha = {alpha}"),
            ));
        }
        if !(n - n.powf(beta) > n / (1.0 + delta)) {
            return Err(Error::config(
                "n",
                format!("need n - n^beta > n/(1 + delta); n = {n} is too small"),
            ));
        }
        if !(self.r1_outer() > n) {
            return Err(Error::config(
                "n",
                format!("need n(1 + delta) - (n + delta n)^beta > n; n = {n} is too small"),
            ));
        }
        if !(self.outer_sector.aperture > self.aperture_gap()) {
            return Err(Error::config(
                "aperture",
                format!(
                    "outer aperture {} must exceed the gap n^(alpha-1) = {}",
                    self.outer_sector.aperture,
                    self.aperture_gap()
                ),
            ));
        }
        Ok(())
    }

    pub fn aperture_gap(&self) -> f64 {
        self.n.powf(self.alpha - 1.0)
    }

    pub fn inner_radius(&self) -> f64 {
        self.n / (1.0 + self.delta)
    }

    pub fn r0_outer(&self) -> f64 {
        self.n - self.n.powf(self.beta)
    }

    pub fn b0_outer(&self) -> f64 {
        self.n + self.n.powf(self.beta)
    }

    pub fn r1_outer(&self) -> f64 {
        let n = self.n;
        n * (1.0 + self.delta) - (n + self.delta * n).powf(self.beta)
    }
}

/// The four site sets of the stabilization experiment. `B1` is infinite and
/// is returned as a predicate bounded by the run box.
#[derive(Clone, Debug)]
pub struct StabilizationSets {
    pub params: StabilizationParams,
    pub norm: Norm,
    pub inner_sector: AngularSector,
    pub r0: Vec<Site>,
    pub b0: Vec<Site>,
    pub r1: Vec<Site>,
    pub b1: RegionPredicate,
}

fn classify_r0(p: &StabilizationParams, nu: &Norm, x: &[f64]) -> bool {
    let r = nu.eval(x);
    r > p.inner_radius() && r <= p.r0_outer() && p.outer_sector.contains(nu, x).unwrap_or(false)
}

fn classify_b0(p: &StabilizationParams, nu: &Norm, x: &[f64]) -> bool {
    let r = nu.eval(x);
    r <= p.inner_radius() || (r <= p.b0_outer() && !p.outer_sector.contains(nu, x).unwrap_or(false))
}

fn classify_b1(n: f64, a1: &AngularSector, nu: &Norm, x: &[f64]) -> bool {
    nu.eval(x) <= n || !a1.contains(nu, x).unwrap_or(false)
}

fn classify_r1(p: &StabilizationParams, a1: &AngularSector, nu: &Norm, x: &[f64]) -> bool {
    let r = nu.eval(x);
    r > p.n && r <= p.r1_outer() && a1.contains(nu, x).unwrap_or(false)
}

impl StabilizationSets {
    pub fn in_r0(&self, x: &[f64]) -> bool {
        classify_r0(&self.params, &self.norm, x)
    }

    pub fn in_b0(&self, x: &[f64]) -> bool {
        classify_b0(&self.params, &self.norm, x)
    }

    pub fn in_r1(&self, x: &[f64]) -> bool {
        classify_r1(&self.params, &self.inner_sector, &self.norm, x)
    }

    pub fn in_b1(&self, x: &[f64]) -> bool {
        classify_b1(self.params.n, &self.inner_sector, &self.norm, x)
    }
}

/// Build `R0, B0, R1, B1` for the given parameters. Lattice sets are listed
/// in lexicographic order; `B1` is bounded by the cube of half-width
/// `run_half_width`.
pub fn build_stabilization_sets(
    params: &StabilizationParams,
    norm: &Norm,
    run_half_width: i64,
) -> Result<StabilizationSets> {
    params.validate()?;
    let dim = params.outer_sector.center.len();
    let inner_sector = params.outer_sector.shrink(params.aperture_gap())?;
    let reach = params.b0_outer().max(params.r1_outer()) * norm.max_euclidean_radius(dim);
    let half = reach.ceil() as i64 + 1;
    let bbox = RegionPredicate::new(vec![-(half as f64); dim], vec![half as f64; dim], |_| true);

    let mut r0 = Vec::new();
    let mut b0 = Vec::new();
    let mut r1 = Vec::new();
    for site in bbox.lattice_sites() {
        let x = site.to_real();
        if classify_r0(params, norm, &x) {
            r0.push(site);
        } else if classify_b0(params, norm, &x) {
            b0.push(site);
        } else if classify_r1(params, &inner_sector, norm, &x) {
            r1.push(site);
        }
    }
    let (n, a1, nu) = (params.n, inner_sector.clone(), norm.clone());
    let w = run_half_width as f64;
    let b1 = RegionPredicate::new(vec![-w; dim], vec![w; dim], move |x| classify_b1(n, &a1, &nu, x));
    Ok(StabilizationSets {
        params: params.clone(),
        norm: norm.clone(),
        inner_sector,
        r0,
        b0,
        r1,
        b1,
    })
}

/// Split an occupied set into the part with positive first coordinate and
/// the rest.
pub fn slice_richardson(z: &[Site]) -> Result<(Vec<Site>, Vec<Site>)> {
    if z.is_empty() {
        return Err(Error::domain("cannot slice an empty set"));
    }
    Ok(z.iter().cloned().partition(|s| s.coords()[0] > 0))
}
