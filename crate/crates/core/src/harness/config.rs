//! Run configuration: a strict JSON document, one params block per experiment.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analytics::coexist::CoexistParams;
use crate::analytics::oned::OneDParams;
use crate::analytics::shape::{estimate_shape, isotropic_norm, ShapeParams};
use crate::dual::InvasionParams;
use crate::error::{Error, Result};
use crate::fpp::KestenParams;
use crate::lattice::{Norm, RadialTable, Site};
use crate::media::SeedSpec;
use crate::oracle::{Engine, Model};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Shape,
    Curvature,
    Stabilize,
    Nested,
    Coexist,
    Dual,
    OracleCheck,
    FppDev,
    Oned,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Shape => "shape",
            ExperimentKind::Curvature => "curvature",
            ExperimentKind::Stabilize => "stabilize",
            ExperimentKind::Nested => "nested",
            ExperimentKind::Coexist => "coexist",
            ExperimentKind::Dual => "dual",
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::FppDev => "fpp-dev",
            ExperimentKind::Oned => "oned",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where an experiment gets its norm from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    L1 {},
    L2 {},
    Linf {},
    /// Disk of radius `speed` lattice units per unit time.
    Isotropic {
        speed: f64,
        #[serde(default = "default_directions")]
        directions: usize,
    },
    /// A radial table CSV as written by the shape experiment.
    Table {
        path: PathBuf,
    },
    /// Estimate the Richardson shape first.
    Estimate {
        t: f64,
        reps: u64,
        #[serde(default = "default_directions")]
        directions: usize,
    },
}

fn default_directions() -> usize {
    256
}

impl NormSpec {
    pub fn resolve(&self, seed: &SeedSpec) -> Result<Norm> {
        match self {
            NormSpec::L1 {} => Ok(Norm::L1),
            NormSpec::L2 {} => Ok(Norm::L2),
            NormSpec::Linf {} => Ok(Norm::Linf),
            NormSpec::Isotropic { speed, directions } => isotropic_norm(*speed, *directions),
            NormSpec::Table { path } => {
                let f = std::fs::File::open(path)
                    .map_err(|e| Error::config("norm.path", format!("{}: {e}", path.display())))?;
                Ok(Norm::Radial(RadialTable::read_csv(f)?))
            }
            NormSpec::Estimate { t, reps, directions } => {
                let p = ShapeParams {
                    dimension: 2,
                    t: *t,
                    reps: *reps,
                    directions: *directions,
                    sandwich_eps: 0.1,
                    fpp_n: None,
                    fpp_reps: 0,
                };
                let s = SeedSpec::new(seed.master_seed, format!("{}/norm", seed.experiment), 0);
                estimate_shape(&p, &s)?.norm()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    Competition,
    Richardson,
    Voter,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotSpec {
    #[serde(default)]
    pub times: Vec<f64>,
    /// Take one image when growth first reaches `|x|_inf >= region_hit`,
    /// then stop the run.
    #[serde(default)]
    pub region_hit: Option<i64>,
    /// Image window `[-half, half]^2`; defaults to the trigger region or
    /// the run box.
    #[serde(default)]
    pub half: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub model: SimModel,
    #[serde(default)]
    pub red: Vec<Site>,
    #[serde(default)]
    pub blue: Vec<Site>,
    pub t_max: f64,
    #[serde(default = "one")]
    pub reps: u64,
    #[serde(default)]
    pub stop_on_extinction: bool,
    /// Voter only: torus side and the chance a site starts red.
    #[serde(default)]
    pub torus_side: Option<Vec<usize>>,
    #[serde(default)]
    pub red_fraction: Option<f64>,
    /// Images of replicate 0.
    #[serde(default)]
    pub snapshots: Option<SnapshotSpec>,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    pub norm: NormSpec,
    #[serde(default = "default_directions")]
    pub directions: usize,
    pub samples: usize,
    #[serde(default)]
    pub min_separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizeConfig {
    pub ns: Vec<f64>,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(default = "default_center")]
    pub center: Vec<f64>,
    #[serde(default = "default_aperture")]
    pub aperture: f64,
    pub reps: u64,
    pub norm: NormSpec,
}

fn default_center() -> Vec<f64> {
    vec![1.0, 0.0]
}

fn default_aperture() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NestedConfig {
    pub t0: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub t_max: f64,
    pub reps: u64,
    pub norm: NormSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Path,
    Cycle,
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub graph: GraphKind,
    /// Sites for a path or cycle, `[w, h]` for a grid.
    pub size: Vec<usize>,
    pub model: Model,
    /// One character per site: `.`, `R` or `B`.
    pub init: String,
    pub t: f64,
    pub reps: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub engines: Vec<Engine>,
}

fn default_tol() -> f64 {
    1e-9
}

/// Typed parameters, one variant per experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    Simulate(SimulateParams),
    Shape(ShapeParams),
    Curvature(CurvatureConfig),
    Stabilize(StabilizeConfig),
    Nested(NestedConfig),
    Coexist(CoexistParams),
    Dual(InvasionParams),
    OracleCheck(OracleConfig),
    FppDev(KestenParams),
    Oned(OneDParams),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    experiment: Option<ExperimentKind>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    box_hit_tolerance: Option<f64>,
    params: serde_json::Value,
    // written into manifests; accepted and ignored on input
    #[serde(default)]
    #[allow(dead_code)]
    tool: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    /// Largest tolerated fraction of replicates that hit the box.
    pub box_hit_tolerance: f64,
    pub params: Params,
}

pub const DEFAULT_BOX_HIT_TOLERANCE: f64 = 0.05;

fn typed<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::config("params", e.to_string()))
}

impl RunConfig {
    /// Parse a config document. `kind` (from the command line) must agree
    /// with the document's `experiment` when both are given.
    pub fn parse(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        let experiment = match (raw.experiment, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::config(
                    "experiment",
                    format!("config is for `{a}` but the command is `{b}`"),
                ))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::config("experiment", "missing experiment kind")),
        };
        let tol = raw.box_hit_tolerance.unwrap_or(DEFAULT_BOX_HIT_TOLERANCE);
        if !(0.0..=1.0).contains(&tol) {
            return Err(Error::config("box_hit_tolerance", "must lie in [0, 1]"));
        }
        if raw.workers == Some(0) {
            return Err(Error::config("workers", "must be positive"));
        }
        let v = raw.params;
        let params = match experiment {
            ExperimentKind::Simulate => Params::Simulate(typed(v)?),
            ExperimentKind::Shape => Params::Shape(typed(v)?),
            ExperimentKind::Curvature => Params::Curvature(typed(v)?),
            ExperimentKind::Stabilize => Params::Stabilize(typed(v)?),
            ExperimentKind::Nested => Params::Nested(typed(v)?),
            ExperimentKind::Coexist => Params::Coexist(typed(v)?),
            ExperimentKind::Dual => Params::Dual(typed(v)?),
            ExperimentKind::OracleCheck => Params::OracleCheck(typed(v)?),
            ExperimentKind::FppDev => Params::FppDev(typed(v)?),
            ExperimentKind::Oned => Params::Oned(typed(v)?),
        };
        Ok(RunConfig {
            experiment,
            seed: raw.seed.unwrap_or(0),
            workers: raw.workers,
            out: raw.out,
            box_hit_tolerance: tol,
            params,
        })
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.seed, self.experiment.name(), 0)
    }

    /// The resolved config as written to `manifest.json`. Worker count and
    /// output directory are left out so they cannot change any output byte.
    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": TOOL,
            "version": VERSION,
            "experiment": self.experiment,
            "seed": self.seed,
            "box_hit_tolerance": self.box_hit_tolerance,
            "params": self.params,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COEXIST: &str = r#"{
        "experiment": "coexist",
        "seed": 7,
        "params": {"red": [[0, 0]], "blue": [[1, 0]], "t_max": 300, "reps": 500}
    }"#;

    #[test]
    fn minimal_coexist_parses_with_defaults() {
        let c = RunConfig::parse(COEXIST, None).unwrap();
        assert_eq!(c.experiment, ExperimentKind::Coexist);
        assert_eq!(c.seed, 7);
        assert_eq!(c.box_hit_tolerance, DEFAULT_BOX_HIT_TOLERANCE);
        let Params::Coexist(p) = &c.params else { panic!() };
        assert_eq!(p.hist_bins, 10);
        assert_eq!(p.red, vec![Site::from([0, 0])]);
    }

    #[test]
    fn manifest_reparses_to_the_same_config() {
        let c = RunConfig::parse(COEXIST, None).unwrap();
        let again = RunConfig::parse(&c.manifest().to_string(), None).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e =
            RunConfig::parse(r#"{"experiment": "coexist", "params": {}, "colour": 1}"#, None).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = RunConfig::parse(
            r#"{"experiment": "coexist", "params": {"red": [[0,0]], "blue": [[1,0]], "t_max": 1, "reps": 1, "tmax": 2}}"#,
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("tmax"), "{e}");
        let e = RunConfig::parse(
            r#"{"experiment": "nested", "params": {"t0": 50, "delta": 0.5, "beta": 0.6, "alpha": 0.85, "t_max": 1, "reps": 1, "norm": {"kind": "l2", "speed": 1}}}"#,
            None,
        )
        .unwrap_err();
        assert!(e.to_string().contains("speed"), "{e}");
    }

    #[test]
    fn command_and_document_must_agree() {
        assert!(RunConfig::parse(COEXIST, Some(ExperimentKind::Coexist)).is_ok());
        let e = RunConfig::parse(COEXIST, Some(ExperimentKind::Shape)).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "experiment"));
        let bare = r#"{"params": {"red": [[0,0]], "blue": [[1,0]], "t_max": 1, "reps": 1}}"#;
        assert!(RunConfig::parse(bare, Some(ExperimentKind::Coexist)).is_ok());
        assert!(RunConfig::parse(bare, None).is_err());
    }

    #[test]
    fn norm_specs() {
        let s = SeedSpec::new(1, "x", 0);
        let n: NormSpec = serde_json::from_str(r#"{"kind": "isotropic", "speed": 2.0}"#).unwrap();
        let nu = n.resolve(&s).unwrap();
        assert!((nu.eval(&[2.0, 0.0]) - 1.0).abs() < 1e-12);
        let n: NormSpec = serde_json::from_str(r#"{"kind": "table", "path": "/nonexistent.csv"}"#).unwrap();
        assert!(matches!(n.resolve(&s), Err(Error::Config { .. })));
    }
}
