//! Orchestration: resolve a config, run it on a worker pool and write
//! `manifest.json`, `records.jsonl`, `summary.csv` and any snapshots.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use config::{ExperimentKind, NormSpec, Params, RunConfig, SimModel, SimulateParams, SnapshotSpec};

use crate::analytics::coexist::coexistence_batch;
use crate::analytics::curvature::curvature_probe;
use crate::analytics::nested::nested_sector_monitor;
use crate::analytics::oned::oned_interface_stats;
use crate::analytics::shape::estimate_shape;
use crate::analytics::stabilize::{fit_bound, stabilization_experiment, StabilizeParams};
use crate::analytics::stats::Proportion;
use crate::dual::invasion_experiment;
use crate::engine::snapshot::write_ppm;
use crate::engine::{
    box_for, run_configuration, run_voter, CellState, Configuration, RunRecord, StopReason, StopRule,
};
use crate::error::{Error, Result};
use crate::fpp::kesten_experiment;
use crate::lattice::Site;
use crate::media::SeedSpec;
use crate::oracle::{compare_engine, parse_cells, TinyGraph};
use crate::topology::{Topology, Torus};
use config::{GraphKind, OracleConfig};

/// Environment variable supplying the default worker count.
pub const WORKERS_ENV: &str = "COMPETITION_LAB_WORKERS";

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub replicates: u64,
    pub box_hits: u64,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn box_hit_fraction(&self) -> f64 {
        if self.replicates == 0 {
            0.0
        } else {
            self.box_hits as f64 / self.replicates as f64
        }
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, v)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn jsonl<T: Serialize>(&mut self, records: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = self.create("records.jsonl")?;
        for r in records {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    fn csv<T: Serialize>(&mut self, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create("summary.csv")?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pick the worker count: explicit value, then the environment, then 1.
pub fn resolve_workers(cli: Option<usize>, cfg: &RunConfig) -> Result<usize> {
    if let Some(k) = cli.or(cfg.workers) {
        return if k == 0 {
            Err(Error::config("workers", "must be positive"))
        } else {
            Ok(k)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(Error::config(
                WORKERS_ENV,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
        Err(_) => Ok(1),
    }
}

/// Run `cfg` on `workers` threads, writing into `out_dir`.
pub fn run(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<RunOutcome> {
    if workers == 0 {
        return Err(Error::config("workers", "must be positive"));
    }
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::domain(format!("cannot start worker pool: {e}")))?;
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    out.json("manifest.json", &cfg.manifest())?;
    let seed = cfg.seed_spec();
    let mut warnings = Vec::new();
    let (replicates, box_hits) = pool.install(|| dispatch(cfg, &seed, &mut out, &mut warnings))?;
    Ok(RunOutcome {
        out_dir: out_dir.to_path_buf(),
        replicates,
        box_hits,
        files: out.files,
        warnings,
    })
}

fn dispatch(
    cfg: &RunConfig,
    seed: &SeedSpec,
    out: &mut Output,
    warnings: &mut Vec<String>,
) -> Result<(u64, u64)> {
    match &cfg.params {
        Params::Simulate(p) => simulate(p, seed, out, warnings),
        Params::Shape(p) => {
            let est = estimate_shape(p, seed)?;
            out.jsonl([&est])?;
            out.csv((0..est.angles.len()).map(|k| ShapeRow {
                angle: est.angles[k],
                speed: est.speed[k],
                speed_se: est.speed_se[k],
                radius: est.radii[k],
            }))?;
            if let crate::lattice::Norm::Radial(table) = est.norm()? {
                table.write_csv(out.create("shape.csv")?)?;
            }
            Ok((p.reps, est.box_hits))
        }
        Params::Curvature(p) => {
            let nu = p.norm.resolve(seed)?;
            let r = curvature_probe(&nu, p.directions, p.samples, p.min_separation, seed)?;
            out.jsonl([&r])?;
            let flat: std::collections::HashSet<usize> = r.flat_points.iter().copied().collect();
            out.csv(r.radii.iter().enumerate().map(|(i, &radius)| CurvatureRow {
                point: i,
                radius,
                flat: flat.contains(&i),
            }))?;
            Ok((0, 0))
        }
        Params::Stabilize(p) => {
            let nu = p.norm.resolve(seed)?;
            let sp = StabilizeParams {
                ns: p.ns.clone(),
                delta: p.delta,
                beta: p.beta,
                alpha: p.alpha,
                center: p.center.clone(),
                aperture: p.aperture,
                reps: p.reps,
            };
            let outcomes = stabilization_experiment(&sp, &nu, seed)?;
            out.jsonl(&outcomes)?;
            out.csv(outcomes.iter().map(|o| StabilizeRow {
                n: o.n,
                reps: o.reps,
                box_hits: o.box_hits,
                fail: o.fail.p,
                fail_se: o.fail.se,
                fail_ci_lo: o.fail.ci_lo,
                fail_ci_hi: o.fail.ci_hi,
                blue_in_r1: o.blue_in_r1.p,
                blue_escaped: o.blue_escaped.p,
                red_incomplete: o.red_incomplete.p,
                r0: o.geometry.r0,
                b0: o.geometry.b0,
                r1: o.geometry.r1,
                b0_in_b1: o.geometry.b0_in_b1,
            }))?;
            let fit = fit_bound(&outcomes, p.center.len());
            out.json("fit.json", &serde_json::json!({ "c1_c2": fit }))?;
            let hits = outcomes.iter().map(|o| o.box_hits).sum();
            Ok((p.reps * outcomes.len() as u64, hits))
        }
        Params::Nested(p) => {
            let nu = p.norm.resolve(seed)?;
            let np = crate::analytics::nested::NestedParams {
                t0: p.t0,
                delta: p.delta,
                beta: p.beta,
                alpha: p.alpha,
                t_max: p.t_max,
                reps: p.reps,
            };
            let (summary, traces) = nested_sector_monitor(&np, &nu, seed)?;
            out.jsonl(&traces)?;
            let mut rows: Vec<ProportionRow> = summary
                .stage_hold
                .iter()
                .enumerate()
                .map(|(k, q)| ProportionRow::new(format!("stage_{k}"), None, q))
                .collect();
            rows.push(ProportionRow::new("all_stages".into(), None, &summary.all_hold));
            out.csv(rows)?;
            Ok((summary.reps, summary.box_hits))
        }
        Params::Coexist(p) => {
            let (s, records) = coexistence_batch(p, seed)?;
            out.jsonl(&records)?;
            let mut rows = vec![
                ProportionRow::new("both_alive".into(), Some(p.t_max), &s.both_alive),
                ProportionRow::new("red_survives".into(), Some(p.t_max), &s.red_survives),
                ProportionRow::new("blue_survives".into(), Some(p.t_max), &s.blue_survives),
            ];
            for (t, q) in &s.both_alive_by_t {
                rows.push(ProportionRow::new("both_alive_at".into(), Some(*t), q));
            }
            out.csv(rows)?;
            out.json("summary.json", &s)?;
            Ok((s.reps, s.box_hits))
        }
        Params::Dual(p) => {
            let r = invasion_experiment(p, seed)?;
            out.jsonl(&r.rows)?;
            r.write_csv(out.create("summary.csv")?)?;
            Ok((0, 0))
        }
        Params::OracleCheck(p) => oracle_check(p, seed, out),
        Params::FppDev(p) => {
            let r = kesten_experiment(p, seed)?;
            out.jsonl([&r])?;
            r.write_csv(out.create("summary.csv")?)?;
            Ok((0, 0))
        }
        Params::Oned(p) => {
            let rows = oned_interface_stats(p, seed)?;
            out.jsonl(&rows)?;
            out.csv(&rows)?;
            Ok((0, 0))
        }
    }
}

#[derive(Serialize)]
struct ShapeRow {
    angle: f64,
    speed: f64,
    speed_se: f64,
    radius: f64,
}

#[derive(Serialize)]
struct CurvatureRow {
    point: usize,
    radius: f64,
    flat: bool,
}

#[derive(Serialize)]
struct StabilizeRow {
    n: f64,
    reps: u64,
    box_hits: u64,
    fail: f64,
    fail_se: f64,
    fail_ci_lo: f64,
    fail_ci_hi: f64,
    blue_in_r1: f64,
    blue_escaped: f64,
    red_incomplete: f64,
    r0: usize,
    b0: usize,
    r1: usize,
    b0_in_b1: bool,
}

#[derive(Serialize)]
struct ProportionRow {
    metric: String,
    t: Option<f64>,
    hits: u64,
    n: u64,
    p: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
}

impl ProportionRow {
    fn new(metric: String, t: Option<f64>, q: &Proportion) -> Self {
        ProportionRow {
            metric,
            t,
            hits: q.hits,
            n: q.n,
            p: q.p,
            se: q.se,
            ci_lo: q.ci_lo,
            ci_hi: q.ci_hi,
        }
    }
}

#[derive(Serialize)]
struct SimulateRow {
    replicate: u64,
    stop: StopReason,
    t_end: f64,
    events: u64,
    red: usize,
    blue: usize,
    red_extinct: Option<f64>,
    blue_extinct: Option<f64>,
}

#[derive(Serialize)]
struct OracleCsvRow<'a> {
    engine: crate::oracle::Engine,
    state: &'a str,
    prob_oracle: f64,
    freq_mc: f64,
    z: f64,
}

fn oracle_check(p: &OracleConfig, seed: &SeedSpec, out: &mut Output) -> Result<(u64, u64)> {
    let size = |k: usize| {
        p.size
            .get(k)
            .copied()
            .ok_or_else(|| Error::config("size", "missing dimension"))
    };
    let graph = match p.graph {
        GraphKind::Path => TinyGraph::path(size(0)?)?,
        GraphKind::Cycle => TinyGraph::cycle(size(0)?)?,
        GraphKind::Grid => TinyGraph::grid(size(0)?, size(1)?)?,
    };
    let init = parse_cells(&p.init)?;
    if init.len() != graph.n_sites() {
        return Err(Error::config(
            "init",
            format!("{} cells for a graph with {} sites", init.len(), graph.n_sites()),
        ));
    }
    let reports = p
        .engines
        .iter()
        .map(|&e| compare_engine(&graph, p.model, &init, p.t, p.reps, p.tol, e, seed))
        .collect::<Result<Vec<_>>>()?;
    out.jsonl(&reports)?;
    out.csv(reports.iter().flat_map(|r| {
        r.rows.iter().map(move |row| OracleCsvRow {
            engine: r.engine,
            state: &row.state,
            prob_oracle: row.prob_oracle,
            freq_mc: row.freq_mc,
            z: row.z,
        })
    }))?;
    Ok((0, 0))
}

/// File name of a snapshot taken at time `t`.
pub fn snapshot_name(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("snap_t{t:.0}.ppm")
    } else {
        format!("snap_t{t:.3}.ppm")
    }
}

fn validate_simulate(p: &SimulateParams) -> Result<()> {
    if !(p.t_max >= 0.0 && p.t_max.is_finite()) {
        return Err(Error::config("t_max", "must be finite and nonnegative"));
    }
    if p.reps == 0 {
        return Err(Error::config("reps", "must be positive"));
    }
    match p.model {
        SimModel::Voter => {
            if p.torus_side.is_none() {
                return Err(Error::config("torus_side", "the voter model needs a torus side"));
            }
            if !p.red_fraction.is_some_and(|f| (0.0..=1.0).contains(&f)) {
                return Err(Error::config("red_fraction", "need a value in [0, 1]"));
            }
            if p.snapshots.is_some() {
                return Err(Error::config("snapshots", "snapshots are for lattice runs"));
            }
        }
        SimModel::Richardson | SimModel::Competition => {
            if p.red.is_empty() && p.blue.is_empty() {
                return Err(Error::config("red", "need at least one initial site"));
            }
            if p.model == SimModel::Richardson && !p.blue.is_empty() {
                return Err(Error::config("blue", "Richardson growth has a single colour"));
            }
            if p.torus_side.is_some() || p.red_fraction.is_some() {
                return Err(Error::config(
                    "torus_side",
                    "only the voter model runs on a torus",
                ));
            }
            let d = p.red.iter().chain(&p.blue).next().unwrap().dim();
            if p.red.iter().chain(&p.blue).any(|s| s.dim() != d) {
                return Err(Error::config("red", "all sites must have the same dimension"));
            }
            if let Some(s) = &p.snapshots {
                if d != 2 {
                    return Err(Error::config("snapshots", "snapshots need d = 2"));
                }
                if s.times.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
                    return Err(Error::config(
                        "snapshots.times",
                        "times must be finite and nonnegative",
                    ));
                }
                if s.region_hit.is_some_and(|h| h < 1) || s.half.is_some_and(|h| h < 0) {
                    return Err(Error::config(
                        "snapshots",
                        "region and window sizes must be positive",
                    ));
                }
            }
        }
    }
    Ok(())
}

fn simulate(
    p: &SimulateParams,
    seed: &SeedSpec,
    out: &mut Output,
    warnings: &mut Vec<String>,
) -> Result<(u64, u64)> {
    validate_simulate(p)?;
    let snap = p.snapshots.clone().unwrap_or_default();
    let rule = StopRule {
        t_max: p.t_max,
        stop_on_extinction: p.stop_on_extinction,
        region_hit: snap.region_hit,
    };
    let (topo, base) = match p.model {
        SimModel::Voter => {
            let side = p.torus_side.clone().unwrap();
            (Arc::new(Topology::Torus(Torus::new(side)?)), None)
        }
        _ => {
            let all: Vec<Site> = p.red.iter().chain(&p.blue).cloned().collect();
            let topo = Arc::new(Topology::Lattice(box_for(all[0].dim(), &all, p.t_max)?));
            let c = Configuration::from_sites(topo.clone(), &p.red, &p.blue)?;
            (topo, Some(c))
        }
    };
    let half = snap
        .half
        .or(snap.region_hit)
        .unwrap_or_else(|| topo.as_lattice().map_or(0, |b| (b.extent()[0] as i64 - 1) / 2));
    let mut times = snap.times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();

    type Images = Vec<(f64, Vec<u8>)>;
    let results: Vec<(RunRecord, Images)> = (0..p.reps)
        .into_par_iter()
        .map(|r| -> Result<(RunRecord, Images)> {
            let s = seed.with_replicate(r);
            let take = r == 0 && p.snapshots.is_some();
            let mut images: Images = Vec::new();
            let mut pending = times.iter().copied().peekable();
            let mut err: Option<Error> = None;
            // the state at time s is the one before the first event after s
            let mut observe = |c: &Configuration, ev: &crate::engine::TrajectoryEvent| {
                if !take {
                    return;
                }
                while let Some(&t) = pending.peek() {
                    if ev.time <= t {
                        break;
                    }
                    let mut before = c.clone();
                    before.set(ev.to, ev.old);
                    let mut buf = Vec::new();
                    if let Err(e) = write_ppm(&before, half, &mut buf) {
                        err.get_or_insert(e);
                    }
                    images.push((t, buf));
                    pending.next();
                }
            };
            let (rec, fin) = match &base {
                Some(c0) => {
                    let mut c = c0.clone();
                    run_configuration(&mut c, &rule, &s, false, &mut observe)
                }
                None => {
                    let mut rng = s.rng("coloring");
                    let f = p.red_fraction.unwrap();
                    let cells: Vec<CellState> = (0..topo.n_sites())
                        .map(|_| {
                            if rng.random::<f64>() < f {
                                CellState::Red
                            } else {
                                CellState::Blue
                            }
                        })
                        .collect();
                    run_voter(topo.clone(), &cells, &rule, &s, &mut observe)?
                }
            };
            if let Some(e) = err {
                return Err(e);
            }
            if take {
                // remaining times at or before the end see the final state
                for t in pending.filter(|&t| t <= rec.t_end) {
                    let mut buf = Vec::new();
                    write_ppm(&fin, half, &mut buf)?;
                    images.push((t, buf));
                }
                if rec.stop == StopReason::RegionHit {
                    let mut buf = Vec::new();
                    write_ppm(&fin, half, &mut buf)?;
                    images.push((rec.t_end, buf));
                }
            }
            Ok((rec, images))
        })
        .collect::<Result<_>>()?;

    for (t, bytes) in &results[0].1 {
        let mut w = out.create(&snapshot_name(*t))?;
        w.write_all(bytes)?;
        w.flush()?;
    }
    if let Some(s) = &p.snapshots {
        let rec = &results[0].0;
        if s.region_hit.is_some() && rec.stop != StopReason::RegionHit {
            warnings.push(format!("region trigger did not fire before t = {}", rec.t_end));
        }
        let late = times.iter().filter(|&&t| t > rec.t_end).count();
        if late > 0 {
            warnings.push(format!(
                "{late} snapshot time(s) after the run ended at t = {}",
                rec.t_end
            ));
        }
    }
    out.jsonl(results.iter().map(|(r, _)| r))?;
    out.csv(results.iter().enumerate().map(|(i, (r, _))| SimulateRow {
        replicate: i as u64,
        stop: r.stop,
        t_end: r.t_end,
        events: r.events,
        red: r.final_state.red,
        blue: r.final_state.blue,
        red_extinct: r.extinction.red,
        blue_extinct: r.extinction.blue,
    }))?;
    let hits = results
        .iter()
        .filter(|(r, _)| r.stop == StopReason::BoxHit)
        .count() as u64;
    Ok((p.reps, hits))
}
