//! Exact transient laws of the three processes on tiny graphs, by state
//! enumeration and uniformization. Used as ground truth for the engines.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analytics::stats::z_score;
use crate::engine::{run_coupled, BoundaryPolicy, CellState, Configuration, CoupledInit, StopRule};
use crate::error::{Error, Result};
use crate::fpp::passage_times;
use crate::lattice::Site;
use crate::media::{EdgeWeightField, PercolationStructure, SeedSpec};
use crate::topology::{Graph, Topology};

pub const MAX_SITES: usize = 12;
pub const DEFAULT_STATE_CAP: usize = 531_441;

/// A graph small enough for exhaustive enumeration.
#[derive(Clone, Debug)]
pub struct TinyGraph {
    topology: Arc<Topology>,
}

impl TinyGraph {
    pub fn new(g: Graph) -> Result<Self> {
        if g.n_sites() > MAX_SITES {
            return Err(Error::config(
                "graph",
                format!("{} sites; the oracle handles at most {MAX_SITES}", g.n_sites()),
            ));
        }
        Ok(TinyGraph {
            topology: Arc::new(Topology::Graph(g)),
        })
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(Graph::path(n)?)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        Self::new(Graph::cycle(n)?)
    }

    pub fn grid(w: usize, h: usize) -> Result<Self> {
        Self::new(Graph::grid(w, h)?)
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn n_sites(&self) -> usize {
        self.topology.n_sites()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Competition,
    Voter,
    Richardson,
}

/// A state is a base-3 word, digit `i` being the state of site `i`.
pub type State = u32;

pub fn encode(cells: &[CellState]) -> State {
    cells.iter().rev().fold(0, |acc, &c| acc * 3 + c as u32)
}

pub fn decode(mut s: State, n: usize) -> Vec<CellState> {
    (0..n)
        .map(|_| {
            let c = CellState::from_u8((s % 3) as u8);
            s /= 3;
            c
        })
        .collect()
}

/// `.` empty, `R`, `B`, one character per site.
pub fn state_label(s: State, n: usize) -> String {
    decode(s, n)
        .into_iter()
        .map(|c| match c {
            CellState::Empty => '.',
            CellState::Red => 'R',
            CellState::Blue => 'B',
        })
        .collect()
}

/// Reachable states and integer off-diagonal rates; the diagonal is minus
/// the exit rate.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    pub n_sites: usize,
    pub states: Vec<State>,
    pub index: HashMap<State, usize>,
    /// Row `i`: `(j, q(i -> j))` for `j != i`, sorted by `j`.
    pub rates: Vec<Vec<(usize, u32)>>,
    pub exit: Vec<u32>,
}

impl GeneratorMatrix {
    pub fn rate(&self, i: usize, j: usize) -> i64 {
        if i == j {
            -(self.exit[i] as i64)
        } else {
            self.rates[i].iter().find(|r| r.0 == j).map_or(0, |r| r.1 as i64)
        }
    }

    pub fn state_index(&self, cells: &[CellState]) -> Option<usize> {
        self.index.get(&encode(cells)).copied()
    }
}

fn validate_init(model: Model, init: &[CellState], n: usize) -> Result<()> {
    if init.len() != n {
        return Err(Error::config(
            "init",
            format!("expected {n} cells, got {}", init.len()),
        ));
    }
    match model {
        Model::Voter if init.contains(&CellState::Empty) => {
            Err(Error::config("init", "voter init must colour every site"))
        }
        Model::Richardson if init.contains(&CellState::Blue) => Err(Error::config(
            "init",
            "Richardson init uses red for occupied sites",
        )),
        _ => Ok(()),
    }
}

/// Enumerate states reachable from `init` and their transition rates.
pub fn build_generator(
    graph: &TinyGraph,
    model: Model,
    init: &[CellState],
    cap: usize,
) -> Result<GeneratorMatrix> {
    let n = graph.n_sites();
    validate_init(model, init, n)?;
    let topo = graph.topology();
    let edges: Vec<(usize, usize)> = topo.directed_edges().map(|(x, _, y)| (x, y)).collect();
    let pow3: Vec<u32> = (0..n).map(|i| 3u32.pow(i as u32)).collect();

    let s0 = encode(init);
    let mut states = vec![s0];
    let mut index = HashMap::from([(s0, 0usize)]);
    let mut rates = Vec::new();
    let mut queue = VecDeque::from([s0]);
    while let Some(s) = queue.pop_front() {
        let cells = decode(s, n);
        let mut row: HashMap<usize, u32> = HashMap::new();
        for &(x, y) in &edges {
            let (cx, cy) = (cells[x], cells[y]);
            let fires = match model {
                Model::Competition | Model::Voter => cx.is_occupied() && cy != cx,
                Model::Richardson => cx.is_occupied() && cy == CellState::Empty,
            };
            if !fires {
                continue;
            }
            let t = s - cy as u32 * pow3[y] + cx as u32 * pow3[y];
            let j = match index.get(&t) {
                Some(&j) => j,
                None => {
                    if states.len() >= cap {
                        return Err(Error::StateSpace { cap });
                    }
                    index.insert(t, states.len());
                    states.push(t);
                    queue.push_back(t);
                    states.len() - 1
                }
            };
            *row.entry(j).or_default() += 1;
        }
        let mut row: Vec<(usize, u32)> = row.into_iter().collect();
        row.sort_unstable();
        rates.push(row);
    }
    let exit = rates.iter().map(|r| r.iter().map(|e| e.1).sum()).collect();
    Ok(GeneratorMatrix {
        n_sites: n,
        states,
        index,
        rates,
        exit,
    })
}

/// Law at time `t` started from state index `init`, by uniformization;
/// the truncated Poisson mass is below `tol`.
pub fn transient_distribution(gen: &GeneratorMatrix, init: usize, t: f64, tol: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain("time must be finite and nonnegative"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let m = gen.states.len();
    let mut v = vec![0.0; m];
    v[init] = 1.0;
    let lambda = gen.exit.iter().copied().max().unwrap_or(0) as f64;
    if lambda == 0.0 || t == 0.0 {
        return Ok(v);
    }
    let lt = lambda * t;
    let mut out = vec![0.0; m];
    let mut mass = 0.0;
    let mut k = 0u64;
    let mut next = vec![0.0; m];
    loop {
        // Poisson(lt) weight of k, in log space to survive large lt
        let lw = -lt + k as f64 * lt.ln() - ln_factorial(k);
        let w = lw.exp();
        mass += w;
        for (o, x) in out.iter_mut().zip(&v) {
            *o += w * x;
        }
        if 1.0 - mass < tol && k as f64 > lt {
            break;
        }
        if k > 10_000 + (20.0 * lt) as u64 {
            return Err(Error::domain("uniformization did not converge"));
        }
        // v <- v (I + Q / lambda)
        for (i, n) in next.iter_mut().enumerate() {
            *n = v[i] * (1.0 - gen.exit[i] as f64 / lambda);
        }
        for (i, row) in gen.rates.iter().enumerate() {
            if v[i] != 0.0 {
                for &(j, q) in row {
                    next[j] += v[i] * q as f64 / lambda;
                }
            }
        }
        std::mem::swap(&mut v, &mut next);
        k += 1;
    }
    Ok(out)
}

fn ln_factorial(k: u64) -> f64 {
    statrs::function::gamma::ln_gamma(k as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Gillespie,
    EventScan,
    Fpp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub state: String,
    pub prob_oracle: f64,
    pub freq_mc: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub engine: Engine,
    pub model: Model,
    pub reps: u64,
    pub rows: Vec<OracleRow>,
    pub max_abs_z: f64,
    /// Sampled states the oracle gives probability zero.
    pub impossible_hits: u64,
}

impl OracleReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Final state of one replicate on the tiny graph.
pub fn sample_engine(
    graph: &TinyGraph,
    model: Model,
    init: &[CellState],
    t: f64,
    engine: Engine,
    seed: &SeedSpec,
) -> Result<State> {
    let topo = graph.topology();
    let n = topo.n_sites();
    match engine {
        Engine::Gillespie => {
            let mut c = Configuration::from_cells(topo.clone(), init)?;
            let mut rng = seed.rng("gillespie");
            let rule = StopRule::time(t);
            let mut tracker = Default::default();
            crate::engine::drive(&mut c, &rule, &mut rng, &mut tracker, |_, _| {});
            Ok(encode(&c.cells().collect::<Vec<_>>()))
        }
        Engine::EventScan => {
            let s = PercolationStructure::new(topo.clone(), t, seed)?;
            let sites = |color| -> Vec<Site> {
                (0..n)
                    .filter(|&i| init[i] == color)
                    .map(|i| topo.site(i))
                    .collect()
            };
            let mut ci = CoupledInit::default();
            match model {
                Model::Competition => ci.competition = Some((sites(CellState::Red), sites(CellState::Blue))),
                Model::Voter => ci.voter_red = Some(sites(CellState::Red)),
                Model::Richardson => ci.richardson = Some(sites(CellState::Red)),
            }
            let out = run_coupled(&s, &ci, BoundaryPolicy::Closed, seed, |_, _| {})?;
            let c = out
                .state
                .competition
                .or(out.state.voter)
                .or(out.state.richardson)
                .expect("one process requested");
            Ok(encode(&c.cells().collect::<Vec<_>>()))
        }
        Engine::Fpp => {
            if model != Model::Richardson {
                return Err(Error::config(
                    "engine",
                    "the fpp engine only runs the Richardson model",
                ));
            }
            let field = EdgeWeightField::new(topo.clone(), seed);
            let src: Vec<Site> = (0..n)
                .filter(|&i| init[i].is_occupied())
                .map(|i| topo.site(i))
                .collect();
            let pf = passage_times(&field, &src)?;
            let cells: Vec<CellState> = (0..n)
                .map(|i| {
                    if pf.time(i) <= t {
                        CellState::Red
                    } else {
                        CellState::Empty
                    }
                })
                .collect();
            Ok(encode(&cells))
        }
    }
}

/// Run `engine` `reps` times and score each state's frequency against the
/// exact law.
pub fn compare_engine(
    graph: &TinyGraph,
    model: Model,
    init: &[CellState],
    t: f64,
    reps: u64,
    tol: f64,
    engine: Engine,
    seed: &SeedSpec,
) -> Result<OracleReport> {
    use rayon::prelude::*;
    let gen = build_generator(graph, model, init, DEFAULT_STATE_CAP)?;
    let law = transient_distribution(&gen, 0, t, tol)?;
    let samples: Vec<State> = (0..reps)
        .into_par_iter()
        .map(|r| sample_engine(graph, model, init, t, engine, &seed.with_replicate(r)))
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; gen.states.len()];
    let mut impossible = 0;
    for s in samples {
        match gen.index.get(&s) {
            Some(&i) => counts[i] += 1,
            None => impossible += 1,
        }
    }
    let mut rows: Vec<OracleRow> = gen
        .states
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let freq = counts[i] as f64 / reps as f64;
            OracleRow {
                state: state_label(s, gen.n_sites),
                prob_oracle: law[i],
                freq_mc: freq,
                z: z_score(freq, law[i], reps),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.state.cmp(&b.state));
    let mut max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    if impossible > 0 {
        max_abs_z = f64::INFINITY;
    }
    Ok(OracleReport {
        engine,
        model,
        reps,
        rows,
        max_abs_z,
        impossible_hits: impossible,
    })
}

/// Parse a `.RB` word into cells.
pub fn parse_cells(word: &str) -> Result<Vec<CellState>> {
    word.chars()
        .map(|c| match c {
            '.' => Ok(CellState::Empty),
            'R' | 'r' => Ok(CellState::Red),
            'B' | 'b' => Ok(CellState::Blue),
            other => Err(Error::config(
                "init",
                format!("unknown cell {other:?}; use . R B"),
            )),
        })
        .collect()
}
