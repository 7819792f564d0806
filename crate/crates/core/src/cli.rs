//! Configuration-driven runs: plant loading, solver dispatch and trace output.
//!
//! A config is a flat `key = value` file. Blank lines and `#` comments are
//! ignored and relative paths resolve against the config's directory.
//!
//! ```text
//! preset    = lollipop10_10      # or: a = A.txt, b = B.txt, q = …, r = …, sigma = …
//! algorithm = pgd                # gd | ngd | kn | pgd | flow:gradient | flow:natural(γ) | flow:quasi_newton
//! tol       = 1e-6
//! max_iter  = 200000
//! adaptive  = false              # pgd only
//! horizon   = 50                 # flows only
//! out       = runs/lollipop
//! seed      = 0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{preset, PRESET_NAMES};
use crate::descent::{
    gradient_descent, kleinman_newton, natural_gradient_descent, DescentOptions, Reference, Status, Trace,
};
use crate::error::{Error, Result};
use crate::fit::{exponential_envelope, linear_fit, log_gap_fit, running_min, LinearFit};
use crate::flows::{integrate_flow, FlowKind, FlowOptions, FlowTrace};
use crate::lqr::Plant;
use crate::structured::{
    projected_gradient_descent_observed, sample_restricted_curvature, PgdOptions, SparsityPattern, StepRule,
};

/// Gaps at or below `GAP_FIT_FLOOR·max(1, f*)` are treated as rounding noise
/// and left out of rate fits.
pub const GAP_FIT_FLOOR: f64 = 1e-10;
/// Default integration horizon for flows.
pub const DEFAULT_HORIZON: f64 = 50.0;
/// Default stopping tolerance for flows.
pub const DEFAULT_FLOW_TOL: f64 = 1e-8;
/// Iterations between restricted-curvature samples in structured runs.
pub const CURVATURE_EVERY: usize = 1000;

pub const TRACE_COLUMNS: [&str; 7] =
    ["iter_or_t", "f", "f_gap", "grad_norm", "stationarity_norm", "eta_or_dt", "spectral_abscissa"];

#[derive(Debug, Clone, PartialEq)]
pub enum Algorithm {
    Gd,
    Ngd,
    Kn,
    Pgd,
    Flow(FlowKind),
}

impl Algorithm {
    pub fn is_descent(&self) -> bool {
        matches!(self, Algorithm::Gd | Algorithm::Ngd | Algorithm::Kn)
    }

    pub fn is_flow(&self) -> bool {
        matches!(self, Algorithm::Flow(_))
    }

    /// Name usable as a directory component.
    pub fn slug(&self) -> String {
        self.to_string().replace([':', '(', ')'], "_").trim_end_matches('_').to_string()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::Gd => write!(f, "gd"),
            Algorithm::Ngd => write!(f, "ngd"),
            Algorithm::Kn => write!(f, "kn"),
            Algorithm::Pgd => write!(f, "pgd"),
            Algorithm::Flow(FlowKind::Gradient) => write!(f, "flow:gradient"),
            Algorithm::Flow(FlowKind::Natural { gamma }) => write!(f, "flow:natural({gamma})"),
            Algorithm::Flow(FlowKind::QuasiNewton) => write!(f, "flow:quasi_newton"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "gd" => Algorithm::Gd,
            "ngd" => Algorithm::Ngd,
            "kn" => Algorithm::Kn,
            "pgd" => Algorithm::Pgd,
            "flow:gradient" => Algorithm::Flow(FlowKind::Gradient),
            "flow:quasi_newton" => Algorithm::Flow(FlowKind::QuasiNewton),
            _ => {
                let gamma = s
                    .strip_prefix("flow:natural(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))?;
                let gamma: f64 =
                    gamma.trim().parse().map_err(|_| Error::Config(format!("bad exponent in {s:?}")))?;
                Algorithm::Flow(FlowKind::natural(gamma)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFiles {
    pub a: PathBuf,
    pub b: PathBuf,
    pub q: PathBuf,
    pub r: PathBuf,
    /// Identity when absent.
    pub sigma: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlantSource {
    Preset(String),
    Files(MatrixFiles),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: PlantSource,
    /// Initial gain file; zero gain when absent.
    pub k0: Option<PathBuf>,
    /// Sparsity pattern file (pgd only).
    pub pattern: Option<PathBuf>,
    pub algorithm: Algorithm,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub horizon: Option<f64>,
    pub out: PathBuf,
    pub seed: u64,
    pub adaptive: bool,
}

const MATRIX_KEYS: [&str; 5] = ["a", "b", "q", "r", "sigma"];

impl RunConfig {
    pub fn for_preset(name: &str, algorithm: Algorithm, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            source: PlantSource::Preset(name.to_string()),
            k0: None,
            pattern: None,
            algorithm,
            tol: None,
            max_iter: None,
            horizon: None,
            out: out.into(),
            seed: 0,
            adaptive: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_ascii_lowercase();
            if kv.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }
        let path = |v: &String| base.join(v);
        let num = |k: &str, v: &String| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Config(format!("{k}: not a number: {v:?}")))
        };

        let has_files = MATRIX_KEYS.iter().any(|k| kv.contains_key(*k));
        let source = match (kv.get("preset"), has_files) {
            (Some(_), true) => return Err(Error::Config("give either preset or matrix files, not both".into())),
            (None, false) => return Err(Error::Config("no plant source: set preset or a, b, q, r".into())),
            (Some(name), false) => PlantSource::Preset(name.clone()),
            (None, true) => {
                let need = |k: &str| {
                    kv.get(k).map(path).ok_or_else(|| Error::Config(format!("missing matrix file key {k:?}")))
                };
                PlantSource::Files(MatrixFiles {
                    a: need("a")?,
                    b: need("b")?,
                    q: need("q")?,
                    r: need("r")?,
                    sigma: kv.get("sigma").map(path),
                })
            }
        };
        let algorithm: Algorithm =
            kv.get("algorithm").ok_or_else(|| Error::Config("missing key \"algorithm\"".into()))?.parse()?;
        let cfg = RunConfig {
            source,
            k0: kv.get("k0").map(path),
            pattern: kv.get("pattern").map(path),
            algorithm,
            tol: kv.get("tol").map(|v| num("tol", v)).transpose()?,
            max_iter: kv
                .get("max_iter")
                .map(|v| v.parse().map_err(|_| Error::Config(format!("max_iter: not an integer: {v:?}"))))
                .transpose()?,
            horizon: kv.get("horizon").map(|v| num("horizon", v)).transpose()?,
            out: kv.get("out").map(path).unwrap_or_else(|| base.join("out")),
            seed: kv
                .get("seed")
                .map(|v| v.parse().map_err(|_| Error::Config(format!("seed: not an integer: {v:?}"))))
                .transpose()?
                .unwrap_or(0),
            adaptive: kv
                .get("adaptive")
                .map(|v| v.parse().map_err(|_| Error::Config(format!("adaptive: expected true or false: {v:?}"))))
                .transpose()?
                .unwrap_or(false),
        };
        for key in kv.keys() {
            let known = [
                "preset", "a", "b", "q", "r", "sigma", "k0", "pattern", "algorithm", "tol", "max_iter", "horizon",
                "out", "seed", "adaptive",
            ];
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that algorithm-specific settings match the algorithm.
    pub fn validate(&self) -> Result<()> {
        if let PlantSource::Preset(name) = &self.source {
            if !PRESET_NAMES.contains(&name.as_str()) {
                return Err(Error::UnknownPreset(name.clone()));
            }
        }
        if let Some(t) = self.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("tol must be positive, got {t}")));
            }
        }
        if self.max_iter == Some(0) {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        match self.horizon {
            Some(_) if !self.algorithm.is_flow() => {
                return Err(Error::Config(format!("horizon applies to flows, not {}", self.algorithm)))
            }
            Some(h) if !(h.is_finite() && h >= 0.0) => {
                return Err(Error::Config(format!("horizon must be non-negative, got {h}")))
            }
            _ => {}
        }
        if self.algorithm.is_flow() && self.max_iter.is_some() {
            return Err(Error::Config("flows take a horizon, not max_iter".into()));
        }
        if self.adaptive && self.algorithm != Algorithm::Pgd {
            return Err(Error::Config("adaptive applies to pgd only".into()));
        }
        if self.pattern.is_some() && self.algorithm != Algorithm::Pgd {
            return Err(Error::Config("pattern applies to pgd only".into()));
        }
        Ok(())
    }
}

/// Parses a `rows cols` header followed by a row-major grid.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        let t = tokens.next().ok_or_else(|| Error::Parse(format!("missing {what} in header")))?;
        t.parse().map_err(|_| Error::Parse(format!("{what}: not an integer: {t:?}")))
    };
    let (rows, cols) = (dim("rows")?, dim("cols")?);
    let values = tokens
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!("expected {rows}×{cols} = {} entries, found {}", rows * cols, values.len())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut s = format!("{} {}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Reads a plant from matrix files. Validation failures carry the full
/// violation report.
pub fn load_matrices(files: &MatrixFiles) -> Result<Plant> {
    let a = read_matrix(&files.a)?;
    let b = read_matrix(&files.b)?;
    let q = read_matrix(&files.q)?;
    let r = read_matrix(&files.r)?;
    let sigma = match &files.sigma {
        Some(path) => read_matrix(path)?,
        None => DMatrix::identity(a.nrows(), a.nrows()),
    };
    Plant::new(a, b, q, r, sigma)
}

/// Plant, initial gain, pattern and a label resolved from a config.
pub struct Problem {
    pub label: String,
    pub plant: Plant,
    pub k0: DMatrix<f64>,
    pub pattern: Option<SparsityPattern>,
}

pub fn load_problem(cfg: &RunConfig) -> Result<Problem> {
    let (label, plant, mut pattern) = match &cfg.source {
        PlantSource::Preset(name) => {
            let pr = preset(name)?;
            (pr.name.to_string(), pr.plant, pr.pattern)
        }
        PlantSource::Files(files) => ("files".to_string(), load_matrices(files)?, None),
    };
    let k0 = match &cfg.k0 {
        Some(path) => read_matrix(path)?,
        None => plant.zero_gain(),
    };
    if k0.shape() != (plant.n_inputs(), plant.n_states()) {
        return Err(Error::Dimension(format!(
            "initial gain is {}×{}, expected {}×{}",
            k0.nrows(),
            k0.ncols(),
            plant.n_inputs(),
            plant.n_states()
        )));
    }
    if let Some(path) = &cfg.pattern {
        let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        pattern = Some(SparsityPattern::parse(&text, plant.n_inputs(), plant.n_states())?);
    }
    Ok(Problem { label, plant, k0, pattern })
}

/// One CSV row of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter_or_t: f64,
    pub f: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub stationarity_norm: f64,
    pub eta_or_dt: f64,
    pub spectral_abscissa: f64,
}

impl TraceRow {
    fn fields(&self) -> [f64; 7] {
        [
            self.iter_or_t,
            self.f,
            self.f_gap,
            self.grad_norm,
            self.stationarity_norm,
            self.eta_or_dt,
            self.spectral_abscissa,
        ]
    }
}

pub fn rows_from_trace(trace: &Trace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iter_or_t: r.iter as f64,
            f: r.f,
            f_gap: r.f_gap,
            grad_norm: r.grad_norm,
            stationarity_norm: r.stationarity_norm,
            eta_or_dt: r.eta,
            spectral_abscissa: r.abscissa,
        })
        .collect()
}

pub fn rows_from_flow(trace: &FlowTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iter_or_t: r.t,
            f: r.f,
            f_gap: r.f_gap,
            grad_norm: r.grad_norm,
            stationarity_norm: r.grad_norm,
            eta_or_dt: r.dt,
            spectral_abscissa: r.abscissa,
        })
        .collect()
}

/// Writes rows as CSV with a header and 17 significant digits per value.
pub fn write_trace_to<W: Write>(rows: &[TraceRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_COLUMNS)?;
    for row in rows {
        w.write_record(row.fields().iter().map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    write_trace_to(rows, fs::File::create(path)?)
}

pub fn read_trace_from<R: Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_COLUMNS {
        return Err(Error::Parse(format!("unexpected trace header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v = rec
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow {
            iter_or_t: v[0],
            f: v[1],
            f_gap: v[2],
            grad_norm: v[3],
            stationarity_norm: v[4],
            eta_or_dt: v[5],
            spectral_abscissa: v[6],
        });
    }
    Ok(rows)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    read_trace_from(fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub plant: String,
    pub n_states: usize,
    pub n_inputs: usize,
    pub status: Status,
    pub converged: bool,
    pub tol: f64,
    /// Iteration count (discrete methods).
    pub iterations: Option<usize>,
    /// Final time (flows).
    pub final_time: Option<f64>,
    pub f: f64,
    pub f_gap: f64,
    pub grad_norm: f64,
    pub stationarity_norm: f64,
    /// Optimal cost from Kleinman–Newton, the reference for `f_gap`.
    pub f_star: f64,
    pub reference_grad_norm: f64,
    /// Smallest and largest stepsize (or accepted time step) taken.
    pub eta_min: Option<f64>,
    pub eta_max: Option<f64>,
    pub d_range: Option<(f64, f64)>,
    pub eta_floor: Option<f64>,
    pub lipschitz: Option<f64>,
    pub q0: Option<f64>,
    pub q0_dominance: Option<f64>,
    /// Fit of `ln(f_gap)` against iteration or time.
    pub log_gap_fit: Option<LinearFit>,
    /// Largest `α` with `gap(t) ≤ e^{−αt}·gap(0)` (flows).
    pub decay_envelope: Option<f64>,
    /// Fit of `ln min_{i≤k} s_i²` against `ln k` for the stationarity measure.
    pub stationarity_fit: Option<LinearFit>,
    pub quadratic_ratio: Option<f64>,
    pub adaptive_fallbacks: Option<usize>,
    /// Largest sampled restricted curvature (structured runs).
    pub restricted_curvature_max: Option<f64>,
    pub rejected_steps: Option<usize>,
    /// Structured runs report gaps against the unstructured optimum.
    pub structured_optimum_may_differ: bool,
    pub seed: u64,
}

impl RunSummary {
    fn base(cfg: &RunConfig, problem: &Problem, reference: &Reference, tol: f64, status: Status) -> Self {
        RunSummary {
            algorithm: cfg.algorithm.to_string(),
            plant: problem.label.clone(),
            n_states: problem.plant.n_states(),
            n_inputs: problem.plant.n_inputs(),
            status,
            converged: status == Status::Converged,
            tol,
            iterations: None,
            final_time: None,
            f: f64::NAN,
            f_gap: f64::NAN,
            grad_norm: f64::NAN,
            stationarity_norm: f64::NAN,
            f_star: reference.f_star,
            reference_grad_norm: reference.grad_norm,
            eta_min: None,
            eta_max: None,
            d_range: None,
            eta_floor: None,
            lipschitz: None,
            q0: None,
            q0_dominance: None,
            log_gap_fit: None,
            decay_envelope: None,
            stationarity_fit: None,
            quadratic_ratio: None,
            adaptive_fallbacks: None,
            restricted_curvature_max: None,
            rejected_steps: None,
            structured_optimum_may_differ: false,
            seed: cfg.seed,
        }
    }

    fn fill_from_rows(&mut self, rows: &[TraceRow]) {
        let last = rows.last().expect("traces hold the initial row");
        self.f = last.f;
        self.f_gap = last.f_gap;
        self.grad_norm = last.grad_norm;
        self.stationarity_norm = last.stationarity_norm;
        let steps = rows.iter().map(|r| r.eta_or_dt).filter(|&e| e > 0.0);
        self.eta_min = steps.clone().reduce(f64::min);
        self.eta_max = steps.reduce(f64::max);
        let xs: Vec<f64> = rows.iter().map(|r| r.iter_or_t).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.f_gap).collect();
        self.log_gap_fit = log_gap_fit(&xs, &gaps, GAP_FIT_FLOOR * self.f_star.max(1.0));
    }
}

/// Stationarity fit: `ln` of the running minimum of `s_k²` against `ln k`,
/// over `k ≥ 1` until the measure first reaches `tol`.
pub fn stationarity_decay_fit(rows: &[TraceRow], tol: f64) -> Option<LinearFit> {
    let sq: Vec<f64> = rows.iter().map(|r| r.stationarity_norm * r.stationarity_norm).collect();
    let best = running_min(&sq);
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .zip(&best)
        .skip(1)
        .take_while(|(r, _)| r.stationarity_norm > tol)
        .map(|(r, &b)| (r.iter_or_t.ln(), b.ln()))
        .unzip();
    linear_fit(&xs, &ys)
}

/// Runs `cfg` without touching the filesystem beyond reading inputs.
pub fn execute(cfg: &RunConfig) -> Result<(Vec<TraceRow>, RunSummary)> {
    cfg.validate()?;
    let problem = load_problem(cfg)?;
    let p = &problem.plant;
    p.check_gain(&problem.k0)?;
    let reference = Reference::from_kleinman_newton(p, &problem.k0)?;
    log::info!("{}: f* = {:.12e} from Kleinman–Newton", problem.label, reference.f_star);

    match &cfg.algorithm {
        alg @ (Algorithm::Gd | Algorithm::Ngd | Algorithm::Kn) => {
            let mut opts = match alg {
                Algorithm::Gd => DescentOptions::gradient_descent(),
                Algorithm::Ngd => DescentOptions::natural_gradient(),
                _ => DescentOptions::kleinman_newton(),
            };
            opts.tol = cfg.tol.or(opts.tol);
            opts.max_iter = cfg.max_iter.unwrap_or(opts.max_iter);
            opts.reference = Some(reference.clone());
            opts.keep_iterates = *alg == Algorithm::Kn;
            let trace = match alg {
                Algorithm::Gd => gradient_descent(p, &problem.k0, &opts)?,
                Algorithm::Ngd => natural_gradient_descent(p, &problem.k0, &opts)?,
                _ => kleinman_newton(p, &problem.k0, &opts)?,
            };
            let rows = rows_from_trace(&trace);
            let tol = opts.tol.unwrap_or_else(|| crate::lqr::stationarity_tol(reference.f_star));
            let mut s = RunSummary::base(cfg, &problem, &reference, tol, trace.status);
            s.fill_from_rows(&rows);
            s.iterations = Some(trace.iterations());
            s.d_range = trace.info.d_range;
            s.eta_floor = trace.info.eta_floor;
            s.q0 = trace.info.q0;
            s.q0_dominance = trace.info.q0_dominance;
            s.quadratic_ratio = trace.info.quadratic_ratio;
            Ok((rows, s))
        }
        Algorithm::Pgd => {
            let pattern = problem
                .pattern
                .clone()
                .unwrap_or_else(|| SparsityPattern::full(p.n_inputs(), p.n_states()));
            let defaults = PgdOptions::default();
            let opts = PgdOptions {
                step: if cfg.adaptive { StepRule::Adaptive } else { StepRule::Constant },
                tol: cfg.tol.unwrap_or(defaults.tol),
                max_iter: cfg.max_iter.unwrap_or(defaults.max_iter),
                keep_iterates: false,
                reference: Some(reference.clone()),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut curvature = f64::NEG_INFINITY;
            let mut sample_err = None;
            let mut iter = 0usize;
            let trace = projected_gradient_descent_observed(p, &pattern, &problem.k0, &opts, |eval, _| {
                if iter % CURVATURE_EVERY == 0 && sample_err.is_none() {
                    match sample_restricted_curvature(p, eval, &pattern, 4, &mut rng) {
                        Ok(c) => curvature = curvature.max(c),
                        Err(e) => sample_err = Some(e),
                    }
                }
                iter += 1;
            })?;
            if let Some(e) = sample_err {
                return Err(e);
            }
            let rows = rows_from_trace(&trace);
            let mut s = RunSummary::base(cfg, &problem, &reference, opts.tol, trace.status);
            s.fill_from_rows(&rows);
            s.iterations = Some(trace.iterations());
            s.lipschitz = trace.info.lipschitz;
            s.adaptive_fallbacks = trace.info.adaptive_fallbacks;
            s.restricted_curvature_max = Some(curvature);
            s.stationarity_fit = stationarity_decay_fit(&rows, opts.tol);
            s.structured_optimum_may_differ = !pattern.is_full();
            Ok((rows, s))
        }
        Algorithm::Flow(kind) => {
            let opts = FlowOptions {
                horizon: cfg.horizon.unwrap_or(DEFAULT_HORIZON),
                conv_tol: cfg.tol.unwrap_or(DEFAULT_FLOW_TOL),
                reference: Some(reference.clone()),
                ..FlowOptions::default()
            };
            let trace = integrate_flow(*kind, p, &problem.k0, &opts)?;
            let rows = rows_from_flow(&trace);
            let mut s = RunSummary::base(cfg, &problem, &reference, opts.conv_tol, trace.status);
            s.fill_from_rows(&rows);
            s.final_time = Some(trace.last().t);
            s.rejected_steps = Some(trace.rejected_steps);
            s.decay_envelope =
                exponential_envelope(&trace.times(), &trace.gaps(), GAP_FIT_FLOOR * reference.f_star.max(1.0));
            Ok((rows, s))
        }
    }
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Runs `cfg` and writes `trace.csv` and `summary.json` into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let (rows, summary) = execute(cfg)?;
    fs::create_dir_all(&cfg.out)?;
    write_trace(&rows, &cfg.out.join("trace.csv"))?;
    write_summary(&summary, &cfg.out.join("summary.json"))?;
    log::info!(
        "{} on {}: {:?} with f = {:.12e}, gap = {:.3e}, ‖∇f‖ = {:.3e}",
        summary.algorithm,
        summary.plant,
        summary.status,
        summary.f,
        summary.f_gap,
        summary.grad_norm
    );
    Ok(summary)
}

/// Runs reproduced by the `bench` command, each in its own subdirectory.
pub fn bench_configs(out: &Path) -> Vec<RunConfig> {
    let path_runs = [
        Algorithm::Gd,
        Algorithm::Ngd,
        Algorithm::Kn,
        Algorithm::Flow(FlowKind::Gradient),
        Algorithm::Flow(FlowKind::Natural { gamma: 1.0 }),
        Algorithm::Flow(FlowKind::QuasiNewton),
    ]
    .into_iter()
    .map(|a| ("path20", a));
    path_runs
        .chain([("lollipop10_10", Algorithm::Pgd)])
        .map(|(name, alg)| {
            let dir = out.join(format!("{name}_{}", alg.slug()));
            RunConfig::for_preset(name, alg, dir)
        })
        .collect()
}
