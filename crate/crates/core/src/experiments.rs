//! Config-driven numerical studies: HOM interference, double-well
//! Bose-Hubbard visibilities, random-state sweeps and single-state reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::combinatorics::{ModeOccupation, Permutation};
use crate::dynamics::{
    beam_splitter, bose_hubbard_hamiltonian, helstrom_from_difference, lift_single_particle, povm_kpoint,
    povm_occupation, BoseHubbardParams, OrbitMeasurement, Povm,
};
use crate::error::Error;
use crate::linalg::{self, haar_unitary, CMatrix, Propagator, UnitaryOperator};
use crate::measures::{
    classical_particle_measures, distinguishability_block, eigen_residual_block, ideal_fidelity_lambda_block,
    kolmogorov, measure_report, visibilities, wave_measures_block, ProbDist,
};
use crate::state_file::{parse_state, StateFileError};
use crate::states::{random_prepared_state, Amplitudes, ExternalBlock, InternalState, ParticleKind, PreparedState};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Inequality slack used by every row-wise assertion.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, ThisError)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid state:\n{0}")]
    State(#[from] StateFileError),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl ExperimentError {
    /// 1 config, 2 state validation, 3 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io { .. } => 1,
            ExperimentError::State(StateFileError::Syntax { .. }) => 1,
            ExperimentError::State(_) => 2,
            ExperimentError::Invariant(_) => 3,
            ExperimentError::Core(e) => match e {
                Error::InvalidState(_) | Error::PauliViolation(_) => 2,
                Error::InvariantViolation(_)
                | Error::Eigen(_)
                | Error::NotHermitian { .. }
                | Error::NotPsd { .. }
                | Error::NotTraceOne { .. }
                | Error::NotUnitary { .. }
                | Error::NonPhysical(_) => 3,
                _ => 1,
            },
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExperimentError>;

/// Grid given as explicit values or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        step: f64,
        /// Multiply every value by pi.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        times_pi: bool,
    },
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range {
            start,
            stop,
            step,
            times_pi: false,
        }
    }

    pub fn values(&self) -> ExpResult<Vec<f64>> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            &Grid::Range {
                start,
                stop,
                step,
                times_pi,
            } => {
                if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(ExperimentError::Config(format!(
                        "bad range start={start} stop={stop} step={step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 100_000 {
                    return Err(ExperimentError::Config(format!("range with {count} points")));
                }
                let scale = if times_pi { std::f64::consts::PI } else { 1.0 };
                (0..count).map(|i| (start + i as f64 * step) * scale).collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(ExperimentError::Config("grid must hold finite values".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = ExperimentError;
    fn from_str(s: &str) -> ExpResult<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(ExperimentError::Config(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Hom,
    BoseHubbard,
    RandomSweep,
    Measures,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Hom => "hom",
            ExperimentKind::BoseHubbard => "bose_hubbard",
            ExperimentKind::RandomSweep => "random_sweep",
            ExperimentKind::Measures => "measures",
        }
    }
}

/// Top-level config document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomParams {
    #[serde(default = "default_unit_grid")]
    pub r_grid: Grid,
    #[serde(default = "default_theta_grid")]
    pub theta_grid: Grid,
    #[serde(default = "default_kind")]
    pub kind: ParticleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoseHubbardConfig {
    #[serde(default = "default_unit_grid")]
    pub gamma_grid: Grid,
    /// Times in units of `ħ/J`.
    #[serde(default = "default_t_grid")]
    pub t_grid: Grid,
    #[serde(default = "default_u_grid")]
    pub u_over_j_grid: Grid,
    /// Tilts `ω_2 - ω_1` in units of `J`.
    #[serde(default = "default_tilts")]
    pub tilts: Vec<f64>,
    #[serde(default = "default_povms")]
    pub povms: Vec<String>,
    #[serde(default = "default_j")]
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSweepParams {
    #[serde(default = "default_k_total")]
    pub k_total: usize,
    #[serde(default = "default_ls")]
    pub ls: Vec<usize>,
    #[serde(default = "default_three")]
    pub particles: usize,
    #[serde(default = "default_four")]
    pub n: usize,
    #[serde(default = "default_four")]
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuresParams {
    /// Relative paths resolve against the config file's directory.
    pub state_file: PathBuf,
}

fn default_unit_grid() -> Grid {
    Grid::range(0.0, 1.0, 0.05)
}
fn default_theta_grid() -> Grid {
    Grid::Range {
        start: 0.0,
        stop: 2.0,
        step: 1.0 / 12.0,
        times_pi: true,
    }
}
fn default_t_grid() -> Grid {
    Grid::range(0.0, 8.0, 0.1)
}
fn default_u_grid() -> Grid {
    Grid::range(0.0, 10.0, 0.25)
}
fn default_tilts() -> Vec<f64> {
    vec![0.0, 1.0]
}
fn default_povms() -> Vec<String> {
    ["O", "1P", "2P", "3P", "4P"].map(String::from).to_vec()
}
fn default_j() -> f64 {
    1.0
}
fn default_kind() -> ParticleKind {
    ParticleKind::Boson
}
fn default_k_total() -> usize {
    300
}
fn default_ls() -> Vec<usize> {
    vec![1, 3, 10, 30]
}
fn default_three() -> usize {
    3
}
fn default_four() -> usize {
    4
}

impl Default for HomParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}
impl Default for BoseHubbardConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}
impl Default for RandomSweepParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn params<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> ExpResult<T> {
    let v = if v.is_null() { serde_json::json!({}) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| ExperimentError::Config(format!("params: {e}")))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> ExpResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Schema check of the parameter block.
    pub fn check(&self) -> ExpResult<()> {
        match self.experiment {
            ExperimentKind::Hom => {
                let p: HomParams = params(&self.params)?;
                if p.r_grid.values()?.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return Err(ExperimentError::Config("r must lie in [0,1]".into()));
                }
                p.theta_grid.values()?;
            }
            ExperimentKind::BoseHubbard => {
                let p: BoseHubbardConfig = params(&self.params)?;
                if p.gamma_grid.values()?.iter().any(|g| !(0.0..=1.0).contains(g)) {
                    return Err(ExperimentError::Config("gamma must lie in [0,1]".into()));
                }
                p.t_grid.values()?;
                p.u_over_j_grid.values()?;
                if !(p.j > 0.0 && p.j.is_finite()) {
                    return Err(ExperimentError::Config("j must be positive".into()));
                }
                if p.tilts.is_empty() || p.povms.is_empty() {
                    return Err(ExperimentError::Config("tilts and povms must be non-empty".into()));
                }
                for name in &p.povms {
                    povm_by_name(name, 2, 4)?;
                }
            }
            ExperimentKind::RandomSweep => {
                let p: RandomSweepParams = params(&self.params)?;
                if p.k_total == 0 || p.ls.is_empty() || p.ls.contains(&0) {
                    return Err(ExperimentError::Config("k_total and every l must be positive".into()));
                }
                if p.particles < 2 || p.n < p.particles || p.m == 0 {
                    return Err(ExperimentError::Config("need 2 <= N <= n and m >= 1".into()));
                }
            }
            ExperimentKind::Measures => {
                params::<MeasuresParams>(&self.params)?;
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("serializable");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Cell of an output table.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Num(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            _ => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            Value::Num(x) => format!("{x:?}"),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Value::Num(x) => serde_json::json!(x),
            Value::Int(i) => serde_json::json!(i),
            Value::Text(s) => serde_json::json!(s),
            Value::Missing => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Numeric column by name.
    pub fn floats(&self, name: &str) -> Vec<Option<f64>> {
        let Some(i) = self.column(name) else { return Vec::new() };
        self.rows.iter().map(|r| r[i].as_f64()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn rows_json(&self) -> Vec<serde_json::Value> {
        self.rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect()
    }
}

/// Result of one run.
#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
    pub table: Table,
    /// Extra structured output (the `measures` report).
    pub extra: Option<serde_json::Value>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut meta = serde_json::json!({
            "version": VERSION,
            "experiment": self.experiment.name(),
            "config_hash": self.config_hash,
            "seed": self.seed,
            "columns": self.table.columns,
        });
        if !self.notes.is_empty() {
            meta["notes"] = serde_json::json!(self.notes);
        }
        let mut doc = serde_json::json!({ "meta": meta, "rows": self.table.rows_json() });
        if let Some(extra) = &self.extra {
            doc["report"] = extra.clone();
        }
        let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.table.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Runs a checked config. `base_dir` resolves relative state-file paths.
pub fn run(cfg: &ExperimentConfig, base_dir: &Path) -> ExpResult<Report> {
    cfg.check()?;
    let (table, notes, extra) = match cfg.experiment {
        ExperimentKind::Hom => {
            let (t, n) = run_hom(&params(&cfg.params)?)?;
            (t, n, None)
        }
        ExperimentKind::BoseHubbard => (run_bose_hubbard(&params(&cfg.params)?)?, Vec::new(), None),
        ExperimentKind::RandomSweep => (run_random_sweep(&params(&cfg.params)?, cfg.seed)?, Vec::new(), None),
        ExperimentKind::Measures => {
            let p: MeasuresParams = params(&cfg.params)?;
            let path = if p.state_file.is_absolute() {
                p.state_file.clone()
            } else {
                base_dir.join(&p.state_file)
            };
            let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            let (t, extra) = run_measures(&text)?;
            (t, Vec::new(), Some(extra))
        }
    };
    Ok(Report {
        experiment: cfg.experiment,
        seed: cfg.seed,
        config_hash: cfg.hash(),
        notes,
        table,
        extra,
    })
}

fn invariant(cond: bool, what: impl FnOnce() -> String) -> ExpResult<()> {
    if cond {
        Ok(())
    } else {
        Err(ExperimentError::Invariant(what()))
    }
}

// ---------------------------------------------------------------- HOM

pub const HOM_NOTE: &str = "internal realization: the coherence r e^{i theta} (exchange sign included) fixes the \
    block; for real values s = r cos(theta) it is realized by the product |a> (x) (sqrt(|s|)|a> + sqrt(1-|s|)|b>) \
    when the exchange sign matches sign(s), otherwise by cos(x)|ab> + sin(x)|ba> with sin(2x) = sign*s; \
    complex coherences have no internal-state realization with two particles";

/// Two-particle HOM block `(1/2) [[1, z], [z*, 1]]`, `z = r e^{i theta}`.
pub fn hom_block(r: f64, theta: f64, kind: ParticleKind) -> crate::error::Result<ExternalBlock> {
    let z = Complex64::from_polar(0.5 * r, theta);
    let h = Complex64::new(0.5, 0.0);
    let m = CMatrix::from_row_slice(2, 2, &[h, z, z.conj(), h]);
    ExternalBlock::from_coherences(&ModeOccupation::new(vec![1, 1])?, kind, m)
}

/// Internal state whose exchange overlap (sign included) equals the real
/// coherence `s`, and whether it is a product state.
pub fn hom_internal_state(s: f64, kind: ParticleKind) -> crate::error::Result<(PreparedState, bool)> {
    let s = s.clamp(-1.0, 1.0);
    let sign = kind.sign(&Permutation::from_images(vec![1, 0])?);
    let c = |x: f64| Complex64::new(x, 0.0);
    let (internal, product) = if sign * s >= 0.0 {
        let a = s.abs().sqrt();
        let b = (1.0 - s.abs()).max(0.0).sqrt();
        (InternalState::product(2, &[vec![c(1.0), c(0.0)], vec![c(a), c(b)]])?, true)
    } else {
        let x = 0.5 * (sign * s).asin();
        let amps: Amplitudes = [(vec![0, 1], c(x.cos())), (vec![1, 0], c(x.sin()))].into();
        (InternalState::pure(2, 2, amps)?, false)
    };
    let p = PreparedState::new(ModeOccupation::new(vec![1, 1])?, kind, internal)?;
    Ok((p, product))
}

pub const HOM_COLUMNS: &[&str] = &[
    "r",
    "theta",
    "p11",
    "p20",
    "p02",
    "v_t",
    "v_f",
    "d_t",
    "d_f",
    "res_p",
    "res_v",
    "res_d",
    "realization",
    "res_realization",
];

pub fn run_hom(p: &HomParams) -> ExpResult<(Table, Vec<String>)> {
    let rs = p.r_grid.values()?;
    let thetas = p.theta_grid.values()?;
    if rs.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(ExperimentError::Config("r must lie in [0,1]".into()));
    }
    let u = lift_single_particle(&beam_splitter(), 2)?;
    let povm = povm_occupation(2, 2)?;
    let kind = p.kind;
    let points: Vec<(f64, f64)> = rs.iter().flat_map(|&r| thetas.iter().map(move |&t| (r, t))).collect();
    let rows = points
        .par_iter()
        .map(|&(r, theta)| hom_row(r, theta, kind, &u, &povm))
        .collect::<ExpResult<Vec<_>>>()?;
    let mut table = Table::new(HOM_COLUMNS);
    table.rows = rows;
    Ok((table, vec![HOM_NOTE.to_string()]))
}

fn hom_row(r: f64, theta: f64, kind: ParticleKind, u: &UnitaryOperator, povm: &Povm) -> ExpResult<Vec<Value>> {
    let b = hom_block(r, theta, kind)?;
    let om = OrbitMeasurement::new(&b, u, povm)?;
    let dist = om.probabilities(b.distinguishable().matrix())?;
    let actual = om.probabilities(b.matrix())?;
    let get = |d: &ProbDist, l: &str| d.get(l).unwrap_or(f64::NAN);
    let (p11, p20, p02) = (get(&actual, "(1,1)"), get(&actual, "(2,0)"), get(&actual, "(0,2)"));
    let (v_t, v_f) = visibilities(&dist, &actual, 2)?;
    let (d_t, d_f) = distinguishability_block(&b)?;

    let rc = r * theta.cos();
    let res_p = [(p11, (1.0 - rc) / 2.0), (p20, (1.0 + rc) / 4.0), (p02, (1.0 + rc) / 4.0)]
        .iter()
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let res_v = (v_t - rc.abs()).abs().max((v_f - (1.0 - (1.0 - rc * rc).max(0.0).sqrt())).abs());
    let res_d = (d_t - (1.0 - r)).abs().max((d_f - (1.0 - r * r).max(0.0).sqrt()).abs());

    invariant(v_t <= 1.0 - d_t + SLACK && v_f <= 1.0 - d_f + SLACK, || {
        format!("HOM r={r} theta={theta}: visibility exceeds 1 - D")
    })?;
    invariant(res_p <= 1e-9 && res_v <= 1e-9 && res_d <= 1e-9, || {
        format!("HOM r={r} theta={theta}: closed-form residuals {res_p:e} {res_v:e} {res_d:e}")
    })?;

    // Real coherences also come from an explicit internal state.
    let (realization, res_real) = if theta.sin().abs() <= 1e-12 {
        let (state, product) = hom_internal_state(rc, kind)?;
        let realized = ExternalBlock::from_prepared(&state)?;
        let res = linalg::frobenius_distance(realized.matrix(), b.matrix());
        invariant(res <= 1e-10, || format!("HOM r={r} theta={theta}: realization residual {res:e}"))?;
        let name = if product { "product" } else { "entangled" };
        (Value::Text(name.into()), Value::Num(res))
    } else {
        (Value::Missing, Value::Missing)
    };
    Ok(vec![
        Value::Num(r),
        Value::Num(theta),
        Value::Num(p11),
        Value::Num(p20),
        Value::Num(p02),
        Value::Num(v_t),
        Value::Num(v_f),
        Value::Num(d_t),
        Value::Num(d_f),
        Value::Num(res_p),
        Value::Num(res_v),
        Value::Num(res_d),
        realization,
        res_real,
    ])
}

// ------------------------------------------------------- Bose-Hubbard

/// `Ω(γ) = |a a> (x) (γ|a> + sqrt(1-γ²)|b>)^{⊗2}` for occupation (2,2).
pub fn bose_hubbard_state(gamma: f64) -> crate::error::Result<PreparedState> {
    let c = |x: f64| Complex64::new(x, 0.0);
    let g = gamma.clamp(0.0, 1.0);
    let h = (1.0 - g * g).max(0.0).sqrt();
    let amps: Amplitudes = [
        (vec![0, 0, 0, 0], c(g * g)),
        (vec![0, 0, 1, 0], c(g * h)),
        (vec![0, 0, 0, 1], c(g * h)),
        (vec![0, 0, 1, 1], c(h * h)),
    ]
    .into_iter()
    .filter(|(_, a)| a.norm() > 0.0)
    .collect();
    let internal = InternalState::pure(2, 4, amps)?;
    PreparedState::new(ModeOccupation::new(vec![2, 2])?, ParticleKind::Boson, internal)
}

/// `"O"` (occupation) or `"kP"` (k-point correlator).
pub fn povm_by_name(name: &str, modes: usize, particles: usize) -> ExpResult<Povm> {
    if name == "O" {
        return Ok(povm_occupation(modes, particles)?);
    }
    let k = name
        .strip_suffix('P')
        .and_then(|k| k.parse::<usize>().ok())
        .ok_or_else(|| ExperimentError::Config(format!("unknown POVM {name:?}")))?;
    povm_kpoint(modes, particles, k).map_err(|e| ExperimentError::Config(e.to_string()))
}

pub const BOSE_HUBBARD_COLUMNS: &[&str] = &["tilt", "u_over_j", "t", "gamma", "povm", "v_t", "v_f", "bound", "bound_f"];

struct GammaData {
    gamma: f64,
    rho: CMatrix,
    bound: f64,
    bound_f: f64,
}

pub fn run_bose_hubbard(p: &BoseHubbardConfig) -> ExpResult<Table> {
    let gammas = p.gamma_grid.values()?;
    let ts = p.t_grid.values()?;
    let us = p.u_over_j_grid.values()?;
    let povms = p
        .povms
        .iter()
        .map(|n| Ok((n.clone(), povm_by_name(n, 2, 4)?)))
        .collect::<ExpResult<Vec<_>>>()?;

    let blocks = gammas
        .iter()
        .map(|&g| {
            let b = ExternalBlock::from_prepared(&bose_hubbard_state(g)?)?;
            let (d_t, d_f) = distinguishability_block(&b)?;
            Ok(GammaData {
                gamma: g,
                rho: b.matrix().clone(),
                bound: 1.0 - d_t,
                bound_f: 1.0 - d_f,
            })
        })
        .collect::<ExpResult<Vec<_>>>()?;
    let reference = ExternalBlock::from_prepared(&bose_hubbard_state(1.0)?)?;
    let dist = reference.distinguishable().into_matrix();
    let r = reference.r_count();

    let cases: Vec<(f64, f64)> = p.tilts.iter().flat_map(|&f| us.iter().map(move |&u| (f, u))).collect();
    let chunks = cases
        .par_iter()
        .map(|&(tilt, u_over_j)| {
            let params = BoseHubbardParams::double_well(4, p.j, u_over_j * p.j, tilt * p.j);
            let prop = Propagator::new(&bose_hubbard_hamiltonian(&params)?)?;
            let mut rows = Vec::new();
            for &t in &ts {
                let u = prop.at(t / p.j)?;
                let oms = povms
                    .iter()
                    .map(|(name, m)| Ok((name, OrbitMeasurement::new(&reference, &u, m)?)))
                    .collect::<ExpResult<Vec<_>>>()?;
                for gd in &blocks {
                    for (name, om) in &oms {
                        let pd = om.probabilities(&dist)?;
                        let pa = om.probabilities(&gd.rho)?;
                        let (v_t, v_f) = visibilities(&pd, &pa, r)?;
                        invariant(v_t <= gd.bound + SLACK && v_f <= gd.bound_f + SLACK, || {
                            format!(
                                "Bose-Hubbard tilt={tilt} U/J={u_over_j} t={t} gamma={} povm={name}: \
                                 V_T={v_t} V_F={v_f} above bounds {} {}",
                                gd.gamma, gd.bound, gd.bound_f
                            )
                        })?;
                        rows.push(vec![
                            Value::Num(tilt),
                            Value::Num(u_over_j),
                            Value::Num(t),
                            Value::Num(gd.gamma),
                            Value::Text(name.to_string()),
                            Value::Num(v_t),
                            Value::Num(v_f),
                            Value::Num(gd.bound),
                            Value::Num(gd.bound_f),
                        ]);
                    }
                }
            }
            Ok(rows)
        })
        .collect::<ExpResult<Vec<_>>>()?;
    let mut table = Table::new(BOSE_HUBBARD_COLUMNS);
    table.rows = chunks.into_iter().flatten().collect();
    Ok(table)
}

// ------------------------------------------------------- random sweep

pub const SWEEP_COLUMNS: &[&str] = &["k", "l", "seed", "w_c2", "w_p2", "p_t2", "p_f2"];

/// Per-state seeds, drawn in `(l, k)` order from one master stream.
pub fn sweep_seeds(seed: u64, ls: &[usize], k_total: usize) -> Vec<(usize, usize, u64)> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(ls.len() * k_total);
    for &l in ls {
        for k in 0..k_total {
            out.push((l, k, master.random::<u64>()));
        }
    }
    out
}

pub fn run_random_sweep(p: &RandomSweepParams, seed: u64) -> ExpResult<Table> {
    let jobs = sweep_seeds(seed, &p.ls, p.k_total);
    let rows = jobs
        .par_iter()
        .map(|&(l, k, s)| {
            let state = random_prepared_state(k, p.k_total, l, p.n, p.m, p.particles, s)?;
            let rep = measure_report(&state)?;
            let (wc2, wp2, pt2, pf2) = (rep.w_c.powi(2), rep.w_p.powi(2), rep.p_t.powi(2), rep.p_f.powi(2));
            for (pp, ww, name) in [
                (pt2, wc2, "P_T²+W_C²"),
                (pt2, wp2, "P_T²+W_P²"),
                (pf2, wc2, "P_F²+W_C²"),
                (pf2, wp2, "P_F²+W_P²"),
            ] {
                invariant(pp + ww <= 1.0 + SLACK, || format!("sweep l={l} k={k}: {name} = {}", pp + ww))?;
            }
            if l == 1 {
                invariant((pf2 + wp2 - 1.0).abs() <= SLACK, || {
                    format!("sweep l=1 k={k}: pure state misses saturation by {:e}", pf2 + wp2 - 1.0)
                })?;
            }
            Ok(vec![
                Value::Int(k as u64),
                Value::Int(l as u64),
                Value::Int(s),
                Value::Num(wc2),
                Value::Num(wp2),
                Value::Num(pt2),
                Value::Num(pf2),
            ])
        })
        .collect::<ExpResult<Vec<_>>>()?;
    let mut table = Table::new(SWEEP_COLUMNS);
    table.rows = rows;
    Ok(table)
}

// ------------------------------------------------------- measures

pub const MEASURES_COLUMNS: &[&str] = &[
    "kind",
    "occupation",
    "r_count",
    "w_c",
    "w_p",
    "p_t",
    "p_f",
    "pairwise_f",
    "d_t",
    "d_f",
    "lambda",
    "eigen_residual",
];

/// Report of one state file: table row plus a structured document.
pub fn run_measures(text: &str) -> ExpResult<(Table, serde_json::Value)> {
    let p = parse_state(text)?;
    let b = ExternalBlock::from_prepared(&p)?;
    let rep = measure_report(&p)?;
    let (d_t, d_f) = distinguishability_block(&b)?;
    let (lambda, residual) = match (ideal_fidelity_lambda_block(&b), eigen_residual_block(&b)) {
        (Ok(l), Ok(res)) => (Value::Num(l), Value::Num(res)),
        // Fermions sharing a mode have no ideal reference state.
        (Err(Error::PauliViolation(_)), _) => (Value::Missing, Value::Missing),
        (Err(e), _) | (_, Err(e)) => return Err(e.into()),
    };
    let mut table = Table::new(MEASURES_COLUMNS);
    table.rows.push(vec![
        Value::Text(p.kind().to_string()),
        Value::Text(p.occupation().to_string()),
        Value::Int(rep.r_count as u64),
        Value::Num(rep.w_c),
        Value::Num(rep.w_p),
        Value::Num(rep.p_t),
        Value::Num(rep.p_f),
        Value::Num(rep.pairwise_f),
        Value::Num(d_t),
        Value::Num(d_f),
        lambda.clone(),
        residual.clone(),
    ]);
    let extra = serde_json::json!({
        "validation": { "ok": true, "diagnostics": [] },
        "preparation": p.preparation().to_string(),
        "measures": rep,
        "distinguishability": { "d_t": d_t, "d_f": d_f },
        "lambda": lambda.json(),
        "eigen_residual": residual.json(),
    });
    Ok((table, extra))
}

// ------------------------------------------------------- assessments

/// Classical quantities of one `(U, M)` pair.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalCheck {
    pub unitary: usize,
    pub povm: String,
    /// Classical particle measures from the statistics `P^kappa`.
    pub cp_t: f64,
    pub cp_f: f64,
    pub v_t: f64,
    pub v_f: f64,
    /// `D(P^{B(F)}, P)`.
    pub d_ideal: f64,
}

/// Every measure of one state, with classical checks for given unitaries.
#[derive(Debug, Clone, Serialize)]
pub struct Assessment {
    pub w_c: f64,
    pub w_p: f64,
    pub p_t: f64,
    pub p_f: f64,
    pub d_t: f64,
    pub d_f: f64,
    pub lambda: f64,
    pub eigen_residual: f64,
    /// `D(rho_E^{B(F)}, rho_E)`.
    pub d_ideal: f64,
    pub classical: Vec<ClassicalCheck>,
}

/// Assesses `p` under the lifted unitaries `u^{⊗N}` with the occupation
/// POVM and the Helstrom POVMs of `(rho^{B(F)}, rho)` and `(rho^D, rho)`.
pub fn assess(p: &PreparedState, single_particle: &[UnitaryOperator]) -> ExpResult<Assessment> {
    let b = ExternalBlock::from_prepared(p)?;
    let rep = measure_report(p)?;
    let (d_t, d_f) = distinguishability_block(&b)?;
    let lambda = ideal_fidelity_lambda_block(&b)?;
    let eigen_residual = eigen_residual_block(&b)?;
    let ideal = b.ideal()?;
    let dist = b.distinguishable();
    let d_ideal = linalg::trace_distance(&ideal, &b.density())?;

    let t = p.transversal()?;
    let labeled = t
        .reps()
        .iter()
        .map(|kappa| {
            let q = p.clone().with_preparation(p.preparation().compose(kappa)?)?;
            Ok(ExternalBlock::from_prepared(&q)?.matrix().clone())
        })
        .collect::<ExpResult<Vec<_>>>()?;

    let r = b.r_count();
    let occ_povm = povm_occupation(p.modes(), p.particles())?;
    let rho_full = b.embed()?;
    let ideal_full = b.embed_matrix(ideal.matrix())?;
    let dist_full = b.embed_matrix(dist.matrix())?;
    let mut classical = Vec::new();
    for (i, u1) in single_particle.iter().enumerate() {
        let u = lift_single_particle(u1, p.particles())?;
        let evolve = |m: &CMatrix| u.matrix() * m * u.matrix().adjoint();
        let rho_u = evolve(rho_full.matrix());
        let povms = [
            ("O".to_string(), occ_povm.clone()),
            ("H_ideal".to_string(), helstrom_from_difference(&(evolve(&ideal_full) - &rho_u))?),
            ("H_dist".to_string(), helstrom_from_difference(&(evolve(&dist_full) - &rho_u))?),
        ];
        for (name, m) in povms {
            let om = OrbitMeasurement::new(&b, &u, &m)?;
            let pa = om.probabilities(b.matrix())?;
            let pd = om.probabilities(dist.matrix())?;
            let pb = om.probabilities(ideal.matrix())?;
            let stats = labeled.iter().map(|blk| om.probabilities(blk)).collect::<crate::error::Result<Vec<_>>>()?;
            let (cp_t, cp_f) = classical_particle_measures(&stats)?;
            let (v_t, v_f) = visibilities(&pd, &pa, r)?;
            classical.push(ClassicalCheck {
                unitary: i,
                povm: name,
                cp_t,
                cp_f,
                v_t,
                v_f,
                d_ideal: kolmogorov(&pb, &pa)?,
            });
        }
    }
    let (w_c, w_p) = wave_measures_block(&b)?;
    debug_assert!((w_c - rep.w_c).abs() < 1e-9 && (w_p - rep.w_p).abs() < 1e-9);
    Ok(Assessment {
        w_c: rep.w_c,
        w_p: rep.w_p,
        p_t: rep.p_t,
        p_f: rep.p_f,
        d_t,
        d_f,
        lambda,
        eigen_residual,
        d_ideal,
        classical,
    })
}

/// Failed inequalities of an assessment, with `slack`.
pub fn inequality_failures(a: &Assessment, slack: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            out.push(what);
        }
    };
    check(a.w_c <= a.w_p + slack, format!("W_C {} > W_P {}", a.w_c, a.w_p));
    check(a.p_t <= a.p_f + slack, format!("P_T {} > P_F {}", a.p_t, a.p_f));
    for (pn, pv) in [("P_T", a.p_t), ("P_F", a.p_f)] {
        for (wn, wv) in [("W_C", a.w_c), ("W_P", a.w_p)] {
            check(pv * pv + wv * wv <= 1.0 + slack, format!("{pn}²+{wn}² = {}", pv * pv + wv * wv));
        }
    }
    for (dn, dv) in [("D_T", a.d_t), ("D_F", a.d_f)] {
        for (wn, wv) in [("W_C", a.w_c), ("W_P", a.w_p)] {
            check(dv * dv + wv * wv <= 1.0 + slack, format!("{dn}²+{wn}² = {}", dv * dv + wv * wv));
        }
    }
    for c in &a.classical {
        let tag = format!("U{} {}", c.unitary, c.povm);
        check(c.cp_t <= c.cp_f + slack, format!("{tag}: classical P_T {} > P_F {}", c.cp_t, c.cp_f));
        check(c.cp_t <= a.p_t + slack, format!("{tag}: classical P_T {} > P_T {}", c.cp_t, a.p_t));
        check(c.cp_f <= a.p_f + slack, format!("{tag}: classical P_F {} > P_F {}", c.cp_f, a.p_f));
        check(a.d_t + c.v_t <= 1.0 + slack, format!("{tag}: D_T + V_T = {}", a.d_t + c.v_t));
        check(a.d_f + c.v_f <= 1.0 + slack, format!("{tag}: D_F + V_F = {}", a.d_f + c.v_f));
        check(c.d_ideal + a.lambda <= 1.0 + slack, format!("{tag}: D(P^B,P) + lambda = {}", c.d_ideal + a.lambda));
    }
    out
}

/// `count` Haar-random single-particle unitaries.
pub fn random_unitaries(dim: usize, count: usize, seed: u64) -> Vec<UnitaryOperator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| haar_unitary(dim, &mut rng)).collect()
}

/// Writes a report to `out` (or returns it as text when `out` is `None`).
pub fn write_report(report: &Report, format: OutputFormat, out: Option<&Path>) -> ExpResult<Option<String>> {
    let text = report.render(format);
    match out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|source| ExperimentError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

/// One-line summary for logs.
pub fn summary(report: &Report) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{} rows={} seed={} hash={}",
        report.experiment.name(),
        report.table.rows.len(),
        report.seed,
        &report.config_hash[..12]
    );
    s
}
