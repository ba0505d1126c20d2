//! Python module `duality`.

use std::path::Path;

use duality_core::combinatorics::{right_transversal, ModeOccupation, Permutation};
use duality_core::experiments::{self, ExperimentConfig, ExperimentError, OutputFormat};
use duality_core::measures;
use duality_core::state_file::{parse_state, to_json, StateFileError};
use duality_core::states::{self, ExternalBlock, ParticleKind};
use duality_core::Error;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(duality, StateValidationError, PyValueError);
create_exception!(duality, InvariantViolation, PyException);

fn core_err(e: Error) -> PyErr {
    match e {
        Error::InvalidState(_) | Error::PauliViolation(_) => StateValidationError::new_err(e.to_string()),
        Error::InvariantViolation(_) => InvariantViolation::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn file_err(e: StateFileError) -> PyErr {
    match e {
        StateFileError::Syntax { .. } => PyValueError::new_err(e.to_string()),
        StateFileError::Invalid { .. } => StateValidationError::new_err(e.to_string()),
    }
}

fn exp_err(e: ExperimentError) -> PyErr {
    match e.exit_code() {
        2 => StateValidationError::new_err(e.to_string()),
        3 => InvariantViolation::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows(m: &duality_core::linalg::CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn parse_kind(kind: &str) -> PyResult<ParticleKind> {
    kind.parse().map_err(|e: Error| PyValueError::new_err(e.to_string()))
}

/// Validated state of partially distinguishable particles.
#[pyclass(name = "PreparedState", module = "duality", frozen)]
struct PyPreparedState {
    inner: states::PreparedState,
}

#[pymethods]
impl PyPreparedState {
    /// Parses a JSON state document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_state(text).map_err(file_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_json(&text)
    }

    /// Random bosonic state in `n` singly occupied modes.
    #[staticmethod]
    #[pyo3(signature = (k, total, components, n, m, particles, seed))]
    fn random(k: usize, total: usize, components: usize, n: usize, m: usize, particles: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: states::random_prepared_state(k, total, components, n, m, particles, seed).map_err(core_err)?,
        })
    }

    fn to_json(&self) -> String {
        to_json(&self.inner)
    }

    /// Same state prepared with the permutation given in cycle notation.
    fn with_preparation(&self, cycles: &str) -> PyResult<Self> {
        let kappa = Permutation::parse_cycles(cycles, self.inner.particles()).map_err(core_err)?;
        Ok(Self {
            inner: self.inner.clone().with_preparation(kappa).map_err(core_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    #[getter]
    fn occupation(&self) -> Vec<usize> {
        self.inner.occupation().counts().to_vec()
    }

    #[getter]
    fn r_count(&self) -> usize {
        self.inner.occupation().r_count()
    }

    /// Reduced external state on the labeling orbit, as rows of complex numbers.
    fn reduced_external(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(ExternalBlock::from_prepared(&self.inner).map_err(core_err)?.matrix()))
    }

    /// Mixture of the labeled internal states.
    fn reduced_internal(&self) -> PyResult<Vec<Vec<Complex64>>> {
        Ok(rows(states::reduced_internal(&self.inner).map_err(core_err)?.matrix()))
    }

    /// `W_C, W_P, P_T, P_F`, pairwise fidelity mean, `D_T, D_F` and `lambda`.
    fn measures<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rep = measures::measure_report(&self.inner).map_err(core_err)?;
        let b = ExternalBlock::from_prepared(&self.inner).map_err(core_err)?;
        let (d_t, d_f) = measures::distinguishability_block(&b).map_err(core_err)?;
        let d = PyDict::new(py);
        d.set_item("w_c", rep.w_c)?;
        d.set_item("w_p", rep.w_p)?;
        d.set_item("p_t", rep.p_t)?;
        d.set_item("p_f", rep.p_f)?;
        d.set_item("pairwise_f", rep.pairwise_f)?;
        d.set_item("d_t", d_t)?;
        d.set_item("d_f", d_f)?;
        d.set_item("r_count", rep.r_count)?;
        match measures::ideal_fidelity_lambda_block(&b) {
            Ok(l) => d.set_item("lambda", l)?,
            Err(Error::PauliViolation(_)) => d.set_item("lambda", py.None())?,
            Err(e) => return Err(core_err(e)),
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "PreparedState(kind={}, occupation={}, preparation={})",
            self.inner.kind(),
            self.inner.occupation(),
            self.inner.preparation()
        )
    }
}

/// Transversal representatives in cycle notation.
#[pyfunction]
fn transversal(occupation: Vec<usize>) -> PyResult<Vec<String>> {
    let occ = ModeOccupation::new(occupation).map_err(core_err)?;
    let t = right_transversal(&occ).map_err(core_err)?;
    Ok(t.reps().iter().map(|p| p.to_string()).collect())
}

/// HOM statistics and measures for coherence `r e^{i theta}`.
#[pyfunction]
#[pyo3(signature = (r, theta, kind = "boson"))]
fn hom<'py>(py: Python<'py>, r: f64, theta: f64, kind: &str) -> PyResult<Bound<'py, PyDict>> {
    let params = experiments::HomParams {
        r_grid: experiments::Grid::Values(vec![r]),
        theta_grid: experiments::Grid::Values(vec![theta]),
        kind: parse_kind(kind)?,
    };
    let (table, _) = experiments::run_hom(&params).map_err(exp_err)?;
    let d = PyDict::new(py);
    for (col, v) in table.columns.iter().zip(&table.rows[0]) {
        match v {
            experiments::Value::Num(x) => d.set_item(*col, *x)?,
            experiments::Value::Int(i) => d.set_item(*col, *i)?,
            experiments::Value::Text(s) => d.set_item(*col, s)?,
            experiments::Value::Missing => d.set_item(*col, py.None())?,
        }
    }
    Ok(d)
}

/// Runs a JSON experiment config and returns the JSON report.
#[pyfunction]
#[pyo3(signature = (config, base_dir = "."))]
fn run_config(py: Python<'_>, config: &str, base_dir: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(exp_err)?;
    let base = base_dir.to_string();
    let report = py
        .detach(move || experiments::run(&cfg, Path::new(&base)))
        .map_err(exp_err)?;
    Ok(report.render(OutputFormat::Json))
}

#[pymodule]
fn duality(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", experiments::VERSION)?;
    m.add_class::<PyPreparedState>()?;
    m.add_function(wrap_pyfunction!(transversal, m)?)?;
    m.add_function(wrap_pyfunction!(hom, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("StateValidationError", m.py().get_type::<StateValidationError>())?;
    m.add("InvariantViolation", m.py().get_type::<InvariantViolation>())?;
    Ok(())
}
