//! Python bindings for `treedep`.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use treedep::hmm::{self, ErrorFamily, SigmaSchedule};
use treedep::ordering::{audit_theorem_conditions, AuditSpec, Theorem};
use treedep::TheoremQuery;

fn to_py(e: treedep::Error) -> PyErr {
    match e {
        treedep::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Bivariate copula given by a literal such as `"clayton(2)"`.
#[pyclass(frozen, name = "Copula", module = "treedep")]
struct PyCopula(treedep::Copula);

#[pymethods]
impl PyCopula {
    #[new]
    fn new(literal: &str) -> PyResult<Self> {
        literal.parse().map(PyCopula).map_err(to_py)
    }

    fn cdf(&self, u: f64, v: f64) -> PyResult<f64> {
        self.0.cdf(u, v).map_err(to_py)
    }

    /// Conditional distribution of the second coordinate given the first.
    fn h(&self, u: f64, v: f64) -> PyResult<f64> {
        self.0.h(u, v).map_err(to_py)
    }

    fn h_inv(&self, u: f64, p: f64) -> PyResult<f64> {
        self.0.h_inv(u, p).map_err(to_py)
    }

    fn kendall_tau(&self) -> f64 {
        self.0.kendall_tau()
    }

    fn __repr__(&self) -> String {
        format!("Copula({:?})", self.0.to_string())
    }
}

#[pyclass(frozen, name = "Marginal", module = "treedep")]
struct PyMarginal(treedep::Marginal);

#[pymethods]
impl PyMarginal {
    #[new]
    fn new(literal: &str) -> PyResult<Self> {
        literal.parse().map(PyMarginal).map_err(to_py)
    }

    fn cdf(&self, x: f64) -> PyResult<f64> {
        self.0.cdf(x).map_err(to_py)
    }

    fn quantile(&self, t: f64) -> PyResult<f64> {
        self.0.quantile(t).map_err(to_py)
    }

    fn is_continuous(&self) -> bool {
        self.0.is_continuous()
    }

    fn __repr__(&self) -> String {
        format!("Marginal({:?})", self.0.to_string())
    }
}

/// Marginals, tree and edge copulas of a Markov tree law.
#[pyclass(frozen, name = "TreeSpec", module = "treedep")]
struct PyTreeSpec(treedep::sampler::TreeSpec);

#[pymethods]
impl PyTreeSpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        treedep::sampler::TreeSpec::from_json_str(text, None).map(PyTreeSpec).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        treedep::sampler::TreeSpec::load(&path).map(PyTreeSpec).map_err(to_py)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.tree().node_count()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.tree().edges().to_vec()
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }

    fn fingerprint(&self) -> u64 {
        self.0.fingerprint()
    }

    /// `n` rows of node values; the GIL is released while sampling.
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let batch = py.detach(|| treedep::sampler::sample(&self.0, n, seed)).map_err(to_py)?;
        Ok((0..n).map(|k| batch.row(k).to_vec()).collect())
    }
}

#[pyclass(frozen, get_all, name = "BandResult", module = "treedep")]
struct PyBandResult {
    t_grid: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    mc_halfwidth: Vec<f64>,
    n_samples: usize,
    seed: u64,
}

#[pymethods]
impl PyBandResult {
    /// Grid indices where the no-error curve drops below the perturbed one
    /// by more than the Monte Carlo half-widths.
    fn dominance_violations(&self) -> Vec<usize> {
        (0..self.t_grid.len()).filter(|&k| self.upper[k] < self.lower[k] - self.mc_halfwidth[k]).collect()
    }
}

#[pyfunction]
fn theta_from_rho(rho: f64) -> PyResult<f64> {
    treedep::copulas::theta_from_rho(rho).map_err(to_py)
}

/// Reports of the embedded counterexamples as a JSON string.
#[pyfunction]
fn counterexamples() -> PyResult<String> {
    let reports = treedep::counterexamples::run_all().map_err(to_py)?;
    Ok(serde_json::to_string(&reports).expect("reports serialize"))
}

/// Audits two JSON specifications. Returns the verdict for `theorem`
/// (`"true"`, `"false"` or `"undecided"`) and the full report as JSON.
#[pyfunction]
#[pyo3(signature = (x_json, y_json, theorem = "tree-sm", path = None, k_star = None))]
fn check(x_json: &str, y_json: &str, theorem: &str, path: Option<Vec<usize>>, k_star: Option<usize>) -> PyResult<(String, String)> {
    let theorem: Theorem = serde_json::from_value(serde_json::Value::from(theorem)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let x = AuditSpec::from_json_str(x_json, None).map_err(to_py)?;
    let y = AuditSpec::from_json_str(y_json, None).map_err(to_py)?;
    let default = TheoremQuery::default_for(x.tree()).map_err(to_py)?;
    let query = TheoremQuery::new(path.unwrap_or(default.path), k_star.unwrap_or(default.k_star));
    query.validate(x.tree()).map_err(to_py)?;
    let report = audit_theorem_conditions(&x, &y, &query).map_err(to_py)?;
    let holds = report
        .verdict(theorem)
        .map(|v| serde_json::to_value(v.holds).expect("serializes").as_str().unwrap_or_default().to_owned())
        .ok_or_else(|| PyValueError::new_err("theorem not audited for this kind of specification"))?;
    Ok((holds, serde_json::to_string(&report).expect("report serializes")))
}

#[pyfunction]
#[pyo3(signature = (steps, family = "gaussian", sigma = "const:3", n_samples = hmm::DEFAULT_SAMPLES, seed = 0))]
fn uncertainty_band(py: Python<'_>, steps: usize, family: &str, sigma: &str, n_samples: usize, seed: u64) -> PyResult<PyBandResult> {
    let family: ErrorFamily = family.parse().map_err(to_py)?;
    let schedule: SigmaSchedule = sigma.parse().map_err(to_py)?;
    let grid = hmm::default_t_grid(steps);
    let b = py
        .detach(|| hmm::uncertainty_band(steps, family, &schedule.values(steps), n_samples, seed, &grid))
        .map_err(to_py)?;
    Ok(PyBandResult {
        mc_halfwidth: b.mc_halfwidth(),
        t_grid: b.t_grid,
        lower: b.lower_ecdf,
        upper: b.upper_ecdf,
        n_samples: b.n_samples,
        seed: b.seed,
    })
}

#[pymodule]
fn treedep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCopula>()?;
    m.add_class::<PyMarginal>()?;
    m.add_class::<PyTreeSpec>()?;
    m.add_class::<PyBandResult>()?;
    m.add_function(wrap_pyfunction!(theta_from_rho, m)?)?;
    m.add_function(wrap_pyfunction!(counterexamples, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(uncertainty_band, m)?)?;
    Ok(())
}
