//! Python bindings. Results that are documents (analysis reports,
//! simulation results) cross the boundary as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use rank_effects::covariance::Estimator;
use rank_effects::inference::PatternChoice;
use rank_effects::io::{self, AnalyzeOptions, Dataset, ParseOptions};
use rank_effects::simulation::{self, Distribution, GridOptions};
use rank_effects::{
    build_rank_table, covariance_general, covariance_simple, derive_pattern_index, placements,
    CovarianceEstimate, Error, Hypothesis, Method,
};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_methods(methods: Option<Vec<String>>) -> PyResult<Vec<Method>> {
    match methods {
        None => Ok(Method::ALL.to_vec()),
        Some(list) => list
            .iter()
            .map(|m| {
                Method::parse(m)
                    .ok_or_else(|| PyValueError::new_err(format!("unknown method '{m}'")))
            })
            .collect(),
    }
}

fn parse_pattern(pattern: &str) -> PyResult<PatternChoice> {
    PatternChoice::parse(pattern).ok_or_else(|| {
        PyValueError::new_err(format!(
            "pattern must be auto, simple or general, got '{pattern}'"
        ))
    })
}

/// Paired two-group observations. `subjects[k]` holds the `2d` cells of
/// subject `k` (group 1 components, then group 2), `None` where missing.
#[pyclass(name = "MaskedSample", module = "rank_effects", frozen)]
struct PySample {
    inner: rank_effects::MaskedSample,
    labels: Vec<String>,
}

#[pymethods]
impl PySample {
    #[new]
    #[pyo3(signature = (subjects, labels = None))]
    fn new(subjects: Vec<Vec<Option<f64>>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let width = subjects.first().map_or(0, Vec::len);
        if width == 0 || !width.is_multiple_of(2) {
            return Err(PyValueError::new_err("each subject needs 2d cells"));
        }
        let d = width / 2;
        let inner = rank_effects::MaskedSample::from_subjects(d, &subjects).map_err(py_err)?;
        let labels = labels.unwrap_or_else(|| (1..=d).map(|l| format!("var{l}")).collect());
        if labels.len() != d {
            return Err(PyValueError::new_err(format!(
                "expected {d} labels, got {}",
                labels.len()
            )));
        }
        Ok(Self { inner, labels })
    }

    /// Reads a wide CSV file.
    #[staticmethod]
    #[pyo3(signature = (path, na_token = "NA"))]
    fn from_csv(path: &str, na_token: &str) -> PyResult<Self> {
        let opts = ParseOptions {
            na_token: na_token.into(),
            ..ParseOptions::default()
        };
        let ds = io::parse_dataset(path, &opts).map_err(py_err)?;
        Ok(Self {
            inner: ds.sample,
            labels: ds.labels,
        })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }

    /// Subject-wise cells, `None` where missing.
    fn subjects(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.inner.n()).map(|k| self.inner.subject(k)).collect()
    }

    /// Complete / group-1-only / group-2-only subject indices per component.
    fn pattern<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &derive_pattern_index(&self.inner))
    }

    fn to_csv(&self, na_token: Option<&str>) -> String {
        io::write_dataset(&self.inner, &self.labels, na_token.unwrap_or("NA"))
    }

    fn __repr__(&self) -> String {
        format!("MaskedSample(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Effect estimates `p_hat` (one per component).
#[pyfunction]
fn estimate_effects(sample: &PySample) -> PyResult<Vec<f64>> {
    let s = &sample.inner;
    let idx = derive_pattern_index(s);
    let ranks = build_rank_table(s, &idx).map_err(py_err)?;
    Ok(rank_effects::estimate_effects(s, &idx, &ranks)
        .map_err(py_err)?
        .p_hat)
}

/// Covariance estimate as a dict (`v_hat`, `trace`, `nu_hat`, `flags`, ...).
#[pyfunction]
#[pyo3(signature = (sample, pattern = "auto"))]
fn covariance<'py>(
    py: Python<'py>,
    sample: &PySample,
    pattern: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let s = &sample.inner;
    let idx = derive_pattern_index(s);
    let ranks = build_rank_table(s, &idx).map_err(py_err)?;
    let simple = match parse_pattern(pattern)? {
        PatternChoice::Auto => idx.is_simple_pattern(),
        PatternChoice::Simple => {
            if !idx.is_simple_pattern() {
                return Err(py_err(Error::PatternMismatch(
                    "data do not have treatment-level missingness".into(),
                )));
            }
            true
        }
        PatternChoice::General => false,
    };
    let cov = if simple {
        covariance_simple(s, &idx, &ranks)
    } else {
        placements(&ranks, &idx).and_then(|y| covariance_general(s, &idx, &y))
    }
    .map_err(py_err)?;
    to_py(py, &cov)
}

fn test_inputs(
    p_hat: Vec<f64>,
    v_hat: Vec<Vec<f64>>,
) -> PyResult<(rank_effects::EffectEstimate, CovarianceEstimate)> {
    let d = p_hat.len();
    let effects = rank_effects::EffectEstimate {
        p_hat,
        theta: vec![[1.0, 1.0]; d],
        counts: Vec::new(),
        method: Method::All,
    };
    let cov = CovarianceEstimate::from_rows(Estimator::General, v_hat).map_err(py_err)?;
    Ok((effects, cov))
}

/// Wald-type test of `p = 1/2` from an effect vector and covariance.
#[pyfunction]
#[pyo3(signature = (p_hat, v_hat, n, alpha = 0.05))]
fn wald_test<'py>(
    py: Python<'py>,
    p_hat: Vec<f64>,
    v_hat: Vec<Vec<f64>>,
    n: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let (e, c) = test_inputs(p_hat, v_hat)?;
    let hyp = Hypothesis::new(alpha).map_err(py_err)?;
    to_py(
        py,
        &rank_effects::wald_test(&e, &c, n, &hyp).map_err(py_err)?,
    )
}

/// ANOVA-type test of `p = 1/2` from an effect vector and covariance.
#[pyfunction]
#[pyo3(signature = (p_hat, v_hat, n, alpha = 0.05))]
fn anova_test<'py>(
    py: Python<'py>,
    p_hat: Vec<f64>,
    v_hat: Vec<Vec<f64>>,
    n: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let (e, c) = test_inputs(p_hat, v_hat)?;
    let hyp = Hypothesis::new(alpha).map_err(py_err)?;
    to_py(
        py,
        &rank_effects::anova_test(&e, &c, n, &hyp).map_err(py_err)?,
    )
}

fn options(
    alpha: f64,
    methods: Option<Vec<String>>,
    pattern: &str,
    na_token: &str,
) -> PyResult<AnalyzeOptions> {
    Ok(AnalyzeOptions {
        alpha,
        methods: parse_methods(methods)?,
        pattern: parse_pattern(pattern)?,
        na_token: na_token.into(),
        ..AnalyzeOptions::default()
    })
}

/// Full analysis report (same document as `rank-effects analyze`).
#[pyfunction]
#[pyo3(signature = (sample, alpha = 0.05, methods = None, pattern = "auto"))]
fn analyze<'py>(
    py: Python<'py>,
    sample: &PySample,
    alpha: f64,
    methods: Option<Vec<String>>,
    pattern: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = options(alpha, methods, pattern, "NA")?;
    let data = Dataset {
        sample: sample.inner.clone(),
        labels: sample.labels.clone(),
    };
    to_py(
        py,
        &io::analyze_dataset(&data, &opts, None).map_err(py_err)?,
    )
}

/// Analysis report of a wide CSV file.
#[pyfunction]
#[pyo3(signature = (path, alpha = 0.05, methods = None, pattern = "auto", na_token = "NA"))]
fn analyze_csv<'py>(
    py: Python<'py>,
    path: &str,
    alpha: f64,
    methods: Option<Vec<String>>,
    pattern: &str,
    na_token: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let opts = options(alpha, methods, pattern, na_token)?;
    to_py(py, &io::analyze_file(path, &opts).map_err(py_err)?)
}

/// `P(chi^2_k >= x)` for real `k > 0`.
#[pyfunction]
fn chisq_upper_tail(x: f64, k: f64) -> PyResult<f64> {
    rank_effects::chisq_upper_tail(x, k).map_err(py_err)
}

/// Runs a built-in simulation grid; returns the list of results.
#[pyfunction]
#[pyo3(signature = (name, reps = 1000, seed = 0, dims = None, distribution = None))]
fn simulate_builtin<'py>(
    py: Python<'py>,
    name: &str,
    reps: usize,
    seed: u64,
    dims: Option<Vec<usize>>,
    distribution: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let distribution = distribution
        .map(|d| {
            Distribution::parse(d)
                .ok_or_else(|| PyValueError::new_err(format!("unknown distribution '{d}'")))
        })
        .transpose()?;
    let opts = GridOptions {
        replications: reps,
        seed,
        dims,
        distribution,
        ..GridOptions::default()
    };
    let scenarios = simulation::builtin_grid(name, &opts).map_err(py_err)?;
    let results = py
        .detach(|| simulation::run_grid(&scenarios))
        .map_err(py_err)?;
    to_py(py, &results)
}

/// Runs the scenarios of a TOML configuration (see the README).
#[pyfunction]
#[pyo3(signature = (config, reps = None))]
fn simulate_config<'py>(
    py: Python<'py>,
    config: &str,
    reps: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let scenarios = io::parse_scenario_config(config, reps).map_err(py_err)?;
    let results = py
        .detach(|| simulation::run_grid(&scenarios))
        .map_err(py_err)?;
    to_py(py, &results)
}

#[pymodule]
#[pyo3(name = "rank_effects")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_function(wrap_pyfunction!(estimate_effects, m)?)?;
    m.add_function(wrap_pyfunction!(covariance, m)?)?;
    m.add_function(wrap_pyfunction!(wald_test, m)?)?;
    m.add_function(wrap_pyfunction!(anova_test, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_csv, m)?)?;
    m.add_function(wrap_pyfunction!(chisq_upper_tail, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_builtin, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_config, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
