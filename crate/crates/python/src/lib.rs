//! Python bindings: run configurations, secular and oracle simulations,
//! oracle comparison and the figure presets.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ntpjcm::cli::{oracle_check, presets, RunConfig, TimeSeries};
use ntpjcm::{Cutoff, Error, Observable};

pyo3::create_exception!(ntpjcm_py, SimulationError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => SimulationError::new_err(e.to_string()),
    }
}

/// Coupling-scaled model parameters (`g = 1`).
#[pyclass(name = "ModelParams", module = "ntpjcm_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ntpjcm::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (delta = 0.0, kappa = 0.0, omega1 = None, omega2 = None))]
    fn new(delta: f64, kappa: f64, omega1: Option<f64>, omega2: Option<f64>) -> PyResult<Self> {
        let mut inner = ntpjcm::ModelParams::new(delta, kappa).map_err(to_py)?;
        if omega1.is_some() || omega2.is_some() {
            inner = inner
                .with_frequencies(omega1.unwrap_or(inner.omega1), omega2.unwrap_or(inner.omega2))
                .map_err(to_py)?;
        }
        Ok(PyModelParams { inner })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn omega0(&self) -> f64 {
        self.inner.omega0()
    }

    /// Rabi frequency of block `(n1, n2)`.
    fn rabi_frequency(&self, n1: usize, n2: usize) -> f64 {
        ntpjcm::dressed_basis::rabi_frequency(n1, n2, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(delta={}, kappa={})", self.inner.delta, self.inner.kappa)
    }
}

/// One simulation request. String options take the same values as the CLI.
#[pyclass(name = "RunConfig", module = "ntpjcm_py", skip_from_py_object)]
#[derive(Clone)]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (
        nbar1 = 5.0,
        nbar2 = 5.0,
        delta = 0.0,
        kappa = 0.0,
        tmax = 50.0,
        samples = 501,
        cutoff = None,
        observables = None,
        init_mode = None,
        manifold = None,
        feeding = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        nbar1: f64,
        nbar2: f64,
        delta: f64,
        kappa: f64,
        tmax: f64,
        samples: usize,
        cutoff: Option<(usize, usize)>,
        observables: Option<Vec<String>>,
        init_mode: Option<&str>,
        manifold: Option<&str>,
        feeding: Option<&str>,
    ) -> PyResult<Self> {
        let mut inner = RunConfig {
            nbar1,
            nbar2,
            delta,
            kappa,
            tmax,
            samples,
            cutoff: cutoff.map(|(a, b)| Cutoff::new(a, b)),
            ..RunConfig::default()
        };
        if let Some(names) = observables {
            inner.observables = names
                .iter()
                .map(|n| n.parse::<Observable>())
                .collect::<ntpjcm::Result<_>>()
                .map_err(to_py)?;
        }
        for (key, value) in [("init-mode", init_mode), ("manifold", manifold), ("feeding", feeding)] {
            if let Some(v) = value {
                inner.set(key, v).map_err(to_py)?;
            }
        }
        inner.validate().map_err(to_py)?;
        Ok(PyRunConfig { inner })
    }

    #[getter]
    fn nbar1(&self) -> f64 {
        self.inner.nbar1
    }

    #[getter]
    fn nbar2(&self) -> f64 {
        self.inner.nbar2
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn tmax(&self) -> f64 {
        self.inner.tmax
    }

    #[getter]
    fn samples(&self) -> usize {
        self.inner.samples
    }

    #[getter]
    fn observables(&self) -> Vec<String> {
        self.inner.observables.iter().map(|o| o.to_string()).collect()
    }

    /// Copy with one `key = value` setting applied, as in a config file.
    fn with_setting(&self, key: &str, value: &str) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.set(key, value).map_err(to_py)?;
        inner.validate().map_err(to_py)?;
        Ok(PyRunConfig { inner })
    }

    fn time_grid(&self) -> Vec<f64> {
        self.inner.time_grid()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunConfig(nbar1={}, nbar2={}, delta={}, kappa={}, tmax={}, samples={})",
            self.inner.nbar1, self.inner.nbar2, self.inner.delta, self.inner.kappa, self.inner.tmax, self.inner.samples
        )
    }
}

/// Observable columns on a time grid; undefined samples are `None`.
#[pyclass(name = "TimeSeries", module = "ntpjcm_py")]
struct PyTimeSeries {
    inner: TimeSeries,
}

#[pymethods]
impl PyTimeSeries {
    #[getter]
    fn t(&self) -> Vec<f64> {
        self.inner.t.clone()
    }

    #[getter]
    fn observables(&self) -> Vec<String> {
        self.inner.observables.iter().map(|o| o.to_string()).collect()
    }

    fn column(&self, name: &str) -> PyResult<Vec<Option<f64>>> {
        let obs: Observable = name.parse().map_err(to_py)?;
        self.inner
            .column(obs)
            .ok_or_else(|| PyValueError::new_err(format!("{name} was not requested")))
    }

    /// `{"t": [...], name: [...], ...}`.
    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        d.set_item("t", self.inner.t.clone())?;
        for &o in &self.inner.observables {
            d.set_item(o.name(), self.inner.column(o))?;
        }
        Ok(d)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.t.len()
    }
}

/// Secular-solver time series.
#[pyfunction]
fn simulate(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<PyTimeSeries> {
    let c = config.inner.clone();
    let inner = py.detach(move || ntpjcm::cli::simulate(&c)).map_err(to_py)?;
    Ok(PyTimeSeries { inner })
}

/// Full master-equation time series (small cutoffs only).
#[pyfunction]
fn simulate_oracle(py: Python<'_>, config: PyRef<'_, PyRunConfig>) -> PyResult<PyTimeSeries> {
    let c = config.inner.clone();
    let inner = py
        .detach(move || {
            oracle_check::check_cost(&c)?;
            ntpjcm::cli::simulate_oracle(&c)
        })
        .map_err(to_py)?;
    Ok(PyTimeSeries { inner })
}

/// Run both solvers and return `(secular, oracle, report)`, where the report
/// maps each observable to its largest deviation, tolerance and verdict.
#[pyfunction]
fn compare_with_oracle<'py>(
    py: Python<'py>,
    config: PyRef<'_, PyRunConfig>,
) -> PyResult<(PyTimeSeries, PyTimeSeries, Bound<'py, PyDict>)> {
    let c = config.inner.clone();
    let (secular, oracle, report) = py.detach(move || oracle_check::oracle_check(&c)).map_err(to_py)?;
    let d = PyDict::new(py);
    for cmp in &report.comparisons {
        let row = PyDict::new(py);
        row.set_item("max_deviation", cmp.max_deviation)?;
        row.set_item("at", cmp.at)?;
        row.set_item("tolerance", cmp.tolerance)?;
        row.set_item("skipped", cmp.skipped)?;
        row.set_item("passed", cmp.passed())?;
        d.set_item(cmp.observable.name(), row)?;
    }
    Ok((PyTimeSeries { inner: secular }, PyTimeSeries { inner: oracle }, d))
}

/// Names of the figure presets.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    presets::PRESETS.iter().map(|p| p.name).collect()
}

/// One configuration per curve of a figure preset.
#[pyfunction]
fn preset(name: &str) -> PyResult<Vec<PyRunConfig>> {
    let p = presets::find(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset '{name}'")))?;
    Ok(p.curves().into_iter().map(|inner| PyRunConfig { inner }).collect())
}

#[pymodule]
fn ntpjcm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_class::<PyTimeSeries>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(compare_with_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add("SimulationError", m.py().get_type::<SimulationError>())?;
    Ok(())
}
