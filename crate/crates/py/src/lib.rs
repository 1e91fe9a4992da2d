//! Python bindings: panels, the fitted quadratic-moment model, the
//! common-feature test, the squared-mean tests and the Monte Carlo driver.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyTuple};

use soboot::bootstrap::{critical_value as core_critical_value, BootstrapDraws, BootstrapScheme};
use soboot::derivative::{closed_form_deriv_squared_mean, gms_deriv_moment_ineq, DerivKind};
use soboot::error::Error;
use soboot::inference::{self, KappaRule, SquaredMeanMethod, TestOutcome};
use soboot::io::{load_panel, save_panel};
use soboot::moments::{fit_quadratic_moments, QuadMomentModel, SphereVec};
use soboot::montecarlo::{run_design as core_run_design, McConfig};
use soboot::rng::stream_rng;
use soboot::simulate::{simulate_ch_panel, DesignSpec, PanelData};
use soboot::sphereopt::{minimize_on_sphere, DEFAULT_STARTS, DEFAULT_TOL};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        Error::Numerical(msg) => PyArithmeticError::new_err(msg),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn preset(name: &str) -> PyResult<DesignSpec> {
    DesignSpec::preset(name).map_err(to_py)
}

/// Aligned `(Z_t, Y_{t+1})` rows.
#[pyclass(name = "Panel", module = "pysoboot", frozen)]
struct PyPanel {
    inner: PanelData,
}

#[pymethods]
impl PyPanel {
    /// Builds a panel from row lists `z` (T x m) and `y` (T x k).
    #[new]
    fn new(z: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> PyResult<Self> {
        let m = z.first().map_or(0, Vec::len);
        let k = y.first().map_or(0, Vec::len);
        if z.iter().any(|r| r.len() != m) || y.iter().any(|r| r.len() != k) {
            return Err(PyValueError::new_err("ragged rows"));
        }
        let inner = PanelData::new(z.concat(), m, y.concat(), k).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Simulates a preset design (`D1`..`D5`) with `t` usable rows.
    #[staticmethod]
    #[pyo3(signature = (design, t, seed=0))]
    fn simulate(design: &str, t: usize, seed: u64) -> PyResult<Self> {
        let d = preset(design)?;
        let inner = simulate_ch_panel(&d, t, &mut stream_rng(seed, 0)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_panel(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        save_panel(&self.inner, &[], &path).map_err(to_py)
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    fn z(&self) -> Vec<Vec<f64>> {
        self.inner.z().chunks(self.inner.m()).map(<[f64]>::to_vec).collect()
    }

    fn y(&self) -> Vec<Vec<f64>> {
        self.inner.y().chunks(self.inner.k()).map(<[f64]>::to_vec).collect()
    }

    fn __repr__(&self) -> String {
        format!("Panel(rows={}, m={}, k={})", self.inner.rows(), self.inner.m(), self.inner.k())
    }
}

/// Fitted `θ̂_T(γ) = Ĝ vec(γγᵀ)` with identity weight.
#[pyclass(name = "Model", module = "pysoboot", frozen)]
struct PyModel {
    inner: QuadMomentModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn fit(panel: &PyPanel) -> PyResult<Self> {
        Ok(Self {
            inner: fit_quadratic_moments(&panel.inner, None).map_err(to_py)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn sample_size(&self) -> usize {
        self.inner.sample_size()
    }

    fn theta(&self, gamma: Vec<f64>) -> PyResult<Vec<f64>> {
        let g = SphereVec::normalize(gamma).map_err(to_py)?;
        self.inner.eval_theta(&g).map_err(to_py)
    }

    /// `‖θ̂_T(γ)‖²` at the normalized `gamma`.
    fn phi(&self, gamma: Vec<f64>) -> PyResult<f64> {
        let g = SphereVec::normalize(gamma).map_err(to_py)?;
        self.inner.eval_phi(&g).map_err(to_py)
    }

    /// Global minimum over the sphere: `(minimizer, value, converged)`.
    #[pyo3(signature = (n_starts=DEFAULT_STARTS))]
    fn minimize(&self, py: Python<'_>, n_starts: usize) -> (Vec<f64>, f64, bool) {
        let r = py.detach(|| minimize_on_sphere(&self.inner, n_starts, DEFAULT_TOL));
        (r.minimizer.into_inner(), r.value, r.converged)
    }
}

/// Outcome of one bootstrap test.
#[pyclass(name = "TestOutcome", module = "pysoboot", frozen)]
struct PyOutcome {
    inner: TestOutcome,
}

#[pymethods]
impl PyOutcome {
    #[getter]
    fn statistic(&self) -> f64 {
        self.inner.statistic
    }

    #[getter]
    fn crit_value(&self) -> f64 {
        self.inner.crit_value
    }

    #[getter]
    fn reject(&self) -> bool {
        self.inner.reject
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn b(&self) -> usize {
        self.inner.b
    }

    #[getter]
    fn method(&self) -> String {
        self.inner.tuning.method.clone()
    }

    #[getter]
    fn kappa(&self) -> Option<f64> {
        self.inner.tuning.kappa
    }

    #[getter]
    fn minimizer(&self) -> Option<Vec<f64>> {
        self.inner.minimizer.as_ref().map(|g| g.coords().to_vec())
    }

    /// Sorted bootstrap draws.
    #[getter]
    fn draws(&self) -> Vec<f64> {
        self.inner.draws.values().to_vec()
    }

    fn result_line(&self) -> String {
        self.inner.result_line()
    }

    fn __repr__(&self) -> String {
        format!(
            "TestOutcome(method={}, statistic={}, crit_value={}, reject={})",
            self.inner.tuning.method, self.inner.statistic, self.inner.crit_value, self.inner.reject
        )
    }
}

/// Modified J-test for a common CH feature.
#[pyfunction]
#[pyo3(signature = (panel, kappa_rule="T^-1/3", estimator="structural_ch", b=200, alpha=0.05, scheme="iid", seed=0))]
#[allow(clippy::too_many_arguments)]
fn ch_feature_test(
    py: Python<'_>,
    panel: &PyPanel,
    kappa_rule: &str,
    estimator: &str,
    b: usize,
    alpha: f64,
    scheme: &str,
    seed: u64,
) -> PyResult<PyOutcome> {
    let rule: KappaRule = parse(kappa_rule)?;
    let kind: DerivKind = parse(estimator)?;
    let scheme: BootstrapScheme = parse(scheme)?;
    let inner = py
        .detach(|| {
            let mut rng = stream_rng(seed, 0);
            inference::ch_feature_test(&panel.inner, rule, kind, b, alpha, scheme, &mut rng)
        })
        .map_err(to_py)?;
    Ok(PyOutcome { inner })
}

/// Standard, Babu-corrected and modified bootstrap tests of `θ² = null_value`,
/// returned as a dict keyed by method name.
#[pyfunction]
#[pyo3(signature = (sample, null_value=0.0, b=200, alpha=0.05, seed=0))]
fn squared_mean_tests<'py>(
    py: Python<'py>,
    sample: Vec<f64>,
    null_value: f64,
    b: usize,
    alpha: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut rng = stream_rng(seed, 0);
    let outs = inference::squared_mean_tests(&sample, null_value, b, alpha, &mut rng).map_err(to_py)?;
    let d = PyDict::new(py);
    for (method, inner) in SquaredMeanMethod::ALL.iter().zip(outs) {
        d.set_item(method.to_string(), PyOutcome { inner })?;
    }
    Ok(d)
}

/// `⌈(1 − α) B⌉`-th order statistic of `draws`.
#[pyfunction]
fn critical_value(draws: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let d = BootstrapDraws::new(draws, BootstrapScheme::Iid).map_err(to_py)?;
    core_critical_value(&d, alpha).map_err(to_py)
}

#[pyfunction]
fn deriv_squared_mean(h: f64) -> f64 {
    closed_form_deriv_squared_mean(h)
}

#[pyfunction]
fn deriv_moment_ineq(xbar: f64, kappa_n: f64, h: f64) -> PyResult<f64> {
    gms_deriv_moment_ineq(xbar, kappa_n, h).map_err(to_py)
}

/// Runs a Monte Carlo study and returns its table as a list of dicts.
/// `options` takes the same keys as the config file.
#[pyfunction]
#[pyo3(signature = (design, sample_sizes, **options))]
fn run_design<'py>(
    py: Python<'py>,
    design: &str,
    sample_sizes: Vec<usize>,
    options: Option<&Bound<'py, PyDict>>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = McConfig::new(preset(design)?, sample_sizes);
    if let Some(opts) = options {
        for (key, value) in opts.iter() {
            let key: String = key.extract()?;
            let value = if value.is_instance_of::<PyList>() || value.is_instance_of::<PyTuple>() {
                value
                    .try_iter()?
                    .map(|item| Ok(item?.str()?.to_string()))
                    .collect::<PyResult<Vec<_>>>()?
                    .join(",")
            } else {
                value.str()?.to_string()
            };
            cfg.set(&key, &value).map_err(to_py)?;
        }
    }
    let table = py.detach(|| core_run_design(&cfg)).map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("design", &r.design)?;
            d.set_item("T", r.t)?;
            d.set_item("rule", &r.rule)?;
            d.set_item("estimator", &r.estimator)?;
            d.set_item("reps", r.reps)?;
            d.set_item("b", r.b)?;
            d.set_item("alpha", r.alpha)?;
            d.set_item("reject_rate", r.reject_rate)?;
            d.set_item("mc_se", r.mc_se)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pysoboot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPanel>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyOutcome>()?;
    m.add_function(wrap_pyfunction!(ch_feature_test, m)?)?;
    m.add_function(wrap_pyfunction!(squared_mean_tests, m)?)?;
    m.add_function(wrap_pyfunction!(critical_value, m)?)?;
    m.add_function(wrap_pyfunction!(deriv_squared_mean, m)?)?;
    m.add_function(wrap_pyfunction!(deriv_moment_ineq, m)?)?;
    m.add_function(wrap_pyfunction!(run_design, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
