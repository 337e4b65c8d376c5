//! Python bindings: kernels, duals, weights, signals, the operator, compatibility checks
//! and the analysis routines.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quasiproj::analysis::{self, ModulusOptions, NormDomain, Region, Source, SpectrumSource, WeightMode};
use quasiproj::cli::config::{SignalSpec, WeightSpec};
use quasiproj::cli::{experiments, validate_hypotheses, ExperimentConfig, RawConfig, Status};
use quasiproj::compat::{self, CompatOptions};
use quasiproj::qproj::{self, OperatorOptions};
use quasiproj::{signals, weights, BandLimitedKernel, DilationMatrix, DualFunctional};

fn err(e: quasiproj::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// JSON text to Python objects through the standard `json` module.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn dilation(diag: Vec<f64>) -> PyResult<DilationMatrix> {
    DilationMatrix::new(diag).map_err(err)
}

/// Band-limited generator `φ`.
#[pyclass(name = "Kernel", module = "pyquasiproj", frozen)]
pub struct Kernel(BandLimitedKernel);

#[pymethods]
impl Kernel {
    /// Kernel from its id, e.g. `flat_top:0.25:0.45`, `sinc`, `meyer`, `weak:2:0.25:0.45`.
    #[staticmethod]
    fn from_id(id: &str, dim: usize) -> PyResult<Self> {
        BandLimitedKernel::from_id(id, dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn flat_top(dim: usize, flat: f64, cutoff: f64) -> PyResult<Self> {
        BandLimitedKernel::flat_top(dim, flat, cutoff).map(Self).map_err(err)
    }

    #[staticmethod]
    fn sinc(dim: usize) -> PyResult<Self> {
        BandLimitedKernel::sinc_tensor(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn meyer(dim: usize) -> PyResult<Self> {
        BandLimitedKernel::meyer(dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn weak(dim: usize, order: u32, flat: f64, cutoff: f64) -> PyResult<Self> {
        BandLimitedKernel::weak(dim, order, flat, cutoff).map(Self).map_err(err)
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn spectrum(&self, xi: Vec<f64>) -> Complex64 {
        self.0.spectrum(&xi)
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<Complex64> {
        self.0.eval(&x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Kernel('{}', dim={})", self.0.id(), self.0.dim())
    }
}

/// Dual functional `φ̃`: `dirac`, `box`, or `fn:<kernel id>`.
#[pyclass(name = "Dual", module = "pyquasiproj", frozen)]
pub struct Dual(DualFunctional);

#[pymethods]
impl Dual {
    #[staticmethod]
    fn from_id(id: &str, dim: usize) -> PyResult<Self> {
        DualFunctional::from_id(id, dim).map(Self).map_err(err)
    }

    #[staticmethod]
    fn dirac() -> Self {
        Self(DualFunctional::Dirac)
    }

    #[staticmethod]
    fn box_average() -> Self {
        Self(DualFunctional::BoxAverage)
    }

    #[staticmethod]
    fn function(kernel: &Kernel) -> PyResult<Self> {
        DualFunctional::function(kernel.0.clone()).map(Self).map_err(err)
    }

    #[getter]
    fn id(&self) -> String {
        self.0.id()
    }

    fn spectrum(&self, xi: Vec<f64>) -> Complex64 {
        self.0.spectrum(&xi)
    }

    fn __repr__(&self) -> String {
        format!("Dual('{}')", self.0.id())
    }
}

#[pyclass(name = "Weight", module = "pyquasiproj", frozen)]
pub struct Weight(weights::Weight);

#[pymethods]
impl Weight {
    #[staticmethod]
    fn unit(dim: usize) -> Self {
        Self(weights::Weight::unit(dim))
    }

    /// `(1 + |x|²)^{α/2}`.
    #[staticmethod]
    fn polynomial(dim: usize, alpha: f64) -> PyResult<Self> {
        weights::Weight::polynomial(dim, alpha).map(Self).map_err(err)
    }

    /// `unit`, `poly:α` or `bandlimited:α:band`; `table` is the tabulation halfwidth.
    #[staticmethod]
    #[pyo3(signature = (spec, dim, table = 32.0))]
    fn from_spec(spec: &str, dim: usize, table: f64) -> PyResult<Self> {
        let spec: WeightSpec = spec.parse().map_err(err)?;
        spec.build(dim, table).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn is_band_limited(&self) -> bool {
        self.0.is_band_limited()
    }

    fn __call__(&self, x: Vec<f64>) -> f64 {
        self.0.eval(&x)
    }

    fn dominant(&self, x: Vec<f64>) -> f64 {
        self.0.dominant(&x)
    }

    /// Sampled membership report for the given points.
    #[pyo3(signature = (points, tol = 1e-12))]
    fn membership<'py>(&self, py: Python<'py>, points: Vec<Vec<f64>>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &weights::check_w_alpha_membership(&self.0, &points, tol))
    }

    fn __repr__(&self) -> String {
        format!("Weight('{}')", self.0.label())
    }
}

#[pyclass(name = "Signal", module = "pyquasiproj", frozen)]
pub struct Signal(signals::Signal);

#[pymethods]
impl Signal {
    #[staticmethod]
    #[pyo3(signature = (dim, scale = 1.0))]
    fn gaussian(dim: usize, scale: f64) -> PyResult<Self> {
        signals::Signal::gaussian(dim, scale).map(Self).map_err(err)
    }

    #[staticmethod]
    fn bandlimited(dim: usize, radius: f64, seed: u64) -> PyResult<Self> {
        signals::Signal::bandlimited(dim, radius, seed).map(Self).map_err(err)
    }

    #[staticmethod]
    fn matern_like(dim: usize, a: f64, weight: &Weight) -> PyResult<Self> {
        signals::Signal::matern_like(dim, a, &weight.0).map(Self).map_err(err)
    }

    /// `gaussian:s`, `bandlimited:ρ[:seed]`, `matern:a`, `matern_like:a` or `zero`.
    #[staticmethod]
    #[pyo3(signature = (spec, weight, seed = 1))]
    fn from_spec(spec: &str, weight: &Weight, seed: u64) -> PyResult<Self> {
        let spec: SignalSpec = spec.parse().map_err(err)?;
        spec.build(weight.0.dim(), &weight.0, seed).map(Self).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __call__(&self, x: Vec<f64>) -> Complex64 {
        self.0.eval(&x)
    }

    fn sample(&self, halfwidth: f64, points: usize) -> PyResult<GridSignal> {
        self.0.sample_to_grid(halfwidth, points).map(GridSignal).map_err(err)
    }
}

/// Samples on the grid `x_i = −L + 2L i/N` per axis.
#[pyclass(name = "GridSignal", module = "pyquasiproj", frozen)]
pub struct GridSignal(signals::GridSignal);

#[pymethods]
impl GridSignal {
    #[staticmethod]
    fn read(path: std::path::PathBuf) -> PyResult<Self> {
        signals::GridSignal::read_binary(&path).map(Self).map_err(err)
    }

    fn write(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.0.write_binary(&path).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn halfwidth(&self) -> f64 {
        self.0.halfwidth()
    }

    #[getter]
    fn points(&self) -> usize {
        self.0.points()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.axis_nodes()
    }

    /// Samples in row-major order.
    fn values(&self) -> Vec<Complex64> {
        self.0.samples().iter().copied().collect()
    }

    fn spectrum(&self) -> Self {
        Self(self.0.spectrum())
    }

    fn interpolate(&self, x: Vec<f64>) -> Option<Complex64> {
        self.0.interpolate(&x)
    }

    /// `‖g/w‖_p` (or `‖g w‖_p`, or unweighted) by the trapezoid rule.
    #[pyo3(signature = (p, weight, mode = "over_w", interior = false))]
    fn norm(&self, p: f64, weight: &Weight, mode: &str, interior: bool) -> PyResult<f64> {
        let mode = match mode {
            "over_w" => WeightMode::OverW,
            "times_w" => WeightMode::TimesW,
            "unweighted" => WeightMode::Unweighted,
            other => return Err(PyValueError::new_err(format!("unknown weight mode `{other}`"))),
        };
        let region = if interior { Region::Interior } else { Region::Full };
        analysis::weighted_norm(&self.0, p, mode, &weight.0, region).map_err(err)
    }
}

/// `Q_j f` sampled on `[−L, L)^d`; returns the grid and the error budget.
#[pyfunction]
#[pyo3(signature = (signal, kernel, dual, dilation_diag, j, halfwidth, points, tol = 1e-9))]
#[allow(clippy::too_many_arguments)]
fn apply_operator<'py>(
    py: Python<'py>,
    signal: &Signal,
    kernel: &Kernel,
    dual: &Dual,
    dilation_diag: Vec<f64>,
    j: u32,
    halfwidth: f64,
    points: usize,
    tol: f64,
) -> PyResult<(GridSignal, Bound<'py, PyAny>)> {
    let m = dilation(dilation_diag)?;
    let opts = OperatorOptions {
        tol,
        ..Default::default()
    };
    let q = qproj::apply_operator(&signal.0, &kernel.0, &dual.0, &m, j, halfwidth, points, &opts).map_err(err)?;
    let budget = to_py(py, &q.budget)?;
    Ok((GridSignal(q.grid), budget))
}

#[pyfunction]
#[pyo3(signature = (kernel, dual, delta, n_max = 6))]
fn compat_audit<'py>(py: Python<'py>, kernel: &Kernel, dual: &Dual, delta: f64, n_max: u32) -> PyResult<Bound<'py, PyAny>> {
    let opts = CompatOptions {
        n_max,
        ..Default::default()
    };
    to_py(py, &compat::audit(&kernel.0, &dual.0, delta, &opts).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (kernel, dual, n_max = 6, h0 = 0.04, tol = 1e-6))]
fn detect_weak_order(kernel: &Kernel, dual: &Dual, n_max: u32, h0: f64, tol: f64) -> PyResult<u32> {
    compat::detect_weak_order(&kernel.0, &dual.0, n_max, h0, tol)
        .map(|w| w.order)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (kernel, dual, delta, grid_pts = 33, tol = 1e-12))]
fn check_strict(kernel: &Kernel, dual: &Dual, delta: f64, grid_pts: usize, tol: f64) -> PyResult<(bool, f64)> {
    compat::check_strict(&kernel.0, &dual.0, delta, grid_pts, tol)
        .map(|s| (s.pass, s.defect))
        .map_err(err)
}

fn modulus_options(dim: usize, halfwidth: f64, points: usize, seed: u64) -> PyResult<ModulusOptions> {
    let domain = NormDomain::new(dim, halfwidth, points, Region::Interior).map_err(err)?;
    Ok(ModulusOptions::standard(domain, seed))
}

/// Sampled `ω_n(f, h)_{p,1/w}`.
#[pyfunction]
#[pyo3(signature = (signal, n, h, p, weight, halfwidth = 16.0, points = 2048, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn modulus(signal: &Signal, n: u32, h: f64, p: f64, weight: &Weight, halfwidth: f64, points: usize, seed: u64) -> PyResult<f64> {
    let opts = modulus_options(signal.0.dim(), halfwidth, points, seed)?;
    analysis::modulus(Source::Signal(&signal.0), n, h, p, &weight.0, &opts)
        .map(|v| v.value)
        .map_err(err)
}

/// Anisotropic `Ω_n(f, M^{-j})` and isotropic `ω_n(f, ‖M^{-j}‖)`.
#[pyfunction]
#[pyo3(signature = (signal, n, dilation_diag, j, p, weight, halfwidth = 16.0, points = 2048, seed = 1))]
#[allow(clippy::too_many_arguments)]
fn modulus_pair(
    signal: &Signal,
    n: u32,
    dilation_diag: Vec<f64>,
    j: u32,
    p: f64,
    weight: &Weight,
    halfwidth: f64,
    points: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let opts = modulus_options(signal.0.dim(), halfwidth, points, seed)?;
    let m = dilation(dilation_diag)?;
    analysis::modulus_pair(Source::Signal(&signal.0), n, &m, j, p, &weight.0, &opts)
        .map(|(a, i)| (a.value, i.value))
        .map_err(err)
}

#[pyfunction]
fn best_approx_band(signal: &Signal, sigma: f64, p: f64, weight: &Weight, halfwidth: f64, points: usize) -> PyResult<f64> {
    analysis::best_approx_band(&signal.0, sigma, p, &weight.0, halfwidth, points).map_err(err)
}

/// Spectral tail integral of a signal with a closed-form spectrum.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn tail_bound(signal: &Signal, dilation_diag: Vec<f64>, j: u32, gamma: f64, q: f64, p: f64, delta: f64) -> PyResult<f64> {
    let m = dilation(dilation_diag)?;
    analysis::tail_bound(SpectrumSource::Signal(&signal.0), &m, j, gamma, q, p, delta).map_err(err)
}

/// `‖f − Q_j f‖_{p,1/w}` on the interior grid for each `j`.
#[pyfunction]
#[pyo3(signature = (signal, kernel, dual, dilation_diag, js, p, weight, halfwidth, points))]
#[allow(clippy::too_many_arguments)]
fn error_curve(
    signal: &Signal,
    kernel: &Kernel,
    dual: &Dual,
    dilation_diag: Vec<f64>,
    js: Vec<u32>,
    p: f64,
    weight: &Weight,
    halfwidth: f64,
    points: usize,
) -> PyResult<Vec<f64>> {
    let m = dilation(dilation_diag)?;
    let curve = analysis::error_curve(
        &signal.0,
        &kernel.0,
        &dual.0,
        &m,
        &js,
        p,
        &weight.0,
        halfwidth,
        points,
        &OperatorOptions::default(),
    )
    .map_err(err)?;
    Ok(curve.into_iter().map(|c| c.error).collect())
}

/// `(slope, intercept, r²)` of `log e_j` against `−j log|λ|`.
#[pyfunction]
#[pyo3(signature = (errors, js, lam, log_factor = false))]
fn fit_rate(errors: Vec<f64>, js: Vec<u32>, lam: f64, log_factor: bool) -> PyResult<(f64, f64, f64)> {
    analysis::fit_rate(&errors, &js, lam, log_factor)
        .map(|f| (f.slope, f.intercept, f.r2))
        .map_err(err)
}

/// Run a named experiment from `key = value` config text; returns `(hypotheses, result)`.
/// Raises if a hypothesis fails and `force` is false.
#[pyfunction]
#[pyo3(signature = (config, force = false))]
fn run_experiment<'py>(py: Python<'py>, config: &str, force: bool) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let raw = RawConfig::parse(config).map_err(err)?;
    let cfg = ExperimentConfig::resolve(&raw).map_err(err)?;
    let hyps = validate_hypotheses(&cfg);
    if !force {
        if let Some(h) = hyps.iter().find(|h| h.status == Status::Fail) {
            return Err(PyValueError::new_err(format!("hypothesis failed: {}", h.name)));
        }
    }
    let out = experiments::run(&cfg).map_err(err)?;
    let result = PyDict::new(py);
    result.set_item("result", to_py(py, &out.result)?)?;
    result.set_item("warnings", out.warnings)?;
    result.set_item("budgets", to_py(py, &out.budgets)?)?;
    Ok((to_py(py, &hyps)?, result.into_any()))
}

#[pymodule]
fn pyquasiproj(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<Dual>()?;
    m.add_class::<Weight>()?;
    m.add_class::<Signal>()?;
    m.add_class::<GridSignal>()?;
    m.add_function(wrap_pyfunction!(apply_operator, m)?)?;
    m.add_function(wrap_pyfunction!(compat_audit, m)?)?;
    m.add_function(wrap_pyfunction!(detect_weak_order, m)?)?;
    m.add_function(wrap_pyfunction!(check_strict, m)?)?;
    m.add_function(wrap_pyfunction!(modulus, m)?)?;
    m.add_function(wrap_pyfunction!(modulus_pair, m)?)?;
    m.add_function(wrap_pyfunction!(best_approx_band, m)?)?;
    m.add_function(wrap_pyfunction!(tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(error_curve, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
