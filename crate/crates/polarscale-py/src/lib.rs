//! Python bindings. Structured results come back as plain dicts and lists built from the
//! same serde representation the CLI prints.

use polarscale::bound;
use polarscale::channel::{self, BmsChannel};
use polarscale::construction::{self, SelectionKey};
use polarscale::{bec, maps, poly, scaling};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: polarscale::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

/// A binary memoryless symmetric channel.
#[pyclass(name = "Channel", module = "polarscale_py", skip_from_py_object)]
#[derive(Clone)]
struct Channel(BmsChannel);

#[pymethods]
impl Channel {
    /// `bec:<z>`, `bsc:<eps>` or `bawgn:<sigma>[:<support>]`
    #[new]
    fn new(literal: &str) -> PyResult<Self> {
        literal.parse().map(Channel).map_err(err)
    }

    #[staticmethod]
    fn bec(z: f64) -> PyResult<Self> {
        channel::make_bec(z).map(Channel).map_err(err)
    }

    #[staticmethod]
    fn bsc(eps: f64) -> PyResult<Self> {
        channel::make_bsc(eps).map(Channel).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (sigma, support = 64))]
    fn bawgn(sigma: f64, support: usize) -> PyResult<Self> {
        channel::make_bawgn(sigma, support).map(|b| Channel(b.channel)).map_err(err)
    }

    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0.params())
    }

    /// (bad, good) children of one polarization step
    fn split(&self) -> (Channel, Channel) {
        let (a, b) = self.0.split();
        (Channel(a), Channel(b))
    }

    /// merged channel and the entropy it added
    fn degrade_merge(&self, support: usize) -> (Channel, f64) {
        let (c, dh) = self.0.degrade_merge(support);
        (Channel(c), dh)
    }

    fn support_len(&self) -> usize {
        self.0.support_len()
    }

    /// (index, h, z, e, delta_h) for the 2^n subchannels
    #[pyo3(signature = (n, support = 64))]
    fn subchannels(&self, n: u32, support: usize) -> PyResult<Vec<(u64, f64, f64, f64, f64)>> {
        let recs = construction::subchannel_params(&self.0, n, support).map_err(err)?;
        Ok(recs.iter().map(|r| (r.index, r.h, r.z, r.e, r.delta_h)).collect())
    }

    fn __repr__(&self) -> String {
        match &self.0 {
            BmsChannel::Bec(z) => format!("Channel('bec:{z}')"),
            BmsChannel::Bsc(e) => format!("Channel('bsc:{e}')"),
            BmsChannel::Density(d) => format!("<Channel density with {} points>", d.len()),
        }
    }
}

/// Quadratic prefactor times z^α(1 − z)^β, parsed from `pow:d`, `poly:a,b,c;d=x`, `beta:α,β` or `univ`.
#[pyclass(name = "TestFunction", module = "polarscale_py")]
struct TestFunction(bound::TestFunction);

#[pymethods]
impl TestFunction {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(TestFunction).map_err(err)
    }

    fn __call__(&self, z: f64) -> f64 {
        self.0.eval(z)
    }

    /// certified (lo, hi) enclosure of sup g
    fn sup(&self) -> PyResult<(f64, f64)> {
        self.0.sup().map(|e| (e.lo, e.hi)).map_err(err)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("TestFunction('{}')", self.0)
    }
}

#[pyfunction]
#[pyo3(signature = (l, k = 3))]
fn subdominant_eigenvalues(l: usize, k: usize) -> PyResult<Vec<f64>> {
    bec::subdominant_eigenvalues(l, k).map(|s| s.subdominant).map_err(err)
}

#[pyfunction]
fn prob_in_interval(z: f64, a: f64, b: f64, n: u32) -> PyResult<f64> {
    bec::prob_in_interval(z, a, b, n).map_err(err)
}

/// 1/μ from the q fixed point, with iteration metadata (the profile itself is omitted)
#[pyfunction]
#[pyo3(signature = (grid = 100_000, tol = 1e-10))]
fn iterate_q(py: Python<'_>, grid: usize, tol: f64) -> PyResult<Bound<'_, PyAny>> {
    let q = bec::iterate_q(grid, tol, bec::QStart::Indicator).map_err(err)?;
    let v = serde_json::json!({
        "rate": q.rate,
        "mu": q.mu(),
        "qhat_half": q.qhat_half,
        "iterations": q.iterations,
        "last_change": q.last_change,
    });
    to_py(py, &v)
}

#[pyfunction]
#[pyo3(signature = (m, prec = 1e-4))]
fn infimum_ratio(py: Python<'_>, m: u32, prec: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &poly::infimum_ratio(m, prec).map_err(err)?.summary())
}

#[pyfunction]
#[pyo3(signature = (m, prec = 1e-4))]
fn mu_lower(py: Python<'_>, m: u32, prec: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &poly::mu_lower(m, prec).map_err(err)?)
}

#[pyfunction]
fn certify_concavity(m: u32) -> PyResult<bool> {
    poly::certify_concavity(m).map_err(err)
}

/// integer coefficients of f_m, lowest degree first
#[pyfunction]
fn fm_coefficients(m: u32) -> Vec<String> {
    poly::fm_integer_coeffs(m).iter().map(|c| c.to_string()).collect()
}

#[pyfunction]
#[pyo3(signature = (g, m, prec = 1e-4))]
fn sup_ratio_bec(g: PyRef<'_, TestFunction>, m: u32, prec: f64) -> PyResult<(f64, f64)> {
    bound::sup_ratio_bec(&g.0, m, prec).map(|e| (e.lo, e.hi)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (g, prec = 1e-6))]
fn compute_lg(g: PyRef<'_, TestFunction>, prec: f64) -> PyResult<(f64, f64)> {
    bound::compute_lg(&g.0, prec).map(|e| (e.lo, e.hi)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, samples, a = 0.1, b = 0.9, seed = 1))]
fn estimate_log_length(py: Python<'_>, n: usize, samples: usize, a: f64, b: f64, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &maps::estimate_log_length(n, samples, a, b, seed).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (n, samples, tol = 1e-2, seed = 1))]
fn threshold_sample(py: Python<'_>, n: usize, samples: usize, tol: f64, seed: u64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &maps::threshold_sample(n, samples, tol, seed).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (channel, n, rate, support = 64, key = "e"))]
fn good_indices<'py>(py: Python<'py>, channel: PyRef<'_, Channel>, n: u32, rate: f64, support: usize, key: &str) -> PyResult<Bound<'py, PyAny>> {
    let key: SelectionKey = key.parse().map_err(err)?;
    let recs = construction::subchannel_params(&channel.0, n, support).map_err(err)?;
    to_py(py, &construction::good_indices(&recs, rate, key).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (channel, m, n, prec = 1e-4))]
fn theorem3_rate_cap<'py>(py: Python<'py>, channel: PyRef<'_, Channel>, m: u32, n: u32, prec: f64) -> PyResult<Bound<'py, PyAny>> {
    let cert = scaling::LowerBoundCert::new(&channel.0, m, prec).map_err(err)?;
    to_py(py, &scaling::theorem3_rate_cap(&cert, n).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (channel, rate, pe, rho = scaling::UNIVERSAL_RHO, beta = scaling::UNIVERSAL_BETA, alpha = scaling::UNIVERSAL_ALPHA))]
fn theorem4_blocklength<'py>(
    py: Python<'py>,
    channel: PyRef<'_, Channel>,
    rate: f64,
    pe: f64,
    rho: f64,
    beta: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &scaling::theorem4_blocklength(&channel.0, rate, pe, rho, beta, alpha).map_err(err)?)
}

/// Runs the command-line front end in-process; output goes to the process stdout.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    polarscale::cli::run(std::iter::once("polarscale".to_string()).chain(args))
}

#[pymodule]
fn polarscale_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Channel>()?;
    m.add_class::<TestFunction>()?;
    m.add_function(wrap_pyfunction!(subdominant_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(prob_in_interval, m)?)?;
    m.add_function(wrap_pyfunction!(iterate_q, m)?)?;
    m.add_function(wrap_pyfunction!(infimum_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mu_lower, m)?)?;
    m.add_function(wrap_pyfunction!(certify_concavity, m)?)?;
    m.add_function(wrap_pyfunction!(fm_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(sup_ratio_bec, m)?)?;
    m.add_function(wrap_pyfunction!(compute_lg, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_log_length, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_sample, m)?)?;
    m.add_function(wrap_pyfunction!(good_indices, m)?)?;
    m.add_function(wrap_pyfunction!(theorem3_rate_cap, m)?)?;
    m.add_function(wrap_pyfunction!(theorem4_blocklength, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
