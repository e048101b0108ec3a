//! Python bindings: the `pystochmhd` extension module.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use stochmhd::harness::{parse_config_str, run_experiment};
use stochmhd::identities::{run_suite, SuiteParams};
use stochmhd::inequalities::inequality_ratios;
use stochmhd::spectral::Grid;

fn to_py(e: stochmhd::Error) -> PyErr {
    match e {
        stochmhd::Error::Config(_) | stochmhd::Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Renormalization constant r_lambda(t) at viscosity nu.
#[pyfunction]
#[pyo3(signature = (lam, t, nu = 1.0))]
fn r_lambda(lam: f64, t: f64, nu: f64) -> PyResult<f64> {
    stochmhd::renorm::r_lambda(lam, t, nu).map_err(to_py)
}

/// Variance of one noise coefficient at time t started from zero.
#[pyfunction]
fn ou_variance(nu: f64, ksq: f64, t: f64) -> f64 {
    stochmhd::noise::ou_variance(nu, ksq, t)
}

/// Identity suite as a list of (identity_id, seed, relative_residual, passed).
#[pyfunction]
#[pyo3(signature = (n = 32, seeds = vec![1], lam = 8.0))]
fn identity_suite(py: Python<'_>, n: usize, seeds: Vec<u64>, lam: f64) -> PyResult<Vec<(String, u64, f64, bool)>> {
    let p = SuiteParams {
        n,
        seeds,
        lambda: lam,
        ..SuiteParams::default()
    };
    let reports = py.detach(|| run_suite(&p)).map_err(to_py)?;
    Ok(reports
        .into_iter()
        .map(|r| {
            let ok = r.passed();
            (r.identity_id, r.seed, r.relative_residual, ok)
        })
        .collect())
}

/// Empirical inequality constants as a list of (id, max_ratio, mean_ratio).
#[pyfunction]
#[pyo3(signature = (n = 32, samples = 50, seed = 1))]
fn inequality_constants(py: Python<'_>, n: usize, samples: usize, seed: u64) -> PyResult<Vec<(String, f64, f64)>> {
    let grid = Grid::new(n).map_err(to_py)?;
    let stats = py.detach(|| inequality_ratios(&grid, samples, seed)).map_err(to_py)?;
    Ok(stats.into_iter().map(|s| (s.id, s.max_ratio, s.mean_ratio)).collect())
}

/// Runs a JSON experiment config into `out_dir`; returns True if every invariant held.
#[pyfunction]
fn run_config(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<bool> {
    let cfg = parse_config_str(config_json).map_err(to_py)?;
    let out = py
        .detach(|| run_experiment(&cfg, Path::new(out_dir), Path::new(".")))
        .map_err(to_py)?;
    Ok(out.passed())
}

#[pymodule]
fn pystochmhd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(r_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(ou_variance, m)?)?;
    m.add_function(wrap_pyfunction!(identity_suite, m)?)?;
    m.add_function(wrap_pyfunction!(inequality_constants, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
