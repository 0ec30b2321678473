//! Python bindings: `import pytricomi`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tricomi_lab::bessel::{bessel_k as k_nu, y_lambda as y_fn, BesselEvalConfig, OdeSolutionHandle};
use tricomi_lab::eigenfunctions::phi as phi_fn;
use tricomi_lab::exponents::{self, classify_regime, ExponentConfig, DEFAULT_CRITICAL_TOL};
use tricomi_lab::simulator::{build_problem, run_until_blowup, sweep_lifespan, GridParams, ProblemConfig, RunStatus, SweepPolicy};
use tricomi_lab::test_solutions::{w_eval, W_eval, SpecialSolutionHandle};
use tricomi_lab::toolkit::{compare_with_prediction, fit_power_law};
use tricomi_lab::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) | Error::Precondition(_) | Error::DomainTooSmall { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyfunction]
fn f_ss(n: u32, m: f64, p: f64, q: f64) -> PyResult<f64> {
    exponents::f_ss(n, m, p, q).map_err(py_err)
}

#[pyfunction]
fn f_gg(n: u32, m: f64, p: f64, q: f64) -> PyResult<f64> {
    exponents::f_gg(n, m, p, q).map_err(py_err)
}

#[pyfunction]
fn rho_strauss(n: u32, m: f64) -> PyResult<f64> {
    exponents::rho_strauss(n, m).map_err(py_err)
}

/// Regime name, its code and the primary Ω (None when no power law applies).
#[pyfunction]
#[pyo3(signature = (n, m1, m2, p, q, tol = DEFAULT_CRITICAL_TOL))]
fn classify<'py>(py: Python<'py>, n: u32, m1: f64, m2: f64, p: f64, q: f64, tol: f64) -> PyResult<Bound<'py, PyDict>> {
    let cfg = ExponentConfig::new(n, m1, m2, p, q).map_err(py_err)?;
    let rep = classify_regime(&cfg, tol).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("regime", format!("{:?}", rep.regime))?;
    d.set_item("code", rep.regime.code())?;
    d.set_item("omega", rep.primary_omega())?;
    Ok(d)
}

#[pyfunction]
fn bessel_k(nu: f64, t: f64) -> PyResult<f64> {
    k_nu(nu, t, &BesselEvalConfig::default()).map_err(py_err)
}

#[pyfunction]
fn y_lambda(m: f64, lam: f64, t: f64) -> PyResult<f64> {
    let h = OdeSolutionHandle::new(m, lam).map_err(py_err)?;
    y_fn(&h, t).map_err(py_err)
}

#[pyfunction]
fn phi(n: u32, r: f64) -> PyResult<f64> {
    phi_fn(n, r).map_err(py_err)
}

/// w_λ(|x|, t) for the given dimension and m.
#[pyfunction]
fn w_single(n: u32, m: f64, lam: f64, x: f64, t: f64) -> PyResult<f64> {
    let h = SpecialSolutionHandle::single(n, m, lam).map_err(py_err)?;
    w_eval(&h, x, t).map_err(py_err)
}

/// W_β(|x|, t) for the given dimension and m.
#[pyfunction]
fn w_integrated(n: u32, m: f64, beta: f64, x: f64, t: f64) -> PyResult<f64> {
    let h = SpecialSolutionHandle::integrated(n, m, beta).map_err(py_err)?;
    W_eval(&h, x, t).map_err(py_err)
}

fn problem(n: u32, m1: f64, m2: f64, p: f64, q: f64, eps: f64) -> PyResult<ProblemConfig> {
    let e = ExponentConfig::new(n, m1, m2, p, q).map_err(py_err)?;
    ProblemConfig::new(e, eps).map_err(py_err)
}

/// One blow-up run; returns status, estimated time and step count.
#[pyfunction]
#[pyo3(signature = (n, m1, m2, p, q, eps, dr = 0.02, t_max = 60.0, threshold = 1e8))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    n: u32,
    m1: f64,
    m2: f64,
    p: f64,
    q: f64,
    eps: f64,
    dr: f64,
    t_max: f64,
    threshold: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = problem(n, m1, m2, p, q, eps)?;
    let state = build_problem(&cfg, &GridParams::with_dr(dr), t_max).map_err(py_err)?;
    let out = py.detach(|| run_until_blowup(state, t_max, threshold)).map_err(py_err)?;
    let d = PyDict::new(py);
    match out.status {
        RunStatus::BlewUp { t_est, .. } => {
            d.set_item("status", "blew_up")?;
            d.set_item("t_est", t_est)?;
        }
        RunStatus::ReachedTmax => {
            d.set_item("status", "reached_tmax")?;
            d.set_item("t_est", f64::INFINITY)?;
        }
        RunStatus::Diverged { t, reason } => {
            d.set_item("status", format!("diverged: {reason}"))?;
            d.set_item("t_est", t)?;
        }
    }
    d.set_item("steps", out.diagnostics.steps)?;
    Ok(d)
}

/// ε sweep followed by the power-law fit and the comparison verdict.
#[pyfunction]
#[pyo3(signature = (n, m1, m2, p, q, epsilons, dr = 0.02, t_max = 60.0, tol_fraction = 0.25))]
#[allow(clippy::too_many_arguments)]
fn sweep_and_fit<'py>(
    py: Python<'py>,
    n: u32,
    m1: f64,
    m2: f64,
    p: f64,
    q: f64,
    epsilons: Vec<f64>,
    dr: f64,
    t_max: f64,
    tol_fraction: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let first = *epsilons.first().ok_or_else(|| PyValueError::new_err("no epsilons"))?;
    let base = problem(n, m1, m2, p, q, first)?;
    let policy = SweepPolicy {
        grid: GridParams::with_dr(dr),
        t_max,
        ..SweepPolicy::default()
    };
    let recs = py.detach(|| sweep_lifespan(&base, &epsilons, &policy));
    let fit = fit_power_law(&recs).map_err(py_err)?;
    let report = classify_regime(&base.exponents, DEFAULT_CRITICAL_TOL).map_err(py_err)?;
    let cmp = compare_with_prediction(&fit, &report, tol_fraction).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("epsilon", recs.iter().map(|r| r.epsilon).collect::<Vec<_>>())?;
    d.set_item("t_measured", recs.iter().map(|r| r.t_measured).collect::<Vec<_>>())?;
    d.set_item("slope", fit.slope)?;
    d.set_item("predicted_exponent", cmp.predicted_exponent)?;
    d.set_item("verdict", format!("{:?}", cmp.verdict))?;
    Ok(d)
}

#[pymodule]
fn pytricomi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(f_ss, m)?)?;
    m.add_function(wrap_pyfunction!(f_gg, m)?)?;
    m.add_function(wrap_pyfunction!(rho_strauss, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_k, m)?)?;
    m.add_function(wrap_pyfunction!(y_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(w_single, m)?)?;
    m.add_function(wrap_pyfunction!(w_integrated, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_and_fit, m)?)?;
    Ok(())
}
