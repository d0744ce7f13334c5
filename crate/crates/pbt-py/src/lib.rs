use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pbt_core::la::C64;
use pbt_core::simulate::{self, Engine, ProtocolRun};
use pbt_core::{cli, pbt as core, twisted, verify, PbtError};

fn err(e: PbtError) -> PyErr {
    match e {
        PbtError::InvalidArgument(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Entanglement fidelity of the PGM scheme with `n-1` ports.
#[pyfunction]
fn fidelity(n: usize, d: usize) -> PyResult<f64> {
    core::fidelity(n, d).map_err(err)
}

/// Same quantity computed from the twisted Schur blocks.
#[pyfunction]
#[pyo3(signature = (n, d, seed=0))]
fn fidelity_twisted(n: usize, d: usize, seed: u64) -> PyResult<f64> {
    verify::twisted_fidelity(n, d, seed).map_err(err)
}

/// `[(alpha, d_alpha, m_alpha, D_alpha, [(nu, lambda)])]`.
#[pyfunction]
fn irreps(n: usize, d: usize) -> PyResult<Vec<(String, usize, usize, usize, Vec<(String, f64)>)>> {
    twisted::alphas(n, d)
        .iter()
        .map(|a| {
            let info = twisted::AlphaInfo::new(n, d, a).map_err(err)?;
            let lam = info.children.iter().map(|c| c.to_string()).zip(info.lambda.iter().copied()).collect();
            Ok((a.to_string(), info.d_alpha, info.m_alpha, info.big_d, lam))
        })
        .collect()
}

/// Kraus operator `√Π_i` from the twisted blocks, as nested lists.
#[pyfunction]
fn kraus(n: usize, d: usize, i: usize) -> PyResult<Vec<Vec<(f64, f64)>>> {
    let tw = twisted::TwistedSchur::build(n, d).map_err(err)?;
    let k = core::kraus_from_twisted(&tw, i).map_err(err)?;
    Ok((0..k.nrows())
        .map(|r| (0..k.ncols()).map(|c| split(k[(r, c)])).collect())
        .collect())
}

fn split(z: C64) -> (f64, f64) {
    (z.re, z.im)
}

/// `(passed, max_residual, failing labels)`.
#[pyfunction]
#[pyo3(signature = (suite, n=None, d=None))]
fn run_verify(suite: &str, n: Option<&str>, d: Option<&str>) -> PyResult<(bool, f64, Vec<String>)> {
    let rep = cli::cmd_verify(suite, n, d).map_err(err)?;
    Ok((rep.pass(), rep.max_residual(), rep.failures().map(|c| c.label.clone()).collect()))
}

/// Runs the protocol and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (n, d, engine="dense", input="0", seed=0))]
fn run_protocol(n: usize, d: usize, engine: &str, input: &str, seed: u64) -> PyResult<String> {
    let engine: Engine = engine.parse().map_err(err)?;
    let spec = ProtocolRun {
        n,
        d,
        input_state: cli::parse_input(input, d).map_err(err)?,
        engine,
        seed,
    };
    let rep = simulate::run(&spec).map_err(err)?;
    serde_json::to_string(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn pbt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity_twisted, m)?)?;
    m.add_function(wrap_pyfunction!(irreps, m)?)?;
    m.add_function(wrap_pyfunction!(kraus, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_function(wrap_pyfunction!(run_protocol, m)?)?;
    Ok(())
}
