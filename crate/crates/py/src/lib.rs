//! Python module `maslov_box`: boxes, verdicts, Evans sweeps and wave
//! profiles for the built-in models. Structured results come back as plain
//! dicts and lists decoded from the library's JSON serialization.

use maslov_box::evans::evans_sweep;
use maslov_box::models::gkdv::GkdvModel;
use maslov_box::models::kdvb::kdvb_wave;
use maslov_box::shelves::BoxResult;
use maslov_box::tracer::CurveReport;
use maslov_box::verdict::StabilityReport;
use maslov_box::MaslovError;
use maslov_box_cli::commands::run_analysis;
use maslov_box_cli::config::{build, ModelSpec, Overrides, RunConfig};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py(e: MaslovError) -> PyErr {
    match e {
        MaslovError::Config(_) | MaslovError::Precondition(_) | MaslovError::Domain(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[allow(clippy::too_many_arguments)]
fn config(
    model: &str,
    p: Option<f64>,
    s: Option<f64>,
    nu: Option<f64>,
    lam: Option<(f64, f64)>,
    x: Option<(f64, f64)>,
    grid: Option<(usize, usize)>,
) -> PyResult<RunConfig> {
    let ov = Overrides {
        model: Some(model.to_ascii_lowercase()),
        p,
        s,
        nu,
        lmin: lam.map(|l| l.0),
        lmax: lam.map(|l| l.1),
        xmin: x.map(|v| v.0),
        xmax: x.map(|v| v.1),
        grid,
        ..Default::default()
    };
    RunConfig::from_sources(None, &ov).map_err(to_py)
}

/// Maslov box, spectral curves and verdict. Defaults match the CLI.
#[pyfunction]
#[pyo3(signature = (model="gkdv", p=None, s=None, nu=None, lam=None, x=None, grid=None))]
#[allow(clippy::too_many_arguments)]
fn analyze(
    py: Python<'_>,
    model: &str,
    p: Option<f64>,
    s: Option<f64>,
    nu: Option<f64>,
    lam: Option<(f64, f64)>,
    x: Option<(f64, f64)>,
    grid: Option<(usize, usize)>,
) -> PyResult<Py<PyAny>> {
    let cfg = config(model, p, s, nu, lam, x, grid)?;
    let a = py.detach(|| run_analysis(&cfg)).map_err(to_py)?;
    #[derive(Serialize)]
    struct Out<'a> {
        boxr: &'a BoxResult,
        right_full_line_index: Option<i64>,
        curves: Option<&'a CurveReport>,
        report: &'a StabilityReport,
        exit_code: i32,
    }
    let out = Out {
        boxr: &a.boxr,
        right_full_line_index: a.right_full.index,
        curves: a.curves.as_ref(),
        report: &a.report,
        exit_code: a.report.exit_code(),
    };
    to_json(py, &out)
}

/// `D(lambda)` at each requested lambda, matched at `x = 0`.
#[pyfunction]
#[pyo3(signature = (lambdas, model="gkdv", p=None, s=None, nu=None))]
fn evans(
    py: Python<'_>,
    lambdas: Vec<f64>,
    model: &str,
    p: Option<f64>,
    s: Option<f64>,
    nu: Option<f64>,
) -> PyResult<Vec<f64>> {
    let lo = lambdas.iter().copied().fold(0.0, f64::min);
    let lam = if lo < 0.0 { Some((lo, 0.0)) } else { None };
    let cfg = config(model, p, s, nu, lam, None, None)?;
    py.detach(|| {
        let setup = build(&cfg)?;
        evans_sweep(&setup.sys, &lambdas, 0.0, &setup.trunc)
    })
    .map(|v| v.into_iter().map(|e| e.value).collect())
    .map_err(to_py)
}

/// `(u, u', u'', u''')` of the stationary wave at each `x`.
#[pyfunction]
#[pyo3(signature = (xs, model="gkdv", p=None, s=None, nu=None))]
fn wave(xs: Vec<f64>, model: &str, p: Option<f64>, s: Option<f64>, nu: Option<f64>) -> PyResult<Vec<[f64; 4]>> {
    let cfg = config(model, p, s, nu, None, None, None)?;
    match cfg.model {
        ModelSpec::Gkdv { p, s } => {
            let m = GkdvModel::new(p, s).map_err(to_py)?;
            Ok(xs.iter().map(|&x| m.derivatives(x)).collect())
        }
        ModelSpec::Kdvb { nu } => {
            let m = kdvb_wave(nu).map_err(to_py)?;
            Ok(xs.iter().map(|&x| m.derivatives(x)).collect())
        }
    }
}

#[pymodule]
#[pyo3(name = "maslov_box")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(evans, m)?)?;
    m.add_function(wrap_pyfunction!(wave, m)?)?;
    Ok(())
}
