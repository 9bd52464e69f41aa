//! Python bindings. Results cross the boundary as JSON strings, in the same
//! shape the command line tool writes, so callers can use `json.loads`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use myogrid::catalog;
use myogrid::checker::{check_with, CheckOptions};
use myogrid::cli::{load_algorithm, parse_grid};
use myogrid::{parse_algorithm, render_algorithm, AlgorithmSpec, Color, ColorBag, Engine, SchedulerPolicy, SynchronyModel};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// `algo` is a catalog name, a path to an `.lcm` file, or the source text.
fn load(algo: &str) -> PyResult<(AlgorithmSpec, SynchronyModel)> {
    if algo.contains('\n') {
        let spec = parse_algorithm(algo).map_err(err)?;
        let model = if spec.name.starts_with('F') {
            SynchronyModel::Fsync
        } else {
            SynchronyModel::Async
        };
        return Ok((spec, model));
    }
    load_algorithm(algo).map_err(err)
}

fn model_or(model: Option<&str>, native: SynchronyModel) -> PyResult<SynchronyModel> {
    model.map_or(Ok(native), |m| m.parse().map_err(err))
}

/// Names of the bundled algorithms.
#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    catalog::names()
}

#[pyfunction]
fn catalog_source(name: &str) -> PyResult<String> {
    catalog::source(name).map_err(err)
}

/// Parses and validates an algorithm, returning it in canonical form.
#[pyfunction]
fn normalize(algo: &str) -> PyResult<String> {
    Ok(render_algorithm(&load(algo)?.0))
}

#[pyfunction]
#[pyo3(signature = (algo, grid, model=None, scheduler="round-robin", seed=None, max_steps=None))]
fn run(
    algo: &str,
    grid: &str,
    model: Option<&str>,
    scheduler: &str,
    seed: Option<u64>,
    max_steps: Option<usize>,
) -> PyResult<String> {
    let (spec, native) = load(algo)?;
    let g = parse_grid(grid).map_err(err)?;
    let policy = match (scheduler, seed) {
        ("round-robin", _) => SchedulerPolicy::RoundRobin,
        ("first", _) => SchedulerPolicy::First,
        ("random", Some(s)) => SchedulerPolicy::Random(s),
        ("random", None) => return Err(PyValueError::new_err("the random scheduler needs a seed")),
        (other, _) => return Err(PyValueError::new_err(format!("unknown scheduler {other:?}"))),
    };
    let engine = Engine::new(&spec, g).map_err(err)?;
    let trace = engine.run(model_or(model, native)?, policy, max_steps);
    serde_json::to_string(&trace.to_json()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (algo, grid, model=None, symmetry=true, state_budget=None))]
fn check(
    py: Python<'_>,
    algo: &str,
    grid: &str,
    model: Option<&str>,
    symmetry: bool,
    state_budget: Option<usize>,
) -> PyResult<String> {
    let (spec, native) = load(algo)?;
    let g = parse_grid(grid).map_err(err)?;
    let mut opts = CheckOptions {
        symmetry,
        ..CheckOptions::default()
    };
    if let Some(b) = state_budget {
        opts.state_budget = b;
    }
    // Release the interpreter: large grids take a while.
    let model = model_or(model, native)?;
    let report = py.detach(|| check_with(&spec, g, model, &opts));
    serde_json::to_string(&report.to_json()).map_err(err)
}

/// Replaces color `from` by the colors in `into` and returns the new source.
#[pyfunction]
#[pyo3(signature = (algo, from_color, into, name=None))]
fn split(algo: &str, from_color: char, into: &str, name: Option<String>) -> PyResult<String> {
    let (spec, _) = load(algo)?;
    let from = Color::new(from_color).map_err(err)?;
    let into = ColorBag::parse(into).map_err(err)?;
    let mut derived = catalog::split_color(&spec, from, &into).map_err(err)?;
    if let Some(n) = name {
        derived.name = n;
    }
    Ok(render_algorithm(&derived))
}

#[pymodule]
fn myogrid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_source, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    Ok(())
}
