//! Python bindings. Results cross the boundary as strings, JSON text or small tuples.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use hyperflow::attack::{synthesize_and_verify, AttackOptions, Method};
use hyperflow::golden;
use hyperflow::initspec::{InitPoint, InitSpec};
use hyperflow::lang::{parse, pretty_print, Source};
use hyperflow::measures::{measure as measure_of, MeasureKind, MIN_PRECISION};
use hyperflow::refine::check_refinement;
use hyperflow::semantics::{eval_source, hyper_json, Frame};

type Res<T> = Result<T, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn points(src: &Source, init: &str, seed: u64) -> Res<(Frame, Vec<InitPoint>)> {
    let frame = Frame::from_source(src).map_err(err)?;
    let pts = InitSpec::parse(init).map_err(err)?.with_seed(seed).instantiate(&frame).map_err(err)?;
    Ok((frame, pts))
}

pub fn canonical(text: &str) -> Res<String> {
    parse(text).map(|s| pretty_print(&s)).map_err(err)
}

/// One `{"hyper": [...]}` document per initial state.
pub fn eval_to_json(text: &str, init: &str, seed: u64) -> Res<Vec<String>> {
    let src = parse(text).map_err(err)?;
    let (frame, pts) = points(&src, init, seed)?;
    pts.iter()
        .map(|p| eval_source(&src, &p.hyper).map(|d| hyper_json(&d, &frame).to_string()).map_err(err))
        .collect()
}

pub fn measure_values(text: &str, init: &str, kind: &str, seed: u64, precision: u32) -> Res<Vec<String>> {
    if precision < MIN_PRECISION {
        return Err(format!("precision must be at least {MIN_PRECISION}"));
    }
    let kind: MeasureKind = kind.parse().map_err(err)?;
    let src = parse(text).map_err(err)?;
    let (_, pts) = points(&src, init, seed)?;
    pts.iter()
        .map(|p| eval_source(&src, &p.hyper).map(|d| measure_of(&d, &kind, precision).to_string()).map_err(err))
        .collect()
}

/// Whether the implementation refines the specification at every initial state.
pub fn refines_at_all(spec: &str, imp: &str, init: &str, seed: u64) -> Res<bool> {
    let (s, i) = (parse(spec).map_err(err)?, parse(imp).map_err(err)?);
    let (_, pts) = points(&s, init, seed)?;
    for p in &pts {
        let (ds, di) = (eval_source(&s, &p.hyper).map_err(err)?, eval_source(&i, &p.hyper).map_err(err)?);
        if !check_refinement(&ds, &di).map_err(err)?.is_refined() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Report JSON for the first initial state where an attack exists, if any.
pub fn attack_report(spec: &str, imp: &str, init: &str, method: &str) -> Res<Option<String>> {
    let method = match method {
        "vertex" => Method::Vertex,
        "farkas" => Method::Farkas,
        m => return Err(format!("unknown method '{m}'")),
    };
    let (s, i) = (parse(spec).map_err(err)?, parse(imp).map_err(err)?);
    let (_, pts) = points(&s, init, 0)?;
    let opts = AttackOptions { method, ..AttackOptions::default() };
    for p in &pts {
        match synthesize_and_verify(&s, &i, &p.hyper, &opts) {
            Ok(rep) => return Ok(Some(rep.to_json().to_string())),
            Err(hyperflow::attack::AttackError::PreconditionViolated) => continue,
            Err(e) => return Err(err(e)),
        }
    }
    Ok(None)
}

fn py<T>(r: Res<T>) -> PyResult<T> {
    r.map_err(PyValueError::new_err)
}

#[pyfunction]
fn canonical_form(text: &str) -> PyResult<String> {
    py(canonical(text))
}

#[pyfunction]
#[pyo3(signature = (text, init, seed = 0))]
fn evaluate(text: &str, init: &str, seed: u64) -> PyResult<Vec<String>> {
    py(eval_to_json(text, init, seed))
}

#[pyfunction]
#[pyo3(signature = (text, init, kind = "bayes", seed = 0, precision = 128))]
fn measure(text: &str, init: &str, kind: &str, seed: u64, precision: u32) -> PyResult<Vec<String>> {
    py(measure_values(text, init, kind, seed, precision))
}

#[pyfunction]
#[pyo3(signature = (spec, imp, init, seed = 0))]
fn refines(spec: &str, imp: &str, init: &str, seed: u64) -> PyResult<bool> {
    py(refines_at_all(spec, imp, init, seed))
}

#[pyfunction]
#[pyo3(signature = (spec, imp, init, method = "vertex"))]
fn attack(spec: &str, imp: &str, init: &str, method: &str) -> PyResult<Option<String>> {
    py(attack_report(spec, imp, init, method))
}

#[pyfunction]
fn selftest() -> Vec<(String, bool, String)> {
    golden::run_all().into_iter().map(|c| (c.name.to_string(), c.ok, c.detail)).collect()
}

#[pyfunction]
fn corpus_names() -> Vec<&'static str> {
    hyperflow::corpus::names().collect()
}

#[pyfunction]
fn corpus_text(name: &str) -> PyResult<&'static str> {
    hyperflow::corpus::get(name).ok_or_else(|| PyValueError::new_err(format!("no corpus entry '{name}'")))
}

#[pymodule]
fn hyperflow_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonical_form, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(refines, m)?)?;
    m.add_function(wrap_pyfunction!(attack, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_names, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_text, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
