#![allow(dead_code)]

pub mod props;

use std::fs;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hyperflow::initspec::{random_dist, InitSpec};
use hyperflow::lang::{parse, Source};
use hyperflow::probcore::{parse_rational, FiniteDist, Rational, Value};
use hyperflow::semantics::{eval_source, Frame, HyperDist, SplitState};

pub fn corpus_text(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.hprog"));
    fs::read_to_string(path).unwrap()
}

pub fn corpus(name: &str) -> Source {
    parse(&corpus_text(name)).unwrap()
}

pub fn r(s: &str) -> Rational {
    parse_rational(s).unwrap()
}

pub fn val(s: &str) -> Value {
    Value::parse(s).unwrap()
}

/// The single initial hyper described by `init`.
pub fn init_hyper(src: &Source, init: &str) -> HyperDist {
    let frame = Frame::from_source(src).unwrap();
    let pts = InitSpec::parse(init).unwrap().instantiate(&frame).unwrap();
    assert_eq!(pts.len(), 1);
    pts[0].hyper.clone()
}

/// Run a parsed program from the single initial hyper described by `init`.
pub fn run(src: &Source, init: &str) -> HyperDist {
    eval_source(src, &init_hyper(src, init)).unwrap()
}

pub fn run_text(text: &str, init: &str) -> HyperDist {
    run(&parse(text).unwrap(), init)
}

/// Build a single-variable hyper from `(weight, v, [(h, p)])` entries.
pub fn hyper(entries: &[(&str, &str, &[(&str, &str)])]) -> HyperDist {
    let mut out = HyperDist::empty();
    for (w, v, delta) in entries {
        let d = FiniteDist::from_pairs(delta.iter().map(|(h, p)| (vec![val(h)], r(p)))).unwrap();
        out.add(SplitState::new(vec![val(v)], d), &r(w));
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ints(n: usize) -> Vec<Value> {
    (0..n as i64).map(Value::int).collect()
}

/// A random full hyper over v ∈ {0..nv-1}, h ∈ {0..nh-1}.
pub fn random_hyper<R: Rng>(rng: &mut R, nv: usize, nh: usize) -> HyperDist {
    let parts = rng.random_range(1..=3);
    let vs = ints(nv);
    let hs = ints(nh);
    let mut entries = Vec::new();
    for _ in 0..parts {
        let size = rng.random_range(1..=nh);
        let mut support: Vec<Vec<Value>> = hs.choose_multiple(rng, size).map(|h| vec![h.clone()]).collect();
        support.sort();
        let v = vec![vs.choose(rng).unwrap().clone()];
        entries.push(SplitState::new(v, random_dist(&support, rng)));
    }
    random_dist(&entries, rng)
}

pub fn decls(nv: usize, nh: usize) -> String {
    format!("vis v: {{0..{}}}\nhid h: {{0..{}}}\n", nv - 1, nh - 1)
}

fn rand_expr<R: Rng>(rng: &mut R, n: usize) -> String {
    match rng.random_range(0..6) {
        0 => format!("{}", rng.random_range(0..n)),
        1 => format!("h mod {n}"),
        2 => format!("v mod {n}"),
        3 => format!("(v + h) mod {n}"),
        4 => format!("(h + {}) mod {n}", rng.random_range(1..=n)),
        _ => format!("({} if h = {} else v mod {n})", rng.random_range(0..n), rng.random_range(0..n)),
    }
}

fn rand_guard<R: Rng>(rng: &mut R, nh: usize) -> String {
    match rng.random_range(0..3) {
        0 => format!("h = {}", rng.random_range(0..nh)),
        1 => "v < h".to_string(),
        _ => format!("(h + v) mod 2 = {}", rng.random_range(0..2)),
    }
}

fn rand_prob<R: Rng>(rng: &mut R, nh: usize) -> String {
    let a = rng.random_range(1..4);
    match rng.random_range(0..3) {
        0 => format!("{a}/4"),
        1 => format!("({a}/4 if h = {} else 1/3)", rng.random_range(0..nh)),
        _ => format!("h/{}", nh.max(2) - 1),
    }
}

fn rand_atomic<R: Rng>(rng: &mut R, nv: usize, nh: usize) -> String {
    match rng.random_range(0..6) {
        0 => "skip".to_string(),
        1 => format!("v := {}", rand_expr(rng, nv)),
        2 => format!("h := {}", rand_expr(rng, nh)),
        3 => format!("h <- uniform{{0..{}}}", nh - 1),
        4 => format!("h <- {} [{}] {}", rng.random_range(0..nh), rand_prob(rng, nh), rand_expr(rng, nh)),
        _ => format!("v <- {} [{}] {}", rand_expr(rng, nv), rand_prob(rng, nh), rng.random_range(0..nv)),
    }
}

/// Program text over `decls(nv, nh)` with nesting depth at most `depth`.
pub fn random_program<R: Rng>(rng: &mut R, nv: usize, nh: usize, depth: usize) -> String {
    if depth == 0 {
        return rand_atomic(rng, nv, nh);
    }
    match rng.random_range(0..8) {
        0 | 1 => rand_atomic(rng, nv, nh),
        2 | 3 => format!(
            "{{ {} }}; {{ {} }}",
            random_program(rng, nv, nh, depth - 1),
            random_program(rng, nv, nh, depth - 1)
        ),
        4 => format!(
            "{{ {} }} [{}] {{ {} }}",
            random_program(rng, nv, nh, depth - 1),
            rand_prob(rng, nh),
            random_program(rng, nv, nh, depth - 1)
        ),
        5 => format!(
            "if {} then {} else {} fi",
            rand_guard(rng, nh),
            random_program(rng, nv, nh, depth - 1),
            random_program(rng, nv, nh, depth - 1)
        ),
        6 => format!("reveal h mod {}", rng.random_range(2..=nh.max(2))),
        _ => format!("atomic {{ {}; {} }}", rand_atomic(rng, nv, nh), rand_atomic(rng, nv, nh)),
    }
}

pub fn random_source<R: Rng>(rng: &mut R, nv: usize, nh: usize, depth: usize) -> Source {
    let text = format!("{}{}", decls(nv, nh), random_program(rng, nv, nh, depth));
    match parse(&text) {
        Ok(s) => s,
        Err(e) => panic!("generated program failed to parse: {e}\n{text}"),
    }
}

/// Every point state, the uniform prior, and `samples` sampled priors over boolean variables.
pub fn boolean_priors(frame: &Frame, samples: usize, seed: u64) -> Vec<HyperDist> {
    let names: Vec<&str> = frame.vis_names().into_iter().chain(frame.hid_names()).collect();
    let mut specs: Vec<String> = Vec::new();
    for bits in 0..(1u32 << names.len()) {
        let parts: Vec<String> = names.iter().enumerate().map(|(k, n)| format!("{n}={}", bits >> k & 1 == 1)).collect();
        specs.push(parts.join("; "));
    }
    let uniform: Vec<String> = names.iter().map(|n| format!("{n}~uniform")).collect();
    specs.push(uniform.join("; "));
    let mut out: Vec<HyperDist> = specs
        .iter()
        .flat_map(|s| InitSpec::parse(s).unwrap().instantiate(frame).unwrap())
        .map(|p| p.hyper)
        .collect();
    let sampled: Vec<String> = names.iter().map(|n| format!("{n}~sample:{samples}")).collect();
    let pts = InitSpec::parse(&sampled.join("; ")).unwrap().with_seed(seed).instantiate(frame).unwrap();
    out.extend(pts.into_iter().map(|p| p.hyper));
    out
}
