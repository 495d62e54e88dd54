//! Randomized law checks shared by the property and acceptance suites.

use std::time::{Duration, Instant};

use rand::Rng;

use hyperflow::attack::{compose, synthesize_and_verify, AttackError, AttackOptions, Method};
use hyperflow::initspec::random_dist;
use hyperflow::lang::{parse, Source};
use hyperflow::measures::{
    bayes_vuln, elementary_compare, guessing_entropy, marginal_guesswork, shannon_order, MeasureKind, Verdict,
    DEFAULT_PRECISION,
};
use hyperflow::probcore::{fmt_rational, FiniteDist, Rational, Value};
use hyperflow::refine::{check_refinement, extract_partition, reduce_partition, visible_values};
use hyperflow::semantics::{eval_hyper, eval_source, Frame, HyperDist, SplitState};

use super::{decls, random_hyper, random_source, rng};

pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    pub elapsed: Duration,
    pub note: String,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self) -> String {
        let head = format!("{}: {} cases in {:.2?}", self.name, self.cases, self.elapsed);
        let note = if self.note.is_empty() { String::new() } else { format!("; {}", self.note) };
        match self.failures.first() {
            None => format!("{head}{note}"),
            Some(f) => format!("{head}{note}; {} failures, first: {f}", self.failures.len()),
        }
    }
}

fn refines(s: &HyperDist, i: &HyperDist) -> bool {
    check_refinement(s, i).expect("well-formed fixture").is_refined()
}

/// Mix the fractions at every visible value through a random column-stochastic matrix.
pub fn mix<R: Rng>(d: &HyperDist, rng: &mut R, max_rows: usize) -> HyperDist {
    let mut out = HyperDist::empty();
    for v in visible_values(d, d) {
        let fracs = extract_partition(d, &v).fractions;
        let rows = rng.random_range(1..=max_rows);
        let idx: Vec<usize> = (0..rows).collect();
        let cols: Vec<FiniteDist<usize>> = fracs.iter().map(|_| random_dist(&idx, rng)).collect();
        for i in 0..rows {
            let mut g = FiniteDist::empty();
            for (f, c) in fracs.iter().zip(&cols) {
                g.add_scaled(f, &c.get(&i));
            }
            if !g.is_empty() {
                let w = g.weight();
                out.add(SplitState::new(v.clone(), g.normalize().expect("non-empty")), &w);
            }
        }
    }
    out
}

fn similar_hypers(a: &HyperDist, b: &HyperDist) -> bool {
    visible_values(a, b)
        .iter()
        .all(|v| reduce_partition(&extract_partition(a, v)) == reduce_partition(&extract_partition(b, v)))
}

struct Fixture {
    nv: usize,
    nh: usize,
    base: HyperDist,
    a: HyperDist,
    b: HyperDist,
    c: HyperDist,
}

fn fixture<R: Rng>(g: &mut R, max_h: usize) -> Fixture {
    let nv = g.random_range(1..=2);
    let nh = g.random_range(2..=max_h);
    let base = random_hyper(g, nv, nh);
    let a = mix(&base, g, 3);
    let b = mix(&a, g, 3);
    let c = mix(&base, g, 3);
    Fixture { nv, nh, base, a, b, c }
}

/// Reflexivity, transitivity along base ⊑ a ⊑ b, and antisymmetry up to similarity.
pub fn partial_order(pairs: usize, seed: u64) -> SuiteResult {
    let t = Instant::now();
    let mut g = rng(seed);
    let mut failures = Vec::new();
    let mut antisym = 0;
    let mut checked = 0;
    while checked < pairs {
        let f = fixture(&mut g, 4);
        let tag = |what: &str| format!("{what} (case {checked})");
        if !refines(&f.a, &f.a) {
            failures.push(tag("reflexivity"));
        }
        if !refines(&f.base, &f.a) || !refines(&f.a, &f.b) {
            failures.push(tag("mixing should refine"));
        }
        if !refines(&f.base, &f.b) {
            failures.push(tag("transitivity"));
        }
        for (x, y) in [(&f.a, &f.base), (&f.a, &f.c), (&f.b, &f.c)] {
            if refines(x, y) && refines(y, x) {
                antisym += 1;
                if !similar_hypers(x, y) {
                    failures.push(tag("antisymmetry"));
                }
            }
        }
        checked += 1;
    }
    SuiteResult {
        name: "partial order",
        cases: checked,
        failures,
        elapsed: t.elapsed(),
        note: format!("{antisym} mutually refining pairs checked for similarity"),
    }
}

/// base ⊑ a implies C(base) ⊑ C(a) for random contexts C.
pub fn monotonicity(contexts: usize, seed: u64) -> SuiteResult {
    let t = Instant::now();
    let mut g = rng(seed);
    let mut failures = Vec::new();
    for k in 0..contexts {
        let f = fixture(&mut g, 3);
        let ctx = random_source(&mut g, f.nv, f.nh, 3);
        let frame = Frame::from_source(&ctx).unwrap();
        let (cs, ci) = (eval_hyper(&ctx.body, &frame, &f.base).unwrap(), eval_hyper(&ctx.body, &frame, &f.a).unwrap());
        if !refines(&cs, &ci) {
            failures.push(format!("case {k}: {ctx}"));
        }
    }
    SuiteResult { name: "monotonicity", cases: contexts, failures, elapsed: t.elapsed(), note: String::new() }
}

fn measure_violations(s: &HyperDist, i: &HyperDist) -> Vec<&'static str> {
    let mut out = Vec::new();
    if bayes_vuln(i) > bayes_vuln(s) {
        out.push("bayes");
    }
    if shannon_order(i, s, DEFAULT_PRECISION) == Some(std::cmp::Ordering::Less) {
        out.push("shannon");
    }
    if guessing_entropy(i) < guessing_entropy(s) {
        out.push("guessing");
    }
    for a in ["1/4", "1/2", "3/4", "1"] {
        let alpha = super::r(a);
        if marginal_guesswork(i, &alpha) < marginal_guesswork(s, &alpha) {
            out.push("guesswork");
        }
    }
    out
}

/// Every measure respects refinement, on plain fixtures and after random contexts.
pub fn soundness(cases: usize, seed: u64) -> SuiteResult {
    let t = Instant::now();
    let mut g = rng(seed);
    let mut failures = Vec::new();
    for k in 0..cases {
        let f = fixture(&mut g, 4);
        for (s, i) in [(&f.base, &f.a), (&f.a, &f.b), (&f.base, &f.b)] {
            let bad = measure_violations(s, i);
            if !bad.is_empty() {
                failures.push(format!("case {k}: {bad:?}"));
            }
        }
        let ctx = random_source(&mut g, f.nv, f.nh.min(3), 2);
        if f.nh <= 3 {
            let frame = Frame::from_source(&ctx).unwrap();
            let (cs, ci) = (eval_hyper(&ctx.body, &frame, &f.base).unwrap(), eval_hyper(&ctx.body, &frame, &f.a).unwrap());
            let bad = measure_violations(&cs, &ci);
            if !bad.is_empty() {
                failures.push(format!("case {k} under context: {bad:?}"));
            }
        }
    }
    SuiteResult { name: "measure soundness", cases, failures, elapsed: t.elapsed(), note: String::new() }
}

/// A program whose output from any start is exactly `d`: one observable branch per split-state.
pub fn program_for(d: &HyperDist, nv: usize, nh: usize) -> Source {
    let states: Vec<(&SplitState, &Rational)> = d.iter().collect();
    let branch = |s: &SplitState| {
        let items: Vec<String> = s.delta.iter().map(|(h, p)| format!("{} @ {}", h[0], fmt_rational(p))).collect();
        format!("{{ v := {}; h <- {{{}}} }}", s.v[0], items.join(", "))
    };
    let mut rest = Rational::from_integer(1.into());
    let mut text = String::new();
    let mut close = 0;
    for (k, (s, w)) in states.iter().enumerate() {
        if k + 1 == states.len() {
            text.push_str(&branch(s));
        } else {
            let p = *w / &rest;
            text.push_str(&format!("{} [{}] {{ ", branch(s), fmt_rational(&p)));
            rest -= *w;
            close += 1;
        }
    }
    text.push_str(&" }".repeat(close));
    parse(&format!("{}{text}", decls(nv, nh))).expect("generated program parses")
}

fn start(src: &Source) -> HyperDist {
    let _ = Frame::from_source(src).unwrap();
    FiniteDist::point(SplitState::new(vec![Value::int(0)], FiniteDist::point(vec![Value::int(0)])))
}

pub struct AttackStats {
    pub attempted: usize,
    pub refined: usize,
    pub attacked: usize,
}

fn attack_pair(s: &HyperDist, i: &HyperDist, nv: usize, nh: usize, failures: &mut Vec<String>, stats: &mut AttackStats) {
    let (ps, pi) = (program_for(s, nv, nh), program_for(i, nv, nh));
    let init = start(&ps);
    if eval_source(&ps, &init).unwrap() != *s || eval_source(&pi, &init).unwrap() != *i {
        failures.push("generated program does not reproduce its hyper".into());
        return;
    }
    stats.attempted += 1;
    for method in [Method::Vertex, Method::Farkas] {
        match synthesize_and_verify(&ps, &pi, &init, &AttackOptions { method, ..AttackOptions::default() }) {
            Ok(rep) if rep.verdict && rep.bv_i > rep.bv_s => {
                if method == Method::Vertex {
                    stats.attacked += 1;
                }
            }
            Ok(rep) => failures.push(format!("{method:?}: unverified attack, bv {} vs {}", rep.bv_s, rep.bv_i)),
            Err(AttackError::PreconditionViolated) => {
                if method == Method::Vertex {
                    stats.refined += 1;
                }
            }
            Err(e) => failures.push(format!("{method:?}: {e}")),
        }
    }
}

/// Every failed refinement with |H| ≤ 4 yields a verified attack, by both separation methods.
pub fn completeness(cases: usize, seed: u64) -> (SuiteResult, AttackStats) {
    let t = Instant::now();
    let mut g = rng(seed);
    let mut failures = Vec::new();
    let mut stats = AttackStats { attempted: 0, refined: 0, attacked: 0 };
    for _ in 0..cases {
        let f = fixture(&mut g, 4);
        attack_pair(&f.a, &f.base, f.nv, f.nh, &mut failures, &mut stats);
        attack_pair(&f.a, &f.c, f.nv, f.nh, &mut failures, &mut stats);
    }
    let note = format!("{} pairs, {} not refined and attacked, {} refined", stats.attempted, stats.attacked, stats.refined);
    (SuiteResult { name: "completeness", cases: stats.attempted, failures, elapsed: t.elapsed(), note }, stats)
}

fn non_bayes_fails(s: &HyperDist, i: &HyperDist) -> bool {
    let mut kinds = vec![MeasureKind::Shannon, MeasureKind::GuessingEntropy];
    kinds.extend(["1/4", "1/2", "3/4", "1"].iter().map(|a| MeasureKind::MarginalGuesswork(super::r(a))));
    kinds.iter().any(|k| {
        matches!(elementary_compare(s, i, k, DEFAULT_PRECISION), Ok(Verdict::FailsMeasure { .. } | Verdict::ToleranceInconclusive { .. }))
    })
}

/// Wherever a non-Bayes order already fails, some context makes the Bayes order fail too.
pub fn maximal_discrimination(cases: usize, seed: u64) -> SuiteResult {
    let t = Instant::now();
    let mut g = rng(seed);
    let mut failures = Vec::new();
    let mut hits = 0;
    for k in 0..cases {
        let f = fixture(&mut g, 4);
        for (s, i) in [(&f.a, &f.base), (&f.a, &f.c), (&f.b, &f.a)] {
            if !non_bayes_fails(s, i) {
                continue;
            }
            hits += 1;
            let (ps, pi) = (program_for(s, f.nv, f.nh), program_for(i, f.nv, f.nh));
            let init = start(&ps);
            match synthesize_and_verify(&ps, &pi, &init, &AttackOptions::default()) {
                Ok(rep) => {
                    let (cs, ci) = (
                        eval_source(&compose(&ps, &rep.context), &init).unwrap(),
                        eval_source(&compose(&pi, &rep.context), &init).unwrap(),
                    );
                    let v = elementary_compare(&cs, &ci, &MeasureKind::BayesVuln, DEFAULT_PRECISION).unwrap();
                    if !matches!(v, Verdict::FailsMeasure { .. }) {
                        failures.push(format!("case {k}: context does not break the Bayes order"));
                    }
                }
                Err(e) => failures.push(format!("case {k}: {e}")),
            }
        }
    }
    SuiteResult {
        name: "maximal discrimination",
        cases: hits,
        failures,
        elapsed: t.elapsed(),
        note: format!("{hits} pairs where a non-Bayes order fails"),
    }
}
