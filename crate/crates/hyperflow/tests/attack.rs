mod common;

use common::*;
use hyperflow::attack::*;
use hyperflow::lang::{parse, pretty_print};
use hyperflow::measures::bayes_vuln;
use hyperflow::probcore::{Rational, Value};
use hyperflow::refine::{check_refinement, Failure, RatMatrix, Refinement};
use hyperflow::semantics::{eval_source, HyperDist};

const INIT: &str = "v=0; h=1";

const SPLIT_CONTEXT: &str = "vis v: {0..4}\nhid h: {-2..3}\n\
    if v = 1 then h <- ({1@0.4, 2@0.3, 3@0.3} if h = 1 else {-2@0.2, -1@0.2, 2@0.3, 3@0.3}) else h := 0 fi";

fn mat(rows: &[&[&str]]) -> RatMatrix {
    RatMatrix::from_rows(rows.iter().map(|row| row.iter().map(|x| r(x)).collect()).collect())
}

fn init() -> HyperDist {
    init_hyper(&corpus("P4"), INIT)
}

fn failure() -> Failure {
    let (s, i) = (run(&corpus("P4"), INIT), run(&corpus("P2"), INIT));
    match check_refinement(&s, &i).unwrap() {
        Refinement::NotRefined(f) => *f,
        other => panic!("expected a failed refinement, got {other:?}"),
    }
}

fn oriented(f: &Failure, x: RatMatrix) -> SeparatingDirection {
    orient(x, &f.spec.matrix(&f.h_space), &f.imp.matrix(&f.h_space)).unwrap()
}

fn labels(xs: &[i64]) -> Vec<Value> {
    xs.iter().map(|&x| Value::int(x)).collect()
}

fn bv_after(prog: &str, ctx: &hyperflow::lang::Source) -> Rational {
    bayes_vuln(&eval_source(&compose(&corpus(prog), ctx), &init()).unwrap())
}

#[test]
fn failure_is_at_v1() {
    let f = failure();
    assert_eq!(f.v, vec![Value::int(1)]);
    assert_eq!((f.spec.len(), f.imp.len()), (2, 3));
}

#[test]
fn channel_from_hand_normal() {
    let f = failure();
    let dir = oriented(&f, mat(&[&["-1", "0", "3"], &["0", "0", "0"], &["0", "0", "0"]]));
    assert!(dir.margin > Rational::from_integer(0.into()));
    let rel = relevant_hidden(&f.spec, &f.imp);
    let ch = build_attack_channel(&dir, &f.h_space, &rel, &[Value::int(1), Value::int(2), Value::int(3)], 1);
    assert_eq!(ch.labels, labels(&[1, 2, 3, 0]));
    assert_eq!(ch.d, mat(&[&["2/5", "3/10", "3/10", "0"], &["3/10", "3/10", "3/10", "1/10"], &["0", "3/10", "3/10", "2/5"]]));
    assert_eq!(required_split(&ch, &[&f.spec, &f.imp], &f.h_space), 2);
}

#[test]
fn channel_from_alternative_normal() {
    let f = failure();
    let dir = oriented(&f, mat(&[&["0", "0", "2"], &["1", "0", "0"], &["1", "0", "0"]]));
    let rel = relevant_hidden(&f.spec, &f.imp);
    let ch = build_attack_channel(&dir, &f.h_space, &rel, &[Value::int(1), Value::int(2), Value::int(3)], 1);
    assert_eq!(ch.labels, labels(&[1, 2, 3]));
    assert_eq!(ch.d, mat(&[&["1/2", "1/4", "1/4"], &["0", "0", "0"], &["0", "1/2", "1/2"]]));
}

#[test]
fn unsplit_context_does_not_separate_p2() {
    let f = failure();
    let dir = oriented(&f, mat(&[&["-1", "0", "3"], &["0", "0", "0"], &["0", "0", "0"]]));
    let rel = relevant_hidden(&f.spec, &f.imp);
    let ch = build_attack_channel(&dir, &f.h_space, &rel, &[Value::int(1), Value::int(2), Value::int(3)], 1);
    let ctx = context_program(&corpus("P4"), &f.v, &ch, &f.h_space).unwrap();
    assert_eq!(bv_after("P2", &ctx), r("17/30"));
}

#[test]
fn split_context_matches_hand_construction() {
    let f = failure();
    let dir = oriented(&f, mat(&[&["-1", "0", "3"], &["0", "0", "0"], &["0", "0", "0"]]));
    let rep = attack_with_direction(&corpus("P4"), &corpus("P2"), &init(), &f, dir).unwrap();
    assert_eq!(rep.channel.labels, labels(&[1, 2, 3, -2, -1]));
    assert_eq!(rep.bv_s, r("8/15"));
    assert_eq!(rep.bv_i, r("11/20"));
    assert!(rep.verdict && rep.round_trip);

    let expected = parse(SPLIT_CONTEXT).unwrap();
    assert_eq!(pretty_print(&rep.context), pretty_print(&expected));
    assert_eq!(bv_after("P4", &expected), r("8/15"));
    assert_eq!(bv_after("P2", &expected), r("11/20"));
}

#[test]
fn synthesized_attack_on_p4_p2() {
    for method in [Method::Vertex, Method::Farkas] {
        let opts = AttackOptions { method, ..AttackOptions::default() };
        let rep = synthesize_and_verify(&corpus("P4"), &corpus("P2"), &init(), &opts).unwrap();
        assert!(rep.verdict, "{method:?}");
        assert!(rep.bv_i > rep.bv_s);
        assert!(rep.direction.margin > Rational::from_integer(0.into()));
        let again = parse(&rep.context_text()).unwrap();
        assert_eq!(bv_after("P4", &again), rep.bv_s);
        assert_eq!(bv_after("P2", &again), rep.bv_i);
    }
}

#[test]
fn vertex_margin_is_maximal_in_box() {
    let f = failure();
    let best = separating_direction(&f.spec, &f.imp, &f.h_space, DEFAULT_VERTEX_CAP).unwrap();
    let hand = oriented(&f, mat(&[&["-1", "0", "3"], &["0", "0", "0"], &["0", "0", "0"]]).scale(&r("1/3")));
    assert!(best.margin >= hand.margin);
    assert!(best.x.entries().all(|x| *x <= r("1") && *x >= r("-1")));
}

#[test]
fn vertex_cap() {
    let f = failure();
    let e = separating_direction(&f.spec, &f.imp, &f.h_space, 8).unwrap_err();
    assert!(matches!(e, AttackError::VertexBudgetExceeded { .. }));
}

#[test]
fn preconditions() {
    let opts = AttackOptions::default();
    let e = synthesize_and_verify(&corpus("P2"), &corpus("P4"), &init(), &opts).unwrap_err();
    assert_eq!(e, AttackError::PreconditionViolated);
    let e = synthesize_and_verify(&corpus("P2"), &corpus("P2"), &init(), &opts).unwrap_err();
    assert_eq!(e, AttackError::PreconditionViolated);

    let leak = parse("vis v: {0..4}\nhid h: {1..3}\nh <- uniform{1, 2, 3}; v := h").unwrap();
    let e = synthesize_and_verify(&corpus("P2"), &leak, &init(), &opts).unwrap_err();
    assert!(matches!(e, AttackError::FunctionalMismatch(_)));

    let other = parse("vis v: {0..4}\nhid k: {1..3}\nk <- uniform{1, 2, 3}").unwrap();
    let e = synthesize_and_verify(&corpus("P2"), &other, &init(), &opts).unwrap_err();
    assert_eq!(e, AttackError::DomainMismatch);
}

#[test]
fn report_json() {
    let rep = synthesize_and_verify(&corpus("P4"), &corpus("P2"), &init(), &AttackOptions::default()).unwrap();
    let j = rep.to_json();
    assert_eq!(j["verdict"], true);
    assert_eq!(j["trigger"], "1");
    assert!(j["context"].as_str().unwrap().contains("if v = 1"));
}
