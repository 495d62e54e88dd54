use std::fs;
use std::path::PathBuf;

use hyperflow::lang::*;
use hyperflow::probcore::{rat, Value};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus_files() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "hprog"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn infix_choice_sugar() {
    let src = parse("hid h: {0, 1}\nh <- 0 [1/3] 1").unwrap();
    let want = Program::Choose(
        "h".into(),
        DistExpr::Explicit(vec![
            (Expr::lit(Value::int(0)), Expr::lit(Value::Num(rat(1, 3)))),
            (Expr::lit(Value::int(1)), Expr::lit(Value::Num(rat(2, 3)))),
        ]),
    );
    assert_eq!(src.body, want);
}

#[test]
fn skip_parses() {
    assert_eq!(parse("skip").unwrap().body, Program::Skip);
    assert_eq!(parse("").unwrap().body, Program::Skip);
}

#[test]
fn threebox_is_three_statement_sequence() {
    let src = parse(&fs::read_to_string(corpus_dir().join("threebox_S.hprog")).unwrap()).unwrap();
    match &src.body {
        Program::Seq(a, rest) => {
            assert!(matches!(**a, Program::Choose(..)));
            match &**rest {
                Program::Seq(b, c) => {
                    assert!(matches!(**b, Program::Choose(..)));
                    assert_eq!(**c, Program::Assign("v".into(), Expr::lit(Value::sym("bot"))));
                }
                p => panic!("{p:?}"),
            }
        }
        p => panic!("{p:?}"),
    }
}

#[test]
fn corpus_round_trips() {
    for (name, text) in corpus_files() {
        let src = parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(validate(&src).is_empty(), "{name}: {:?}", validate(&src));
        let printed = pretty_print(&src);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{name}: {e}\n{printed}"));
        assert_eq!(again, src, "{name}");
    }
}

#[test]
fn general_choice_prints_infix() {
    let p = Program::choice(Program::Skip, Expr::var("h"), Program::Skip);
    assert_eq!(print_program(&p), "skip [h] skip");
}

#[test]
fn syntax_error_has_position() {
    match parse("hid h: {0, 1}\nh := ;") {
        Err(LangError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 6)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn undeclared_and_type_errors() {
    assert_eq!(parse("hid h: {0, 1}\nh := z"), Err(LangError::UndeclaredVariable("z".into())));
    assert!(matches!(parse("vis v: {w, b}\nhid h: {0, 1}\nh := w + 1"), Err(LangError::TypeMismatch(_))));
}

#[test]
fn validate_diagnostics() {
    let ok = parse_unvalidated(&fs::read_to_string(corpus_dir().join("threebox_S.hprog")).unwrap()).unwrap();
    assert_eq!(validate(&ok), vec![]);
    let bad = parse_unvalidated("hid h: {0, 1}\nh := z").unwrap();
    assert_eq!(validate(&bad), vec![Diagnostic::UndeclaredVariable("z".into())]);
    let bad = parse_unvalidated("hid h: {0, 1}\nh <- {0 @ 1/2, 1 @ 1/3}").unwrap();
    assert!(matches!(validate(&bad).as_slice(), [Diagnostic::WeightsNotOneSumming(_)]));
    let bad = parse_unvalidated("vis v: {0, 1}\natomic { local vis x: {0} := 0 in { skip } }").unwrap();
    assert_eq!(validate(&bad), vec![Diagnostic::LocalInAtomic]);
    let bad = parse_unvalidated("vis v: {0, 1, 1}\nhid h: {}\nv := 3 div 0").unwrap();
    let d = validate(&bad);
    assert!(d.contains(&Diagnostic::DuplicateDomainValue("v".into(), "1".into())));
    assert!(d.contains(&Diagnostic::EmptyDomain("h".into())));
    assert!(d.contains(&Diagnostic::DivisionByZero));
}

#[test]
fn local_init_required_unless_flagged() {
    let text = "vis v: {0, 1}\nlocal hid x: {0, 1} in { v := x }";
    assert!(matches!(parse(text), Err(LangError::Syntax { .. })));
    let src = parse_with(text, ParseOptions { allow_default_init: true }).unwrap();
    assert_eq!(validate(&src), vec![Diagnostic::UninitializedLocal("x".into())]);
}

#[test]
fn views_of_three_judges() {
    let src = parse(&fs::read_to_string(corpus_dir().join("three_judges_spec.hprog")).unwrap()).unwrap();
    let a = project_view(&src, "A").unwrap();
    let vis: Vec<_> = a.decls.iter().map(|d| (d.name.as_str(), d.visibility.clone())).collect();
    assert_eq!(vis, vec![("a", Visibility::Vis), ("b", Visibility::Hid), ("c", Visibility::Hid)]);
    assert_eq!(project_view(&a, "A"), Err(LangError::UnknownAgent("A".into())));
    assert_eq!(a.body.node_count(), src.body.node_count());
    assert_eq!(project_view(&src, "Z"), Err(LangError::UnknownAgent("Z".into())));
}

#[test]
fn view_of_two_party_for_b() {
    let src = parse(&fs::read_to_string(corpus_dir().join("two_party_conj.hprog")).unwrap()).unwrap();
    let b = project_view(&src, "B").unwrap();
    let Program::Local(ds, _) = &b.body else { panic!() };
    let vis: Vec<_> = ds.iter().map(|d| (d.decl.name.as_str(), d.decl.visibility.clone())).collect();
    assert_eq!(vis, vec![("b0", Visibility::Vis), ("b1", Visibility::Vis), ("c0", Visibility::Hid)]);
    assert_eq!(b.decls[0].visibility, Visibility::Vis);
    assert_eq!(b.decls[1].visibility, Visibility::Hid);
}

#[test]
fn global_only_view_is_unchanged() {
    let src = parse("vis v: {0, 1}\nhid h: {0, 1}\nv := h").unwrap();
    assert_eq!(project_external(&src), src);
}

#[test]
fn desugar_reveal_and_xor() {
    let src = parse("vis{B} b: {false, true}\nvis{C} c: {false, true}\nreveal b and c").unwrap();
    let d = desugar(&src);
    let Program::Local(ds, body) = &d.body else { panic!("{:?}", d.body) };
    assert_eq!(ds[0].decl.visibility, Visibility::Vis);
    assert_eq!(ds[0].decl.domain, vec![Value::Bool(false), Value::Bool(true)]);
    assert_eq!(**body, Program::Assign(ds[0].decl.name.clone(), parse_expr_in(&src, "b and c").unwrap()));
    assert!(validate(&d).is_empty());

    let plain = parse("vis v: {0, 1}\nv := 1").unwrap();
    assert_eq!(desugar(&plain), plain);

    let src = parse("vis v: {false, true}\nhid h: {false, true}\nhid e: {false, true}\n(v xor h) := e").unwrap();
    let want = parse("vis v: {false, true}\nhid h: {false, true}\nhid e: {false, true}\nv <- uniform{true, false}; h := v xor e").unwrap();
    assert_eq!(desugar(&src), want);
}

#[test]
fn reveal_of_numeric_expression_enumerates_range() {
    let src = parse("vis{A} a: {false, true}\nvis{B} b: {false, true}\nreveal a + b").unwrap();
    let Program::Local(ds, _) = desugar(&src).body else { panic!() };
    assert_eq!(ds[0].decl.domain, vec![Value::int(0), Value::int(1), Value::int(2)]);
}

#[test]
fn literal_folding_is_stable() {
    let src = parse("vis v: {0..9}\nhid h: {0..9}\nv := -3 * h - -1/3 + h / (2/3) * (1/2)").unwrap();
    let again = parse(&pretty_print(&src)).unwrap();
    assert_eq!(again, src);
}
