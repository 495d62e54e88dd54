use std::path::PathBuf;
use std::process::Command;

use hyperflow_cli::{run, EXIT_FAILS, EXIT_OK, EXIT_USAGE};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(format!("{name}.hprog"));
    p.to_string_lossy().into_owned()
}

fn call(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("hyperflow").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("hyperflow-cli-{}-{name}", std::process::id()))
}

#[test]
fn measure_threebox() {
    let (code, out, _) = call(&["measure", &corpus("threebox_S"), "--init", "v=bot;h~uniform", "--measure", "bayes"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "2/3\n"));
    let (code, out, _) = call(&["measure", &corpus("threebox_I2"), "--init", "v=bot;h=0", "--measure", "gentropy"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "4/3\n"));
    let (code, out, _) = call(&["measure", &corpus("threebox_I2"), "--init", "v=bot;h=0", "--measure", "shannon"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("0.666666666"));
    let (code, out, _) = call(&["measure", "threebox_S", "--init", "v=bot;h=0", "--measure", "guesswork:1/2"]);
    assert_eq!((code, out.as_str()), (EXIT_OK, "1\n"));
}

#[test]
fn refinement_verdicts() {
    let (code, out, _) = call(&["compare", &corpus("P2"), &corpus("P4"), "--order", "refine", "--init", "v=0;h~uniform"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("pointwise over 1 initial state"));
    assert!(out.contains("\"R\":[[\"0/1\",\"1/2\",\"1/1\"],[\"1/1\",\"1/2\",\"0/1\"]]"), "{out}");

    let (code, out, _) = call(&["compare", &corpus("P4"), &corpus("P2"), "--order", "refine", "--init", "v=0;h~uniform", "--json"]);
    assert_eq!(code, EXIT_FAILS);
    let j: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(j["holds"], false);
    assert_eq!(j["points"][0]["result"], "not_refined");
    assert_eq!(j["points"][0]["v"], "1");
}

#[test]
fn elementary_orders() {
    let (code, out, _) = call(&["compare", "P2", "P4", "--order", "elementary:bayes", "--init", "v=0;h=1"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("init: holds"));
    let (code, out, _) = call(&["compare", "threebox_S", "threebox_I2", "--order", "elementary:shannon", "--init", "v=bot;h=0"]);
    assert_eq!(code, EXIT_FAILS);
    assert!(out.contains("fails_measure"));
    let (code, _, _) = call(&["compare", "threebox_S", "threebox_I1", "--order", "elementary:bayes", "--init", "v=bot;h=0"]);
    assert_eq!(code, EXIT_OK);
}

#[test]
fn attack_writes_context() {
    let path = temp_path("ctx.hprog");
    let p = path.to_string_lossy().into_owned();
    let (code, out, err) = call(&["attack", &corpus("P4"), &corpus("P2"), "--init", "v=0;h~uniform", "-o", &p]);
    assert_eq!(code, EXIT_OK, "{err}");
    let j: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(j["verdict"], true);
    assert_eq!(j["trigger"], "1");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(hyperflow::lang::parse(&text).is_ok());
    std::fs::remove_file(&path).unwrap();

    let (code, out, _) = call(&["attack", "P4", "P2", "--init", "v=0;h=1", "--method", "farkas"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("\"round_trip\": true"));

    let (code, _, err) = call(&["attack", "P2", "P4", "--init", "v=0;h~uniform"]);
    assert_eq!(code, EXIT_FAILS);
    assert!(err.contains("no attack exists"));
}

#[test]
fn eval_json_schema() {
    let (code, out, _) = call(&["eval", "threebox_I2", "--init", "v=bot;h=0", "--json"]);
    assert_eq!(code, EXIT_OK);
    let j: serde_json::Value = serde_json::from_str(&out).unwrap();
    let first = &j["hyper"][0];
    assert_eq!(first["p"], "2/3");
    assert_eq!(first["v"]["v"], "bot");
    assert_eq!(first["delta"][0]["h"]["h"], "0");
    assert_eq!(first["delta"][0]["p"], "1/2");
    assert_eq!(j["hyper"][1]["delta"][0]["p"], "1/1");
    let (_, again, _) = call(&["eval", "threebox_I2", "--init", "v=bot;h=0", "--json"]);
    assert_eq!(out, again);

    let (code, out, _) = call(&["eval", "P2", "--init", "v=0; h~sample:3", "--seed", "9", "--json"]);
    assert_eq!(code, EXIT_OK);
    let j: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(j["seed"], 9);
    assert_eq!(j["points"].as_array().unwrap().len(), 3);

    let (code, out, _) = call(&["eval", "threebox_S", "--init", "v=bot;h=0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 2);
}

#[test]
fn views_and_parse() {
    let (code, out, _) = call(&["view", "three_judges_spec", "--agent", "B"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("vis b") && out.contains("hid a"));
    let (code, out, _) = call(&["view", "two_party_conj", "--external"]);
    assert_eq!(code, EXIT_OK);
    assert!(!out.contains("vis"));
    let (code, _, _) = call(&["view", "three_judges_spec", "--agent", "Z"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, out, _) = call(&["parse", &corpus("P2")]);
    assert_eq!(code, EXIT_OK);
    assert!(hyperflow::lang::parse(&out).is_ok());
}

#[test]
fn normal_form_cross_check() {
    let (code, out, _) = call(&["normalform", "threebox_S"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("backends agree"));
    let (code, _, err) = call(&["normalform", "encryption_lemma"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("unsupported"));
}

#[test]
fn selftest_passes() {
    let (code, out, _) = call(&["selftest"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.lines().all(|l| l.starts_with("PASS ")));
    assert_eq!(out.lines().count(), 10);
}

#[test]
fn usage_errors() {
    let bad = temp_path("bad.hprog");
    std::fs::write(&bad, "vis v: {0}\nv := ").unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["frobnicate".into()],
        vec!["eval".into(), "no_such_program".into()],
        vec!["eval".into(), bad.to_string_lossy().into_owned()],
        vec!["measure".into(), "P2".into(), "--measure".into(), "entropy".into()],
        vec!["measure".into(), "P2".into(), "--measure".into(), "guesswork:2".into()],
        vec!["eval".into(), "P2".into(), "--init".into(), "q=1".into()],
        vec!["compare".into(), "P2".into(), "threebox_S".into()],
        vec!["compare".into(), "P2".into(), "P4".into(), "--order".into(), "sideways".into()],
        vec!["view".into(), "P2".into()],
    ];
    for args in cases {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, _, err) = call(&refs);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(!err.is_empty());
    }
    std::fs::remove_file(bad).unwrap();
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("selftest"));
}

#[test]
fn binary_and_precision_variable() {
    let bin = env!("CARGO_BIN_EXE_hyperflow");
    let out = Command::new(bin).args(["measure", "P2", "--init", "v=0;h=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "5/6\n");
    let out = Command::new(bin)
        .args(["measure", "threebox_I2", "--init", "v=bot;h=0", "--measure", "shannon"])
        .env("HYPERFLOW_PRECISION_BITS", "64")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim().len(), "0.".len() + 19);
    let out = Command::new(bin).args(["measure", "P2"]).env("HYPERFLOW_PRECISION_BITS", "12").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}
