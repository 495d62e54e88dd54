//! The `hyperflow` command line.

use std::fs;
use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hyperflow::attack::{synthesize_and_verify, AttackError, AttackOptions, Method, DEFAULT_VERTEX_CAP};
use hyperflow::corpus;
use hyperflow::golden;
use hyperflow::initspec::{InitPoint, InitSpec};
use hyperflow::lang::{parse, pretty_print, project_external, project_view, Source};
use hyperflow::measures::{elementary_compare, measure, MeasureKind, Verdict, DEFAULT_PRECISION, MIN_PRECISION};
use hyperflow::refine::{check_refinement, Refinement};
use hyperflow::semantics::{eval, eval_source, eval_via_normal_form, hyper_json, hyper_text, tuple_str, Frame, HyperDist};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

pub const PRECISION_VAR: &str = "HYPERFLOW_PRECISION_BITS";

#[derive(Parser, Debug)]
#[command(name = "hyperflow", version, about = "Leakage, refinement and attack synthesis for a small probabilistic language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct InitArgs {
    /// Initial state, e.g. "v=bot; h~uniform" or "h~sample:10"; defaults to uniform on every variable.
    #[arg(long)]
    init: Option<String>,
    /// Seed for sampled priors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Vertex,
    Farkas,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a program, then print it in canonical form.
    Parse { file: String },
    /// Print the output hyper-distribution.
    Eval {
        file: String,
        #[command(flatten)]
        init: InitArgs,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate one uncertainty measure on the output.
    Measure {
        file: String,
        #[command(flatten)]
        init: InitArgs,
        /// bayes, shannon, gentropy or guesswork:ALPHA
        #[arg(long, default_value = "bayes")]
        measure: String,
        #[arg(long)]
        json: bool,
    },
    /// Compare two programs under an elementary order or refinement.
    Compare {
        spec: String,
        imp: String,
        #[command(flatten)]
        init: InitArgs,
        /// refine or elementary:MEASURE
        #[arg(long, default_value = "refine")]
        order: String,
        #[arg(long)]
        json: bool,
    },
    /// Synthesize a context that makes the implementation leak more.
    Attack {
        spec: String,
        imp: String,
        #[command(flatten)]
        init: InitArgs,
        /// Where to write the context program.
        #[arg(short = 'o', long)]
        output: Option<String>,
        #[arg(long, value_enum, default_value = "vertex")]
        method: MethodArg,
        #[arg(long, default_value_t = DEFAULT_VERTEX_CAP)]
        vertex_cap: u64,
    },
    /// Print one agent's view, or the outside observer's.
    View {
        file: String,
        #[arg(long, conflicts_with = "external", required_unless_present = "external")]
        agent: Option<String>,
        #[arg(long)]
        external: bool,
    },
    /// Cross-check direct evaluation against the matrix normal form.
    Normalform {
        file: String,
        #[command(flatten)]
        init: InitArgs,
    },
    /// Replay the worked examples with known answers.
    Selftest {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Internal(String),
    Closed,
}

type Res = Result<i32, Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn internal<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Internal(e.to_string())
}

fn io_failure(e: std::io::Error) -> Failure {
    if e.kind() == std::io::ErrorKind::BrokenPipe {
        Failure::Closed
    } else {
        internal(e)
    }
}

fn attack_failure(e: AttackError) -> Failure {
    match e {
        AttackError::Lp(_) | AttackError::Refine(_) | AttackError::NotSeparable => internal(e),
        e => usage(e),
    }
}

/// Precision from the environment, falling back to the default.
pub fn precision_from_env() -> Result<u32, String> {
    match std::env::var(PRECISION_VAR) {
        Err(_) => Ok(DEFAULT_PRECISION),
        Ok(s) => match s.trim().parse::<u32>() {
            Ok(p) if p >= MIN_PRECISION => Ok(p),
            _ => Err(format!("{PRECISION_VAR} must be an integer of at least {MIN_PRECISION}, got '{s}'")),
        },
    }
}

/// File contents, or the embedded example of that name.
fn load(path: &str) -> Result<Source, Failure> {
    let text = if Path::new(path).is_file() {
        fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))?
    } else {
        corpus::get(path).ok_or_else(|| usage(format!("{path}: no such file or corpus entry")))?.to_string()
    };
    parse(&text).map_err(|e| usage(format!("{path}: {e}")))
}

fn points(src: &Source, init: &InitArgs) -> Result<(Frame, Vec<InitPoint>), Failure> {
    let frame = Frame::from_source(src).map_err(usage)?;
    let spec = match &init.init {
        Some(text) => InitSpec::parse(text).map_err(usage)?,
        None => InitSpec::all_uniform(&frame),
    };
    let pts = spec.with_seed(init.seed).instantiate(&frame).map_err(usage)?;
    Ok((frame, pts))
}

/// Map over init points on scoped threads; results keep the input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len());
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn eval_all(src: &Source, pts: &[InitPoint]) -> Result<Vec<HyperDist>, Failure> {
    par_map(pts, |p| eval_source(src, &p.hyper)).into_iter().collect::<Result<_, _>>().map_err(usage)
}

fn scope_line(pts: &[InitPoint], seed: u64) -> String {
    let n = pts.len();
    format!("pointwise over {n} initial state{} (seed {seed})", if n == 1 { "" } else { "s" })
}

fn emit(out: &mut dyn Write, s: &str) -> Result<(), Failure> {
    writeln!(out, "{s}").map_err(io_failure)
}

fn cmd_eval(out: &mut dyn Write, file: &str, init: &InitArgs, as_json: bool) -> Res {
    let src = load(file)?;
    let (frame, pts) = points(&src, init)?;
    let hypers = eval_all(&src, &pts)?;
    if as_json {
        let j = if hypers.len() == 1 {
            hyper_json(&hypers[0], &frame)
        } else {
            let items: Vec<_> = pts
                .iter()
                .zip(&hypers)
                .map(|(p, d)| json!({"init": p.label, "hyper": hyper_json(d, &frame)["hyper"]}))
                .collect();
            json!({"seed": init.seed, "points": items})
        };
        emit(out, &j.to_string())?;
    } else {
        for (p, d) in pts.iter().zip(&hypers) {
            if hypers.len() > 1 {
                emit(out, &format!("# {}", p.label))?;
            }
            write!(out, "{}", hyper_text(d)).map_err(io_failure)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_measure(out: &mut dyn Write, file: &str, init: &InitArgs, kind: &str, as_json: bool, prec: u32) -> Res {
    let kind: MeasureKind = kind.parse().map_err(usage)?;
    let src = load(file)?;
    let (_, pts) = points(&src, init)?;
    let hypers = eval_all(&src, &pts)?;
    let values: Vec<_> = hypers.iter().map(|d| measure(d, &kind, prec)).collect();
    if as_json {
        let items: Vec<_> = pts.iter().zip(&values).map(|(p, v)| json!({"init": p.label, "value": v.to_json()})).collect();
        emit(out, &json!({"measure": kind.to_string(), "seed": init.seed, "points": items}).to_string())?;
    } else if values.len() == 1 {
        emit(out, &values[0].to_string())?;
    } else {
        for (p, v) in pts.iter().zip(&values) {
            emit(out, &format!("{}: {v}", p.label))?;
        }
    }
    Ok(EXIT_OK)
}

fn load_pair(spec: &str, imp: &str) -> Result<(Source, Source), Failure> {
    let (s, i) = (load(spec)?, load(imp)?);
    let (fs, fi) = (Frame::from_source(&s).map_err(usage)?, Frame::from_source(&i).map_err(usage)?);
    if fs != fi {
        return Err(usage("the two programs declare different variables or domains"));
    }
    Ok((s, i))
}

fn cmd_compare(out: &mut dyn Write, spec: &str, imp: &str, init: &InitArgs, order: &str, as_json: bool, prec: u32) -> Res {
    let (s, i) = load_pair(spec, imp)?;
    let (_, pts) = points(&s, init)?;
    let (ds, di) = (eval_all(&s, &pts)?, eval_all(&i, &pts)?);
    let mut all_hold = true;
    let mut items = Vec::new();
    let mut lines = vec![scope_line(&pts, init.seed)];
    if order == "refine" {
        let results: Vec<_> = par_map(&(0..pts.len()).collect::<Vec<_>>(), |&k| check_refinement(&ds[k], &di[k]));
        for (p, res) in pts.iter().zip(results) {
            match res.map_err(internal)? {
                Refinement::Refined(w) => {
                    let wj = w.to_json();
                    lines.push(format!("{}: refined", p.label));
                    lines.push(wj.to_string());
                    items.push(json!({"init": p.label, "result": "refined", "witness": wj}));
                }
                Refinement::NotRefined(f) => {
                    all_hold = false;
                    let v = tuple_str(&f.v);
                    lines.push(format!("{}: not refined at v = {v}", p.label));
                    let y: Vec<String> = f.certificate.y.iter().map(hyperflow::probcore::fmt_rational).collect();
                    items.push(json!({"init": p.label, "result": "not_refined", "v": v, "certificate": y}));
                }
                Refinement::FunctionalMismatch { v } => {
                    all_hold = false;
                    let v = tuple_str(&v);
                    lines.push(format!("{}: functional mismatch at v = {v}", p.label));
                    items.push(json!({"init": p.label, "result": "functional_mismatch", "v": v}));
                }
            }
        }
    } else {
        let m = order.strip_prefix("elementary:").ok_or_else(|| usage(format!("unknown order '{order}'")))?;
        let kind: MeasureKind = m.parse().map_err(usage)?;
        for (k, p) in pts.iter().enumerate() {
            let verdict = elementary_compare(&ds[k], &di[k], &kind, prec).map_err(usage)?;
            all_hold &= verdict.holds();
            let (sv, iv) = match &verdict {
                Verdict::FailsMeasure { s, i } | Verdict::ToleranceInconclusive { s, i } => (Some(s.clone()), Some(i.clone())),
                _ => (None, None),
            };
            let mut line = format!("{}: {}", p.label, verdict.tag());
            if let (Some(a), Some(b)) = (&sv, &iv) {
                line.push_str(&format!(" (spec {a}, implementation {b})"));
            }
            lines.push(line);
            items.push(json!({
                "init": p.label,
                "result": verdict.tag(),
                "spec": sv.map(|v| v.to_json()),
                "implementation": iv.map(|v| v.to_json()),
            }));
        }
    }
    if as_json {
        let j = json!({"order": order, "pointwise": true, "seed": init.seed, "holds": all_hold, "points": items});
        emit(out, &j.to_string())?;
    } else {
        for l in lines {
            emit(out, &l)?;
        }
    }
    Ok(if all_hold { EXIT_OK } else { EXIT_FAILS })
}

fn cmd_attack(out: &mut dyn Write, err: &mut dyn Write, a: AttackArgs<'_>) -> Res {
    let (s, i) = load_pair(a.spec, a.imp)?;
    let (_, pts) = points(&s, a.init)?;
    let opts = AttackOptions { method: a.method, vertex_cap: a.vertex_cap };
    for p in &pts {
        match synthesize_and_verify(&s, &i, &p.hyper, &opts) {
            Ok(rep) => {
                if !rep.verdict {
                    return Err(internal(format!("constructed context failed verification at {}", p.label)));
                }
                if let Some(path) = a.output {
                    fs::write(path, rep.context_text()).map_err(|e| usage(format!("{path}: {e}")))?;
                }
                let mut j = rep.to_json();
                j["init"] = json!(p.label);
                j["seed"] = json!(a.init.seed);
                emit(out, &serde_json::to_string_pretty(&j).map_err(internal)?)?;
                return Ok(EXIT_OK);
            }
            Err(AttackError::PreconditionViolated) => continue,
            Err(AttackError::FunctionalMismatch(v)) => {
                writeln!(err, "{}: outputs already differ at v = {v}; no context is needed", p.label).map_err(internal)?;
                return Ok(EXIT_FAILS);
            }
            Err(e) => return Err(attack_failure(e)),
        }
    }
    writeln!(err, "the implementation refines the specification at every initial state; no attack exists").map_err(internal)?;
    Ok(EXIT_FAILS)
}

struct AttackArgs<'a> {
    spec: &'a str,
    imp: &'a str,
    init: &'a InitArgs,
    output: Option<&'a str>,
    method: Method,
    vertex_cap: u64,
}

fn cmd_view(out: &mut dyn Write, file: &str, agent: Option<&str>) -> Res {
    let src = load(file)?;
    let view = match agent {
        Some(a) => project_view(&src, a).map_err(usage)?,
        None => project_external(&src),
    };
    write!(out, "{}", pretty_print(&view)).map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn cmd_normalform(out: &mut dyn Write, file: &str, init: &InitArgs) -> Res {
    let src = load(file)?;
    let (frame, pts) = points(&src, init)?;
    let mut lines = vec![scope_line(&pts, init.seed)];
    for p in &pts {
        let (mut direct, mut via) = (HyperDist::empty(), HyperDist::empty());
        for (st, w) in p.hyper.iter() {
            direct.add_scaled(&eval(&src.body, &frame, st).map_err(usage)?, w);
            via.add_scaled(&eval_via_normal_form(&src.body, &frame, st).map_err(usage)?, w);
        }
        if direct != via {
            return Err(internal(format!("backends disagree at {}", p.label)));
        }
        lines.push(format!("{}: backends agree on {} split-states", p.label, direct.len()));
    }
    for l in lines {
        emit(out, &l)?;
    }
    Ok(EXIT_OK)
}

fn cmd_selftest(out: &mut dyn Write, as_json: bool) -> Res {
    let checks = golden::run_all();
    let ok = checks.iter().all(|c| c.ok);
    if as_json {
        let items: Vec<_> = checks.iter().map(|c| json!({"name": c.name, "pass": c.ok, "detail": c.detail})).collect();
        emit(out, &json!({"pass": ok, "checks": items}).to_string())?;
    } else {
        for c in &checks {
            emit(out, &format!("{} {}: {}", if c.ok { "PASS" } else { "FAIL" }, c.name, c.detail))?;
        }
    }
    Ok(if ok { EXIT_OK } else { EXIT_FAILS })
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let prec = precision_from_env().map_err(Failure::Usage)?;
    match cli.command {
        Command::Parse { file } => {
            let src = load(&file)?;
            write!(out, "{}", pretty_print(&src)).map_err(io_failure)?;
            Ok(EXIT_OK)
        }
        Command::Eval { file, init, json } => cmd_eval(out, &file, &init, json),
        Command::Measure { file, init, measure, json } => cmd_measure(out, &file, &init, &measure, json, prec),
        Command::Compare { spec, imp, init, order, json } => cmd_compare(out, &spec, &imp, &init, &order, json, prec),
        Command::Attack { spec, imp, init, output, method, vertex_cap } => {
            let method = match method {
                MethodArg::Vertex => Method::Vertex,
                MethodArg::Farkas => Method::Farkas,
            };
            let args = AttackArgs { spec: &spec, imp: &imp, init: &init, output: output.as_deref(), method, vertex_cap };
            cmd_attack(out, err, args)
        }
        Command::View { file, agent, external } => cmd_view(out, &file, if external { None } else { agent.as_deref() }),
        Command::Normalform { file, init } => cmd_normalform(out, &file, &init),
        Command::Selftest { json } => cmd_selftest(out, json),
    }
}

/// Run with full argv (program name first); returns the exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Internal(m)) => {
            let _ = writeln!(err, "internal error: {m}");
            EXIT_INTERNAL
        }
        Err(Failure::Closed) => EXIT_OK,
    }
}
