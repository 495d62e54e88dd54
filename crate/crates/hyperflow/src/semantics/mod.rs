//! Split-state semantics: programs map (v, δ) to hyper-distributions.

mod normal_form;

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};

pub use normal_form::{
    check_atomic_distribution, classical_matrix, eval_via_normal_form, normal_form, AtomicityWitness, NormalForm,
};

use crate::lang::expr::{coerce_to_domain, eval_dist, eval_expr, probability, to_bool, ExprError};
use crate::lang::{DistExpr, Expr, Init, LocalDecl, Program, Source, Visibility};
use crate::probcore::{fmt_rational, DistError, FiniteDist, Rational, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SemError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("value {value} is not in the domain of '{var}'")]
    ValueNotInDomain { var: String, value: String },
    #[error("variable '{0}' carries agent annotations; project a view first")]
    AgentAnnotation(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, SemError>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub domain: Vec<Value>,
}

/// Variables in scope, split by visibility. Visible values form the tuple v, hidden ones h.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub vis: Vec<VarInfo>,
    pub hid: Vec<VarInfo>,
}

impl Frame {
    pub fn from_source(src: &Source) -> Result<Frame> {
        let mut f = Frame { vis: Vec::new(), hid: Vec::new() };
        for d in &src.decls {
            let info = VarInfo { name: d.name.clone(), domain: d.domain.clone() };
            match d.visibility {
                Visibility::Vis => f.vis.push(info),
                Visibility::Hid => f.hid.push(info),
                Visibility::Agents(_) => return Err(SemError::AgentAnnotation(d.name.clone())),
            }
        }
        Ok(f)
    }

    /// (is_visible, index); later declarations shadow earlier ones.
    pub fn lookup(&self, name: &str) -> Option<(bool, usize)> {
        if let Some(i) = self.vis.iter().rposition(|x| x.name == name) {
            return Some((true, i));
        }
        self.hid.iter().rposition(|x| x.name == name).map(|i| (false, i))
    }

    pub fn v_space(&self) -> Vec<Vec<Value>> {
        product(&self.vis)
    }

    pub fn h_space(&self) -> Vec<Vec<Value>> {
        product(&self.hid)
    }

    pub fn vis_names(&self) -> Vec<&str> {
        self.vis.iter().map(|x| x.name.as_str()).collect()
    }

    pub fn hid_names(&self) -> Vec<&str> {
        self.hid.iter().map(|x| x.name.as_str()).collect()
    }

    fn extend(&self, decls: &[LocalDecl]) -> Result<Frame> {
        let mut f = self.clone();
        for ld in decls {
            let info = VarInfo { name: ld.decl.name.clone(), domain: ld.decl.domain.clone() };
            match ld.decl.visibility {
                Visibility::Vis => f.vis.push(info),
                Visibility::Hid => f.hid.push(info),
                Visibility::Agents(_) => return Err(SemError::AgentAnnotation(ld.decl.name.clone())),
            }
        }
        Ok(f)
    }

    fn dummies(&self, from_vis: usize, from_hid: usize) -> Result<(Vec<Value>, Vec<Value>)> {
        let first = |x: &VarInfo| {
            x.domain.first().cloned().ok_or_else(|| SemError::InvalidState(format!("empty domain for '{}'", x.name)))
        };
        Ok((
            self.vis[from_vis..].iter().map(first).collect::<Result<_>>()?,
            self.hid[from_hid..].iter().map(first).collect::<Result<_>>()?,
        ))
    }
}

fn product(vars: &[VarInfo]) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for x in vars {
        out = out
            .into_iter()
            .flat_map(|t| {
                x.domain.iter().map(move |d| {
                    let mut t = t.clone();
                    t.push(d.clone());
                    t
                })
            })
            .collect();
    }
    out
}

/// A visible tuple together with a full distribution over hidden tuples.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SplitState {
    pub v: Vec<Value>,
    pub delta: FiniteDist<Vec<Value>>,
}

impl SplitState {
    pub fn new(v: Vec<Value>, delta: FiniteDist<Vec<Value>>) -> SplitState {
        SplitState { v, delta }
    }
}

impl fmt::Display for SplitState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {{", tuple_str(&self.v))?;
        let parts: Vec<String> = self.delta.iter().map(|(h, p)| format!("{}@{}", tuple_str(h), p)).collect();
        write!(f, "{}}})", parts.join(", "))
    }
}

pub fn tuple_str(t: &[Value]) -> String {
    match t {
        [x] => x.to_string(),
        _ => format!("({})", t.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
    }
}

/// Outer distribution over split-states; the map order is the canonical order.
pub type HyperDist = FiniteDist<SplitState>;

fn named(vars: &[VarInfo], vals: &[Value]) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    for (x, v) in vars.iter().zip(vals) {
        m.insert(x.name.clone(), serde_json::Value::String(v.to_string()));
    }
    serde_json::Value::Object(m)
}

/// `{"hyper": [{"p", "v": {name: value}, "delta": [{"h": {name: value}, "p"}]}]}` in canonical order.
pub fn hyper_json(d: &HyperDist, frame: &Frame) -> serde_json::Value {
    let items: Vec<serde_json::Value> = d
        .iter()
        .map(|(s, w)| {
            let delta: Vec<serde_json::Value> = s
                .delta
                .iter()
                .map(|(h, p)| serde_json::json!({"h": named(&frame.hid, h), "p": fmt_rational(p)}))
                .collect();
            serde_json::json!({"p": fmt_rational(w), "v": named(&frame.vis, &s.v), "delta": delta})
        })
        .collect();
    serde_json::json!({ "hyper": items })
}

/// One line per split-state: `weight  (v, {h@p, ...})`.
pub fn hyper_text(d: &HyperDist) -> String {
    d.iter().map(|(s, w)| format!("{}\t{}\n", fmt_rational(w), s)).collect()
}

/// A joint distribution over (v, h) pairs.
pub type Joint = FiniteDist<(Vec<Value>, Vec<Value>)>;

fn env<'a>(frame: &'a Frame, v: &'a [Value], h: &'a [Value]) -> impl Fn(&str) -> Option<Value> + 'a {
    move |x| frame.lookup(x).map(|(vis, i)| if vis { v[i].clone() } else { h[i].clone() })
}

fn assign(frame: &Frame, v: &[Value], h: &[Value], x: &str, val: &Value) -> Result<(Vec<Value>, Vec<Value>)> {
    let (vis, i) = frame.lookup(x).ok_or_else(|| SemError::UnknownVariable(x.to_string()))?;
    let info = if vis { &frame.vis[i] } else { &frame.hid[i] };
    let val = coerce_to_domain(val, &info.domain)
        .ok_or_else(|| SemError::ValueNotInDomain { var: x.to_string(), value: val.to_string() })?;
    let (mut v, mut h) = (v.to_vec(), h.to_vec());
    if vis {
        v[i] = val;
    } else {
        h[i] = val;
    }
    Ok((v, h))
}

fn init_program(ld: &LocalDecl) -> Program {
    let x = ld.decl.name.clone();
    match &ld.init {
        Init::Assign(e) => Program::Assign(x, e.clone()),
        Init::Choose(d) => Program::Choose(x, d.clone()),
        Init::Uniform => Program::Choose(x, DistExpr::Uniform(ld.decl.domain.iter().cloned().map(Expr::Lit).collect())),
    }
}

fn xor_expand(a: &str, b: &str, e: &Expr) -> Program {
    Program::seq(
        Program::Choose(a.to_string(), DistExpr::Uniform(vec![Expr::Lit(Value::Bool(true)), Expr::Lit(Value::Bool(false))])),
        Program::Assign(b.to_string(), Expr::bin(crate::lang::BinOp::Xor, Expr::var(a), e.clone())),
    )
}

/// Relational meaning from a single classical state, ignoring visibility.
pub fn classical_eval(p: &Program, frame: &Frame, v: &[Value], h: &[Value]) -> Result<Joint> {
    Ok(match p {
        Program::Skip | Program::Reveal(_) => Joint::point((v.to_vec(), h.to_vec())),
        Program::Assign(x, e) => {
            let val = eval_expr(e, &env(frame, v, h))?;
            Joint::point(assign(frame, v, h, x, &val)?)
        }
        Program::Choose(x, d) => {
            let dist = eval_dist(d, &env(frame, v, h))?;
            let mut out = Joint::empty();
            for (val, w) in dist.iter() {
                out.add(assign(frame, v, h, x, val)?, w);
            }
            out
        }
        Program::XorAssign(a, b, e) => classical_eval(&xor_expand(a, b, e), frame, v, h)?,
        Program::Seq(a, b) => {
            classical_eval(a, frame, v, h)?.try_expect_dist(|(v1, h1)| classical_eval(b, frame, v1, h1))?
        }
        Program::Choice(a, q, b) => {
            let q = probability(&eval_expr(q, &env(frame, v, h))?)?;
            let mut out = Joint::empty();
            if !q.is_zero() {
                out.add_scaled(&classical_eval(a, frame, v, h)?, &q);
            }
            let r = Rational::one() - &q;
            if !r.is_zero() {
                out.add_scaled(&classical_eval(b, frame, v, h)?, &r);
            }
            out
        }
        Program::Cond(g, a, b) => {
            if to_bool(&eval_expr(g, &env(frame, v, h))?)? {
                classical_eval(a, frame, v, h)?
            } else {
                classical_eval(b, frame, v, h)?
            }
        }
        Program::Atomic(q) => classical_eval(q, frame, v, h)?,
        Program::Local(decls, body) => {
            let inner = frame.extend(decls)?;
            let (dv, dh) = inner.dummies(frame.vis.len(), frame.hid.len())?;
            let start = ([v, &dv[..]].concat(), [h, &dh[..]].concat());
            let mut d = Joint::point(start);
            for ld in decls {
                let init = init_program(ld);
                d = d.try_expect_dist(|(v1, h1)| classical_eval(&init, &inner, v1, h1))?;
            }
            let d = d.try_expect_dist(|(v1, h1)| classical_eval(body, &inner, v1, h1))?;
            let (nv, nh) = (frame.vis.len(), frame.hid.len());
            d.map(|(v1, h1)| (v1[..nv].to_vec(), h1[..nh].to_vec()))
        }
    })
}

/// Group a joint distribution by its visible part.
pub fn hide_embed(d: &Joint) -> HyperDist {
    let mut groups: BTreeMap<Vec<Value>, FiniteDist<Vec<Value>>> = BTreeMap::new();
    for ((v, h), w) in d.iter() {
        groups.entry(v.clone()).or_default().add(h.clone(), w);
    }
    let mut out = HyperDist::empty();
    for (v, sub) in groups {
        let w = sub.weight();
        if let Ok(delta) = sub.normalize() {
            out.add(SplitState { v, delta }, &w);
        }
    }
    out
}

/// The joint distribution of (v, h) before hiding: ft of a point hyper.
pub fn joint_of(s: &SplitState) -> Joint {
    s.delta.map(|h| (s.v.clone(), h.clone()))
}

pub fn eval_atomic_block(p: &Program, frame: &Frame, s: &SplitState) -> Result<HyperDist> {
    let joint = s.delta.try_expect_dist(|h| classical_eval(p, frame, &s.v, h))?;
    Ok(hide_embed(&joint))
}

/// Weigh `s` by a per-h probability and evaluate the two branches on the posteriors.
fn branch<F>(frame: &Frame, s: &SplitState, q: F, a: &Program, b: &Program) -> Result<HyperDist>
where
    F: Fn(&[Value]) -> Result<Rational>,
{
    let mut left = FiniteDist::empty();
    let mut right = FiniteDist::empty();
    for (h, w) in s.delta.iter() {
        let qh = q(h)?;
        left.add(h.clone(), &(w * &qh));
        right.add(h.clone(), &(w * (Rational::one() - qh)));
    }
    let mut out = HyperDist::empty();
    for (part, prog) in [(left, a), (right, b)] {
        let p = part.weight();
        if p.is_zero() {
            continue;
        }
        let sub = SplitState { v: s.v.clone(), delta: part.normalize()? };
        out.add_scaled(&eval(prog, frame, &sub)?, &p);
    }
    Ok(out)
}

/// Hyper-distribution semantics of `p` from the split-state `s`.
pub fn eval(p: &Program, frame: &Frame, s: &SplitState) -> Result<HyperDist> {
    match p {
        Program::Skip => Ok(HyperDist::point(s.clone())),
        Program::Assign(..) | Program::Choose(..) | Program::XorAssign(..) => eval_atomic_block(p, frame, s),
        Program::Atomic(q) => eval_atomic_block(q, frame, s),
        Program::Reveal(e) => {
            let mut groups: BTreeMap<Value, FiniteDist<Vec<Value>>> = BTreeMap::new();
            for (h, w) in s.delta.iter() {
                let r = eval_expr(e, &env(frame, &s.v, h))?;
                groups.entry(r).or_default().add(h.clone(), w);
            }
            let mut out = HyperDist::empty();
            for sub in groups.into_values() {
                let w = sub.weight();
                out.add(SplitState { v: s.v.clone(), delta: sub.normalize()? }, &w);
            }
            Ok(out)
        }
        Program::Seq(a, b) => eval(a, frame, s)?.try_expect_dist(|s1| eval(b, frame, s1)),
        Program::Choice(a, q, b) => branch(frame, s, |h| Ok(probability(&eval_expr(q, &env(frame, &s.v, h))?)?), a, b),
        Program::Cond(g, a, b) => branch(
            frame,
            s,
            |h| {
                let t = to_bool(&eval_expr(g, &env(frame, &s.v, h))?)?;
                Ok(if t { Rational::one() } else { Rational::zero() })
            },
            a,
            b,
        ),
        Program::Local(decls, body) => {
            let inner = frame.extend(decls)?;
            let (dv, dh) = inner.dummies(frame.vis.len(), frame.hid.len())?;
            let start = SplitState {
                v: [&s.v[..], &dv[..]].concat(),
                delta: s.delta.map(|h| [&h[..], &dh[..]].concat()),
            };
            let mut d = HyperDist::point(start);
            for ld in decls {
                d = eval_hyper(&init_program(ld), &inner, &d)?;
            }
            let d = eval_hyper(body, &inner, &d)?;
            let (nv, nh) = (frame.vis.len(), frame.hid.len());
            Ok(d.map(|t| SplitState { v: t.v[..nv].to_vec(), delta: t.delta.map(|h| h[..nh].to_vec()) }))
        }
    }
}

/// Lift `eval` to an initial hyper-distribution.
pub fn eval_hyper(p: &Program, frame: &Frame, d: &HyperDist) -> Result<HyperDist> {
    d.try_expect_dist(|s| eval(p, frame, s))
}

/// Evaluate a whole source file from an initial hyper over its global frame.
pub fn eval_source(src: &Source, init: &HyperDist) -> Result<HyperDist> {
    let frame = Frame::from_source(src)?;
    check_hyper(&frame, init)?;
    eval_hyper(&src.body, &frame, init)
}

/// Canonical form: equal split-states merged, zero weights dropped, sorted.
pub fn reduce_hyper(d: &HyperDist) -> HyperDist {
    d.map(|s| s.clone())
}

/// Tuples must match the frame and take values in the declared domains.
pub fn check_hyper(frame: &Frame, d: &HyperDist) -> Result<()> {
    if !d.is_full() {
        return Err(SemError::InvalidState(format!("outer weight {} is not 1", d.weight())));
    }
    for s in d.support() {
        check_tuple(&frame.vis, &s.v)?;
        if !s.delta.is_full() {
            return Err(SemError::InvalidState("inner distribution is not full".into()));
        }
        for h in s.delta.support() {
            check_tuple(&frame.hid, h)?;
        }
    }
    Ok(())
}

fn check_tuple(vars: &[VarInfo], t: &[Value]) -> Result<()> {
    if vars.len() != t.len() {
        return Err(SemError::InvalidState(format!("tuple of length {} for {} variables", t.len(), vars.len())));
    }
    for (x, val) in vars.iter().zip(t) {
        if !x.domain.contains(val) {
            return Err(SemError::ValueNotInDomain { var: x.name.clone(), value: val.to_string() });
        }
    }
    Ok(())
}
