//! Distinguishing contexts for failed refinements.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde_json::json;

use crate::lang::expr::values_equal;
use crate::lang::{parse, pretty_print, BinOp, DistExpr, Expr, LangError, Program, Source, Visibility};
use crate::lp::{solve_max, LinearProgram, LpError};
use crate::matrix::RatMatrix;
use crate::measures::{bayes_vuln, elementary_compare, MeasureKind, Verdict, DEFAULT_PRECISION};
use crate::probcore::{fmt_rational, Rational, Value};
use crate::refine::{check_refinement, Failure, Partition, RefineError, Refinement};
use crate::semantics::{eval_source, tuple_str, Frame, HyperDist, SemError};

pub const DEFAULT_VERTEX_CAP: u64 = 1 << 20;
const MAX_SPLIT: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("the implementation refines the specification; there is nothing to distinguish")]
    PreconditionViolated,
    #[error("programs differ functionally at v = {0}; elementary testing already separates them")]
    FunctionalMismatch(String),
    #[error("programs declare different variables or domains")]
    DomainMismatch,
    #[error("no separating direction found although refinement failed")]
    NotSeparable,
    #[error("{count} vertices exceed the cap of {cap}")]
    VertexBudgetExceeded { count: String, cap: u64 },
    #[error("the program has no hidden variable to overwrite")]
    NoHiddenVariable,
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Lang(#[from] LangError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// Max-margin LP over every simple refinement of the specification partition.
    #[default]
    Vertex,
    /// Reuse the infeasibility certificate of the refinement LP.
    Farkas,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackOptions {
    pub method: Method,
    pub vertex_cap: u64,
}

impl Default for AttackOptions {
    fn default() -> AttackOptions {
        AttackOptions { method: Method::Vertex, vertex_cap: DEFAULT_VERTEX_CAP }
    }
}

/// Normal X (rows: implementation fractions, columns: hidden tuples) with
/// ⟨M Π_S, X⟩ + margin ≤ ⟨Π_I, X⟩ for every simple M.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeparatingDirection {
    pub x: RatMatrix,
    pub margin: Rational,
}

/// Row-stochastic channel on the hidden tuples relevant at the trigger value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackChannel {
    /// Rows follow the hidden space, columns follow `labels`.
    pub d: RatMatrix,
    pub labels: Vec<Value>,
    /// Number of regular columns; the rest absorb the row deficit.
    pub regular: usize,
    /// Hidden tuples that occur at the trigger value.
    pub relevant: Vec<Vec<Value>>,
}

#[derive(Clone, Debug)]
pub struct AttackReport {
    pub trigger: Vec<Value>,
    pub direction: SeparatingDirection,
    pub channel: AttackChannel,
    /// Stand-alone context with the extended declarations.
    pub context: Source,
    pub bv_s: Rational,
    pub bv_i: Rational,
    pub verdict: bool,
    /// Whether re-parsing the printed context reproduced both vulnerabilities.
    pub round_trip: bool,
}

impl AttackReport {
    pub fn context_text(&self) -> String {
        pretty_print(&self.context)
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "trigger": tuple_str(&self.trigger),
            "margin": fmt_rational(&self.direction.margin),
            "labels": self.channel.labels.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "D": &self.channel.d,
            "bv_S": fmt_rational(&self.bv_s),
            "bv_I": fmt_rational(&self.bv_i),
            "verdict": self.verdict,
            "round_trip": self.round_trip,
            "context": self.context_text(),
        })
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// (max over simple M of ⟨M Π_S, X⟩, ⟨Π_I, X⟩), with partitions as matrices over the same columns.
pub fn vertex_scores(spec: &RatMatrix, imp: &RatMatrix, x: &RatMatrix) -> (Rational, Rational) {
    let s_best = (0..spec.rows())
        .map(|j| (0..x.rows()).map(|i| dot(spec.row(j), x.row(i))).max().unwrap_or_else(Rational::zero))
        .sum();
    let i_score = (0..imp.rows()).map(|i| dot(imp.row(i), x.row(i))).sum();
    (s_best, i_score)
}

/// Flip X if needed so the specification side scores strictly lower.
pub fn orient(x: RatMatrix, spec: &RatMatrix, imp: &RatMatrix) -> Result<SeparatingDirection, AttackError> {
    let (s, i) = vertex_scores(spec, imp, &x);
    if i > s {
        return Ok(SeparatingDirection { margin: i - s, x });
    }
    let neg = x.scale(&-Rational::one());
    let (s, i) = vertex_scores(spec, imp, &neg);
    if i > s {
        return Ok(SeparatingDirection { margin: i - s, x: neg });
    }
    Err(AttackError::NotSeparable)
}

/// Hidden tuples carrying mass in either partition.
pub fn relevant_hidden(spec: &Partition, imp: &Partition) -> Vec<Vec<Value>> {
    let set: BTreeSet<Vec<Value>> = spec.fractions.iter().chain(&imp.fractions).flat_map(|f| f.support().cloned()).collect();
    set.into_iter().collect()
}

fn embed_columns(x: &RatMatrix, from: &[Vec<Value>], to: &[Vec<Value>]) -> RatMatrix {
    let mut out = RatMatrix::zeros(x.rows(), to.len());
    for (c, h) in from.iter().enumerate() {
        let k = to.iter().position(|t| t == h).expect("column present");
        for r in 0..x.rows() {
            out[(r, k)] = x[(r, c)].clone();
        }
    }
    out
}

/// Max-margin separation over all K^F simple refinements, X ∈ [−1,1].
pub fn separating_direction(
    spec: &Partition,
    imp: &Partition,
    h_space: &[Vec<Value>],
    cap: u64,
) -> Result<SeparatingDirection, AttackError> {
    let rel = relevant_hidden(spec, imp);
    let (ms, mi) = (spec.matrix(&rel), imp.matrix(&rel));
    let (k, f, nh) = (imp.len(), spec.len(), rel.len());
    let count = (k as u128).checked_pow(f as u32);
    match count {
        Some(c) if c <= cap as u128 => {}
        _ => {
            let shown = count.map_or_else(|| format!("{k}^{f}"), |c| c.to_string());
            return Err(AttackError::VertexBudgetExceeded { count: shown, cap });
        }
    }
    let eps = k * nh;
    let mut lp = LinearProgram::new(eps + 1);
    for j in 0..eps {
        lp.bound(j, Some(-Rational::one()), Some(Rational::one()));
    }
    lp.free(eps);
    let mut target = vec![Rational::zero(); eps + 1];
    for i in 0..k {
        for h in 0..nh {
            target[i * nh + h] = mi[(i, h)].clone();
        }
    }
    let mut assign = vec![0usize; f];
    loop {
        let mut row: Vec<Rational> = target.iter().map(|t| -t.clone()).collect();
        for (j, &i) in assign.iter().enumerate() {
            for h in 0..nh {
                row[i * nh + h] += &ms[(j, h)];
            }
        }
        row[eps] = Rational::one();
        lp.add(row, crate::lp::Relation::Le, Rational::zero());
        let mut pos = 0;
        while pos < f && assign[pos] + 1 == k {
            assign[pos] = 0;
            pos += 1;
        }
        if pos == f {
            break;
        }
        assign[pos] += 1;
    }
    let mut obj = vec![Rational::zero(); eps + 1];
    obj[eps] = Rational::one();
    lp.maximize(obj);
    let (best, point) = solve_max(&lp)?;
    if !best.is_positive() {
        return Err(AttackError::NotSeparable);
    }
    let rows = (0..k).map(|i| point[i * nh..(i + 1) * nh].to_vec()).collect();
    let x = embed_columns(&RatMatrix::from_rows(rows), &rel, h_space);
    orient(x, &spec.matrix(h_space), &imp.matrix(h_space))
}

/// Separating direction read off the refinement LP's Farkas certificate.
pub fn direction_from_certificate(failure: &Failure) -> Result<SeparatingDirection, AttackError> {
    let (k, nh) = (failure.imp.len(), failure.h_space.len());
    let y = &failure.certificate.y;
    if y.len() < k * nh {
        return Err(AttackError::NotSeparable);
    }
    let rows = (0..k).map(|i| (0..nh).map(|h| -y[i * nh + h].clone()).collect()).collect();
    orient(RatMatrix::from_rows(rows), &failure.spec.matrix(&failure.h_space), &failure.imp.matrix(&failure.h_space))
}

fn is_used(v: &Value, used: &[Value]) -> bool {
    used.iter().any(|u| u == v || values_equal(u, v))
}

fn fresh_nonneg(used: &[Value]) -> Value {
    (0..).map(Value::int).find(|v| !is_used(v, used)).expect("unbounded search")
}

fn fresh_negatives(used: &[Value], m: usize) -> Vec<Value> {
    let mut out = Vec::new();
    let mut n = -1;
    while out.len() < m {
        let v = Value::int(n);
        if !is_used(&v, used) {
            out.push(v);
        }
        n -= 1;
    }
    out.reverse();
    out
}

/// Labels for the K regular columns: the domain's first values, then fresh ones.
fn regular_labels(domain: &[Value], k: usize) -> Vec<Value> {
    let mut labels: Vec<Value> = domain.iter().take(k).cloned().collect();
    while labels.len() < k {
        let mut used = domain.to_vec();
        used.extend(labels.iter().cloned());
        labels.push(fresh_nonneg(&used));
    }
    labels
}

/// Turn an oriented direction into a channel: transpose, shift, scale, then pad each
/// relevant row to one with `split` deficit columns (none when no row needs padding).
pub fn build_attack_channel(
    dir: &SeparatingDirection,
    h_space: &[Vec<Value>],
    relevant: &[Vec<Value>],
    domain: &[Value],
    split: usize,
) -> AttackChannel {
    let k = dir.x.rows();
    let d0 = dir.x.transpose();
    let rel_rows: Vec<usize> = relevant.iter().filter_map(|h| h_space.iter().position(|x| x == h)).collect();
    let min = rel_rows.iter().flat_map(|&r| d0.row(r).iter()).min().cloned().unwrap_or_else(Rational::zero);
    let shift = if min.is_negative() { -min } else { Rational::zero() };
    let shifted: Vec<Vec<Rational>> = (0..d0.rows()).map(|r| d0.row(r).iter().map(|x| x + &shift).collect()).collect();
    let top = rel_rows.iter().map(|&r| shifted[r].iter().sum::<Rational>()).max().unwrap_or_else(Rational::zero);
    let scale = if top.is_positive() { top.recip() } else { Rational::one() };
    let scaled: Vec<Vec<Rational>> = shifted.iter().map(|row| row.iter().map(|x| x * &scale).collect()).collect();
    let deficit: Vec<Option<Rational>> = scaled
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let sum: Rational = row.iter().sum();
            let ok = rel_rows.contains(&r) || (row.iter().all(|x| !x.is_negative()) && sum <= Rational::one());
            ok.then(|| Rational::one() - sum)
        })
        .collect();
    let needs_pad = rel_rows.iter().any(|&r| deficit[r].as_ref().is_some_and(|z| !z.is_zero()));
    let mut labels = regular_labels(domain, k);
    let extra: Vec<Value> = if !needs_pad {
        Vec::new()
    } else if split <= 1 {
        let mut used = domain.to_vec();
        used.extend(labels.iter().cloned());
        let zero = Value::int(0);
        vec![if is_used(&zero, &used) { fresh_negatives(&used, 1).remove(0) } else { zero }]
    } else {
        let mut used = domain.to_vec();
        used.extend(labels.iter().cloned());
        fresh_negatives(&used, split)
    };
    let m = Rational::from_integer((extra.len().max(1) as i64).into());
    let mut rows = Vec::new();
    for (r, row) in scaled.into_iter().enumerate() {
        match &deficit[r] {
            Some(z) => {
                let mut full = row;
                full.extend(extra.iter().map(|_| z / &m));
                rows.push(full);
            }
            None => rows.push(vec![Rational::zero(); k + extra.len()]),
        }
    }
    labels.extend(extra);
    AttackChannel { d: RatMatrix::from_rows(rows), labels, regular: k, relevant: relevant.to_vec() }
}

/// Smallest split so no deficit value can outscore a regular guess on either side.
pub fn required_split(ch: &AttackChannel, partitions: &[&Partition], h_space: &[Vec<Value>]) -> usize {
    let k = ch.regular;
    let width = ch.d.cols();
    let mut m = 1usize;
    for p in partitions {
        for f in &p.fractions {
            let mut col = vec![Rational::zero(); width];
            for (h, w) in f.iter() {
                let r = h_space.iter().position(|x| x == h).expect("hidden tuple in space");
                for (c, acc) in col.iter_mut().enumerate() {
                    *acc += w * &ch.d[(r, c)];
                }
            }
            let best = col[..k].iter().max().cloned().unwrap_or_else(Rational::zero);
            let extra: Rational = col[k..].iter().sum();
            if extra > best && best.is_positive() {
                let need = (extra / best).ceil().to_integer();
                let need: usize = need.try_into().unwrap_or(MAX_SPLIT);
                m = m.max(need);
            }
        }
    }
    m
}

fn conj(vars: &[String], vals: &[Value]) -> Expr {
    let mut parts = vars
        .iter()
        .zip(vals)
        .map(|(x, v)| Expr::bin(BinOp::Eq, Expr::var(x), Expr::lit(v.clone())));
    let first = parts.next().unwrap_or(Expr::lit(Value::Bool(true)));
    parts.fold(first, |acc, e| Expr::bin(BinOp::And, acc, e))
}

/// The context program and its declarations for the given channel.
pub fn context_program(src: &Source, trigger: &[Value], ch: &AttackChannel, h_space: &[Vec<Value>]) -> Result<Source, AttackError> {
    let frame = Frame::from_source(src)?;
    let target = frame.hid.first().ok_or(AttackError::NoHiddenVariable)?.clone();
    let vis: Vec<String> = frame.vis.iter().map(|x| x.name.clone()).collect();
    let hid: Vec<String> = frame.hid.iter().map(|x| x.name.clone()).collect();
    let row_dist = |h: &Vec<Value>| {
        let r = h_space.iter().position(|x| x == h).expect("hidden tuple in space");
        let mut items: Vec<(Value, Rational)> =
            ch.labels.iter().cloned().zip(ch.d.row(r).iter().cloned()).filter(|(_, p)| !p.is_zero()).collect();
        items.sort();
        DistExpr::Explicit(items.into_iter().map(|(v, p)| (Expr::lit(v), Expr::lit(Value::Num(p)))).collect())
    };
    let mut rows = ch.relevant.iter().rev();
    let last = rows.next().ok_or(AttackError::NotSeparable)?;
    let mut dist = row_dist(last);
    for h in rows {
        dist = DistExpr::Cond(Box::new(row_dist(h)), conj(&hid, h), Box::new(dist));
    }
    let resets = |out: &mut Vec<Program>| {
        for x in frame.hid.iter().skip(1) {
            out.push(Program::Assign(x.name.clone(), Expr::lit(x.domain[0].clone())));
        }
    };
    let mut then = vec![Program::Choose(target.name.clone(), dist)];
    resets(&mut then);

    let mut domain = target.domain.clone();
    let mut added: Vec<Value> = ch.labels.iter().filter(|l| !domain.contains(l)).cloned().collect();
    let zero = Value::int(0);
    let known: Vec<Value> = domain.iter().chain(&added).cloned().collect();
    let fallback = if known.contains(&zero) {
        zero
    } else if !is_used(&zero, &known) {
        added.push(zero.clone());
        zero
    } else {
        domain[0].clone()
    };
    domain.extend(added);
    domain.sort();

    let body = if vis.is_empty() {
        Program::seq_all(then)
    } else {
        let mut other = vec![Program::Assign(target.name.clone(), Expr::lit(fallback))];
        resets(&mut other);
        Program::cond(conj(&vis, trigger), Program::seq_all(then), Program::seq_all(other))
    };
    let mut decls = src.decls.clone();
    for d in decls.iter_mut() {
        if d.name == target.name && d.visibility == Visibility::Hid {
            d.domain = domain.clone();
        }
    }
    Ok(Source { decls, body })
}

/// `a ; c` over the context's (extended) declarations.
pub fn compose(a: &Source, c: &Source) -> Source {
    Source { decls: c.decls.clone(), body: Program::seq(a.body.clone(), c.body.clone()) }
}

fn same_frame(a: &Source, b: &Source) -> Result<Frame, AttackError> {
    let (fa, fb) = (Frame::from_source(a)?, Frame::from_source(b)?);
    if fa != fb {
        return Err(AttackError::DomainMismatch);
    }
    Ok(fa)
}

/// Build, emit and check a context for a known failure and direction.
pub fn attack_with_direction(
    s: &Source,
    i: &Source,
    init: &HyperDist,
    failure: &Failure,
    direction: SeparatingDirection,
) -> Result<AttackReport, AttackError> {
    let frame = same_frame(s, i)?;
    let target = frame.hid.first().ok_or(AttackError::NoHiddenVariable)?;
    let relevant = relevant_hidden(&failure.spec, &failure.imp);
    let h_space = &failure.h_space;
    let mut split = {
        let ch = build_attack_channel(&direction, h_space, &relevant, &target.domain, 1);
        required_split(&ch, &[&failure.spec, &failure.imp], h_space)
    };
    loop {
        let channel = build_attack_channel(&direction, h_space, &relevant, &target.domain, split);
        let context = context_program(s, &failure.v, &channel, h_space)?;
        let (sc, ic) = (eval_source(&compose(s, &context), init)?, eval_source(&compose(i, &context), init)?);
        let (bv_s, bv_i) = (bayes_vuln(&sc), bayes_vuln(&ic));
        let verdict = bv_i > bv_s
            && matches!(
                elementary_compare(&sc, &ic, &MeasureKind::BayesVuln, DEFAULT_PRECISION),
                Ok(Verdict::FailsMeasure { .. })
            );
        if verdict || split >= MAX_SPLIT || channel.labels.len() == channel.regular {
            let reparsed = parse(&pretty_print(&context))?;
            let round_trip = bayes_vuln(&eval_source(&compose(s, &reparsed), init)?) == bv_s
                && bayes_vuln(&eval_source(&compose(i, &reparsed), init)?) == bv_i;
            return Ok(AttackReport {
                trigger: failure.v.clone(),
                direction,
                channel,
                context,
                bv_s,
                bv_i,
                verdict: verdict && round_trip,
                round_trip,
            });
        }
        split = (split * 2).max(2);
    }
}

/// Find why S ⋢ I from `init` and build a verified distinguishing context.
pub fn synthesize_and_verify(s: &Source, i: &Source, init: &HyperDist, opts: &AttackOptions) -> Result<AttackReport, AttackError> {
    same_frame(s, i)?;
    let (ds, di) = (eval_source(s, init)?, eval_source(i, init)?);
    let failure = match check_refinement(&ds, &di)? {
        Refinement::Refined(_) => return Err(AttackError::PreconditionViolated),
        Refinement::FunctionalMismatch { v } => return Err(AttackError::FunctionalMismatch(tuple_str(&v))),
        Refinement::NotRefined(f) => f,
    };
    let direction = match opts.method {
        Method::Vertex => separating_direction(&failure.spec, &failure.imp, &failure.h_space, opts.vertex_cap)?,
        Method::Farkas => direction_from_certificate(&failure)?,
    };
    attack_with_direction(s, i, init, &failure, direction)
}
