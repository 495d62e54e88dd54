//! Functional projection and the four uncertainty measures.

pub mod bigfloat;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed};
use serde_json::json;

pub use bigfloat::{BigFloat, LogSum, DEFAULT_PRECISION, MIN_PRECISION};

use crate::probcore::{fmt_rational, parse_rational, Rational};
use crate::semantics::{HyperDist, Joint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    BayesVuln,
    Shannon,
    GuessingEntropy,
    MarginalGuesswork(Rational),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("hyper-distributions range over different state shapes")]
    DomainMismatch,
    #[error("unknown measure '{0}'")]
    UnknownMeasure(String),
    #[error("guesswork threshold must lie in (0,1], got {0}")]
    BadAlpha(String),
    #[error("precision must be at least {MIN_PRECISION} bits")]
    Precision,
}

impl MeasureKind {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureKind::BayesVuln => "bayes",
            MeasureKind::Shannon => "shannon",
            MeasureKind::GuessingEntropy => "guessing",
            MeasureKind::MarginalGuesswork(_) => "guesswork",
        }
    }

    pub fn all(alpha: Rational) -> Vec<MeasureKind> {
        vec![MeasureKind::BayesVuln, MeasureKind::Shannon, MeasureKind::GuessingEntropy, MeasureKind::MarginalGuesswork(alpha)]
    }
}

impl FromStr for MeasureKind {
    type Err = MeasureError;

    /// `bayes`, `shannon`, `guessing` (or `gentropy`), or `guesswork:ALPHA`.
    fn from_str(s: &str) -> Result<MeasureKind, MeasureError> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("bayes" | "bv", None) => Ok(MeasureKind::BayesVuln),
            ("shannon", None) => Ok(MeasureKind::Shannon),
            ("guessing" | "gentropy" | "ge", None) => Ok(MeasureKind::GuessingEntropy),
            ("guesswork" | "mg", Some(a)) => {
                let alpha = parse_rational(a).ok_or_else(|| MeasureError::BadAlpha(a.to_string()))?;
                if !alpha.is_positive() || alpha > Rational::one() {
                    return Err(MeasureError::BadAlpha(a.to_string()));
                }
                Ok(MeasureKind::MarginalGuesswork(alpha))
            }
            _ => Err(MeasureError::UnknownMeasure(s.to_string())),
        }
    }
}

impl fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureKind::MarginalGuesswork(a) => write!(f, "guesswork:{}", fmt_rational(a)),
            k => f.write_str(k.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MeasureValue {
    Exact(Rational),
    Count(usize),
    Approx(BigFloat),
}

impl MeasureValue {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            MeasureValue::Exact(r) => json!(fmt_rational(r)),
            MeasureValue::Count(n) => json!(n.to_string()),
            MeasureValue::Approx(b) => json!(b.to_string()),
        }
    }
}

impl fmt::Display for MeasureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureValue::Exact(r) => f.write_str(&fmt_rational(r)),
            MeasureValue::Count(n) => write!(f, "{n}"),
            MeasureValue::Approx(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    FailsFunctional,
    FailsMeasure { s: MeasureValue, i: MeasureValue },
    ToleranceInconclusive { s: MeasureValue, i: MeasureValue },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::FailsFunctional => "fails_functional",
            Verdict::FailsMeasure { .. } => "fails_measure",
            Verdict::ToleranceInconclusive { .. } => "inconclusive",
        }
    }
}

/// The overall joint output distribution.
pub fn ft(d: &HyperDist) -> Joint {
    let mut out = Joint::empty();
    for (s, w) in d.iter() {
        for (h, p) in s.delta.iter() {
            out.add((s.v.clone(), h.clone()), &(w * p));
        }
    }
    out
}

pub fn bayes_vuln(d: &HyperDist) -> Rational {
    d.expect(|s| s.delta.max_prob())
}

/// Σ w · H(δ) as an exact sum of logarithms: −p lg p = p lg b − p lg a for p = a/b.
pub fn shannon_terms(d: &HyperDist) -> LogSum {
    let mut sum = LogSum::default();
    for (s, w) in d.iter() {
        for (_, p) in s.delta.iter() {
            let c = w * p;
            sum.add(p.denom(), &c);
            sum.add(p.numer(), &-c);
        }
    }
    sum
}

pub fn shannon_entropy(d: &HyperDist, precision: u32) -> BigFloat {
    shannon_terms(d).eval(precision.max(MIN_PRECISION))
}

/// Expected number of guesses when guessing in order of decreasing probability.
pub fn guessing_entropy(d: &HyperDist) -> Rational {
    d.expect(|s| {
        s.delta
            .probs_desc()
            .iter()
            .enumerate()
            .map(|(i, p)| p * Rational::from_integer((i as i64 + 1).into()))
            .sum()
    })
}

/// Least i such that the expected mass of the i most likely values reaches α.
pub fn marginal_guesswork(d: &HyperDist, alpha: &Rational) -> usize {
    let ranked: Vec<(Rational, Vec<Rational>)> = d.iter().map(|(s, w)| (w.clone(), s.delta.probs_desc())).collect();
    let longest = ranked.iter().map(|(_, p)| p.len()).max().unwrap_or(0);
    for i in 1..=longest.max(1) {
        let mass: Rational = ranked.iter().map(|(w, p)| w * p.iter().take(i).sum::<Rational>()).sum();
        if mass >= *alpha {
            return i;
        }
    }
    longest.max(1)
}

pub fn measure(d: &HyperDist, kind: &MeasureKind, precision: u32) -> MeasureValue {
    match kind {
        MeasureKind::BayesVuln => MeasureValue::Exact(bayes_vuln(d)),
        MeasureKind::Shannon => MeasureValue::Approx(shannon_entropy(d, precision)),
        MeasureKind::GuessingEntropy => MeasureValue::Exact(guessing_entropy(d)),
        MeasureKind::MarginalGuesswork(a) => MeasureValue::Count(marginal_guesswork(d, a)),
    }
}

/// Lengths of the visible and hidden tuples, if consistent.
pub fn state_shape(d: &HyperDist) -> Option<(usize, usize)> {
    let mut out = None;
    for s in d.support() {
        for h in s.delta.support() {
            let here = (s.v.len(), h.len());
            if out.is_some_and(|o| o != here) {
                return None;
            }
            out = Some(here);
        }
    }
    out
}

/// The elementary testing order for one measure: does Δ_I leak no more than Δ_S?
pub fn elementary_compare(s: &HyperDist, i: &HyperDist, kind: &MeasureKind, precision: u32) -> Result<Verdict, MeasureError> {
    if precision < MIN_PRECISION {
        return Err(MeasureError::Precision);
    }
    match (state_shape(s), state_shape(i)) {
        (Some(a), Some(b)) if a != b => return Err(MeasureError::DomainMismatch),
        (None, _) | (_, None) => return Err(MeasureError::DomainMismatch),
        _ => {}
    }
    if ft(s) != ft(i) {
        return Ok(Verdict::FailsFunctional);
    }
    let (ms, mi) = (measure(s, kind, precision), measure(i, kind, precision));
    let ok = match kind {
        MeasureKind::BayesVuln => bayes_vuln(i) <= bayes_vuln(s),
        MeasureKind::GuessingEntropy => guessing_entropy(i) >= guessing_entropy(s),
        MeasureKind::MarginalGuesswork(a) => marginal_guesswork(i, a) >= marginal_guesswork(s, a),
        MeasureKind::Shannon => match shannon_order(i, s, precision) {
            Some(o) => o != Ordering::Less,
            None => return Ok(Verdict::ToleranceInconclusive { s: ms, i: mi }),
        },
    };
    Ok(if ok { Verdict::Holds } else { Verdict::FailsMeasure { s: ms, i: mi } })
}

/// Sign of H(a) − H(b); exact when equal, `None` if the enclosure straddles zero.
pub fn shannon_order(a: &HyperDist, b: &HyperDist, precision: u32) -> Option<Ordering> {
    let diff = shannon_terms(a).sub(&shannon_terms(b));
    if diff.is_zero() {
        return Some(Ordering::Equal);
    }
    let iv = diff.eval(precision);
    if iv.lo.is_positive() {
        Some(Ordering::Greater)
    } else if iv.hi.is_negative() {
        Some(Ordering::Less)
    } else {
        None
    }
}

/// Acceptance tolerance for reported Shannon values.
pub fn shannon_tolerance() -> Rational {
    Rational::new(1.into(), 1_000_000_000.into())
}

pub fn is_within(b: &BigFloat, target: &Rational, tol: &Rational) -> bool {
    (&b.lo - target).abs() <= *tol && (&b.hi - target).abs() <= *tol
}
