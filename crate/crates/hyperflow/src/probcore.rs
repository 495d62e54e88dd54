//! Exact rationals, values and finite (sub-)distributions.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats as `num/den`, including `1/1` and `0/1`.
pub fn fmt_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `n`, `n/d` and finite decimals such as `0.25`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        let neg = whole.starts_with('-');
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().ok()?
        };
        let f: BigInt = frac.parse().ok()?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::from_integer(w.abs()) + Rational::new(f, scale);
        return Some(if neg { -mag } else { mag });
    }
    s.parse::<BigInt>().ok().map(Rational::from_integer)
}

/// A scalar held by a program variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Bool(bool),
    Num(Rational),
    Sym(String),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Num(int(n))
    }

    pub fn sym(s: &str) -> Value {
        Value::Sym(s.to_string())
    }

    /// Numeric view; booleans read as 0/1.
    pub fn as_num(&self) -> Option<Rational> {
        match self {
            Value::Num(r) => Some(r.clone()),
            Value::Bool(b) => Some(if *b { Rational::one() } else { Rational::zero() }),
            Value::Sym(_) => None,
        }
    }

    /// Boolean view; the numbers 0 and 1 read as false and true.
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Num(r) if r.is_zero() => Some(false),
            Value::Num(r) if r.is_one() => Some(true),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Value> {
        let s = s.trim();
        match s {
            "true" => return Some(Value::Bool(true)),
            "false" => return Some(Value::Bool(false)),
            _ => {}
        }
        if let Some(r) = parse_rational(s) {
            return Some(Value::Num(r));
        }
        let mut chars = s.chars();
        let first = chars.next()?;
        if (first.is_alphabetic() || first == '_')
            && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '\'')
        {
            Some(Value::Sym(s.to_string()))
        } else {
            None
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Value::Num(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Sym(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistError {
    #[error("negative weight {0}")]
    NegativeWeight(String),
    #[error("weights sum to {0}, more than 1")]
    WeightOverflow(String),
    #[error("distribution has zero weight")]
    ZeroWeight,
    #[error("conditioning event has probability zero")]
    ZeroCondition,
    #[error("uniform over an empty set")]
    EmptyUniform,
}

/// A finite sub-distribution. Zero weights are never stored.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FiniteDist<K: Ord> {
    entries: BTreeMap<K, Rational>,
}

impl<K: Ord> Default for FiniteDist<K> {
    fn default() -> Self {
        FiniteDist { entries: BTreeMap::new() }
    }
}

impl<K: Ord + Clone> FiniteDist<K> {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn point(k: K) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(k, Rational::one());
        FiniteDist { entries }
    }

    /// Checked constructor: weights must be non-negative and sum to at most 1.
    pub fn from_pairs<I: IntoIterator<Item = (K, Rational)>>(pairs: I) -> Result<Self, DistError> {
        let mut d = Self::empty();
        for (k, w) in pairs {
            if w.is_negative() {
                return Err(DistError::NegativeWeight(fmt_rational(&w)));
            }
            d.add(k, &w);
        }
        let total = d.weight();
        if total > Rational::one() {
            return Err(DistError::WeightOverflow(fmt_rational(&total)));
        }
        Ok(d)
    }

    /// Unchecked constructor for already-validated non-negative weights.
    pub fn from_weights<I: IntoIterator<Item = (K, Rational)>>(pairs: I) -> Self {
        let mut d = Self::empty();
        for (k, w) in pairs {
            d.add(k, &w);
        }
        d
    }

    pub fn uniform<I: IntoIterator<Item = K>>(items: I) -> Result<Self, DistError> {
        let items: Vec<K> = items.into_iter().collect();
        if items.is_empty() {
            return Err(DistError::EmptyUniform);
        }
        let w = Rational::new(BigInt::one(), BigInt::from(items.len()));
        Ok(Self::from_weights(items.into_iter().map(|k| (k, w.clone()))))
    }

    /// Adds weight to `k`; entries that reach zero are dropped.
    pub fn add(&mut self, k: K, w: &Rational) {
        if w.is_zero() {
            return;
        }
        let slot = self.entries.entry(k.clone()).or_insert_with(Rational::zero);
        *slot += w;
        if slot.is_zero() {
            self.entries.remove(&k);
        }
    }

    pub fn add_scaled(&mut self, other: &FiniteDist<K>, scale: &Rational) {
        if scale.is_zero() {
            return;
        }
        for (k, w) in &other.entries {
            self.add(k.clone(), &(w * scale));
        }
    }

    pub fn get(&self, k: &K) -> Rational {
        self.entries.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn weight(&self) -> Rational {
        self.entries.values().fold(Rational::zero(), |a, w| a + w)
    }

    pub fn is_full(&self) -> bool {
        self.weight().is_one()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Rational)> {
        self.entries.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &K> {
        self.entries.keys()
    }

    pub fn max_prob(&self) -> Rational {
        self.entries.values().max().cloned().unwrap_or_else(Rational::zero)
    }

    /// Probabilities in non-increasing order.
    pub fn probs_desc(&self) -> Vec<Rational> {
        let mut ps: Vec<Rational> = self.entries.values().cloned().collect();
        ps.sort_by(|a, b| b.cmp(a));
        ps
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::empty();
        }
        FiniteDist {
            entries: self.entries.iter().map(|(k, w)| (k.clone(), w * s)).collect(),
        }
    }

    pub fn normalize(&self) -> Result<Self, DistError> {
        let total = self.weight();
        if total.is_zero() {
            return Err(DistError::ZeroWeight);
        }
        Ok(self.scale(&total.recip()))
    }

    pub fn expect<F: FnMut(&K) -> Rational>(&self, mut f: F) -> Rational {
        self.entries.iter().fold(Rational::zero(), |acc, (k, w)| acc + w * f(k))
    }

    pub fn expect_dist<L: Ord + Clone, F: FnMut(&K) -> FiniteDist<L>>(&self, mut f: F) -> FiniteDist<L> {
        let mut out = FiniteDist::empty();
        for (k, w) in &self.entries {
            out.add_scaled(&f(k), w);
        }
        out
    }

    pub fn try_expect_dist<L, E, F>(&self, mut f: F) -> Result<FiniteDist<L>, E>
    where
        L: Ord + Clone,
        F: FnMut(&K) -> Result<FiniteDist<L>, E>,
    {
        let mut out = FiniteDist::empty();
        for (k, w) in &self.entries {
            out.add_scaled(&f(k)?, w);
        }
        Ok(out)
    }

    /// The a-posteriori distribution after weighting each point by `w`.
    pub fn posterior<F: FnMut(&K) -> Rational>(&self, mut w: F) -> Result<Self, DistError> {
        let mut out = Self::empty();
        for (k, p) in &self.entries {
            let wk = w(k);
            if wk.is_negative() {
                return Err(DistError::NegativeWeight(fmt_rational(&wk)));
            }
            out.add(k.clone(), &(p * wk));
        }
        if out.is_empty() {
            return Err(DistError::ZeroCondition);
        }
        out.normalize()
    }

    /// Push-forward along `f`.
    pub fn map<L: Ord + Clone, F: FnMut(&K) -> L>(&self, mut f: F) -> FiniteDist<L> {
        let mut out = FiniteDist::empty();
        for (k, w) in &self.entries {
            out.add(f(k), w);
        }
        out
    }

    pub fn restrict<F: FnMut(&K) -> bool>(&self, mut keep: F) -> Self {
        FiniteDist {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, w)| (k.clone(), w.clone()))
                .collect(),
        }
    }
}

impl<K: Ord + fmt::Display> fmt::Display for FiniteDist<K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, w)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}@{w}")?;
        }
        write!(f, "}}")
    }
}

pub fn mk_dist<I: IntoIterator<Item = (Value, Rational)>>(pairs: I) -> Result<FiniteDist<Value>, DistError> {
    FiniteDist::from_pairs(pairs)
}

pub fn normalize<K: Ord + Clone>(d: &FiniteDist<K>) -> Result<FiniteDist<K>, DistError> {
    d.normalize()
}

pub fn expected_value<K: Ord + Clone, F: FnMut(&K) -> Rational>(d: &FiniteDist<K>, f: F) -> Rational {
    d.expect(f)
}

pub fn posterior<K: Ord + Clone, F: FnMut(&K) -> Rational>(
    d: &FiniteDist<K>,
    w: F,
) -> Result<FiniteDist<K>, DistError> {
    d.posterior(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: i64) -> Value {
        Value::int(n)
    }

    #[test]
    fn uniform_from_pairs() {
        let d = mk_dist([(v(0), rat(1, 3)), (v(1), rat(1, 3)), (v(2), rat(1, 3))]).unwrap();
        assert_eq!(d, FiniteDist::uniform([v(0), v(1), v(2)]).unwrap());
        assert!(d.is_full());
    }

    #[test]
    fn duplicates_add() {
        let d = mk_dist([(v(0), rat(1, 4)), (v(0), rat(1, 4))]).unwrap();
        assert_eq!(d.get(&v(0)), rat(1, 2));
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(mk_dist([(v(0), rat(-1, 4))]), Err(DistError::NegativeWeight(_))));
        assert!(matches!(
            mk_dist([(v(0), rat(3, 4)), (v(1), rat(1, 2))]),
            Err(DistError::WeightOverflow(_))
        ));
    }

    #[test]
    fn zero_entries_dropped() {
        let d = mk_dist([(v(0), rat(0, 1)), (v(1), rat(1, 1))]).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn normalize_examples() {
        let d = mk_dist([(v(1), rat(1, 3)), (v(3), rat(1, 6))]).unwrap();
        let n = normalize(&d).unwrap();
        assert_eq!(n, mk_dist([(v(1), rat(2, 3)), (v(3), rat(1, 3))]).unwrap());
        assert_eq!(normalize(&n).unwrap(), n);
        let e = mk_dist([(v(0), rat(1, 8))]).unwrap();
        assert_eq!(normalize(&e).unwrap(), FiniteDist::point(v(0)));
        assert_eq!(normalize(&FiniteDist::<Value>::empty()), Err(DistError::ZeroWeight));
    }

    #[test]
    fn expectation_examples() {
        let d = FiniteDist::uniform([v(0), v(1), v(2)]).unwrap();
        let half = expected_value(&d, |x| x.as_num().unwrap() / int(2));
        assert_eq!(half, rat(1, 2));
        assert_eq!(expected_value(&d, |_| int(1)), int(1));
        let parity = d.expect_dist(|x| {
            let n = x.as_num().unwrap().to_integer();
            FiniteDist::point(Value::Num(Rational::from_integer(n % 2)))
        });
        assert_eq!(parity, mk_dist([(v(0), rat(2, 3)), (v(1), rat(1, 3))]).unwrap());
    }

    #[test]
    fn posterior_examples() {
        let d = FiniteDist::uniform([v(0), v(1), v(2)]).unwrap();
        let p = posterior(&d, |x| x.as_num().unwrap() / int(2)).unwrap();
        assert_eq!(p, mk_dist([(v(1), rat(1, 3)), (v(2), rat(2, 3))]).unwrap());
        assert_eq!(posterior(&d, |_| int(1)).unwrap(), d);
        let r = posterior(&d, |x| if *x != v(0) { int(1) } else { int(0) }).unwrap();
        assert_eq!(r, FiniteDist::uniform([v(1), v(2)]).unwrap());
        assert_eq!(posterior(&d, |_| int(0)), Err(DistError::ZeroCondition));
    }

    #[test]
    fn rational_text() {
        assert_eq!(fmt_rational(&int(1)), "1/1");
        assert_eq!(fmt_rational(&rat(4, 6)), "2/3");
        assert_eq!(parse_rational("2/3"), Some(rat(2, 3)));
        assert_eq!(parse_rational("0.25"), Some(rat(1, 4)));
        assert_eq!(parse_rational("-1.5"), Some(rat(-3, 2)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(Value::parse("bot"), Some(Value::sym("bot")));
        assert_eq!(Value::parse("-2"), Some(v(-2)));
        assert_eq!(Value::Num(rat(1, 4)).to_string(), "1/4");
    }
}
