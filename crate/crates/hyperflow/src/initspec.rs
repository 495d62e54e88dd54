//! Initial states from text such as `v=bot; h~uniform` or `h~{0@1/4, 1@3/4}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lang::expr::coerce_to_domain;
use crate::probcore::{parse_rational, FiniteDist, Rational, Value};
use crate::semantics::{hide_embed, Frame, HyperDist, Joint, VarInfo};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InitError {
    #[error("cannot parse init item '{0}'")]
    Syntax(String),
    #[error("init names unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("init does not cover variable '{0}'")]
    MissingVariable(String),
    #[error("value {1} is not in the domain of '{0}'")]
    ValueNotInDomain(String, String),
    #[error("prior for '{0}' is not a full distribution")]
    NotFull(String),
    #[error("sampled priors disagree on the number of samples")]
    SampleCount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Prior {
    Point(Value),
    Uniform,
    Explicit(Vec<(Value, Rational)>),
    /// N random full-support priors from the seeded generator.
    Sample(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitSpec {
    pub items: Vec<(String, Prior)>,
    pub seed: u64,
}

/// One concrete initial hyper-distribution.
#[derive(Clone, Debug)]
pub struct InitPoint {
    pub label: String,
    pub hyper: HyperDist,
}

impl InitSpec {
    pub fn parse(text: &str) -> Result<InitSpec, InitError> {
        let mut items = Vec::new();
        for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || InitError::Syntax(item.to_string());
            if let Some((name, rest)) = item.split_once('~') {
                let (name, rest) = (name.trim().to_string(), rest.trim());
                let prior = if rest == "uniform" {
                    Prior::Uniform
                } else if let Some(n) = rest.strip_prefix("sample:") {
                    Prior::Sample(n.trim().parse().map_err(|_| bad())?)
                } else if let Some(body) = rest.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
                    let mut pairs = Vec::new();
                    for part in body.split(',') {
                        let (v, p) = part.split_once('@').ok_or_else(bad)?;
                        pairs.push((Value::parse(v).ok_or_else(bad)?, parse_rational(p).ok_or_else(bad)?));
                    }
                    Prior::Explicit(pairs)
                } else {
                    return Err(bad());
                };
                items.push((name, prior));
            } else if let Some((name, v)) = item.split_once('=') {
                items.push((name.trim().to_string(), Prior::Point(Value::parse(v).ok_or_else(bad)?)));
            } else {
                return Err(bad());
            }
        }
        Ok(InitSpec { items, seed: 0 })
    }

    pub fn with_seed(mut self, seed: u64) -> InitSpec {
        self.seed = seed;
        self
    }

    /// Every declared variable gets the uniform prior.
    pub fn all_uniform(frame: &Frame) -> InitSpec {
        let items = frame.vis.iter().chain(&frame.hid).map(|x| (x.name.clone(), Prior::Uniform)).collect();
        InitSpec { items, seed: 0 }
    }

    pub fn samples(&self) -> Result<Option<usize>, InitError> {
        let mut n = None;
        for (_, p) in &self.items {
            if let Prior::Sample(k) = p {
                if n.is_some_and(|m| m != *k) {
                    return Err(InitError::SampleCount);
                }
                n = Some(*k);
            }
        }
        Ok(n)
    }

    /// The initial hypers: one, or one per sample.
    pub fn instantiate(&self, frame: &Frame) -> Result<Vec<InitPoint>, InitError> {
        for (name, _) in &self.items {
            if frame.lookup(name).is_none() {
                return Err(InitError::UnknownVariable(name.clone()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let count = self.samples()?;
        let mut out = Vec::new();
        for k in 0..count.unwrap_or(1) {
            let mut marg_v = Vec::new();
            let mut marg_h = Vec::new();
            for (vars, target) in [(&frame.vis, &mut marg_v), (&frame.hid, &mut marg_h)] {
                for x in vars.iter() {
                    target.push(self.marginal(x, &mut rng)?);
                }
            }
            let joint = product_joint(&marg_v, &marg_h);
            let label = match count {
                Some(_) => format!("sample {k} (seed {})", self.seed),
                None => "init".to_string(),
            };
            out.push(InitPoint { label, hyper: hide_embed(&joint) });
        }
        Ok(out)
    }

    fn marginal(&self, x: &VarInfo, rng: &mut ChaCha8Rng) -> Result<FiniteDist<Value>, InitError> {
        let prior = self
            .items
            .iter()
            .rev()
            .find(|(n, _)| *n == x.name)
            .map(|(_, p)| p)
            .ok_or_else(|| InitError::MissingVariable(x.name.clone()))?;
        let member = |v: &Value| {
            coerce_to_domain(v, &x.domain).ok_or_else(|| InitError::ValueNotInDomain(x.name.clone(), v.to_string()))
        };
        Ok(match prior {
            Prior::Point(v) => FiniteDist::point(member(v)?),
            Prior::Uniform => FiniteDist::uniform(x.domain.iter().cloned()).map_err(|_| InitError::NotFull(x.name.clone()))?,
            Prior::Explicit(pairs) => {
                let d = FiniteDist::from_pairs(pairs.iter().map(|(v, p)| Ok((member(v)?, p.clone()))).collect::<Result<Vec<_>, InitError>>()?)
                    .map_err(|_| InitError::NotFull(x.name.clone()))?;
                if !d.is_full() {
                    return Err(InitError::NotFull(x.name.clone()));
                }
                d
            }
            Prior::Sample(_) => random_dist(&x.domain, rng),
        })
    }
}

/// A random full-support distribution with small integer weights.
pub fn random_dist<K: Ord + Clone, R: Rng>(support: &[K], rng: &mut R) -> FiniteDist<K> {
    let weights: Vec<i64> = support.iter().map(|_| rng.random_range(1..=16)).collect();
    let total: i64 = weights.iter().sum();
    FiniteDist::from_weights(support.iter().cloned().zip(weights.iter().map(|w| Rational::new((*w).into(), total.into()))))
}

fn product<K: Ord + Clone>(parts: &[FiniteDist<K>]) -> FiniteDist<Vec<K>> {
    let mut acc = FiniteDist::point(Vec::new());
    for d in parts {
        let mut next = FiniteDist::empty();
        for (t, p) in acc.iter() {
            for (x, q) in d.iter() {
                let mut t = t.clone();
                t.push(x.clone());
                next.add(t, &(p * q));
            }
        }
        acc = next;
    }
    acc
}

fn product_joint(vis: &[FiniteDist<Value>], hid: &[FiniteDist<Value>]) -> Joint {
    let (pv, ph) = (product(vis), product(hid));
    let mut out = Joint::empty();
    for (v, p) in pv.iter() {
        for (h, q) in ph.iter() {
            out.add((v.clone(), h.clone()), &(p * q));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    #[test]
    fn parses_and_instantiates() {
        let src = parse("vis v: {w, b, bot}\nhid h: {0..2}\nskip").unwrap();
        let frame = Frame::from_source(&src).unwrap();
        let pts = InitSpec::parse("v=bot; h~uniform").unwrap().instantiate(&frame).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].hyper.len(), 1);
        let s = pts[0].hyper.support().next().unwrap();
        assert_eq!(s.v, vec![Value::sym("bot")]);
        assert_eq!(s.delta.len(), 3);
    }

    #[test]
    fn errors() {
        let src = parse("vis v: {0, 1}\nhid h: {0..2}\nskip").unwrap();
        let frame = Frame::from_source(&src).unwrap();
        let spec = InitSpec::parse("v=0").unwrap();
        assert_eq!(spec.instantiate(&frame).unwrap_err(), InitError::MissingVariable("h".into()));
        let spec = InitSpec::parse("v=7; h~uniform").unwrap();
        assert!(matches!(spec.instantiate(&frame), Err(InitError::ValueNotInDomain(..))));
        let spec = InitSpec::parse("v=0; h~{0@1/2}").unwrap();
        assert_eq!(spec.instantiate(&frame).unwrap_err(), InitError::NotFull("h".into()));
        assert!(InitSpec::parse("v").is_err());
    }

    #[test]
    fn samples_are_seeded() {
        let src = parse("vis v: {0, 1}\nhid h: {0..2}\nskip").unwrap();
        let frame = Frame::from_source(&src).unwrap();
        let spec = InitSpec::parse("v=0; h~sample:3").unwrap().with_seed(7);
        let a = spec.instantiate(&frame).unwrap();
        let b = spec.instantiate(&frame).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.hyper, y.hyper);
        }
    }
}
