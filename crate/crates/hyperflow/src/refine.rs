//! Partitions of fractions and the exact decision of secure refinement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed};
use serde_json::json;

use crate::lp::{solve_feasibility, Certificate, Feasibility, LinearProgram, LpError, Relation};
use crate::measures::{ft, state_shape};
use crate::probcore::{fmt_rational, FiniteDist, Rational, Value};
use crate::semantics::{tuple_str, HyperDist};

pub use crate::matrix::RatMatrix;

/// A sub-distribution over hidden tuples.
pub type Fraction = FiniteDist<Vec<Value>>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RefineError {
    #[error("hyper-distributions range over different state shapes")]
    DomainMismatch,
    #[error("not a refinement matrix: {0}")]
    NotRefinementMatrix(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("witness failed verification at v = {0}")]
    BadWitness(String),
}

/// A multiset of fractions kept in canonical sorted order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Partition {
    pub fractions: Vec<Fraction>,
}

impl Partition {
    pub fn new(mut fractions: Vec<Fraction>) -> Partition {
        fractions.sort();
        Partition { fractions }
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }

    pub fn weight(&self) -> Rational {
        self.fractions.iter().map(|f| f.weight()).sum()
    }

    /// Pointwise sum of all fractions.
    pub fn total(&self) -> Fraction {
        let mut out = Fraction::empty();
        for f in &self.fractions {
            out.add_scaled(f, &Rational::one());
        }
        out
    }

    pub fn is_reduced(&self) -> bool {
        reduce_partition(self) == *self
    }

    /// Rows are fractions, columns follow `h_space`.
    pub fn matrix(&self, h_space: &[Vec<Value>]) -> RatMatrix {
        RatMatrix::from_rows(self.fractions.iter().map(|f| h_space.iter().map(|h| f.get(h)).collect()).collect())
    }

    pub fn from_matrix(m: &RatMatrix, h_space: &[Vec<Value>]) -> Partition {
        Partition::new(
            (0..m.rows())
                .map(|i| FiniteDist::from_weights(h_space.iter().cloned().zip(m.row(i).iter().cloned())))
                .collect(),
        )
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .fractions
            .iter()
            .map(|fr| {
                let xs: Vec<String> = fr.iter().map(|(h, p)| format!("{}@{}", tuple_str(h), p)).collect();
                format!("{{{}}}", xs.join(","))
            })
            .collect();
        write!(f, "<{}>", parts.join(", "))
    }
}

/// One fraction p·δ per split-state (v, δ) of weight p.
pub fn extract_partition(d: &HyperDist, v: &[Value]) -> Partition {
    Partition::new(d.iter().filter(|(s, _)| s.v == v).map(|(s, w)| s.delta.scale(w)).collect())
}

/// Sum similar fractions and drop empty ones.
pub fn reduce_partition(p: &Partition) -> Partition {
    let mut groups: BTreeMap<Fraction, Fraction> = BTreeMap::new();
    for f in &p.fractions {
        let Ok(norm) = f.normalize() else { continue };
        groups.entry(norm).or_insert_with(Fraction::empty).add_scaled(f, &Rational::one());
    }
    Partition::new(groups.into_values().filter(|f| !f.is_empty()).collect())
}

pub fn similar(a: &Partition, b: &Partition) -> bool {
    reduce_partition(a) == reduce_partition(b)
}

/// Σ over fractions of their largest entry.
pub fn bv_partition(p: &Partition) -> Rational {
    p.fractions.iter().map(|f| f.max_prob()).sum()
}

/// Visible tuples appearing in either hyper, in canonical order.
pub fn visible_values(a: &HyperDist, b: &HyperDist) -> Vec<Vec<Value>> {
    let set: BTreeSet<Vec<Value>> = a.support().chain(b.support()).map(|s| s.v.clone()).collect();
    set.into_iter().collect()
}

/// Hidden tuples in the support of either hyper, in canonical order.
pub fn hidden_values(a: &HyperDist, b: &HyperDist) -> Vec<Vec<Value>> {
    let set: BTreeSet<Vec<Value>> = a.support().chain(b.support()).flat_map(|s| s.delta.support().cloned()).collect();
    set.into_iter().collect()
}

/// R with R × mat(Π_S) = mat(Π_I) for one visible value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VWitness {
    pub v: Vec<Value>,
    pub spec: Partition,
    pub imp: Partition,
    pub r: RatMatrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinementWitness {
    pub h_space: Vec<Vec<Value>>,
    pub per_v: Vec<VWitness>,
}

impl VWitness {
    pub fn verify(&self, h_space: &[Vec<Value>]) -> bool {
        is_refinement_matrix(&self.r)
            && self.r.rows() == self.imp.len()
            && self.r.cols() == self.spec.len()
            && self.r.mul(&self.spec.matrix(h_space)) == self.imp.matrix(h_space)
    }
}

impl RefinementWitness {
    pub fn verify(&self) -> bool {
        self.per_v.iter().all(|w| w.verify(&self.h_space))
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!(self.per_v.iter().map(witness_json).collect::<Vec<_>>())
    }
}

/// Why refinement failed at a visible value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub v: Vec<Value>,
    pub spec: Partition,
    pub imp: Partition,
    pub h_space: Vec<Vec<Value>>,
    /// Farkas multipliers over the rows of `refinement_lp(spec, imp, h_space)`.
    pub certificate: Certificate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refinement {
    Refined(RefinementWitness),
    NotRefined(Box<Failure>),
    /// The overall output distributions differ; `v` is the first visible value where they do.
    FunctionalMismatch { v: Vec<Value> },
}

impl Refinement {
    pub fn is_refined(&self) -> bool {
        matches!(self, Refinement::Refined(_))
    }
}

pub fn is_refinement_matrix(r: &RatMatrix) -> bool {
    r.entries().all(|x| !x.is_negative()) && r.col_sums().iter().all(One::is_one)
}

/// Variables r_ij ≥ 0 (row-major, i over Π_I, j over Π_S): one equality per (i, h),
/// then one column-sum equality per j.
pub fn refinement_lp(spec: &Partition, imp: &Partition, h_space: &[Vec<Value>]) -> LinearProgram {
    let (ks, ki) = (spec.len(), imp.len());
    let (ms, mi) = (spec.matrix(h_space), imp.matrix(h_space));
    let mut lp = LinearProgram::new(ki * ks);
    for i in 0..ki {
        for (h, _) in h_space.iter().enumerate() {
            let terms: Vec<(usize, Rational)> = (0..ks).map(|j| (i * ks + j, ms[(j, h)].clone())).collect();
            lp.add_sparse(&terms, Relation::Eq, mi[(i, h)].clone());
        }
    }
    for j in 0..ks {
        let terms: Vec<(usize, Rational)> = (0..ki).map(|i| (i * ks + j, Rational::one())).collect();
        lp.add_sparse(&terms, Relation::Eq, Rational::one());
    }
    lp
}

/// Decide Δ_S ⊑ Δ_I, returning a verified witness or the first failing visible value.
pub fn check_refinement(s: &HyperDist, i: &HyperDist) -> Result<Refinement, RefineError> {
    match (state_shape(s), state_shape(i)) {
        (Some(a), Some(b)) if a == b => {}
        _ => return Err(RefineError::DomainMismatch),
    }
    let h_space = hidden_values(s, i);
    let vs = visible_values(s, i);
    let (fs, fi) = (ft(s), ft(i));
    if fs != fi {
        let v = vs
            .iter()
            .find(|v| fs.restrict(|(x, _)| x == *v) != fi.restrict(|(x, _)| x == *v))
            .cloned()
            .unwrap_or_default();
        return Ok(Refinement::FunctionalMismatch { v });
    }
    let mut per_v = Vec::new();
    for v in vs {
        let spec = reduce_partition(&extract_partition(s, &v));
        let imp = reduce_partition(&extract_partition(i, &v));
        let lp = refinement_lp(&spec, &imp, &h_space);
        match solve_feasibility(&lp)? {
            Feasibility::Point(x) => {
                let ks = spec.len();
                let rows = (0..imp.len()).map(|r| x[r * ks..(r + 1) * ks].to_vec()).collect();
                let w = VWitness { v: v.clone(), spec, imp, r: RatMatrix::from_rows(rows) };
                if !w.verify(&h_space) {
                    return Err(RefineError::BadWitness(tuple_str(&v)));
                }
                per_v.push(w);
            }
            Feasibility::Infeasible(certificate) => {
                return Ok(Refinement::NotRefined(Box::new(Failure { v, spec, imp, h_space, certificate })));
            }
        }
    }
    Ok(Refinement::Refined(RefinementWitness { h_space, per_v }))
}

/// Greedy split of a column-stochastic matrix into a convex mix of simple 0/1 matrices.
pub fn decompose_refinement(r: &RatMatrix) -> Result<Vec<(Rational, RatMatrix)>, RefineError> {
    if r.rows() == 0 || r.cols() == 0 {
        return Err(RefineError::NotRefinementMatrix("empty matrix".into()));
    }
    if !is_refinement_matrix(r) {
        return Err(RefineError::NotRefinementMatrix("entries must be non-negative with one-summing columns".into()));
    }
    let mut rest = r.clone();
    let mut out = Vec::new();
    while !rest.is_zero() {
        let mut m = RatMatrix::zeros(r.rows(), r.cols());
        let mut c: Option<Rational> = None;
        for j in 0..r.cols() {
            let mut pick: Option<(usize, Rational)> = None;
            for i in 0..r.rows() {
                let x = &rest[(i, j)];
                if x.is_positive() && pick.as_ref().is_none_or(|(_, y)| x < y) {
                    pick = Some((i, x.clone()));
                }
            }
            let (i, x) = pick.ok_or_else(|| RefineError::NotRefinementMatrix("column exhausted early".into()))?;
            m[(i, j)] = Rational::one();
            if c.as_ref().is_none_or(|y| x < *y) {
                c = Some(x);
            }
        }
        let c = c.expect("at least one column");
        rest = rest.add(&m.scale(&-c.clone()));
        out.push((c, m));
    }
    Ok(out)
}

pub fn witness_json(w: &VWitness) -> serde_json::Value {
    let rows: Vec<Vec<String>> = w.r.to_rows().iter().map(|r| r.iter().map(fmt_rational).collect()).collect();
    json!({"v": tuple_str(&w.v), "R": rows})
}
