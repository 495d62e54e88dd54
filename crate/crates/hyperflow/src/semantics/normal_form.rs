//! Matrix normal forms over the global V×H index, and the atomicity precondition.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use super::{classical_eval, env, hide_embed, HyperDist, Joint, Result, SemError, SplitState};
use super::Frame;
use crate::lang::expr::{eval_expr, probability, to_bool};
use crate::lang::Program;
use crate::matrix::RatMatrix;
use crate::probcore::{Rational, Value};

/// Matrices M_i such that stacking ⟦v,δ⟧ × M_i reproduces the program.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub v_space: Vec<Vec<Value>>,
    pub h_space: Vec<Vec<Value>>,
    pub matrices: Vec<RatMatrix>,
}

impl NormalForm {
    pub fn index(&self, v: &[Value], h: &[Value]) -> Option<usize> {
        let iv = self.v_space.iter().position(|x| x == v)?;
        let ih = self.h_space.iter().position(|x| x == h)?;
        Some(iv * self.h_space.len() + ih)
    }

    pub fn size(&self) -> usize {
        self.v_space.len() * self.h_space.len()
    }
}

struct Space {
    v: Vec<Vec<Value>>,
    h: Vec<Vec<Value>>,
}

impl Space {
    fn new(frame: &Frame) -> Space {
        Space { v: frame.v_space(), h: frame.h_space() }
    }

    fn n(&self) -> usize {
        self.v.len() * self.h.len()
    }

    fn states(&self) -> impl Iterator<Item = (usize, &Vec<Value>, &Vec<Value>)> {
        let nh = self.h.len();
        self.v.iter().enumerate().flat_map(move |(iv, v)| self.h.iter().enumerate().map(move |(ih, h)| (iv * nh + ih, v, h)))
    }

    fn index(&self, v: &[Value], h: &[Value]) -> Result<usize> {
        let iv = self.v.iter().position(|x| x == v);
        let ih = self.h.iter().position(|x| x == h);
        match (iv, ih) {
            (Some(iv), Some(ih)) => Ok(iv * self.h.len() + ih),
            _ => Err(SemError::InvalidState("state outside the declared domains".into())),
        }
    }

    fn v_of(&self, idx: usize) -> usize {
        idx / self.h.len()
    }
}

fn classical_in(p: &Program, frame: &Frame, sp: &Space) -> Result<RatMatrix> {
    let mut m = RatMatrix::zeros(sp.n(), sp.n());
    for (i, v, h) in sp.states() {
        for ((v1, h1), w) in classical_eval(p, frame, v, h)?.iter() {
            m[(i, sp.index(v1, h1)?)] += w;
        }
    }
    Ok(m)
}

/// The row-stochastic classical matrix of `p` over the frame's V×H pairs.
pub fn classical_matrix(p: &Program, frame: &Frame) -> Result<RatMatrix> {
    classical_in(p, frame, &Space::new(frame))
}

fn split_by_final_v(c: &RatMatrix, sp: &Space) -> Vec<RatMatrix> {
    let mut out = Vec::new();
    for target in 0..sp.v.len() {
        let mut m = c.clone();
        for i in 0..sp.n() {
            for j in 0..sp.n() {
                if sp.v_of(j) != target {
                    m[(i, j)] = Rational::zero();
                }
            }
        }
        if !m.is_zero() {
            out.push(m);
        }
    }
    out
}

fn diag_of<F: Fn(&[Value], &[Value]) -> Result<Rational>>(sp: &Space, f: F) -> Result<RatMatrix> {
    let mut d = vec![Rational::zero(); sp.n()];
    for (i, v, h) in sp.states() {
        d[i] = f(v, h)?;
    }
    Ok(RatMatrix::diag(&d))
}

fn nf(p: &Program, frame: &Frame, sp: &Space) -> Result<Vec<RatMatrix>> {
    Ok(match p {
        Program::Skip => split_by_final_v(&RatMatrix::identity(sp.n()), sp),
        Program::Assign(..) | Program::Choose(..) | Program::XorAssign(..) => split_by_final_v(&classical_in(p, frame, sp)?, sp),
        Program::Atomic(q) => split_by_final_v(&classical_in(q, frame, sp)?, sp),
        Program::Reveal(e) => {
            let mut values = BTreeSet::new();
            for (_, v, h) in sp.states() {
                values.insert(eval_expr(e, &env(frame, v, h))?);
            }
            let mut out = Vec::new();
            for r in values {
                let m = diag_of(sp, |v, h| {
                    Ok(if eval_expr(e, &env(frame, v, h))? == r { Rational::one() } else { Rational::zero() })
                })?;
                out.push(m);
            }
            out
        }
        Program::Seq(a, b) => {
            let (ma, mb) = (nf(a, frame, sp)?, nf(b, frame, sp)?);
            let mut out = Vec::new();
            for x in &ma {
                for y in &mb {
                    let m = x.mul(y);
                    if !m.is_zero() {
                        out.push(m);
                    }
                }
            }
            out
        }
        Program::Choice(a, q, b) => {
            let dq = diag_of(sp, |v, h| Ok(probability(&eval_expr(q, &env(frame, v, h))?)?))?;
            weighted(dq, a, b, frame, sp)?
        }
        Program::Cond(g, a, b) => {
            let dq = diag_of(sp, |v, h| {
                Ok(if to_bool(&eval_expr(g, &env(frame, v, h))?)? { Rational::one() } else { Rational::zero() })
            })?;
            weighted(dq, a, b, frame, sp)?
        }
        Program::Local(..) => return Err(SemError::UnsupportedConstruct("local block in normal form".into())),
    })
}

fn weighted(dq: RatMatrix, a: &Program, b: &Program, frame: &Frame, sp: &Space) -> Result<Vec<RatMatrix>> {
    let n = sp.n();
    let mut dr = RatMatrix::identity(n);
    for i in 0..n {
        dr[(i, i)] -= &dq[(i, i)];
    }
    let mut out = Vec::new();
    for (d, prog) in [(dq, a), (dr, b)] {
        if d.is_zero() {
            continue;
        }
        for m in nf(prog, frame, sp)? {
            let m = d.mul(&m);
            if !m.is_zero() {
                out.push(m);
            }
        }
    }
    Ok(out)
}

pub fn normal_form(p: &Program, frame: &Frame) -> Result<NormalForm> {
    let sp = Space::new(frame);
    let matrices = nf(p, frame, &sp)?;
    Ok(NormalForm { v_space: sp.v, h_space: sp.h, matrices })
}

/// Evaluate through the normal form: stack ⟦v,δ⟧ × M_i and regroup.
pub fn eval_via_normal_form(p: &Program, frame: &Frame, s: &SplitState) -> Result<HyperDist> {
    let form = normal_form(p, frame)?;
    let sp = Space { v: form.v_space.clone(), h: form.h_space.clone() };
    let mut x = vec![Rational::zero(); sp.n()];
    for (h, w) in s.delta.iter() {
        x[sp.index(&s.v, h)?] = w.clone();
    }
    let mut out = HyperDist::empty();
    for m in &form.matrices {
        let y = m.left_mul(&x);
        let mut joint = Joint::empty();
        for (i, v, h) in sp.states() {
            if !y[i].is_zero() {
                joint.add((v.clone(), h.clone()), &y[i]);
            }
        }
        for (st, w) in hide_embed(&joint).iter() {
            out.add(st.clone(), w);
        }
    }
    Ok(out)
}

/// Two intermediate visible values that the same (v, v') pair cannot tell apart.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomicityWitness {
    pub v: Vec<Value>,
    pub v_final: Vec<Value>,
    pub mid: (Vec<Value>, Vec<Value>),
}

/// `None` when the initial and final visibles always determine the intermediate one,
/// so that atomic{P1; P2} = atomic{P1}; atomic{P2}.
pub fn check_atomic_distribution(p1: &Program, p2: &Program, frame: &Frame) -> Result<Option<AtomicityWitness>> {
    let sp = Space::new(frame);
    let (c1, c2) = (classical_in(p1, frame, &sp)?, classical_in(p2, frame, &sp)?);
    let n = sp.n();
    // reach[(v, v')] = intermediate v̂ values through which v can reach v'
    let mut reach: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for i in 0..n {
        for k in 0..n {
            if c1[(i, k)].is_zero() {
                continue;
            }
            for j in 0..n {
                if !c2[(k, j)].is_zero() {
                    reach.entry((sp.v_of(i), sp.v_of(j))).or_default().insert(sp.v_of(k));
                }
            }
        }
    }
    for ((a, b), mids) in reach {
        if mids.len() > 1 {
            let mut it = mids.into_iter();
            let (m1, m2) = (it.next().unwrap(), it.next().unwrap());
            return Ok(Some(AtomicityWitness {
                v: sp.v[a].clone(),
                v_final: sp.v[b].clone(),
                mid: (sp.v[m1].clone(), sp.v[m2].clone()),
            }));
        }
    }
    Ok(None)
}
