use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::ast::{BinOp, DistExpr, Expr, UnOp};
use crate::probcore::{FiniteDist, Rational, Value};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("variable '{0}' has no value here")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("distribution weights do not sum to one: {0}")]
    DistNotOneSumming(String),
    #[error("probability {0} outside [0,1]")]
    BadProbability(String),
}

pub fn to_num(v: &Value) -> Result<Rational, ExprError> {
    v.as_num().ok_or_else(|| ExprError::Type(format!("expected a number, found {v}")))
}

pub fn to_bool(v: &Value) -> Result<bool, ExprError> {
    v.as_bool().ok_or_else(|| ExprError::Type(format!("expected a boolean, found {v}")))
}

/// Equality across kinds: symbols only equal symbols, otherwise compare numerically.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Sym(x), Value::Sym(y)) => x == y,
        (Value::Sym(_), _) | (_, Value::Sym(_)) => false,
        _ => a.as_num() == b.as_num(),
    }
}

/// The member of `domain` equal to `v`, allowing 0/1 to stand for false/true.
pub fn coerce_to_domain(v: &Value, domain: &[Value]) -> Option<Value> {
    if domain.contains(v) {
        return Some(v.clone());
    }
    domain.iter().find(|d| values_equal(d, v)).cloned()
}

pub fn probability(v: &Value) -> Result<Rational, ExprError> {
    let p = to_num(v)?;
    if p.is_negative() || p > Rational::one() {
        return Err(ExprError::BadProbability(v.to_string()));
    }
    Ok(p)
}

pub fn eval_expr<F: Fn(&str) -> Option<Value>>(e: &Expr, env: &F) -> Result<Value, ExprError> {
    Ok(match e {
        Expr::Lit(v) => v.clone(),
        Expr::Var(x) => env(x).ok_or_else(|| ExprError::Unbound(x.clone()))?,
        Expr::Unary(UnOp::Neg, a) => Value::Num(-to_num(&eval_expr(a, env)?)?),
        Expr::Unary(UnOp::Not, a) => Value::Bool(!to_bool(&eval_expr(a, env)?)?),
        Expr::Cond(t, g, o) => {
            if to_bool(&eval_expr(g, env)?)? {
                eval_expr(t, env)?
            } else {
                eval_expr(o, env)?
            }
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (eval_expr(a, env)?, eval_expr(b, env)?);
            binary(*op, &a, &b)?
        }
    })
}

fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, ExprError> {
    use BinOp::*;
    Ok(match op {
        Eq => Value::Bool(values_equal(a, b)),
        Ne => Value::Bool(!values_equal(a, b)),
        And => Value::Bool(to_bool(a)? && to_bool(b)?),
        Or => Value::Bool(to_bool(a)? || to_bool(b)?),
        Xor => Value::Bool(to_bool(a)? ^ to_bool(b)?),
        _ => {
            let (x, y) = (to_num(a)?, to_num(b)?);
            match op {
                Add => Value::Num(x + y),
                Sub => Value::Num(x - y),
                Mul => Value::Num(x * y),
                Div | IntDiv | Mod if y.is_zero() => return Err(ExprError::DivisionByZero),
                Div => Value::Num(x / y),
                IntDiv => Value::Num(Rational::from_integer((x / y).floor().to_integer())),
                Mod => {
                    let q = (&x / &y).floor();
                    Value::Num(x - y * q)
                }
                Lt => Value::Bool(x < y),
                Le => Value::Bool(x <= y),
                Gt => Value::Bool(x > y),
                Ge => Value::Bool(x >= y),
                _ => unreachable!(),
            }
        }
    })
}

/// Evaluate a distribution expression; weights must be exactly one-summing.
pub fn eval_dist<F: Fn(&str) -> Option<Value>>(d: &DistExpr, env: &F) -> Result<FiniteDist<Value>, ExprError> {
    match d {
        DistExpr::Explicit(items) => {
            let mut out = FiniteDist::empty();
            let mut total = Rational::zero();
            for (e, p) in items {
                let w = to_num(&eval_expr(p, env)?)?;
                if w.is_negative() {
                    return Err(ExprError::BadProbability(w.to_string()));
                }
                total += &w;
                if !w.is_zero() {
                    out.add(eval_expr(e, env)?, &w);
                }
            }
            if !total.is_one() {
                return Err(ExprError::DistNotOneSumming(format!("total weight {total}")));
            }
            Ok(out)
        }
        DistExpr::Uniform(items) => {
            if items.is_empty() {
                return Err(ExprError::DistNotOneSumming("empty uniform".into()));
            }
            let w = Rational::new(1.into(), (items.len() as i64).into());
            let mut out = FiniteDist::empty();
            for e in items {
                out.add(eval_expr(e, env)?, &w);
            }
            Ok(out)
        }
        DistExpr::Mix(a, p, b) => {
            let p = probability(&eval_expr(p, env)?)?;
            let q = Rational::one() - &p;
            let mut out = FiniteDist::empty();
            if !p.is_zero() {
                out.add_scaled(&eval_dist(a, env)?, &p);
            }
            if !q.is_zero() {
                out.add_scaled(&eval_dist(b, env)?, &q);
            }
            Ok(out)
        }
        DistExpr::Cond(a, g, b) => {
            if to_bool(&eval_expr(g, env)?)? {
                eval_dist(a, env)
            } else {
                eval_dist(b, env)
            }
        }
    }
}

/// Floor of a rational as an integer, for callers outside this module.
pub fn floor_int(r: &Rational) -> num_bigint::BigInt {
    r.numer().div_floor(r.denom())
}
