use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::ast::*;
use super::expr::coerce_to_domain;
use crate::probcore::{Rational, Value};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, thiserror::Error)]
pub enum Diagnostic {
    #[error("undeclared variable '{0}'")]
    UndeclaredVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("distribution weights do not sum to one: {0}")]
    WeightsNotOneSumming(String),
    #[error("probability outside [0,1]: {0}")]
    ProbabilityOutOfRange(String),
    #[error("duplicate declaration of '{0}'")]
    DuplicateDeclaration(String),
    #[error("empty domain for '{0}'")]
    EmptyDomain(String),
    #[error("duplicate value {1} in domain of '{0}'")]
    DuplicateDomainValue(String, String),
    #[error("local block inside atomic brackets")]
    LocalInAtomic,
    #[error("reveal inside atomic brackets")]
    RevealInAtomic,
    #[error("value {1} is not in the domain of '{0}'")]
    ValueNotInDomain(String, String),
    #[error("division by the constant zero")]
    DivisionByZero,
    #[error("local '{0}' has no initialiser; defaulting to uniform")]
    UninitializedLocal(String),
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        !matches!(self, Diagnostic::UninitializedLocal(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ty {
    Bool,
    Num,
    Sym,
    Any,
}

fn value_ty(v: &Value) -> Ty {
    match v {
        Value::Bool(_) => Ty::Bool,
        Value::Num(_) => Ty::Num,
        Value::Sym(_) => Ty::Sym,
    }
}

fn domain_ty(d: &[Value]) -> Ty {
    let mut tys = d.iter().map(value_ty);
    match tys.next() {
        None => Ty::Any,
        Some(t) => {
            if tys.all(|u| u == t) {
                t
            } else {
                Ty::Any
            }
        }
    }
}

fn compatible(a: Ty, b: Ty) -> bool {
    a == b || a == Ty::Any || b == Ty::Any || (a != Ty::Sym && b != Ty::Sym)
}

struct Checker {
    scopes: Vec<Vec<VarDecl>>,
    out: Vec<Diagnostic>,
}

/// All diagnostics for a source; empty iff the program is well formed.
pub fn validate(src: &Source) -> Vec<Diagnostic> {
    let mut c = Checker { scopes: vec![Vec::new()], out: Vec::new() };
    for d in &src.decls {
        c.declare(d);
    }
    c.program(&src.body, false);
    c.out
}

impl Checker {
    fn lookup(&self, name: &str) -> Option<&VarDecl> {
        self.scopes.iter().rev().flat_map(|s| s.iter()).find(|d| d.name == name)
    }

    fn declare(&mut self, d: &VarDecl) {
        if self.lookup(&d.name).is_some() {
            self.out.push(Diagnostic::DuplicateDeclaration(d.name.clone()));
        }
        if d.domain.is_empty() {
            self.out.push(Diagnostic::EmptyDomain(d.name.clone()));
        }
        let mut seen = BTreeSet::new();
        for v in &d.domain {
            if !seen.insert(v.clone()) {
                self.out.push(Diagnostic::DuplicateDomainValue(d.name.clone(), v.to_string()));
            }
        }
        self.scopes.last_mut().unwrap().push(d.clone());
    }

    fn expr(&mut self, e: &Expr) -> Ty {
        match e {
            Expr::Lit(v) => value_ty(v),
            Expr::Var(x) => match self.lookup(x) {
                Some(d) => domain_ty(&d.domain),
                None => {
                    self.out.push(Diagnostic::UndeclaredVariable(x.clone()));
                    Ty::Any
                }
            },
            Expr::Unary(op, a) => {
                let t = self.expr(a);
                self.not_sym(t, e);
                if *op == UnOp::Neg {
                    Ty::Num
                } else {
                    Ty::Bool
                }
            }
            Expr::Cond(t, g, o) => {
                let gt = self.expr(g);
                self.not_sym(gt, g);
                let (a, b) = (self.expr(t), self.expr(o));
                if a == b {
                    a
                } else {
                    Ty::Any
                }
            }
            Expr::Binary(op, a, b) => {
                let (ta, tb) = (self.expr(a), self.expr(b));
                use BinOp::*;
                match op {
                    Eq | Ne => Ty::Bool,
                    _ => {
                        self.not_sym(ta, a);
                        self.not_sym(tb, b);
                        if matches!(op, Div | IntDiv | Mod) && is_zero_lit(b) {
                            self.out.push(Diagnostic::DivisionByZero);
                        }
                        match op {
                            Add | Sub | Mul | Div | IntDiv | Mod => Ty::Num,
                            _ => Ty::Bool,
                        }
                    }
                }
            }
        }
    }

    fn not_sym(&mut self, t: Ty, e: &Expr) {
        if t == Ty::Sym {
            self.out.push(Diagnostic::TypeMismatch(format!(
                "symbolic value in arithmetic or logic: {}",
                super::printer::print_expr(e)
            )));
        }
    }

    fn target(&mut self, x: &str) -> Option<VarDecl> {
        match self.lookup(x) {
            Some(d) => Some(d.clone()),
            None => {
                self.out.push(Diagnostic::UndeclaredVariable(x.to_string()));
                None
            }
        }
    }

    fn assigned(&mut self, d: &Option<VarDecl>, e: &Expr) {
        let t = self.expr(e);
        let Some(d) = d else { return };
        if !compatible(domain_ty(&d.domain), t) {
            self.out.push(Diagnostic::TypeMismatch(format!(
                "cannot assign {} to '{}'",
                super::printer::print_expr(e),
                d.name
            )));
        } else if let Expr::Lit(v) = e {
            if coerce_to_domain(v, &d.domain).is_none() {
                self.out.push(Diagnostic::ValueNotInDomain(d.name.clone(), v.to_string()));
            }
        }
    }

    fn prob(&mut self, p: &Expr) {
        let t = self.expr(p);
        self.not_sym(t, p);
        if let Expr::Lit(Value::Num(r)) = p {
            if r.is_negative() || *r > Rational::one() {
                self.out.push(Diagnostic::ProbabilityOutOfRange(r.to_string()));
            }
        }
    }

    fn dist(&mut self, d: &Option<VarDecl>, dist: &DistExpr) {
        match dist {
            DistExpr::Explicit(items) => {
                let mut total = Some(Rational::zero());
                for (e, p) in items {
                    self.assigned(d, e);
                    let t = self.expr(p);
                    self.not_sym(t, p);
                    match (p, &mut total) {
                        (Expr::Lit(v), Some(acc)) => match v.as_num() {
                            Some(r) if !r.is_negative() => *acc += r,
                            _ => {
                                self.out.push(Diagnostic::WeightsNotOneSumming(format!("bad weight {v}")));
                                total = None;
                            }
                        },
                        _ => total = None,
                    }
                }
                if let Some(t) = total {
                    if !t.is_one() {
                        self.out.push(Diagnostic::WeightsNotOneSumming(format!("weights sum to {t}")));
                    }
                }
            }
            DistExpr::Uniform(items) => {
                if items.is_empty() {
                    self.out.push(Diagnostic::WeightsNotOneSumming("empty uniform".into()));
                }
                for e in items {
                    self.assigned(d, e);
                }
            }
            DistExpr::Mix(a, p, b) => {
                self.prob(p);
                self.dist(d, a);
                self.dist(d, b);
            }
            DistExpr::Cond(a, g, b) => {
                let t = self.expr(g);
                self.not_sym(t, g);
                self.dist(d, a);
                self.dist(d, b);
            }
        }
    }

    fn program(&mut self, p: &Program, in_atomic: bool) {
        match p {
            Program::Skip => {}
            Program::Assign(x, e) => {
                let d = self.target(x);
                self.assigned(&d, e);
            }
            Program::Choose(x, dist) => {
                let d = self.target(x);
                self.dist(&d, dist);
            }
            Program::XorAssign(a, b, e) => {
                if a == b {
                    self.out.push(Diagnostic::TypeMismatch(format!("({a} xor {b}) names one variable twice")));
                }
                for x in [a, b] {
                    if let Some(d) = self.target(x) {
                        let ok = [true, false].iter().all(|b| coerce_to_domain(&Value::Bool(*b), &d.domain).is_some());
                        if !ok {
                            self.out.push(Diagnostic::TypeMismatch(format!("'{x}' must range over booleans")));
                        }
                    }
                }
                let t = self.expr(e);
                self.not_sym(t, e);
            }
            Program::Seq(a, b) => {
                self.program(a, in_atomic);
                self.program(b, in_atomic);
            }
            Program::Choice(a, q, b) => {
                self.prob(q);
                self.program(a, in_atomic);
                self.program(b, in_atomic);
            }
            Program::Cond(g, a, b) => {
                let t = self.expr(g);
                self.not_sym(t, g);
                self.program(a, in_atomic);
                self.program(b, in_atomic);
            }
            Program::Atomic(q) => self.program(q, true),
            Program::Reveal(e) => {
                if in_atomic {
                    self.out.push(Diagnostic::RevealInAtomic);
                }
                self.expr(e);
            }
            Program::Local(decls, body) => {
                if in_atomic {
                    self.out.push(Diagnostic::LocalInAtomic);
                }
                self.scopes.push(Vec::new());
                for ld in decls {
                    let target = Some(ld.decl.clone());
                    match &ld.init {
                        Init::Assign(e) => self.assigned(&target, e),
                        Init::Choose(d) => self.dist(&target, d),
                        Init::Uniform => self.out.push(Diagnostic::UninitializedLocal(ld.decl.name.clone())),
                    }
                    self.declare(&ld.decl);
                }
                self.program(body, in_atomic);
                self.scopes.pop();
            }
        }
    }
}

fn is_zero_lit(e: &Expr) -> bool {
    matches!(e, Expr::Lit(v) if v.as_num().is_some_and(|r| r.is_zero()))
}
