use std::collections::BTreeSet;

use serde::Serialize;

use crate::probcore::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Visibility {
    Vis,
    Hid,
    /// Visible to the named agents only.
    Agents(BTreeSet<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VarDecl {
    pub name: String,
    pub domain: Vec<Value>,
    pub visibility: Visibility,
}

impl VarDecl {
    pub fn new(name: &str, domain: Vec<Value>, visibility: Visibility) -> VarDecl {
        VarDecl { name: name.to_string(), domain, visibility }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// Rational division.
    Div,
    /// Floor division.
    IntDiv,
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Xor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// `then if guard else otherwise`
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn lit(v: Value) -> Expr {
        Expr::Lit(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn cond(then: Expr, guard: Expr, otherwise: Expr) -> Expr {
        Expr::Cond(Box::new(then), Box::new(guard), Box::new(otherwise))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unary(_, a) => a.vars(out),
            Expr::Binary(_, a, b) => {
                a.vars(out);
                b.vars(out);
            }
            Expr::Cond(a, g, b) => {
                a.vars(out);
                g.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum DistExpr {
    /// `{e1 @ p1, ..., en @ pn}`
    Explicit(Vec<(Expr, Expr)>),
    /// `uniform{e1, ..., en}`
    Uniform(Vec<Expr>),
    /// `d1 [p] d2`
    Mix(Box<DistExpr>, Expr, Box<DistExpr>),
    /// `(d1 if g else d2)`
    Cond(Box<DistExpr>, Expr, Box<DistExpr>),
}

impl DistExpr {
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            DistExpr::Explicit(items) => {
                for (e, p) in items {
                    e.vars(out);
                    p.vars(out);
                }
            }
            DistExpr::Uniform(items) => items.iter().for_each(|e| e.vars(out)),
            DistExpr::Mix(a, p, b) | DistExpr::Cond(a, p, b) => {
                a.vars(out);
                p.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Init {
    Assign(Expr),
    Choose(DistExpr),
    /// No initialiser given; uniform over the domain.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalDecl {
    pub decl: VarDecl,
    pub init: Init,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Program {
    Skip,
    Assign(String, Expr),
    Choose(String, DistExpr),
    /// `(a xor b) := e`
    XorAssign(String, String, Expr),
    Seq(Box<Program>, Box<Program>),
    /// `left [q] right`: left with probability q.
    Choice(Box<Program>, Expr, Box<Program>),
    Cond(Expr, Box<Program>, Box<Program>),
    Atomic(Box<Program>),
    Reveal(Expr),
    Local(Vec<LocalDecl>, Box<Program>),
}

impl Program {
    pub fn seq(a: Program, b: Program) -> Program {
        Program::Seq(Box::new(a), Box::new(b))
    }

    /// Right-nested sequence; `skip` when empty.
    pub fn seq_all<I: IntoIterator<Item = Program>>(items: I) -> Program {
        let mut items: Vec<Program> = items.into_iter().collect();
        let mut acc = match items.pop() {
            Some(p) => p,
            None => return Program::Skip,
        };
        while let Some(p) = items.pop() {
            acc = Program::seq(p, acc);
        }
        acc
    }

    pub fn choice(a: Program, q: Expr, b: Program) -> Program {
        Program::Choice(Box::new(a), q, Box::new(b))
    }

    pub fn cond(g: Expr, a: Program, b: Program) -> Program {
        Program::Cond(g, Box::new(a), Box::new(b))
    }

    pub fn atomic(p: Program) -> Program {
        Program::Atomic(Box::new(p))
    }

    pub fn node_count(&self) -> usize {
        match self {
            Program::Skip
            | Program::Assign(..)
            | Program::Choose(..)
            | Program::XorAssign(..)
            | Program::Reveal(_) => 1,
            Program::Seq(a, b) | Program::Choice(a, _, b) | Program::Cond(_, a, b) => {
                1 + a.node_count() + b.node_count()
            }
            Program::Atomic(p) | Program::Local(_, p) => 1 + p.node_count(),
        }
    }

    pub fn contains_reveal(&self) -> bool {
        match self {
            Program::Reveal(_) => true,
            Program::Seq(a, b) | Program::Choice(a, _, b) | Program::Cond(_, a, b) => {
                a.contains_reveal() || b.contains_reveal()
            }
            Program::Atomic(p) | Program::Local(_, p) => p.contains_reveal(),
            _ => false,
        }
    }

    pub fn contains_local(&self) -> bool {
        match self {
            Program::Local(..) => true,
            Program::Seq(a, b) | Program::Choice(a, _, b) | Program::Cond(_, a, b) => {
                a.contains_local() || b.contains_local()
            }
            Program::Atomic(p) => p.contains_local(),
            _ => false,
        }
    }
}

/// A source file: global declarations and a body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Source {
    pub decls: Vec<VarDecl>,
    pub body: Program,
}

impl Source {
    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn with_body(&self, body: Program) -> Source {
        Source { decls: self.decls.clone(), body }
    }

    /// Agents named in any annotation, locals included.
    pub fn agents(&self) -> BTreeSet<String> {
        fn walk(p: &Program, out: &mut BTreeSet<String>) {
            match p {
                Program::Seq(a, b) | Program::Choice(a, _, b) | Program::Cond(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Program::Atomic(q) => walk(q, out),
                Program::Local(ds, q) => {
                    for d in ds {
                        if let Visibility::Agents(s) = &d.decl.visibility {
                            out.extend(s.iter().cloned());
                        }
                    }
                    walk(q, out);
                }
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        for d in &self.decls {
            if let Visibility::Agents(s) = &d.visibility {
                out.extend(s.iter().cloned());
            }
        }
        walk(&self.body, &mut out);
        out
    }
}
