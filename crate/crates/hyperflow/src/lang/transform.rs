use std::collections::BTreeSet;

use super::ast::*;
use super::expr::eval_expr;
use super::LangError;
use crate::probcore::Value;

const ENUMERATION_LIMIT: usize = 1 << 16;

fn map_visibility(src: &Source, f: &dyn Fn(&Visibility) -> Visibility) -> Source {
    fn walk(p: &Program, f: &dyn Fn(&Visibility) -> Visibility) -> Program {
        match p {
            Program::Seq(a, b) => Program::seq(walk(a, f), walk(b, f)),
            Program::Choice(a, q, b) => Program::choice(walk(a, f), q.clone(), walk(b, f)),
            Program::Cond(g, a, b) => Program::cond(g.clone(), walk(a, f), walk(b, f)),
            Program::Atomic(q) => Program::atomic(walk(q, f)),
            Program::Local(ds, q) => {
                let ds = ds
                    .iter()
                    .map(|ld| {
                        let mut ld = ld.clone();
                        ld.decl.visibility = f(&ld.decl.visibility);
                        ld
                    })
                    .collect();
                Program::Local(ds, Box::new(walk(q, f)))
            }
            p => p.clone(),
        }
    }
    let decls = src
        .decls
        .iter()
        .map(|d| VarDecl { visibility: f(&d.visibility), ..d.clone() })
        .collect();
    Source { decls, body: walk(&src.body, f) }
}

/// The program as seen by `agent`: its variables become visible, every other agent's hidden.
pub fn project_view(src: &Source, agent: &str) -> Result<Source, LangError> {
    if !src.agents().contains(agent) {
        return Err(LangError::UnknownAgent(agent.to_string()));
    }
    Ok(map_visibility(src, &|v| match v {
        Visibility::Agents(s) if s.contains(agent) => Visibility::Vis,
        Visibility::Agents(_) => Visibility::Hid,
        v => v.clone(),
    }))
}

/// The view of an observer outside every agent: all agent variables hidden.
pub fn project_external(src: &Source) -> Source {
    map_visibility(src, &|v| match v {
        Visibility::Agents(_) => Visibility::Hid,
        v => v.clone(),
    })
}

fn all_names(src: &Source) -> BTreeSet<String> {
    fn walk(p: &Program, out: &mut BTreeSet<String>) {
        match p {
            Program::Seq(a, b) | Program::Choice(a, _, b) | Program::Cond(_, a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Program::Atomic(q) => walk(q, out),
            Program::Local(ds, q) => {
                out.extend(ds.iter().map(|d| d.decl.name.clone()));
                walk(q, out);
            }
            _ => {}
        }
    }
    let mut out: BTreeSet<String> = src.decls.iter().map(|d| d.name.clone()).collect();
    walk(&src.body, &mut out);
    out
}

/// Every value `e` can take over the declared domains of its variables.
pub fn expr_range(e: &Expr, scope: &[VarDecl]) -> Vec<Value> {
    let mut vars = BTreeSet::new();
    e.vars(&mut vars);
    let doms: Vec<(String, Vec<Value>)> = vars
        .iter()
        .filter_map(|x| scope.iter().rev().find(|d| &d.name == x).map(|d| (x.clone(), d.domain.clone())))
        .collect();
    let total = doms.iter().try_fold(1usize, |acc, (_, d)| acc.checked_mul(d.len()));
    let mut out = BTreeSet::new();
    if total.is_some_and(|t| t <= ENUMERATION_LIMIT) {
        let mut idx = vec![0usize; doms.len()];
        'outer: loop {
            let env = |x: &str| doms.iter().zip(&idx).find(|((n, _), _)| n == x).map(|((_, d), i)| d[*i].clone());
            if let Ok(v) = eval_expr(e, &env) {
                out.insert(v);
            }
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < doms[k].1.len() {
                    continue 'outer;
                }
                idx[k] = 0;
            }
            break;
        }
    }
    if out.is_empty() || out.iter().all(|v| matches!(v, Value::Bool(_))) {
        return vec![Value::Bool(false), Value::Bool(true)];
    }
    out.into_iter().collect()
}

struct Desugarer {
    taken: BTreeSet<String>,
    next: usize,
    scope: Vec<VarDecl>,
}

impl Desugarer {
    fn fresh(&mut self) -> String {
        loop {
            let name = format!("reveal_{}", self.next);
            self.next += 1;
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    fn walk(&mut self, p: &Program) -> Program {
        match p {
            Program::Reveal(e) => {
                let name = self.fresh();
                let domain = expr_range(e, &self.scope);
                let init = Init::Assign(Expr::Lit(domain[0].clone()));
                let decl = VarDecl { name: name.clone(), domain, visibility: Visibility::Vis };
                Program::Local(vec![LocalDecl { decl, init }], Box::new(Program::Assign(name, e.clone())))
            }
            Program::XorAssign(a, b, e) => Program::seq(
                Program::Choose(
                    a.clone(),
                    DistExpr::Uniform(vec![Expr::Lit(Value::Bool(true)), Expr::Lit(Value::Bool(false))]),
                ),
                Program::Assign(b.clone(), Expr::bin(BinOp::Xor, Expr::Var(a.clone()), e.clone())),
            ),
            Program::Seq(a, b) => Program::seq(self.walk(a), self.walk(b)),
            Program::Choice(a, q, b) => Program::choice(self.walk(a), q.clone(), self.walk(b)),
            Program::Cond(g, a, b) => Program::cond(g.clone(), self.walk(a), self.walk(b)),
            Program::Atomic(q) => Program::atomic(self.walk(q)),
            Program::Local(ds, q) => {
                let mark = self.scope.len();
                self.scope.extend(ds.iter().map(|d| d.decl.clone()));
                let body = self.walk(q);
                self.scope.truncate(mark);
                Program::Local(ds.clone(), Box::new(body))
            }
            p => p.clone(),
        }
    }
}

/// Rewrite `reveal e` as a fresh visible local and `(a xor b) := e` as a coin plus assignment.
pub fn desugar(src: &Source) -> Source {
    let mut d = Desugarer { taken: all_names(src), next: 0, scope: src.decls.clone() };
    src.with_body(d.walk(&src.body))
}
