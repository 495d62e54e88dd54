use num_traits::{One, Signed};

use super::ast::*;
use crate::probcore::{Rational, Value};

const OR: u8 = 2;
const XOR: u8 = 3;
const AND: u8 = 4;
const NOT: u8 = 5;
const CMP: u8 = 6;
const ADD: u8 = 7;
const MUL: u8 = 8;
const UNARY: u8 = 9;
const ATOM: u8 = 10;

pub fn pretty_print(src: &Source) -> String {
    let mut out = String::new();
    for d in &src.decls {
        out.push_str(&print_decl(d));
        out.push('\n');
    }
    if !src.decls.is_empty() {
        out.push('\n');
    }
    out.push_str(&print_program(&src.body));
    out.push('\n');
    out
}

pub fn print_visibility(v: &Visibility) -> String {
    match v {
        Visibility::Vis => "vis".into(),
        Visibility::Hid => "hid".into(),
        Visibility::Agents(s) => format!("vis{{{}}}", s.iter().cloned().collect::<Vec<_>>().join(", ")),
    }
}

pub fn print_domain(domain: &[Value]) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < domain.len() {
        let mut j = i;
        while j + 1 < domain.len() && is_successor(&domain[j], &domain[j + 1]) {
            j += 1;
        }
        if j >= i + 2 {
            parts.push(format!("{}..{}", domain[i], domain[j]));
        } else {
            for v in &domain[i..=j] {
                parts.push(v.to_string());
            }
        }
        i = j + 1;
    }
    format!("{{{}}}", parts.join(", "))
}

fn is_successor(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x.is_integer() && *y == x + Rational::one(),
        _ => false,
    }
}

pub fn print_decl(d: &VarDecl) -> String {
    format!("{} {}: {}", print_visibility(&d.visibility), d.name, print_domain(&d.domain))
}

fn lit_prec(v: &Value) -> u8 {
    match v {
        Value::Num(r) if !r.is_integer() => MUL,
        Value::Num(r) if r.is_negative() => UNARY,
        _ => ATOM,
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Lit(v) => lit_prec(v),
        Expr::Var(_) | Expr::Cond(..) => ATOM,
        Expr::Unary(UnOp::Neg, _) => UNARY,
        Expr::Unary(UnOp::Not, _) => NOT,
        Expr::Binary(op, _, _) => binop_prec(*op),
    }
}

fn binop_prec(op: BinOp) -> u8 {
    use BinOp::*;
    match op {
        Or => OR,
        Xor => XOR,
        And => AND,
        Eq | Ne | Lt | Le | Gt | Ge => CMP,
        Add | Sub => ADD,
        Mul | Div | IntDiv | Mod => MUL,
    }
}

fn binop_str(op: BinOp) -> &'static str {
    use BinOp::*;
    match op {
        Add => "+",
        Sub => "-",
        Mul => "*",
        Div => "/",
        IntDiv => "div",
        Mod => "mod",
        Eq => "=",
        Ne => "!=",
        Lt => "<",
        Le => "<=",
        Gt => ">",
        Ge => ">=",
        And => "and",
        Or => "or",
        Xor => "xor",
    }
}

pub fn print_expr(e: &Expr) -> String {
    expr_at(e, 0)
}

fn expr_at(e: &Expr, min: u8) -> String {
    let s = match e {
        Expr::Lit(v) => v.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::Unary(UnOp::Neg, a) => format!("-{}", expr_at(a, UNARY)),
        Expr::Unary(UnOp::Not, a) => format!("not {}", expr_at(a, NOT)),
        Expr::Cond(t, g, o) => format!("({} if {} else {})", expr_at(t, OR), expr_at(g, OR), expr_at(o, OR)),
        Expr::Binary(op, a, b) => {
            let p = binop_prec(*op);
            let (lm, rm) = if p == CMP { (CMP + 1, CMP + 1) } else { (p, p + 1) };
            format!("{} {} {}", expr_at(a, lm), binop_str(*op), expr_at(b, rm))
        }
    };
    if prec(e) < min {
        format!("({s})")
    } else {
        s
    }
}

pub fn print_dist(d: &DistExpr) -> String {
    match d {
        DistExpr::Explicit(items) => {
            let parts: Vec<String> = items.iter().map(|(e, p)| format!("{} @ {}", print_expr(e), print_expr(p))).collect();
            format!("{{{}}}", parts.join(", "))
        }
        DistExpr::Uniform(items) => {
            format!("uniform{{{}}}", items.iter().map(print_expr).collect::<Vec<_>>().join(", "))
        }
        DistExpr::Mix(a, p, b) => {
            let left = match **a {
                DistExpr::Mix(..) => format!("({})", print_dist(a)),
                _ => print_dist(a),
            };
            format!("{} [{}] {}", left, print_expr(p), print_dist(b))
        }
        DistExpr::Cond(a, g, b) => format!("({} if {} else {})", print_dist(a), expr_at(g, OR), print_dist(b)),
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    write_program(p, 0, &mut out);
    out
}

fn indent(n: usize) -> String {
    "  ".repeat(n)
}

fn braced(p: &Program, level: usize, out: &mut String) {
    out.push_str("{\n");
    out.push_str(&indent(level + 1));
    write_program(p, level + 1, out);
    out.push('\n');
    out.push_str(&indent(level));
    out.push('}');
}

fn write_program(p: &Program, level: usize, out: &mut String) {
    match p {
        Program::Skip => out.push_str("skip"),
        Program::Assign(x, e) => out.push_str(&format!("{x} := {}", print_expr(e))),
        Program::Choose(x, d) => out.push_str(&format!("{x} <- {}", print_dist(d))),
        Program::XorAssign(a, b, e) => out.push_str(&format!("({a} xor {b}) := {}", print_expr(e))),
        Program::Reveal(e) => out.push_str(&format!("reveal {}", print_expr(e))),
        Program::Seq(a, b) => {
            if matches!(**a, Program::Seq(..)) {
                braced(a, level, out);
            } else {
                write_program(a, level, out);
            }
            out.push_str(";\n");
            out.push_str(&indent(level));
            write_program(b, level, out);
        }
        Program::Choice(a, q, b) => {
            if matches!(**a, Program::Seq(..) | Program::Choice(..)) {
                braced(a, level, out);
            } else {
                write_program(a, level, out);
            }
            out.push_str(&format!(" [{}] ", print_expr(q)));
            if matches!(**b, Program::Seq(..)) {
                braced(b, level, out);
            } else {
                write_program(b, level, out);
            }
        }
        Program::Cond(g, t, f) => {
            out.push_str(&format!("if {} then\n", print_expr(g)));
            out.push_str(&indent(level + 1));
            write_program(t, level + 1, out);
            out.push('\n');
            out.push_str(&indent(level));
            out.push_str("else\n");
            out.push_str(&indent(level + 1));
            write_program(f, level + 1, out);
            out.push('\n');
            out.push_str(&indent(level));
            out.push_str("fi");
        }
        Program::Atomic(q) => {
            out.push_str("atomic ");
            braced(q, level, out);
        }
        Program::Local(decls, q) => {
            out.push_str("local ");
            let parts: Vec<String> = decls
                .iter()
                .map(|ld| {
                    let init = match &ld.init {
                        Init::Assign(e) => format!(" := {}", print_expr(e)),
                        Init::Choose(d) => format!(" <- {}", print_dist(d)),
                        Init::Uniform => String::new(),
                    };
                    format!("{}{}", print_decl(&ld.decl), init)
                })
                .collect();
            out.push_str(&parts.join("; "));
            out.push_str(" in ");
            braced(q, level, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skip_prints() {
        assert_eq!(print_program(&Program::Skip), "skip");
    }

    #[test]
    fn choice_prints_infix() {
        let p = Program::choice(Program::Skip, Expr::var("h"), Program::Skip);
        assert_eq!(print_program(&p), "skip [h] skip");
    }

    #[test]
    fn domain_ranges_compress() {
        let d: Vec<Value> = (0..4).map(Value::int).chain([Value::int(7)]).collect();
        assert_eq!(print_domain(&d), "{0..3, 7}");
    }
}
