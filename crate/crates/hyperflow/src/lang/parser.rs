use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::LangError;
use crate::probcore::{Rational, Value};

#[derive(Clone, Copy, Debug, Default)]
pub struct ParseOptions {
    /// Accept `local` declarations without an initialiser (uniform default).
    pub allow_default_init: bool,
}

pub fn parse_source(text: &str, opts: ParseOptions) -> Result<Source, LangError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, scopes: vec![Vec::new()], symbols: BTreeSet::new(), opts };
    p.source()
}

enum DistAtom {
    Bare(Expr),
    Dist(DistExpr),
}

impl DistAtom {
    fn into_dist(self) -> DistExpr {
        match self {
            DistAtom::Bare(e) => DistExpr::Explicit(vec![(e, Expr::Lit(Value::int(1)))]),
            DistAtom::Dist(d) => d,
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    scopes: Vec<Vec<String>>,
    symbols: BTreeSet<String>,
    opts: ParseOptions,
}

type PResult<T> = Result<T, LangError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(LangError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            self.err(format!("expected '{p}', found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            self.err(format!("expected '{k}', found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected identifier, found {}", describe(&t))),
        }
    }

    fn in_scope(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|n| n == name))
    }

    fn source(&mut self) -> PResult<Source> {
        let mut decls = Vec::new();
        while self.is_kw("vis") || self.is_kw("hid") {
            let group = self.decl_group()?;
            for d in group {
                self.scopes[0].push(d.name.clone());
                decls.push(d);
            }
            self.eat_punct(";");
        }
        let body = self.program()?;
        if *self.peek() != Tok::Eof {
            return self.err(format!("unexpected {}", describe(self.peek())));
        }
        Ok(Source { decls, body })
    }

    fn visibility(&mut self) -> PResult<Visibility> {
        if self.eat_kw("hid") {
            return Ok(Visibility::Hid);
        }
        self.expect_kw("vis")?;
        if self.eat_punct("{") {
            let mut agents = BTreeSet::new();
            loop {
                agents.insert(self.ident()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            Ok(Visibility::Agents(agents))
        } else {
            Ok(Visibility::Vis)
        }
    }

    fn decl_group(&mut self) -> PResult<Vec<VarDecl>> {
        let visibility = self.visibility()?;
        let mut names = vec![self.ident()?];
        while self.eat_punct(",") {
            names.push(self.ident()?);
        }
        self.expect_punct(":")?;
        let domain = self.domain()?;
        for v in &domain {
            if let Value::Sym(s) = v {
                self.symbols.insert(s.clone());
            }
        }
        Ok(names
            .into_iter()
            .map(|name| VarDecl { name, domain: domain.clone(), visibility: visibility.clone() })
            .collect())
    }

    fn signed_int(&mut self) -> PResult<BigInt> {
        let neg = self.eat_punct("-");
        match self.bump() {
            Tok::Int(n) => Ok(if neg { -n } else { n }),
            t => {
                self.pos -= 1;
                self.err(format!("expected integer, found {}", describe(&t)))
            }
        }
    }

    fn domain(&mut self) -> PResult<Vec<Value>> {
        self.expect_punct("{")?;
        let mut out = Vec::new();
        if self.eat_punct("}") {
            return Ok(out);
        }
        loop {
            match self.peek().clone() {
                Tok::Kw("true") => {
                    self.bump();
                    out.push(Value::Bool(true));
                }
                Tok::Kw("false") => {
                    self.bump();
                    out.push(Value::Bool(false));
                }
                Tok::Ident(s) => {
                    self.bump();
                    out.push(Value::Sym(s));
                }
                _ => {
                    let a = self.signed_int()?;
                    if self.eat_punct("..") {
                        let b = self.signed_int()?;
                        let mut k = a;
                        while k <= b {
                            out.push(Value::Num(Rational::from_integer(k.clone())));
                            k += 1;
                        }
                    } else if self.eat_punct("/") {
                        let d = self.signed_int()?;
                        if d.is_zero() {
                            return self.err("zero denominator in domain value");
                        }
                        out.push(Value::Num(Rational::new(a, d)));
                    } else {
                        out.push(Value::Num(Rational::from_integer(a)));
                    }
                }
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(out)
    }

    fn at_program_end(&self) -> bool {
        matches!(self.peek(), Tok::Eof | Tok::Punct("}") | Tok::Kw("fi") | Tok::Kw("else"))
    }

    fn program(&mut self) -> PResult<Program> {
        if self.at_program_end() {
            return Ok(Program::Skip);
        }
        let mut items = vec![self.choice()?];
        while self.eat_punct(";") {
            if self.at_program_end() {
                break;
            }
            items.push(self.choice()?);
        }
        Ok(Program::seq_all(items))
    }

    fn choice(&mut self) -> PResult<Program> {
        let left = self.stmt()?;
        if self.eat_punct("[") {
            let q = self.expr()?;
            self.expect_punct("]")?;
            let right = self.choice()?;
            return Ok(Program::choice(left, q, right));
        }
        Ok(left)
    }

    fn block(&mut self) -> PResult<Program> {
        self.expect_punct("{")?;
        let p = self.program()?;
        self.expect_punct("}")?;
        Ok(p)
    }

    fn stmt(&mut self) -> PResult<Program> {
        match self.peek().clone() {
            Tok::Kw("skip") => {
                self.bump();
                Ok(Program::Skip)
            }
            Tok::Kw("if") => {
                self.bump();
                let g = self.expr()?;
                self.expect_kw("then")?;
                let t = self.program()?;
                let e = if self.eat_kw("else") { self.program()? } else { Program::Skip };
                self.expect_kw("fi")?;
                Ok(Program::cond(g, t, e))
            }
            Tok::Kw("reveal") => {
                self.bump();
                Ok(Program::Reveal(self.expr()?))
            }
            Tok::Kw("atomic") => {
                self.bump();
                Ok(Program::atomic(self.block()?))
            }
            Tok::Kw("local") => {
                self.bump();
                self.local()
            }
            Tok::Punct("{") => self.block(),
            Tok::Punct("(") => {
                self.bump();
                let a = self.ident()?;
                self.expect_kw("xor")?;
                let b = self.ident()?;
                self.expect_punct(")")?;
                self.expect_punct(":=")?;
                Ok(Program::XorAssign(a, b, self.expr()?))
            }
            Tok::Ident(x) => {
                self.bump();
                if self.eat_punct(":=") {
                    Ok(Program::Assign(x, self.expr()?))
                } else if self.eat_punct("<-") {
                    Ok(Program::Choose(x, self.dist()?))
                } else {
                    self.err(format!("expected ':=' or '<-' after '{x}'"))
                }
            }
            t => self.err(format!("expected a statement, found {}", describe(&t))),
        }
    }

    fn local(&mut self) -> PResult<Program> {
        let mut decls = Vec::new();
        self.scopes.push(Vec::new());
        loop {
            let group = self.decl_group()?;
            let init = if self.eat_punct(":=") {
                Init::Assign(self.expr()?)
            } else if self.eat_punct("<-") {
                Init::Choose(self.dist()?)
            } else if self.opts.allow_default_init {
                Init::Uniform
            } else {
                let names: Vec<&str> = group.iter().map(|d| d.name.as_str()).collect();
                return self.err(format!("local variable {} requires an initialiser", names.join(", ")));
            };
            for d in group {
                self.scopes.last_mut().unwrap().push(d.name.clone());
                decls.push(LocalDecl { decl: d, init: init.clone() });
            }
            if !self.eat_punct(";") {
                break;
            }
        }
        self.expect_kw("in")?;
        let body = self.block()?;
        self.scopes.pop();
        Ok(Program::Local(decls, Box::new(body)))
    }

    fn dist(&mut self) -> PResult<DistExpr> {
        Ok(self.dist_chain()?.into_dist())
    }

    fn dist_chain(&mut self) -> PResult<DistAtom> {
        let left = self.dist_atom()?;
        if !self.eat_punct("[") {
            return Ok(left);
        }
        let p = self.expr()?;
        self.expect_punct("]")?;
        let right = self.dist_chain()?;
        Ok(match (left, right) {
            (DistAtom::Bare(a), DistAtom::Bare(b)) => {
                let rest = match &p {
                    Expr::Lit(Value::Num(r)) => Expr::Lit(Value::Num(Rational::one() - r)),
                    _ => Expr::bin(BinOp::Sub, Expr::Lit(Value::int(1)), p.clone()),
                };
                DistAtom::Dist(DistExpr::Explicit(vec![(a, p), (b, rest)]))
            }
            (l, r) => DistAtom::Dist(DistExpr::Mix(Box::new(l.into_dist()), p, Box::new(r.into_dist()))),
        })
    }

    fn try_parse<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> Option<T> {
        let save = self.pos;
        match f(self) {
            Ok(t) => Some(t),
            Err(_) => {
                self.pos = save;
                None
            }
        }
    }

    fn dist_atom(&mut self) -> PResult<DistAtom> {
        match self.peek().clone() {
            Tok::Punct("{") => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    let e = self.expr()?;
                    self.expect_punct("@")?;
                    let p = self.expr()?;
                    items.push((e, p));
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("}")?;
                Ok(DistAtom::Dist(DistExpr::Explicit(items)))
            }
            Tok::Kw("uniform") => {
                self.bump();
                self.expect_punct("{")?;
                let mut items = Vec::new();
                loop {
                    let e = self.expr()?;
                    if self.eat_punct("..") {
                        let (a, b) = match (&e, self.expr()?) {
                            (Expr::Lit(Value::Num(a)), Expr::Lit(Value::Num(b))) if a.is_integer() && b.is_integer() => {
                                (a.to_integer(), b.to_integer())
                            }
                            _ => return self.err("range bounds must be integer literals"),
                        };
                        let mut k = a;
                        while k <= b {
                            items.push(Expr::Lit(Value::Num(Rational::from_integer(k.clone()))));
                            k += 1;
                        }
                    } else {
                        items.push(e);
                    }
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("}")?;
                Ok(DistAtom::Dist(DistExpr::Uniform(items)))
            }
            Tok::Punct("(") => {
                if let Some(e) = self.try_parse(|p| p.expr()) {
                    return Ok(DistAtom::Bare(e));
                }
                self.bump();
                let inner = self.dist_chain()?;
                if self.eat_kw("if") {
                    let g = self.expr()?;
                    self.expect_kw("else")?;
                    let other = self.dist_chain()?;
                    self.expect_punct(")")?;
                    return Ok(DistAtom::Dist(DistExpr::Cond(
                        Box::new(inner.into_dist()),
                        g,
                        Box::new(other.into_dist()),
                    )));
                }
                self.expect_punct(")")?;
                Ok(DistAtom::Dist(inner.into_dist()))
            }
            _ => {
                if let Some(e) = self.try_parse(|p| p.expr()) {
                    return Ok(DistAtom::Bare(e));
                }
                Ok(DistAtom::Bare(self.or_expr()?))
            }
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let e = self.or_expr()?;
        if self.eat_kw("if") {
            let g = self.or_expr()?;
            self.expect_kw("else")?;
            let o = self.expr()?;
            return Ok(Expr::cond(e, g, o));
        }
        Ok(e)
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut e = self.xor_expr()?;
        while self.eat_kw("or") {
            e = Expr::bin(BinOp::Or, e, self.xor_expr()?);
        }
        Ok(e)
    }

    fn xor_expr(&mut self) -> PResult<Expr> {
        let mut e = self.and_expr()?;
        while self.eat_kw("xor") {
            e = Expr::bin(BinOp::Xor, e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut e = self.not_expr()?;
        while self.eat_kw("and") {
            e = Expr::bin(BinOp::And, e, self.not_expr()?);
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not_expr()?)));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let a = self.add_expr()?;
        let op = match self.peek() {
            Tok::Punct("=") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            _ => return Ok(a),
        };
        self.bump();
        let b = self.add_expr()?;
        Ok(Expr::bin(op, a, b))
    }

    fn add_expr(&mut self) -> PResult<Expr> {
        let mut e = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => return Ok(e),
            };
            self.bump();
            e = Expr::bin(op, e, self.mul_expr()?);
        }
    }

    fn mul_expr(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                Tok::Kw("div") => BinOp::IntDiv,
                Tok::Kw("mod") => BinOp::Mod,
                _ => return Ok(e),
            };
            self.bump();
            let rhs = self.unary()?;
            e = match (op, &e, &rhs) {
                (BinOp::Div, Expr::Lit(Value::Num(a)), Expr::Lit(Value::Num(b)))
                    if a.is_integer() && b.is_integer() && !b.is_zero() =>
                {
                    Expr::Lit(Value::Num(a / b))
                }
                _ => Expr::bin(op, e, rhs),
            };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_punct("-") {
            let e = self.unary()?;
            return Ok(match e {
                Expr::Lit(Value::Num(r)) => Expr::Lit(Value::Num(-r)),
                e => Expr::Unary(UnOp::Neg, Box::new(e)),
            });
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Lit(Value::Num(Rational::from_integer(n))))
            }
            Tok::Dec(r) => {
                self.bump();
                Ok(Expr::Lit(Value::Num(r)))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Lit(Value::Bool(true)))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Lit(Value::Bool(false)))
            }
            Tok::Ident(s) => {
                self.bump();
                if !self.in_scope(&s) && self.symbols.contains(&s) {
                    Ok(Expr::Lit(Value::Sym(s)))
                } else {
                    Ok(Expr::Var(s))
                }
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            t => self.err(format!("expected an expression, found {}", describe(&t))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Int(n) => format!("number {n}"),
        Tok::Dec(r) => format!("number {r}"),
        Tok::Kw(k) => format!("'{k}'"),
        Tok::Punct(p) => format!("'{p}'"),
        Tok::Eof => "end of input".to_string(),
    }
}

#[allow(dead_code)]
fn peek_debug(p: &Parser) -> String {
    format!("{:?} {:?}", p.peek(), p.peek_at(1))
}
