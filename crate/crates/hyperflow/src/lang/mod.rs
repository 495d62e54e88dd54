pub mod ast;
pub mod expr;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod transform;
pub mod validate;

use std::fmt;

pub use ast::*;
pub use parser::ParseOptions;
pub use printer::{pretty_print, print_dist, print_expr, print_program};
pub use transform::{desugar, project_external, project_view};
pub use validate::{validate, Diagnostic};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared variable '{0}'")]
    UndeclaredVariable(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("unknown agent '{0}'")]
    UnknownAgent(String),
    #[error("{0}")]
    Invalid(Diagnostic),
}

impl LangError {
    fn from_diagnostic(d: Diagnostic) -> LangError {
        match d {
            Diagnostic::UndeclaredVariable(v) => LangError::UndeclaredVariable(v),
            Diagnostic::TypeMismatch(m) => LangError::TypeMismatch(m),
            d => LangError::Invalid(d),
        }
    }
}

/// Parse and validate; the first error diagnostic becomes the error.
pub fn parse(text: &str) -> Result<Source, LangError> {
    parse_with(text, ParseOptions::default())
}

pub fn parse_with(text: &str, opts: ParseOptions) -> Result<Source, LangError> {
    let src = parser::parse_source(text, opts)?;
    if let Some(d) = validate(&src).into_iter().find(|d| d.is_error()) {
        return Err(LangError::from_diagnostic(d));
    }
    Ok(src)
}

/// Syntax only; no validation.
pub fn parse_unvalidated(text: &str) -> Result<Source, LangError> {
    parser::parse_source(text, ParseOptions { allow_default_init: true })
}

/// Parse a single expression against the declarations of `src`.
pub fn parse_expr_in(src: &Source, text: &str) -> Result<Expr, LangError> {
    let wrapped = format!("{}\nreveal {}", pretty_decls(src), text);
    match parser::parse_source(&wrapped, ParseOptions::default())?.body {
        Program::Reveal(e) => Ok(e),
        _ => Err(LangError::Syntax { line: 1, col: 1, msg: "expected a single expression".into() }),
    }
}

fn pretty_decls(src: &Source) -> String {
    let s = pretty_print(&src.with_body(Program::Skip));
    s.trim_end().trim_end_matches("skip").to_string()
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_print(self))
    }
}
