//! Parsing for the `.wl` while-language: pragma-style input declarations,
//! integer arithmetic, `if`/`while`/`assert`/`break`, and nothing else.
//! Programs that step outside the fragment are rejected with a tagged
//! diagnostic rather than summarized incorrectly.

pub mod ast;
pub mod diag;
pub mod lex;
pub mod parse;
pub mod pretty;

pub use ast::{BinOp, Expr, InputDecl, LoopId, Program, Span, Stmt};
pub use diag::{Diagnostic, ParseError, RejectTag, Severity};
pub use parse::parse;
pub use pretty::{print_expr, print_program, print_stmts};
