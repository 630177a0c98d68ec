//! Source regeneration. Transform passes print their results through this
//! module, and the parser tests use it to check print/parse round trips.

use std::fmt::Write;

use super::ast::*;

/// Renders a whole program, pragmas included, as parseable source.
pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for input in &p.inputs {
        match input.domain {
            Some((lo, hi)) => {
                let _ = writeln!(out, "// input {} in [{}, {}]", input.name, lo, hi);
            }
            None => {
                let _ = writeln!(out, "// input {}", input.name);
            }
        }
    }
    if let Some(w) = p.bitwidth {
        let _ = writeln!(out, "// bitwidth {w}");
    }
    let _ = writeln!(out, "proc {} {{", p.name);
    print_block(&mut out, &p.body, 1);
    out.push_str("}\n");
    out
}

pub fn print_stmts(stmts: &[Stmt]) -> String {
    let mut out = String::new();
    print_block(&mut out, stmts, 0);
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn print_block(out: &mut String, stmts: &[Stmt], level: usize) {
    for s in stmts {
        print_stmt(out, s, level);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Assign { target, value, .. } => {
            let _ = writeln!(out, "{target} = {};", print_expr(value));
        }
        Stmt::Assert { cond, .. } => {
            let _ = writeln!(out, "assert({});", print_expr(cond));
        }
        Stmt::Break { .. } => {
            out.push_str("break;\n");
        }
        Stmt::While { cond, body, .. } => {
            let _ = writeln!(out, "while ({}) {{", print_expr(cond));
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::If {
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            let _ = write!(out, "if ({}) {{\n", print_expr(cond));
            print_block(out, then_branch, level + 1);
            indent(out, level);
            out.push('}');
            // An else branch holding exactly one `if` prints as `else if`.
            match else_branch.as_slice() {
                [] => out.push('\n'),
                [only @ Stmt::If { .. }] => {
                    out.push_str(" else ");
                    let mut nested = String::new();
                    print_stmt(&mut nested, only, level);
                    out.push_str(nested.trim_start());
                }
                _ => {
                    out.push_str(" else {\n");
                    print_block(out, else_branch, level + 1);
                    indent(out, level);
                    out.push_str("}\n");
                }
            }
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, 0);
    out
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Or, ..) => 1,
        Expr::Bin(BinOp::And, ..) => 2,
        Expr::Bin(
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne,
            ..,
        ) => 4,
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 5,
        Expr::Bin(BinOp::Mul | BinOp::Div | BinOp::Mod, ..) => 6,
        Expr::Neg(_) | Expr::Not(_) => 7,
        Expr::Int(_) | Expr::Var(..) | Expr::Nondet(..) => 8,
    }
}

/// Value of a sign-chain over a literal (`-(-5)`), if that is all `e` is.
fn literal_value(e: &Expr) -> Option<i128> {
    match e {
        Expr::Int(v) => Some(*v),
        Expr::Neg(inner) => literal_value(inner)?.checked_neg(),
        _ => None,
    }
}

fn write_expr(out: &mut String, e: &Expr, min_prec: u8) {
    // Fold literal sign chains so `-(-5)` prints as `5`, matching what the
    // parser folds such chains into.
    if !matches!(e, Expr::Int(_)) {
        if let Some(v) = literal_value(e) {
            return write_expr(out, &Expr::Int(v), min_prec);
        }
    }
    let p = prec(e);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Int(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Var(name, _) => out.push_str(name),
        Expr::Nondet(..) => out.push_str("nondet()"),
        Expr::Neg(inner) => {
            out.push('-');
            write_expr(out, inner, 7);
        }
        Expr::Not(inner) => {
            out.push('!');
            write_expr(out, inner, 7);
        }
        Expr::Bin(op, l, r) => {
            // Left operand may share the level; the right one must bind
            // tighter so `a - (b - c)` and `a * (b / c)` keep their parens.
            write_expr(out, l, p);
            let _ = write!(out, " {op} ");
            write_expr(out, r, p + 1);
        }
    }
    if parens {
        out.push(')');
    }
}
