//! Nested loop elimination. An inner loop whose summary is closed in every
//! case is replaced by a guard-selected block of assignments computing its
//! exit state directly, so the enclosing loop becomes single-level. Loops
//! that resist elimination stay in the tree and their enclosing loops
//! inherit the failure.

use std::collections::BTreeMap;

use crate::frontend::ast::visit_stmts;
use crate::frontend::{BinOp, Expr, LoopId, Program, Span, Stmt};
use crate::solver::Solver;
use crate::sym::{CmpOp, SymExpr, SymVar};

use super::{summarize_loop, Failure, FailureKind, LoopSummary, SummarizeConfig};

pub struct Elimination {
    pub program: Program,
    /// Inner loops replaced by closed forms, innermost first.
    pub eliminated: Vec<LoopId>,
    /// Nested loops still in the tree, with why they stayed.
    pub failures: BTreeMap<LoopId, Failure>,
}

/// True when the block holds assignments produced by loop elimination.
/// Break rewriting also emits synthetic assignments; those flag variables
/// are excluded by name.
pub fn has_elimination_marks(stmts: &[Stmt]) -> bool {
    let mut found = false;
    visit_stmts(stmts, &mut |s| {
        if let Stmt::Assign {
            target,
            synthetic: true,
            ..
        } = s
        {
            if !target.starts_with("__brk") {
                found = true;
            }
        }
    });
    found
}

/// Replaces every closable nested loop of a canonical program, innermost
/// first. Top-level loops are left for direct summarization.
pub fn eliminate(program: &Program, cfg: &SummarizeConfig, solver: &mut Solver) -> Elimination {
    let mut result = Elimination {
        program: program.clone(),
        eliminated: Vec::new(),
        failures: BTreeMap::new(),
    };
    let body = std::mem::take(&mut result.program.body);
    result.program.body = walk(body, false, &mut result, cfg, solver);
    result
}

fn walk(
    stmts: Vec<Stmt>,
    inside_loop: bool,
    result: &mut Elimination,
    cfg: &SummarizeConfig,
    solver: &mut Solver,
) -> Vec<Stmt> {
    let mut out = Vec::with_capacity(stmts.len());
    for s in stmts {
        match s {
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            } => out.push(Stmt::If {
                cond,
                then_branch: walk(then_branch, inside_loop, result, cfg, solver),
                else_branch: walk(else_branch, inside_loop, result, cfg, solver),
                span,
            }),
            Stmt::While {
                id,
                cond,
                body,
                span,
            } => {
                let body = walk(body, true, result, cfg, solver);
                let stmt = Stmt::While {
                    id,
                    cond,
                    body,
                    span,
                };
                if !inside_loop {
                    out.push(stmt);
                    continue;
                }
                if let Some(inner) = first_loop_in_body(&stmt) {
                    let detail = match result.failures.get(&inner) {
                        Some(f) => {
                            let kind = f.kind;
                            let detail = format!("inner loop {inner}: {}", f.detail);
                            Failure::new(kind, detail)
                        }
                        None => Failure::new(
                            FailureKind::SolverUnknown,
                            format!("inner loop {inner} was not eliminated"),
                        ),
                    };
                    result.failures.insert(id, detail);
                    out.push(stmt);
                    continue;
                }
                match close_loop(&stmt, cfg, solver) {
                    Ok(replacement) => {
                        result.eliminated.push(id);
                        out.extend(replacement);
                    }
                    Err(f) => {
                        result.failures.insert(id, f);
                        out.push(stmt);
                    }
                }
            }
            other => out.push(other),
        }
    }
    out
}

fn first_loop_in_body(stmt: &Stmt) -> Option<LoopId> {
    let Stmt::While { body, .. } = stmt else {
        return None;
    };
    let mut found = None;
    visit_stmts(body, &mut |s| {
        if let Stmt::While { id, .. } = s {
            if found.is_none() {
                found = Some(*id);
            }
        }
    });
    found
}

/// Summarizes one leaf loop in isolation and renders its cases as
/// statements, if every case has closed exit values and count.
fn close_loop(stmt: &Stmt, cfg: &SummarizeConfig, solver: &mut Solver) -> Result<Vec<Stmt>, Failure> {
    let Stmt::While { id, .. } = stmt else {
        unreachable!("close_loop takes a while statement");
    };
    // No entry-state assumptions hold at an inner loop, so it is
    // summarized without input domains.
    let wrapper = Program {
        name: "inner".to_string(),
        inputs: Vec::new(),
        bitwidth: None,
        body: vec![stmt.clone()],
    };
    let summary = summarize_loop(&wrapper, *id, cfg, solver, &BTreeMap::new());
    if let Some(f) = &summary.failure {
        return Err(f.clone());
    }
    for case in &summary.cases {
        if case.nonterminating {
            return Err(Failure::new(
                FailureKind::SolverUnknown,
                "the inner loop can run forever from reachable states",
            ));
        }
        if case.post.is_none() || case.total.is_none() {
            return Err(Failure::new(
                FailureKind::SolverUnknown,
                "an inner loop case has no closed form",
            ));
        }
    }
    Ok(render_cases(*id, &summary))
}

fn assign(target: String, value: Expr) -> Stmt {
    Stmt::Assign {
        target,
        value,
        synthetic: true,
        span: Span::default(),
    }
}

/// One `if`/`else` chain selecting the matching case. Exit values are
/// staged through temporaries so every right side reads entry values.
fn render_cases(id: LoopId, summary: &LoopSummary) -> Vec<Stmt> {
    let k = id.0;
    let mut chain: Vec<Stmt> = Vec::new();
    for case in summary.cases.iter().rev() {
        let post = case.post.as_ref().expect("checked closed");
        let total = case.total.as_ref().expect("checked closed");
        let mut body = Vec::new();
        body.push(assign(format!("__n{k}"), sym_to_expr(total)));
        for (v, e) in post {
            body.push(assign(format!("__t{k}_{v}"), sym_to_expr(e)));
        }
        for v in post.keys() {
            body.push(assign(
                v.clone(),
                Expr::Var(format!("__t{k}_{v}"), Span::default()),
            ));
        }
        let cond = atoms_to_expr(&case.pre);
        chain = vec![Stmt::If {
            cond,
            then_branch: body,
            else_branch: chain,
            span: Span::default(),
        }];
    }
    chain
}

fn atoms_to_expr(atoms: &[SymExpr]) -> Expr {
    let mut out: Option<Expr> = None;
    for a in atoms {
        let e = sym_to_expr(a);
        out = Some(match out {
            None => e,
            Some(acc) => Expr::Bin(BinOp::And, Box::new(acc), Box::new(e)),
        });
    }
    out.unwrap_or(Expr::Int(1))
}

fn fold_bin(op: BinOp, terms: &[SymExpr], empty: i128) -> Expr {
    let mut out: Option<Expr> = None;
    for t in terms {
        let e = sym_to_expr(t);
        out = Some(match out {
            None => e,
            Some(acc) => Expr::Bin(op, Box::new(acc), Box::new(e)),
        });
    }
    out.unwrap_or(Expr::Int(empty))
}

/// Renders a closed symbolic expression back to source syntax. Closed
/// forms only mention entry values, so every variable maps to its name.
pub fn sym_to_expr(e: &SymExpr) -> Expr {
    match e {
        SymExpr::Int(v) => Expr::Int(*v),
        SymExpr::Bool(b) => Expr::Int(*b as i128),
        SymExpr::Var(SymVar::Pre(name)) => Expr::Var(name.clone(), Span::default()),
        SymExpr::Var(SymVar::Fresh(name)) => Expr::Var(name.clone(), Span::default()),
        SymExpr::Var(SymVar::N) => Expr::Var("__N".to_string(), Span::default()),
        SymExpr::Add(ts) => fold_bin(BinOp::Add, ts, 0),
        SymExpr::Mul(ts) => fold_bin(BinOp::Mul, ts, 1),
        SymExpr::Div(a, b) => Expr::Bin(
            BinOp::Div,
            Box::new(sym_to_expr(a)),
            Box::new(sym_to_expr(b)),
        ),
        SymExpr::Mod(a, b) => Expr::Bin(
            BinOp::Mod,
            Box::new(sym_to_expr(a)),
            Box::new(sym_to_expr(b)),
        ),
        SymExpr::Cmp(op, l, r) => {
            let op = match op {
                CmpOp::Lt => BinOp::Lt,
                CmpOp::Le => BinOp::Le,
                CmpOp::Gt => BinOp::Gt,
                CmpOp::Ge => BinOp::Ge,
                CmpOp::Eq => BinOp::Eq,
                CmpOp::Ne => BinOp::Ne,
            };
            Expr::Bin(op, Box::new(sym_to_expr(l)), Box::new(sym_to_expr(r)))
        }
        SymExpr::Not(x) => Expr::Not(Box::new(sym_to_expr(x))),
        SymExpr::And(ts) => fold_bin(BinOp::And, ts, 1),
        SymExpr::Or(ts) => fold_bin(BinOp::Or, ts, 0),
    }
}
