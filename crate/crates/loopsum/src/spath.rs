//! Single-branch paths. A multi-branch loop body is cut into its acyclic
//! routes, one per combination of branch outcomes; each route is summarized
//! by forward substitution into a guard set over pre-iteration values plus a
//! parallel update map. These paths are the nodes everything downstream
//! (the path graph, the component summaries) is built from.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frontend::{BinOp, Expr, LoopId, Program, Stmt};
use crate::sym::{self, CmpOp, SymExpr, SymVar};

pub const DEFAULT_MAX_PATHS: usize = 4096;

#[derive(Debug, Clone)]
pub struct SPath {
    /// Index in enumeration order (then-branch first at every split).
    pub id: usize,
    /// Conjunction of atoms over pre-iteration values that selects this
    /// route, loop guard included.
    pub cond: Vec<SymExpr>,
    /// Parallel update map over pre-iteration values; untouched variables
    /// are omitted and mean identity.
    pub op: BTreeMap<String, SymExpr>,
    /// Assertion obligations met along the route, over pre-iteration values.
    pub asserts: Vec<SymExpr>,
    /// Set when the guard set is unsatisfiable for every pre-state.
    pub pruned: bool,
}

impl SPath {
    pub fn name(&self) -> String {
        format!("P{}", self.id)
    }

    /// Post-iteration value of `var` as an expression over pre-values.
    pub fn post(&self, var: &str) -> SymExpr {
        self.op
            .get(var)
            .cloned()
            .unwrap_or_else(|| sym::pre(var))
    }

    pub fn describe(&self) -> String {
        let conds: Vec<String> = self.cond.iter().map(|c| c.to_string()).collect();
        let ops: Vec<String> = self
            .op
            .iter()
            .map(|(v, e)| format!("{v} <- {e}"))
            .collect();
        format!(
            "{}{}: Cond {{{}}} Op {{{}}}",
            self.name(),
            if self.pruned { " (pruned)" } else { "" },
            conds.join(", "),
            ops.join(", ")
        )
    }
}

#[derive(Debug, Clone)]
pub struct LoopPaths {
    pub loop_id: LoopId,
    /// Loop guard over pre-iteration values.
    pub guard: SymExpr,
    pub paths: Vec<SPath>,
    /// Variables read or written anywhere in the loop.
    pub vars: BTreeSet<String>,
}

impl LoopPaths {
    pub fn live(&self) -> impl Iterator<Item = &SPath> {
        self.paths.iter().filter(|p| !p.pruned)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SPathError {
    #[error("path enumeration exceeded the limit of {limit} routes")]
    PathExplosion { limit: usize },
    #[error("loop body still contains nested loop {id}; summarize inner loops first")]
    NestedLoop { id: LoopId },
}

/// Converts an AST expression to a symbolic one over pre-iteration values,
/// substituting the current update map for variables on the way in.
pub fn expr_to_sym(e: &Expr, op: &BTreeMap<String, SymExpr>) -> SymExpr {
    match e {
        Expr::Int(v) => sym::int(*v),
        Expr::Var(name, _) => op
            .get(name)
            .cloned()
            .unwrap_or_else(|| sym::pre(name)),
        Expr::Nondet(k, _) => SymExpr::Var(SymVar::Fresh(format!("nd{k}"))),
        Expr::Neg(inner) => sym::neg(expr_to_sym(inner, op)),
        Expr::Not(inner) => SymExpr::Not(Box::new(expr_to_sym(inner, op))),
        Expr::Bin(b, l, r) => {
            let lv = expr_to_sym(l, op);
            let rv = expr_to_sym(r, op);
            match b {
                BinOp::Add => sym::add(vec![lv, rv]),
                BinOp::Sub => sym::sub(lv, rv),
                BinOp::Mul => sym::mul(vec![lv, rv]),
                BinOp::Div => SymExpr::Div(Box::new(lv), Box::new(rv)),
                BinOp::Mod => SymExpr::Mod(Box::new(lv), Box::new(rv)),
                BinOp::Lt => sym::cmp(CmpOp::Lt, lv, rv),
                BinOp::Le => sym::cmp(CmpOp::Le, lv, rv),
                BinOp::Gt => sym::cmp(CmpOp::Gt, lv, rv),
                BinOp::Ge => sym::cmp(CmpOp::Ge, lv, rv),
                BinOp::Eq => sym::cmp(CmpOp::Eq, lv, rv),
                BinOp::Ne => sym::cmp(CmpOp::Ne, lv, rv),
                BinOp::And => SymExpr::And(vec![lv, rv]),
                BinOp::Or => SymExpr::Or(vec![lv, rv]),
            }
        }
    }
}

/// Pushes a normalized boolean expression onto a conjunction, splitting
/// top-level `&&` into separate atoms.
fn push_cond(conds: &mut Vec<SymExpr>, c: SymExpr) {
    match c.normalize() {
        SymExpr::And(parts) => {
            for p in parts {
                push_cond(conds, p);
            }
        }
        SymExpr::Bool(true) => {}
        atom => conds.push(atom),
    }
}

struct Enumerator {
    out: Vec<SPath>,
    max_paths: usize,
}

impl Enumerator {
    fn walk(
        &mut self,
        stmts: &[Stmt],
        i: usize,
        cond: &[SymExpr],
        op: &BTreeMap<String, SymExpr>,
        asserts: &[SymExpr],
    ) -> Result<(), SPathError> {
        let Some(s) = stmts.get(i) else {
            if self.out.len() >= self.max_paths {
                return Err(SPathError::PathExplosion {
                    limit: self.max_paths,
                });
            }
            self.out.push(SPath {
                id: self.out.len(),
                cond: cond.to_vec(),
                op: op.clone(),
                asserts: asserts.to_vec(),
                pruned: false,
            });
            return Ok(());
        };
        match s {
            Stmt::Assign { target, value, .. } => {
                let mut op2 = op.clone();
                op2.insert(target.clone(), expr_to_sym(value, op).normalize());
                self.walk(stmts, i + 1, cond, &op2, asserts)
            }
            Stmt::Assert { cond: c, .. } => {
                let mut asserts2 = asserts.to_vec();
                asserts2.push(expr_to_sym(c, op).normalize());
                self.walk(stmts, i + 1, cond, op, &asserts2)
            }
            Stmt::If {
                cond: c,
                then_branch,
                else_branch,
                ..
            } => {
                let sub = expr_to_sym(c, op);
                // Flatten each branch's statements ahead of the block tail.
                let mut cond_t = cond.to_vec();
                push_cond(&mut cond_t, sub.clone());
                let then_seq: Vec<Stmt> =
                    then_branch.iter().cloned().chain(stmts[i + 1..].iter().cloned()).collect();
                self.walk(&then_seq, 0, &cond_t, op, asserts)?;
                let mut cond_f = cond.to_vec();
                push_cond(&mut cond_f, SymExpr::Not(Box::new(sub)));
                let else_seq: Vec<Stmt> =
                    else_branch.iter().cloned().chain(stmts[i + 1..].iter().cloned()).collect();
                self.walk(&else_seq, 0, &cond_f, op, asserts)
            }
            Stmt::While { id, .. } => Err(SPathError::NestedLoop { id: *id }),
            Stmt::Break { .. } => {
                unreachable!("canonicalized loop bodies are break-free")
            }
        }
    }
}

/// Enumerates the single-branch paths of one loop in a canonical (break-free,
/// nesting-eliminated) program.
pub fn enumerate_spaths(
    program: &Program,
    loop_id: LoopId,
    max_paths: usize,
) -> Result<LoopPaths, SPathError> {
    let (cond, body) = match program.find_loop(loop_id) {
        Some(Stmt::While { cond, body, .. }) => (cond, body),
        _ => panic!("loop {loop_id} not found"),
    };
    let guard = expr_to_sym(cond, &BTreeMap::new()).normalize();
    let mut base_cond = Vec::new();
    push_cond(&mut base_cond, guard.clone());
    let mut en = Enumerator {
        out: Vec::new(),
        max_paths,
    };
    en.walk(body, 0, &base_cond, &BTreeMap::new(), &[])?;

    let mut vars: BTreeSet<String> = BTreeSet::new();
    let mut collect_expr = |e: &Expr| {
        e.visit(&mut |sub| {
            if let Expr::Var(name, _) = sub {
                vars.insert(name.clone());
            }
        });
    };
    collect_expr(cond);
    crate::frontend::ast::visit_stmts(body, &mut |s| match s {
        Stmt::Assign { target, value, .. } => {
            vars.insert(target.clone());
            value.visit(&mut |sub| {
                if let Expr::Var(name, _) = sub {
                    vars.insert(name.clone());
                }
            });
        }
        Stmt::If { cond, .. } | Stmt::While { cond, .. } | Stmt::Assert { cond, .. } => {
            cond.visit(&mut |sub| {
                if let Expr::Var(name, _) = sub {
                    vars.insert(name.clone());
                }
            });
        }
        Stmt::Break { .. } => {}
    });

    Ok(LoopPaths {
        loop_id,
        guard,
        paths: en.out,
        vars,
    })
}

/// Marks statically infeasible paths. `definitely_unsat` must only return
/// true when the conjunction has no integer solution at all.
pub fn prune_paths(
    paths: &mut LoopPaths,
    definitely_unsat: &mut dyn FnMut(&[SymExpr]) -> bool,
) {
    for p in &mut paths.paths {
        if definitely_unsat(&p.cond) {
            p.pruned = true;
        }
    }
}
