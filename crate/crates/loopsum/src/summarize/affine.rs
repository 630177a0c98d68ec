//! Closed forms for single-path recurrences. An update map that only
//! shifts each variable by a per-iteration constant makes every guard atom
//! an arithmetic progression, so the first failing iteration of each atom
//! is a ceiling division and the loop count is their minimum.

use std::collections::{BTreeMap, BTreeSet};

use crate::sym::{self, CmpOp, SymExpr, SymVar};

use super::{Failure, FailureKind};

/// Plan for a component that is one path jumping back to itself.
#[derive(Debug, Clone)]
pub struct AffineStage {
    pub path: usize,
    pub enter: Vec<SymExpr>,
    /// Exit values over entry values and the iteration count N.
    pub post: BTreeMap<String, SymExpr>,
    pub count: Count,
}

#[derive(Debug, Clone)]
pub enum Count {
    Closed { cases: Vec<CountCase> },
    /// Guard atoms at iteration N. The count is the least N >= 1 failing
    /// them, found per input by solver refinement.
    Implicit { step: Vec<SymExpr> },
}

#[derive(Debug, Clone)]
pub struct CountCase {
    pub guards: Vec<SymExpr>,
    /// None: no guard atom ever fails, so the loop never exits.
    pub n: Option<SymExpr>,
}

#[derive(Debug, Clone)]
enum Update {
    /// v' = v + delta, delta over unassigned variables and constants.
    Shift(SymExpr),
    /// v' = expr over unassigned variables; same value every iteration.
    Fixed(SymExpr),
}

enum AtomPlan {
    /// Holds forever once it holds on entry.
    Never,
    /// First fails at this iteration count (>= 1 given entry).
    At(SymExpr),
    /// Equality-avoidance atom: fails only if the progression lands on the
    /// forbidden value exactly.
    Conditional {
        guard: Vec<SymExpr>,
        at: SymExpr,
        otherwise: SymExpr,
    },
    /// Not an arithmetic progression; needs the implicit form.
    Opaque,
}

fn unknown(detail: String) -> Failure {
    Failure::new(FailureKind::SolverUnknown, detail)
}

/// Rebuilds an affine form as an expression, skipping one variable.
pub(crate) fn rest_of(coefs: &BTreeMap<SymVar, i128>, konst: i128, skip: &SymVar) -> SymExpr {
    let mut terms = Vec::new();
    for (var, c) in coefs {
        if var == skip || *c == 0 {
            continue;
        }
        terms.push(sym::mul(vec![sym::int(*c), SymExpr::Var(var.clone())]));
    }
    terms.push(sym::int(konst));
    sym::add(terms).normalize()
}

fn classify_updates(
    op: &BTreeMap<String, SymExpr>,
) -> Result<BTreeMap<String, Update>, Failure> {
    let assigned: BTreeSet<&String> = op.keys().collect();
    let mut updates = BTreeMap::new();
    for (v, e) in op {
        let Some((coefs, konst)) = e.as_affine() else {
            return Err(unknown(format!("update of {v} is not affine")));
        };
        for (var, c) in &coefs {
            let SymVar::Pre(name) = var else {
                return Err(unknown(format!("update of {v} uses {var:?}")));
            };
            if *c != 0 && name != v && assigned.contains(name) {
                return Err(Failure::new(
                    FailureKind::CoupledRecurrence,
                    format!("{v} is updated from {name}, which the loop also updates"),
                ));
            }
        }
        let self_var = SymVar::Pre(v.clone());
        let self_coef = coefs.get(&self_var).copied().unwrap_or(0);
        let upd = match self_coef {
            1 => Update::Shift(rest_of(&coefs, konst, &self_var)),
            0 => Update::Fixed(e.clone()),
            a => {
                return Err(unknown(format!(
                    "update of {v} scales it by {a}; only unit steps have a closed form"
                )))
            }
        };
        updates.insert(v.clone(), upd);
    }
    Ok(updates)
}

/// Per-iteration change of an affine guard expression, when every
/// contributing update step is a literal.
fn atom_slope(
    coefs: &BTreeMap<SymVar, i128>,
    updates: &BTreeMap<String, Update>,
) -> Result<Option<i128>, Failure> {
    let mut slope: i128 = 0;
    for (var, c) in coefs {
        if *c == 0 {
            continue;
        }
        let SymVar::Pre(name) = var else {
            return Ok(None);
        };
        match updates.get(name) {
            None => {}
            Some(Update::Shift(delta)) => match delta {
                SymExpr::Int(d) => slope += c * d,
                _ => return Ok(None),
            },
            Some(Update::Fixed(_)) => {
                return Err(unknown(format!(
                    "{name} is reset inside the loop and guards it"
                )))
            }
        }
    }
    Ok(Some(slope))
}

/// First iteration count at which `e op 0` fails, for per-iteration slope
/// `d` of `e`. Entry guarantees the atom holds at count zero.
fn first_failure(op: CmpOp, e: SymExpr, d: i128) -> AtomPlan {
    match op {
        CmpOp::Lt => {
            if d <= 0 {
                AtomPlan::Never
            } else {
                AtomPlan::At(SymExpr::ceil_div(sym::neg(e), d).normalize())
            }
        }
        CmpOp::Le => {
            if d <= 0 {
                AtomPlan::Never
            } else {
                AtomPlan::At(
                    SymExpr::ceil_div(sym::sub(sym::int(1), e), d).normalize(),
                )
            }
        }
        CmpOp::Gt => first_failure(CmpOp::Lt, sym::neg(e).normalize(), -d),
        CmpOp::Ge => first_failure(CmpOp::Le, sym::neg(e).normalize(), -d),
        CmpOp::Eq => {
            if d == 0 {
                AtomPlan::Never
            } else {
                AtomPlan::At(sym::int(1))
            }
        }
        CmpOp::Ne => {
            if d == 0 {
                AtomPlan::Never
            } else {
                let hit = SymExpr::div(sym::neg(e.clone()), sym::int(d)).normalize();
                let guard = vec![
                    sym::cmp(
                        CmpOp::Eq,
                        SymExpr::modulo(sym::neg(e), sym::int(d.abs())),
                        sym::int(0),
                    )
                    .normalize(),
                    sym::cmp(CmpOp::Ge, hit.clone(), sym::int(1)).normalize(),
                ];
                let otherwise =
                    SymExpr::Not(Box::new(SymExpr::And(guard.clone()))).normalize();
                AtomPlan::Conditional {
                    guard,
                    at: hit,
                    otherwise,
                }
            }
        }
    }
}

fn plan_atom(atom: &SymExpr, updates: &BTreeMap<String, Update>) -> Result<AtomPlan, Failure> {
    match atom.normalize() {
        SymExpr::Bool(_) => Ok(AtomPlan::Never),
        SymExpr::Cmp(op, l, r) => {
            let e = sym::sub(*l, *r).normalize();
            let Some((coefs, _)) = e.as_affine() else {
                return Ok(AtomPlan::Opaque);
            };
            match atom_slope(&coefs, updates)? {
                Some(d) => Ok(first_failure(op, e, d)),
                None => Ok(AtomPlan::Opaque),
            }
        }
        _ => Ok(AtomPlan::Opaque),
    }
}

/// Guard atoms at iteration N, for the implicit count form.
fn step_atoms(cond: &[SymExpr], updates: &BTreeMap<String, Update>) -> Vec<SymExpr> {
    let mut map = BTreeMap::new();
    for (v, upd) in updates {
        if let Update::Shift(delta) = upd {
            map.insert(
                v.clone(),
                sym::add(vec![sym::pre(v), sym::mul(vec![sym::n(), delta.clone()])]),
            );
        }
    }
    cond.iter().map(|a| a.subst_pre(&map).normalize()).collect()
}

/// Exit values after N iterations.
fn post_map(updates: &BTreeMap<String, Update>) -> BTreeMap<String, SymExpr> {
    let mut post = BTreeMap::new();
    for (v, upd) in updates {
        let e = match upd {
            Update::Shift(delta) => sym::add(vec![
                sym::pre(v),
                sym::mul(vec![sym::n(), delta.clone()]),
            ])
            .normalize(),
            Update::Fixed(e) => e.clone(),
        };
        if e != sym::pre(v) {
            post.insert(v.clone(), e);
        }
    }
    post
}

const MAX_CONDITIONAL_ATOMS: usize = 4;

pub fn build(sp: &crate::spath::SPath) -> Result<AffineStage, Failure> {
    let updates = classify_updates(&sp.op)?;

    let mut plans = Vec::new();
    let mut opaque = false;
    for atom in &sp.cond {
        match plan_atom(atom, &updates)? {
            AtomPlan::Opaque => {
                opaque = true;
                break;
            }
            p => plans.push(p),
        }
    }
    let conditional_count = plans
        .iter()
        .filter(|p| matches!(p, AtomPlan::Conditional { .. }))
        .count();

    let count = if opaque || conditional_count > MAX_CONDITIONAL_ATOMS {
        Count::Implicit {
            step: step_atoms(&sp.cond, &updates),
        }
    } else {
        Count::Closed {
            cases: split_cases(&plans),
        }
    };

    Ok(AffineStage {
        path: sp.id,
        enter: sp.cond.clone(),
        post: post_map(&updates),
        count,
    })
}

/// Expands conditional atoms and splits on which candidate count is the
/// minimum. Earlier candidates win ties, keeping the cases disjoint.
fn split_cases(plans: &[AtomPlan]) -> Vec<CountCase> {
    let mut cases = Vec::new();
    let conditionals: Vec<&AtomPlan> = plans
        .iter()
        .filter(|p| matches!(p, AtomPlan::Conditional { .. }))
        .collect();
    let masks = 1usize << conditionals.len();
    for mask in 0..masks {
        let mut guards = Vec::new();
        let mut finite: Vec<SymExpr> = Vec::new();
        let mut enabled = 0;
        for p in plans {
            match p {
                AtomPlan::Never => {}
                AtomPlan::At(f) => finite.push(f.clone()),
                AtomPlan::Conditional {
                    guard,
                    at,
                    otherwise,
                } => {
                    let on = mask & (1 << enabled) != 0;
                    enabled += 1;
                    if on {
                        guards.extend(guard.iter().cloned());
                        finite.push(at.clone());
                    } else {
                        guards.push(otherwise.clone());
                    }
                }
                AtomPlan::Opaque => unreachable!("opaque atoms take the implicit form"),
            }
        }
        if finite.is_empty() {
            cases.push(CountCase { guards, n: None });
            continue;
        }
        for (k, f) in finite.iter().enumerate() {
            let mut g = guards.clone();
            for (j, other) in finite.iter().enumerate() {
                if j < k {
                    g.push(sym::cmp(CmpOp::Lt, f.clone(), other.clone()).normalize());
                } else if j > k {
                    g.push(sym::cmp(CmpOp::Le, f.clone(), other.clone()).normalize());
                }
            }
            cases.push(CountCase {
                guards: g,
                n: Some(f.clone()),
            });
        }
    }
    cases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::spath::{enumerate_spaths, DEFAULT_MAX_PATHS};
    use crate::summarize::eval_int_state;

    fn stage_of(src: &str) -> Result<AffineStage, Failure> {
        let p = parse(src).expect("test program parses");
        let lp = enumerate_spaths(&p, crate::frontend::LoopId(0), DEFAULT_MAX_PATHS).unwrap();
        build(&lp.paths[0])
    }

    fn eval_count(stage: &AffineStage, state: &[(&str, i128)]) -> Option<i128> {
        let env: std::collections::BTreeMap<String, i128> = state
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let Count::Closed { cases } = &stage.count else {
            panic!("expected a closed count");
        };
        for case in cases {
            let hit = case
                .guards
                .iter()
                .all(|g| super::super::eval_bool_state(g, &env, None).unwrap());
            if hit {
                return case.n.as_ref().map(|n| eval_int_state(n, &env, None).unwrap());
            }
        }
        panic!("no count case matched");
    }

    #[test]
    fn counting_loop_count_is_a_ceiling_division() {
        let stage = stage_of("proc main { while (i < 100) { i = i + 3; } }").unwrap();
        assert_eq!(eval_count(&stage, &[("i", 0)]), Some(34));
        assert_eq!(eval_count(&stage, &[("i", 99)]), Some(1));
        let post = stage.post.get("i").unwrap().to_string();
        assert_eq!(post, "i0 + 3*N");
    }

    #[test]
    fn hundred_step_decrement_count_divides_out() {
        let stage = stage_of("proc main { while (y >= 100) { y = y - 100; } }").unwrap();
        let Count::Closed { cases } = &stage.count else {
            panic!("expected closed");
        };
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].n.as_ref().unwrap().to_string(), "y0 / 100");
        assert_eq!(eval_count(&stage, &[("y", 250)]), Some(2));
        assert_eq!(eval_count(&stage, &[("y", 100)]), Some(1));
    }

    #[test]
    fn two_guards_split_on_which_fails_first() {
        let stage =
            stage_of("proc main { while (i < 10 && j < 7) { i = i + 1; j = j + 2; } }")
                .unwrap();
        assert_eq!(eval_count(&stage, &[("i", 0), ("j", 0)]), Some(4));
        assert_eq!(eval_count(&stage, &[("i", 8), ("j", 0)]), Some(2));
        assert_eq!(eval_count(&stage, &[("i", 9), ("j", 6)]), Some(1));
    }

    #[test]
    fn inequality_guard_splits_on_divisibility() {
        let stage = stage_of("proc main { while (x != 7) { x = x + 2; } }").unwrap();
        assert_eq!(eval_count(&stage, &[("x", 1)]), Some(3));
        // Parity misses the bound: the loop runs forever.
        assert_eq!(eval_count(&stage, &[("x", 0)]), None);
        assert_eq!(eval_count(&stage, &[("x", 9)]), None);
    }

    #[test]
    fn downward_guard_never_fails() {
        let stage = stage_of("proc main { while (x < 5) { x = x - 1; } }").unwrap();
        assert_eq!(eval_count(&stage, &[("x", 0)]), None);
    }

    #[test]
    fn symbolic_step_takes_the_implicit_form() {
        let stage = stage_of("// input b\n// input d\nproc main { while (x < b) { x = x + d; } }")
            .unwrap();
        let Count::Implicit { step } = &stage.count else {
            panic!("expected implicit");
        };
        assert_eq!(step.len(), 1);
        assert_eq!(step[0].to_string(), "d0*N + x0 < b0");
    }

    #[test]
    fn coupled_updates_are_rejected() {
        let err = stage_of("proc main { while (x > 0) { x = y; y = x - 1; } }").unwrap_err();
        assert_eq!(err.kind, FailureKind::CoupledRecurrence);
    }

    #[test]
    fn geometric_updates_have_no_closed_form() {
        let err = stage_of("proc main { while (x < 100) { x = 2 * x; } }").unwrap_err();
        assert_eq!(err.kind, FailureKind::SolverUnknown);
        assert!(err.detail.contains("scales"));
    }

    #[test]
    fn reset_feeding_the_guard_is_rejected() {
        let err = stage_of("proc main { while (x < 10) { x = 3; } }").unwrap_err();
        assert_eq!(err.kind, FailureKind::SolverUnknown);
        assert!(err.detail.contains("reset"));
    }

    #[test]
    fn reset_of_an_output_variable_is_fine() {
        let stage = stage_of("proc main { while (i < 4) { i = i + 1; seen = 1; } }").unwrap();
        assert_eq!(stage.post.get("seen").unwrap().to_string(), "1");
        assert_eq!(eval_count(&stage, &[("i", 0), ("seen", 0)]), Some(4));
    }
}
