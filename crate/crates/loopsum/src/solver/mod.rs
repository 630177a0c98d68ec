//! Satisfiability checking for symbolic constraint sets.
//!
//! Queries are conjunctions of boolean expressions over integer variables.
//! Disjunctions are expanded into alternatives up front (bounded), each
//! alternative goes through the built-in linear backend, and an external
//! SMT-LIB process can be configured as the primary backend with the
//! built-in one as fallback.

pub mod linear;
pub mod smt;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use crate::sym::{CmpOp, SymExpr, SymVar};

pub use linear::Tier;

pub type Model = BTreeMap<SymVar, i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    /// Wall-clock limit hit.
    Timeout,
    /// Search node budget exhausted.
    Budget,
    /// Search space exhausted only under the artificial clamp.
    Incomplete,
    /// Constraints outside the supported fragment.
    Opaque,
    /// External backend failed or answered unknown.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Model),
    Unsat,
    Unknown(UnknownReason),
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, SolveResult::Unsat)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Wall-clock limit per `check` call, milliseconds.
    pub timeout_ms: u64,
    /// Node budget for the built-in search.
    pub node_budget: u64,
    /// External SMT-LIB solver command; when set it is tried first.
    pub smt_cmd: Option<String>,
    /// Cap on disjunction alternatives expanded per query.
    pub max_alternatives: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            timeout_ms: 2000,
            node_budget: 200_000,
            smt_cmd: None,
            max_alternatives: 64,
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct SolverStats {
    pub queries: u64,
    pub cache_hits: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub external_calls: u64,
}

pub struct Solver {
    pub config: SolverConfig,
    cache: HashMap<String, SolveResult>,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinimizeOutcome {
    Min { value: i128, model: Model },
    Unsat,
    Unknown(UnknownReason),
}

impl Solver {
    pub fn new(config: SolverConfig) -> Self {
        Solver {
            config,
            cache: HashMap::new(),
            stats: SolverStats::default(),
        }
    }

    /// Decides satisfiability of the conjunction of `atoms`.
    pub fn check(&mut self, atoms: &[SymExpr]) -> SolveResult {
        self.check_with(atoms, None)
    }

    /// True only when the conjunction provably has no integer solution.
    pub fn is_definitely_unsat(&mut self, atoms: &[SymExpr]) -> bool {
        self.check(atoms).is_unsat()
    }

    /// Smallest value of `var` satisfying the conjunction, found by the
    /// refinement loop: solve, then require `var` below the model value,
    /// until unsatisfiable.
    pub fn minimize(&mut self, atoms: &[SymExpr], var: &SymVar) -> MinimizeOutcome {
        let mut best: Option<(i128, Model)> = None;
        let mut query = atoms.to_vec();
        for _ in 0..64 {
            match self.check_with(&query, Some(var)) {
                SolveResult::Sat(m) => {
                    let Some(&v) = m.get(var) else {
                        return MinimizeOutcome::Unknown(UnknownReason::Opaque);
                    };
                    best = Some((v, m));
                    query = atoms.to_vec();
                    query.push(SymExpr::cmp(
                        CmpOp::Le,
                        SymExpr::Var(var.clone()),
                        SymExpr::Int(v - 1),
                    ));
                }
                SolveResult::Unsat => {
                    return match best {
                        Some((value, model)) => MinimizeOutcome::Min { value, model },
                        None => MinimizeOutcome::Unsat,
                    };
                }
                SolveResult::Unknown(r) => return MinimizeOutcome::Unknown(r),
            }
        }
        MinimizeOutcome::Unknown(UnknownReason::Budget)
    }

    fn check_with(&mut self, atoms: &[SymExpr], prefer_low: Option<&SymVar>) -> SolveResult {
        self.stats.queries += 1;
        let key = cache_key(atoms, prefer_low);
        if let Some(hit) = self.cache.get(&key) {
            self.stats.cache_hits += 1;
            return hit.clone();
        }
        let result = self.check_uncached(atoms, prefer_low);
        match &result {
            SolveResult::Sat(_) => self.stats.sat += 1,
            SolveResult::Unsat => self.stats.unsat += 1,
            SolveResult::Unknown(_) => self.stats.unknown += 1,
        }
        self.cache.insert(key, result.clone());
        result
    }

    fn check_uncached(&mut self, atoms: &[SymExpr], prefer_low: Option<&SymVar>) -> SolveResult {
        let deadline = Instant::now() + Duration::from_millis(self.config.timeout_ms);

        if let Some(cmd) = self.config.smt_cmd.clone() {
            self.stats.external_calls += 1;
            match smt::check(&cmd, atoms, deadline) {
                smt::SmtOutcome::Sat(model) => {
                    if validate(atoms, &model) {
                        return SolveResult::Sat(model);
                    }
                    // A model that fails validation means the translation
                    // and the solver disagree; fall through to the
                    // built-in backend rather than guessing.
                }
                smt::SmtOutcome::Unsat => return SolveResult::Unsat,
                smt::SmtOutcome::Unknown => {}
            }
        }

        let normalized: Vec<SymExpr> = atoms.iter().map(|a| a.normalize()).collect();
        let alternatives = match dnf(&normalized, self.config.max_alternatives) {
            Ok(alts) => alts,
            Err(()) => return SolveResult::Unknown(UnknownReason::Opaque),
        };
        if alternatives.is_empty() {
            // Some atom was literally false.
            return SolveResult::Unsat;
        }

        let mut worst: Option<UnknownReason> = None;
        for alt in &alternatives {
            let lowered = match linear::lower(alt) {
                Ok(l) => l,
                Err(_) => {
                    worst = Some(UnknownReason::Opaque);
                    continue;
                }
            };
            let search = linear::Search {
                deadline,
                node_budget: self.config.node_budget,
                prefer_low,
            };
            match linear::solve(&lowered, &search) {
                SolveResult::Sat(m) => return SolveResult::Sat(m),
                SolveResult::Unsat => {}
                SolveResult::Unknown(r) => worst = Some(r),
            }
        }
        match worst {
            None => SolveResult::Unsat,
            Some(r) => SolveResult::Unknown(r),
        }
    }
}

fn validate(atoms: &[SymExpr], model: &Model) -> bool {
    atoms.iter().all(|a| a.eval_bool(model).unwrap_or(false))
}

fn cache_key(atoms: &[SymExpr], prefer_low: Option<&SymVar>) -> String {
    let mut parts: Vec<String> = atoms.iter().map(|a| a.normalize().to_string()).collect();
    parts.sort();
    let mut key = parts.join(" & ");
    if let Some(v) = prefer_low {
        key.push_str(" |min ");
        key.push_str(&v.to_string());
    }
    key
}

/// Negation normal form: pushes `!` down to comparisons.
fn nnf(e: &SymExpr, neg: bool) -> Result<SymExpr, ()> {
    Ok(match e {
        SymExpr::Not(inner) => nnf(inner, !neg)?,
        SymExpr::And(xs) => {
            let parts: Vec<SymExpr> = xs.iter().map(|x| nnf(x, neg)).collect::<Result<_, _>>()?;
            if neg {
                SymExpr::Or(parts)
            } else {
                SymExpr::And(parts)
            }
        }
        SymExpr::Or(xs) => {
            let parts: Vec<SymExpr> = xs.iter().map(|x| nnf(x, neg)).collect::<Result<_, _>>()?;
            if neg {
                SymExpr::And(parts)
            } else {
                SymExpr::Or(parts)
            }
        }
        SymExpr::Cmp(op, l, r) => {
            let op = if neg { op.negate() } else { *op };
            SymExpr::Cmp(op, l.clone(), r.clone())
        }
        SymExpr::Bool(b) => SymExpr::Bool(b ^ neg),
        // Arithmetic in boolean position.
        _ => return Err(()),
    })
}

/// Expands a conjunction into alternative plain conjunctions (no `||`),
/// capped. An empty result means the input was contradictory at the
/// propositional level.
fn dnf(atoms: &[SymExpr], cap: usize) -> Result<Vec<Vec<SymExpr>>, ()> {
    fn alts(e: &SymExpr, cap: usize) -> Result<Vec<Vec<SymExpr>>, ()> {
        Ok(match e {
            SymExpr::Bool(true) => vec![Vec::new()],
            SymExpr::Bool(false) => Vec::new(),
            SymExpr::Cmp(..) => vec![vec![e.clone()]],
            SymExpr::And(xs) => {
                let mut acc: Vec<Vec<SymExpr>> = vec![Vec::new()];
                for x in xs {
                    let branches = alts(x, cap)?;
                    let mut next = Vec::new();
                    for a in &acc {
                        for b in &branches {
                            let mut row = a.clone();
                            row.extend(b.iter().cloned());
                            next.push(row);
                            if next.len() > cap {
                                return Err(());
                            }
                        }
                    }
                    acc = next;
                }
                acc
            }
            SymExpr::Or(xs) => {
                let mut acc = Vec::new();
                for x in xs {
                    acc.extend(alts(x, cap)?);
                    if acc.len() > cap {
                        return Err(());
                    }
                }
                acc
            }
            _ => return Err(()),
        })
    }

    let mut acc: Vec<Vec<SymExpr>> = vec![Vec::new()];
    for atom in atoms {
        let e = nnf(atom, false)?;
        let branches = alts(&e, cap)?;
        let mut next = Vec::new();
        for a in &acc {
            for b in &branches {
                let mut row = a.clone();
                row.extend(b.iter().cloned());
                next.push(row);
                if next.len() > cap {
                    return Err(());
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::{cmp, int, pre};

    fn solver() -> Solver {
        Solver::new(SolverConfig::default())
    }

    #[test]
    fn conjunction_and_cache() {
        let mut s = solver();
        let atoms = vec![
            cmp(CmpOp::Ge, pre("x"), int(0)),
            cmp(CmpOp::Lt, SymExpr::add(vec![pre("x"), int(7)]), int(5)),
        ];
        assert!(s.check(&atoms).is_unsat());
        assert!(s.check(&atoms).is_unsat());
        assert_eq!(s.stats.queries, 2);
        assert_eq!(s.stats.cache_hits, 1);
    }

    #[test]
    fn disjunction_splits_into_alternatives() {
        let mut s = solver();
        // (x < 0 || x > 10) && 0 <= x <= 10 is unsat.
        let atoms = vec![
            SymExpr::Or(vec![
                cmp(CmpOp::Lt, pre("x"), int(0)),
                cmp(CmpOp::Gt, pre("x"), int(10)),
            ]),
            cmp(CmpOp::Le, int(0), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(10)),
        ];
        assert!(s.check(&atoms).is_unsat());

        // Loosening one bound makes the upper branch feasible.
        let atoms = vec![
            SymExpr::Or(vec![
                cmp(CmpOp::Lt, pre("x"), int(0)),
                cmp(CmpOp::Gt, pre("x"), int(10)),
            ]),
            cmp(CmpOp::Le, int(0), pre("x")),
        ];
        match s.check(&atoms) {
            SolveResult::Sat(m) => assert!(m[&SymVar::pre("x")] > 10),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn negation_is_pushed_through() {
        let mut s = solver();
        // !(x >= 3) && x == 5
        let atoms = vec![
            SymExpr::Not(Box::new(cmp(CmpOp::Ge, pre("x"), int(3)))),
            cmp(CmpOp::Eq, pre("x"), int(5)),
        ];
        assert!(s.check(&atoms).is_unsat());
    }

    #[test]
    fn minimize_finds_least_iteration_count() {
        let mut s = solver();
        let n = SymVar::Fresh("n#".into());
        let nv = SymExpr::Var(n.clone());
        // x0 = -5, smallest n >= 1 with x0 + 2n >= 0 is 3.
        let atoms = vec![
            cmp(CmpOp::Eq, pre("x"), int(-5)),
            cmp(CmpOp::Ge, nv.clone(), int(1)),
            cmp(
                CmpOp::Ge,
                SymExpr::add(vec![pre("x"), SymExpr::mul(vec![int(2), nv])]),
                int(0),
            ),
        ];
        match s.minimize(&atoms, &n) {
            MinimizeOutcome::Min { value, .. } => assert_eq!(value, 3),
            other => panic!("expected min, got {other:?}"),
        }
    }

    #[test]
    fn minimize_on_unsat_system() {
        let mut s = solver();
        let n = SymVar::Fresh("n#".into());
        let atoms = vec![
            cmp(CmpOp::Ge, SymExpr::Var(n.clone()), int(1)),
            cmp(CmpOp::Le, SymExpr::Var(n.clone()), int(0)),
        ];
        assert_eq!(s.minimize(&atoms, &n), MinimizeOutcome::Unsat);
    }

    #[test]
    fn minimality_is_provable_by_refinement() {
        // After minimize returns v, the system plus `n < v` must be unsat;
        // this is the exact check the verification harness replays.
        let mut s = solver();
        let n = SymVar::Fresh("n#".into());
        let nv = SymExpr::Var(n.clone());
        let atoms = vec![
            cmp(CmpOp::Ge, nv.clone(), int(1)),
            cmp(
                CmpOp::Ge,
                SymExpr::add(vec![int(-9), SymExpr::mul(vec![int(4), nv.clone()])]),
                int(0),
            ),
        ];
        let MinimizeOutcome::Min { value, .. } = s.minimize(&atoms, &n) else {
            panic!("expected a minimum");
        };
        assert_eq!(value, 3); // ceil(9/4)
        let mut refined = atoms.clone();
        refined.push(cmp(CmpOp::Lt, SymExpr::Var(n.clone()), int(value)));
        assert!(s.check(&refined).is_unsat());
    }
}
