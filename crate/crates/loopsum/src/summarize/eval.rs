//! Concrete evaluation of loop summaries and differential comparison
//! against the reference interpreter. Cases are tried in order; a case
//! applies when every stage of its route is entered by the running state
//! and the guard fails afterwards.

use std::collections::BTreeMap;

use crate::frontend::{LoopId, Program, Stmt};
use crate::oracle::{self, OracleConfig, RunStatus};
use crate::solver::{MinimizeOutcome, Solver};
use crate::spath::expr_to_sym;
use crate::sym::{self, CmpOp, SymExpr, SymVar};

use super::affine::Count;
use super::periodic::{self, StageRun};
use super::{
    eval_bool_state, eval_int_state, LoopSummary, ProgramSummary, StagePlan, SummarizeConfig,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoopEval {
    /// A case applied; `count` is the number of body executions.
    Finished { case: usize, count: u128 },
    /// A case applied and showed the loop never exits from here.
    Nonterminating { case: usize },
    /// No case covers the entry state.
    NoCase,
    Abort(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalStatus {
    Done,
    Nonterminating { loop_id: LoopId },
    NoCase { loop_id: LoopId },
    Abort { loop_id: Option<LoopId>, message: String },
}

#[derive(Debug, Clone)]
pub struct EvalRun {
    pub status: EvalStatus,
    pub state: BTreeMap<String, i128>,
    /// Body executions per summarized loop.
    pub loop_counts: BTreeMap<LoopId, u128>,
}

fn atoms_hold(atoms: &[SymExpr], s: &BTreeMap<String, i128>) -> Result<bool, String> {
    for a in atoms {
        match eval_bool_state(a, s, None) {
            Ok(true) => {}
            Ok(false) => return Ok(false),
            Err(e) => return Err(format!("cannot evaluate guard `{a}`: {e}")),
        }
    }
    Ok(true)
}

/// Applies an update map in parallel: every right side reads `s`.
fn apply_map(
    op: &BTreeMap<String, SymExpr>,
    s: &BTreeMap<String, i128>,
    n: Option<i128>,
) -> Result<BTreeMap<String, i128>, String> {
    let mut new = s.clone();
    for (v, e) in op {
        match eval_int_state(e, s, n) {
            Ok(val) => {
                new.insert(v.clone(), val);
            }
            Err(err) => return Err(format!("cannot evaluate update of {v}: {err}")),
        }
    }
    Ok(new)
}

/// Runs one loop summary on a concrete state. The first case whose route
/// the state actually follows wins; on success the state is advanced to
/// the loop exit.
pub fn eval_loop(
    summary: &LoopSummary,
    state: &mut BTreeMap<String, i128>,
    solver: &mut Solver,
    fuel: u64,
) -> LoopEval {
    'cases: for (ci, case) in summary.cases.iter().enumerate() {
        let mut s = state.clone();
        let mut count: u128 = 0;
        let mut fuel_left = fuel;
        for step in &case.steps {
            let plan = summary.plans[&step.scc]
                .as_ref()
                .expect("composed stages have plans");
            match plan {
                StagePlan::Once(st) => {
                    match atoms_hold(&st.enter, &s) {
                        Ok(true) => {}
                        Ok(false) => continue 'cases,
                        Err(m) => return LoopEval::Abort(m),
                    }
                    s = match apply_map(&st.op, &s, None) {
                        Ok(s) => s,
                        Err(m) => return LoopEval::Abort(m),
                    };
                    count += 1;
                }
                StagePlan::Affine(st) => {
                    match atoms_hold(&st.enter, &s) {
                        Ok(true) => {}
                        Ok(false) => continue 'cases,
                        Err(m) => return LoopEval::Abort(m),
                    }
                    let n = match &st.count {
                        Count::Closed { cases } => {
                            let cc = &cases[step.alt];
                            match atoms_hold(&cc.guards, &s) {
                                Ok(true) => {}
                                Ok(false) => continue 'cases,
                                Err(m) => return LoopEval::Abort(m),
                            }
                            let Some(expr) = &cc.n else {
                                return LoopEval::Nonterminating { case: ci };
                            };
                            match eval_int_state(expr, &s, None) {
                                Ok(n) => n,
                                Err(e) => {
                                    return LoopEval::Abort(format!(
                                        "cannot evaluate stage count: {e}"
                                    ));
                                }
                            }
                        }
                        Count::Implicit { step: atoms } => {
                            match implicit_count(atoms, &s, solver) {
                                ImplicitCount::At(n) => n,
                                ImplicitCount::Never => {
                                    return LoopEval::Nonterminating { case: ci };
                                }
                                ImplicitCount::Unknown => {
                                    return LoopEval::Abort(
                                        "solver could not bound an implicit stage".into(),
                                    );
                                }
                            }
                        }
                    };
                    if n <= 0 {
                        return LoopEval::Abort(format!("stage count {n} is not positive"));
                    }
                    s = match apply_map(&st.post, &s, Some(n)) {
                        Ok(s) => s,
                        Err(m) => return LoopEval::Abort(m),
                    };
                    count += n as u128;
                }
                StagePlan::Periodic(st) => match periodic::run_stage(st, &mut s, &mut fuel_left) {
                    StageRun::Departed { steps } => {
                        if steps == 0 {
                            continue 'cases;
                        }
                        count += steps;
                    }
                    StageRun::Nonterminating => {
                        return LoopEval::Nonterminating { case: ci };
                    }
                    StageRun::Abort(m) => return LoopEval::Abort(m),
                },
            }
        }
        match eval_bool_state(&summary.guard, &s, None) {
            Ok(false) => {
                *state = s;
                return LoopEval::Finished { case: ci, count };
            }
            Ok(true) => continue 'cases,
            Err(e) => return LoopEval::Abort(format!("cannot evaluate loop guard: {e}")),
        }
    }
    LoopEval::NoCase
}

enum ImplicitCount {
    At(i128),
    Never,
    Unknown,
}

/// Count of a stage whose exit has no entry-value expression: bind the
/// concrete entry state and ask the solver for the least N at which the
/// stage condition first fails.
fn implicit_count(
    atoms: &[SymExpr],
    s: &BTreeMap<String, i128>,
    solver: &mut Solver,
) -> ImplicitCount {
    let bound: BTreeMap<String, SymExpr> = s.iter().map(|(k, v)| (k.clone(), sym::int(*v))).collect();
    let nv = SymExpr::Var(SymVar::N);
    let last = sym::sub(nv.clone(), sym::int(1));
    let mut q = vec![sym::cmp(CmpOp::Ge, nv.clone(), sym::int(1))];
    for a in atoms {
        q.push(a.subst_n(&last).subst_pre(&bound).normalize());
    }
    let failed = sym::not(sym::and(atoms.iter().map(|a| a.subst_n(&nv)).collect()));
    q.push(failed.subst_pre(&bound).normalize());
    match solver.minimize(&q, &SymVar::N) {
        MinimizeOutcome::Min { value, .. } => ImplicitCount::At(value),
        MinimizeOutcome::Unsat => ImplicitCount::Never,
        MinimizeOutcome::Unknown(_) => ImplicitCount::Unknown,
    }
}

/// Runs a summarized program on concrete inputs, replacing every loop by
/// its summary. Assertions are ignored; the oracle owns those.
pub fn eval_program(
    ps: &ProgramSummary,
    inputs: &BTreeMap<String, i128>,
    cfg: &SummarizeConfig,
    solver: &mut Solver,
) -> EvalRun {
    let program = &ps.program;
    let mut state: BTreeMap<String, i128> = BTreeMap::new();
    for name in program.assigned_vars() {
        state.insert(name, 0);
    }
    for decl in &program.inputs {
        state.insert(decl.name.clone(), 0);
    }
    for (name, value) in inputs {
        state.insert(name.clone(), *value);
    }
    let mut counts = BTreeMap::new();
    let status = walk(&program.body, ps, &mut state, &mut counts, cfg, solver);
    EvalRun {
        status,
        state,
        loop_counts: counts,
    }
}

fn walk(
    stmts: &[Stmt],
    ps: &ProgramSummary,
    state: &mut BTreeMap<String, i128>,
    counts: &mut BTreeMap<LoopId, u128>,
    cfg: &SummarizeConfig,
    solver: &mut Solver,
) -> EvalStatus {
    for s in stmts {
        match s {
            Stmt::Assign { target, value, .. } => {
                let e = expr_to_sym(value, &BTreeMap::new());
                match eval_int_state(&e, state, None) {
                    Ok(v) => {
                        state.insert(target.clone(), v);
                    }
                    Err(err) => {
                        return EvalStatus::Abort {
                            loop_id: None,
                            message: format!("cannot evaluate assignment to {target}: {err}"),
                        };
                    }
                }
            }
            Stmt::Assert { .. } => {}
            Stmt::Break { .. } => {
                return EvalStatus::Abort {
                    loop_id: None,
                    message: "break survived canonicalization".into(),
                };
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let c = expr_to_sym(cond, &BTreeMap::new());
                let taken = match eval_bool_state(&c, state, None) {
                    Ok(b) => b,
                    Err(err) => {
                        return EvalStatus::Abort {
                            loop_id: None,
                            message: format!("cannot evaluate branch condition: {err}"),
                        };
                    }
                };
                let branch = if taken { then_branch } else { else_branch };
                let status = walk(branch, ps, state, counts, cfg, solver);
                if status != EvalStatus::Done {
                    return status;
                }
            }
            Stmt::While { id, .. } => {
                let Some(ls) = ps.loop_summary(*id) else {
                    return EvalStatus::Abort {
                        loop_id: Some(*id),
                        message: "loop has no summary".into(),
                    };
                };
                if let Some(f) = &ls.failure {
                    return EvalStatus::Abort {
                        loop_id: Some(*id),
                        message: format!("loop summary failed: {f}"),
                    };
                }
                match eval_loop(ls, state, solver, cfg.fuel) {
                    LoopEval::Finished { count, .. } => {
                        counts.insert(*id, count);
                    }
                    LoopEval::Nonterminating { .. } => {
                        return EvalStatus::Nonterminating { loop_id: *id };
                    }
                    LoopEval::NoCase => return EvalStatus::NoCase { loop_id: *id },
                    LoopEval::Abort(message) => {
                        return EvalStatus::Abort {
                            loop_id: Some(*id),
                            message,
                        };
                    }
                }
            }
        }
    }
    EvalStatus::Done
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub inputs: BTreeMap<String, i128>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DiffReport {
    /// Inputs drawn.
    pub inputs: usize,
    /// Inputs compared; the rest hit an assertion or overflow under the
    /// oracle and prove nothing about the summary.
    pub compared: usize,
    pub matched: usize,
    /// First few disagreements, for diagnostics.
    pub mismatches: Vec<Mismatch>,
}

impl DiffReport {
    pub fn all_matched(&self) -> bool {
        self.matched == self.compared
    }

    pub fn percent(&self) -> f64 {
        if self.compared == 0 {
            100.0
        } else {
            self.matched as f64 * 100.0 / self.compared as f64
        }
    }
}

const MISMATCH_DETAIL_CAP: usize = 8;

/// Runs the oracle and the summary evaluator on seeded random inputs and
/// compares final states, loop counts, and termination behaviour.
pub fn differential(
    program: &Program,
    ps: &ProgramSummary,
    count: usize,
    seed: u64,
    cfg: &SummarizeConfig,
) -> DiffReport {
    let samples = oracle::sample_inputs(program, count, seed);
    let ocfg = OracleConfig {
        fuel: cfg.fuel,
        seed,
    };
    let mut solver = Solver::new(cfg.solver.clone());
    let mut visible: Vec<String> = program.inputs.iter().map(|d| d.name.clone()).collect();
    visible.extend(program.assigned_vars());
    visible.sort();
    visible.dedup();
    let summarized: Vec<LoopId> = ps.loops.iter().map(|l| l.loop_id).collect();

    let mut report = DiffReport {
        inputs: samples.len(),
        compared: 0,
        matched: 0,
        mismatches: Vec::new(),
    };
    for inp in samples {
        let oracle_run = oracle::interpret(program, &inp, &ocfg);
        match oracle_run.status {
            RunStatus::AssertFailed { .. } | RunStatus::Overflow { .. } => continue,
            RunStatus::Done | RunStatus::FuelExhausted => {}
        }
        report.compared += 1;
        let eval_run = eval_program(ps, &inp, cfg, &mut solver);
        match check_agreement(&oracle_run, &eval_run, &visible, &summarized) {
            Ok(()) => report.matched += 1,
            Err(reason) => {
                if report.mismatches.len() < MISMATCH_DETAIL_CAP {
                    report.mismatches.push(Mismatch { inputs: inp, reason });
                }
            }
        }
    }
    report
}

fn check_agreement(
    oracle_run: &oracle::RunResult,
    eval_run: &EvalRun,
    visible: &[String],
    summarized: &[LoopId],
) -> Result<(), String> {
    match (&oracle_run.status, &eval_run.status) {
        (RunStatus::FuelExhausted, EvalStatus::Nonterminating { .. }) => return Ok(()),
        (RunStatus::FuelExhausted, other) => {
            return Err(format!(
                "oracle ran out of fuel but the summary gave {other:?}"
            ));
        }
        (RunStatus::Done, EvalStatus::Done) => {}
        (RunStatus::Done, other) => {
            return Err(format!("oracle finished but the summary gave {other:?}"));
        }
        _ => unreachable!("assertion and overflow runs are filtered out"),
    }
    for name in visible {
        let want = oracle_run.state.get(name).copied().unwrap_or(0);
        let got = eval_run.state.get(name).copied().unwrap_or(0);
        if want != got {
            return Err(format!("{name}: oracle {want}, summary {got}"));
        }
    }
    for id in summarized {
        let want = oracle_run.loop_counts.get(id).copied().unwrap_or(0) as u128;
        let got = eval_run.loop_counts.get(id).copied().unwrap_or(0);
        if want != got {
            return Err(format!("loop {id} count: oracle {want}, summary {got}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::summarize::summarize_program;

    fn diff(src: &str, n: usize) -> DiffReport {
        let p = parse(src).expect("test program parses");
        let cfg = SummarizeConfig::default();
        let ps = summarize_program(&p, &cfg);
        for l in &ps.loops {
            assert!(l.succeeded(), "summary failed: {:?}", l.failure);
        }
        differential(&p, &ps, n, 42, &cfg)
    }

    #[test]
    fn counting_loop_matches_the_oracle_everywhere() {
        let r = diff(
            "// input x in [-80, 80]\nproc main { while (x < 10) { x = x + 1; } }",
            300,
        );
        assert_eq!(r.compared, 300);
        assert!(r.all_matched(), "{:?}", r.mismatches.first());
    }

    #[test]
    fn two_phase_loop_matches_the_oracle() {
        let r = diff(
            "// input x in [-60, 60]\n\
             proc main { while (x < 10) { if (x < 0) { x = x + 3; } else { x = x + 2; } } }",
            300,
        );
        assert!(r.all_matched(), "{:?}", r.mismatches.first());
    }

    #[test]
    fn oscillating_loop_matches_the_oracle() {
        let r = diff(
            "// input x in [-50, 50]\n// input i in [0, 100]\nproc main {\n\
             while (i < 100) {\n\
               if (x < 5) { x = x + 2; i = i + 3; } else { x = x - 5; i = i + 4; }\n\
             }\n}",
            300,
        );
        assert!(r.all_matched(), "{:?}", r.mismatches.first());
    }

    #[test]
    fn divergence_matches_fuel_exhaustion() {
        let r = diff(
            "// input x in [-20, 20]\nproc main { while (x != 7) { x = x + 2; } }",
            100,
        );
        assert!(r.all_matched(), "{:?}", r.mismatches.first());
    }

    #[test]
    fn break_loops_match_the_oracle() {
        let r = diff(
            "// input x in [-20, 20]\nproc main {\n\
             i = 0;\n\
             while (i < 10) { i = i + 1; if (x < i) { break; } }\n\
             }",
            200,
        );
        assert!(r.all_matched(), "{:?}", r.mismatches.first());
    }

    #[test]
    fn loop_evaluation_reports_the_matched_case() {
        let p = parse("// input x in [-80, 80]\nproc main { while (x < 10) { x = x + 1; } }")
            .unwrap();
        let cfg = SummarizeConfig::default();
        let ps = summarize_program(&p, &cfg);
        let ls = &ps.loops[0];
        let mut solver = Solver::new(cfg.solver.clone());

        let mut s: BTreeMap<String, i128> = [("x".to_string(), 3)].into();
        match eval_loop(ls, &mut s, &mut solver, cfg.fuel) {
            LoopEval::Finished { count, .. } => assert_eq!(count, 7),
            other => panic!("expected finish, got {other:?}"),
        }
        assert_eq!(s["x"], 10);

        let mut s: BTreeMap<String, i128> = [("x".to_string(), 64)].into();
        match eval_loop(ls, &mut s, &mut solver, cfg.fuel) {
            LoopEval::Finished { case, count } => {
                assert_eq!(case, 0);
                assert_eq!(count, 0);
            }
            other => panic!("expected skip, got {other:?}"),
        }
        assert_eq!(s["x"], 64);
    }
}
