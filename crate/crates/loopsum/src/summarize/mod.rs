//! Loop summaries. A loop's single-branch paths are grouped into the
//! strongly connected pieces of their jump graph; every piece gets a plan
//! (run-once, affine recurrence, or periodic orbit) and the acyclic routes
//! through the pieces are composed into guarded input/output cases.

pub mod affine;
pub mod compose;
pub mod eval;
pub mod nested;
pub mod oscillate;
pub mod periodic;

use std::collections::BTreeMap;
use std::fmt;

use crate::cfg::canonicalize;
use crate::frontend::{LoopId, Program, Stmt};
use crate::graph::{build_jump_graph, contract, Csg, JumpGraph};
use crate::solver::{Solver, SolverConfig};
use crate::spath::{enumerate_spaths, expr_to_sym, prune_paths, LoopPaths, SPathError,
                   DEFAULT_MAX_PATHS};
use crate::sym::{self, CmpOp, EvalError, SymExpr, SymValue, SymVar};

pub const DEFAULT_MAX_CASES: usize = 512;
pub const DEFAULT_MAX_INTERVAL_VALUES: u128 = 1_000_000;
pub const DEFAULT_EVAL_FUEL: u64 = 2_000_000;

/// Why a loop, or one of its components, has no summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureKind {
    /// Route or guard case product exceeded the configured cap.
    CaseExplosion,
    /// An update mixes variables so no single recurrence separates.
    CoupledRecurrence,
    /// An eliminated inner loop left a floor-division count in the outer
    /// recurrence, which has no inductive closed form.
    InductivenessTrapNested,
    /// The oscillating value set never closed under the configured caps.
    InfiniteOscillation,
    /// The solver gave up or the shape is outside every supported form.
    SolverUnknown,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FailureKind::CaseExplosion => "CASE_EXPLOSION",
            FailureKind::CoupledRecurrence => "COUPLED_RECURRENCE",
            FailureKind::InductivenessTrapNested => "INDUCTIVENESS_TRAP_NESTED",
            FailureKind::InfiniteOscillation => "INFINITE_OSCILLATION",
            FailureKind::SolverUnknown => "SOLVER_UNKNOWN",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub kind: FailureKind,
    pub detail: String,
}

impl Failure {
    pub fn new(kind: FailureKind, detail: impl Into<String>) -> Self {
        Failure {
            kind,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

/// Shape of one composed case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    ZeroOrder,
    OneOrder,
    HighOrderPeriodic,
    HighOrderPrephase,
    Composed,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::ZeroOrder => "ZERO_ORDER",
            CaseTag::OneOrder => "ONE_ORDER",
            CaseTag::HighOrderPeriodic => "HIGH_ORDER_PERIODIC",
            CaseTag::HighOrderPrephase => "HIGH_ORDER_PREPHASE",
            CaseTag::Composed => "COMPOSED",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct SummarizeConfig {
    pub max_paths: usize,
    pub max_cases: usize,
    pub max_interval_values: u128,
    pub fuel: u64,
    pub solver: SolverConfig,
}

impl Default for SummarizeConfig {
    fn default() -> Self {
        SummarizeConfig {
            max_paths: DEFAULT_MAX_PATHS,
            max_cases: DEFAULT_MAX_CASES,
            max_interval_values: DEFAULT_MAX_INTERVAL_VALUES,
            fuel: DEFAULT_EVAL_FUEL,
            solver: SolverConfig::default(),
        }
    }
}

/// Plan for a component that runs exactly once when entered.
#[derive(Debug, Clone)]
pub struct OnceStage {
    pub path: usize,
    pub enter: Vec<SymExpr>,
    pub op: BTreeMap<String, SymExpr>,
}

#[derive(Debug, Clone)]
pub enum StagePlan {
    Once(OnceStage),
    Affine(affine::AffineStage),
    Periodic(periodic::PeriodicStage),
}

impl StagePlan {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StagePlan::Once(_) => "once",
            StagePlan::Affine(_) => "affine",
            StagePlan::Periodic(_) => "periodic",
        }
    }
}

/// One stage of a composed case: a component id plus, for affine plans,
/// which guard alternative the case committed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseStep {
    pub scc: usize,
    pub alt: usize,
}

/// Solver-ready rendering of a case: constraints over the loop's entry
/// values and one free iteration count per stage.
#[derive(Debug, Clone)]
pub struct CaseEncoding {
    pub iter_vars: Vec<SymVar>,
    pub constraints: Vec<SymExpr>,
    pub post: BTreeMap<String, SymExpr>,
    pub total: SymExpr,
}

#[derive(Debug, Clone)]
pub struct RouteCase {
    /// Interior component ids along the route, in execution order.
    pub route: Vec<usize>,
    pub tag: CaseTag,
    /// Guard atoms over loop-entry values. For cases with a dynamic stage
    /// these cover only the closed prefix.
    pub pre: Vec<SymExpr>,
    /// Exit values over loop-entry values; present only when every stage
    /// composed symbolically.
    pub post: Option<BTreeMap<String, SymExpr>>,
    /// Total iteration count over loop-entry values, when closed.
    pub total: Option<SymExpr>,
    /// True when this case never reaches the loop exit.
    pub nonterminating: bool,
    pub steps: Vec<CaseStep>,
    pub encoding: Option<CaseEncoding>,
}

#[derive(Debug, Clone)]
pub struct LoopSummary {
    pub loop_id: LoopId,
    pub guard: SymExpr,
    pub paths: LoopPaths,
    pub graph: JumpGraph,
    pub csg: Csg,
    /// Plan or failure per interior component id.
    pub plans: BTreeMap<usize, Result<StagePlan, Failure>>,
    /// Components whose plan failed but which no in-domain route reaches.
    pub waived: Vec<usize>,
    pub cases: Vec<RouteCase>,
    pub failure: Option<Failure>,
}

impl LoopSummary {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn scc_label(&self, id: usize) -> String {
        let scc = &self.csg.sccs[id];
        let names: Vec<String> = scc.members.iter().map(|m| m.to_string()).collect();
        if names.len() == 1 {
            names.into_iter().next().unwrap()
        } else {
            format!("{{{}}}", names.join(", "))
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProgramSummary {
    /// Canonical program the summaries describe: break-free, inner loops
    /// replaced by their closed forms.
    pub program: Program,
    pub eliminated: Vec<LoopId>,
    pub loops: Vec<LoopSummary>,
}

impl ProgramSummary {
    pub fn loop_summary(&self, id: LoopId) -> Option<&LoopSummary> {
        self.loops.iter().find(|l| l.loop_id == id)
    }

    pub fn succeeded(&self) -> bool {
        self.loops.iter().all(|l| l.succeeded())
    }
}

/// Declared input ranges as atoms over entry values.
pub fn domain_atoms(program: &Program) -> Vec<SymExpr> {
    let mut out = Vec::new();
    for decl in &program.inputs {
        if let Some((lo, hi)) = decl.domain {
            out.push(sym::cmp(CmpOp::Ge, sym::pre(&decl.name), sym::int(lo)));
            out.push(sym::cmp(CmpOp::Le, sym::pre(&decl.name), sym::int(hi)));
        }
    }
    out
}

/// Evaluates a symbolic expression against concrete variable values, with
/// an optional binding for the iteration counter.
pub fn eval_in_state(
    e: &SymExpr,
    state: &BTreeMap<String, i128>,
    n: Option<i128>,
) -> Result<SymValue, EvalError> {
    e.eval(&|v| match v {
        SymVar::Pre(name) => state.get(name).copied(),
        SymVar::N => n,
        SymVar::Fresh(_) => None,
    })
}

pub fn eval_bool_state(
    e: &SymExpr,
    state: &BTreeMap<String, i128>,
    n: Option<i128>,
) -> Result<bool, EvalError> {
    eval_in_state(e, state, n)?.as_bool()
}

pub fn eval_int_state(
    e: &SymExpr,
    state: &BTreeMap<String, i128>,
    n: Option<i128>,
) -> Result<i128, EvalError> {
    eval_in_state(e, state, n)?.as_int()
}

/// Loops not nested inside another loop, in textual order.
pub fn top_level_loops(stmts: &[Stmt]) -> Vec<LoopId> {
    let mut out = Vec::new();
    fn walk(stmts: &[Stmt], out: &mut Vec<LoopId>) {
        for s in stmts {
            match s {
                Stmt::While { id, .. } => out.push(*id),
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    walk(then_branch, out);
                    walk(else_branch, out);
                }
                _ => {}
            }
        }
    }
    walk(stmts, &mut out);
    out
}

/// Summarizes every loop of a program: canonicalizes away breaks, folds
/// inner loops into their closed forms, then summarizes what remains.
pub fn summarize_program(program: &Program, cfg: &SummarizeConfig) -> ProgramSummary {
    let canon = canonicalize(program);
    let mut solver = Solver::new(cfg.solver.clone());
    let elim = nested::eliminate(&canon, cfg, &mut solver);
    let mut loops = Vec::new();
    for id in top_level_loops(&elim.program.body) {
        loops.push(summarize_loop(
            &elim.program,
            id,
            cfg,
            &mut solver,
            &elim.failures,
        ));
    }
    ProgramSummary {
        program: elim.program,
        eliminated: elim.eliminated,
        loops,
    }
}

fn skeleton(program: &Program, loop_id: LoopId, solver: &mut Solver) -> (LoopPaths, JumpGraph, Csg) {
    let guard = match program.find_loop(loop_id) {
        Some(Stmt::While { cond, .. }) => expr_to_sym(cond, &BTreeMap::new()).normalize(),
        _ => SymExpr::Bool(false),
    };
    let paths = LoopPaths {
        loop_id,
        guard,
        paths: Vec::new(),
        vars: Default::default(),
    };
    let graph = build_jump_graph(&paths, solver);
    let csg = contract(&graph);
    (paths, graph, csg)
}

fn failed_summary(
    program: &Program,
    loop_id: LoopId,
    solver: &mut Solver,
    failure: Failure,
) -> LoopSummary {
    let (paths, graph, csg) = skeleton(program, loop_id, solver);
    LoopSummary {
        loop_id,
        guard: paths.guard.clone(),
        paths,
        graph,
        csg,
        plans: BTreeMap::new(),
        waived: Vec::new(),
        cases: Vec::new(),
        failure: Some(failure),
    }
}

fn has_nondet(paths: &LoopPaths) -> bool {
    let fresh = |e: &SymExpr| e.vars().iter().any(|v| matches!(v, SymVar::Fresh(_)));
    if fresh(&paths.guard) {
        return true;
    }
    paths.live().any(|p| {
        p.cond.iter().any(|a| fresh(a)) || p.op.values().any(|e| fresh(e))
    })
}

/// Summarizes one loop of a canonical program.
pub fn summarize_loop(
    program: &Program,
    loop_id: LoopId,
    cfg: &SummarizeConfig,
    solver: &mut Solver,
    inner_failures: &BTreeMap<LoopId, Failure>,
) -> LoopSummary {
    let mut paths = match enumerate_spaths(program, loop_id, cfg.max_paths) {
        Ok(p) => p,
        Err(SPathError::PathExplosion { limit }) => {
            return failed_summary(
                program,
                loop_id,
                solver,
                Failure::new(
                    FailureKind::CaseExplosion,
                    format!("more than {limit} single-branch paths"),
                ),
            );
        }
        Err(SPathError::NestedLoop { id }) => {
            let failure = match inner_failures.get(&id) {
                Some(f) => Failure::new(f.kind, format!("inner loop {id}: {}", f.detail)),
                None => Failure::new(
                    FailureKind::SolverUnknown,
                    format!("inner loop {id} was not eliminated"),
                ),
            };
            return failed_summary(program, loop_id, solver, failure);
        }
    };

    if has_nondet(&paths) {
        let (paths, graph, csg) = skeleton(program, loop_id, solver);
        return LoopSummary {
            loop_id,
            guard: paths.guard.clone(),
            paths,
            graph,
            csg,
            plans: BTreeMap::new(),
            waived: Vec::new(),
            cases: Vec::new(),
            failure: Some(Failure::new(
                FailureKind::SolverUnknown,
                "loop reads a nondeterministic value",
            )),
        };
    }

    prune_paths(&mut paths, &mut |atoms| solver.check(atoms).is_unsat());

    let marked = nested::has_elimination_marks(loop_body(program, loop_id));
    if marked {
        let trapped = paths.live().any(|p| {
            p.cond.iter().any(|a| a.has_div_mod()) || p.op.values().any(|e| e.has_div_mod())
        });
        if trapped {
            let graph = build_jump_graph(&paths, solver);
            let csg = contract(&graph);
            return LoopSummary {
                loop_id,
                guard: paths.guard.clone(),
                paths,
                graph,
                csg,
                plans: BTreeMap::new(),
                waived: Vec::new(),
                cases: Vec::new(),
                failure: Some(Failure::new(
                    FailureKind::InductivenessTrapNested,
                    "an eliminated inner loop's count enters this loop as a floor division",
                )),
            };
        }
    }

    let graph = build_jump_graph(&paths, solver);
    let csg = contract(&graph);

    let mut plans: BTreeMap<usize, Result<StagePlan, Failure>> = BTreeMap::new();
    for scc in &csg.sccs {
        if scc.is_synthetic() {
            continue;
        }
        plans.insert(scc.id, build_plan(&paths, scc, cfg));
    }

    let domains = domain_atoms(program);
    let (cases, waived, failure) = match compose::compose(
        &paths, &csg, &plans, &domains, cfg, solver,
    ) {
        Ok(out) => (out.cases, out.waived, None),
        Err(f) => (Vec::new(), Vec::new(), Some(f)),
    };

    LoopSummary {
        loop_id,
        guard: paths.guard.clone(),
        paths,
        graph,
        csg,
        plans,
        waived,
        cases,
        failure,
    }
}

fn loop_body(program: &Program, loop_id: LoopId) -> &[Stmt] {
    match program.find_loop(loop_id) {
        Some(Stmt::While { body, .. }) => body,
        _ => &[],
    }
}

fn build_plan(
    paths: &LoopPaths,
    scc: &crate::graph::Scc,
    cfg: &SummarizeConfig,
) -> Result<StagePlan, Failure> {
    use crate::graph::SccKind;
    match scc.kind {
        SccKind::Zero => {
            let id = scc.path_ids()[0];
            let sp = &paths.paths[id];
            Ok(StagePlan::Once(OnceStage {
                path: id,
                enter: sp.cond.clone(),
                op: sp.op.clone(),
            }))
        }
        SccKind::One => {
            let id = scc.path_ids()[0];
            affine::build(&paths.paths[id]).map(StagePlan::Affine)
        }
        SccKind::High => {
            let osc = oscillate::analyze(paths, &scc.path_ids(), cfg.max_interval_values)?;
            Ok(StagePlan::Periodic(periodic::build(osc)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn summarize(src: &str) -> ProgramSummary {
        let p = parse(src).expect("test program parses");
        summarize_program(&p, &SummarizeConfig::default())
    }

    #[test]
    fn straight_line_program_has_no_loop_summaries() {
        let ps = summarize("proc main { x = 1; y = x + 2; }");
        assert!(ps.loops.is_empty());
        assert!(ps.eliminated.is_empty());
    }

    #[test]
    fn never_entered_loop_keeps_only_the_skip_case() {
        let ps = summarize("proc main { while (x < x) { x = x + 1; } }");
        let lp = &ps.loops[0];
        assert!(lp.succeeded());
        assert_eq!(lp.cases.len(), 1);
        assert!(lp.cases[0].route.is_empty());
        assert_eq!(lp.cases[0].tag, CaseTag::ZeroOrder);
    }

    #[test]
    fn nondet_read_is_reported_as_solver_unknown() {
        let ps = summarize("proc main { while (x < nondet()) { x = x + 1; } }");
        let f = ps.loops[0].failure.as_ref().expect("must fail");
        assert_eq!(f.kind, FailureKind::SolverUnknown);
        assert!(f.detail.contains("nondeterministic"));
    }

    #[test]
    fn swap_recurrence_is_coupled() {
        let ps = summarize(
            "proc main { while (x > 0) { x = x - 1; t = x; x = y; y = t; } }",
        );
        let f = ps.loops[0].failure.as_ref().expect("must fail");
        assert_eq!(f.kind, FailureKind::CoupledRecurrence);
    }

    #[test]
    fn single_counting_loop_summarizes_closed() {
        let ps = summarize("proc main { while (i < 100) { i = i + 3; } }");
        let lp = &ps.loops[0];
        assert!(lp.succeeded(), "failure: {:?}", lp.failure);
        // Skip case plus the one-component route.
        assert_eq!(lp.cases.len(), 2);
        let run = &lp.cases[1];
        assert_eq!(run.tag, CaseTag::OneOrder);
        let total = run.total.as_ref().expect("closed count");
        let n = eval_int_state(
            total,
            &[("i".to_string(), 0)].into_iter().collect(),
            None,
        )
        .unwrap();
        assert_eq!(n, 34);
    }

    #[test]
    fn domain_atoms_read_the_input_pragmas() {
        let p = parse("// input x in [-5, 5]\nproc main { while (x < 0) { x = x + 1; } }")
            .unwrap();
        let atoms = domain_atoms(&p);
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0].to_string(), "x0 >= -5");
        assert_eq!(atoms[1].to_string(), "x0 <= 5");
    }
}
