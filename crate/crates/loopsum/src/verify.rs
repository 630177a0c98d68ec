//! Assertion verdicts from loop summaries. The program is walked
//! symbolically: straight-line code extends a substitution over the input
//! values, a summarized loop forks the walk per composed case, and every
//! assertion becomes a satisfiability query for its negation. A counter-
//! example candidate is only reported after the concrete interpreter
//! replays it to a real assertion failure, so an unsound query can cost
//! precision but never a wrong verdict.

use std::collections::BTreeMap;

use crate::frontend::{print_expr, Expr, InputDecl, LoopId, Program, Span, Stmt};
use crate::oracle::{self, OracleConfig, RunStatus, NONDET_RANGE};
use crate::solver::{Model, SolveResult, Solver};
use crate::spath::expr_to_sym;
use crate::summarize::{
    compose::entry_states, summarize_program, LoopSummary, ProgramSummary, StagePlan,
    SummarizeConfig,
};
use crate::sym::{self, CmpOp, SymExpr, SymVar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated { witness: BTreeMap<String, i128> },
    Unknown { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "HOLDS",
            Verdict::Violated { .. } => "VIOLATED",
            Verdict::Unknown { .. } => "UNKNOWN",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssertionVerdict {
    pub line: u32,
    pub col: u32,
    /// Source rendering of the asserted condition.
    pub text: String,
    pub verdict: Verdict,
}

/// Checks every assertion in the program, in textual order.
pub fn verify_program(program: &Program, cfg: &SummarizeConfig) -> Vec<AssertionVerdict> {
    let sites = assertion_sites(program);
    if sites.is_empty() {
        return Vec::new();
    }
    if program.bitwidth.is_some() {
        return sites
            .into_iter()
            .map(|(span, text)| AssertionVerdict {
                line: span.line,
                col: span.col,
                text,
                verdict: Verdict::Unknown {
                    reason: "wrapped arithmetic is outside the solver encoding".into(),
                },
            })
            .collect();
    }

    let named = name_nondet_reads(program);
    let ps = summarize_program(&named, cfg);
    let mut vx = Vx {
        original: program,
        domains: effective_domain_atoms(&named),
        solver: Solver::new(cfg.solver.clone()),
        fuel: cfg.fuel,
        accs: BTreeMap::new(),
        next_rename: 0,
    };
    // Assertions inside an inner loop are folded into its closed form and
    // leave the walkable program before any query can mention them.
    for span in inner_loop_assert_spans(program) {
        vx.touch_unknown(span, "assertion inside an inner loop has no per-iteration encoding");
    }

    let start = Flow {
        sigma: zero_seeded_state(&ps.program),
        constraints: Vec::new(),
    };
    let body = ps.program.body.clone();
    vx.walk(&ps, &body, vec![start]);

    sites
        .into_iter()
        .map(|(span, text)| AssertionVerdict {
            line: span.line,
            col: span.col,
            text,
            verdict: vx
                .accs
                .remove(&key(span))
                .map(Acc::into_verdict)
                .unwrap_or(Verdict::Holds),
        })
        .collect()
}

/// Replaces each `nondet()` read with a fresh declared input over the
/// oracle's draw range. A read in a loop guard thereby keeps one value for
/// the whole loop instead of redrawing per iteration; candidates found
/// under that approximation still have to replay concretely.
fn name_nondet_reads(p: &Program) -> Program {
    fn fix_expr(e: &mut Expr, used: &mut Vec<u32>) {
        match e {
            Expr::Nondet(k, span) => {
                used.push(*k);
                *e = Expr::Var(format!("__nd{k}"), *span);
            }
            Expr::Neg(inner) | Expr::Not(inner) => fix_expr(inner, used),
            Expr::Bin(_, l, r) => {
                fix_expr(l, used);
                fix_expr(r, used);
            }
            Expr::Int(_) | Expr::Var(..) => {}
        }
    }
    fn fix_stmts(stmts: &mut [Stmt], used: &mut Vec<u32>) {
        for s in stmts {
            match s {
                Stmt::Assign { value, .. } => fix_expr(value, used),
                Stmt::Assert { cond, .. } => fix_expr(cond, used),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    fix_expr(cond, used);
                    fix_stmts(then_branch, used);
                    fix_stmts(else_branch, used);
                }
                Stmt::While { cond, body, .. } => {
                    fix_expr(cond, used);
                    fix_stmts(body, used);
                }
                Stmt::Break { .. } => {}
            }
        }
    }
    let mut out = p.clone();
    let mut used = Vec::new();
    fix_stmts(&mut out.body, &mut used);
    used.sort_unstable();
    for k in used {
        out.inputs.push(InputDecl {
            name: format!("__nd{k}"),
            domain: Some(NONDET_RANGE),
            span: Span::default(),
        });
    }
    out
}

/// Every assertion with its source span and text, in textual order.
fn assertion_sites(p: &Program) -> Vec<(Span, String)> {
    let mut out = Vec::new();
    crate::frontend::ast::visit_stmts(&p.body, &mut |s| {
        if let Stmt::Assert { cond, span } = s {
            out.push((*span, print_expr(cond)));
        }
    });
    out
}

/// Spans of assertions nested inside a loop inside a loop.
fn inner_loop_assert_spans(p: &Program) -> Vec<Span> {
    fn go(stmts: &[Stmt], depth: u32, out: &mut Vec<Span>) {
        for s in stmts {
            match s {
                Stmt::Assert { span, .. } if depth >= 2 => out.push(*span),
                Stmt::If {
                    then_branch,
                    else_branch,
                    ..
                } => {
                    go(then_branch, depth, out);
                    go(else_branch, depth, out);
                }
                Stmt::While { body, .. } => go(body, depth + 1, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    go(&p.body, 0, &mut out);
    out
}

/// Bounds every input by its effective oracle domain.
fn effective_domain_atoms(p: &Program) -> Vec<SymExpr> {
    let mut out = Vec::new();
    for decl in &p.inputs {
        let (lo, hi) = oracle::input_domain(decl);
        out.push(sym::cmp(CmpOp::Ge, sym::pre(&decl.name), sym::int(lo)));
        out.push(sym::cmp(CmpOp::Le, sym::pre(&decl.name), sym::int(hi)));
    }
    out
}

/// Assigned variables that are not inputs start at zero.
fn zero_seeded_state(p: &Program) -> BTreeMap<String, SymExpr> {
    let declared: std::collections::BTreeSet<&String> =
        p.inputs.iter().map(|d| &d.name).collect();
    p.assigned_vars()
        .into_iter()
        .filter(|v| !declared.contains(v))
        .map(|v| (v, sym::int(0)))
        .collect()
}

fn key(span: Span) -> (u32, u32) {
    (span.line, span.col)
}

/// One branch of the symbolic walk.
#[derive(Clone)]
struct Flow {
    /// Current variable values over program-entry values.
    sigma: BTreeMap<String, SymExpr>,
    /// Atoms over program-entry values and freed iteration counts.
    constraints: Vec<SymExpr>,
}

#[derive(Default)]
struct Acc {
    violated: Option<BTreeMap<String, i128>>,
    unknown: Option<String>,
}

impl Acc {
    fn into_verdict(self) -> Verdict {
        if let Some(witness) = self.violated {
            Verdict::Violated { witness }
        } else if let Some(reason) = self.unknown {
            Verdict::Unknown { reason }
        } else {
            Verdict::Holds
        }
    }
}

/// An assertion reachable inside one iteration of a loop body: the branch
/// atoms that steer control to it and the asserted condition, both over
/// iteration-entry values.
struct Obligation {
    span: Span,
    prefix: Vec<SymExpr>,
    cond: SymExpr,
}

struct Vx<'a> {
    original: &'a Program,
    domains: Vec<SymExpr>,
    solver: Solver,
    fuel: u64,
    accs: BTreeMap<(u32, u32), Acc>,
    next_rename: usize,
}

impl Vx<'_> {
    fn touch_unknown(&mut self, span: Span, reason: &str) {
        let acc = self.accs.entry(key(span)).or_default();
        if acc.unknown.is_none() {
            acc.unknown = Some(reason.to_string());
        }
    }

    fn walk(&mut self, ps: &ProgramSummary, stmts: &[Stmt], mut flows: Vec<Flow>) -> Vec<Flow> {
        for s in stmts {
            flows = self.step(ps, s, flows);
        }
        flows
    }

    fn step(&mut self, ps: &ProgramSummary, s: &Stmt, mut flows: Vec<Flow>) -> Vec<Flow> {
        match s {
            Stmt::Assign { target, value, .. } => {
                for f in &mut flows {
                    let e = expr_to_sym(value, &f.sigma).normalize();
                    f.sigma.insert(target.clone(), e);
                }
                flows
            }
            Stmt::Assert { cond, span } => {
                for f in &mut flows {
                    let a = expr_to_sym(cond, &f.sigma).normalize();
                    self.check_negated(&a, &f.constraints, *span);
                    // Runs that survive the assertion satisfy it.
                    if !matches!(a, SymExpr::Bool(true)) {
                        f.constraints.push(a);
                    }
                }
                flows
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let mut thens = Vec::new();
                let mut elses = Vec::new();
                for f in flows {
                    let c = expr_to_sym(cond, &f.sigma).normalize();
                    let mut t = f.clone();
                    t.constraints.push(c.clone());
                    thens.push(t);
                    let mut e = f;
                    e.constraints.push(sym::not(c).normalize());
                    elses.push(e);
                }
                let mut out = self.walk(ps, then_branch, thens);
                out.extend(self.walk(ps, else_branch, elses));
                out
            }
            Stmt::While { id, body, .. } => self.step_loop(ps, *id, body, flows),
            Stmt::Break { .. } => flows,
        }
    }

    fn step_loop(
        &mut self,
        ps: &ProgramSummary,
        id: LoopId,
        body: &[Stmt],
        flows: Vec<Flow>,
    ) -> Vec<Flow> {
        let Some(su) = ps.loop_summary(id) else {
            return flows;
        };
        if let Some(fail) = &su.failure {
            let reason = format!("loop {id} has no summary ({fail})");
            let mut spans = Vec::new();
            crate::frontend::ast::visit_stmts(body, &mut |s| {
                if let Stmt::Assert { span, .. } = s {
                    spans.push(*span);
                }
            });
            for span in spans {
                self.touch_unknown(span, &reason);
            }
            // Whatever the loop did, code after it runs only when the guard
            // has failed; keep that one fact about the forgotten state.
            let mut out = Vec::new();
            for mut f in flows {
                self.forget_after_exit(&su.guard, body, &mut f);
                out.push(f);
            }
            return out;
        }

        let obligations = collect_obligations(&su.guard, body);
        let mut out = Vec::new();
        for f in flows {
            for case in &su.cases {
                let mut entry_atoms = f.constraints.clone();
                push_subst(&mut entry_atoms, &case.pre, &f.sigma);
                if self.unsat(&entry_atoms) {
                    continue;
                }
                self.check_case_body(su, case, &f, &obligations);
                if case.nonterminating {
                    continue;
                }
                out.push(self.continue_after(su, body, case, &f, entry_atoms));
            }
        }
        out
    }

    /// Replaces every variable the loop can write with a fresh symbol and
    /// records the failed guard over the new state.
    fn forget_after_exit(&mut self, guard: &SymExpr, body: &[Stmt], f: &mut Flow) {
        let tag = self.next_rename;
        self.next_rename += 1;
        for v in written_vars(body) {
            f.sigma
                .insert(v.clone(), SymExpr::Var(SymVar::Fresh(format!("h{tag}_{v}"))));
        }
        let exited = sym::not(guard.clone()).subst_pre(&f.sigma).normalize();
        if !matches!(exited, SymExpr::Bool(true)) {
            f.constraints.push(exited);
        }
    }

    /// Queries every obligation at every encodable stage of the case.
    fn check_case_body(
        &mut self,
        su: &LoopSummary,
        case: &crate::summarize::RouteCase,
        f: &Flow,
        obligations: &[Obligation],
    ) {
        if obligations.is_empty() {
            return;
        }
        let entries = entry_states(&su.plans, case);
        let mut covered = 0;
        for entry in &entries {
            let plan = su.plans[&entry.step.scc]
                .as_ref()
                .expect("composed stages have plans");
            let mut base = f.constraints.clone();
            for c in &entry.constraints {
                base.push(c.subst_pre(&f.sigma).normalize());
            }
            match plan {
                StagePlan::Once(st) => {
                    push_subst(&mut base, &st.enter, &entry.sigma);
                    ground(&mut base, &f.sigma);
                    for ob in obligations {
                        let mut atoms = base.clone();
                        for p in &ob.prefix {
                            atoms.push(at_entry(p, &entry.sigma, &f.sigma));
                        }
                        atoms.push(at_entry(&sym::not(ob.cond.clone()), &entry.sigma, &f.sigma));
                        self.query(&atoms, ob.span);
                    }
                    covered += 1;
                }
                StagePlan::Affine(st) => {
                    push_subst(&mut base, &st.enter, &entry.sigma);
                    ground(&mut base, &f.sigma);
                    let j = SymExpr::Var(SymVar::Fresh("j#".into()));
                    base.push(sym::cmp(CmpOp::Ge, j.clone(), sym::int(0)));
                    for ob in obligations {
                        let mut atoms = base.clone();
                        for p in &ob.prefix {
                            atoms.push(at_iteration(p, st, &j, &entry.sigma, &f.sigma));
                        }
                        atoms.push(at_iteration(
                            &sym::not(ob.cond.clone()),
                            st,
                            &j,
                            &entry.sigma,
                            &f.sigma,
                        ));
                        self.query(&atoms, ob.span);
                    }
                    covered += 1;
                }
                StagePlan::Periodic(_) => break,
            }
        }
        if covered < case.steps.len() {
            for ob in obligations {
                self.touch_unknown(ob.span, "summary not solver-encodable");
            }
        }
    }

    /// The post-loop flow for one terminating case.
    fn continue_after(
        &mut self,
        su: &LoopSummary,
        body: &[Stmt],
        case: &crate::summarize::RouteCase,
        f: &Flow,
        entry_atoms: Vec<SymExpr>,
    ) -> Flow {
        let mut g = f.clone();
        if let Some(post) = &case.post {
            g.constraints = entry_atoms;
            for (v, e) in post {
                g.sigma.insert(v.clone(), e.subst_pre(&f.sigma).normalize());
            }
        } else if let Some(enc) = &case.encoding {
            let mut renames = BTreeMap::new();
            for v in &enc.iter_vars {
                if let SymVar::Fresh(name) = v {
                    renames.insert(name.clone(), format!("k{}", self.next_rename));
                    self.next_rename += 1;
                }
            }
            g.constraints = f.constraints.clone();
            for c in &enc.constraints {
                g.constraints
                    .push(rename_fresh(c, &renames).subst_pre(&f.sigma).normalize());
            }
            for (v, e) in &enc.post {
                g.sigma.insert(
                    v.clone(),
                    rename_fresh(e, &renames).subst_pre(&f.sigma).normalize(),
                );
            }
        } else {
            g.constraints = entry_atoms;
            self.forget_after_exit(&su.guard, body, &mut g);
        }
        g
    }

    fn unsat(&mut self, atoms: &[SymExpr]) -> bool {
        let mut q = self.domains.clone();
        q.extend(atoms.iter().cloned());
        self.solver.check(&q).is_unsat()
    }

    /// SAT means the assertion fails somewhere in this context.
    fn query(&mut self, atoms: &[SymExpr], span: Span) {
        if self
            .accs
            .get(&key(span))
            .is_some_and(|a| a.violated.is_some())
        {
            return;
        }
        let mut q = self.domains.clone();
        q.extend(atoms.iter().cloned());
        match self.solver.check(&q) {
            SolveResult::Sat(model) => self.candidate(span, &model),
            SolveResult::Unsat => {}
            SolveResult::Unknown(_) => {
                self.touch_unknown(span, "solver could not decide the reachability query");
            }
        }
    }

    fn check_negated(&mut self, cond: &SymExpr, constraints: &[SymExpr], span: Span) {
        let mut atoms = constraints.to_vec();
        atoms.push(sym::not(cond.clone()).normalize());
        self.query(&atoms, span);
    }

    /// Confirms a model by running the real program on it.
    fn candidate(&mut self, span: Span, model: &Model) {
        match replay(self.original, model, span.line, self.fuel) {
            Some(witness) => {
                self.accs.entry(key(span)).or_default().violated = Some(witness);
            }
            None => {
                self.touch_unknown(span, "counterexample candidate did not replay concretely");
            }
        }
    }
}

/// Runs the original program on the model's inputs and accepts the witness
/// only when it fails this assertion. Programs with nondeterministic reads
/// are retried across seeds because the draws cannot be dictated.
fn replay(
    original: &Program,
    model: &Model,
    line: u32,
    fuel: u64,
) -> Option<BTreeMap<String, i128>> {
    let mut inputs = BTreeMap::new();
    for decl in &original.inputs {
        let (lo, hi) = oracle::input_domain(decl);
        let v = model
            .get(&SymVar::Pre(decl.name.clone()))
            .copied()
            .unwrap_or(0.clamp(lo, hi));
        inputs.insert(decl.name.clone(), v);
    }
    let mut has_nondet = false;
    crate::frontend::ast::visit_stmts(&original.body, &mut |s| {
        let e = match s {
            Stmt::Assign { value, .. } => value,
            Stmt::If { cond, .. } | Stmt::While { cond, .. } | Stmt::Assert { cond, .. } => cond,
            Stmt::Break { .. } => return,
        };
        has_nondet |= e.contains_nondet();
    });
    let seeds: u64 = if has_nondet { 32 } else { 1 };
    for seed in 0..seeds {
        let run = oracle::interpret(original, &inputs, &OracleConfig { fuel, seed });
        if matches!(run.status, RunStatus::AssertFailed { line: l } if l == line) {
            return Some(inputs);
        }
    }
    None
}

/// Targets assigned anywhere in a loop body.
fn written_vars(body: &[Stmt]) -> Vec<String> {
    let mut out = std::collections::BTreeSet::new();
    crate::frontend::ast::visit_stmts(body, &mut |s| {
        if let Stmt::Assign { target, .. } = s {
            out.insert(target.clone());
        }
    });
    out.into_iter().collect()
}

/// `atoms` over loop-entry values, grounded in program-entry values.
fn push_subst(dst: &mut Vec<SymExpr>, atoms: &[SymExpr], sigma: &BTreeMap<String, SymExpr>) {
    for a in atoms {
        let s = a.subst_pre(sigma).normalize();
        if !matches!(s, SymExpr::Bool(true)) {
            dst.push(s);
        }
    }
}

fn ground(atoms: &mut [SymExpr], sigma: &BTreeMap<String, SymExpr>) {
    for a in atoms.iter_mut() {
        *a = a.subst_pre(sigma).normalize();
    }
}

/// An iteration-entry atom at the entry of a stage.
fn at_entry(
    atom: &SymExpr,
    stage_sigma: &BTreeMap<String, SymExpr>,
    flow_sigma: &BTreeMap<String, SymExpr>,
) -> SymExpr {
    atom.subst_pre(stage_sigma).subst_pre(flow_sigma).normalize()
}

/// An iteration-entry atom at the start of iteration `j` of an affine
/// stage: the stage's exit map at N = j gives the state reached after `j`
/// body runs.
fn at_iteration(
    atom: &SymExpr,
    st: &crate::summarize::affine::AffineStage,
    j: &SymExpr,
    stage_sigma: &BTreeMap<String, SymExpr>,
    flow_sigma: &BTreeMap<String, SymExpr>,
) -> SymExpr {
    atom.subst_pre(&st.post)
        .subst_n(j)
        .subst_pre(stage_sigma)
        .subst_pre(flow_sigma)
        .normalize()
}

fn rename_fresh(e: &SymExpr, map: &BTreeMap<String, String>) -> SymExpr {
    e.subst(&mut |v| match v {
        SymVar::Fresh(name) => map
            .get(name)
            .map(|n| SymExpr::Var(SymVar::Fresh(n.clone()))),
        _ => None,
    })
}

/// Collects the assertions of one loop body as route obligations. The
/// prefix starts from the loop guard; each `if` adds its branch atom and
/// each passed assertion is assumed for the statements after it.
fn collect_obligations(guard: &SymExpr, body: &[Stmt]) -> Vec<Obligation> {
    fn go(
        stmts: &[Stmt],
        i: usize,
        prefix: &[SymExpr],
        op: &BTreeMap<String, SymExpr>,
        out: &mut Vec<Obligation>,
    ) {
        let Some(s) = stmts.get(i) else { return };
        match s {
            Stmt::Assign { target, value, .. } => {
                let mut op2 = op.clone();
                op2.insert(target.clone(), expr_to_sym(value, op).normalize());
                go(stmts, i + 1, prefix, &op2, out);
            }
            Stmt::Assert { cond, span } => {
                let a = expr_to_sym(cond, op).normalize();
                out.push(Obligation {
                    span: *span,
                    prefix: prefix.to_vec(),
                    cond: a.clone(),
                });
                let mut p2 = prefix.to_vec();
                if !matches!(a, SymExpr::Bool(true)) {
                    p2.push(a);
                }
                go(stmts, i + 1, &p2, op, out);
            }
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                ..
            } => {
                let c = expr_to_sym(cond, op).normalize();
                let mut rest: Vec<Stmt> = then_branch.clone();
                rest.extend_from_slice(&stmts[i + 1..]);
                let mut p2 = prefix.to_vec();
                p2.push(c.clone());
                go(&rest, 0, &p2, op, out);
                let mut rest: Vec<Stmt> = else_branch.clone();
                rest.extend_from_slice(&stmts[i + 1..]);
                let mut p2 = prefix.to_vec();
                p2.push(sym::not(c).normalize());
                go(&rest, 0, &p2, op, out);
            }
            Stmt::While { .. } | Stmt::Break { .. } => {}
        }
    }
    let mut prefix = Vec::new();
    match guard.clone().normalize() {
        SymExpr::And(parts) => prefix.extend(parts),
        SymExpr::Bool(true) => {}
        atom => prefix.push(atom),
    }
    let mut out = Vec::new();
    go(body, 0, &prefix, &BTreeMap::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn verify(src: &str) -> Vec<AssertionVerdict> {
        let p = parse(src).expect("test program parses");
        verify_program(&p, &SummarizeConfig::default())
    }

    fn only(src: &str) -> Verdict {
        let vs = verify(src);
        assert_eq!(vs.len(), 1, "expected one assertion");
        vs.into_iter().next().unwrap().verdict
    }

    #[test]
    fn increment_bound_inside_the_loop_holds() {
        let v = only("proc main { while (i < 10) { i = i + 1; assert(i <= 10); } }");
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn stride_hits_the_forbidden_value() {
        let v = only("proc main { while (i < 10) { i = i + 3; assert(i != 9); } }");
        let Verdict::Violated { witness } = v else {
            panic!("expected a violation, got {v:?}");
        };
        assert!(witness.is_empty());
    }

    #[test]
    fn final_state_bound_holds_after_the_loop() {
        let v = only(
            "// input i in [0, 99]\n\
             proc main { while (i < 100) { i = i + 3; } assert(i >= 100); }",
        );
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn contradiction_after_a_terminating_loop_is_violated() {
        let v = only(
            "// input i in [0, 9]\n\
             proc main { while (i < 10) { i = i + 1; } assert(0 == 1); }",
        );
        let Verdict::Violated { witness } = v else {
            panic!("expected a violation, got {v:?}");
        };
        assert!(witness.contains_key("i"));
    }

    #[test]
    fn straight_line_overflowing_bound_is_violated() {
        let v = only("// input a in [0, 10]\nproc main { b = a + 1; assert(b <= 10); }");
        let Verdict::Violated { witness } = v else {
            panic!("expected a violation, got {v:?}");
        };
        assert_eq!(witness["a"], 10);
    }

    #[test]
    fn nondet_bound_caps_the_exit_value() {
        let v = only(
            "// input x in [0, 10]\n\
             proc main { while (x < nondet()) { x = x + 1; } assert(x <= 16); }",
        );
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn nondet_bound_skip_case_can_violate() {
        let v = only(
            "// input x in [0, 100]\n\
             proc main { while (x < nondet()) { x = x + 1; } assert(x <= 16); }",
        );
        let Verdict::Violated { witness } = v else {
            panic!("expected a violation, got {v:?}");
        };
        assert!(witness["x"] > 16);
    }

    #[test]
    fn unsummarized_loop_yields_unknown() {
        let v = only("proc main { while (x > 0) { x = y; y = x - 1; assert(x < 100); } }");
        let Verdict::Unknown { reason } = v else {
            panic!("expected unknown, got {v:?}");
        };
        assert!(reason.contains("no summary"));
    }

    #[test]
    fn periodic_stage_yields_unknown() {
        let v = only(
            "// input x in [-50, 50]\n// input i in [0, 100]\nproc main {\n\
             while (i < 100) {\n\
               if (x < 5) { x = x + 2; i = i + 3; } else { x = x - 5; i = i + 4; }\n\
               assert(x < 60);\n\
             }\n}",
        );
        let Verdict::Unknown { reason } = v else {
            panic!("expected unknown, got {v:?}");
        };
        assert!(reason.contains("not solver-encodable"), "{reason}");
    }

    #[test]
    fn guard_failure_survives_an_unencodable_exit() {
        // The loop summarizes through an oscillating component with no
        // closed post state, but every exit still satisfies i >= 100.
        let v = only(
            "// input x in [-50, 50]\n// input i in [0, 99]\nproc main {\n\
             while (i < 100) {\n\
               if (x < 0) { x = x + 2; i = i + 3; }\n\
               else { x = x + 7; if (x < 5) { x = x + 3; i = i + 1; } else { x = x - 12; i = i + 2; } }\n\
             }\n\
             assert(i >= 100);\n}",
        );
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn guard_failure_survives_a_failed_summary() {
        let v = only(
            "// input x in [0, 20]\n// input y in [0, 20]\nproc main {\n\
             while (x > 0) { x = x - 1; t = x; x = y; y = t; }\n\
             assert(x <= 0);\n}",
        );
        assert_eq!(v, Verdict::Holds);
    }

    #[test]
    fn contradiction_after_an_unsummarized_loop_replays() {
        let v = only(
            "// input x in [0, 20]\n// input y in [0, 20]\nproc main {\n\
             while (x > 0) { x = x - 1; t = x; x = y; y = t; }\n\
             assert(0 == 1);\n}",
        );
        assert!(matches!(v, Verdict::Violated { .. }), "{v:?}");
    }

    #[test]
    fn assertion_inside_an_eliminated_inner_loop_is_unknown() {
        let v = only(
            "// input x in [-50, 50]\n// input y in [0, 40]\nproc main {\n\
             while (y < 50) { while (x < 10) { x = x + 1; assert(x <= 10); } y = y + 2; }\n\
             }",
        );
        let Verdict::Unknown { reason } = v else {
            panic!("expected unknown, got {v:?}");
        };
        assert!(reason.contains("inner loop"));
    }

    #[test]
    fn preloop_code_grounds_the_loop_entry() {
        let vs = verify(
            "// input k in [0, 5]\n\
             proc main { i = k * 2; while (i < 10) { i = i + 1; assert(i <= 10); } \
             assert(i == 10); }",
        );
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[0].verdict, Verdict::Holds);
        assert_eq!(vs[1].verdict, Verdict::Holds);
    }

    #[test]
    fn verdicts_come_back_in_source_order() {
        let vs = verify(
            "// input a in [0, 3]\n\
             proc main { assert(a >= 0); b = a - 5; assert(b > 0); }",
        );
        assert_eq!(vs.len(), 2);
        assert_eq!(vs[0].verdict, Verdict::Holds);
        assert!(matches!(vs[1].verdict, Verdict::Violated { .. }));
        assert!(vs[0].line < vs[1].line || vs[0].col < vs[1].col);
    }
}
