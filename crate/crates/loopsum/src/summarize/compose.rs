//! Case composition along the contracted graph. Every start-to-end route
//! is walked stage by stage: closed stages substitute their exit values
//! into the next stage's guards, stages with several count alternatives
//! fork the walk, and the first dynamic stage switches the case over to
//! staged evaluation. The alternative product is capped.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{Csg, Node};
use crate::interval::IntervalSet;
use crate::solver::Solver;
use crate::spath::LoopPaths;
use crate::sym::{self, CmpOp, SymExpr, SymVar};

use super::affine::Count;
use super::{
    CaseEncoding, CaseStep, CaseTag, Failure, FailureKind, RouteCase, StagePlan,
    SummarizeConfig,
};

pub struct ComposeOut {
    pub cases: Vec<RouteCase>,
    pub waived: Vec<usize>,
}

/// Symbolic state while walking one route.
#[derive(Clone)]
struct Walk {
    pre: Vec<SymExpr>,
    steps: Vec<CaseStep>,
    /// Substitution from loop-entry values; dies when a stage has no
    /// closed count expression.
    sigma: Option<BTreeMap<String, SymExpr>>,
    /// Closed total count; lives and dies with `sigma`.
    total: Option<SymExpr>,
    /// Solver encoding; survives implicit counts, dies at a periodic stage.
    enc: Option<Enc>,
    nonterminating: bool,
}

#[derive(Clone)]
struct Enc {
    sigma: BTreeMap<String, SymExpr>,
    constraints: Vec<SymExpr>,
    iter_vars: Vec<SymVar>,
    total: SymExpr,
}

impl Walk {
    fn start() -> Walk {
        Walk {
            pre: Vec::new(),
            steps: Vec::new(),
            sigma: Some(BTreeMap::new()),
            total: Some(sym::int(0)),
            enc: Some(Enc {
                sigma: BTreeMap::new(),
                constraints: Vec::new(),
                iter_vars: Vec::new(),
                total: sym::int(0),
            }),
            nonterminating: false,
        }
    }
}

fn push_atoms(dst: &mut Vec<SymExpr>, atoms: &[SymExpr], map: &BTreeMap<String, SymExpr>) {
    for a in atoms {
        let s = a.subst_pre(map).normalize();
        if !matches!(s, SymExpr::Bool(true)) {
            dst.push(s);
        }
    }
}

/// Sequential composition: `op` reads the values described by `old`.
fn compose_map(
    old: &BTreeMap<String, SymExpr>,
    op: &BTreeMap<String, SymExpr>,
) -> BTreeMap<String, SymExpr> {
    let mut new = old.clone();
    for (v, e) in op {
        new.insert(v.clone(), e.subst_pre(old).normalize());
    }
    new
}

/// Composition through a counted stage: `post` reads stage-entry values
/// and the count N, which is bound to `n` (itself in stage-entry terms).
fn close_post(
    old: &BTreeMap<String, SymExpr>,
    post: &BTreeMap<String, SymExpr>,
    n: &SymExpr,
) -> BTreeMap<String, SymExpr> {
    let mut new = old.clone();
    for (v, e) in post {
        new.insert(v.clone(), e.subst_n(n).subst_pre(old).normalize());
    }
    new
}

fn iter_var(index: usize) -> SymVar {
    SymVar::Fresh(format!("n{index}"))
}

pub fn compose(
    paths: &LoopPaths,
    csg: &Csg,
    plans: &BTreeMap<usize, Result<StagePlan, Failure>>,
    domains: &[SymExpr],
    cfg: &SummarizeConfig,
    solver: &mut Solver,
) -> Result<ComposeOut, Failure> {
    check_dropped(paths, csg, domains, solver)?;

    let mut cx = Cx {
        paths,
        csg,
        plans,
        domains,
        max_cases: cfg.max_cases,
        solver,
        cases: Vec::new(),
        waived: BTreeSet::new(),
        spawned: 0,
    };
    cx.visit(csg.start, &Walk::start())?;

    let mut cases = cx.cases;
    cases.sort_by_key(|c| {
        (
            c.route.len(),
            c.route.clone(),
            c.steps.iter().map(|s| s.alt).collect::<Vec<_>>(),
        )
    });
    Ok(ComposeOut {
        cases,
        waived: cx.waived.into_iter().collect(),
    })
}

/// Components pruned from the contracted graph cannot reach the loop exit,
/// so a state entering one diverges and no route case describes it. The
/// loop is summarizable only when every pruned component is out of reach
/// for in-domain inputs, checked at loop entry and one jump deep.
fn check_dropped(
    paths: &LoopPaths,
    csg: &Csg,
    domains: &[SymExpr],
    solver: &mut Solver,
) -> Result<(), Failure> {
    for node in &csg.dropped {
        let Node::Path(d) = node else { continue };
        let target = &paths.paths[*d];
        let mut entries: Vec<Vec<SymExpr>> = vec![target.cond.clone()];
        for (i, sp) in paths.paths.iter().enumerate() {
            if sp.pruned || i == *d {
                continue;
            }
            let mut atoms = sp.cond.clone();
            atoms.extend(target.cond.iter().map(|a| a.subst_pre(&sp.op).normalize()));
            entries.push(atoms);
        }
        for extra in entries {
            let mut atoms = domains.to_vec();
            atoms.extend(extra);
            if !solver.check(&atoms).is_unsat() {
                return Err(Failure::new(
                    FailureKind::SolverUnknown,
                    format!("path {node} cannot reach the loop exit once entered"),
                ));
            }
        }
    }
    Ok(())
}

struct Cx<'a> {
    paths: &'a LoopPaths,
    csg: &'a Csg,
    plans: &'a BTreeMap<usize, Result<StagePlan, Failure>>,
    domains: &'a [SymExpr],
    max_cases: usize,
    solver: &'a mut Solver,
    cases: Vec<RouteCase>,
    waived: BTreeSet<usize>,
    spawned: usize,
}

impl Cx<'_> {
    fn explosion(&self) -> Failure {
        Failure::new(
            FailureKind::CaseExplosion,
            format!("more than {} composed cases", self.max_cases),
        )
    }

    /// False only on a proven-empty constraint set.
    fn feasible(&mut self, extra: &[SymExpr]) -> bool {
        let mut atoms = self.domains.to_vec();
        atoms.extend(extra.iter().cloned());
        !self.solver.check(&atoms).is_unsat()
    }

    fn visit(&mut self, at: usize, walk: &Walk) -> Result<(), Failure> {
        let csg = self.csg;
        let plans = self.plans;
        let succs: Vec<usize> = csg.succs(at).collect();
        for succ in succs {
            if succ == csg.end {
                self.finish(walk.clone(), false)?;
                continue;
            }
            match plans.get(&succ).expect("interior components have plans") {
                Err(f) => self.waive_or_fail(walk, succ, f)?,
                Ok(plan) => {
                    for w in self.apply(walk.clone(), succ, plan)? {
                        if w.nonterminating {
                            self.finish(w, true)?;
                        } else {
                            self.visit(succ, &w)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// A route reached a component with no plan. If no in-domain state can
    /// enter it along this prefix the route is waived; otherwise the
    /// component's failure is the loop's.
    fn waive_or_fail(&mut self, walk: &Walk, scc_id: usize, f: &Failure) -> Result<(), Failure> {
        let Some(enc) = &walk.enc else {
            return Err(f.clone());
        };
        let members = self.csg.sccs[scc_id].path_ids();
        for pid in members {
            let mut atoms = enc.constraints.clone();
            push_atoms(&mut atoms, &self.paths.paths[pid].cond, &enc.sigma);
            if self.feasible(&atoms) {
                return Err(f.clone());
            }
        }
        self.waived.insert(scc_id);
        Ok(())
    }

    fn apply(&mut self, walk: Walk, scc_id: usize, plan: &StagePlan) -> Result<Vec<Walk>, Failure> {
        let out = match plan {
            StagePlan::Once(st) => {
                let mut w = walk;
                if let Some(sigma) = w.sigma.take() {
                    push_atoms(&mut w.pre, &st.enter, &sigma);
                    w.total = w
                        .total
                        .take()
                        .map(|t| sym::add(vec![t, sym::int(1)]).normalize());
                    w.sigma = Some(compose_map(&sigma, &st.op));
                }
                if let Some(e) = &mut w.enc {
                    push_atoms(&mut e.constraints, &st.enter, &e.sigma);
                    e.sigma = compose_map(&e.sigma, &st.op);
                    e.total = sym::add(vec![e.total.clone(), sym::int(1)]);
                }
                w.steps.push(CaseStep { scc: scc_id, alt: 0 });
                vec![w]
            }
            StagePlan::Affine(st) => match &st.count {
                Count::Closed { cases } => {
                    let mut out = Vec::with_capacity(cases.len());
                    for (alt, cc) in cases.iter().enumerate() {
                        let mut w = walk.clone();
                        let index = w.steps.len();
                        if let Some(sigma) = w.sigma.take() {
                            push_atoms(&mut w.pre, &st.enter, &sigma);
                            push_atoms(&mut w.pre, &cc.guards, &sigma);
                            w.sigma = Some(sigma);
                        }
                        if let Some(e) = &mut w.enc {
                            push_atoms(&mut e.constraints, &st.enter, &e.sigma);
                            push_atoms(&mut e.constraints, &cc.guards, &e.sigma);
                        }
                        match &cc.n {
                            Some(count) => {
                                if let Some(sigma) = w.sigma.take() {
                                    let outer = count.subst_pre(&sigma).normalize();
                                    w.total = w
                                        .total
                                        .take()
                                        .map(|t| sym::add(vec![t, outer]).normalize());
                                    w.sigma = Some(close_post(&sigma, &st.post, count));
                                }
                                if let Some(e) = &mut w.enc {
                                    let nk = iter_var(index);
                                    let nv = SymExpr::Var(nk.clone());
                                    e.constraints.push(
                                        sym::cmp(
                                            CmpOp::Eq,
                                            nv.clone(),
                                            count.subst_pre(&e.sigma),
                                        )
                                        .normalize(),
                                    );
                                    e.sigma = close_post(&e.sigma, &st.post, &nv);
                                    e.total = sym::add(vec![e.total.clone(), nv]);
                                    e.iter_vars.push(nk);
                                }
                            }
                            None => {
                                w.sigma = None;
                                w.total = None;
                                w.nonterminating = true;
                            }
                        }
                        w.steps.push(CaseStep { scc: scc_id, alt });
                        out.push(w);
                    }
                    out
                }
                Count::Implicit { step } => {
                    let mut w = walk;
                    let index = w.steps.len();
                    // The count exists but has no entry-value expression.
                    w.sigma = None;
                    w.total = None;
                    if let Some(e) = &mut w.enc {
                        push_atoms(&mut e.constraints, &st.enter, &e.sigma);
                        let nk = iter_var(index);
                        let nv = SymExpr::Var(nk.clone());
                        e.constraints
                            .push(sym::cmp(CmpOp::Ge, nv.clone(), sym::int(1)));
                        let last = sym::sub(nv.clone(), sym::int(1));
                        for a in step {
                            e.constraints
                                .push(a.subst_n(&last).subst_pre(&e.sigma).normalize());
                        }
                        let failed = sym::not(sym::and(
                            step.iter().map(|a| a.subst_n(&nv)).collect(),
                        ));
                        e.constraints.push(failed.subst_pre(&e.sigma).normalize());
                        e.sigma = close_post(&e.sigma, &st.post, &nv);
                        e.total = sym::add(vec![e.total.clone(), nv]);
                        e.iter_vars.push(nk);
                    }
                    w.steps.push(CaseStep { scc: scc_id, alt: 0 });
                    vec![w]
                }
            },
            StagePlan::Periodic(st) => {
                let mut w = walk;
                if let Some(e) = &w.enc {
                    // Entering the component means some member condition
                    // holds; a route where none can is dead.
                    let sigma = e.sigma.clone();
                    let constraints = e.constraints.clone();
                    let enterable = st.osc.members.iter().any(|m| {
                        let mut atoms = constraints.clone();
                        push_atoms(&mut atoms, &self.paths.paths[m.path].cond, &sigma);
                        self.feasible(&atoms)
                    });
                    if !enterable {
                        return Ok(Vec::new());
                    }
                }
                w.sigma = None;
                w.total = None;
                w.enc = None;
                w.steps.push(CaseStep { scc: scc_id, alt: 0 });
                vec![w]
            }
        };
        self.spawned += out.len();
        if self.spawned > self.max_cases.saturating_mul(8) {
            return Err(self.explosion());
        }
        Ok(out)
    }

    fn finish(&mut self, mut walk: Walk, nonterminating: bool) -> Result<(), Failure> {
        if !nonterminating {
            let exit = sym::not(self.paths.guard.clone());
            if let Some(sigma) = &walk.sigma {
                push_atoms(&mut walk.pre, &[exit.clone()], sigma);
            }
            if let Some(e) = &mut walk.enc {
                push_atoms(&mut e.constraints, &[exit], &e.sigma);
            }
        }
        let checked = match &walk.enc {
            Some(e) => &e.constraints,
            None => &walk.pre,
        };
        if !self.feasible(&checked.clone()) {
            return Ok(());
        }

        let tag = case_tag(&walk.steps, self.plans, self.domains);
        let encoding = if nonterminating {
            None
        } else {
            walk.enc.map(|e| CaseEncoding {
                iter_vars: e.iter_vars,
                constraints: e.constraints,
                post: e.sigma,
                total: e.total.normalize(),
            })
        };
        self.cases.push(RouteCase {
            route: walk.steps.iter().map(|s| s.scc).collect(),
            tag,
            pre: walk.pre,
            post: walk.sigma,
            total: walk.total.map(|t| t.normalize()),
            nonterminating,
            steps: walk.steps,
            encoding,
        });
        if self.cases.len() > self.max_cases {
            return Err(self.explosion());
        }
        Ok(())
    }
}

fn case_tag(
    steps: &[CaseStep],
    plans: &BTreeMap<usize, Result<StagePlan, Failure>>,
    domains: &[SymExpr],
) -> CaseTag {
    let kinds: Vec<&StagePlan> = steps
        .iter()
        .map(|s| plans[&s.scc].as_ref().expect("composed stages have plans"))
        .collect();
    if kinds.iter().all(|p| matches!(p, StagePlan::Once(_))) {
        return CaseTag::ZeroOrder;
    }
    if let [only] = kinds.as_slice() {
        match only {
            StagePlan::Affine(_) => return CaseTag::OneOrder,
            StagePlan::Periodic(st) => {
                return if declared_within(&st.osc.var, domains, &st.osc.oscillation) {
                    CaseTag::HighOrderPeriodic
                } else {
                    CaseTag::HighOrderPrephase
                };
            }
            StagePlan::Once(_) => unreachable!("all-once routes are zero order"),
        }
    }
    CaseTag::Composed
}

/// True when the variable's declared input range lies inside `set`.
fn declared_within(var: &str, domains: &[SymExpr], set: &IntervalSet) -> bool {
    let mut lo = None;
    let mut hi = None;
    for a in domains {
        let SymExpr::Cmp(op, l, r) = a else { continue };
        let (SymExpr::Var(SymVar::Pre(name)), SymExpr::Int(k)) = (l.as_ref(), r.as_ref())
        else {
            continue;
        };
        if name != var {
            continue;
        }
        match op {
            CmpOp::Ge => lo = Some(*k),
            CmpOp::Le => hi = Some(*k),
            _ => {}
        }
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => IntervalSet::closed(lo, hi).is_subset(set),
        _ => false,
    }
}

/// Stage entry description of one composed case.
#[derive(Debug, Clone)]
pub struct StageEntry {
    pub step: CaseStep,
    /// Substitution at stage entry over loop-entry values and earlier
    /// stages' iteration variables.
    pub sigma: BTreeMap<String, SymExpr>,
    /// Constraints established before this stage runs.
    pub constraints: Vec<SymExpr>,
    pub iter_vars: Vec<SymVar>,
}

/// Re-derives the symbolic state at entry of each stage of a case. Stops
/// at the first stage with no solver encoding, so the result may be
/// shorter than the case's step list.
pub fn entry_states(
    plans: &BTreeMap<usize, Result<StagePlan, Failure>>,
    case: &RouteCase,
) -> Vec<StageEntry> {
    let mut entries = Vec::new();
    let mut sigma: BTreeMap<String, SymExpr> = BTreeMap::new();
    let mut constraints: Vec<SymExpr> = Vec::new();
    let mut iter_vars: Vec<SymVar> = Vec::new();

    for (index, step) in case.steps.iter().enumerate() {
        let plan = plans[&step.scc].as_ref().expect("composed stages have plans");
        entries.push(StageEntry {
            step: *step,
            sigma: sigma.clone(),
            constraints: constraints.clone(),
            iter_vars: iter_vars.clone(),
        });
        match plan {
            StagePlan::Once(st) => {
                push_atoms(&mut constraints, &st.enter, &sigma);
                sigma = compose_map(&sigma, &st.op);
            }
            StagePlan::Affine(st) => match &st.count {
                Count::Closed { cases } => {
                    let cc = &cases[step.alt];
                    push_atoms(&mut constraints, &st.enter, &sigma);
                    push_atoms(&mut constraints, &cc.guards, &sigma);
                    let Some(count) = &cc.n else {
                        break;
                    };
                    let nk = iter_var(index);
                    let nv = SymExpr::Var(nk.clone());
                    constraints.push(
                        sym::cmp(CmpOp::Eq, nv.clone(), count.subst_pre(&sigma)).normalize(),
                    );
                    sigma = close_post(&sigma, &st.post, &nv);
                    iter_vars.push(nk);
                }
                Count::Implicit { step: atoms } => {
                    push_atoms(&mut constraints, &st.enter, &sigma);
                    let nk = iter_var(index);
                    let nv = SymExpr::Var(nk.clone());
                    constraints.push(sym::cmp(CmpOp::Ge, nv.clone(), sym::int(1)));
                    let last = sym::sub(nv.clone(), sym::int(1));
                    for a in atoms {
                        constraints.push(a.subst_n(&last).subst_pre(&sigma).normalize());
                    }
                    let failed =
                        sym::not(sym::and(atoms.iter().map(|a| a.subst_n(&nv)).collect()));
                    constraints.push(failed.subst_pre(&sigma).normalize());
                    sigma = close_post(&sigma, &st.post, &nv);
                    iter_vars.push(nk);
                }
            },
            StagePlan::Periodic(_) => break,
        }
    }
    entries
}
