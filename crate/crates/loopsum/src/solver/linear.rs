//! Built-in decision procedure for conjunctions of integer comparisons:
//! floor-division lowering, gcd tightening, interval propagation, and
//! branch-and-bound bisection search.
//!
//! Soundness contract: `Unsat` is returned only when propagation derives an
//! empty domain from the constraints alone, or when exhaustive search covered
//! domains that were bounded by the constraints themselves (never by the
//! search clamp). Every model is re-validated against the original atoms.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::sym::{CmpOp, SymExpr, SymVar};

use super::{Model, SolveResult, UnknownReason};

/// Box applied to variables the constraints leave unbounded. Search inside
/// the clamp can find models; exhausting it proves nothing.
pub const SEARCH_CLAMP: i128 = 10_000_000;

/// Domains of this size or smaller are enumerated value by value.
const ENUM_WIDTH: i128 = 64;

const PROPAGATION_ROUND_CAP: usize = 256;

/// One linear combination `sum(coef * var) + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinComb {
    pub coefs: BTreeMap<SymVar, i128>,
    pub k: i128,
}

impl LinComb {
    fn is_const(&self) -> bool {
        self.coefs.is_empty()
    }
}

/// A comparison atom in solver normal form.
#[derive(Debug, Clone)]
enum NormAtom {
    /// comb <= 0
    Le(LinComb),
    /// comb == 0
    Eq(LinComb),
    /// comb != 0
    Ne(LinComb),
    /// Non-affine polynomial comparison, checked by evaluation at leaves.
    Poly(SymExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    Linear,
    Polynomial,
    Opaque,
}

pub struct Lowered {
    atoms: Vec<NormAtom>,
    /// Original atoms plus definitions for lowering variables, used to
    /// validate candidate models.
    check_atoms: Vec<SymExpr>,
    vars: Vec<SymVar>,
    pub tier: Tier,
}

/// Search configuration for one `solve` call.
pub struct Search<'a> {
    pub deadline: Instant,
    pub node_budget: u64,
    /// Variable to branch on first, lowest values first. Used by the
    /// iteration-count minimization loop.
    pub prefer_low: Option<&'a SymVar>,
}

struct FreshNames {
    next: u32,
}

impl FreshNames {
    fn quotient(&mut self) -> SymVar {
        let v = SymVar::Fresh(format!("q#{}", self.next));
        self.next += 1;
        v
    }
}

/// Replaces every `Div`/`Mod` by a fresh quotient variable constrained to
/// the floor semantics, bottom-up.
fn lower_divmod(
    e: &SymExpr,
    fresh: &mut FreshNames,
    side: &mut Vec<SymExpr>,
) -> Result<SymExpr, ()> {
    Ok(match e {
        SymExpr::Int(_) | SymExpr::Bool(_) | SymExpr::Var(_) => e.clone(),
        SymExpr::Add(xs) => SymExpr::Add(
            xs.iter()
                .map(|x| lower_divmod(x, fresh, side))
                .collect::<Result<_, _>>()?,
        ),
        SymExpr::Mul(xs) => SymExpr::Mul(
            xs.iter()
                .map(|x| lower_divmod(x, fresh, side))
                .collect::<Result<_, _>>()?,
        ),
        SymExpr::Div(a, b) | SymExpr::Mod(a, b) => {
            let num = lower_divmod(a, fresh, side)?;
            let SymExpr::Int(d) = **b else {
                // Variable divisors cannot reach the solver; the frontend
                // rejects them.
                return Err(());
            };
            if d == 0 {
                return Err(());
            }
            let q = fresh.quotient();
            let qe = SymExpr::Var(q.clone());
            // q = floor(num / d):  d*q <= num <= d*q + d - 1   (d > 0)
            //                      d*q >= num >= d*q + d + 1   (d < 0)
            let dq = SymExpr::mul(vec![SymExpr::Int(d), qe.clone()]);
            if d > 0 {
                side.push(SymExpr::cmp(CmpOp::Le, dq.clone(), num.clone()));
                side.push(SymExpr::cmp(
                    CmpOp::Le,
                    num.clone(),
                    SymExpr::add(vec![dq, SymExpr::Int(d - 1)]),
                ));
            } else {
                side.push(SymExpr::cmp(CmpOp::Ge, dq.clone(), num.clone()));
                side.push(SymExpr::cmp(
                    CmpOp::Ge,
                    num.clone(),
                    SymExpr::add(vec![dq, SymExpr::Int(d + 1)]),
                ));
            }
            match e {
                SymExpr::Div(..) => qe,
                _ => {
                    // num % d = num - d*q
                    SymExpr::add(vec![
                        num,
                        SymExpr::mul(vec![SymExpr::Int(-d), qe]),
                    ])
                }
            }
        }
        SymExpr::Cmp(..) | SymExpr::Not(_) | SymExpr::And(_) | SymExpr::Or(_) => {
            // Boolean structure below an arithmetic position.
            return Err(());
        }
    })
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Extracts `lhs - rhs` as a linear combination, or keeps the comparison as
/// a polynomial atom. Returns None for non-polynomial structure.
fn difference(lhs: &SymExpr, rhs: &SymExpr) -> SymExpr {
    SymExpr::sub(lhs.clone(), rhs.clone()).normalize()
}

fn as_lincomb(e: &SymExpr) -> Option<LinComb> {
    let (coefs, k) = e.as_affine()?;
    Some(LinComb {
        coefs: coefs.into_iter().filter(|(_, c)| *c != 0).collect(),
        k,
    })
}

/// True when the normalized expression is a polynomial (sums and products of
/// variables and constants only).
fn is_polynomial(e: &SymExpr) -> bool {
    match e {
        SymExpr::Int(_) | SymExpr::Var(_) => true,
        SymExpr::Add(xs) | SymExpr::Mul(xs) => xs.iter().all(is_polynomial),
        _ => false,
    }
}

/// Lowers a conjunction of comparison atoms into solver normal form.
/// `atoms` must already be free of `&&`/`||`/`!` except `!` folded into
/// comparisons by normalization.
pub fn lower(atoms: &[SymExpr]) -> Result<Lowered, Tier> {
    let mut fresh = FreshNames { next: 0 };
    let mut queue: Vec<SymExpr> = Vec::new();
    let mut check_atoms: Vec<SymExpr> = Vec::new();
    for a in atoms {
        check_atoms.push(a.clone());
        queue.push(a.clone());
    }
    let mut norm = Vec::new();
    let mut tier = Tier::Linear;
    let mut i = 0;
    while i < queue.len() {
        let atom = queue[i].normalize();
        i += 1;
        match atom {
            SymExpr::Bool(true) => {}
            SymExpr::Bool(false) => {
                norm.push(NormAtom::Le(LinComb {
                    coefs: BTreeMap::new(),
                    k: 1,
                }));
            }
            SymExpr::And(parts) => queue.extend(parts),
            SymExpr::Not(inner) => match *inner {
                SymExpr::Cmp(op, l, r) => {
                    queue.push(SymExpr::Cmp(op.negate(), l, r));
                }
                _ => return Err(Tier::Opaque),
            },
            SymExpr::Cmp(op, l, r) => {
                let mut side = Vec::new();
                let l2 = lower_divmod(&l, &mut fresh, &mut side).map_err(|_| Tier::Opaque)?;
                let r2 = lower_divmod(&r, &mut fresh, &mut side).map_err(|_| Tier::Opaque)?;
                // Side constraints define the quotient variables; they are
                // needed both for search and model validation.
                for s in &side {
                    check_atoms.push(s.clone());
                }
                queue.extend(side);
                let diff = difference(&l2, &r2);
                let comb = as_lincomb(&diff);
                match (comb, op) {
                    (Some(mut c), CmpOp::Lt) => {
                        c.k += 1;
                        norm.push(NormAtom::Le(tighten(c)));
                    }
                    (Some(c), CmpOp::Le) => norm.push(NormAtom::Le(tighten(c))),
                    (Some(c), CmpOp::Gt) => {
                        let mut neg = negate_comb(&c);
                        neg.k += 1;
                        norm.push(NormAtom::Le(tighten(neg)));
                    }
                    (Some(c), CmpOp::Ge) => norm.push(NormAtom::Le(tighten(negate_comb(&c)))),
                    (Some(c), CmpOp::Eq) => norm.push(NormAtom::Eq(c)),
                    (Some(c), CmpOp::Ne) => norm.push(NormAtom::Ne(c)),
                    (None, _) => {
                        if is_polynomial(&diff) {
                            tier = Tier::Polynomial;
                            norm.push(NormAtom::Poly(SymExpr::Cmp(
                                op,
                                Box::new(diff),
                                Box::new(SymExpr::Int(0)),
                            )));
                        } else {
                            return Err(Tier::Opaque);
                        }
                    }
                }
            }
            _ => return Err(Tier::Opaque),
        }
    }

    // Saturating interval arithmetic is only sound while magnitudes stay
    // far from the i128 edges; bail out on absurd literals.
    const MAGNITUDE_CAP: i128 = 1 << 96;
    for a in &norm {
        if let NormAtom::Le(c) | NormAtom::Eq(c) | NormAtom::Ne(c) = a {
            if c.k.abs() > MAGNITUDE_CAP || c.coefs.values().any(|v| v.abs() > MAGNITUDE_CAP) {
                return Err(Tier::Opaque);
            }
        }
    }

    // Every variable mentioned anywhere must be assignable at leaves, or
    // model validation could not evaluate the original atoms.
    let mut vars: Vec<SymVar> = Vec::new();
    for a in &check_atoms {
        vars.extend(a.vars());
    }
    for a in &norm {
        match a {
            NormAtom::Le(c) | NormAtom::Eq(c) | NormAtom::Ne(c) => {
                vars.extend(c.coefs.keys().cloned());
            }
            NormAtom::Poly(e) => vars.extend(e.vars()),
        }
    }
    vars.sort();
    vars.dedup();

    Ok(Lowered {
        atoms: norm,
        check_atoms,
        vars,
        tier,
    })
}

fn negate_comb(c: &LinComb) -> LinComb {
    LinComb {
        coefs: c.coefs.iter().map(|(v, k)| (v.clone(), -k)).collect(),
        k: -c.k,
    }
}

/// Integer tightening: divide `sum(c*v) + k <= 0` through by the coefficient
/// gcd, rounding the constant soundly.
fn tighten(mut c: LinComb) -> LinComb {
    let g = c.coefs.values().fold(0i128, |acc, v| gcd(acc, *v));
    if g > 1 {
        // sum(ci*vi) <= -k  =>  sum((ci/g)*vi) <= floor(-k/g)
        let bound = crate::sym::div_floor(-c.k, g);
        for v in c.coefs.values_mut() {
            *v /= g;
        }
        c.k = -bound;
    }
    c
}

type Domain = (Option<i128>, Option<i128>);

fn dom_width(d: &Domain) -> Option<i128> {
    match d {
        (Some(lo), Some(hi)) => Some(hi - lo + 1),
        _ => None,
    }
}

/// Interval propagation to a fixpoint. Returns false when a domain empties,
/// which is a sound unsatisfiability proof.
fn propagate(
    atoms: &[NormAtom],
    index: &BTreeMap<SymVar, usize>,
    doms: &mut [Domain],
) -> bool {
    for _ in 0..PROPAGATION_ROUND_CAP {
        let mut changed = false;
        for atom in atoms {
            match atom {
                NormAtom::Le(c) => {
                    if !propagate_le(c, index, doms, &mut changed) {
                        return false;
                    }
                }
                // An equality propagates in both directions.
                NormAtom::Eq(c) => {
                    if !propagate_le(c, index, doms, &mut changed) {
                        return false;
                    }
                    if !propagate_le(&negate_comb(c), index, doms, &mut changed) {
                        return false;
                    }
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    true
}

/// Propagates one `sum(c*v) + k <= 0` constraint. Returns false on an empty
/// domain.
fn propagate_le(
    c: &LinComb,
    index: &BTreeMap<SymVar, usize>,
    doms: &mut [Domain],
    changed: &mut bool,
) -> bool {
    if c.is_const() {
        return c.k <= 0;
    }
    // Minimum achievable value of each term.
    for (target, &ct) in &c.coefs {
        let ti = index[target];
        let mut rest_min: i128 = c.k;
        let mut unbounded = false;
        for (v, &cv) in &c.coefs {
            if v == target {
                continue;
            }
            let (lo, hi) = doms[index[v]];
            let term_min = if cv > 0 {
                lo.map(|x| cv.saturating_mul(x))
            } else {
                hi.map(|x| cv.saturating_mul(x))
            };
            match term_min {
                Some(m) => rest_min = rest_min.saturating_add(m),
                None => {
                    unbounded = true;
                    break;
                }
            }
        }
        if unbounded {
            continue;
        }
        // ct * v <= -rest_min
        let bound = -rest_min;
        let (lo, hi) = &mut doms[ti];
        if ct > 0 {
            let ub = crate::sym::div_floor(bound, ct);
            if hi.map_or(true, |h| ub < h) {
                *hi = Some(ub);
                *changed = true;
            }
        } else {
            // ct*v <= bound with ct < 0  =>  v >= ceil(bound / ct)
            let lb = ceil_div(bound, ct);
            if lo.map_or(true, |l| lb > l) {
                *lo = Some(lb);
                *changed = true;
            }
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return false;
            }
        }
    }
    true
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -crate::sym::div_floor(-a, b)
}

fn eval_comb(c: &LinComb, env: &BTreeMap<SymVar, i128>) -> Option<i128> {
    let mut acc = c.k;
    for (v, coef) in &c.coefs {
        acc = acc.checked_add(coef.checked_mul(*env.get(v)?)?)?;
    }
    Some(acc)
}

enum SearchOutcome {
    Model(Model),
    /// Search space exhausted; sound proof only if nothing was clamped.
    Exhausted { clamped: bool },
    Budget,
    Timeout,
}

struct Searcher<'a> {
    lowered: &'a Lowered,
    index: BTreeMap<SymVar, usize>,
    search: &'a Search<'a>,
    nodes: u64,
}

impl Searcher<'_> {
    fn out_of_time(&self) -> bool {
        Instant::now() >= self.search.deadline
    }

    fn solve(&mut self, mut doms: Vec<Domain>, clamped: bool) -> SearchOutcome {
        self.nodes += 1;
        if self.nodes > self.search.node_budget {
            return SearchOutcome::Budget;
        }
        if self.nodes % 64 == 0 && self.out_of_time() {
            return SearchOutcome::Timeout;
        }
        if !propagate(&self.lowered.atoms, &self.index, &mut doms) {
            return SearchOutcome::Exhausted { clamped };
        }

        // Choose the branch variable: the preferred one if still wide,
        // otherwise the narrowest unfixed domain.
        let mut pick: Option<(usize, Option<i128>)> = None;
        if let Some(pv) = self.search.prefer_low {
            if let Some(&i) = self.index.get(pv) {
                if dom_width(&doms[i]) != Some(1) {
                    pick = Some((i, dom_width(&doms[i])));
                }
            }
        }
        if pick.is_none() {
            for (i, d) in doms.iter().enumerate() {
                let w = dom_width(d);
                if w == Some(1) {
                    continue;
                }
                let better = match (&pick, w) {
                    (None, _) => true,
                    (Some((_, None)), Some(_)) => true,
                    (Some((_, Some(pw))), Some(nw)) => nw < *pw,
                    _ => false,
                };
                if better {
                    pick = Some((i, w));
                }
            }
        }

        let Some((vi, width)) = pick else {
            // All domains are single points: a candidate assignment.
            let env: BTreeMap<SymVar, i128> = self
                .index
                .iter()
                .map(|(v, &i)| (v.clone(), doms[i].0.expect("fixed domain")))
                .collect();
            if self.leaf_ok(&env) {
                return SearchOutcome::Model(env);
            }
            return SearchOutcome::Exhausted { clamped };
        };

        let (mut lo, mut hi) = doms[vi];
        let mut now_clamped = clamped;
        if lo.is_none() {
            lo = Some(-SEARCH_CLAMP);
            now_clamped = true;
        }
        if hi.is_none() {
            hi = Some(SEARCH_CLAMP);
            now_clamped = true;
        }
        let (lo, hi) = (lo.unwrap(), hi.unwrap());
        if lo > hi {
            return SearchOutcome::Exhausted { clamped: now_clamped };
        }

        let prefer_this_low = self
            .search
            .prefer_low
            .and_then(|pv| self.index.get(pv))
            .is_some_and(|&i| i == vi);

        if width.is_some_and(|w| w <= ENUM_WIDTH) && hi - lo < ENUM_WIDTH {
            // Enumerate values, highest first by default.
            let values: Vec<i128> = if prefer_this_low {
                (lo..=hi).collect()
            } else {
                (lo..=hi).rev().collect()
            };
            let mut all_exhausted_clamped = now_clamped;
            for v in values {
                let mut d2 = doms.clone();
                d2[vi] = (Some(v), Some(v));
                match self.solve(d2, now_clamped) {
                    SearchOutcome::Exhausted { clamped: c } => {
                        all_exhausted_clamped |= c;
                    }
                    other => return other,
                }
            }
            SearchOutcome::Exhausted {
                clamped: all_exhausted_clamped,
            }
        } else {
            // Bisect; upper half first by default, lower half first when
            // minimizing this variable.
            let mid = lo + (hi - lo) / 2;
            let halves = if prefer_this_low {
                [(Some(lo), Some(mid)), (Some(mid + 1), Some(hi))]
            } else {
                [(Some(mid + 1), Some(hi)), (Some(lo), Some(mid))]
            };
            let mut all_clamped = now_clamped;
            for half in halves {
                let mut d2 = doms.clone();
                d2[vi] = half;
                match self.solve(d2, now_clamped) {
                    SearchOutcome::Exhausted { clamped: c } => all_clamped |= c,
                    other => return other,
                }
            }
            SearchOutcome::Exhausted { clamped: all_clamped }
        }
    }

    /// Full-assignment check: disequalities, polynomial atoms, and the
    /// original expressions (floor semantics included).
    fn leaf_ok(&self, env: &BTreeMap<SymVar, i128>) -> bool {
        for atom in &self.lowered.atoms {
            let ok = match atom {
                NormAtom::Le(c) => eval_comb(c, env).is_some_and(|v| v <= 0),
                NormAtom::Eq(c) => eval_comb(c, env).is_some_and(|v| v == 0),
                NormAtom::Ne(c) => eval_comb(c, env).is_some_and(|v| v != 0),
                NormAtom::Poly(e) => e.eval_bool(env).unwrap_or(false),
            };
            if !ok {
                return false;
            }
        }
        self.lowered
            .check_atoms
            .iter()
            .all(|a| a.eval_bool(env).unwrap_or(false))
    }
}

/// Decides a lowered conjunction.
pub fn solve(lowered: &Lowered, search: &Search) -> SolveResult {
    let index: BTreeMap<SymVar, usize> = lowered
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| (v.clone(), i))
        .collect();
    let doms = vec![(None, None); lowered.vars.len()];
    let mut s = Searcher {
        lowered,
        index,
        search,
        nodes: 0,
    };
    match s.solve(doms, false) {
        SearchOutcome::Model(env) => {
            // Strip lowering variables from the reported model.
            let model: Model = env
                .into_iter()
                .filter(|(v, _)| !matches!(v, SymVar::Fresh(name) if name.starts_with("q#")))
                .collect();
            SolveResult::Sat(model)
        }
        SearchOutcome::Exhausted { clamped } => {
            // Exhausting a clamped box proves nothing; exhausting domains
            // the constraints themselves bounded is a complete enumeration.
            if clamped {
                SolveResult::Unknown(UnknownReason::Incomplete)
            } else {
                SolveResult::Unsat
            }
        }
        SearchOutcome::Budget => SolveResult::Unknown(UnknownReason::Budget),
        SearchOutcome::Timeout => SolveResult::Unknown(UnknownReason::Timeout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sym::{cmp, int, mul, pre, CmpOp};
    use std::time::Duration;

    fn check(atoms: &[SymExpr]) -> SolveResult {
        let lowered = match lower(atoms) {
            Ok(l) => l,
            Err(_) => return SolveResult::Unknown(UnknownReason::Opaque),
        };
        let search = Search {
            deadline: Instant::now() + Duration::from_secs(5),
            node_budget: 200_000,
            prefer_low: None,
        };
        solve(&lowered, &search)
    }

    #[test]
    fn contradictory_bounds_are_unsat() {
        // x >= 0 and x + 7 < 5
        let atoms = vec![
            cmp(CmpOp::Ge, pre("x"), int(0)),
            cmp(CmpOp::Lt, SymExpr::add(vec![pre("x"), int(7)]), int(5)),
        ];
        assert_eq!(check(&atoms), SolveResult::Unsat);
    }

    #[test]
    fn feasible_system_yields_validated_model() {
        // 3 <= x <= 9, x + y == 12, y >= 5
        let atoms = vec![
            cmp(CmpOp::Le, int(3), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(9)),
            cmp(CmpOp::Eq, SymExpr::add(vec![pre("x"), pre("y")]), int(12)),
            cmp(CmpOp::Ge, pre("y"), int(5)),
        ];
        match check(&atoms) {
            SolveResult::Sat(m) => {
                let x = m[&SymVar::pre("x")];
                let y = m[&SymVar::pre("y")];
                assert!((3..=9).contains(&x));
                assert_eq!(x + y, 12);
                assert!(y >= 5);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn gcd_tightening_closes_parity_gaps() {
        // 2x == 7 has no integer solution.
        let atoms = vec![cmp(
            CmpOp::Eq,
            mul(vec![int(2), pre("x")]),
            int(7),
        )];
        // Equality over gcd 2 with odd constant: search must exhaust.
        let r = check(&atoms);
        assert_eq!(r, SolveResult::Unsat, "2x = 7 over the integers");
    }

    #[test]
    fn disequalities_filter_models() {
        // 0 <= x <= 1, x != 0, x != 1 is unsat; bounds come from atoms so
        // the exhaustion proof is sound.
        let atoms = vec![
            cmp(CmpOp::Le, int(0), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(1)),
            cmp(CmpOp::Ne, pre("x"), int(0)),
            cmp(CmpOp::Ne, pre("x"), int(1)),
        ];
        assert_eq!(check(&atoms), SolveResult::Unsat);
    }

    #[test]
    fn floor_division_is_lowered_exactly() {
        // x / 3 == 4 and x < 12 forces x in {12..14} intersect (-inf,12) = empty.
        let atoms = vec![
            cmp(
                CmpOp::Eq,
                SymExpr::Div(Box::new(pre("x")), Box::new(int(3))),
                int(4),
            ),
            cmp(CmpOp::Lt, pre("x"), int(12)),
        ];
        assert_eq!(check(&atoms), SolveResult::Unsat);

        // Negative operand: x / 3 == -2 admits x = -6..-4.
        let atoms = vec![cmp(
            CmpOp::Eq,
            SymExpr::Div(Box::new(pre("x")), Box::new(int(3))),
            int(-2),
        )];
        match check(&atoms) {
            SolveResult::Sat(m) => {
                let x = m[&SymVar::pre("x")];
                assert_eq!(crate::sym::div_floor(x, 3), -2, "x = {x}");
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn modulo_matches_floor_semantics() {
        // x % 7 == 3 and 40 <= x <= 50 admits x in {45}... check model.
        let atoms = vec![
            cmp(
                CmpOp::Eq,
                SymExpr::Mod(Box::new(pre("x")), Box::new(int(7))),
                int(3),
            ),
            cmp(CmpOp::Le, int(40), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(50)),
        ];
        match check(&atoms) {
            SolveResult::Sat(m) => {
                let x = m[&SymVar::pre("x")];
                assert_eq!(crate::sym::mod_floor(x, 7), 3);
                assert!((40..=50).contains(&x));
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn unbounded_feasible_systems_find_models_via_clamp() {
        // x > 1000: unbounded above, still satisfiable.
        let atoms = vec![cmp(CmpOp::Gt, pre("x"), int(1000))];
        match check(&atoms) {
            SolveResult::Sat(m) => assert!(m[&SymVar::pre("x")] > 1000),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn clamped_exhaustion_is_unknown_not_unsat() {
        // x*x < 0 over a clamp-bounded var: polynomial with no solution in
        // the box; claiming unsat would require the clamp, so: unknown.
        let atoms = vec![cmp(
            CmpOp::Lt,
            mul(vec![pre("x"), pre("x")]),
            int(0),
        )];
        match check(&atoms) {
            SolveResult::Unknown(_) => {}
            other => panic!("expected unknown, got {other:?}"),
        }
    }

    #[test]
    fn polynomial_models_are_found_concretely() {
        // x*x == 49, 0 <= x <= 10.
        let atoms = vec![
            cmp(CmpOp::Eq, mul(vec![pre("x"), pre("x")]), int(49)),
            cmp(CmpOp::Le, int(0), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(10)),
        ];
        match check(&atoms) {
            SolveResult::Sat(m) => assert_eq!(m[&SymVar::pre("x")], 7),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn bounded_polynomial_exhaustion_is_unsat() {
        // x*x == 50 for 0 <= x <= 10: bounds come from atoms, domain is
        // enumerable, no value works.
        let atoms = vec![
            cmp(CmpOp::Eq, mul(vec![pre("x"), pre("x")]), int(50)),
            cmp(CmpOp::Le, int(0), pre("x")),
            cmp(CmpOp::Le, pre("x"), int(10)),
        ];
        assert_eq!(check(&atoms), SolveResult::Unsat);
    }

    #[test]
    fn prefer_low_returns_minimum() {
        let n = SymVar::Fresh("n#".to_string());
        let nv = SymExpr::Var(n.clone());
        // 2n >= x - 3, n >= 1, x == 10  =>  n >= 4 (ceil(7/2)).
        let atoms = vec![
            cmp(
                CmpOp::Ge,
                mul(vec![int(2), nv.clone()]),
                SymExpr::sub(pre("x"), int(3)),
            ),
            cmp(CmpOp::Ge, nv, int(1)),
            cmp(CmpOp::Eq, pre("x"), int(10)),
        ];
        let lowered = lower(&atoms).unwrap();
        let search = Search {
            deadline: Instant::now() + Duration::from_secs(5),
            node_budget: 200_000,
            prefer_low: Some(&n),
        };
        match solve(&lowered, &search) {
            SolveResult::Sat(m) => assert_eq!(m[&n], 4),
            other => panic!("expected sat, got {other:?}"),
        }
    }
}
