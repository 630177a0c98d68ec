//! Oscillation analysis for components whose paths hand one variable back
//! and forth. Picks the variable that separates the member conditions into
//! disjoint value regions, then closes the set of values that cross between
//! members under each member's affine image. The closed set is where the
//! value can oscillate; everything outside drifts through at most once.

use std::collections::{BTreeMap, BTreeSet};

use crate::interval::IntervalSet;
use crate::spath::LoopPaths;
use crate::sym::{CmpOp, SymExpr, SymVar};

use super::{Failure, FailureKind};

/// Interval arithmetic horizon standing in for unbounded sides.
pub const VALUE_BOUND: i128 = 1 << 62;

const MAX_ROUNDS: usize = 64;

#[derive(Debug, Clone)]
pub struct OscMember {
    pub path: usize,
    /// Oscillating-variable values selecting this member.
    pub region: IntervalSet,
    pub region_atoms: Vec<SymExpr>,
    /// v' = scale * v + offset.
    pub scale: i128,
    pub offset: i128,
    /// Other updated variables: v' = v + delta, delta over the oscillating
    /// variable, untouched variables, and constants.
    pub counter_deltas: BTreeMap<String, SymExpr>,
    /// Updates that overwrite with a value independent of the loop state.
    pub counter_resets: BTreeMap<String, SymExpr>,
    /// Remaining guard atoms, parsed for progression arithmetic.
    pub counter_atoms: Vec<ParsedAtom>,
}

/// Affine comparison `sum(coefs * var) + konst  op  0`.
#[derive(Debug, Clone)]
pub struct ParsedAtom {
    pub source: SymExpr,
    pub op: CmpOp,
    pub coefs: BTreeMap<String, i128>,
    pub konst: i128,
}

impl ParsedAtom {
    pub fn value(&self, state: &BTreeMap<String, i128>) -> Option<i128> {
        let mut v = self.konst;
        for (name, c) in &self.coefs {
            v = v.checked_add(c.checked_mul(*state.get(name)?)?)?;
        }
        Some(v)
    }

    pub fn holds_at(&self, value: i128) -> bool {
        self.op.eval(value, 0)
    }
}

#[derive(Debug, Clone)]
pub struct OscAnalysis {
    pub var: String,
    pub members: Vec<OscMember>,
    /// Union of all member regions.
    pub regions: IntervalSet,
    /// Values that can cross from one member to another: the seed set.
    pub entry: IntervalSet,
    /// Closure of the seed set under the member images.
    pub oscillation: IntervalSet,
    /// Rounds until the closure was detected.
    pub rounds: usize,
    /// Shrink fixpoint of the closure: values revisited forever.
    pub stable: IntervalSet,
}

fn full() -> IntervalSet {
    IntervalSet::range(-VALUE_BOUND, VALUE_BOUND)
}

/// Integer solution set of an atom in one variable. None when the atom is
/// not an affine comparison over that variable alone.
pub fn atom_to_interval(atom: &SymExpr, var: &str) -> Option<IntervalSet> {
    match atom.normalize() {
        SymExpr::Bool(true) => Some(full()),
        SymExpr::Bool(false) => Some(IntervalSet::empty()),
        SymExpr::Not(inner) => {
            let hit = atom_to_interval(&inner, var)?;
            Some(full().subtract(&hit))
        }
        SymExpr::Cmp(op, l, r) => {
            let e = crate::sym::sub(*l, *r).normalize();
            let (coefs, c) = e.as_affine()?;
            let mut a = 0;
            for (v, coef) in &coefs {
                match v {
                    SymVar::Pre(name) if name == var => a = *coef,
                    _ if *coef == 0 => {}
                    _ => return None,
                }
            }
            Some(solve_linear(a, c, op))
        }
        _ => None,
    }
}

/// Integer x with `a*x + c op 0`.
fn solve_linear(a: i128, c: i128, op: CmpOp) -> IntervalSet {
    use crate::sym::{div_ceil, div_floor};
    if a == 0 {
        return if op.eval(c, 0) {
            full()
        } else {
            IntervalSet::empty()
        };
    }
    // Flip to a positive coefficient; strict and non-strict swap sides.
    let (a, c, op) = if a < 0 {
        let flipped = match op {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        };
        (-a, -c, flipped)
    } else {
        (a, c, op)
    };
    match op {
        CmpOp::Lt => IntervalSet::range(-VALUE_BOUND, div_floor(-c - 1, a) + 1),
        CmpOp::Le => IntervalSet::range(-VALUE_BOUND, div_floor(-c, a) + 1),
        CmpOp::Gt => IntervalSet::range(div_ceil(1 - c, a), VALUE_BOUND),
        CmpOp::Ge => IntervalSet::range(div_ceil(-c, a), VALUE_BOUND),
        CmpOp::Eq => {
            if (-c) % a == 0 {
                IntervalSet::point(-c / a)
            } else {
                IntervalSet::empty()
            }
        }
        CmpOp::Ne => {
            if (-c) % a == 0 {
                full().subtract(&IntervalSet::point(-c / a))
            } else {
                full()
            }
        }
    }
}

struct Candidate {
    members: Vec<OscMember>,
}

/// Rejection note while trying one variable; the kinds drive the final
/// failure classification when no variable works.
struct Reject {
    affine: bool,
}

fn try_variable(
    paths: &LoopPaths,
    member_ids: &[usize],
    var: &str,
    assigned: &BTreeSet<String>,
) -> Result<Candidate, Reject> {
    let mut members = Vec::new();
    for &id in member_ids {
        let sp = &paths.paths[id];
        // The oscillating variable must evolve from itself alone.
        let osc_expr = sp.op.get(var).cloned().unwrap_or_else(|| crate::sym::pre(var));
        let Some((coefs, offset)) = osc_expr.as_affine() else {
            return Err(Reject { affine: false });
        };
        let mut scale = 0;
        for (v, c) in &coefs {
            match v {
                SymVar::Pre(name) if name == var => scale = *c,
                _ if *c == 0 => {}
                _ => return Err(Reject { affine: true }),
            }
        }

        let mut region = full();
        let mut region_atoms = Vec::new();
        let mut counter_atoms = Vec::new();
        for atom in &sp.cond {
            let vars = atom.vars();
            let mentions_var = vars.contains(&SymVar::Pre(var.to_string()));
            if mentions_var {
                let Some(hit) = atom_to_interval(atom, var) else {
                    return Err(Reject { affine: true });
                };
                region = region.intersect(&hit);
                region_atoms.push(atom.clone());
            } else {
                let Some(parsed) = parse_counter_atom(atom) else {
                    return Err(Reject { affine: false });
                };
                counter_atoms.push(parsed);
            }
        }

        let mut counter_deltas = BTreeMap::new();
        let mut counter_resets = BTreeMap::new();
        for (v, e) in &sp.op {
            if v == var {
                continue;
            }
            let Some((coefs, konst)) = e.as_affine() else {
                return Err(Reject { affine: false });
            };
            let self_var = SymVar::Pre(v.clone());
            let self_coef = coefs.get(&self_var).copied().unwrap_or(0);
            for (w, c) in &coefs {
                if *c == 0 || w == &self_var {
                    continue;
                }
                let SymVar::Pre(name) = w else {
                    return Err(Reject { affine: true });
                };
                // Deltas may read the oscillating value; any other updated
                // variable couples the recurrences.
                if name != var && assigned.contains(name) {
                    return Err(Reject { affine: true });
                }
            }
            match self_coef {
                1 => {
                    let delta = super::affine::rest_of(&coefs, konst, &self_var);
                    counter_deltas.insert(v.clone(), delta);
                }
                0 => {
                    let reads_osc = coefs
                        .get(&SymVar::Pre(var.to_string()))
                        .is_some_and(|c| *c != 0);
                    if reads_osc {
                        return Err(Reject { affine: true });
                    }
                    counter_resets.insert(v.clone(), e.clone());
                }
                _ => return Err(Reject { affine: true }),
            }
        }

        members.push(OscMember {
            path: id,
            region,
            region_atoms,
            scale,
            offset,
            counter_deltas,
            counter_resets,
            counter_atoms,
        });
    }

    // Counter atoms must not watch a variable some member resets, since a
    // reset breaks the progression arithmetic used for exit counts.
    let reset_vars: BTreeSet<&String> = members
        .iter()
        .flat_map(|m| m.counter_resets.keys())
        .collect();
    for m in &members {
        for atom in &m.counter_atoms {
            if atom.coefs.keys().any(|v| reset_vars.contains(v)) {
                return Err(Reject { affine: true });
            }
        }
    }

    // Members must claim disjoint value regions, so a value picks its path.
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if !members[i].region.intersect(&members[j].region).is_empty() {
                return Err(Reject { affine: true });
            }
        }
    }
    Ok(Candidate { members })
}

fn parse_counter_atom(atom: &SymExpr) -> Option<ParsedAtom> {
    match atom.normalize() {
        SymExpr::Cmp(op, l, r) => {
            let e = crate::sym::sub(*l, *r).normalize();
            let (coefs, konst) = e.as_affine()?;
            let mut named = BTreeMap::new();
            for (v, c) in coefs {
                if c == 0 {
                    continue;
                }
                let SymVar::Pre(name) = v else { return None };
                named.insert(name, c);
            }
            Some(ParsedAtom {
                source: atom.clone(),
                op,
                coefs: named,
                konst,
            })
        }
        _ => None,
    }
}

fn image(members: &[OscMember], a: &IntervalSet) -> IntervalSet {
    let mut out = IntervalSet::empty();
    for m in members {
        let slice = a.intersect(&m.region);
        if slice.is_empty() {
            continue;
        }
        out = out.union(&slice.affine_image(m.scale, m.offset));
    }
    out
}

/// Closes the crossing seed set under the member images.
pub fn analyze(
    paths: &LoopPaths,
    member_ids: &[usize],
    cap: u128,
) -> Result<OscAnalysis, Failure> {
    let assigned: BTreeSet<String> = member_ids
        .iter()
        .flat_map(|&id| paths.paths[id].op.keys().cloned())
        .collect();

    let mut chosen: Option<(String, Candidate)> = None;
    let mut saw_nonaffine = false;
    for var in &assigned {
        match try_variable(paths, member_ids, var, &assigned) {
            Ok(c) => {
                chosen = Some((var.clone(), c));
                break;
            }
            Err(r) => saw_nonaffine |= !r.affine,
        }
    }
    let Some((var, candidate)) = chosen else {
        return Err(if saw_nonaffine {
            Failure::new(
                FailureKind::SolverUnknown,
                "a member update or guard is not affine",
            )
        } else {
            Failure::new(
                FailureKind::CoupledRecurrence,
                "no single variable separates the member conditions",
            )
        });
    };
    let members = candidate.members;

    let mut regions = IntervalSet::empty();
    for m in &members {
        regions = regions.union(&m.region);
    }

    // Seed: values of each member that its image sends into another member.
    let mut entry = IntervalSet::empty();
    for (i, m) in members.iter().enumerate() {
        let mut others = IntervalSet::empty();
        for (j, o) in members.iter().enumerate() {
            if i != j {
                others = others.union(&o.region);
            }
        }
        let crossing = if m.scale == 0 {
            if others.contains(m.offset) {
                m.region.clone()
            } else {
                IntervalSet::empty()
            }
        } else {
            m.region.intersect(&others.affine_preimage(m.scale, m.offset))
        };
        entry = entry.union(&crossing);
    }

    let overflow = |set: &IntervalSet| set.count() > cap;
    if overflow(&entry) {
        return Err(Failure::new(
            FailureKind::InfiniteOscillation,
            format!("crossing set exceeds {cap} values"),
        ));
    }

    let mut a = entry.clone();
    let mut closed = None;
    for round in 1..=MAX_ROUNDS {
        let b = image(&members, &a).intersect(&regions);
        if b.is_subset(&a) {
            closed = Some(round);
            break;
        }
        a = a.union(&b);
        if overflow(&a) {
            return Err(Failure::new(
                FailureKind::InfiniteOscillation,
                format!("oscillation set exceeds {cap} values"),
            ));
        }
    }
    let Some(rounds) = closed else {
        return Err(Failure::new(
            FailureKind::InfiniteOscillation,
            format!("no closure within {MAX_ROUNDS} rounds"),
        ));
    };
    let oscillation = a;

    // Shrink to the values that keep being revisited. Images of a closed
    // set stay inside it, so this chain is decreasing and must stop.
    let mut stable = oscillation.clone();
    loop {
        let next = image(&members, &stable).intersect(&regions);
        if next == stable {
            break;
        }
        debug_assert!(next.is_subset(&stable));
        stable = next;
    }

    debug_assert!(entry.is_subset(&oscillation));
    Ok(OscAnalysis {
        var,
        members,
        regions,
        entry,
        oscillation,
        rounds,
        stable,
    })
}
