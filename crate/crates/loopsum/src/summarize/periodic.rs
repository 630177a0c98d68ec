//! Periodic behaviour of an oscillating component. Inside the closed value
//! set the next value is a function of the current one, so every orbit is a
//! tail into a cycle and the cycle is found after at most as many steps as
//! the set has values. Runs are evaluated with two accelerations: straight
//! drifts outside the set are skipped in one hop, and once a cycle repeats,
//! whole turns are jumped by linear extrapolation of the exit guards.

use std::collections::{BTreeMap, HashSet};

use crate::interval::IntervalSet;
use crate::sym::{div_ceil, CmpOp};

use super::oscillate::{OscAnalysis, OscMember};

/// One cycle of the value graph, rotated to start at its smallest value.
#[derive(Debug, Clone)]
pub struct CycleForm {
    pub values: Vec<i128>,
    /// Member path taken from each value.
    pub paths: Vec<usize>,
    pub modular: Option<ModularForm>,
}

/// Closed form `x_N = ((x_0 - lo) + step * N) mod m + lo`, valid when the
/// cycle covers the contiguous block `[lo, lo + m)` and every transition
/// advances by the same residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModularForm {
    pub lo: i128,
    pub modulus: i128,
    pub step: i128,
}

impl ModularForm {
    pub fn render(&self, var: &str) -> String {
        if self.lo == 0 {
            format!("({var} + {}*N) mod {}", self.step, self.modulus)
        } else {
            format!(
                "(({var} - {lo}) + {}*N) mod {} + {lo}",
                self.step,
                self.modulus,
                lo = self.lo
            )
        }
    }

    pub fn value_at(&self, x0: i128, n: u128) -> i128 {
        let m = self.modulus;
        let shift = crate::sym::mod_floor(self.step.checked_mul((n % m as u128) as i128).unwrap(), m);
        crate::sym::mod_floor(x0 - self.lo + shift, m) + self.lo
    }
}

#[derive(Debug, Clone)]
pub struct PeriodicStage {
    pub osc: OscAnalysis,
    pub cycles: Vec<CycleForm>,
}

/// Caps full cycle enumeration; larger sets still evaluate, they just get
/// no printed closed form.
const ENUMERATION_CAP: u128 = 65_536;

/// The member whose region holds the value, if any.
pub fn member_of(osc: &OscAnalysis, v: i128) -> Option<usize> {
    osc.members.iter().position(|m| m.region.contains(v))
}

/// Next value in the oscillation graph.
pub fn next_value(osc: &OscAnalysis, v: i128) -> Option<i128> {
    let m = &osc.members[member_of(osc, v)?];
    v.checked_mul(m.scale)?.checked_add(m.offset)
}

pub fn build(osc: OscAnalysis) -> PeriodicStage {
    let cycles = if osc.oscillation.count() <= ENUMERATION_CAP {
        find_cycles(&osc)
    } else {
        Vec::new()
    };
    PeriodicStage { osc, cycles }
}

fn find_cycles(osc: &OscAnalysis) -> Vec<CycleForm> {
    let mut color: BTreeMap<i128, u8> = BTreeMap::new();
    let mut cycles = Vec::new();
    for start in osc.oscillation.iter_values() {
        if color.contains_key(&start) {
            continue;
        }
        let mut path = Vec::new();
        let mut at = start;
        loop {
            if let Some(&c) = color.get(&at) {
                if c == 1 {
                    // Found a new cycle: the tail of `path` from `at`.
                    let pos = path.iter().position(|&v| v == at).unwrap();
                    cycles.push(canonical_cycle(osc, &path[pos..]));
                }
                break;
            }
            color.insert(at, 1);
            path.push(at);
            match next_value(osc, at) {
                Some(n) if osc.oscillation.contains(n) => at = n,
                _ => break,
            }
        }
        for v in path {
            color.insert(v, 2);
        }
    }
    cycles.sort_by_key(|c| c.values[0]);
    cycles
}

fn canonical_cycle(osc: &OscAnalysis, values: &[i128]) -> CycleForm {
    let min_pos = values
        .iter()
        .enumerate()
        .min_by_key(|(_, v)| **v)
        .map(|(i, _)| i)
        .unwrap();
    let rotated: Vec<i128> = values[min_pos..]
        .iter()
        .chain(values[..min_pos].iter())
        .copied()
        .collect();
    let paths: Vec<usize> = rotated
        .iter()
        .map(|&v| osc.members[member_of(osc, v).unwrap()].path)
        .collect();
    let modular = modular_form(&rotated);
    CycleForm {
        values: rotated,
        paths,
        modular,
    }
}

fn modular_form(values: &[i128]) -> Option<ModularForm> {
    let m = values.len() as i128;
    let lo = *values.iter().min().unwrap();
    let hi = *values.iter().max().unwrap();
    if hi - lo + 1 != m {
        return None;
    }
    let step = crate::sym::mod_floor(values[1 % values.len()] - values[0], m);
    for (i, &v) in values.iter().enumerate() {
        let next = values[(i + 1) % values.len()];
        if crate::sym::mod_floor(next - v, m) != step {
            return None;
        }
    }
    Some(ModularForm {
        lo,
        modulus: m,
        step,
    })
}

/// Outcome of running one component to departure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StageRun {
    /// No member condition held after `steps` iterations (possibly zero:
    /// the component was never entered).
    Departed { steps: u128 },
    /// Every exit guard drifts the wrong way; the component never ends.
    Nonterminating,
    Abort(String),
}

fn eval_delta(
    delta: &crate::sym::SymExpr,
    state: &BTreeMap<String, i128>,
) -> Result<i128, String> {
    super::eval_int_state(delta, state, None).map_err(|e| e.to_string())
}

/// Full member check: the value lies in its region and the counter atoms
/// hold in the current state.
fn live_member<'a>(
    osc: &'a OscAnalysis,
    state: &BTreeMap<String, i128>,
) -> Result<Option<&'a OscMember>, String> {
    let v = *state
        .get(&osc.var)
        .ok_or_else(|| format!("{} is unbound", osc.var))?;
    for m in &osc.members {
        if !m.region.contains(v) {
            continue;
        }
        for atom in &m.counter_atoms {
            let val = atom
                .value(state)
                .ok_or_else(|| "counter overflow".to_string())?;
            if !atom.holds_at(val) {
                return Ok(None);
            }
        }
        return Ok(Some(m));
    }
    Ok(None)
}

fn apply_step(m: &OscMember, osc_var: &str, state: &mut BTreeMap<String, i128>) -> Result<(), String> {
    let v = state[osc_var];
    let next = v
        .checked_mul(m.scale)
        .and_then(|x| x.checked_add(m.offset))
        .ok_or("value overflow")?;
    let mut writes: Vec<(String, i128)> = vec![(osc_var.to_string(), next)];
    for (w, delta) in &m.counter_deltas {
        let d = eval_delta(delta, state)?;
        let cur = state.get(w).copied().unwrap_or(0);
        writes.push((w.clone(), cur.checked_add(d).ok_or("counter overflow")?));
    }
    for (w, expr) in &m.counter_resets {
        writes.push((w.clone(), eval_delta(expr, state)?));
    }
    for (w, val) in writes {
        state.insert(w, val);
    }
    Ok(())
}

/// First t >= 1 with `base + t*slope` no longer satisfying `op _ 0`,
/// given that it holds at t = 0.
fn first_fail(op: CmpOp, base: i128, slope: i128) -> Option<i128> {
    match op {
        CmpOp::Lt => (slope > 0).then(|| div_ceil(-base, slope)),
        CmpOp::Le => (slope > 0).then(|| div_ceil(1 - base, slope)),
        CmpOp::Gt => (slope < 0).then(|| div_ceil(-base, slope)),
        CmpOp::Ge => (slope < 0).then(|| div_ceil(-1 - base, slope)),
        CmpOp::Eq => (slope != 0).then_some(1),
        CmpOp::Ne => {
            if slope == 0 || base % slope != 0 {
                None
            } else {
                let t = -base / slope;
                (t >= 1).then_some(t)
            }
        }
    }
}

/// Literal per-step counter changes of one member, when they do not read
/// the oscillating value; a requirement for the drift fast-forward.
fn literal_deltas(
    m: &OscMember,
    state: &BTreeMap<String, i128>,
    osc_var: &str,
) -> Option<BTreeMap<String, i128>> {
    if !m.counter_resets.is_empty() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (w, delta) in &m.counter_deltas {
        if delta
            .vars()
            .iter()
            .any(|v| matches!(v, crate::sym::SymVar::Pre(n) if n == osc_var))
        {
            return None;
        }
        out.insert(w.clone(), eval_delta(delta, state).ok()?);
    }
    Some(out)
}

/// Steps until the drifting value first lands inside `set`, if ever.
fn steps_into(set: &IntervalSet, v: i128, d: i128) -> Option<i128> {
    let mut best: Option<i128> = None;
    for &(lo, hi) in set.blocks() {
        let t = if d > 0 {
            let t = div_ceil(lo - v, d).max(1);
            (v + t * d < hi).then_some(t)
        } else {
            let t = div_ceil(v - (hi - 1), -d).max(1);
            (v + t * d >= lo).then_some(t)
        };
        if let Some(t) = t {
            best = Some(best.map_or(t, |b: i128| b.min(t)));
        }
    }
    best
}

/// Steps until the drifting value first leaves the block of `set` that
/// holds it.
fn steps_out_of_block(set: &IntervalSet, v: i128, d: i128) -> Option<i128> {
    let (lo, hi) = *set
        .blocks()
        .iter()
        .find(|&&(lo, hi)| v >= lo && v < hi)?;
    if d > 0 {
        Some(div_ceil(hi - v, d))
    } else {
        Some(div_ceil(v - (lo - 1), -d).max(1))
    }
}

/// Runs the component from the current state until no member condition
/// holds, mutating the state in place.
pub fn run_stage(
    stage: &PeriodicStage,
    state: &mut BTreeMap<String, i128>,
    fuel: &mut u64,
) -> StageRun {
    let osc = &stage.osc;
    let mut steps: u128 = 0;
    let mut seen: HashSet<i128> = HashSet::new();
    let mut recording: Option<Recording> = None;
    let mut jumped = false;

    loop {
        let m = match live_member(osc, state) {
            Ok(Some(m)) => m,
            Ok(None) => return StageRun::Departed { steps },
            Err(e) => return StageRun::Abort(e),
        };
        let v = state[&osc.var];
        let inside = osc.oscillation.contains(v);

        if inside && !jumped {
            if let Some((anchor, points, cycle_delta)) = record_or_jump(
                osc,
                state,
                v,
                &mut seen,
                &mut recording,
            ) {
                // A full cycle is on record: extrapolate each exit guard.
                match plan_jump(osc, &points, &cycle_delta) {
                    Jump::Never => return StageRun::Nonterminating,
                    Jump::After(turns) => {
                        let len = points.len() as u128;
                        if turns > 0 {
                            for (w, d) in &cycle_delta {
                                let total = d.checked_mul(turns as i128);
                                let Some(total) = total else {
                                    return StageRun::Abort("counter overflow".into());
                                };
                                let cur = state.get(w).copied().unwrap_or(0);
                                let Some(next) = cur.checked_add(total) else {
                                    return StageRun::Abort("counter overflow".into());
                                };
                                state.insert(w.clone(), next);
                            }
                            steps += turns as u128 * len;
                        }
                        debug_assert_eq!(state[&osc.var], anchor);
                        jumped = true;
                        continue;
                    }
                }
            }
        }

        if !inside && !jumped {
            // Straight drift: hop to the next interesting state in one go.
            if m.scale == 1 && m.offset != 0 {
                if let Some(deltas) = literal_deltas(m, state, &osc.var) {
                    match drift_hop(osc, m, &deltas, v, state) {
                        DriftHop::Stuck => return StageRun::Nonterminating,
                        DriftHop::Overflow => {
                            return StageRun::Abort("counter overflow".into())
                        }
                        DriftHop::Advanced(k) => {
                            steps += k as u128;
                            if *fuel == 0 {
                                return StageRun::Abort("out of fuel".into());
                            }
                            *fuel -= 1;
                            continue;
                        }
                    }
                }
            } else if m.scale == 1 && m.offset == 0 && m.counter_deltas.is_empty() {
                // Fixed point with unchanging counters: nothing ever moves.
                return StageRun::Nonterminating;
            }
        }

        if *fuel == 0 {
            return StageRun::Abort("out of fuel".into());
        }
        *fuel -= 1;
        if let Err(e) = apply_step(m, &osc.var, state) {
            return StageRun::Abort(e);
        }
        steps += 1;
        if let Some(rec) = &mut recording {
            rec.points
                .last_mut()
                .expect("recording starts nonempty")
                .applied = true;
        }
    }
}

/// One recorded step of the cycle: the guard margins seen before applying
/// the member, used to extrapolate whole turns.
#[derive(Debug, Clone)]
struct CyclePoint {
    member: usize,
    atom_values: Vec<i128>,
    applied: bool,
}

/// In-flight cycle recording. The snapshot is taken when the anchor value
/// first repeats; comparing it against the state one turn later gives the
/// steady per-turn counter delta. Deltas from the very first turn can still
/// include transients (a reset swallowing the input value), so that turn is
/// never used for extrapolation.
struct Recording {
    anchor: i128,
    points: Vec<CyclePoint>,
    snapshot: BTreeMap<String, i128>,
}

enum Jump {
    Never,
    /// Safe whole turns to skip before single-stepping resumes.
    After(u128),
}

/// Bookkeeping for cycle detection. Returns the recorded cycle and its
/// per-turn counter delta once the anchor value comes round again.
fn record_or_jump(
    osc: &OscAnalysis,
    state: &BTreeMap<String, i128>,
    v: i128,
    seen: &mut HashSet<i128>,
    recording: &mut Option<Recording>,
) -> Option<(i128, Vec<CyclePoint>, BTreeMap<String, i128>)> {
    if let Some(rec) = recording {
        if rec.anchor == v && rec.points.last().is_some_and(|p| p.applied) {
            let rec = recording.take().unwrap();
            let mut delta = BTreeMap::new();
            for (w, old) in &rec.snapshot {
                let new = state.get(w).copied().unwrap_or(0);
                delta.insert(w.clone(), new - old);
            }
            return Some((rec.anchor, rec.points, delta));
        }
    } else if seen.contains(&v) {
        *recording = Some(Recording {
            anchor: v,
            points: Vec::new(),
            snapshot: state.clone(),
        });
    } else {
        seen.insert(v);
        return None;
    }

    if let Some(rec) = recording {
        let member = osc
            .members
            .iter()
            .position(|m| m.region.contains(v))
            .expect("recording only runs on live members");
        let atom_values = osc.members[member]
            .counter_atoms
            .iter()
            .map(|a| a.value(state).expect("checked by live_member"))
            .collect();
        rec.points.push(CyclePoint {
            member,
            atom_values,
            applied: false,
        });
    }
    None
}

/// Smallest number of whole turns after which some guard margin crosses,
/// from the margins of one recorded turn and the per-turn deltas.
fn plan_jump(
    osc: &OscAnalysis,
    points: &[CyclePoint],
    cycle_delta: &BTreeMap<String, i128>,
) -> Jump {
    let mut best: Option<i128> = None;
    for p in points {
        let member = &osc.members[p.member];
        for (atom, &base) in member.counter_atoms.iter().zip(&p.atom_values) {
            let slope: i128 = atom
                .coefs
                .iter()
                .map(|(w, c)| c * cycle_delta.get(w).copied().unwrap_or(0))
                .sum();
            if let Some(q) = first_fail(atom.op, base, slope) {
                best = Some(best.map_or(q, |b: i128| b.min(q)));
            }
        }
    }
    match best {
        None => Jump::Never,
        // Stop one turn short so single-stepping hits the exact failing
        // check with every intermediate state validated.
        Some(q) => Jump::After((q - 1).max(0) as u128),
    }
}

enum DriftHop {
    Advanced(i128),
    Stuck,
    Overflow,
}

/// One fast-forward along a unit drift: advance to the first step where the
/// value exits the member's block, enters the oscillation set, or a counter
/// guard flips.
fn drift_hop(
    osc: &OscAnalysis,
    m: &OscMember,
    deltas: &BTreeMap<String, i128>,
    v: i128,
    state: &mut BTreeMap<String, i128>,
) -> DriftHop {
    let d = m.offset;
    let mut k: Option<i128> = steps_out_of_block(&m.region, v, d);
    if let Some(t) = steps_into(&osc.oscillation, v, d) {
        k = Some(k.map_or(t, |b| b.min(t)));
    }
    for atom in &m.counter_atoms {
        let Some(base) = atom.value(state) else {
            return DriftHop::Overflow;
        };
        let slope: i128 = atom
            .coefs
            .iter()
            .map(|(w, c)| {
                let dw = if w == &osc.var {
                    d
                } else {
                    deltas.get(w).copied().unwrap_or(0)
                };
                c * dw
            })
            .sum();
        if let Some(t) = first_fail(atom.op, base, slope) {
            k = Some(k.map_or(t, |b| b.min(t)));
        }
    }
    let Some(k) = k else {
        return DriftHop::Stuck;
    };
    debug_assert!(k >= 1);
    let Some(moved) = d.checked_mul(k).and_then(|x| x.checked_add(v)) else {
        return DriftHop::Overflow;
    };
    state.insert(osc.var.clone(), moved);
    for (w, dw) in deltas {
        let cur = state.get(w).copied().unwrap_or(0);
        let Some(next) = dw.checked_mul(k).and_then(|x| x.checked_add(cur)) else {
            return DriftHop::Overflow;
        };
        state.insert(w.clone(), next);
    }
    DriftHop::Advanced(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use crate::spath::{enumerate_spaths, DEFAULT_MAX_PATHS};
    use crate::summarize::oscillate::analyze;

    fn stage_of(src: &str, members: &[usize]) -> PeriodicStage {
        let p = parse(src).expect("test program parses");
        let lp = enumerate_spaths(&p, crate::frontend::LoopId(0), DEFAULT_MAX_PATHS).unwrap();
        build(analyze(&lp, members, 1_000_000).unwrap())
    }

    const SAW: &str = "proc main { while (i < 100) {\n\
         if (x < 5) { x = x + 2; i = i + 3; } else { x = x - 5; i = i + 4; }\n\
         } }";

    const WIDE: &str = "proc main { while (i < 100) {\n\
         if (x >= 50) { x = x - 2; i = i + 3; }\n\
         else { if (x < 0) { x = x + 1; i = i + 5; } else { x = x + 11; i = i + 7; } }\n\
         } }";

    #[test]
    fn saw_cycle_has_a_modular_form() {
        let stage = stage_of(SAW, &[0, 1]);
        assert_eq!(stage.cycles.len(), 1);
        let c = &stage.cycles[0];
        assert_eq!(c.values, vec![0, 2, 4, 6, 1, 3, 5]);
        let form = c.modular.expect("contiguous cycle");
        assert_eq!(
            form,
            ModularForm {
                lo: 0,
                modulus: 7,
                step: 2
            }
        );
        assert_eq!(form.render("x"), "(x + 2*N) mod 7");
        assert_eq!(form.value_at(3, 5), (3 + 10) % 7);
    }

    #[test]
    fn wide_band_cycle_steps_by_eleven() {
        let stage = stage_of(WIDE, &[0, 2]);
        assert_eq!(stage.cycles.len(), 1);
        let c = &stage.cycles[0];
        assert_eq!(c.values.len(), 13);
        assert_eq!(c.values[0], 48);
        let form = c.modular.expect("contiguous cycle");
        assert_eq!(
            form,
            ModularForm {
                lo: 48,
                modulus: 13,
                step: 11
            }
        );
        assert_eq!(form.render("x"), "((x - 48) + 11*N) mod 13 + 48");
    }

    /// Steps the two-branch saw by hand, as ground truth for the stage runner.
    fn naive_saw(mut x: i128, mut i: i128) -> (i128, i128, u128) {
        let mut steps = 0;
        while i < 100 {
            if x < 5 {
                x += 2;
                i += 3;
            } else {
                x -= 5;
                i += 4;
            }
            steps += 1;
        }
        (x, i, steps)
    }

    #[test]
    fn stage_run_matches_a_naive_walk() {
        let stage = stage_of(SAW, &[0, 1]);
        for x0 in -30..30 {
            for i0 in [0, 7, 50, 97] {
                let mut state: BTreeMap<String, i128> =
                    [("x".to_string(), x0), ("i".to_string(), i0)]
                        .into_iter()
                        .collect();
                let mut fuel = 1_000_000;
                let run = run_stage(&stage, &mut state, &mut fuel);
                let (x1, i1, steps) = naive_saw(x0, i0);
                assert_eq!(run, StageRun::Departed { steps }, "x0={x0} i0={i0}");
                assert_eq!(state["x"], x1, "x0={x0} i0={i0}");
                assert_eq!(state["i"], i1, "x0={x0} i0={i0}");
            }
        }
    }

    #[test]
    fn distant_start_is_fast_forwarded() {
        let stage = stage_of(SAW, &[0, 1]);
        let mut state: BTreeMap<String, i128> =
            [("x".to_string(), -1_000_000_000), ("i".to_string(), 0)]
                .into_iter()
                .collect();
        // 34 guard evaluations happen, but only a handful of fuel is spent.
        let mut fuel = 50;
        let run = run_stage(&stage, &mut state, &mut fuel);
        assert_eq!(run, StageRun::Departed { steps: 34 });
        assert_eq!(state["i"], 102);
        assert_eq!(state["x"], -1_000_000_000 + 2 * 34);
    }

    #[test]
    fn cycle_jump_skips_far_counter_targets() {
        let far: &str = "proc main { while (i < 1000000000) {\n\
             if (x < 5) { x = x + 2; i = i + 3; } else { x = x - 5; i = i + 4; }\n\
             } }";
        let stage = stage_of(far, &[0, 1]);
        let mut state: BTreeMap<String, i128> =
            [("x".to_string(), 0), ("i".to_string(), 0)].into_iter().collect();
        let mut fuel = 1_000;
        let run = run_stage(&stage, &mut state, &mut fuel);
        // Each turn of seven steps adds 23 to i, so the guard first fails at
        // the top of turn 43478262, after 43478261 whole turns.
        assert_eq!(run, StageRun::Departed { steps: 7 * 43_478_261 });
        assert_eq!(state["i"], 23 * 43_478_261);
        assert_eq!(state["x"], 0);
    }

    #[test]
    fn drifting_counters_never_exit() {
        let src = "proc main { while (i > 0 - 1000000) {\n\
             if (x < 0) { x = x + 1; i = i + 1; } else { x = x - 1; i = i + 1; }\n\
             } }";
        let stage = stage_of(src, &[0, 1]);
        let mut state: BTreeMap<String, i128> =
            [("x".to_string(), 0), ("i".to_string(), 5)].into_iter().collect();
        let mut fuel = 10_000;
        assert_eq!(run_stage(&stage, &mut state, &mut fuel), StageRun::Nonterminating);
    }

    #[test]
    fn value_outside_every_region_departs_at_once() {
        // x >= 5 is the upper member's region only when paired with the
        // counter guard; drive i out of range so no member is live.
        let stage = stage_of(SAW, &[0, 1]);
        let mut state: BTreeMap<String, i128> =
            [("x".to_string(), 3), ("i".to_string(), 200)].into_iter().collect();
        let mut fuel = 10;
        assert_eq!(
            run_stage(&stage, &mut state, &mut fuel),
            StageRun::Departed { steps: 0 }
        );
    }

    #[test]
    fn every_orbit_repeats_within_the_set_size() {
        for (src, members) in [(SAW, &[0usize, 1][..]), (WIDE, &[0, 2][..])] {
            let stage = stage_of(src, members);
            let size = stage.osc.oscillation.count() as usize;
            for v0 in stage.osc.oscillation.iter_values() {
                let mut seen = std::collections::BTreeSet::new();
                let mut v = v0;
                let mut hops = 0;
                while seen.insert(v) {
                    hops += 1;
                    assert!(hops <= size, "orbit from {v0} exceeded {size} values");
                    match next_value(&stage.osc, v) {
                        Some(n) if stage.osc.oscillation.contains(n) => v = n,
                        _ => break,
                    }
                }
            }
        }
    }
}
