//! Ground-truth concrete interpreter. Every closed form the summarizer emits
//! is checked against this executor, so it stays deliberately simple: a tree
//! walk over the AST with checked 128-bit arithmetic.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::frontend::{BinOp, Expr, InputDecl, LoopId, Program, Stmt};
use crate::sym::{div_floor, mod_floor};

/// Domain assumed for inputs declared without a range.
pub const DEFAULT_INPUT_DOMAIN: (i128, i128) = (-100, 100);

/// Inclusive range nondet() draws from under the oracle.
pub const NONDET_RANGE: (i128, i128) = (-16, 16);

pub const DEFAULT_FUEL: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct OracleConfig {
    pub fuel: u64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            fuel: DEFAULT_FUEL,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status")]
pub enum RunStatus {
    #[serde(rename = "DONE")]
    Done,
    #[serde(rename = "FUEL_EXHAUSTED")]
    FuelExhausted,
    #[serde(rename = "ASSERT_FAILED")]
    AssertFailed { line: u32 },
    #[serde(rename = "OVERFLOW")]
    Overflow { line: u32 },
}

impl RunStatus {
    pub fn is_done(&self) -> bool {
        matches!(self, RunStatus::Done)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    /// Final values of every variable, inputs included.
    pub state: BTreeMap<String, i128>,
    /// Completed body executions per loop, keyed by loop id.
    pub loop_counts: BTreeMap<LoopId, u64>,
    /// Statements and guard evaluations consumed.
    pub steps: u64,
}

struct Interp<'a> {
    program: &'a Program,
    state: BTreeMap<String, i128>,
    loop_counts: BTreeMap<LoopId, u64>,
    fuel_left: u64,
    steps: u64,
    rng: ChaCha8Rng,
}

enum Halt {
    FuelExhausted,
    AssertFailed { line: u32 },
    Overflow { line: u32 },
    Break,
}

/// Runs the program on the given input values. Variables that are assigned
/// somewhere but are not inputs start at zero.
pub fn interpret(
    program: &Program,
    inputs: &BTreeMap<String, i128>,
    config: &OracleConfig,
) -> RunResult {
    let mut state = BTreeMap::new();
    for name in program.assigned_vars() {
        state.insert(name, 0);
    }
    for decl in &program.inputs {
        state.insert(decl.name.clone(), 0);
    }
    for (name, value) in inputs {
        state.insert(name.clone(), *value);
    }
    let mut interp = Interp {
        program,
        state,
        loop_counts: BTreeMap::new(),
        fuel_left: config.fuel,
        steps: 0,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
    };
    let status = match interp.block(&program.body) {
        Ok(()) => RunStatus::Done,
        Err(Halt::Break) => RunStatus::Done,
        Err(Halt::FuelExhausted) => RunStatus::FuelExhausted,
        Err(Halt::AssertFailed { line }) => RunStatus::AssertFailed { line },
        Err(Halt::Overflow { line }) => RunStatus::Overflow { line },
    };
    RunResult {
        status,
        state: interp.state,
        loop_counts: interp.loop_counts,
        steps: interp.steps,
    }
}

impl Interp<'_> {
    fn tick(&mut self) -> Result<(), Halt> {
        if self.fuel_left == 0 {
            return Err(Halt::FuelExhausted);
        }
        self.fuel_left -= 1;
        self.steps += 1;
        Ok(())
    }

    fn wrap(&self, v: i128) -> i128 {
        match self.program.bitwidth {
            None => v,
            Some(w) => {
                let m = 1i128 << w;
                let r = v.rem_euclid(m);
                if r >= m / 2 {
                    r - m
                } else {
                    r
                }
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), Halt> {
        for s in stmts {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), Halt> {
        self.tick()?;
        match s {
            Stmt::Assign { target, value, span, .. } => {
                let v = self.eval(value, span.line)?;
                self.state.insert(target.clone(), v);
                Ok(())
            }
            Stmt::Assert { cond, span } => {
                if self.eval(cond, span.line)? != 0 {
                    Ok(())
                } else {
                    Err(Halt::AssertFailed { line: span.line })
                }
            }
            Stmt::Break { .. } => Err(Halt::Break),
            Stmt::If {
                cond,
                then_branch,
                else_branch,
                span,
            } => {
                if self.eval(cond, span.line)? != 0 {
                    self.block(then_branch)
                } else {
                    self.block(else_branch)
                }
            }
            Stmt::While { id, cond, body, span } => {
                loop {
                    self.tick()?;
                    if self.eval(cond, span.line)? == 0 {
                        return Ok(());
                    }
                    match self.block(body) {
                        Ok(()) => {}
                        Err(Halt::Break) => break,
                        Err(other) => return Err(other),
                    }
                    *self.loop_counts.entry(*id).or_insert(0) += 1;
                }
                // A `break` still completes the iteration it ran in.
                *self.loop_counts.entry(*id).or_insert(0) += 1;
                Ok(())
            }
        }
    }

    /// Evaluates an expression; booleans are 1/0.
    fn eval(&mut self, e: &Expr, line: u32) -> Result<i128, Halt> {
        let overflow = || Halt::Overflow { line };
        match e {
            Expr::Int(v) => Ok(*v),
            Expr::Var(name, _) => Ok(*self
                .state
                .get(name)
                .expect("checker guarantees variables are declared")),
            Expr::Nondet(..) => Ok(self.rng.gen_range(NONDET_RANGE.0..=NONDET_RANGE.1)),
            Expr::Neg(inner) => {
                let v = self.eval(inner, line)?;
                Ok(self.wrap(v.checked_neg().ok_or_else(overflow)?))
            }
            Expr::Not(inner) => Ok(if self.eval(inner, line)? != 0 { 0 } else { 1 }),
            Expr::Bin(op, l, r) => {
                // Short-circuit the connectives before evaluating the right side.
                if *op == BinOp::And {
                    let lv = self.eval(l, line)?;
                    return if lv == 0 { Ok(0) } else { self.eval(r, line) };
                }
                if *op == BinOp::Or {
                    let lv = self.eval(l, line)?;
                    return if lv != 0 { Ok(1) } else { self.eval(r, line) };
                }
                let lv = self.eval(l, line)?;
                let rv = self.eval(r, line)?;
                let arith = |v: Option<i128>| v.ok_or_else(overflow);
                Ok(match op {
                    BinOp::Add => self.wrap(arith(lv.checked_add(rv))?),
                    BinOp::Sub => self.wrap(arith(lv.checked_sub(rv))?),
                    BinOp::Mul => self.wrap(arith(lv.checked_mul(rv))?),
                    BinOp::Div => {
                        debug_assert!(rv != 0, "checker guarantees nonzero divisors");
                        self.wrap(div_floor(lv, rv))
                    }
                    BinOp::Mod => {
                        debug_assert!(rv != 0, "checker guarantees nonzero divisors");
                        self.wrap(mod_floor(lv, rv))
                    }
                    BinOp::Lt => (lv < rv) as i128,
                    BinOp::Le => (lv <= rv) as i128,
                    BinOp::Gt => (lv > rv) as i128,
                    BinOp::Ge => (lv >= rv) as i128,
                    BinOp::Eq => (lv == rv) as i128,
                    BinOp::Ne => (lv != rv) as i128,
                    BinOp::And | BinOp::Or => unreachable!("handled above"),
                })
            }
        }
    }
}

/// Effective domain of one input declaration.
pub fn input_domain(decl: &InputDecl) -> (i128, i128) {
    decl.domain.unwrap_or(DEFAULT_INPUT_DOMAIN)
}

/// Draws `count` input assignments uniformly from the declared domains,
/// deterministically for a given seed.
pub fn sample_inputs(program: &Program, count: usize, seed: u64) -> Vec<BTreeMap<String, i128>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            program
                .inputs
                .iter()
                .map(|decl| {
                    let (lo, hi) = input_domain(decl);
                    (decl.name.clone(), rng.gen_range(lo..=hi))
                })
                .collect()
        })
        .collect()
}

/// Number of points in the full input grid, unless it exceeds `cap`.
pub fn input_space_size(program: &Program, cap: u128) -> Option<u128> {
    let mut total: u128 = 1;
    for decl in &program.inputs {
        let (lo, hi) = input_domain(decl);
        let width = (hi - lo + 1) as u128;
        total = total.checked_mul(width)?;
        if total > cap {
            return None;
        }
    }
    Some(total)
}

/// Every input assignment in the declared grid, if the grid has at most
/// `cap` points.
pub fn enumerate_inputs(program: &Program, cap: u128) -> Option<Vec<BTreeMap<String, i128>>> {
    input_space_size(program, cap)?;
    let mut out = vec![BTreeMap::new()];
    for decl in &program.inputs {
        let (lo, hi) = input_domain(decl);
        let mut next = Vec::new();
        for partial in &out {
            for v in lo..=hi {
                let mut m = partial.clone();
                m.insert(decl.name.clone(), v);
                next.push(m);
            }
        }
        out = next;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    fn run(src: &str, inputs: &[(&str, i128)]) -> RunResult {
        let p = parse(src).expect("test program parses");
        let inputs = inputs
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        interpret(&p, &inputs, &OracleConfig::default())
    }

    #[test]
    fn straight_line_arithmetic() {
        let r = run("proc p { x = 3; y = x * 4 - 5; z = y / 2; w = -7 % 3; }", &[]);
        assert!(r.status.is_done());
        assert_eq!(r.state["y"], 7);
        assert_eq!(r.state["z"], 3);
        assert_eq!(r.state["w"], 2);
    }

    #[test]
    fn floor_division_toward_negative_infinity() {
        let r = run("proc p { a = -7 / 2; b = -7 % 2; c = 7 / -2; d = 7 % -2; }", &[]);
        assert_eq!(r.state["a"], -4);
        assert_eq!(r.state["b"], 1);
        assert_eq!(r.state["c"], -4);
        assert_eq!(r.state["d"], -1);
    }

    #[test]
    fn counting_loop_terminates_with_count() {
        let r = run(
            "// input x in [0, 50]\nproc p { while (x < 10) { x = x + 1; } }",
            &[("x", 0)],
        );
        assert!(r.status.is_done());
        assert_eq!(r.state["x"], 10);
        assert_eq!(r.loop_counts[&LoopId(0)], 10);
    }

    #[test]
    fn branch_oscillation_trace() {
        // x drifts up by 2 while negative, drops by 5 at or above zero.
        let r = run(
            "// input x in [-50, 50]\n// input i in [0, 100]\nproc p {\n\
             while (i < 6) {\n\
               if (x < 0) { x = x + 2; i = i + 3; } else { x = x - 5; i = i + 2; }\n\
             }\n}",
            &[("x", 3), ("i", 0)],
        );
        // (3,0) -> (-2,2) -> (0,5) -> (-5,7): three iterations.
        assert!(r.status.is_done());
        assert_eq!(r.state["x"], -5);
        assert_eq!(r.state["i"], 7);
        assert_eq!(r.loop_counts[&LoopId(0)], 3);
    }

    #[test]
    fn assert_failure_reports_line() {
        let r = run("proc p {\n  x = 1;\n  assert(x > 5);\n}", &[]);
        assert_eq!(r.status, RunStatus::AssertFailed { line: 3 });
    }

    #[test]
    fn break_exits_only_innermost_loop() {
        let r = run(
            "proc p { i = 0; s = 0;\n\
             while (i < 3) {\n\
               j = 0;\n\
               while (j < 10) { j = j + 1; if (j == 2) { break; } }\n\
               s = s + j; i = i + 1;\n\
             }\n}",
            &[],
        );
        assert!(r.status.is_done());
        assert_eq!(r.state["s"], 6);
        assert_eq!(r.loop_counts[&LoopId(0)], 3);
        assert_eq!(r.loop_counts[&LoopId(1)], 6);
    }

    #[test]
    fn fuel_exhaustion_on_nonterminating_loop() {
        let p = parse("// input x in [0, 5]\nproc p { while (x >= 0) { x = x + 1; } }").unwrap();
        let r = interpret(
            &p,
            &[("x".to_string(), 0)].into_iter().collect(),
            &OracleConfig { fuel: 1000, seed: 0 },
        );
        assert_eq!(r.status, RunStatus::FuelExhausted);
    }

    #[test]
    fn overflow_is_reported_not_wrapped() {
        let big = i128::MAX;
        let src = format!("proc p {{\n  x = {big};\n  x = x + 1;\n}}");
        let r = run(&src, &[]);
        assert_eq!(r.status, RunStatus::Overflow { line: 3 });
    }

    #[test]
    fn bitwidth_pragma_wraps() {
        let r = run("// bitwidth 8\nproc p { x = 127; x = x + 1; }", &[]);
        assert!(r.status.is_done());
        assert_eq!(r.state["x"], -128);
    }

    #[test]
    fn nondet_is_deterministic_per_seed() {
        let p = parse("proc p { x = nondet(); y = nondet(); }").unwrap();
        let a = interpret(&p, &BTreeMap::new(), &OracleConfig { fuel: 100, seed: 7 });
        let b = interpret(&p, &BTreeMap::new(), &OracleConfig { fuel: 100, seed: 7 });
        assert_eq!(a.state, b.state);
        for v in [a.state["x"], a.state["y"]] {
            assert!((NONDET_RANGE.0..=NONDET_RANGE.1).contains(&v));
        }
    }

    #[test]
    fn sampling_respects_domains_and_seed() {
        let p = parse("// input x in [3, 9]\n// input y\nproc p { z = x + y; }").unwrap();
        let s1 = sample_inputs(&p, 50, 42);
        let s2 = sample_inputs(&p, 50, 42);
        assert_eq!(s1, s2);
        for m in &s1 {
            assert!((3..=9).contains(&m["x"]));
            assert!((DEFAULT_INPUT_DOMAIN.0..=DEFAULT_INPUT_DOMAIN.1).contains(&m["y"]));
        }
    }

    #[test]
    fn enumeration_covers_grid() {
        let p = parse("// input x in [0, 2]\n// input y in [5, 6]\nproc p { z = x + y; }").unwrap();
        let all = enumerate_inputs(&p, 10_000).unwrap();
        assert_eq!(all.len(), 6);
        assert!(input_space_size(&p, 5).is_none());
    }
}
