//! Command-line driver shared by the `loopsum` binary. Parses arguments,
//! runs the requested pipeline stage, and renders reports as text or JSON.
//!
//! Exit codes: 0 on success (summaries closed, assertions hold, diffs
//! match), 1 when the analysis ran but the answer is negative (a loop has
//! no summary, an assertion is violated, a diff mismatched), 2 for usage
//! and parse errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cfg::{build_cfg, cfg_to_dot};
use crate::frontend::{parse, ParseError, Program};
use crate::graph::{csg_to_dot, jump_graph_to_dot};
use crate::solver::SolverConfig;
use crate::spath::DEFAULT_MAX_PATHS;
use crate::summarize::affine::Count;
use crate::summarize::eval::{differential, DiffReport};
use crate::summarize::{
    summarize_program, LoopSummary, ProgramSummary, StagePlan, SummarizeConfig,
    DEFAULT_EVAL_FUEL, DEFAULT_MAX_CASES, DEFAULT_MAX_INTERVAL_VALUES,
};
use crate::verify::{verify_program, AssertionVerdict, Verdict};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "loopsum", version, about = "Multi-branch loop summarization for .wl programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Analysis caps and solver settings shared by the analyzing subcommands.
#[derive(Args, Debug, Clone)]
struct EngineOpts {
    /// Cap on single-branch paths enumerated per loop.
    #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
    max_paths: usize,
    /// Cap on composed route cases per loop.
    #[arg(long, default_value_t = DEFAULT_MAX_CASES)]
    max_cases: usize,
    /// Cap on the size of a closed oscillation value set.
    #[arg(long, default_value_t = DEFAULT_MAX_INTERVAL_VALUES)]
    max_interval_values: u128,
    /// Interpreter step budget per concrete run.
    #[arg(long, default_value_t = DEFAULT_EVAL_FUEL)]
    fuel: u64,
    /// Solver wall-clock budget per query, in milliseconds.
    #[arg(long, default_value_t = SolverConfig::default().timeout_ms)]
    solver_timeout_ms: u64,
    /// External SMT-LIB solver command, tried before the built-in search.
    #[arg(long)]
    smt_cmd: Option<String>,
}

impl EngineOpts {
    fn config(&self) -> SummarizeConfig {
        SummarizeConfig {
            max_paths: self.max_paths,
            max_cases: self.max_cases,
            max_interval_values: self.max_interval_values,
            fuel: self.fuel,
            solver: SolverConfig {
                timeout_ms: self.solver_timeout_ms,
                smt_cmd: self.smt_cmd.clone(),
                ..SolverConfig::default()
            },
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Summarize every loop and print the composed cases.
    Summarize {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineOpts,
        /// Write the full report to this path as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Check every assertion against the loop summaries.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineOpts,
        /// Write the verdicts to this path as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Compare the summaries against the reference interpreter on seeded
    /// random inputs.
    OracleDiff {
        file: PathBuf,
        /// Number of input assignments to draw.
        #[arg(long, default_value_t = 1000)]
        inputs: usize,
        /// Seed for the input sampler.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        engine: EngineOpts,
        /// Write the comparison report to this path as JSON.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Print the control-flow graph in DOT form.
    DumpCfg { file: PathBuf },
    /// Print every loop's single-branch paths.
    DumpSpaths {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Print every loop's jump graph and contracted component graph in
    /// DOT form.
    DumpCsg {
        file: PathBuf,
        #[command(flatten)]
        engine: EngineOpts,
    },
}

/// Runs the CLI on explicit arguments (including the program name) and
/// writes all output to `out`. Returns the process exit code.
pub fn run(args: &[String], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args.iter().map(String::as_str)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(out, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(message) => {
            let _ = writeln!(out, "error: {message}");
            EXIT_USAGE
        }
    }
}

fn load(file: &Path, out: &mut dyn Write) -> Result<Option<(String, Program)>, String> {
    let src = std::fs::read_to_string(file)
        .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
    let name = file.display().to_string();
    match parse(&src) {
        Ok(program) => Ok(Some((name, program))),
        Err(e) => {
            render_parse_error(&name, &e, out);
            Ok(None)
        }
    }
}

fn render_parse_error(file: &str, e: &ParseError, out: &mut dyn Write) {
    for d in &e.diagnostics {
        let _ = writeln!(out, "{}", d.render(file));
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, String> {
    match cli.command {
        Command::Summarize { file, engine, json_out } => {
            let Some((name, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let cfg = engine.config();
            let ps = summarize_program(&program, &cfg);
            let _ = write!(out, "{}", render_summary(&name, &ps));
            if let Some(path) = json_out {
                write_json(&path, &summary_report(&name, &ps))?;
            }
            Ok(if ps.succeeded() { EXIT_SUCCESS } else { EXIT_NEGATIVE })
        }
        Command::Verify { file, engine, json_out } => {
            let Some((name, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let cfg = engine.config();
            let verdicts = verify_program(&program, &cfg);
            let _ = write!(out, "{}", render_verdicts(&name, &verdicts));
            if let Some(path) = json_out {
                write_json(&path, &verify_report(&name, &verdicts))?;
            }
            let violated = verdicts
                .iter()
                .any(|v| matches!(v.verdict, Verdict::Violated { .. }));
            Ok(if violated { EXIT_NEGATIVE } else { EXIT_SUCCESS })
        }
        Command::OracleDiff { file, inputs, seed, engine, json_out } => {
            let Some((name, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let cfg = engine.config();
            let ps = summarize_program(&program, &cfg);
            if !ps.succeeded() {
                for ls in &ps.loops {
                    if let Some(f) = &ls.failure {
                        let _ = writeln!(out, "{name}: loop {} has no summary: {f}", ls.loop_id);
                    }
                }
                return Ok(EXIT_NEGATIVE);
            }
            let report = differential(&program, &ps, inputs, seed, &cfg);
            let _ = write!(out, "{}", render_diff(&name, &report));
            if let Some(path) = json_out {
                write_json(&path, &diff_report(&name, &report))?;
            }
            Ok(if report.all_matched() { EXIT_SUCCESS } else { EXIT_NEGATIVE })
        }
        Command::DumpCfg { file } => {
            let Some((name, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let cfg = build_cfg(&program);
            let _ = write!(out, "{}", cfg_to_dot(&cfg, &stem(&name)));
            Ok(EXIT_SUCCESS)
        }
        Command::DumpSpaths { file, engine } => {
            let Some((name, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let ps = summarize_program(&program, &engine.config());
            let _ = write!(out, "{}", render_spaths(&name, &ps));
            Ok(EXIT_SUCCESS)
        }
        Command::DumpCsg { file, engine } => {
            let Some((_, program)) = load(&file, out)? else {
                return Ok(EXIT_USAGE);
            };
            let ps = summarize_program(&program, &engine.config());
            let mut text = String::new();
            for ls in &ps.loops {
                let _ = write!(
                    text,
                    "{}{}",
                    jump_graph_to_dot(&ls.graph, &format!("{}-jumps", ls.loop_id)),
                    csg_to_dot(&ls.csg, &format!("{}-csg", ls.loop_id)),
                );
            }
            let _ = write!(out, "{text}");
            Ok(EXIT_SUCCESS)
        }
    }
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("cannot serialize report: {e}"))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn atoms_str(atoms: &[crate::sym::SymExpr]) -> String {
    if atoms.is_empty() {
        "true".to_string()
    } else {
        let parts: Vec<String> = atoms.iter().map(ToString::to_string).collect();
        parts.join(" && ")
    }
}

fn map_str(map: &BTreeMap<String, crate::sym::SymExpr>) -> String {
    if map.is_empty() {
        "(unchanged)".to_string()
    } else {
        let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        parts.join(", ")
    }
}

fn render_summary(name: &str, ps: &ProgramSummary) -> String {
    let mut s = String::new();
    if ps.loops.is_empty() && ps.eliminated.is_empty() {
        let _ = writeln!(s, "{name}: no loops");
        let _ = writeln!(s, "result: SUCCESS");
        return s;
    }
    if !ps.eliminated.is_empty() {
        let ids: Vec<String> = ps.eliminated.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "{name}: eliminated inner loops: {}", ids.join(", "));
    }
    for ls in &ps.loops {
        render_loop(ls, &mut s);
    }
    let verdict = if ps.succeeded() { "SUCCESS" } else { "FAILURE" };
    let _ = writeln!(s, "result: {verdict}");
    s
}

fn render_loop(ls: &LoopSummary, s: &mut String) {
    let _ = writeln!(s, "loop {}: while {}", ls.loop_id, ls.guard);
    let live = ls.paths.live().count();
    let _ = writeln!(s, "  paths: {live} live of {} enumerated", ls.paths.paths.len());
    for p in &ls.paths.paths {
        if p.pruned {
            let _ = writeln!(s, "    {}: (contradictory, pruned)", p.name());
        } else {
            let _ = writeln!(s, "    {}: {}  ::  {}", p.name(), atoms_str(&p.cond), map_str(&p.op));
        }
    }
    for scc in ls.csg.sccs.iter().filter(|c| !c.is_synthetic()) {
        let label = ls.scc_label(scc.id);
        match ls.plans.get(&scc.id) {
            Some(Ok(plan)) => render_plan(&label, plan, s),
            Some(Err(f)) if ls.waived.contains(&scc.id) => {
                let _ = writeln!(s, "  component {label}: no plan ({f}); unreachable in-domain, waived");
            }
            Some(Err(f)) => {
                let _ = writeln!(s, "  component {label}: no plan ({f})");
            }
            None => {
                let _ = writeln!(s, "  component {label}: not planned");
            }
        }
    }
    if !ls.csg.dropped.is_empty() {
        let names: Vec<String> = ls.csg.dropped.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "  off-route: {}", names.join(", "));
    }
    if ls.cases.is_empty() {
        let _ = writeln!(s, "  cases: none");
    } else {
        let _ = writeln!(s, "  cases: {}", ls.cases.len());
    }
    for (i, case) in ls.cases.iter().enumerate() {
        let route = if case.route.is_empty() {
            "(skip)".to_string()
        } else {
            let labels: Vec<String> = case.route.iter().map(|&id| ls.scc_label(id)).collect();
            labels.join(" -> ")
        };
        let _ = writeln!(s, "    case {i} [{}] route {route}", case.tag);
        let _ = writeln!(s, "      when:  {}", atoms_str(&case.pre));
        if case.nonterminating {
            let _ = writeln!(s, "      never exits");
            continue;
        }
        match (&case.post, &case.total) {
            (Some(post), Some(total)) => {
                let _ = writeln!(s, "      post:  {}", map_str(post));
                let _ = writeln!(s, "      total: {total}");
            }
            _ => {
                let _ = writeln!(s, "      count left implicit; evaluation is solver-backed");
            }
        }
    }
    if let Some(f) = &ls.failure {
        let _ = writeln!(s, "  no summary: {f}");
    }
}

fn render_plan(label: &str, plan: &StagePlan, s: &mut String) {
    match plan {
        StagePlan::Once(st) => {
            let _ = writeln!(s, "  component {label}: runs once when entered");
            let _ = writeln!(s, "      enter: {}", atoms_str(&st.enter));
            let _ = writeln!(s, "      op:    {}", map_str(&st.op));
        }
        StagePlan::Affine(st) => {
            let _ = writeln!(s, "  component {label}: affine recurrence");
            let _ = writeln!(s, "      enter: {}", atoms_str(&st.enter));
            let _ = writeln!(s, "      post:  {}", map_str(&st.post));
            match &st.count {
                Count::Closed { cases } => {
                    for c in cases {
                        match &c.n {
                            Some(n) => {
                                let _ = writeln!(s, "      count: when {}: N = {n}", atoms_str(&c.guards));
                            }
                            None => {
                                let _ = writeln!(s, "      count: when {}: never exits", atoms_str(&c.guards));
                            }
                        }
                    }
                }
                Count::Implicit { .. } => {
                    let _ = writeln!(s, "      count: least N >= 1 failing the guard, per input");
                }
            }
        }
        StagePlan::Periodic(st) => {
            let osc = &st.osc;
            let _ = writeln!(s, "  component {label}: oscillation over {}", osc.var);
            let _ = writeln!(
                s,
                "      entry {}, closure {} in {} rounds, stable {}",
                osc.entry, osc.oscillation, osc.rounds, osc.stable
            );
            for c in &st.cycles {
                let values: Vec<String> = c.values.iter().map(ToString::to_string).collect();
                match &c.modular {
                    Some(m) => {
                        let _ = writeln!(s, "      cycle [{}]: {}", values.join(", "), m.render(&osc.var));
                    }
                    None => {
                        let _ = writeln!(s, "      cycle [{}]: tabulated", values.join(", "));
                    }
                }
            }
        }
    }
}

fn render_spaths(name: &str, ps: &ProgramSummary) -> String {
    let mut s = String::new();
    if ps.loops.is_empty() {
        let _ = writeln!(s, "{name}: no loops");
        return s;
    }
    for ls in &ps.loops {
        let _ = writeln!(s, "loop {}: guard {}", ls.loop_id, ls.guard);
        for p in &ls.paths.paths {
            let mark = if p.pruned { " (pruned)" } else { "" };
            let _ = writeln!(s, "  {}{mark}", p.name());
            let _ = writeln!(s, "    cond: {}", atoms_str(&p.cond));
            let _ = writeln!(s, "    op:   {}", map_str(&p.op));
        }
        if ls.paths.paths.is_empty() {
            if let Some(f) = &ls.failure {
                let _ = writeln!(s, "  (no paths: {f})");
            }
        }
    }
    s
}

fn render_verdicts(name: &str, verdicts: &[AssertionVerdict]) -> String {
    let mut s = String::new();
    if verdicts.is_empty() {
        let _ = writeln!(s, "{name}: no assertions");
        return s;
    }
    let mut holds = 0usize;
    let mut violated = 0usize;
    let mut unknown = 0usize;
    for v in verdicts {
        match &v.verdict {
            Verdict::Holds => {
                holds += 1;
                let _ = writeln!(s, "{name}:{}:{}: assert({}): HOLDS", v.line, v.col, v.text);
            }
            Verdict::Violated { witness } => {
                violated += 1;
                let w = serde_json::to_string(witness).unwrap_or_else(|_| "{}".into());
                let _ = writeln!(
                    s,
                    "{name}:{}:{}: assert({}): VIOLATED witness {w}",
                    v.line, v.col, v.text
                );
            }
            Verdict::Unknown { reason } => {
                unknown += 1;
                let _ = writeln!(
                    s,
                    "{name}:{}:{}: assert({}): UNKNOWN ({reason})",
                    v.line, v.col, v.text
                );
            }
        }
    }
    let _ = writeln!(s, "result: {holds} hold, {violated} violated, {unknown} unknown");
    s
}

fn render_diff(name: &str, r: &DiffReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{name}: {} inputs, {} compared, {} matched ({:.1}%)",
        r.inputs,
        r.compared,
        r.matched,
        r.percent()
    );
    for m in &r.mismatches {
        let inputs = serde_json::to_string(&m.inputs).unwrap_or_else(|_| "{}".into());
        let _ = writeln!(s, "  mismatch {inputs}: {}", m.reason);
    }
    s
}

// JSON report shapes. Every map is a BTreeMap and every field order is
// fixed, so serialization is byte-stable for a given input and seed.

#[derive(Serialize)]
struct SummaryReport {
    file: String,
    success: bool,
    eliminated: Vec<String>,
    loops: Vec<LoopReport>,
}

#[derive(Serialize)]
struct LoopReport {
    id: String,
    guard: String,
    success: bool,
    failure: Option<FailureReport>,
    paths: Vec<PathReport>,
    components: Vec<ComponentReport>,
    waived: Vec<String>,
    off_route: Vec<String>,
    cases: Vec<CaseReport>,
}

#[derive(Serialize)]
struct FailureReport {
    kind: String,
    detail: String,
}

#[derive(Serialize)]
struct PathReport {
    name: String,
    live: bool,
    cond: Vec<String>,
    op: BTreeMap<String, String>,
}

#[derive(Serialize)]
struct ComponentReport {
    label: String,
    order: String,
    plan: Option<String>,
    failure: Option<FailureReport>,
    oscillation: Option<OscReport>,
}

#[derive(Serialize)]
struct OscReport {
    var: String,
    entry: String,
    closure: String,
    rounds: usize,
    stable: String,
    cycles: Vec<CycleReport>,
}

#[derive(Serialize)]
struct CycleReport {
    values: Vec<i128>,
    modular: Option<String>,
}

#[derive(Serialize)]
struct CaseReport {
    tag: String,
    route: Vec<String>,
    pre: Vec<String>,
    nonterminating: bool,
    post: Option<BTreeMap<String, String>>,
    total: Option<String>,
}

fn failure_report(f: &crate::summarize::Failure) -> FailureReport {
    FailureReport {
        kind: f.kind.to_string(),
        detail: f.detail.clone(),
    }
}

fn summary_report(name: &str, ps: &ProgramSummary) -> SummaryReport {
    SummaryReport {
        file: name.to_string(),
        success: ps.succeeded(),
        eliminated: ps.eliminated.iter().map(ToString::to_string).collect(),
        loops: ps.loops.iter().map(loop_report).collect(),
    }
}

fn loop_report(ls: &LoopSummary) -> LoopReport {
    let components = ls
        .csg
        .sccs
        .iter()
        .filter(|c| !c.is_synthetic())
        .map(|scc| {
            let order = match scc.kind {
                crate::graph::SccKind::Zero => "zero",
                crate::graph::SccKind::One => "one",
                crate::graph::SccKind::High => "high",
            };
            let (plan, failure, oscillation) = match ls.plans.get(&scc.id) {
                Some(Ok(p)) => {
                    let osc = match p {
                        StagePlan::Periodic(st) => Some(OscReport {
                            var: st.osc.var.clone(),
                            entry: st.osc.entry.to_string(),
                            closure: st.osc.oscillation.to_string(),
                            rounds: st.osc.rounds,
                            stable: st.osc.stable.to_string(),
                            cycles: st
                                .cycles
                                .iter()
                                .map(|c| CycleReport {
                                    values: c.values.clone(),
                                    modular: c.modular.map(|m| m.render(&st.osc.var)),
                                })
                                .collect(),
                        }),
                        _ => None,
                    };
                    (Some(p.kind_name().to_string()), None, osc)
                }
                Some(Err(f)) => (None, Some(failure_report(f)), None),
                None => (None, None, None),
            };
            ComponentReport {
                label: ls.scc_label(scc.id),
                order: order.to_string(),
                plan,
                failure,
                oscillation,
            }
        })
        .collect();

    LoopReport {
        id: ls.loop_id.to_string(),
        guard: ls.guard.to_string(),
        success: ls.succeeded(),
        failure: ls.failure.as_ref().map(failure_report),
        paths: ls
            .paths
            .paths
            .iter()
            .map(|p| PathReport {
                name: p.name(),
                live: !p.pruned,
                cond: p.cond.iter().map(ToString::to_string).collect(),
                op: p.op.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
            })
            .collect(),
        components,
        waived: ls.waived.iter().map(|id| ls.scc_label(*id)).collect(),
        off_route: ls.csg.dropped.iter().map(ToString::to_string).collect(),
        cases: ls
            .cases
            .iter()
            .map(|c| CaseReport {
                tag: c.tag.to_string(),
                route: c.route.iter().map(|&id| ls.scc_label(id)).collect(),
                pre: c.pre.iter().map(ToString::to_string).collect(),
                nonterminating: c.nonterminating,
                post: c
                    .post
                    .as_ref()
                    .map(|m| m.iter().map(|(k, v)| (k.clone(), v.to_string())).collect()),
                total: c.total.as_ref().map(ToString::to_string),
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct VerifyReport {
    file: String,
    holds: usize,
    violated: usize,
    unknown: usize,
    assertions: Vec<AssertionReport>,
}

#[derive(Serialize)]
struct AssertionReport {
    line: u32,
    col: u32,
    text: String,
    verdict: String,
    witness: Option<BTreeMap<String, i128>>,
    reason: Option<String>,
}

fn verify_report(name: &str, verdicts: &[AssertionVerdict]) -> VerifyReport {
    let count = |want: &str| {
        verdicts
            .iter()
            .filter(|v| v.verdict.label() == want)
            .count()
    };
    VerifyReport {
        file: name.to_string(),
        holds: count("HOLDS"),
        violated: count("VIOLATED"),
        unknown: count("UNKNOWN"),
        assertions: verdicts
            .iter()
            .map(|v| {
                let (witness, reason) = match &v.verdict {
                    Verdict::Holds => (None, None),
                    Verdict::Violated { witness } => (Some(witness.clone()), None),
                    Verdict::Unknown { reason } => (None, Some(reason.clone())),
                };
                AssertionReport {
                    line: v.line,
                    col: v.col,
                    text: v.text.clone(),
                    verdict: v.verdict.label().to_string(),
                    witness,
                    reason,
                }
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct DiffJsonReport {
    file: String,
    inputs: usize,
    compared: usize,
    matched: usize,
    percent: f64,
    mismatches: Vec<MismatchReport>,
}

#[derive(Serialize)]
struct MismatchReport {
    inputs: BTreeMap<String, i128>,
    reason: String,
}

fn diff_report(name: &str, r: &DiffReport) -> DiffJsonReport {
    DiffJsonReport {
        file: name.to_string(),
        inputs: r.inputs,
        compared: r.compared,
        matched: r.matched,
        percent: r.percent(),
        mismatches: r
            .mismatches
            .iter()
            .map(|m| MismatchReport {
                inputs: m.inputs.clone(),
                reason: m.reason.clone(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_on(src: &str, args: &[&str]) -> (i32, String) {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("prog.wl");
        std::fs::write(&path, src).expect("write program");
        run_at(&path, args)
    }

    fn run_at(path: &Path, args: &[&str]) -> (i32, String) {
        let mut argv = vec!["loopsum".to_string(), args[0].to_string()];
        argv.push(path.display().to_string());
        argv.extend(args[1..].iter().map(|s| s.to_string()));
        let mut out = Vec::new();
        let code = run(&argv, &mut out);
        (code, String::from_utf8(out).expect("utf8 output"))
    }

    const COUNT_UP: &str = "// input x in [-50, 50]\nproc main { while (x < 10) { x = x + 1; } }";

    #[test]
    fn summarize_prints_cases_and_succeeds() {
        let (code, out) = run_on(COUNT_UP, &["summarize"]);
        assert_eq!(code, EXIT_SUCCESS, "{out}");
        assert!(out.contains("loop L0"), "{out}");
        assert!(out.contains("ONE_ORDER"), "{out}");
        assert!(out.contains("result: SUCCESS"), "{out}");
    }

    #[test]
    fn summarize_flags_a_coupled_loop() {
        let (code, out) = run_on(
            "// input x in [0, 50]\n// input y in [0, 50]\nproc main {\n\
             while (x < 100) { x = x + y; y = y + 1; }\n}",
            &["summarize"],
        );
        assert_eq!(code, EXIT_NEGATIVE, "{out}");
        assert!(out.contains("COUPLED_RECURRENCE"), "{out}");
        assert!(out.contains("result: FAILURE"), "{out}");
    }

    #[test]
    fn empty_program_summarizes_to_nothing() {
        let (code, out) = run_on("proc main { }", &["summarize"]);
        assert_eq!(code, EXIT_SUCCESS);
        assert!(out.contains("no loops"), "{out}");
    }

    #[test]
    fn verify_lists_one_line_per_assertion() {
        let (code, out) = run_on(
            "proc main {\n\
             i = 0;\n\
             while (i < 10) { i = i + 1; assert(i <= 10); }\n\
             assert(i == 10);\n\
             }",
            &["verify"],
        );
        assert_eq!(code, EXIT_SUCCESS, "{out}");
        assert_eq!(out.matches(": HOLDS").count(), 2, "{out}");
        assert!(out.contains("result: 2 hold, 0 violated, 0 unknown"), "{out}");
    }

    #[test]
    fn verify_reports_a_violation_with_its_witness() {
        let (code, out) = run_on(
            "// input x in [0, 20]\nproc main { y = x + 1; assert(y <= 20); }",
            &["verify"],
        );
        assert_eq!(code, EXIT_NEGATIVE, "{out}");
        assert!(out.contains("VIOLATED witness {\"x\":20}"), "{out}");
    }

    #[test]
    fn oracle_diff_matches_a_closed_summary() {
        let (code, out) = run_on(COUNT_UP, &["oracle-diff", "--inputs", "60", "--seed", "7"]);
        assert_eq!(code, EXIT_SUCCESS, "{out}");
        assert!(out.contains("(100.0%)"), "{out}");
    }

    #[test]
    fn dump_cfg_emits_dot() {
        let (code, out) = run_on(COUNT_UP, &["dump-cfg"]);
        assert_eq!(code, EXIT_SUCCESS);
        assert!(out.starts_with("digraph"), "{out}");
        assert!(out.contains("L0: while (x < 10)"), "{out}");
    }

    #[test]
    fn dump_spaths_lists_conditions_and_updates() {
        let (code, out) = run_on(COUNT_UP, &["dump-spaths"]);
        assert_eq!(code, EXIT_SUCCESS);
        assert!(out.contains("P0"), "{out}");
        assert!(out.contains("cond: x0 < 10"), "{out}");
        assert!(out.contains("op:   x = x0 + 1"), "{out}");
    }

    #[test]
    fn dump_csg_emits_both_graphs() {
        let (code, out) = run_on(COUNT_UP, &["dump-csg"]);
        assert_eq!(code, EXIT_SUCCESS);
        assert!(out.contains("L0-jumps"), "{out}");
        assert!(out.contains("L0-csg"), "{out}");
        assert!(out.contains("1-order"), "{out}");
    }

    #[test]
    fn parse_errors_exit_with_usage_code() {
        let (code, out) = run_on("proc main { x = ; }", &["summarize"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.contains("error"), "{out}");
    }

    #[test]
    fn missing_file_is_a_usage_error() {
        let mut out = Vec::new();
        let argv: Vec<String> = ["loopsum", "summarize", "/nonexistent/m.wl"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(run(&argv, &mut out), EXIT_USAGE);
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let mut out = Vec::new();
        let argv: Vec<String> = ["loopsum", "summarize", "--no-such-flag"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(run(&argv, &mut out), EXIT_USAGE);
    }

    #[test]
    fn help_exits_cleanly() {
        let mut out = Vec::new();
        let argv: Vec<String> = ["loopsum", "--help"].iter().map(|s| s.to_string()).collect();
        assert_eq!(run(&argv, &mut out), EXIT_SUCCESS);
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("summarize"), "{text}");
        assert!(text.contains("oracle-diff"), "{text}");
    }

    #[test]
    fn json_output_is_byte_stable() {
        let dir = tempfile::tempdir().expect("tempdir");
        let prog = dir.path().join("prog.wl");
        std::fs::write(&prog, COUNT_UP).expect("write program");
        let mut dumps = Vec::new();
        for i in 0..2 {
            let json = dir.path().join(format!("out{i}.json"));
            let argv: Vec<String> = [
                "loopsum",
                "summarize",
                prog.display().to_string().as_str(),
                "--json-out",
                json.display().to_string().as_str(),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect();
            let mut out = Vec::new();
            assert_eq!(run(&argv, &mut out), EXIT_SUCCESS);
            dumps.push(std::fs::read(&json).expect("read json"));
        }
        assert_eq!(dumps[0], dumps[1]);
        let parsed: serde_json::Value = serde_json::from_slice(&dumps[0]).expect("valid json");
        assert_eq!(parsed["success"], serde_json::Value::Bool(true));
    }

    #[test]
    fn diff_json_records_the_draw() {
        let dir = tempfile::tempdir().expect("tempdir");
        let prog = dir.path().join("prog.wl");
        std::fs::write(&prog, COUNT_UP).expect("write program");
        let json = dir.path().join("diff.json");
        let argv: Vec<String> = [
            "loopsum",
            "oracle-diff",
            prog.display().to_string().as_str(),
            "--inputs",
            "40",
            "--seed",
            "3",
            "--json-out",
            json.display().to_string().as_str(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let mut out = Vec::new();
        assert_eq!(run(&argv, &mut out), EXIT_SUCCESS);
        let parsed: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&json).unwrap()).expect("valid json");
        assert_eq!(parsed["inputs"], serde_json::json!(40));
        assert_eq!(parsed["matched"], parsed["compared"]);
    }
}
