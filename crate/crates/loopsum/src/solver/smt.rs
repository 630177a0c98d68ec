//! External SMT-LIB backend.
//!
//! Each query becomes a one-shot SMT-LIB 2 script piped to a user-supplied
//! command (`sh -c <cmd>`), e.g. `z3 -in` or `cvc5 --lang smt2 -`. The
//! response is parsed for `sat`/`unsat` and a model. Anything that cannot
//! be translated, launched, or parsed is reported as unknown so callers
//! can fall back to the built-in backend.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Instant;

use super::Model;
use crate::sym::{CmpOp, SymExpr, SymVar};

#[derive(Debug)]
pub enum SmtOutcome {
    Sat(Model),
    Unsat,
    Unknown,
}

pub fn check(cmd: &str, atoms: &[SymExpr], deadline: Instant) -> SmtOutcome {
    let Some(script) = translate(atoms) else {
        return SmtOutcome::Unknown;
    };
    let Some(stdout) = run(cmd, &script.text, deadline) else {
        return SmtOutcome::Unknown;
    };
    parse_response(&stdout, &script.vars)
}

struct Script {
    text: String,
    /// Emitted symbol name (unquoted) back to the variable it stands for.
    vars: BTreeMap<String, SymVar>,
}

fn translate(atoms: &[SymExpr]) -> Option<Script> {
    let mut vars: BTreeMap<String, SymVar> = BTreeMap::new();
    for a in atoms {
        for v in a.vars() {
            vars.insert(v.to_string(), v);
        }
    }
    let mut text = String::from("(set-logic ALL)\n");
    for name in vars.keys() {
        text.push_str(&format!("(declare-const |{name}| Int)\n"));
    }
    for a in atoms {
        let body = emit_bool(a)?;
        text.push_str(&format!("(assert {body})\n"));
    }
    text.push_str("(check-sat)\n(get-model)\n");
    Some(Script { text, vars })
}

fn emit_int(e: &SymExpr) -> Option<String> {
    Some(match e {
        SymExpr::Int(v) => {
            if *v < 0 {
                format!("(- {})", v.unsigned_abs())
            } else {
                v.to_string()
            }
        }
        SymExpr::Var(v) => format!("|{v}|"),
        SymExpr::Add(xs) => match xs.len() {
            0 => "0".to_string(),
            1 => emit_int(&xs[0])?,
            _ => nary("+", xs, emit_int)?,
        },
        SymExpr::Mul(xs) => match xs.len() {
            0 => "1".to_string(),
            1 => emit_int(&xs[0])?,
            _ => nary("*", xs, emit_int)?,
        },
        // Division in the modeled language floors toward negative
        // infinity; SMT-LIB `div` is Euclidean, which matches floor only
        // for a positive divisor, so a negative divisor is rewritten via
        // floor(a/d) = floor(-a / -d).
        SymExpr::Div(num, den) => {
            let d = literal_divisor(den)?;
            let a = emit_int(num)?;
            if d > 0 {
                format!("(div {a} {d})")
            } else {
                format!("(div (- {a}) {})", d.unsigned_abs())
            }
        }
        SymExpr::Mod(num, den) => {
            let d = literal_divisor(den)?;
            let a = emit_int(num)?;
            let fd = if d > 0 {
                format!("(div {a} {d})")
            } else {
                format!("(div (- {a}) {})", d.unsigned_abs())
            };
            let dterm = if d < 0 {
                format!("(- {})", d.unsigned_abs())
            } else {
                d.to_string()
            };
            format!("(- {a} (* {dterm} {fd}))")
        }
        _ => return None,
    })
}

fn literal_divisor(e: &SymExpr) -> Option<i128> {
    match e {
        SymExpr::Int(v) if *v != 0 => Some(*v),
        _ => None,
    }
}

fn emit_bool(e: &SymExpr) -> Option<String> {
    Some(match e {
        SymExpr::Bool(b) => b.to_string(),
        SymExpr::Not(x) => format!("(not {})", emit_bool(x)?),
        SymExpr::And(xs) => match xs.len() {
            0 => "true".to_string(),
            1 => emit_bool(&xs[0])?,
            _ => nary("and", xs, emit_bool)?,
        },
        SymExpr::Or(xs) => match xs.len() {
            0 => "false".to_string(),
            1 => emit_bool(&xs[0])?,
            _ => nary("or", xs, emit_bool)?,
        },
        SymExpr::Cmp(op, l, r) => {
            let l = emit_int(l)?;
            let r = emit_int(r)?;
            match op {
                CmpOp::Eq => format!("(= {l} {r})"),
                CmpOp::Ne => format!("(not (= {l} {r}))"),
                CmpOp::Lt => format!("(< {l} {r})"),
                CmpOp::Le => format!("(<= {l} {r})"),
                CmpOp::Gt => format!("(> {l} {r})"),
                CmpOp::Ge => format!("(>= {l} {r})"),
            }
        }
        _ => return None,
    })
}

fn nary(op: &str, xs: &[SymExpr], emit: fn(&SymExpr) -> Option<String>) -> Option<String> {
    let parts: Vec<String> = xs.iter().map(emit).collect::<Option<_>>()?;
    Some(format!("({op} {})", parts.join(" ")))
}

/// Runs `sh -c cmd` with `script` on stdin and returns its stdout, or
/// `None` when the process fails to start, exits abnormally, or is still
/// running at the deadline (it is killed).
fn run(cmd: &str, script: &str, deadline: Instant) -> Option<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;

    if let Some(mut stdin) = child.stdin.take() {
        // The solver may exit without reading; a broken pipe is fine.
        let _ = stdin.write_all(script.as_bytes());
    }

    let mut stdout = child.stdout.take()?;
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        let _ = tx.send(buf);
    });

    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let out = rx
                    .recv_timeout(deadline.saturating_duration_since(Instant::now()))
                    .unwrap_or_default();
                return status.success().then_some(out);
            }
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return None;
                }
                std::thread::sleep(std::time::Duration::from_millis(5));
            }
            Err(_) => return None,
        }
    }
}

#[derive(Debug)]
enum SExp {
    Atom(String),
    List(Vec<SExp>),
}

fn tokenize(s: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '(' | ')' => tokens.push(c.to_string()),
            '|' => {
                let mut t = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    t.push(c);
                }
                tokens.push(t);
            }
            c if c.is_whitespace() => {}
            c => {
                let mut t = String::from(c);
                while let Some(&c) = chars.peek() {
                    if c == '(' || c == ')' || c == '|' || c.is_whitespace() {
                        break;
                    }
                    t.push(c);
                    chars.next();
                }
                tokens.push(t);
            }
        }
    }
    tokens
}

fn parse_sexps(tokens: &[String]) -> Option<Vec<SExp>> {
    let mut stack: Vec<Vec<SExp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack.pop()?;
                stack.last_mut()?.push(SExp::List(done));
            }
            _ => stack.last_mut()?.push(SExp::Atom(t.clone())),
        }
    }
    (stack.len() == 1).then(|| stack.pop().unwrap())
}

fn parse_int_value(e: &SExp) -> Option<i128> {
    match e {
        SExp::Atom(a) => a.parse().ok(),
        SExp::List(xs) => match xs.as_slice() {
            [SExp::Atom(minus), SExp::Atom(a)] if minus == "-" => {
                a.parse::<i128>().ok().map(|v| -v)
            }
            _ => None,
        },
    }
}

fn collect_defines(e: &SExp, out: &mut BTreeMap<String, i128>) {
    if let SExp::List(xs) = e {
        if let [SExp::Atom(head), SExp::Atom(name), SExp::List(args), SExp::Atom(ty), value] =
            xs.as_slice()
        {
            if head == "define-fun" && args.is_empty() && ty == "Int" {
                if let Some(v) = parse_int_value(value) {
                    out.insert(name.clone(), v);
                }
                return;
            }
        }
        for x in xs {
            collect_defines(x, out);
        }
    }
}

fn parse_response(text: &str, vars: &BTreeMap<String, SymVar>) -> SmtOutcome {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => return SmtOutcome::Unsat,
        Some("sat") => {}
        _ => return SmtOutcome::Unknown,
    }
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let Some(sexps) = parse_sexps(&tokenize(&rest)) else {
        return SmtOutcome::Unknown;
    };
    let mut assignments = BTreeMap::new();
    for e in &sexps {
        collect_defines(e, &mut assignments);
    }
    let mut model = Model::new();
    for (name, var) in vars {
        // Solvers omit variables the model does not constrain.
        let v = assignments.get(name).copied().unwrap_or(0);
        model.insert(var.clone(), v);
    }
    SmtOutcome::Sat(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Solver, SolverConfig};
    use crate::sym::{cmp, int, pre};
    use std::time::Duration;

    fn far() -> Instant {
        Instant::now() + Duration::from_secs(5)
    }

    #[test]
    fn script_declares_vars_and_floors_division() {
        let atoms = vec![
            cmp(CmpOp::Eq, SymExpr::div(pre("x"), int(-3)), int(2)),
            cmp(CmpOp::Eq, SymExpr::modulo(pre("y"), int(7)), int(4)),
        ];
        let script = translate(&atoms).unwrap();
        assert!(script.text.contains("(declare-const |x0| Int)"));
        assert!(script.text.contains("(declare-const |y0| Int)"));
        assert!(script.text.contains("(div (- |x0|) 3)"));
        assert!(script.text.contains("(- |y0| (* 7 (div |y0| 7)))"));
        assert!(script.text.ends_with("(check-sat)\n(get-model)\n"));
    }

    #[test]
    fn unsat_answer_is_reported() {
        let atoms = vec![cmp(CmpOp::Eq, pre("x"), int(5))];
        match check("echo unsat", &atoms, far()) {
            SmtOutcome::Unsat => {}
            other => panic!("expected unsat, got {other:?}"),
        }
    }

    #[test]
    fn sat_answer_with_model_is_parsed() {
        let atoms = vec![
            cmp(CmpOp::Eq, pre("x"), int(-5)),
            cmp(
                CmpOp::Eq,
                SymExpr::Var(SymVar::Fresh("n#0".into())),
                int(3),
            ),
        ];
        let cmd = r#"echo sat; echo '((define-fun x0 () Int (- 5)) (define-fun |n#0| () Int 3))'"#;
        match check(cmd, &atoms, far()) {
            SmtOutcome::Sat(m) => {
                assert_eq!(m[&SymVar::pre("x")], -5);
                assert_eq!(m[&SymVar::Fresh("n#0".into())], 3);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn garbage_output_is_unknown() {
        let atoms = vec![cmp(CmpOp::Eq, pre("x"), int(5))];
        match check("echo hello world", &atoms, far()) {
            SmtOutcome::Unknown => {}
            other => panic!("expected unknown, got {other:?}"),
        }
    }

    #[test]
    fn slow_solver_is_killed_at_deadline() {
        let atoms = vec![cmp(CmpOp::Eq, pre("x"), int(5))];
        let start = Instant::now();
        let deadline = start + Duration::from_millis(200);
        match check("sleep 5", &atoms, deadline) {
            SmtOutcome::Unknown => {}
            other => panic!("expected unknown, got {other:?}"),
        }
        assert!(start.elapsed() < Duration::from_secs(2));
    }

    #[test]
    fn bogus_external_model_falls_back_to_builtin() {
        let mut config = SolverConfig::default();
        config.smt_cmd = Some("echo sat; echo '((define-fun x0 () Int 4))'".to_string());
        let mut s = Solver::new(config);
        let atoms = vec![cmp(CmpOp::Eq, pre("x"), int(5))];
        match s.check(&atoms) {
            crate::solver::SolveResult::Sat(m) => assert_eq!(m[&SymVar::pre("x")], 5),
            other => panic!("expected sat from fallback, got {other:?}"),
        }
        assert_eq!(s.stats.external_calls, 1);
    }

    #[test]
    fn external_unsat_is_authoritative() {
        let mut config = SolverConfig::default();
        config.smt_cmd = Some("echo unsat".to_string());
        let mut s = Solver::new(config);
        let atoms = vec![cmp(CmpOp::Eq, pre("x"), int(5))];
        assert!(s.check(&atoms).is_unsat());
    }
}
