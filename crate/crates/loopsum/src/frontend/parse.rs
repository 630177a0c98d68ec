//! Recursive-descent parser and the post-parse fragment checks.

use super::ast::*;
use super::diag::{Diagnostic, ParseError, RejectTag};
use super::lex::{lex, Tok};

pub fn parse(src: &str) -> Result<Program, ParseError> {
    let lexed = lex(src)?;
    let mut p = Parser {
        toks: lexed.tokens,
        pos: 0,
        next_loop: 0,
        next_nondet: 0,
    };
    let program = p.program(lexed.inputs, lexed.bitwidth)?;
    check_program(&program)?;
    Ok(program)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    next_loop: u32,
    next_nondet: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> Result<Span, ParseError> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            Err(ParseError::one(Diagnostic::error(
                self.span(),
                format!("expected {} {ctx}, found {}", want.describe(), self.peek().describe()),
            )))
        }
    }

    fn program(
        &mut self,
        inputs: Vec<InputDecl>,
        bitwidth: Option<u32>,
    ) -> Result<Program, ParseError> {
        self.expect(Tok::KwProc, "to start the procedure")?;
        let name = match self.bump() {
            (Tok::Ident(name), _) => name,
            (t, span) => {
                return Err(ParseError::one(Diagnostic::error(
                    span,
                    format!("expected procedure name, found {}", t.describe()),
                )))
            }
        };
        let body = self.block()?;
        if *self.peek() != Tok::Eof {
            return Err(ParseError::one(Diagnostic::error(
                self.span(),
                "expected end of file after the procedure; files hold one procedure",
            )));
        }
        Ok(Program {
            name,
            inputs,
            bitwidth,
            body,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "to open a block")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(ParseError::one(Diagnostic::error(
                    self.span(),
                    "unexpected end of file inside a block; missing `}`",
                )));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::KwWhile => {
                let span = self.bump().1;
                let id = LoopId(self.next_loop);
                self.next_loop += 1;
                self.expect(Tok::LParen, "after `while`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "to close the loop condition")?;
                let body = self.block()?;
                Ok(Stmt::While {
                    id,
                    cond,
                    body,
                    span,
                })
            }
            Tok::KwIf => {
                let span = self.bump().1;
                self.expect(Tok::LParen, "after `if`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "to close the condition")?;
                let then_branch = self.block()?;
                let else_branch = if *self.peek() == Tok::KwElse {
                    self.bump();
                    if *self.peek() == Tok::KwIf {
                        vec![self.stmt()?]
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    span,
                })
            }
            Tok::KwAssert => {
                let span = self.bump().1;
                self.expect(Tok::LParen, "after `assert`")?;
                let cond = self.expr()?;
                self.expect(Tok::RParen, "to close the assertion")?;
                self.expect(Tok::Semi, "after the assertion")?;
                Ok(Stmt::Assert { cond, span })
            }
            Tok::KwBreak => {
                let span = self.bump().1;
                self.expect(Tok::Semi, "after `break`")?;
                Ok(Stmt::Break { span })
            }
            Tok::Ident(name) => {
                let span = self.bump().1;
                let op = self.bump().0;
                let rhs = self.expr()?;
                self.expect(Tok::Semi, "after the assignment")?;
                let var = Expr::Var(name.clone(), span);
                let value = match op {
                    Tok::Assign => rhs,
                    Tok::PlusAssign => Expr::Bin(BinOp::Add, Box::new(var), Box::new(rhs)),
                    Tok::MinusAssign => Expr::Bin(BinOp::Sub, Box::new(var), Box::new(rhs)),
                    Tok::StarAssign => Expr::Bin(BinOp::Mul, Box::new(var), Box::new(rhs)),
                    Tok::SlashAssign => Expr::Bin(BinOp::Div, Box::new(var), Box::new(rhs)),
                    Tok::PercentAssign => Expr::Bin(BinOp::Mod, Box::new(var), Box::new(rhs)),
                    t => {
                        return Err(ParseError::one(Diagnostic::error(
                            span,
                            format!("expected an assignment operator, found {}", t.describe()),
                        )))
                    }
                };
                Ok(Stmt::Assign {
                    target: name,
                    value,
                    synthetic: false,
                    span,
                })
            }
            t => Err(ParseError::one(Diagnostic::error(
                self.span(),
                format!("expected a statement, found {}", t.describe()),
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_expr()?;
            lhs = Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.cmp_expr()?;
            lhs = Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::EqEq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add_expr()?;
        // Comparisons do not chain: `a < b < c` is rejected here because the
        // second `<` would follow a boolean.
        Ok(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.unary_expr()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                let inner = self.unary_expr()?;
                // Fold a negated literal so divisor checks see one token.
                Ok(match inner {
                    Expr::Int(v) if v.checked_neg().is_some() => Expr::Int(-v),
                    other => Expr::Neg(Box::new(other)),
                })
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Not(Box::new(self.unary_expr()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.bump() {
            (Tok::Int(v), _) => Ok(Expr::Int(v)),
            (Tok::Ident(name), span) => {
                if *self.peek() == Tok::LParen {
                    return Err(ParseError::one(Diagnostic::tagged(
                        span,
                        RejectTag::UnsupportedExpr,
                        format!("call to `{name}`; the only supported call is nondet()"),
                    )));
                }
                Ok(Expr::Var(name, span))
            }
            (Tok::KwNondet, span) => {
                self.expect(Tok::LParen, "after `nondet`")?;
                self.expect(Tok::RParen, "to finish nondet()")?;
                let id = self.next_nondet;
                self.next_nondet += 1;
                Ok(Expr::Nondet(id, span))
            }
            (Tok::LParen, _) => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "to close the parenthesized expression")?;
                Ok(e)
            }
            (t, span) => Err(ParseError::one(Diagnostic::error(
                span,
                format!("expected an expression, found {}", t.describe()),
            ))),
        }
    }
}

/// Post-parse validation: sort checks, divisor checks, declaration checks,
/// and the placement rule for nondeterministic reads.
fn check_program(p: &Program) -> Result<(), ParseError> {
    let declared = p.all_vars();
    let mut errs = Vec::new();

    let check_expr = |e: &Expr, want_bool: bool, errs: &mut Vec<Diagnostic>| {
        if want_bool && !e.is_boolean() {
            errs.push(Diagnostic::error(
                e.span(),
                "condition must be boolean (compare with `!= 0` to test an integer)",
            ));
        }
        e.visit(&mut |sub| match sub {
            Expr::Bin(BinOp::Div | BinOp::Mod, lhs, rhs) => {
                if lhs.is_boolean() {
                    errs.push(Diagnostic::error(lhs.span(), "arithmetic on a boolean value"));
                }
                match rhs.as_ref() {
                    Expr::Int(0) => errs.push(Diagnostic::tagged(
                        sub.span(),
                        RejectTag::UnsupportedExpr,
                        "division by the literal zero",
                    )),
                    Expr::Int(_) => {}
                    _ => errs.push(Diagnostic::tagged(
                        rhs.span(),
                        RejectTag::DivByVar,
                        "divisor must be a nonzero integer literal",
                    )),
                }
            }
            Expr::Bin(BinOp::And | BinOp::Or, l, r) => {
                for side in [l.as_ref(), r.as_ref()] {
                    if !side.is_boolean() {
                        errs.push(Diagnostic::error(
                            side.span(),
                            "operands of `&&`/`||` must be boolean",
                        ));
                    }
                }
            }
            Expr::Not(inner) => {
                if !inner.is_boolean() {
                    errs.push(Diagnostic::error(
                        inner.span(),
                        "operand of `!` must be boolean",
                    ));
                }
            }
            Expr::Bin(BinOp::Add | BinOp::Sub | BinOp::Mul, l, r) => {
                for side in [l.as_ref(), r.as_ref()] {
                    if side.is_boolean() {
                        errs.push(Diagnostic::error(
                            side.span(),
                            "arithmetic on a boolean value",
                        ));
                    }
                }
            }
            Expr::Bin(_, l, r) => {
                for side in [l.as_ref(), r.as_ref()] {
                    if side.is_boolean() {
                        errs.push(Diagnostic::error(
                            side.span(),
                            "comparison of boolean values",
                        ));
                    }
                }
            }
            Expr::Neg(inner) => {
                if inner.is_boolean() {
                    errs.push(Diagnostic::error(
                        inner.span(),
                        "negation of a boolean value",
                    ));
                }
            }
            Expr::Var(name, span) => {
                if !declared.contains(name) {
                    errs.push(Diagnostic::error(
                        *span,
                        format!("variable `{name}` is never assigned and is not an input"),
                    ));
                }
            }
            _ => {}
        });
    };

    fn walk(
        stmts: &[Stmt],
        in_loop_body: bool,
        check: &impl Fn(&Expr, bool, &mut Vec<Diagnostic>),
        errs: &mut Vec<Diagnostic>,
    ) {
        for s in stmts {
            match s {
                Stmt::Assign { value, span, .. } => {
                    check(value, false, errs);
                    if in_loop_body && value.contains_nondet() {
                        errs.push(Diagnostic::tagged(
                            *span,
                            RejectTag::UnsupportedExpr,
                            "nondet() inside a loop body makes the iteration relation \
                             non-functional; it is allowed in straight-line code and \
                             loop conditions only",
                        ));
                    }
                }
                Stmt::Assert { cond, .. } => check(cond, true, errs),
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                    ..
                } => {
                    check(cond, true, errs);
                    if in_loop_body && cond.contains_nondet() {
                        errs.push(Diagnostic::tagged(
                            cond.span(),
                            RejectTag::UnsupportedExpr,
                            "nondet() inside a loop body is not supported",
                        ));
                    }
                    walk(then_branch, in_loop_body, check, errs);
                    walk(else_branch, in_loop_body, check, errs);
                }
                Stmt::While { cond, body, .. } => {
                    check(cond, true, errs);
                    walk(body, true, check, errs);
                }
                Stmt::Break { span } => {
                    if !in_loop_body {
                        errs.push(Diagnostic::error(*span, "`break` outside of a loop"));
                    }
                }
            }
        }
    }

    walk(&p.body, false, &check_expr, &mut errs);

    if errs.is_empty() {
        Ok(())
    } else {
        Err(ParseError { diagnostics: errs })
    }
}
