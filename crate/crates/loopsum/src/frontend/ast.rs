//! Syntax tree for the analyzed language: integer variables, assignments,
//! `if`/`else`, `while`, `assert`, `break`, and `nondet()` reads.

use std::collections::BTreeSet;
use std::fmt;

/// Byte span into the source text, with 1-based line/column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Input declared by an `// input x in [lo, hi]` pragma. Bounds are
/// optional; an unbounded input still marks the name as externally chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDecl {
    pub name: String,
    pub domain: Option<(i128, i128)>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub inputs: Vec<InputDecl>,
    /// Optional `// bitwidth w` pragma: the oracle wraps arithmetic to `w`
    /// bits two's-complement instead of erroring on overflow.
    pub bitwidth: Option<u32>,
    pub body: Vec<Stmt>,
}

/// Identifier for a `while` loop, assigned in textual order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LoopId(pub u32);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign {
        target: String,
        value: Expr,
        /// Set on statements produced by program transformations (loop
        /// elimination, break rewriting), never by the parser.
        synthetic: bool,
        span: Span,
    },
    If {
        cond: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
        span: Span,
    },
    While {
        id: LoopId,
        cond: Expr,
        body: Vec<Stmt>,
        span: Span,
    },
    Assert {
        cond: Expr,
        span: Span,
    },
    Break {
        span: Span,
    },
}

impl Stmt {
    pub fn span(&self) -> Span {
        match self {
            Stmt::Assign { span, .. }
            | Stmt::If { span, .. }
            | Stmt::While { span, .. }
            | Stmt::Assert { span, .. }
            | Stmt::Break { span } => *span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i128),
    Var(String, Span),
    /// One nondeterministic read. The index is unique per occurrence so the
    /// verifier can name each read as a distinct input symbol.
    Nondet(u32, Span),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn span(&self) -> Span {
        match self {
            Expr::Var(_, s) | Expr::Nondet(_, s) => *s,
            Expr::Neg(e) | Expr::Not(e) => e.span(),
            Expr::Bin(_, l, _) => l.span(),
            Expr::Int(_) => Span::default(),
        }
    }

    /// True for expressions of boolean sort (comparisons and connectives).
    pub fn is_boolean(&self) -> bool {
        matches!(
            self,
            Expr::Not(_)
                | Expr::Bin(
                    BinOp::Lt
                        | BinOp::Le
                        | BinOp::Gt
                        | BinOp::Ge
                        | BinOp::Eq
                        | BinOp::Ne
                        | BinOp::And
                        | BinOp::Or,
                    _,
                    _
                )
        )
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Var(..) | Expr::Nondet(..) => {}
            Expr::Neg(e) | Expr::Not(e) => e.visit(f),
            Expr::Bin(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
        }
    }

    pub fn contains_nondet(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, Expr::Nondet(..)) {
                found = true;
            }
        });
        found
    }
}

/// Walks all statements in a block, recursing into branches and loop bodies.
pub fn visit_stmts(stmts: &[Stmt], f: &mut impl FnMut(&Stmt)) {
    for s in stmts {
        f(s);
        match s {
            Stmt::If {
                then_branch,
                else_branch,
                ..
            } => {
                visit_stmts(then_branch, f);
                visit_stmts(else_branch, f);
            }
            Stmt::While { body, .. } => visit_stmts(body, f),
            _ => {}
        }
    }
}

impl Program {
    /// Every variable name assigned anywhere in the program.
    pub fn assigned_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        visit_stmts(&self.body, &mut |s| {
            if let Stmt::Assign { target, .. } = s {
                out.insert(target.clone());
            }
        });
        out
    }

    /// All variable names: inputs plus assigned.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = self.assigned_vars();
        for i in &self.inputs {
            out.insert(i.name.clone());
        }
        out
    }

    pub fn loop_count(&self) -> usize {
        let mut n = 0;
        visit_stmts(&self.body, &mut |s| {
            if matches!(s, Stmt::While { .. }) {
                n += 1;
            }
        });
        n
    }

    /// Finds a loop by id anywhere in the nesting structure.
    pub fn find_loop(&self, id: LoopId) -> Option<&Stmt> {
        fn search(stmts: &[Stmt], id: LoopId) -> Option<&Stmt> {
            for s in stmts {
                match s {
                    Stmt::While { id: lid, body, .. } => {
                        if *lid == id {
                            return Some(s);
                        }
                        if let Some(hit) = search(body, id) {
                            return Some(hit);
                        }
                    }
                    Stmt::If {
                        then_branch,
                        else_branch,
                        ..
                    } => {
                        if let Some(hit) =
                            search(then_branch, id).or_else(|| search(else_branch, id))
                        {
                            return Some(hit);
                        }
                    }
                    _ => {}
                }
            }
            None
        }
        search(&self.body, id)
    }
}
