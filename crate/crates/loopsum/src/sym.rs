//! Symbolic integer expressions.
//!
//! Every analysis result in this crate is phrased over `SymExpr`: branch
//! conditions after substitution, per-variable update maps, iteration counts
//! and closed forms. Expressions range over the values program variables had
//! when the summarized region was entered (`SymVar::Pre`), the region's
//! iteration counter `N`, and solver-introduced fresh symbols.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A variable occurring inside a symbolic expression.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymVar {
    /// Value of a program variable at region entry. Printed with a `0`
    /// suffix, so `Pre("x")` displays as `x0`.
    Pre(String),
    /// Iteration counter of the summarized region.
    N,
    /// Fresh symbol introduced by the solver or the verifier. Names contain
    /// `#`, which cannot appear in source identifiers.
    Fresh(String),
}

impl SymVar {
    pub fn pre(name: &str) -> Self {
        SymVar::Pre(name.to_string())
    }
}

impl fmt::Display for SymVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymVar::Pre(name) => write!(f, "{name}0"),
            SymVar::N => write!(f, "N"),
            SymVar::Fresh(name) => write!(f, "{name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn negate(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
        }
    }

    pub fn eval(self, l: i128, r: i128) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        };
        write!(f, "{s}")
    }
}

/// Symbolic expression tree. Integer-valued nodes and boolean-valued nodes
/// share the enum; `eval` reports a type error when a program would mix them.
///
/// `Div` is floor division and `Mod` is the matching remainder (the result
/// has the divisor's sign), so `(-7) / 2 == -4` and `(-7) % 2 == 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymExpr {
    Int(i128),
    Var(SymVar),
    Add(Vec<SymExpr>),
    Mul(Vec<SymExpr>),
    Div(Box<SymExpr>, Box<SymExpr>),
    Mod(Box<SymExpr>, Box<SymExpr>),
    Cmp(CmpOp, Box<SymExpr>, Box<SymExpr>),
    Not(Box<SymExpr>),
    And(Vec<SymExpr>),
    Or(Vec<SymExpr>),
    Bool(bool),
}

/// Floor division; panics only on divisor zero (callers check).
pub fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

/// Remainder paired with `div_floor`: result sign follows the divisor.
pub fn mod_floor(a: i128, b: i128) -> i128 {
    a - b.checked_mul(div_floor(a, b)).expect("mod overflow")
}

/// Ceiling division.
pub fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound symbol {0}")]
    Unbound(String),
    #[error("division by zero")]
    DivByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("boolean used as integer or vice versa")]
    TypeMismatch,
}

/// Result of evaluating a `SymExpr` under a concrete environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymValue {
    Int(i128),
    Bool(bool),
}

impl SymValue {
    pub fn as_int(self) -> Result<i128, EvalError> {
        match self {
            SymValue::Int(v) => Ok(v),
            SymValue::Bool(_) => Err(EvalError::TypeMismatch),
        }
    }

    pub fn as_bool(self) -> Result<bool, EvalError> {
        match self {
            SymValue::Bool(v) => Ok(v),
            SymValue::Int(_) => Err(EvalError::TypeMismatch),
        }
    }
}

impl SymExpr {
    pub fn int(v: i128) -> Self {
        SymExpr::Int(v)
    }

    pub fn pre(name: &str) -> Self {
        SymExpr::Var(SymVar::pre(name))
    }

    pub fn n() -> Self {
        SymExpr::Var(SymVar::N)
    }

    pub fn add(terms: Vec<SymExpr>) -> Self {
        SymExpr::Add(terms)
    }

    pub fn mul(factors: Vec<SymExpr>) -> Self {
        SymExpr::Mul(factors)
    }

    pub fn neg(e: SymExpr) -> Self {
        SymExpr::Mul(vec![SymExpr::Int(-1), e])
    }

    pub fn sub(l: SymExpr, r: SymExpr) -> Self {
        SymExpr::Add(vec![l, SymExpr::neg(r)])
    }

    pub fn cmp(op: CmpOp, l: SymExpr, r: SymExpr) -> Self {
        SymExpr::Cmp(op, Box::new(l), Box::new(r))
    }

    pub fn div(num: SymExpr, den: SymExpr) -> Self {
        SymExpr::Div(Box::new(num), Box::new(den))
    }

    pub fn modulo(num: SymExpr, den: SymExpr) -> Self {
        SymExpr::Mod(Box::new(num), Box::new(den))
    }

    /// `ceil(num / den)` for a positive literal divisor, phrased with floor
    /// division as `(num + den - 1) / den`.
    pub fn ceil_div(num: SymExpr, den: i128) -> Self {
        assert!(den > 0, "ceil_div expects a positive literal divisor");
        if den == 1 {
            return num;
        }
        SymExpr::Div(
            Box::new(SymExpr::Add(vec![num, SymExpr::Int(den - 1)])),
            Box::new(SymExpr::Int(den)),
        )
    }

    pub fn is_true(&self) -> bool {
        matches!(self, SymExpr::Bool(true))
    }

    /// Collects every variable mentioned in the expression.
    pub fn vars(&self) -> BTreeSet<SymVar> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let SymExpr::Var(v) = e {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&SymExpr)) {
        f(self);
        match self {
            SymExpr::Int(_) | SymExpr::Var(_) | SymExpr::Bool(_) => {}
            SymExpr::Add(xs) | SymExpr::Mul(xs) | SymExpr::And(xs) | SymExpr::Or(xs) => {
                for x in xs {
                    x.visit(f);
                }
            }
            SymExpr::Div(a, b) | SymExpr::Mod(a, b) | SymExpr::Cmp(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            SymExpr::Not(a) => a.visit(f),
        }
    }

    /// True when a floor-division or remainder node sits anywhere in the tree.
    pub fn has_div_mod(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e, SymExpr::Div(..) | SymExpr::Mod(..)) {
                found = true;
            }
        });
        found
    }

    /// Replaces `Pre` variables by the expressions of `map`; variables
    /// without an entry stay as themselves. This is the substitution step of
    /// forward path execution: program text mentions current values, and the
    /// update map rewrites them to region-entry values.
    pub fn subst_pre(&self, map: &BTreeMap<String, SymExpr>) -> SymExpr {
        self.subst(&mut |v| match v {
            SymVar::Pre(name) => map.get(name).cloned(),
            _ => None,
        })
    }

    /// Replaces the iteration symbol `N` by `e`.
    pub fn subst_n(&self, e: &SymExpr) -> SymExpr {
        self.subst(&mut |v| (*v == SymVar::N).then(|| e.clone()))
    }

    pub fn subst(&self, lookup: &mut impl FnMut(&SymVar) -> Option<SymExpr>) -> SymExpr {
        match self {
            SymExpr::Int(_) | SymExpr::Bool(_) => self.clone(),
            SymExpr::Var(v) => lookup(v).unwrap_or_else(|| self.clone()),
            SymExpr::Add(xs) => SymExpr::Add(xs.iter().map(|x| x.subst(lookup)).collect()),
            SymExpr::Mul(xs) => SymExpr::Mul(xs.iter().map(|x| x.subst(lookup)).collect()),
            SymExpr::And(xs) => SymExpr::And(xs.iter().map(|x| x.subst(lookup)).collect()),
            SymExpr::Or(xs) => SymExpr::Or(xs.iter().map(|x| x.subst(lookup)).collect()),
            SymExpr::Div(a, b) => {
                SymExpr::Div(Box::new(a.subst(lookup)), Box::new(b.subst(lookup)))
            }
            SymExpr::Mod(a, b) => {
                SymExpr::Mod(Box::new(a.subst(lookup)), Box::new(b.subst(lookup)))
            }
            SymExpr::Cmp(op, a, b) => {
                SymExpr::Cmp(*op, Box::new(a.subst(lookup)), Box::new(b.subst(lookup)))
            }
            SymExpr::Not(a) => SymExpr::Not(Box::new(a.subst(lookup))),
        }
    }

    /// Evaluates under a concrete environment. Arithmetic is checked; any
    /// overflow of the 128-bit carrier is reported, never wrapped.
    pub fn eval(&self, env: &impl Fn(&SymVar) -> Option<i128>) -> Result<SymValue, EvalError> {
        use SymValue::{Bool, Int};
        match self {
            SymExpr::Int(v) => Ok(Int(*v)),
            SymExpr::Bool(b) => Ok(Bool(*b)),
            SymExpr::Var(v) => env(v)
                .map(Int)
                .ok_or_else(|| EvalError::Unbound(v.to_string())),
            SymExpr::Add(xs) => {
                let mut acc: i128 = 0;
                for x in xs {
                    acc = acc
                        .checked_add(x.eval(env)?.as_int()?)
                        .ok_or(EvalError::Overflow)?;
                }
                Ok(Int(acc))
            }
            SymExpr::Mul(xs) => {
                let mut acc: i128 = 1;
                for x in xs {
                    acc = acc
                        .checked_mul(x.eval(env)?.as_int()?)
                        .ok_or(EvalError::Overflow)?;
                }
                Ok(Int(acc))
            }
            SymExpr::Div(a, b) => {
                let (a, b) = (a.eval(env)?.as_int()?, b.eval(env)?.as_int()?);
                if b == 0 {
                    return Err(EvalError::DivByZero);
                }
                Ok(Int(div_floor(a, b)))
            }
            SymExpr::Mod(a, b) => {
                let (a, b) = (a.eval(env)?.as_int()?, b.eval(env)?.as_int()?);
                if b == 0 {
                    return Err(EvalError::DivByZero);
                }
                Ok(Int(mod_floor(a, b)))
            }
            SymExpr::Cmp(op, a, b) => Ok(Bool(
                op.eval(a.eval(env)?.as_int()?, b.eval(env)?.as_int()?),
            )),
            SymExpr::Not(a) => Ok(Bool(!a.eval(env)?.as_bool()?)),
            SymExpr::And(xs) => {
                for x in xs {
                    if !x.eval(env)?.as_bool()? {
                        return Ok(Bool(false));
                    }
                }
                Ok(Bool(true))
            }
            SymExpr::Or(xs) => {
                for x in xs {
                    if x.eval(env)?.as_bool()? {
                        return Ok(Bool(true));
                    }
                }
                Ok(Bool(false))
            }
        }
    }

    /// Evaluates an integer expression under a map environment.
    pub fn eval_int(&self, env: &BTreeMap<SymVar, i128>) -> Result<i128, EvalError> {
        self.eval(&|v| env.get(v).copied())?.as_int()
    }

    /// Evaluates a boolean expression under a map environment.
    pub fn eval_bool(&self, env: &BTreeMap<SymVar, i128>) -> Result<bool, EvalError> {
        self.eval(&|v| env.get(v).copied())?.as_bool()
    }

    /// Attempts to read the expression as an affine form
    /// `sum(coeff_i * var_i) + constant`. Returns `None` when any monomial
    /// has degree above one or an opaque floor/mod node appears.
    pub fn as_affine(&self) -> Option<(BTreeMap<SymVar, i128>, i128)> {
        let poly = Poly::from_expr(self)?;
        poly.as_affine()
    }

    /// Canonical arithmetic normal form: sum of products with sorted
    /// monomials and folded constants. Floor division and remainder nodes
    /// are kept opaque (their operands are normalized recursively).
    /// Boolean structure is flattened, constant-folded, and sorted.
    pub fn normalize(&self) -> SymExpr {
        match self {
            SymExpr::Cmp(op, a, b) => {
                let (a, b) = (a.normalize(), b.normalize());
                if let (SymExpr::Int(x), SymExpr::Int(y)) = (&a, &b) {
                    return SymExpr::Bool(op.eval(*x, *y));
                }
                SymExpr::Cmp(*op, Box::new(a), Box::new(b))
            }
            SymExpr::Not(a) => match a.normalize() {
                SymExpr::Bool(b) => SymExpr::Bool(!b),
                SymExpr::Cmp(op, l, r) => SymExpr::Cmp(op.negate(), l, r),
                SymExpr::Not(inner) => *inner,
                e => SymExpr::Not(Box::new(e)),
            },
            SymExpr::And(_) | SymExpr::Or(_) => self.normalize_bool(),
            SymExpr::Bool(_) => self.clone(),
            _ => match Poly::from_expr(self) {
                Some(poly) => poly.to_expr(),
                None => self.clone(),
            },
        }
    }

    fn normalize_bool(&self) -> SymExpr {
        let (is_and, xs) = match self {
            SymExpr::And(xs) => (true, xs),
            SymExpr::Or(xs) => (false, xs),
            _ => unreachable!(),
        };
        let mut flat = Vec::new();
        for x in xs {
            let n = x.normalize();
            match (&n, is_and) {
                (SymExpr::Bool(true), true) | (SymExpr::Bool(false), false) => continue,
                (SymExpr::Bool(false), true) => return SymExpr::Bool(false),
                (SymExpr::Bool(true), false) => return SymExpr::Bool(true),
                (SymExpr::And(inner), true) | (SymExpr::Or(inner), false) => {
                    flat.extend(inner.iter().cloned())
                }
                _ => flat.push(n),
            }
        }
        flat.sort();
        flat.dedup();
        match flat.len() {
            0 => SymExpr::Bool(is_and),
            1 => flat.pop().unwrap(),
            _ if is_and => SymExpr::And(flat),
            _ => SymExpr::Or(flat),
        }
    }
}

/// A product of atoms with exponents; the empty monomial is the constant one.
type Monomial = BTreeMap<SymExpr, u32>;

/// Sum-of-products normal form over atoms (variables and opaque div/mod
/// subtrees), used both for canonical printing and affine extraction.
struct Poly {
    terms: BTreeMap<Monomial, i128>,
}

impl Poly {
    fn constant(v: i128) -> Poly {
        let mut terms = BTreeMap::new();
        if v != 0 {
            terms.insert(Monomial::new(), v);
        }
        Poly { terms }
    }

    fn atom(e: SymExpr) -> Poly {
        let mut mono = Monomial::new();
        mono.insert(e, 1);
        let mut terms = BTreeMap::new();
        terms.insert(mono, 1);
        Poly { terms }
    }

    fn add_assign(&mut self, other: Poly) -> Option<()> {
        for (mono, coef) in other.terms {
            let slot = self.terms.entry(mono).or_insert(0);
            *slot = slot.checked_add(coef)?;
            if *slot == 0 {
                // remove below to keep the map canonical
            }
        }
        self.terms.retain(|_, c| *c != 0);
        Some(())
    }

    fn mul(self, other: &Poly) -> Option<Poly> {
        let mut out = Poly {
            terms: BTreeMap::new(),
        };
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                let mut mono = m1.clone();
                for (atom, exp) in m2 {
                    let slot = mono.entry(atom.clone()).or_insert(0);
                    *slot = slot.checked_add(*exp)?;
                }
                let coef = c1.checked_mul(*c2)?;
                let slot = out.terms.entry(mono).or_insert(0);
                *slot = slot.checked_add(coef)?;
            }
        }
        out.terms.retain(|_, c| *c != 0);
        Some(out)
    }

    /// Builds the normal form; `None` on boolean subtrees or coefficient
    /// overflow (callers then leave the expression untouched).
    fn from_expr(e: &SymExpr) -> Option<Poly> {
        match e {
            SymExpr::Int(v) => Some(Poly::constant(*v)),
            SymExpr::Var(v) => Some(Poly::atom(SymExpr::Var(v.clone()))),
            SymExpr::Add(xs) => {
                let mut acc = Poly::constant(0);
                for x in xs {
                    acc.add_assign(Poly::from_expr(x)?)?;
                }
                Some(acc)
            }
            SymExpr::Mul(xs) => {
                let mut acc = Poly::constant(1);
                for x in xs {
                    acc = acc.mul(&Poly::from_expr(x)?)?;
                }
                Some(acc)
            }
            SymExpr::Div(a, b) => {
                let (a, b) = (a.normalize(), b.normalize());
                match (&a, &b) {
                    (SymExpr::Int(x), SymExpr::Int(y)) if *y != 0 => {
                        Some(Poly::constant(div_floor(*x, *y)))
                    }
                    (_, SymExpr::Int(1)) => Poly::from_expr(&a),
                    (SymExpr::Int(0), _) => Some(Poly::constant(0)),
                    _ => Some(Poly::atom(SymExpr::Div(Box::new(a), Box::new(b)))),
                }
            }
            SymExpr::Mod(a, b) => {
                let (a, b) = (a.normalize(), b.normalize());
                match (&a, &b) {
                    (SymExpr::Int(x), SymExpr::Int(y)) if *y != 0 => {
                        Some(Poly::constant(mod_floor(*x, *y)))
                    }
                    (_, SymExpr::Int(1)) => Some(Poly::constant(0)),
                    (SymExpr::Int(0), _) => Some(Poly::constant(0)),
                    _ => Some(Poly::atom(SymExpr::Mod(Box::new(a), Box::new(b)))),
                }
            }
            _ => None,
        }
    }

    fn as_affine(&self) -> Option<(BTreeMap<SymVar, i128>, i128)> {
        let mut coeffs = BTreeMap::new();
        let mut konst = 0i128;
        for (mono, coef) in &self.terms {
            match mono.len() {
                0 => konst = *coef,
                1 => {
                    let (atom, exp) = mono.iter().next().unwrap();
                    if *exp != 1 {
                        return None;
                    }
                    match atom {
                        SymExpr::Var(v) => {
                            coeffs.insert(v.clone(), *coef);
                        }
                        _ => return None,
                    }
                }
                _ => return None,
            }
        }
        Some((coeffs, konst))
    }

    fn to_expr(&self) -> SymExpr {
        if self.terms.is_empty() {
            return SymExpr::Int(0);
        }
        let mut parts = Vec::new();
        let mut constant = None;
        let mut lead_coef = None;
        for (mono, coef) in &self.terms {
            if mono.is_empty() {
                constant = Some(*coef);
                continue;
            }
            lead_coef.get_or_insert(*coef);
            let mut factors = Vec::new();
            if *coef != 1 {
                factors.push(SymExpr::Int(*coef));
            }
            for (atom, exp) in mono {
                for _ in 0..*exp {
                    factors.push(atom.clone());
                }
            }
            parts.push(if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                SymExpr::Mul(factors)
            });
        }
        // The constant reads best last (`x0 + 2`), except when every leading
        // sign would be negative: `10 - x0` beats `-x0 + 10`.
        if let Some(k) = constant {
            if k > 0 && lead_coef.is_some_and(|c| c < 0) {
                parts.insert(0, SymExpr::Int(k));
            } else {
                parts.push(SymExpr::Int(k));
            }
        }
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            SymExpr::Add(parts)
        }
    }
}

// Printing. Binary operators get parentheses only when precedence demands,
// and `a + -3*b` renders as `a - 3*b`.

#[derive(PartialEq, PartialOrd)]
enum Prec {
    Or,
    And,
    Not,
    Cmp,
    Add,
    Mul,
    Atom,
}

impl SymExpr {
    fn prec(&self) -> Prec {
        match self {
            SymExpr::Or(_) => Prec::Or,
            SymExpr::And(_) => Prec::And,
            SymExpr::Not(_) => Prec::Not,
            SymExpr::Cmp(..) => Prec::Cmp,
            SymExpr::Add(_) => Prec::Add,
            SymExpr::Mul(_) | SymExpr::Div(..) | SymExpr::Mod(..) => Prec::Mul,
            SymExpr::Int(v) if *v < 0 => Prec::Mul,
            _ => Prec::Atom,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: Prec) -> fmt::Result {
        let needs_paren = self.prec() < min;
        if needs_paren {
            write!(f, "(")?;
        }
        match self {
            SymExpr::Int(v) => write!(f, "{v}")?,
            SymExpr::Bool(b) => write!(f, "{b}")?,
            SymExpr::Var(v) => write!(f, "{v}")?,
            SymExpr::Add(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i == 0 {
                        x.fmt_at(f, Prec::Add)?;
                        continue;
                    }
                    // Render an additive term with a leading negative sign
                    // as subtraction.
                    match x.negated_view() {
                        Some(pos) => {
                            write!(f, " - ")?;
                            pos.fmt_at(f, Prec::Mul)?;
                        }
                        None => {
                            write!(f, " + ")?;
                            x.fmt_at(f, Prec::Mul)?;
                        }
                    }
                }
            }
            SymExpr::Mul(xs) => {
                // A leading negative literal prints as a sign: `-x`, `-3*x`.
                let mut rest = &xs[..];
                if xs.len() >= 2 {
                    if let SymExpr::Int(v) = &xs[0] {
                        if *v < 0 && *v != i128::MIN {
                            write!(f, "-")?;
                            if *v != -1 {
                                write!(f, "{}*", -v)?;
                            }
                            rest = &xs[1..];
                        }
                    }
                }
                for (i, x) in rest.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    x.fmt_at(f, Prec::Atom)?;
                }
            }
            SymExpr::Div(a, b) => {
                a.fmt_at(f, Prec::Mul)?;
                write!(f, " / ")?;
                b.fmt_at(f, Prec::Atom)?;
            }
            SymExpr::Mod(a, b) => {
                a.fmt_at(f, Prec::Mul)?;
                write!(f, " % ")?;
                b.fmt_at(f, Prec::Atom)?;
            }
            SymExpr::Cmp(op, a, b) => {
                a.fmt_at(f, Prec::Add)?;
                write!(f, " {op} ")?;
                b.fmt_at(f, Prec::Add)?;
            }
            SymExpr::Not(a) => {
                write!(f, "!")?;
                a.fmt_at(f, Prec::Atom)?;
            }
            SymExpr::And(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    x.fmt_at(f, Prec::Not)?;
                }
            }
            SymExpr::Or(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    x.fmt_at(f, Prec::And)?;
                }
            }
        }
        if needs_paren {
            write!(f, ")")?;
        }
        Ok(())
    }

    /// If `self` is syntactically negative (`-3` or `-3*x` or `-1*x`),
    /// returns the positive counterpart.
    fn negated_view(&self) -> Option<SymExpr> {
        match self {
            SymExpr::Int(v) if *v < 0 => Some(SymExpr::Int(-v)),
            SymExpr::Mul(xs) => match xs.split_first() {
                Some((SymExpr::Int(c), rest)) if *c < 0 => {
                    let mut factors = Vec::new();
                    if *c != -1 {
                        factors.push(SymExpr::Int(-c));
                    }
                    factors.extend(rest.iter().cloned());
                    Some(match factors.len() {
                        0 => SymExpr::Int(1),
                        1 => factors.pop().unwrap(),
                        _ => SymExpr::Mul(factors),
                    })
                }
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, Prec::Or)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x0() -> SymExpr {
        SymExpr::pre("x")
    }

    #[test]
    fn floor_semantics() {
        assert_eq!(div_floor(7, 2), 3);
        assert_eq!(div_floor(-7, 2), -4);
        assert_eq!(div_floor(7, -2), -4);
        assert_eq!(div_floor(-7, -2), 3);
        assert_eq!(mod_floor(-7, 2), 1);
        assert_eq!(mod_floor(7, -2), -1);
        assert_eq!(div_ceil(7, 2), 4);
        assert_eq!(div_ceil(-7, 2), -3);
        assert_eq!(div_ceil(6, 2), 3);
    }

    #[test]
    fn normalize_folds_and_sorts() {
        // 2*x + 3 + x  ->  3 + 3*x ordered canonically
        let e = SymExpr::add(vec![
            SymExpr::mul(vec![SymExpr::int(2), x0()]),
            SymExpr::int(3),
            x0(),
        ]);
        let n = e.normalize();
        let m = SymExpr::add(vec![x0(), x0(), x0(), SymExpr::int(3)]).normalize();
        assert_eq!(n, m);
    }

    #[test]
    fn normalize_distributes_products() {
        // (x + 1) * (x - 1) == x*x - 1
        let e = SymExpr::mul(vec![
            SymExpr::add(vec![x0(), SymExpr::int(1)]),
            SymExpr::add(vec![x0(), SymExpr::int(-1)]),
        ]);
        let m = SymExpr::add(vec![SymExpr::mul(vec![x0(), x0()]), SymExpr::int(-1)]);
        assert_eq!(e.normalize(), m.normalize());
    }

    #[test]
    fn div_kept_opaque() {
        let e = SymExpr::Div(Box::new(x0()), Box::new(SymExpr::int(2)));
        let doubled = SymExpr::add(vec![e.clone(), e.clone()]);
        let n = doubled.normalize();
        // Stays 2*(x0 / 2), never rewritten to x0.
        assert!(n.has_div_mod());
        let env: BTreeMap<SymVar, i128> = [(SymVar::pre("x"), 5)].into();
        assert_eq!(n.eval_int(&env).unwrap(), 4);
    }

    #[test]
    fn affine_extraction() {
        let e = SymExpr::add(vec![
            SymExpr::mul(vec![SymExpr::int(3), SymExpr::n()]),
            SymExpr::pre("i"),
            SymExpr::int(-5),
        ]);
        let (coeffs, k) = e.as_affine().unwrap();
        assert_eq!(k, -5);
        assert_eq!(coeffs.get(&SymVar::N), Some(&3));
        assert_eq!(coeffs.get(&SymVar::pre("i")), Some(&1));
        let sq = SymExpr::mul(vec![x0(), x0()]);
        assert!(sq.as_affine().is_none());
    }

    #[test]
    fn display_matches_source_style() {
        let cond = SymExpr::cmp(
            CmpOp::Lt,
            SymExpr::add(vec![x0(), SymExpr::int(7)]),
            SymExpr::int(5),
        );
        assert_eq!(cond.to_string(), "x0 + 7 < 5");
        let op = SymExpr::add(vec![x0(), SymExpr::mul(vec![SymExpr::int(-3), SymExpr::n()])]);
        assert_eq!(op.to_string(), "x0 - 3*N");
        let m = SymExpr::Mod(
            Box::new(SymExpr::add(vec![x0(), SymExpr::mul(vec![SymExpr::int(2), SymExpr::n()])])),
            Box::new(SymExpr::int(7)),
        );
        assert_eq!(m.to_string(), "(x0 + 2*N) % 7");
    }

    #[test]
    fn ceil_div_by_one_simplifies() {
        let e = SymExpr::ceil_div(SymExpr::sub(SymExpr::int(10), x0()), 1);
        assert_eq!(e.normalize().to_string(), "10 - x0");
    }

    #[test]
    fn negation_pushes_through_comparisons() {
        let c = SymExpr::cmp(CmpOp::Lt, x0(), SymExpr::int(0));
        let n = SymExpr::Not(Box::new(c)).normalize();
        assert_eq!(n.to_string(), "x0 >= 0");
    }

    fn arb_expr() -> impl Strategy<Value = SymExpr> {
        let leaf = prop_oneof![
            (-20i128..20).prop_map(SymExpr::Int),
            Just(SymExpr::pre("x")),
            Just(SymExpr::pre("y")),
            Just(SymExpr::n()),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 1..4).prop_map(SymExpr::Add),
                prop::collection::vec(inner.clone(), 1..3).prop_map(SymExpr::Mul),
                (inner.clone(), 2i128..9).prop_map(|(a, b)| {
                    SymExpr::Div(Box::new(a), Box::new(SymExpr::Int(b)))
                }),
                (inner, 2i128..9).prop_map(|(a, b)| {
                    SymExpr::Mod(Box::new(a), Box::new(SymExpr::Int(b)))
                }),
            ]
        })
    }

    proptest! {
        // Normalization must never change the value of an expression.
        #[test]
        fn normalize_preserves_eval(e in arb_expr(), x in -50i128..50, y in -50i128..50, n in 0i128..50) {
            let env: BTreeMap<SymVar, i128> =
                [(SymVar::pre("x"), x), (SymVar::pre("y"), y), (SymVar::N, n)].into();
            let before = e.eval_int(&env);
            let after = e.normalize().eval_int(&env);
            match (before, after) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), _) => {} // overflow or div-by-zero stays an error pre-normalization
                (Ok(_), Err(_)) => prop_assert!(false, "normalize introduced an error"),
            }
        }

        #[test]
        fn normalize_is_idempotent(e in arb_expr()) {
            let n1 = e.normalize();
            let n2 = n1.normalize();
            prop_assert_eq!(n1, n2);
        }
    }
}

// Free-function constructors, for call sites that build many expressions.
pub fn int(v: i128) -> SymExpr {
    SymExpr::int(v)
}

pub fn pre(name: &str) -> SymExpr {
    SymExpr::pre(name)
}

pub fn n() -> SymExpr {
    SymExpr::n()
}

pub fn add(terms: Vec<SymExpr>) -> SymExpr {
    SymExpr::add(terms)
}

pub fn mul(factors: Vec<SymExpr>) -> SymExpr {
    SymExpr::mul(factors)
}

pub fn neg(e: SymExpr) -> SymExpr {
    SymExpr::neg(e)
}

pub fn sub(l: SymExpr, r: SymExpr) -> SymExpr {
    SymExpr::sub(l, r)
}

pub fn cmp(op: CmpOp, l: SymExpr, r: SymExpr) -> SymExpr {
    SymExpr::cmp(op, l, r)
}

pub fn and(parts: Vec<SymExpr>) -> SymExpr {
    SymExpr::And(parts)
}

pub fn or(parts: Vec<SymExpr>) -> SymExpr {
    SymExpr::Or(parts)
}

pub fn not(e: SymExpr) -> SymExpr {
    SymExpr::Not(Box::new(e))
}
