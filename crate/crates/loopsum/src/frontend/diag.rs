//! Source diagnostics with stable rejection tags.

use super::ast::Span;
use std::fmt;

/// Machine-readable classification of why a construct was rejected.
/// Constructs outside the integer fragment are refused up front rather than
/// mistranslated; each class gets its own tag so tooling can bucket them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RejectTag {
    /// Arrays, pointers, address-of: anything touching memory shape.
    MemoryOp,
    /// Floating-point literals or type names.
    RealType,
    /// Syntactically valid but outside the fragment (calls, bit ops, ...).
    UnsupportedExpr,
    /// Division or remainder whose divisor is not a nonzero literal.
    DivByVar,
}

impl fmt::Display for RejectTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectTag::MemoryOp => "MEMORY_OP",
            RejectTag::RealType => "REAL_TYPE",
            RejectTag::UnsupportedExpr => "UNSUPPORTED_EXPR",
            RejectTag::DivByVar => "DIV_BY_VAR",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// One message tied to a source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
    pub tag: Option<RejectTag>,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            message: message.into(),
            tag: None,
        }
    }

    pub fn tagged(span: Span, tag: RejectTag, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            span,
            message: message.into(),
            tag: Some(tag),
        }
    }

    pub fn render(&self, file: &str) -> String {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.tag {
            Some(tag) => format!("{file}:{}: {sev}[{tag}]: {}", self.span, self.message),
            None => format!("{file}:{}: {sev}: {}", self.span, self.message),
        }
    }
}

/// Parse failure: one or more diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", self.primary())]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub fn one(d: Diagnostic) -> Self {
        ParseError {
            diagnostics: vec![d],
        }
    }

    fn primary(&self) -> String {
        self.diagnostics
            .first()
            .map(|d| format!("{} (at {})", d.message, d.span))
            .unwrap_or_else(|| "parse error".to_string())
    }

    pub fn tag(&self) -> Option<RejectTag> {
        self.diagnostics.iter().find_map(|d| d.tag)
    }
}
