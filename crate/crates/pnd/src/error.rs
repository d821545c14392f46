//! Checker error taxonomy. Every failing line carries exactly one of
//! these; `class` is the stable machine-readable name used in reports.

use crate::syntax::CaptureError;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DefCode {
    ExistingSymbol,
    RepeatedSymbol,
    UnknownSymbolInDefiniens,
    FreeVarMismatch,
    BadShape,
    NotMainStroke,
}

impl fmt::Display for DefCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DefCode::ExistingSymbol => "existing-symbol",
            DefCode::RepeatedSymbol => "repeated-symbol",
            DefCode::UnknownSymbolInDefiniens => "unknown-symbol-in-definiens",
            DefCode::FreeVarMismatch => "free-var-mismatch",
            DefCode::BadShape => "bad-shape",
            DefCode::NotMainStroke => "not-main-stroke",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckError {
    /// A free name that is neither bound nor in the signature.
    UnknownName { name: String },
    /// A citation of a label that does not exist or did not verify.
    UnknownRef { label: String },
    /// A derived-rule name with no registration.
    UnknownRule { name: String },
    /// Inaccessible citation or a reiteration crossing a quantifier
    /// binding a free variable of the cited formula.
    Scope { msg: String },
    /// Category clash (arity or structure).
    Category { msg: String },
    /// A binder category not determined by any occurrence or annotation.
    AmbiguousCategory { var: String },
    /// Capture-checked substitution failed.
    Capture { var: String },
    /// A rule applied to formulas of the wrong shape, or a justification
    /// whose result is not the stated formula.
    Rule { msg: String },
    /// Definition rule violation.
    Def { code: DefCode, msg: String },
    /// A rule that is present but not enabled by options.
    Disabled { rule: String },
    /// Derived-rule extraction failure.
    Extract { msg: String },
    /// Derived-rule replay disagreement (oracle path only).
    Replay { msg: String },
    /// A finite-model domain larger than the configured cap.
    CapExceeded { size: String },
}

impl CheckError {
    pub fn class(&self) -> &'static str {
        match self {
            CheckError::UnknownName { .. } => "UnknownName",
            CheckError::UnknownRef { .. } => "UnknownRef",
            CheckError::UnknownRule { .. } => "UnknownRule",
            CheckError::Scope { .. } => "ScopeError",
            CheckError::Category { .. } => "CategoryError",
            CheckError::AmbiguousCategory { .. } => "AmbiguousCategory",
            CheckError::Capture { .. } => "CaptureError",
            CheckError::Rule { .. } => "RuleMismatch",
            CheckError::Def { .. } => "DefError",
            CheckError::Disabled { .. } => "RuleDisabled",
            CheckError::Extract { .. } => "ExtractError",
            CheckError::Replay { .. } => "ReplayError",
            CheckError::CapExceeded { .. } => "OracleCapExceeded",
        }
    }

    pub fn rule(msg: impl Into<String>) -> CheckError {
        CheckError::Rule { msg: msg.into() }
    }

    pub fn scope(msg: impl Into<String>) -> CheckError {
        CheckError::Scope { msg: msg.into() }
    }

    pub fn category(msg: impl Into<String>) -> CheckError {
        CheckError::Category { msg: msg.into() }
    }
}

impl From<CaptureError> for CheckError {
    fn from(e: CaptureError) -> CheckError {
        CheckError::Capture { var: e.var }
    }
}

impl fmt::Display for CheckError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckError::UnknownName { name } => {
                write!(f, "name `{name}` is neither bound nor in the signature")
            }
            CheckError::UnknownRef { label } => {
                write!(f, "reference `{label}` does not resolve to a verified item")
            }
            CheckError::UnknownRule { name } => write!(f, "no derived rule named `{name}`"),
            CheckError::Scope { msg }
            | CheckError::Category { msg }
            | CheckError::Rule { msg }
            | CheckError::Extract { msg }
            | CheckError::Replay { msg } => f.write_str(msg),
            CheckError::AmbiguousCategory { var } => {
                write!(f, "category of `{var}` is not determined by context")
            }
            CheckError::Capture { var } => {
                write!(f, "free variable `{var}` of the substituted formula would be captured")
            }
            CheckError::Def { code, msg } => write!(f, "definition rejected ({code}): {msg}"),
            CheckError::Disabled { rule } => write!(f, "rule `{rule}` is not enabled"),
            CheckError::CapExceeded { size } => {
                write!(f, "domain size {size} exceeds the model cap")
            }
        }
    }
}

impl std::error::Error for CheckError {}
