//! Parsed proof-script structure. Formulas inside a script are
//! unresolved (every name is a `Var`) until the kernel resolves them
//! against the growing signature.

use crate::syntax::{Binder, Formula};

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Script {
    pub dev_name: Option<String>,
    pub items: Vec<Item>,
}

/// A top-level item: a thesis on the main stroke, a derived-rule
/// registration, or a scope.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Thm(Line),
    Derive(Derive),
    Scope(Scope),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derive {
    pub name: String,
    pub from: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Line {
    pub label: String,
    pub formula: Formula,
    pub just: Just,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScopeKind {
    Quant(Vec<Binder>),
    Hyp(Formula),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scope {
    pub label: String,
    pub kind: ScopeKind,
    pub body: Vec<Node>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Line(Line),
    Scope(Scope),
}

impl Node {
    pub fn label(&self) -> &str {
        match self {
            Node::Line(l) => &l.label,
            Node::Scope(s) => &s.label,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Node::Line(l) => l.span,
            Node::Scope(s) => s.span,
        }
    }
}

/// Justification of a line. A chain starts from a cited formula and
/// applies steps left to right to a running formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Just {
    Chain { seed: String, steps: Vec<Step> },
    EqI(String, String),
    Gen(String),
    Def,
    Use { name: String, refs: Vec<String> },
    Raa(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Sub { binder: String, delta: Formula },
    AssG,
    EqE(String),
    Use { name: String, refs: Vec<String> },
}
