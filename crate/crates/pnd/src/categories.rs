//! The contextual grammar: a growing constant signature, first-order
//! unification over category trees, inference of binder categories from
//! occurrences, and well-formedness checking relative to a context.
//!
//! Categories of quantified variables are never declared up front in a
//! development; they are determined by how the variables are used. The
//! inference here gathers one constraint per occurrence and solves them
//! by unification, with explicit annotations as hard constraints.

use crate::error::CheckError;
use crate::syntax::{Category, Formula};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Name of the primitive biconditional constant.
pub const EQUIV_NAME: &str = "equiv";

/// A category that may still contain inference variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CatTerm {
    Base,
    Fun(Box<CatTerm>, Vec<CatTerm>),
    Hole(u32),
}

impl CatTerm {
    pub fn from_category(c: &Category) -> CatTerm {
        match c {
            Category::Base => CatTerm::Base,
            Category::Functor(r, args) => CatTerm::Fun(
                Box::new(CatTerm::from_category(r)),
                args.iter().map(CatTerm::from_category).collect(),
            ),
        }
    }
}

impl fmt::Display for CatTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CatTerm::Base => write!(f, "s"),
            CatTerm::Hole(n) => write!(f, "?{n}"),
            CatTerm::Fun(r, args) => {
                match r.as_ref() {
                    CatTerm::Base => write!(f, "s")?,
                    other => write!(f, "({other})")?,
                }
                write!(f, "/(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnifyFailure {
    pub msg: String,
}

impl fmt::Display for UnifyFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

/// An idempotent substitution on category holes, extended in place.
#[derive(Clone, Debug, Default)]
pub struct Unifier {
    map: HashMap<u32, CatTerm>,
}

impl Unifier {
    pub fn new() -> Unifier {
        Unifier::default()
    }

    /// Fully apply the substitution to a term.
    pub fn resolve(&self, t: &CatTerm) -> CatTerm {
        match t {
            CatTerm::Base => CatTerm::Base,
            CatTerm::Hole(n) => match self.map.get(n) {
                Some(bound) => self.resolve(bound),
                None => CatTerm::Hole(*n),
            },
            CatTerm::Fun(r, args) => CatTerm::Fun(
                Box::new(self.resolve(r)),
                args.iter().map(|a| self.resolve(a)).collect(),
            ),
        }
    }

    fn occurs(&self, n: u32, t: &CatTerm) -> bool {
        match t {
            CatTerm::Base => false,
            CatTerm::Hole(m) => {
                if n == *m {
                    true
                } else if let Some(bound) = self.map.get(m) {
                    let bound = bound.clone();
                    self.occurs(n, &bound)
                } else {
                    false
                }
            }
            CatTerm::Fun(r, args) => self.occurs(n, r) || args.iter().any(|a| self.occurs(n, a)),
        }
    }

    fn walk(&self, t: &CatTerm) -> CatTerm {
        match t {
            CatTerm::Hole(n) => match self.map.get(n) {
                Some(bound) => {
                    let bound = bound.clone();
                    self.walk(&bound)
                }
                None => t.clone(),
            },
            _ => t.clone(),
        }
    }

    /// Make `a` and `b` equal, extending the substitution; occurs-check
    /// enforced.
    pub fn unify(&mut self, a: &CatTerm, b: &CatTerm) -> Result<(), UnifyFailure> {
        let a = self.walk(a);
        let b = self.walk(b);
        match (&a, &b) {
            (CatTerm::Base, CatTerm::Base) => Ok(()),
            (CatTerm::Hole(n), CatTerm::Hole(m)) if n == m => Ok(()),
            (CatTerm::Hole(n), other) | (other, CatTerm::Hole(n)) => {
                if self.occurs(*n, other) {
                    return Err(UnifyFailure {
                        msg: format!("occurs-check: ?{n} in {other}"),
                    });
                }
                self.map.insert(*n, other.clone());
                Ok(())
            }
            (CatTerm::Fun(r1, a1), CatTerm::Fun(r2, a2)) => {
                if a1.len() != a2.len() {
                    return Err(UnifyFailure {
                        msg: format!(
                            "arity mismatch: {} argument(s) vs {}",
                            a1.len(),
                            a2.len()
                        ),
                    });
                }
                self.unify(r1, r2)?;
                for (x, y) in a1.iter().zip(a2) {
                    self.unify(x, y)?;
                }
                Ok(())
            }
            _ => Err(UnifyFailure {
                msg: format!("category clash: {a} vs {b}"),
            }),
        }
    }

    /// Ground a term, or report which hole is left open.
    pub fn ground(&self, t: &CatTerm) -> Result<Category, u32> {
        match self.resolve(t) {
            CatTerm::Base => Ok(Category::Base),
            CatTerm::Hole(n) => Err(n),
            CatTerm::Fun(r, args) => {
                let r = self.ground(&r)?;
                let args = args.iter().map(|a| self.ground(a)).collect::<Result<_, _>>()?;
                Ok(Category::Functor(Box::new(r), args))
            }
        }
    }
}

/// Most general unifier of two category terms.
pub fn unify(a: &CatTerm, b: &CatTerm) -> Result<Unifier, UnifyFailure> {
    let mut u = Unifier::new();
    u.unify(a, b)?;
    Ok(u)
}

/// Ground categories for a set of variables; total on the set it was
/// inferred for.
pub type CatAssignment = BTreeMap<String, Category>;

/// Record of a defined constant, kept for unfolding and shape checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefRecord {
    /// Definition binders in prefix order, with inferred categories.
    pub binders: Vec<(String, Category)>,
    /// Argument lists of the definiendum, as binder names.
    pub arg_lists: Vec<Vec<String>>,
    pub definiens: Formula,
    /// The whole definition thesis as stated.
    pub thesis: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigEntry {
    pub name: String,
    pub category: Category,
    /// `None` for the primitive biconditional.
    pub def: Option<DefRecord>,
}

/// Insertion-ordered constant signature; a name appears at most once and
/// growth is append-only. Initially contains exactly the primitive
/// biconditional at `s/(s,s)`.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    entries: Vec<SigEntry>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature {
            entries: vec![SigEntry {
                name: EQUIV_NAME.to_string(),
                category: Category::functor(Category::Base, vec![Category::Base, Category::Base]),
                def: None,
            }],
        }
    }

    pub fn get(&self, name: &str) -> Option<&SigEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn push(&mut self, entry: SigEntry) {
        debug_assert!(!self.contains(&entry.name));
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SigEntry> {
        self.entries.iter()
    }
}

/// Incremental category inference. One store can span many formulas (a
/// whole scope); constraints accumulate and clashes surface at the
/// formula that introduced them.
#[derive(Clone, Debug)]
pub struct Inference {
    pub uni: Unifier,
    next: u32,
}

impl Default for Inference {
    fn default() -> Self {
        Inference::new()
    }
}

impl Inference {
    pub fn new() -> Inference {
        Inference { uni: Unifier::new(), next: 0 }
    }

    pub fn fresh(&mut self) -> CatTerm {
        let n = self.next;
        self.next += 1;
        CatTerm::Hole(n)
    }

    pub fn binder_term(&mut self, annotation: &Option<Category>) -> CatTerm {
        match annotation {
            Some(c) => CatTerm::from_category(c),
            None => self.fresh(),
        }
    }

    /// Constrain `f` against the environment, returning its category
    /// term. `env` is a stack; inner entries shadow outer ones.
    /// Categories of binders opened inside `f` are pushed onto
    /// `inner_binders` so callers can check they came out ground.
    pub fn constrain(
        &mut self,
        f: &Formula,
        env: &mut Vec<(String, CatTerm)>,
        sig: &Signature,
        inner_binders: &mut Vec<(String, CatTerm)>,
    ) -> Result<CatTerm, CheckError> {
        match f {
            Formula::Var(x) => match env.iter().rev().find(|(n, _)| n == x) {
                Some((_, t)) => Ok(t.clone()),
                None => Err(CheckError::UnknownName { name: x.clone() }),
            },
            Formula::Const(c) => match sig.get(c) {
                Some(e) => Ok(CatTerm::from_category(&e.category)),
                None => Err(CheckError::UnknownName { name: c.clone() }),
            },
            Formula::Equiv(l, r) => {
                let tl = self.constrain(l, env, sig, inner_binders)?;
                self.expect_base(&tl, l)?;
                let tr = self.constrain(r, env, sig, inner_binders)?;
                self.expect_base(&tr, r)?;
                Ok(CatTerm::Base)
            }
            Formula::Apply(head, args) => {
                let th = self.constrain(head, env, sig, inner_binders)?;
                let targs = args
                    .iter()
                    .map(|a| self.constrain(a, env, sig, inner_binders))
                    .collect::<Result<Vec<_>, _>>()?;
                let result = self.fresh();
                let wanted = CatTerm::Fun(Box::new(result.clone()), targs);
                self.uni.unify(&th, &wanted).map_err(|e| {
                    CheckError::category(format!("in `{f}`: {e}"))
                })?;
                Ok(result)
            }
            Formula::Quant(bs, body) => {
                let n = env.len();
                for b in bs {
                    let t = self.binder_term(&b.annotation);
                    inner_binders.push((b.name.clone(), t.clone()));
                    env.push((b.name.clone(), t));
                }
                let tb = self.constrain(body, env, sig, inner_binders)?;
                self.expect_base(&tb, body)?;
                env.truncate(n);
                Ok(CatTerm::Base)
            }
        }
    }

    fn expect_base(&mut self, t: &CatTerm, at: &Formula) -> Result<(), CheckError> {
        self.uni.unify(t, &CatTerm::Base).map_err(|_| {
            CheckError::category(format!(
                "`{at}` must be a proposition, found category {}",
                self.uni.resolve(t)
            ))
        })
    }
}

/// Infer categories for `binders` such that `body` is a proposition,
/// given a context assigning the enclosing free variables. Annotations
/// are hard constraints; a binder left undetermined is an error.
pub fn infer_binders(
    binders: &[crate::syntax::Binder],
    body: &Formula,
    sig: &Signature,
    ctx: &CatAssignment,
) -> Result<CatAssignment, CheckError> {
    let mut inf = Inference::new();
    let mut env: Vec<(String, CatTerm)> = ctx
        .iter()
        .map(|(n, c)| (n.clone(), CatTerm::from_category(c)))
        .collect();
    let mut binder_terms = Vec::new();
    for b in binders {
        let t = inf.binder_term(&b.annotation);
        binder_terms.push((b.name.clone(), t.clone()));
        env.push((b.name.clone(), t));
    }
    let mut inner = Vec::new();
    let t = inf.constrain(body, &mut env, sig, &mut inner)?;
    inf.uni
        .unify(&t, &CatTerm::Base)
        .map_err(|e| CheckError::category(format!("body is not a proposition: {e}")))?;
    ground_all(&inf, &binder_terms, &inner)
}

pub(crate) fn ground_all(
    inf: &Inference,
    binder_terms: &[(String, CatTerm)],
    inner: &[(String, CatTerm)],
) -> Result<CatAssignment, CheckError> {
    for (name, t) in inner {
        if inf.uni.ground(t).is_err() {
            return Err(CheckError::AmbiguousCategory { var: name.clone() });
        }
    }
    let mut out = CatAssignment::new();
    for (name, t) in binder_terms {
        match inf.uni.ground(t) {
            Ok(c) => {
                out.insert(name.clone(), c);
            }
            Err(_) => return Err(CheckError::AmbiguousCategory { var: name.clone() }),
        }
    }
    Ok(out)
}

/// Category of `f` under `ctx` and `sig`; proof lines must check to
/// `Base`. Quantified subformulas infer their own binders and are
/// themselves propositions.
pub fn check_wff(f: &Formula, sig: &Signature, ctx: &CatAssignment) -> Result<Category, CheckError> {
    let mut inf = Inference::new();
    let mut env: Vec<(String, CatTerm)> = ctx
        .iter()
        .map(|(n, c)| (n.clone(), CatTerm::from_category(c)))
        .collect();
    let mut inner = Vec::new();
    let t = inf.constrain(f, &mut env, sig, &mut inner)?;
    for (name, bt) in &inner {
        if inf.uni.ground(bt).is_err() {
            return Err(CheckError::AmbiguousCategory { var: name.clone() });
        }
    }
    inf.uni
        .ground(&t)
        .map_err(|_| CheckError::category(format!("category of `{f}` not determined")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Binder;

    fn v(n: &str) -> Formula {
        Formula::var(n)
    }

    #[test]
    fn unify_base() {
        let u = unify(&CatTerm::Base, &CatTerm::Base).unwrap();
        assert_eq!(u.resolve(&CatTerm::Base), CatTerm::Base);
    }

    #[test]
    fn unify_hole_against_functor() {
        // X/(s) ~ s/(s) gives X = s
        let lhs = CatTerm::Fun(Box::new(CatTerm::Hole(0)), vec![CatTerm::Base]);
        let rhs = CatTerm::Fun(Box::new(CatTerm::Base), vec![CatTerm::Base]);
        let u = unify(&lhs, &rhs).unwrap();
        assert_eq!(u.resolve(&CatTerm::Hole(0)), CatTerm::Base);
    }

    #[test]
    fn unify_clash() {
        let f = CatTerm::Fun(Box::new(CatTerm::Base), vec![CatTerm::Base]);
        assert!(unify(&CatTerm::Base, &f).is_err());
    }

    #[test]
    fn unify_occurs_check() {
        let f = CatTerm::Fun(Box::new(CatTerm::Base), vec![CatTerm::Hole(0)]);
        assert!(unify(&CatTerm::Hole(0), &f).is_err());
    }

    #[test]
    fn infer_propositional_binders() {
        let sig = Signature::new();
        let body = Formula::equiv(
            Formula::equiv(v("p"), v("q")),
            Formula::equiv(v("q"), v("p")),
        );
        let got = infer_binders(
            &[Binder::new("p"), Binder::new("q")],
            &body,
            &sig,
            &CatAssignment::new(),
        )
        .unwrap();
        assert_eq!(got["p"], Category::Base);
        assert_eq!(got["q"], Category::Base);
    }

    #[test]
    fn infer_unary_connective_binder() {
        let sig = Signature::new();
        let mut ctx = CatAssignment::new();
        ctx.insert("p".into(), Category::Base);
        ctx.insert("q".into(), Category::Base);
        let body = Formula::equiv(
            Formula::apply(v("f"), vec![v("p")]),
            Formula::apply(v("f"), vec![v("q")]),
        );
        let got = infer_binders(&[Binder::new("f")], &body, &sig, &ctx).unwrap();
        assert_eq!(got["f"], Category::functor(Category::Base, vec![Category::Base]));
    }

    #[test]
    fn infer_unused_binder_is_ambiguous() {
        let sig = Signature::new();
        // body [p](p) is a closed proposition; g has no occurrence
        let body = Formula::quant(vec![Binder::new("p")], v("p"));
        let err = infer_binders(&[Binder::new("g")], &body, &sig, &CatAssignment::new())
            .unwrap_err();
        assert!(matches!(err, CheckError::AmbiguousCategory { .. }));
    }

    #[test]
    fn infer_annotation_is_hard_constraint() {
        let sig = Signature::new();
        let err = infer_binders(
            &[Binder::annotated("p", Category::functor(Category::Base, vec![Category::Base]))],
            &Formula::equiv(v("p"), v("p")),
            &sig,
            &CatAssignment::new(),
        )
        .unwrap_err();
        assert!(matches!(err, CheckError::Category { .. }));
    }

    #[test]
    fn check_wff_arity_mismatch() {
        let sig = Signature::new();
        let mut ctx = CatAssignment::new();
        ctx.insert("f".into(), Category::functor(Category::Base, vec![Category::Base]));
        ctx.insert("p".into(), Category::Base);
        ctx.insert("q".into(), Category::Base);
        let bad = Formula::apply(v("f"), vec![v("p"), v("q")]);
        assert!(matches!(
            check_wff(&bad, &sig, &ctx),
            Err(CheckError::Category { .. })
        ));
    }

    #[test]
    fn check_wff_unknown_constant() {
        let sig = Signature::new();
        let bad = Formula::apply(Formula::cst("and"), vec![Formula::cst(EQUIV_NAME)]);
        assert!(matches!(
            check_wff(&bad, &sig, &CatAssignment::new()),
            Err(CheckError::UnknownName { .. })
        ));
    }
}
