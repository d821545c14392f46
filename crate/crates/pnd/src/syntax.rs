//! Core term language: categories, formulas, alpha-equivalence, free
//! variables, and capture-checked substitution.
//!
//! Whether a name is a variable or a constant is contextual: the parser
//! emits every name as [`Formula::Var`] and the checker resolves names
//! against the enclosing binders and the signature.

use std::collections::{HashMap, HashSet};
use std::fmt;

/// Syntactic category of an expression: `s`, the category of
/// propositions, or a functor category taking one parenthesized argument
/// list. A many-link functor is a functor whose result category is again
/// a functor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Category {
    Base,
    Functor(Box<Category>, Vec<Category>),
}

impl Category {
    pub fn functor(result: Category, args: Vec<Category>) -> Category {
        debug_assert!(!args.is_empty(), "functor categories take at least one argument");
        Category::Functor(Box::new(result), args)
    }

    pub fn is_base(&self) -> bool {
        matches!(self, Category::Base)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Base => write!(f, "s"),
            Category::Functor(result, args) => {
                match result.as_ref() {
                    Category::Base => write!(f, "s")?,
                    r => write!(f, "({r})")?,
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

/// A quantifier binder: a name with an optional category annotation.
/// Unannotated binders get their category from context.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Binder {
    pub name: String,
    pub annotation: Option<Category>,
}

impl Binder {
    pub fn new(name: impl Into<String>) -> Binder {
        Binder { name: name.into(), annotation: None }
    }

    pub fn annotated(name: impl Into<String>, cat: Category) -> Binder {
        Binder { name: name.into(), annotation: Some(cat) }
    }
}

/// Formula AST.
///
/// Invariants kept by the parser and the kernel: `Apply` argument lists
/// and `Quant` binder lists are nonempty, binder names within one
/// `Quant` are pairwise distinct, and an `Apply` head is always a `Var`,
/// `Const`, or another `Apply` (a many-link application).
///
/// `Equiv` is notational sugar for applying the primitive constant
/// `equiv` of category `s/(s,s)`; the resolver rewrites such
/// applications into `Equiv`, so the two spellings are one AST.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Var(String),
    Const(String),
    Apply(Box<Formula>, Vec<Formula>),
    Equiv(Box<Formula>, Box<Formula>),
    Quant(Vec<Binder>, Box<Formula>),
}

impl Formula {
    pub fn var(name: impl Into<String>) -> Formula {
        Formula::Var(name.into())
    }

    pub fn cst(name: impl Into<String>) -> Formula {
        Formula::Const(name.into())
    }

    pub fn apply(head: Formula, args: Vec<Formula>) -> Formula {
        debug_assert!(!args.is_empty(), "argument lists are nonempty");
        Formula::Apply(Box::new(head), args)
    }

    pub fn equiv(left: Formula, right: Formula) -> Formula {
        Formula::Equiv(Box::new(left), Box::new(right))
    }

    pub fn quant(binders: Vec<Binder>, body: Formula) -> Formula {
        debug_assert!(!binders.is_empty(), "quantifier prefixes are nonempty");
        Formula::Quant(binders, Box::new(body))
    }
}

/// Substitution failed: a free variable of the substituted formula would
/// have been bound at a replacement site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptureError {
    /// The variable of delta that would be captured.
    pub var: String,
}

impl fmt::Display for CaptureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "free variable `{}` of the substituted formula would be captured", self.var)
    }
}

/// Structural equality up to consistent renaming of bound variables.
/// Binder annotations are ignored; comparison is on shape and names.
pub fn alpha_eq(a: &Formula, b: &Formula) -> bool {
    fn go(a: &Formula, b: &Formula, env: &mut Vec<(String, String)>) -> bool {
        match (a, b) {
            (Formula::Var(x), Formula::Var(y)) => {
                // The innermost binder pair mentioning either side decides.
                match env.iter().rev().find(|(l, r)| l == x || r == y) {
                    Some((l, r)) => l == x && r == y,
                    None => x == y,
                }
            }
            (Formula::Const(x), Formula::Const(y)) => x == y,
            (Formula::Apply(h1, a1), Formula::Apply(h2, a2)) => {
                a1.len() == a2.len()
                    && go(h1, h2, env)
                    && a1.iter().zip(a2).all(|(x, y)| go(x, y, env))
            }
            (Formula::Equiv(l1, r1), Formula::Equiv(l2, r2)) => {
                go(l1, l2, env) && go(r1, r2, env)
            }
            (Formula::Quant(b1, f1), Formula::Quant(b2, f2)) => {
                if b1.len() != b2.len() {
                    return false;
                }
                for (x, y) in b1.iter().zip(b2) {
                    env.push((x.name.clone(), y.name.clone()));
                }
                let ok = go(f1, f2, env);
                env.truncate(env.len() - b1.len());
                ok
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

/// The set of variable names with at least one free occurrence.
pub fn free_vars(f: &Formula) -> HashSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut HashSet<String>) {
        match f {
            Formula::Var(x) => {
                if !bound.iter().any(|b| b == x) {
                    out.insert(x.clone());
                }
            }
            Formula::Const(_) => {}
            Formula::Apply(h, args) => {
                go(h, bound, out);
                for a in args {
                    go(a, bound, out);
                }
            }
            Formula::Equiv(l, r) => {
                go(l, bound, out);
                go(r, bound, out);
            }
            Formula::Quant(bs, body) => {
                for b in bs {
                    bound.push(b.name.clone());
                }
                go(body, bound, out);
                bound.truncate(bound.len() - bs.len());
            }
        }
    }
    let mut out = HashSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

/// Does `v` occur free in `f`?
pub fn has_free(f: &Formula, v: &str) -> bool {
    match f {
        Formula::Var(x) => x == v,
        Formula::Const(_) => false,
        Formula::Apply(h, args) => has_free(h, v) || args.iter().any(|a| has_free(a, v)),
        Formula::Equiv(l, r) => has_free(l, v) || has_free(r, v),
        Formula::Quant(bs, body) => !bs.iter().any(|b| b.name == v) && has_free(body, v),
    }
}

/// Replace every free occurrence of `v` in `body` by `delta`. Fails with
/// no silent renaming if a free variable of `delta` would become bound
/// at a replacement site.
pub fn substitute(body: &Formula, v: &str, delta: &Formula) -> Result<Formula, CaptureError> {
    let mut map = HashMap::new();
    map.insert(v.to_string(), delta.clone());
    substitute_many(body, &map)
}

/// Simultaneous capture-checked substitution of several variables.
pub fn substitute_many(
    body: &Formula,
    map: &HashMap<String, Formula>,
) -> Result<Formula, CaptureError> {
    // Free variables of each replacement, computed once.
    let frees: HashMap<&str, HashSet<String>> =
        map.iter().map(|(k, f)| (k.as_str(), free_vars(f))).collect();

    fn go(
        f: &Formula,
        map: &HashMap<String, Formula>,
        frees: &HashMap<&str, HashSet<String>>,
        shadowed: &mut Vec<String>,
    ) -> Result<Formula, CaptureError> {
        match f {
            Formula::Var(x) => {
                if shadowed.iter().any(|s| s == x) {
                    Ok(f.clone())
                } else {
                    match map.get(x) {
                        Some(img) => Ok(img.clone()),
                        None => Ok(f.clone()),
                    }
                }
            }
            Formula::Const(_) => Ok(f.clone()),
            Formula::Apply(h, args) => {
                let h2 = go(h, map, frees, shadowed)?;
                let args2 = args
                    .iter()
                    .map(|a| go(a, map, frees, shadowed))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Formula::Apply(Box::new(h2), args2))
            }
            Formula::Equiv(l, r) => Ok(Formula::equiv(
                go(l, map, frees, shadowed)?,
                go(r, map, frees, shadowed)?,
            )),
            Formula::Quant(bs, inner) => {
                // A replacement under this quantifier is a capture if the
                // replaced variable is active and free below, and its image
                // mentions one of these binders free.
                for (k, fv) in frees {
                    let active = !shadowed.iter().any(|s| s == k)
                        && !bs.iter().any(|b| b.name == *k);
                    if active && has_free(inner, k) {
                        if let Some(b) = bs.iter().find(|b| fv.contains(&b.name)) {
                            return Err(CaptureError { var: b.name.clone() });
                        }
                    }
                }
                let n = shadowed.len();
                for b in bs {
                    shadowed.push(b.name.clone());
                }
                let inner2 = go(inner, map, frees, shadowed);
                shadowed.truncate(n);
                Ok(Formula::Quant(bs.clone(), Box::new(inner2?)))
            }
        }
    }

    go(body, map, &frees, &mut Vec::new())
}

/// Canonical text for a formula; `parse_formula` of the output is
/// structurally identical to the input.
pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    fmt_formula(f, false, &mut s);
    s
}

fn fmt_formula(f: &Formula, bare_equiv: bool, out: &mut String) {
    match f {
        Formula::Var(x) | Formula::Const(x) => out.push_str(x),
        Formula::Apply(h, args) => {
            fmt_formula(h, false, out);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                fmt_formula(a, true, out);
            }
            out.push(')');
        }
        Formula::Equiv(l, r) => {
            if !bare_equiv {
                out.push('(');
            }
            fmt_formula(l, false, out);
            out.push_str(" <=> ");
            fmt_formula(r, false, out);
            if !bare_equiv {
                out.push(')');
            }
        }
        Formula::Quant(bs, body) => {
            out.push('[');
            for (i, b) in bs.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(&b.name);
                if let Some(c) = &b.annotation {
                    out.push_str(": ");
                    out.push_str(&c.to_string());
                }
            }
            out.push_str("](");
            fmt_formula(body, true, out);
            out.push(')');
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Formula {
        Formula::var(n)
    }

    fn q(names: &[&str], body: Formula) -> Formula {
        Formula::quant(names.iter().map(Binder::new).collect(), body)
    }

    #[test]
    fn alpha_eq_renaming() {
        let a = q(&["p"], Formula::equiv(v("p"), v("p")));
        let b = q(&["q"], Formula::equiv(v("q"), v("q")));
        assert!(alpha_eq(&a, &b));
    }

    #[test]
    fn alpha_eq_distinct_shapes() {
        let a = Formula::equiv(v("p"), v("q"));
        let b = Formula::equiv(v("q"), v("p"));
        assert!(!alpha_eq(&a, &b));
    }

    #[test]
    fn alpha_eq_reflexive_on_closed_thesis() {
        // [p q]((p <=> q) <=> (q <=> p))
        let t = q(
            &["p", "q"],
            Formula::equiv(
                Formula::equiv(v("p"), v("q")),
                Formula::equiv(v("q"), v("p")),
            ),
        );
        assert!(alpha_eq(&t, &t.clone()));
    }

    #[test]
    fn alpha_eq_respects_shadowing() {
        // [p]([p](p)) vs [q]([p](p)) : inner binders line up, outer unused
        let a = q(&["p"], q(&["p"], v("p")));
        let b = q(&["q"], q(&["p"], v("p")));
        assert!(alpha_eq(&a, &b));
        // [p]([q](p)) vs [q]([q](q)) : outer vs inner reference differ
        let c = q(&["p"], q(&["q"], v("p")));
        let d = q(&["q"], q(&["q"], v("q")));
        assert!(!alpha_eq(&c, &d));
    }

    #[test]
    fn free_vars_examples() {
        let a = q(&["p"], Formula::equiv(v("p"), v("q")));
        assert_eq!(free_vars(&a), HashSet::from(["q".to_string()]));

        let closed = q(
            &["p", "q"],
            Formula::equiv(
                Formula::equiv(v("p"), v("q")),
                Formula::equiv(v("q"), v("p")),
            ),
        );
        assert!(free_vars(&closed).is_empty());

        let app = Formula::apply(v("f"), vec![v("p")]);
        assert_eq!(
            free_vars(&app),
            HashSet::from(["f".to_string(), "p".to_string()])
        );
    }

    #[test]
    fn substitute_simple() {
        // (p <=> p)[p := Vr] = (Vr <=> Vr)
        let body = Formula::equiv(v("p"), v("p"));
        let got = substitute(&body, "p", &Formula::cst("Vr")).unwrap();
        assert_eq!(got, Formula::equiv(Formula::cst("Vr"), Formula::cst("Vr")));
    }

    #[test]
    fn substitute_quantified_delta() {
        // (not(p) <=> (p <=> Fl))[p := [p q](p <=> q)]
        let body = Formula::equiv(
            Formula::apply(Formula::cst("not"), vec![v("p")]),
            Formula::equiv(v("p"), Formula::cst("Fl")),
        );
        let delta = q(&["p", "q"], Formula::equiv(v("p"), v("q")));
        let got = substitute(&body, "p", &delta).unwrap();
        let want = Formula::equiv(
            Formula::apply(Formula::cst("not"), vec![delta.clone()]),
            Formula::equiv(delta, Formula::cst("Fl")),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn substitute_capture_fails() {
        // ([q](p <=> q))[p := q] captures q
        let body = q(&["q"], Formula::equiv(v("p"), v("q")));
        let err = substitute(&body, "p", &v("q")).unwrap_err();
        assert_eq!(err.var, "q");
    }

    #[test]
    fn substitute_no_capture_when_vacuous() {
        // ([q](q <=> q))[p := q] has no free p below the quantifier
        let body = q(&["q"], Formula::equiv(v("q"), v("q")));
        let got = substitute(&body, "p", &v("q")).unwrap();
        assert!(alpha_eq(&got, &body));
    }

    #[test]
    fn print_examples() {
        let t = q(&["p"], Formula::equiv(v("p"), v("p")));
        assert_eq!(print_formula(&t), "[p](p <=> p)");
        assert_eq!(print_formula(&Formula::cst("Fl")), "Fl");
        let chain = Formula::apply(
            Formula::apply(v("K"), vec![v("p")]),
            vec![v("q")],
        );
        assert_eq!(print_formula(&chain), "K(p)(q)");
    }

    #[test]
    fn category_display() {
        assert_eq!(Category::Base.to_string(), "s");
        let conn = Category::functor(Category::Base, vec![Category::Base, Category::Base]);
        assert_eq!(conn.to_string(), "s/(s,s)");
        let k = Category::functor(
            Category::functor(Category::Base, vec![Category::Base]),
            vec![Category::Base],
        );
        assert_eq!(k.to_string(), "(s/(s))/(s)");
    }
}
