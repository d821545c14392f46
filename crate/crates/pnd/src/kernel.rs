//! The trusted checker: name resolution against the growing signature,
//! the primitive rules, scope and citation discipline, and the
//! development walk.
//!
//! A development is a single proof. Its main-stroke lines are its
//! theses, the only persistent, everywhere-citable results; hypothesis
//! and quantifier scopes open and close by indentation, and a closed
//! scope is citable only as a whole (by eqi, gen, raa, or a derived-rule
//! extraction).

use crate::categories::{
    check_wff, infer_binders, CatAssignment, CatTerm, DefRecord, Inference, SigEntry, Signature,
    EQUIV_NAME,
};
use crate::derived::{self, DerivedUse, RuleSchema};
use crate::error::{CheckError, DefCode};
use crate::script::{Item, Just, Line, Node, Scope, ScopeKind, Script, Span, Step};
use crate::syntax::{
    alpha_eq, free_vars, print_formula, substitute, Binder, Category, Formula,
};
use std::collections::{BTreeSet, HashMap, HashSet};

#[derive(Clone, Copy, Debug, Default)]
pub struct CheckOptions {
    /// Enable the reductio meta-rule (`raa`).
    pub allow_raa: bool,
    /// Record intermediate formulas of justification chains.
    pub trace: bool,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Verified,
    Failed(CheckError),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

#[derive(Clone, Debug)]
pub struct LineVerdict {
    pub label: String,
    pub span: Span,
    pub verdict: Verdict,
    pub trace: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Theorem {
    pub label: String,
    pub formula: Formula,
    pub is_def: bool,
}

/// Result of checking one development.
#[derive(Clone, Debug)]
pub struct Report {
    pub dev_name: Option<String>,
    pub verdicts: Vec<LineVerdict>,
    pub theorems: Vec<Theorem>,
    pub signature: Signature,
    pub rules: Vec<RuleSchema>,
    pub uses: Vec<DerivedUse>,
    pub options: CheckOptions,
    pub ok: bool,
}

impl Report {
    pub fn theorem(&self, label: &str) -> Option<&Theorem> {
        self.theorems.iter().find(|t| t.label == label)
    }

    pub fn rule(&self, name: &str) -> Option<&RuleSchema> {
        self.rules.iter().find(|r| r.name == name)
    }

    pub fn verdict(&self, label: &str) -> Option<&LineVerdict> {
        self.verdicts.iter().find(|v| v.label == label)
    }

    pub fn first_error(&self) -> Option<(&str, &CheckError)> {
        self.verdicts.iter().find_map(|v| match &v.verdict {
            Verdict::Failed(e) => Some((v.label.as_str(), e)),
            Verdict::Verified => None,
        })
    }
}

/// Resolve names: bound by an enclosing quantifier means variable,
/// otherwise the name must be in the signature. Applications of the
/// primitive `equiv` constant are rewritten to the `Equiv` node.
pub fn resolve(f: &Formula, sig: &Signature, bound: &mut Vec<String>) -> Result<Formula, CheckError> {
    match f {
        Formula::Var(x) | Formula::Const(x) => {
            if bound.iter().any(|b| b == x) {
                Ok(Formula::Var(x.clone()))
            } else if sig.contains(x) {
                Ok(Formula::Const(x.clone()))
            } else {
                Err(CheckError::UnknownName { name: x.clone() })
            }
        }
        Formula::Apply(h, args) => {
            let h2 = resolve(h, sig, bound)?;
            let args2 = args
                .iter()
                .map(|a| resolve(a, sig, bound))
                .collect::<Result<Vec<_>, _>>()?;
            if let Formula::Const(c) = &h2 {
                if c == EQUIV_NAME && args2.len() == 2 {
                    let mut it = args2.into_iter();
                    let l = it.next().unwrap();
                    let r = it.next().unwrap();
                    return Ok(Formula::equiv(l, r));
                }
            }
            Ok(Formula::Apply(Box::new(h2), args2))
        }
        Formula::Equiv(l, r) => Ok(Formula::equiv(
            resolve(l, sig, bound)?,
            resolve(r, sig, bound)?,
        )),
        Formula::Quant(bs, body) => {
            for b in bs {
                if sig.contains(&b.name) {
                    return Err(CheckError::category(format!(
                        "binder `{}` collides with a constant of the development",
                        b.name
                    )));
                }
            }
            let n = bound.len();
            bound.extend(bs.iter().map(|b| b.name.clone()));
            let body2 = resolve(body, sig, bound);
            bound.truncate(n);
            Ok(Formula::Quant(bs.clone(), Box::new(body2?)))
        }
    }
}

/// Biconditional elimination: from `a <=> b` and a side alpha-equal to
/// one argument, the other argument.
pub fn apply_eqe(bicond: &Formula, side: &Formula) -> Result<Formula, CheckError> {
    match bicond {
        Formula::Equiv(a, b) => {
            if alpha_eq(side, a) {
                Ok(b.as_ref().clone())
            } else if alpha_eq(side, b) {
                Ok(a.as_ref().clone())
            } else {
                Err(CheckError::rule(format!(
                    "`{}` matches neither side of `{}`",
                    print_formula(side),
                    print_formula(bicond)
                )))
            }
        }
        _ => Err(CheckError::rule(format!(
            "`{}` is not a biconditional",
            print_formula(bicond)
        ))),
    }
}

/// Either direction of eqe between a running formula and a cited one.
fn eqe_step(running: &Formula, cited: &Formula) -> Result<Formula, CheckError> {
    match apply_eqe(running, cited) {
        Ok(f) => Ok(f),
        Err(first) => apply_eqe(cited, running).map_err(|_| first),
    }
}

/// Regrouping: `a <=> (b <=> c)` becomes `(a <=> b) <=> c`.
pub fn apply_assg(f: &Formula) -> Result<Formula, CheckError> {
    match f {
        Formula::Equiv(a, rest) => match rest.as_ref() {
            Formula::Equiv(b, c) => Ok(Formula::equiv(
                Formula::equiv(a.as_ref().clone(), b.as_ref().clone()),
                c.as_ref().clone(),
            )),
            _ => Err(CheckError::rule(format!(
                "right side of `{}` is not a biconditional",
                print_formula(f)
            ))),
        },
        _ => Err(CheckError::rule(format!(
            "`{}` is not a biconditional",
            print_formula(f)
        ))),
    }
}

/// Instantiate one binder of a quantified formula. The substituted
/// formula must be a wff of the binder's category; capture fails; the
/// quantifier node disappears when its prefix empties.
pub fn apply_sub(
    quantified: &Formula,
    v: &str,
    delta: &Formula,
    sig: &Signature,
    ctx: &CatAssignment,
) -> Result<Formula, CheckError> {
    let (binders, body) = match quantified {
        Formula::Quant(bs, body) => (bs, body),
        _ => {
            return Err(CheckError::rule(format!(
                "`{}` is not quantified; nothing to instantiate",
                print_formula(quantified)
            )))
        }
    };
    if !binders.iter().any(|b| b.name == v) {
        return Err(CheckError::rule(format!(
            "`{v}` is not bound by the main quantifier of `{}`",
            print_formula(quantified)
        )));
    }
    let cats = infer_binders(binders, body, sig, ctx)?;
    let dcat = check_wff(delta, sig, ctx)?;
    if dcat != cats[v] {
        return Err(CheckError::category(format!(
            "`{}` has category {} but `{}` requires category {}",
            print_formula(delta),
            dcat,
            v,
            cats[v]
        )));
    }
    let rest: Vec<Binder> = binders.iter().filter(|b| b.name != v).cloned().collect();
    let target = if rest.is_empty() {
        body.as_ref().clone()
    } else {
        Formula::Quant(rest, body.clone())
    };
    Ok(substitute(&target, v, delta)?)
}

/// Conclusion of biconditional introduction from two subproofs
/// `h1 |- c1` and `h2 |- c2`: requires the cross-match and yields
/// `h1 <=> c1`.
pub fn eqi_conclusion(
    h1: &Formula,
    c1: &Formula,
    h2: &Formula,
    c2: &Formula,
) -> Result<Formula, CheckError> {
    if alpha_eq(c1, h2) && alpha_eq(c2, h1) {
        Ok(Formula::equiv(h1.clone(), c1.clone()))
    } else {
        Err(CheckError::rule(
            "the two subproofs do not cross-match (need h1 |- c1 and c1 |- h1)".to_string(),
        ))
    }
}

/// Definition checking. On success returns the resolved thesis, the new
/// signature entry, and the names the thesis uses.
pub fn check_def(
    stated: &Formula,
    sig: &Signature,
    used_names: &HashSet<String>,
) -> Result<(Formula, SigEntry), CheckError> {
    let def_err = |code: DefCode, msg: String| CheckError::Def { code, msg };

    let (binders, lhs, rhs) = match stated {
        Formula::Quant(bs, body) => match body.as_ref() {
            Formula::Equiv(l, r) => (bs.clone(), l.as_ref().clone(), r.as_ref().clone()),
            _ => {
                return Err(def_err(
                    DefCode::BadShape,
                    "a definition is a (quantified) biconditional".into(),
                ))
            }
        },
        Formula::Equiv(l, r) => (Vec::new(), l.as_ref().clone(), r.as_ref().clone()),
        _ => {
            return Err(def_err(
                DefCode::BadShape,
                "a definition is a (quantified) biconditional".into(),
            ))
        }
    };
    let binder_names: Vec<String> = binders.iter().map(|b| b.name.clone()).collect();

    // Decompose the definiendum: one new head constant applied to
    // argument lists of pairwise distinct binder variables.
    let mut lists_rev: Vec<Vec<String>> = Vec::new();
    let mut head = &lhs;
    loop {
        match head {
            Formula::Apply(h, args) => {
                let mut list = Vec::new();
                for a in args {
                    match a {
                        Formula::Var(x) | Formula::Const(x) => list.push(x.clone()),
                        _ => {
                            return Err(def_err(
                                DefCode::BadShape,
                                "definiendum arguments must be plain variables".into(),
                            ))
                        }
                    }
                }
                lists_rev.push(list);
                head = h;
            }
            Formula::Var(x) | Formula::Const(x) => {
                let name = x.clone();
                if binder_names.contains(&name) {
                    return Err(def_err(
                        DefCode::BadShape,
                        "the definiendum head must be a constant, not a bound variable".into(),
                    ));
                }
                if sig.contains(&name) || used_names.contains(&name) {
                    return Err(def_err(
                        DefCode::ExistingSymbol,
                        format!("`{name}` is already used in the development"),
                    ));
                }
                let arg_lists: Vec<Vec<String>> = lists_rev.into_iter().rev().collect();

                // Each binder exactly once, nothing else.
                let mut seen = HashSet::new();
                for v in arg_lists.iter().flatten() {
                    if !seen.insert(v.clone()) {
                        return Err(def_err(
                            DefCode::RepeatedSymbol,
                            format!("`{v}` occurs twice in the definiendum"),
                        ));
                    }
                    if !binder_names.contains(v) {
                        return Err(def_err(
                            DefCode::FreeVarMismatch,
                            format!("`{v}` is free in the definiendum but not quantified"),
                        ));
                    }
                }
                for b in &binder_names {
                    if !seen.contains(b) {
                        return Err(def_err(
                            DefCode::FreeVarMismatch,
                            format!("binder `{b}` does not occur in the definiendum"),
                        ));
                    }
                }

                // The definiens uses only prior symbols and the binders.
                let mut bound = binder_names.clone();
                let rhs_resolved = resolve(&rhs, sig, &mut bound).map_err(|e| match e {
                    CheckError::UnknownName { name } => def_err(
                        DefCode::UnknownSymbolInDefiniens,
                        format!("`{name}` is not available at this point of the development"),
                    ),
                    other => other,
                })?;
                let rhs_free = free_vars(&rhs_resolved);
                let binder_set: HashSet<String> = binder_names.iter().cloned().collect();
                if rhs_free != binder_set {
                    return Err(def_err(
                        DefCode::FreeVarMismatch,
                        "the definiendum and the definiens must have the same free variables"
                            .into(),
                    ));
                }

                let cats = infer_binders(&binders, &rhs_resolved, sig, &CatAssignment::new())?;

                // Category of the new constant from the binder categories.
                let mut cat = Category::Base;
                for list in arg_lists.iter().rev() {
                    let args = list.iter().map(|v| cats[v].clone()).collect();
                    cat = Category::Functor(Box::new(cat), args);
                }

                // Rebuild the resolved thesis with the new constant.
                let mut dum = Formula::Const(name.clone());
                for list in &arg_lists {
                    dum = Formula::Apply(
                        Box::new(dum),
                        list.iter().map(|v| Formula::Var(v.clone())).collect(),
                    );
                }
                let matrix = Formula::equiv(dum, rhs_resolved.clone());
                let thesis = if binders.is_empty() {
                    matrix
                } else {
                    Formula::Quant(binders.clone(), Box::new(matrix))
                };
                let record = DefRecord {
                    binders: binder_names
                        .iter()
                        .map(|b| (b.clone(), cats[b].clone()))
                        .collect(),
                    arg_lists,
                    definiens: rhs_resolved,
                    thesis: thesis.clone(),
                };
                let entry = SigEntry { name, category: cat, def: Some(record) };
                return Ok((thesis, entry));
            }
            _ => {
                return Err(def_err(
                    DefCode::BadShape,
                    "the definiendum must be a constant applied to argument lists".into(),
                ))
            }
        }
    }
}

/// Canonical falsum and negation constants, when the development has
/// defined them: falsum as `[p](p)`, negation as `[p](N(p) <=> (p <=> falsum))`.
pub fn canonical_neg_shapes(sig: &Signature) -> Option<(String, String)> {
    let falsum_pat = Formula::quant(vec![Binder::new("p")], Formula::var("p"));
    let falsum = sig.iter().find(|e| {
        e.def.as_ref().is_some_and(|d| {
            d.binders.is_empty() && d.arg_lists.is_empty() && alpha_eq(&d.definiens, &falsum_pat)
        })
    })?;
    let neg = sig.iter().find(|e| {
        e.def.as_ref().is_some_and(|d| {
            d.binders.len() == 1
                && d.arg_lists.len() == 1
                && d.arg_lists[0].len() == 1
                && d.arg_lists[0][0] == d.binders[0].0
                && d.definiens
                    == Formula::equiv(
                        Formula::Var(d.binders[0].0.clone()),
                        Formula::Const(falsum.name.clone()),
                    )
        })
    })?;
    Some((falsum.name.clone(), neg.name.clone()))
}

// ---------------------------------------------------------------------
// Development walk

enum EntryState {
    Line { label: String, formula: Option<Formula> },
    Closed(ClosedScope),
}

#[derive(Clone, Debug)]
pub(crate) struct ClosedScope {
    pub label: String,
    pub hyp: Option<Formula>,
    pub binders: Option<Vec<(String, Category)>>,
    /// Final item of the scope body, when it is a verified line.
    pub conclusion: Option<(String, Formula)>,
    /// Whether the final body item was a line at all.
    pub ends_in_line: bool,
    pub all_ok: bool,
}

struct LevelState {
    quant: Option<Vec<(String, Category)>>,
    hyp: Option<(String, Formula)>,
    entries: Vec<EntryState>,
}

struct Precheck {
    resolved: HashMap<String, Formula>,
    failures: Vec<(String, CheckError)>,
    scope_cats: HashMap<String, Vec<(String, Category)>>,
}

impl Precheck {
    fn failure_of(&self, label: &str) -> Option<&CheckError> {
        self.failures.iter().find(|(l, _)| l == label).map(|(_, e)| e)
    }
}

pub struct Checker<'s> {
    script: &'s Script,
    opts: CheckOptions,
    sig: Signature,
    theorems: Vec<Theorem>,
    rules: Vec<RuleSchema>,
    uses: Vec<DerivedUse>,
    verdicts: Vec<LineVerdict>,
    used_names: HashSet<String>,
    all_labels: HashSet<String>,
    failed_labels: HashSet<String>,
    /// Label of each top-level item's scope, in order, for extraction.
    scope_cats: HashMap<String, Vec<(String, Category)>>,
}

/// Check a whole script. Checking is a pure function of the script and
/// options; one bad line fails that line (and lines citing it) without
/// stopping the walk.
pub fn check_development(script: &Script, opts: CheckOptions) -> Report {
    let mut labels = HashSet::new();
    collect_labels(script, &mut labels);
    let mut checker = Checker {
        script,
        opts,
        sig: Signature::new(),
        theorems: Vec::new(),
        rules: Vec::new(),
        uses: Vec::new(),
        verdicts: Vec::new(),
        used_names: HashSet::new(),
        all_labels: labels,
        failed_labels: HashSet::new(),
        scope_cats: HashMap::new(),
    };
    checker.run();
    let ok = checker.verdicts.iter().all(|v| v.verdict.is_ok());
    Report {
        dev_name: script.dev_name.clone(),
        verdicts: checker.verdicts,
        theorems: checker.theorems,
        signature: checker.sig,
        rules: checker.rules,
        uses: checker.uses,
        options: opts,
        ok,
    }
}

fn collect_labels(script: &Script, out: &mut HashSet<String>) {
    fn node(n: &Node, out: &mut HashSet<String>) {
        out.insert(n.label().to_string());
        if let Node::Scope(s) = n {
            for c in &s.body {
                node(c, out);
            }
        }
    }
    for item in &script.items {
        match item {
            Item::Thm(l) => {
                out.insert(l.label.clone());
            }
            Item::Derive(_) => {}
            Item::Scope(s) => {
                out.insert(s.label.clone());
                for c in &s.body {
                    node(c, out);
                }
            }
        }
    }
}

impl<'s> Checker<'s> {
    fn run(&mut self) {
        let mut root = LevelState { quant: None, hyp: None, entries: Vec::new() };
        for (index, item) in self.script.items.iter().enumerate() {
            match item {
                Item::Thm(line) => self.check_thm(line, &mut root),
                Item::Derive(d) => self.check_derive(d, index),
                Item::Scope(scope) => {
                    let pre = self.precheck_scope(scope);
                    self.scope_cats.extend(pre.scope_cats.clone());
                    let mut levels = vec![std::mem::replace(
                        &mut root,
                        LevelState { quant: None, hyp: None, entries: Vec::new() },
                    )];
                    let closed = self.walk_scope(scope, &mut levels, &pre);
                    root = levels.pop().expect("root level");
                    root.entries.push(EntryState::Closed(closed));
                }
            }
        }
    }

    fn record(&mut self, label: &str, span: Span, result: Result<Vec<String>, CheckError>) -> bool {
        match result {
            Ok(trace) => {
                self.verdicts.push(LineVerdict {
                    label: label.to_string(),
                    span,
                    verdict: Verdict::Verified,
                    trace,
                });
                true
            }
            Err(e) => {
                self.failed_labels.insert(label.to_string());
                self.verdicts.push(LineVerdict {
                    label: label.to_string(),
                    span,
                    verdict: Verdict::Failed(e),
                    trace: Vec::new(),
                });
                false
            }
        }
    }

    fn note_names(&mut self, f: &Formula) {
        fn go(f: &Formula, out: &mut HashSet<String>) {
            match f {
                Formula::Var(x) | Formula::Const(x) => {
                    out.insert(x.clone());
                }
                Formula::Apply(h, args) => {
                    go(h, out);
                    for a in args {
                        go(a, out);
                    }
                }
                Formula::Equiv(l, r) => {
                    go(l, out);
                    go(r, out);
                }
                Formula::Quant(bs, body) => {
                    for b in bs {
                        out.insert(b.name.clone());
                    }
                    go(body, out);
                }
            }
        }
        go(f, &mut self.used_names);
    }

    // ----- depth 0 items

    fn check_thm(&mut self, line: &Line, root: &mut LevelState) {
        let result = self.eval_thm(line, root);
        let ok = self.record(&line.label, line.span, result.clone().map(|(_, t)| t));
        if ok {
            let (formula, _) = result.unwrap();
            self.note_names(&formula);
            self.theorems.push(Theorem {
                label: line.label.clone(),
                formula,
                is_def: matches!(line.just, Just::Def),
            });
        }
        root.entries.push(EntryState::Line {
            label: line.label.clone(),
            formula: self.theorems.last().filter(|t| t.label == line.label).map(|t| t.formula.clone()),
        });
    }

    fn eval_thm(
        &mut self,
        line: &Line,
        root: &mut LevelState,
    ) -> Result<(Formula, Vec<String>), CheckError> {
        if matches!(line.just, Just::Def) {
            let (thesis, entry) = check_def(&line.formula, &self.sig, &self.used_names)?;
            self.sig.push(entry);
            return Ok((thesis, Vec::new()));
        }
        let stated = resolve(&line.formula, &self.sig, &mut Vec::new())?;
        let cat = check_wff(&stated, &self.sig, &CatAssignment::new())?;
        if !cat.is_base() {
            return Err(CheckError::category(format!(
                "a thesis must be a proposition, found category {cat}"
            )));
        }
        // Closedness is implied: resolution at depth 0 leaves no free
        // variables, but keep the check explicit.
        if !free_vars(&stated).is_empty() {
            return Err(CheckError::rule("a thesis must be closed".to_string()));
        }
        let mut levels = vec![std::mem::replace(
            root,
            LevelState { quant: None, hyp: None, entries: Vec::new() },
        )];
        let out = self.eval_just(&line.just, &stated, &line.label, &mut levels, &CatAssignment::new());
        *root = levels.pop().expect("root level");
        let trace = out?;
        Ok((stated, trace))
    }

    fn check_derive(&mut self, d: &crate::script::Derive, item_index: usize) {
        let result = self.extract(d, item_index);
        match result {
            Ok(schema) => {
                self.verdicts.push(LineVerdict {
                    label: format!("derive {}", d.name),
                    span: d.span,
                    verdict: Verdict::Verified,
                    trace: Vec::new(),
                });
                self.rules.push(schema);
            }
            Err(e) => {
                self.verdicts.push(LineVerdict {
                    label: format!("derive {}", d.name),
                    span: d.span,
                    verdict: Verdict::Failed(e),
                    trace: Vec::new(),
                });
            }
        }
    }

    fn extract(
        &mut self,
        d: &crate::script::Derive,
        item_index: usize,
    ) -> Result<RuleSchema, CheckError> {
        if self.rules.iter().any(|r| r.name == d.name) {
            return Err(CheckError::Extract {
                msg: format!("rule `{}` is already registered", d.name),
            });
        }
        derived::extract_rule(
            self.script,
            item_index,
            d,
            &self.sig,
            &self.scope_cats,
            &self.failed_labels,
            &self.theorems,
        )
    }

    // ----- scope prechecking (category inference over the whole tree)

    fn precheck_scope(&mut self, scope: &Scope) -> Precheck {
        let mut pre = Precheck {
            resolved: HashMap::new(),
            failures: Vec::new(),
            scope_cats: HashMap::new(),
        };
        let mut inf = Inference::new();
        // (scope label, binder name, term) for grounding checks.
        let mut scope_binders: Vec<(String, String, CatTerm)> = Vec::new();
        // (line label, binder name, term) from quantifiers inside formulas.
        let mut inner_binders: Vec<(String, String, CatTerm)> = Vec::new();
        let mut env: Vec<(String, CatTerm)> = Vec::new();
        self.precheck_node(
            scope,
            &mut pre,
            &mut inf,
            &mut env,
            &mut scope_binders,
            &mut inner_binders,
        );
        // Ground scope binders.
        for (scope_label, name, term) in &scope_binders {
            if pre.failure_of(scope_label).is_some() {
                continue;
            }
            match inf.uni.ground(term) {
                Ok(cat) => pre
                    .scope_cats
                    .entry(scope_label.clone())
                    .or_default()
                    .push((name.clone(), cat)),
                Err(_) => pre
                    .failures
                    .push((scope_label.clone(), CheckError::AmbiguousCategory { var: name.clone() })),
            }
        }
        // Ground quantifier binders that occur inside line formulas.
        for (line_label, name, term) in &inner_binders {
            if pre.failure_of(line_label).is_some() {
                continue;
            }
            if inf.uni.ground(term).is_err() {
                pre.failures
                    .push((line_label.clone(), CheckError::AmbiguousCategory { var: name.clone() }));
            }
        }
        pre
    }

    fn precheck_node(
        &mut self,
        scope: &Scope,
        pre: &mut Precheck,
        inf: &mut Inference,
        env: &mut Vec<(String, CatTerm)>,
        scope_binders: &mut Vec<(String, String, CatTerm)>,
        inner_binders: &mut Vec<(String, String, CatTerm)>,
    ) {
        let depth = env.len();
        match &scope.kind {
            ScopeKind::Quant(bs) => {
                let mut failed = false;
                for b in bs {
                    if self.sig.contains(&b.name) {
                        pre.failures.push((
                            scope.label.clone(),
                            CheckError::category(format!(
                                "binder `{}` collides with a constant of the development",
                                b.name
                            )),
                        ));
                        failed = true;
                        break;
                    }
                }
                for b in bs {
                    let t = inf.binder_term(&b.annotation);
                    if !failed {
                        scope_binders.push((scope.label.clone(), b.name.clone(), t.clone()));
                    }
                    env.push((b.name.clone(), t));
                    self.used_names.insert(b.name.clone());
                }
            }
            ScopeKind::Hyp(h) => {
                match self.constrain_line(&scope.label, h, pre, inf, env, inner_binders) {
                    Ok(f) => {
                        pre.resolved.insert(scope.label.clone(), f);
                    }
                    Err(e) => pre.failures.push((scope.label.clone(), e)),
                }
            }
        }
        for node in &scope.body {
            match node {
                Node::Line(l) => {
                    match self.constrain_line(&l.label, &l.formula, pre, inf, env, inner_binders) {
                        Ok(f) => {
                            pre.resolved.insert(l.label.clone(), f);
                        }
                        Err(e) => pre.failures.push((l.label.clone(), e)),
                    }
                }
                Node::Scope(s) => {
                    self.precheck_node(s, pre, inf, env, scope_binders, inner_binders)
                }
            }
        }
        env.truncate(depth);
    }

    fn constrain_line(
        &mut self,
        label: &str,
        raw: &Formula,
        _pre: &mut Precheck,
        inf: &mut Inference,
        env: &mut Vec<(String, CatTerm)>,
        inner_binders: &mut Vec<(String, String, CatTerm)>,
    ) -> Result<Formula, CheckError> {
        let mut bound: Vec<String> = env.iter().map(|(n, _)| n.clone()).collect();
        let resolved = resolve(raw, &self.sig, &mut bound)?;
        // Constraints from a clashing line roll back entirely.
        let saved = inf.clone();
        let mut fresh_inner = Vec::new();
        let out = (|| {
            let t = inf.constrain(&resolved, env, &self.sig, &mut fresh_inner)?;
            inf.uni.unify(&t, &CatTerm::Base).map_err(|_| {
                CheckError::category(format!(
                    "`{}` must be a proposition",
                    print_formula(&resolved)
                ))
            })
        })();
        match out {
            Ok(()) => {
                for (name, term) in fresh_inner {
                    inner_binders.push((label.to_string(), name, term));
                }
                self.note_names(&resolved);
                Ok(resolved)
            }
            Err(e) => {
                *inf = saved;
                Err(e)
            }
        }
    }

    // ----- scope walking

    fn walk_scope(
        &mut self,
        scope: &Scope,
        levels: &mut Vec<LevelState>,
        pre: &Precheck,
    ) -> ClosedScope {
        let opener_failure = pre.failure_of(&scope.label).cloned();
        let (quant, hyp) = match &scope.kind {
            ScopeKind::Quant(bs) => {
                let cats = pre.scope_cats.get(&scope.label).cloned().unwrap_or_else(|| {
                    bs.iter()
                        .map(|b| (b.name.clone(), b.annotation.clone().unwrap_or(Category::Base)))
                        .collect()
                });
                (Some(cats), None)
            }
            ScopeKind::Hyp(_) => {
                let hyp_formula = pre.resolved.get(&scope.label).cloned();
                (None, hyp_formula.map(|f| (scope.label.clone(), f)))
            }
        };
        self.record(
            &scope.label,
            scope.span,
            match opener_failure {
                Some(e) => Err(e),
                None => Ok(Vec::new()),
            },
        );

        levels.push(LevelState { quant: quant.clone(), hyp: hyp.clone(), entries: Vec::new() });
        for node in &scope.body {
            match node {
                Node::Line(l) => self.check_line(l, levels, pre),
                Node::Scope(s) => {
                    let closed = self.walk_scope(s, levels, pre);
                    levels
                        .last_mut()
                        .expect("open level")
                        .entries
                        .push(EntryState::Closed(closed));
                }
            }
        }
        let level = levels.pop().expect("open level");
        let (ends_in_line, conclusion) = match level.entries.last() {
            Some(EntryState::Line { label, formula }) => (
                true,
                formula.as_ref().map(|f| (label.clone(), f.clone())),
            ),
            _ => (false, None),
        };
        let all_ok = !self.subtree_failed(scope);
        ClosedScope {
            label: scope.label.clone(),
            hyp: hyp.map(|(_, f)| f),
            binders: quant,
            conclusion,
            ends_in_line,
            all_ok,
        }
    }

    fn subtree_failed(&self, scope: &Scope) -> bool {
        fn labels(scope: &Scope, out: &mut Vec<String>) {
            out.push(scope.label.clone());
            for n in &scope.body {
                match n {
                    Node::Line(l) => out.push(l.label.clone()),
                    Node::Scope(s) => labels(s, out),
                }
            }
        }
        let mut ls = Vec::new();
        labels(scope, &mut ls);
        ls.iter().any(|l| self.failed_labels.contains(l))
    }

    fn check_line(&mut self, line: &Line, levels: &mut Vec<LevelState>, pre: &Precheck) {
        let result = (|| -> Result<(Formula, Vec<String>), CheckError> {
            if let Some(e) = pre.failure_of(&line.label) {
                return Err(e.clone());
            }
            if matches!(line.just, Just::Def) {
                return Err(CheckError::Def {
                    code: DefCode::NotMainStroke,
                    msg: "definitions are stated on the main stroke only".into(),
                });
            }
            let stated = pre
                .resolved
                .get(&line.label)
                .cloned()
                .expect("prechecked line formula");
            let ctx = context_of(levels);
            let trace = self.eval_just(&line.just, &stated, &line.label, levels, &ctx)?;
            Ok((stated, trace))
        })();
        let entry_formula = result.as_ref().ok().map(|(f, _)| f.clone());
        self.record(&line.label, line.span, result.map(|(_, t)| t));
        levels
            .last_mut()
            .expect("open level")
            .entries
            .push(EntryState::Line { label: line.label.clone(), formula: entry_formula });
    }

    // ----- justification evaluation

    fn eval_just(
        &mut self,
        just: &Just,
        stated: &Formula,
        at: &str,
        levels: &mut Vec<LevelState>,
        ctx: &CatAssignment,
    ) -> Result<Vec<String>, CheckError> {
        let mut trace = Vec::new();
        match just {
            Just::Def => unreachable!("definitions handled by the caller"),
            Just::Chain { seed, steps } => {
                let mut running = self.lookup_formula(levels, seed)?;
                if self.opts.trace {
                    trace.push(format!("{seed}: {}", print_formula(&running)));
                }
                let last = steps.len().saturating_sub(1);
                for (i, step) in steps.iter().enumerate() {
                    running = match step {
                        Step::Sub { binder, delta } => {
                            let mut bound: Vec<String> = ctx.keys().cloned().collect();
                            let delta = resolve(delta, &self.sig, &mut bound)?;
                            apply_sub(&running, binder, &delta, &self.sig, ctx)?
                        }
                        Step::AssG => apply_assg(&running)?,
                        Step::EqE(r) => {
                            let cited = self.lookup_formula(levels, r)?;
                            eqe_step(&running, &cited)?
                        }
                        Step::Use { name, refs } => {
                            let mut premises = vec![running.clone()];
                            for r in refs {
                                premises.push(self.lookup_formula(levels, r)?);
                            }
                            let conclusion = if i == last { Some(stated) } else { None };
                            self.apply_derived(name, premises, conclusion, at, ctx)?
                        }
                    };
                    if self.opts.trace {
                        trace.push(print_formula(&running));
                    }
                    debug_assert!(
                        check_wff(&running, &self.sig, ctx).map(|c| c.is_base()).unwrap_or(false),
                        "chain intermediate is not a proposition"
                    );
                }
                if alpha_eq(&running, stated) {
                    Ok(trace)
                } else {
                    Err(CheckError::rule(format!(
                        "justification yields `{}`, not the stated `{}`",
                        print_formula(&running),
                        print_formula(stated)
                    )))
                }
            }
            Just::EqI(r1, r2) => {
                let s1 = self.lookup_closed_hyp(levels, r1)?;
                let s2 = self.lookup_closed_hyp(levels, r2)?;
                let (h1, c1) = s1;
                let (h2, c2) = s2;
                let direct = eqi_conclusion(&h1, &c1, &h2, &c2);
                let fits = |f: &Result<Formula, CheckError>| {
                    f.as_ref().map(|g| alpha_eq(g, stated)).unwrap_or(false)
                };
                if fits(&direct) {
                    return Ok(trace);
                }
                let swapped = eqi_conclusion(&h2, &c2, &h1, &c1);
                if fits(&swapped) {
                    return Ok(trace);
                }
                match direct.or(swapped) {
                    Ok(got) => Err(CheckError::rule(format!(
                        "eqi yields `{}`, not the stated `{}`",
                        print_formula(&got),
                        print_formula(stated)
                    ))),
                    Err(e) => Err(e),
                }
            }
            Just::Gen(r) => {
                for level in levels.iter() {
                    if level.hyp.is_some() {
                        return Err(CheckError::rule(
                            "generalization is not available inside a hypothesis".to_string(),
                        ));
                    }
                }
                let closed = self.lookup_closed(levels, r)?;
                let binders = closed.binders.clone().ok_or_else(|| {
                    CheckError::rule(format!("`{r}` is not a quantifier scope"))
                })?;
                if !closed.ends_in_line {
                    return Err(CheckError::rule(format!(
                        "scope `{r}` does not end in a scope-level line"
                    )));
                }
                let (_, conclusion) = closed
                    .conclusion
                    .clone()
                    .ok_or(CheckError::UnknownRef { label: r.clone() })?;
                let result = Formula::Quant(
                    binders.iter().map(|(n, _)| Binder::new(n.clone())).collect(),
                    Box::new(conclusion),
                );
                if alpha_eq(&result, stated) {
                    Ok(trace)
                } else {
                    Err(CheckError::rule(format!(
                        "gen yields `{}`, not the stated `{}`",
                        print_formula(&result),
                        print_formula(stated)
                    )))
                }
            }
            Just::Use { name, refs } => {
                let mut premises = Vec::new();
                for r in refs {
                    premises.push(self.lookup_formula(levels, r)?);
                }
                let got = self.apply_derived(name, premises, Some(stated), at, ctx)?;
                debug_assert!(alpha_eq(&got, stated));
                Ok(trace)
            }
            Just::Raa(r) => {
                if !self.opts.allow_raa {
                    return Err(CheckError::Disabled { rule: "raa".to_string() });
                }
                let (falsum, neg) = canonical_neg_shapes(&self.sig).ok_or_else(|| {
                    CheckError::rule(
                        "raa needs the canonical falsum and negation definitions".to_string(),
                    )
                })?;
                let (hyp, conclusion) = self.lookup_closed_hyp(levels, r)?;
                if !alpha_eq(&conclusion, &Formula::Const(falsum)) {
                    return Err(CheckError::rule(format!(
                        "subproof `{r}` does not end in the falsum constant"
                    )));
                }
                let result = Formula::apply(Formula::Const(neg), vec![hyp]);
                if alpha_eq(&result, stated) {
                    Ok(trace)
                } else {
                    Err(CheckError::rule(format!(
                        "raa yields `{}`, not the stated `{}`",
                        print_formula(&result),
                        print_formula(stated)
                    )))
                }
            }
        }
    }

    fn apply_derived(
        &mut self,
        name: &str,
        premises: Vec<Formula>,
        conclusion: Option<&Formula>,
        at: &str,
        ctx: &CatAssignment,
    ) -> Result<Formula, CheckError> {
        let schema = self
            .rules
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| CheckError::UnknownRule { name: name.to_string() })?
            .clone();
        let (sigma, concl) =
            derived::match_schema(&schema, &premises, conclusion, &self.sig, ctx)?;
        self.uses.push(DerivedUse {
            rule: name.to_string(),
            at: at.to_string(),
            sigma,
            ctx: ctx.clone(),
            conclusion: concl.clone(),
        });
        Ok(concl)
    }

    // ----- citations

    fn lookup_formula(
        &self,
        levels: &[LevelState],
        label: &str,
    ) -> Result<Formula, CheckError> {
        let mut crossing: Vec<String> = Vec::new();
        for level in levels.iter().rev() {
            for entry in level.entries.iter().rev() {
                match entry {
                    EntryState::Line { label: l, formula } if l == label => {
                        return match formula {
                            Some(f) => self.crossed(f.clone(), &crossing),
                            None => Err(CheckError::UnknownRef { label: label.to_string() }),
                        };
                    }
                    EntryState::Closed(c) if c.label == label => {
                        return Err(CheckError::scope(format!(
                            "`{label}` is a closed subproof; it is citable only as a whole"
                        )));
                    }
                    _ => {}
                }
            }
            if let Some((hl, hf)) = &level.hyp {
                if hl == label {
                    return self.crossed(hf.clone(), &crossing);
                }
            }
            if let Some(bs) = &level.quant {
                crossing.extend(bs.iter().map(|(n, _)| n.clone()));
            }
        }
        if let Some(t) = self.theorems.iter().find(|t| t.label == label) {
            return Ok(t.formula.clone());
        }
        if self.failed_labels.contains(label) {
            return Err(CheckError::UnknownRef { label: label.to_string() });
        }
        if self.all_labels.contains(label) {
            return Err(CheckError::scope(format!(
                "`{label}` is not accessible from here"
            )));
        }
        Err(CheckError::UnknownRef { label: label.to_string() })
    }

    fn crossed(&self, f: Formula, crossing: &[String]) -> Result<Formula, CheckError> {
        if crossing.is_empty() {
            return Ok(f);
        }
        let free = free_vars(&f);
        let clash: BTreeSet<&String> =
            crossing.iter().filter(|c| free.contains(*c)).collect();
        if let Some(v) = clash.into_iter().next() {
            return Err(CheckError::scope(format!(
                "citation crosses a quantifier binding `{v}`, which is free in the cited formula"
            )));
        }
        Ok(f)
    }

    fn lookup_closed<'a>(
        &self,
        levels: &'a [LevelState],
        label: &str,
    ) -> Result<&'a ClosedScope, CheckError> {
        let level = levels.last().expect("open level");
        for entry in level.entries.iter().rev() {
            if let EntryState::Closed(c) = entry {
                if c.label == label {
                    return Ok(c);
                }
            }
        }
        if self.failed_labels.contains(label) {
            return Err(CheckError::UnknownRef { label: label.to_string() });
        }
        if self.all_labels.contains(label) {
            return Err(CheckError::rule(format!(
                "`{label}` is not a closed subproof at this level"
            )));
        }
        Err(CheckError::UnknownRef { label: label.to_string() })
    }

    fn lookup_closed_hyp(
        &self,
        levels: &[LevelState],
        label: &str,
    ) -> Result<(Formula, Formula), CheckError> {
        let c = self.lookup_closed(levels, label)?;
        let hyp = c
            .hyp
            .clone()
            .ok_or_else(|| CheckError::rule(format!("`{label}` is not a hypothesis subproof")))?;
        if !c.ends_in_line {
            return Err(CheckError::rule(format!(
                "subproof `{label}` does not end in a scope-level line"
            )));
        }
        match &c.conclusion {
            Some((_, f)) => Ok((hyp, f.clone())),
            None => Err(CheckError::UnknownRef { label: label.to_string() }),
        }
    }
}

/// Context of a position: binder assignments of the enclosing
/// quantifier scopes, inner scopes shadowing outer ones.
fn context_of(levels: &[LevelState]) -> CatAssignment {
    let mut ctx = CatAssignment::new();
    for level in levels {
        if let Some(bs) = &level.quant {
            for (n, c) in bs {
                ctx.insert(n.clone(), c.clone());
            }
        }
    }
    ctx
}
