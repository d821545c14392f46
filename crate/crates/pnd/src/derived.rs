//! Derived rules: extraction of reusable schemas from closed
//! sub-deductions, rigid first-order schema matching, and a replay
//! oracle that re-derives every application from primitive rules.
//!
//! A closed deduction kept free in its quantified variables can be
//! cited later as an inference rule, so the set of available rules
//! grows with the development. Applications are schema-checked on the
//! trusted path; `expand_derived` is the independent soundness check
//! used by tests.

use crate::categories::{check_wff, CatAssignment, Signature};
use crate::error::CheckError;
use crate::kernel::{
    apply_assg, apply_sub, eqi_conclusion, resolve, Theorem,
};
use crate::script::{Derive, Item, Just, Node, Scope, ScopeKind, Script, Step};
use crate::syntax::{
    alpha_eq, free_vars, print_formula, substitute_many, Category, Formula,
};
use std::collections::{HashMap, HashSet};

#[derive(Clone, Debug)]
pub struct RuleSchema {
    pub name: String,
    /// Schematic parameters with their categories, in prefix order.
    pub params: Vec<(String, Category)>,
    pub premises: Vec<Formula>,
    pub conclusion: Formula,
    pub provenance: Provenance,
}

#[derive(Clone, Debug)]
pub struct Provenance {
    /// Theses the sub-deduction cites.
    pub theorem_deps: Vec<String>,
    /// The extracted sub-deduction, with resolved formulas.
    pub chain: ProvScope,
}

#[derive(Clone, Debug)]
pub struct ProvScope {
    pub label: String,
    pub kind: ProvKind,
    pub items: Vec<ProvItem>,
}

#[derive(Clone, Debug)]
pub enum ProvKind {
    Hyp(Formula),
    Quant(Vec<(String, Category)>),
}

#[derive(Clone, Debug)]
pub enum ProvItem {
    Line { label: String, formula: Formula, just: Just },
    Scope(ProvScope),
}

/// One accepted application of a derived rule.
#[derive(Clone, Debug)]
pub struct DerivedUse {
    pub rule: String,
    pub at: String,
    pub sigma: Vec<(String, Formula)>,
    pub ctx: CatAssignment,
    pub conclusion: Formula,
}

// ---------------------------------------------------------------------
// Extraction

pub(crate) fn extract_rule(
    script: &Script,
    before_item: usize,
    d: &Derive,
    sig: &Signature,
    scope_cats: &HashMap<String, Vec<(String, Category)>>,
    failed_labels: &HashSet<String>,
    theorems: &[Theorem],
) -> Result<RuleSchema, CheckError> {
    let err = |msg: String| CheckError::Extract { msg };

    // Locate the scope and its ancestors among the preceding items.
    let mut found: Option<(Vec<&Scope>, &Scope)> = None;
    for item in script.items.iter().take(before_item) {
        if let Item::Scope(top) = item {
            let mut path = Vec::new();
            if let Some(hit) = find_scope(top, &d.from, &mut path) {
                found = Some((path, hit));
                break;
            }
        }
    }
    let (ancestors, target) = found.ok_or_else(|| {
        err(format!("`{}` is not a closed scope preceding this point", d.from))
    })?;

    for a in &ancestors {
        if !matches!(a.kind, ScopeKind::Quant(_)) {
            return Err(err(format!(
                "the deduction `{}` sits inside hypothesis scope `{}`",
                d.from, a.label
            )));
        }
    }

    // No failing line may be replayed.
    let mut subtree = Vec::new();
    collect_labels(target, &mut subtree);
    if subtree.iter().any(|l| failed_labels.contains(l))
        || ancestors.iter().any(|a| failed_labels.contains(&a.label))
    {
        return Err(err(format!("scope `{}` contains lines that did not verify", d.from)));
    }

    // Parameters: binders of every enclosing quantifier scope, plus the
    // target itself when it is one.
    let mut params: Vec<(String, Category)> = Vec::new();
    let mut quant_path: Vec<&Scope> = ancestors.clone();
    if matches!(target.kind, ScopeKind::Quant(_)) {
        quant_path.push(target);
    }
    for q in &quant_path {
        let cats = scope_cats
            .get(&q.label)
            .ok_or_else(|| err(format!("scope `{}` has no category assignment", q.label)))?;
        params.extend(cats.iter().cloned());
    }

    // Resolve the subtree against the current signature. The signature
    // only grew since the scope checked, and growth cannot re-resolve a
    // name that verified, so this matches what the kernel saw.
    let mut bound: Vec<String> = params.iter().map(|(n, _)| n.clone()).collect();
    let prov = resolve_prov(target, sig, &mut bound, scope_cats)?;

    // The premise chain descends while a scope body is exactly one
    // nested hypothesis scope.
    let mut premises = Vec::new();
    let mut cursor = &prov;
    if let ProvKind::Hyp(h) = &cursor.kind {
        premises.push(h.clone());
        loop {
            if cursor.items.len() == 1 {
                if let ProvItem::Scope(s) = &cursor.items[0] {
                    if let ProvKind::Hyp(h) = &s.kind {
                        premises.push(h.clone());
                        cursor = s;
                        continue;
                    }
                }
            }
            break;
        }
    }
    let conclusion = match cursor.items.last() {
        Some(ProvItem::Line { formula, .. }) => formula.clone(),
        _ => {
            return Err(err(format!(
                "the innermost level of `{}` does not end in a line",
                d.from
            )))
        }
    };

    // Every citation resolves internally or to a preceding thesis.
    let internal: HashSet<String> = subtree.into_iter().collect();
    let theorem_labels: HashSet<&str> = theorems.iter().map(|t| t.label.as_str()).collect();
    let mut deps: Vec<String> = Vec::new();
    check_closure(&prov, &internal, &theorem_labels, &mut deps)
        .map_err(|label| err(format!(
            "`{label}` is cited inside `{}` but is neither internal nor a thesis; \
             the rule would not be replayable",
            d.from
        )))?;
    deps.sort();
    deps.dedup();

    let param_set: HashSet<&str> = params.iter().map(|(n, _)| n.as_str()).collect();
    for f in premises.iter().chain(Some(&conclusion)) {
        for v in free_vars(f) {
            if !param_set.contains(v.as_str()) {
                return Err(err(format!(
                    "pattern variable `{v}` is not bound by the enclosing quantifier scopes"
                )));
            }
        }
    }

    Ok(RuleSchema {
        name: d.name.clone(),
        params,
        premises,
        conclusion,
        provenance: Provenance { theorem_deps: deps, chain: prov },
    })
}

fn find_scope<'s>(
    scope: &'s Scope,
    label: &str,
    path: &mut Vec<&'s Scope>,
) -> Option<&'s Scope> {
    if scope.label == label {
        return Some(scope);
    }
    path.push(scope);
    for node in &scope.body {
        if let Node::Scope(s) = node {
            if let Some(hit) = find_scope(s, label, path) {
                return Some(hit);
            }
        }
    }
    path.pop();
    None
}

fn collect_labels(scope: &Scope, out: &mut Vec<String>) {
    out.push(scope.label.clone());
    for node in &scope.body {
        match node {
            Node::Line(l) => out.push(l.label.clone()),
            Node::Scope(s) => collect_labels(s, out),
        }
    }
}

fn resolve_prov(
    scope: &Scope,
    sig: &Signature,
    bound: &mut Vec<String>,
    scope_cats: &HashMap<String, Vec<(String, Category)>>,
) -> Result<ProvScope, CheckError> {
    let depth = bound.len();
    let kind = match &scope.kind {
        ScopeKind::Hyp(h) => ProvKind::Hyp(resolve(h, sig, bound)?),
        ScopeKind::Quant(_) => {
            let cats = scope_cats.get(&scope.label).cloned().ok_or_else(|| {
                CheckError::Extract {
                    msg: format!("scope `{}` has no category assignment", scope.label),
                }
            })?;
            bound.extend(cats.iter().map(|(n, _)| n.clone()));
            ProvKind::Quant(cats)
        }
    };
    let mut items = Vec::new();
    for node in &scope.body {
        match node {
            Node::Line(l) => {
                let formula = resolve(&l.formula, sig, bound)?;
                let just = resolve_just(&l.just, sig, bound)?;
                items.push(ProvItem::Line { label: l.label.clone(), formula, just });
            }
            Node::Scope(s) => items.push(ProvItem::Scope(resolve_prov(s, sig, bound, scope_cats)?)),
        }
    }
    bound.truncate(depth);
    Ok(ProvScope { label: scope.label.clone(), kind, items })
}

fn resolve_just(just: &Just, sig: &Signature, bound: &mut Vec<String>) -> Result<Just, CheckError> {
    Ok(match just {
        Just::Chain { seed, steps } => Just::Chain {
            seed: seed.clone(),
            steps: steps
                .iter()
                .map(|s| {
                    Ok(match s {
                        Step::Sub { binder, delta } => Step::Sub {
                            binder: binder.clone(),
                            delta: resolve(delta, sig, bound)?,
                        },
                        other => other.clone(),
                    })
                })
                .collect::<Result<Vec<_>, CheckError>>()?,
        },
        other => other.clone(),
    })
}

fn check_closure(
    prov: &ProvScope,
    internal: &HashSet<String>,
    theorems: &HashSet<&str>,
    deps: &mut Vec<String>,
) -> Result<(), String> {
    let mut check = |label: &String| -> Result<(), String> {
        if internal.contains(label) {
            Ok(())
        } else if theorems.contains(label.as_str()) {
            deps.push(label.clone());
            Ok(())
        } else {
            Err(label.clone())
        }
    };
    fn refs_of(just: &Just, out: &mut Vec<String>) {
        match just {
            Just::Chain { seed, steps } => {
                out.push(seed.clone());
                for s in steps {
                    match s {
                        Step::EqE(r) => out.push(r.clone()),
                        Step::Use { refs, .. } => out.extend(refs.iter().cloned()),
                        _ => {}
                    }
                }
            }
            Just::EqI(a, b) => {
                out.push(a.clone());
                out.push(b.clone());
            }
            Just::Gen(a) | Just::Raa(a) => out.push(a.clone()),
            Just::Use { refs, .. } => out.extend(refs.iter().cloned()),
            Just::Def => {}
        }
    }
    fn walk(
        prov: &ProvScope,
        check: &mut dyn FnMut(&String) -> Result<(), String>,
    ) -> Result<(), String> {
        for item in &prov.items {
            match item {
                ProvItem::Line { just, .. } => {
                    let mut refs = Vec::new();
                    refs_of(just, &mut refs);
                    for r in &refs {
                        check(r)?;
                    }
                }
                ProvItem::Scope(s) => walk(s, check)?,
            }
        }
        Ok(())
    }
    walk(prov, &mut check)
}

// ---------------------------------------------------------------------
// Matching

/// Match a schema against stated premises (tried in every order) and,
/// when given, a stated conclusion. Matching is one-sided, syntactic,
/// and rigid; repeated parameters must match alpha-equal pieces; each
/// parameter's image must be a wff of the parameter's category.
pub fn match_schema(
    schema: &RuleSchema,
    premises: &[Formula],
    conclusion: Option<&Formula>,
    sig: &Signature,
    ctx: &CatAssignment,
) -> Result<(Vec<(String, Formula)>, Formula), CheckError> {
    if premises.len() != schema.premises.len() {
        return Err(CheckError::rule(format!(
            "rule `{}` takes {} premise(s), {} given",
            schema.name,
            schema.premises.len(),
            premises.len()
        )));
    }
    let params: HashSet<String> = schema.params.iter().map(|(n, _)| n.clone()).collect();
    let orders = permutations(premises.len());
    'orders: for order in &orders {
        let mut sigma: HashMap<String, Formula> = HashMap::new();
        for (pat, idx) in schema.premises.iter().zip(order) {
            if !pmatch(pat, &premises[*idx], &params, &mut sigma, &mut Vec::new(), &mut Vec::new())
            {
                continue 'orders;
            }
        }
        let concl_instance = match conclusion {
            Some(c) => {
                if !pmatch(
                    &schema.conclusion,
                    c,
                    &params,
                    &mut sigma,
                    &mut Vec::new(),
                    &mut Vec::new(),
                ) {
                    continue 'orders;
                }
                c.clone()
            }
            None => {
                if !schema.params.iter().all(|(n, _)| sigma.contains_key(n)) {
                    continue 'orders;
                }
                match substitute_many(&schema.conclusion, &sigma) {
                    Ok(f) => f,
                    Err(_) => continue 'orders,
                }
            }
        };
        // Category discipline on the parameter images.
        for (name, cat) in &schema.params {
            let image = match sigma.get(name) {
                Some(f) => f,
                None => continue 'orders,
            };
            match check_wff(image, sig, ctx) {
                Ok(c) if c == *cat => {}
                _ => continue 'orders,
            }
        }
        let ordered: Vec<(String, Formula)> = schema
            .params
            .iter()
            .map(|(n, _)| (n.clone(), sigma[n].clone()))
            .collect();
        return Ok((ordered, concl_instance));
    }
    Err(CheckError::rule(format!(
        "no instantiation of rule `{}` matches the cited formulas{}",
        schema.name,
        match conclusion {
            Some(c) => format!(" and the stated `{}`", print_formula(c)),
            None => String::new(),
        }
    )))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut base: Vec<usize> = (0..n).collect();
    permute(&mut base, 0, &mut out);
    out
}

fn permute(xs: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == xs.len() {
        out.push(xs.clone());
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, out);
        xs.swap(k, i);
    }
}

/// Rigid one-sided matching. `penv` pairs pattern-bound with
/// object-bound variables; `obound` tracks object binders in scope so a
/// parameter never captures one.
fn pmatch(
    pat: &Formula,
    obj: &Formula,
    params: &HashSet<String>,
    sigma: &mut HashMap<String, Formula>,
    penv: &mut Vec<(String, String)>,
    obound: &mut Vec<String>,
) -> bool {
    match pat {
        Formula::Var(x) => {
            // A pattern-bound variable matches exactly its correspondent;
            // the innermost pair on either side decides.
            if let Some(pos) = penv.iter().rposition(|(p, _)| p == x) {
                return match obj {
                    Formula::Var(y) => penv.iter().rposition(|(_, o)| o == y) == Some(pos),
                    _ => false,
                };
            }
            if params.contains(x) {
                if free_vars(obj).iter().any(|v| obound.iter().any(|b| b == v)) {
                    return false;
                }
                return bind(sigma, x, obj);
            }
            matches!(obj, Formula::Var(y) if y == x && !obound.iter().any(|b| b == y))
        }
        Formula::Const(c) => matches!(obj, Formula::Const(d) if c == d),
        Formula::Equiv(l, r) => match obj {
            Formula::Equiv(ol, or) => {
                pmatch(l, ol, params, sigma, penv, obound)
                    && pmatch(r, or, params, sigma, penv, obound)
            }
            _ => false,
        },
        Formula::Apply(h, args) => match obj {
            Formula::Apply(oh, oargs) if oargs.len() == args.len() => {
                let head_ok = match h.as_ref() {
                    Formula::Var(f)
                        if params.contains(f) && !penv.iter().any(|(p, _)| p == f) =>
                    {
                        if free_vars(oh).iter().any(|v| obound.iter().any(|b| b == v)) {
                            return false;
                        }
                        bind(sigma, f, oh)
                    }
                    _ => pmatch(h, oh, params, sigma, penv, obound),
                };
                head_ok
                    && args
                        .iter()
                        .zip(oargs)
                        .all(|(p, o)| pmatch(p, o, params, sigma, penv, obound))
            }
            _ => false,
        },
        Formula::Quant(bs, body) => match obj {
            Formula::Quant(obs, obody) if obs.len() == bs.len() => {
                let n = penv.len();
                let m = obound.len();
                for (pb, ob) in bs.iter().zip(obs) {
                    penv.push((pb.name.clone(), ob.name.clone()));
                    obound.push(ob.name.clone());
                }
                let ok = pmatch(body, obody, params, sigma, penv, obound);
                penv.truncate(n);
                obound.truncate(m);
                ok
            }
            _ => false,
        },
    }
}

fn bind(sigma: &mut HashMap<String, Formula>, name: &str, obj: &Formula) -> bool {
    match sigma.get(name) {
        Some(prev) => alpha_eq(prev, obj),
        None => {
            sigma.insert(name.to_string(), obj.clone());
            true
        }
    }
}

// ---------------------------------------------------------------------
// Replay oracle

struct RClosed {
    hyp: Option<Formula>,
    binders: Option<Vec<(String, Category)>>,
    conclusion: Option<Formula>,
    ends_in_line: bool,
}

struct RLevel {
    hyp: Option<(String, Formula)>,
    quant: Option<Vec<(String, Category)>>,
    lines: Vec<(String, Formula)>,
    closed: Vec<(String, RClosed)>,
}

struct Replay<'a> {
    sig: &'a Signature,
    theorems: &'a [Theorem],
    rules: &'a [RuleSchema],
    sigma: HashMap<String, Formula>,
    out: Vec<(String, Formula)>,
    depth: usize,
}

/// Re-check a rule's provenance sub-deduction with every formula
/// transported through `sigma`, recursively expanding the derived rules
/// it uses. Returns the replayed lines; any failure is a disagreement
/// between the matcher and the kernel.
pub fn expand_derived(
    name: &str,
    sigma: &[(String, Formula)],
    ctx: &CatAssignment,
    sig: &Signature,
    theorems: &[Theorem],
    rules: &[RuleSchema],
) -> Result<Vec<(String, Formula)>, CheckError> {
    let schema = rules
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| CheckError::UnknownRule { name: name.to_string() })?;
    let mut replay = Replay {
        sig,
        theorems,
        rules,
        sigma: sigma.iter().cloned().collect(),
        out: Vec::new(),
        depth: 0,
    };
    let mut levels = vec![RLevel { hyp: None, quant: None, lines: Vec::new(), closed: Vec::new() }];
    replay.walk(&schema.provenance.chain, &mut levels, ctx)?;

    // The chain's innermost scope ends in the conclusion line, and it is
    // the last item processed, so the final replayed line is the
    // conclusion instance.
    let final_formula = replay
        .out
        .last()
        .map(|(_, f)| f.clone())
        .ok_or(CheckError::Replay { msg: "replay produced no lines".to_string() })?;
    let expected = substitute_many(&schema.conclusion, &sigma.iter().cloned().collect())
        .map_err(|e| CheckError::Replay { msg: format!("conclusion transport: {e}") })?;
    if !alpha_eq(&final_formula, &expected) {
        return Err(CheckError::Replay {
            msg: format!(
                "replay concludes `{}`, expected `{}`",
                print_formula(&final_formula),
                print_formula(&expected)
            ),
        });
    }
    Ok(replay.out)
}

impl<'a> Replay<'a> {
    fn rerr(&self, e: impl std::fmt::Display) -> CheckError {
        CheckError::Replay { msg: e.to_string() }
    }

    fn transport(&self, f: &Formula, shadowed: &[String]) -> Result<Formula, CheckError> {
        let mut map = self.sigma.clone();
        for s in shadowed {
            map.remove(s);
        }
        substitute_many(f, &map).map_err(|e| CheckError::Replay { msg: e.to_string() })
    }

    fn walk(
        &mut self,
        prov: &ProvScope,
        levels: &mut Vec<RLevel>,
        ctx: &CatAssignment,
    ) -> Result<RClosed, CheckError> {
        self.depth += 1;
        if self.depth > 256 {
            return Err(self.rerr("replay recursion limit exceeded"));
        }
        let shadowed = shadowed_names(levels);
        let (quant, hyp, ctx2) = match &prov.kind {
            ProvKind::Hyp(h) => {
                let h2 = self.transport(h, &shadowed)?;
                (None, Some((prov.label.clone(), h2)), ctx.clone())
            }
            ProvKind::Quant(bs) => {
                for (n, _) in bs {
                    for img in self.sigma.values() {
                        if free_vars(img).contains(n) {
                            return Err(self.rerr(format!(
                                "scope binder `{n}` would capture a substituted formula"
                            )));
                        }
                    }
                }
                let mut c = ctx.clone();
                for (n, cat) in bs {
                    c.insert(n.clone(), cat.clone());
                }
                (Some(bs.clone()), None, c)
            }
        };
        levels.push(RLevel { hyp, quant, lines: Vec::new(), closed: Vec::new() });
        for item in &prov.items {
            match item {
                ProvItem::Line { label, formula, just } => {
                    let shadowed = shadowed_names(levels);
                    let expected = self.transport(formula, &shadowed)?;
                    let got = self.eval(just, &expected, levels, &ctx2)?;
                    if !alpha_eq(&got, &expected) {
                        return Err(self.rerr(format!(
                            "replayed line `{label}` yields `{}`, expected `{}`",
                            print_formula(&got),
                            print_formula(&expected)
                        )));
                    }
                    self.out.push((label.clone(), expected.clone()));
                    levels
                        .last_mut()
                        .unwrap()
                        .lines
                        .push((label.clone(), expected));
                }
                ProvItem::Scope(s) => {
                    let closed = self.walk(s, levels, &ctx2)?;
                    levels.last_mut().unwrap().closed.push((s.label.clone(), closed));
                }
            }
        }
        self.depth -= 1;
        let level = levels.pop().unwrap();
        let ends_in_line = matches!(prov.items.last(), Some(ProvItem::Line { .. }));
        let conclusion = if ends_in_line {
            level.lines.last().map(|(_, f)| f.clone())
        } else {
            None
        };
        Ok(RClosed {
            hyp: level.hyp.map(|(_, f)| f),
            binders: level.quant,
            conclusion,
            ends_in_line,
        })
    }

    fn lookup(&self, levels: &[RLevel], label: &str) -> Result<Formula, CheckError> {
        let mut crossing: Vec<String> = Vec::new();
        for level in levels.iter().rev() {
            if let Some((l, f)) = level.lines.iter().rev().find(|(l, _)| l == label) {
                let _ = l;
                return self.crossed(f.clone(), &crossing);
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
        Err(self.rerr(format!("replay reference `{label}` does not resolve")))
    }

    fn crossed(&self, f: Formula, crossing: &[String]) -> Result<Formula, CheckError> {
        let free = free_vars(&f);
        if let Some(v) = crossing.iter().find(|c| free.contains(*c)) {
            return Err(self.rerr(format!(
                "replay citation crosses a quantifier binding `{v}`"
            )));
        }
        Ok(f)
    }

    fn lookup_closed<'b>(
        &self,
        levels: &'b [RLevel],
        label: &str,
    ) -> Result<&'b RClosed, CheckError> {
        levels
            .last()
            .and_then(|l| l.closed.iter().rev().find(|(n, _)| n == label))
            .map(|(_, c)| c)
            .ok_or_else(|| self.rerr(format!("replay subproof `{label}` not found at this level")))
    }

    fn eval(
        &mut self,
        just: &Just,
        expected: &Formula,
        levels: &mut Vec<RLevel>,
        ctx: &CatAssignment,
    ) -> Result<Formula, CheckError> {
        match just {
            Just::Def => Err(self.rerr("definitions cannot occur inside a deduction")),
            Just::Chain { seed, steps } => {
                let mut running = self.lookup(levels, seed)?;
                let shadowed = shadowed_names(levels);
                let last = steps.len().saturating_sub(1);
                for (i, step) in steps.iter().enumerate() {
                    running = match step {
                        Step::Sub { binder, delta } => {
                            let delta = self.transport(delta, &shadowed)?;
                            apply_sub(&running, binder, &delta, self.sig, ctx)
                                .map_err(|e| self.rerr(e))?
                        }
                        Step::AssG => apply_assg(&running).map_err(|e| self.rerr(e))?,
                        Step::EqE(r) => {
                            let cited = self.lookup(levels, r)?;
                            match crate::kernel::apply_eqe(&running, &cited) {
                                Ok(f) => f,
                                Err(_) => crate::kernel::apply_eqe(&cited, &running)
                                    .map_err(|e| self.rerr(e))?,
                            }
                        }
                        Step::Use { name, refs } => {
                            let mut premises = vec![running.clone()];
                            for r in refs {
                                premises.push(self.lookup(levels, r)?);
                            }
                            let conclusion = if i == last { Some(expected) } else { None };
                            self.replay_use(name, premises, conclusion, ctx)?
                        }
                    };
                }
                Ok(running)
            }
            Just::EqI(r1, r2) => {
                let (h1, c1) = self.closed_hyp(levels, r1)?;
                let (h2, c2) = self.closed_hyp(levels, r2)?;
                let direct = eqi_conclusion(&h1, &c1, &h2, &c2);
                if let Ok(f) = &direct {
                    if alpha_eq(f, expected) {
                        return Ok(f.clone());
                    }
                }
                match eqi_conclusion(&h2, &c2, &h1, &c1) {
                    Ok(f) => Ok(f),
                    Err(e) => direct.map_err(|_| self.rerr(e)),
                }
            }
            Just::Gen(r) => {
                for level in levels.iter() {
                    if level.hyp.is_some() {
                        return Err(self.rerr("generalization inside a hypothesis"));
                    }
                }
                let closed = self.lookup_closed(levels, r)?;
                let binders = closed
                    .binders
                    .clone()
                    .ok_or_else(|| self.rerr(format!("`{r}` is not a quantifier scope")))?;
                let conclusion = closed
                    .conclusion
                    .clone()
                    .ok_or_else(|| self.rerr(format!("`{r}` has no conclusion line")))?;
                Ok(Formula::Quant(
                    binders
                        .iter()
                        .map(|(n, _)| crate::syntax::Binder::new(n.clone()))
                        .collect(),
                    Box::new(conclusion),
                ))
            }
            Just::Use { name, refs } => {
                let mut premises = Vec::new();
                for r in refs {
                    premises.push(self.lookup(levels, r)?);
                }
                self.replay_use(name, premises, Some(expected), ctx)
            }
            Just::Raa(_) => Err(self.rerr("raa inside a derived deduction is not replayable")),
        }
    }

    fn closed_hyp(
        &self,
        levels: &[RLevel],
        label: &str,
    ) -> Result<(Formula, Formula), CheckError> {
        let c = self.lookup_closed(levels, label)?;
        let hyp = c
            .hyp
            .clone()
            .ok_or_else(|| self.rerr(format!("`{label}` is not a hypothesis subproof")))?;
        let concl = c
            .conclusion
            .clone()
            .ok_or_else(|| self.rerr(format!("`{label}` has no conclusion line")))?;
        Ok((hyp, concl))
    }

    fn replay_use(
        &mut self,
        name: &str,
        premises: Vec<Formula>,
        conclusion: Option<&Formula>,
        ctx: &CatAssignment,
    ) -> Result<Formula, CheckError> {
        let schema = self
            .rules
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| self.rerr(format!("derived rule `{name}` not registered")))?;
        let (sigma, concl) = match_schema(schema, &premises, conclusion, self.sig, ctx)
            .map_err(|e| self.rerr(e))?;
        // Recursively expand: a derived use inside a replay is itself
        // validated from primitive rules.
        let inner = expand_derived(name, &sigma, ctx, self.sig, self.theorems, self.rules)?;
        let _ = inner;
        Ok(concl)
    }
}

fn shadowed_names(levels: &[RLevel]) -> Vec<String> {
    let mut out = Vec::new();
    for level in levels {
        if let Some(bs) = &level.quant {
            out.extend(bs.iter().map(|(n, _)| n.clone()));
        }
    }
    out
}
