//! Concrete ASCII syntax: formulas, categories, and the line-oriented,
//! indentation-sensitive proof-script format (2 spaces per level,
//! comments from `#` to end of line).

use crate::script::{Derive, Item, Just, Line, Node, Scope, ScopeKind, Script, Span, Step};
use crate::syntax::{Binder, Category, Formula};
use std::collections::HashSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
    /// What would have been accepted here, when known.
    pub expected: Vec<String>,
}

impl ParseError {
    fn new(span: Span, msg: impl Into<String>) -> ParseError {
        ParseError { line: span.line, col: span.col, msg: msg.into(), expected: Vec::new() }
    }

    fn expecting(span: Span, msg: impl Into<String>, expected: &[&str]) -> ParseError {
        ParseError {
            line: span.line,
            col: span.col,
            msg: msg.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" | "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

const KEYWORDS: &[&str] = &[
    "dev", "thm", "derive", "from", "quant", "hyp", "by", "def", "eqi", "gen", "use", "raa",
    "sub", "assg", "eqe",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

fn is_label(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().map(|c| c.is_ascii_alphanumeric() || c == '_').unwrap_or(false)
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '\'')
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Atom(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Colon,
    Assign,
    Equiv,
    Slash,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Atom(s) => write!(f, "`{s}`"),
            Tok::Str(_) => write!(f, "string"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Assign => write!(f, "`:=`"),
            Tok::Equiv => write!(f, "`<=>`"),
            Tok::Slash => write!(f, "`/`"),
        }
    }
}

fn tokenize(text: &str, line_no: usize, col0: usize) -> Result<Vec<(Tok, Span)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line: line_no, col: col0 + i + 1 };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                if c == '\t' {
                    return Err(ParseError::new(span, "tab characters are not allowed"));
                }
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, span));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, span));
                i += 1;
            }
            '[' => {
                out.push((Tok::LBracket, span));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBracket, span));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, span));
                i += 1;
            }
            ';' => {
                out.push((Tok::Semi, span));
                i += 1;
            }
            '/' => {
                out.push((Tok::Slash, span));
                i += 1;
            }
            ':' => {
                if chars.get(i + 1) == Some(&'=') {
                    out.push((Tok::Assign, span));
                    i += 2;
                } else {
                    out.push((Tok::Colon, span));
                    i += 1;
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') && chars.get(i + 2) == Some(&'>') {
                    out.push((Tok::Equiv, span));
                    i += 3;
                } else {
                    return Err(ParseError::new(span, "stray `<`; the biconditional is `<=>`"));
                }
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                        None => return Err(ParseError::new(span, "unterminated string")),
                    }
                }
                out.push((Tok::Str(s), span));
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric()
                        || chars[i] == '_'
                        || chars[i] == '.'
                        || chars[i] == '\'')
                {
                    i += 1;
                }
                out.push((Tok::Atom(chars[start..i].iter().collect()), span));
            }
            other => {
                return Err(ParseError::new(span, format!("unexpected character `{other}`")));
            }
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    end: Span,
}

impl Cursor {
    fn new(toks: Vec<(Tok, Span)>, end: Span) -> Cursor {
        Cursor { toks, pos: 0, end }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn span(&self) -> Span {
        self.toks.get(self.pos).map(|(_, s)| *s).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError::expecting(
                self.span(),
                format!("found {t} while parsing {what}"),
                &[&want.to_string()],
            )),
            None => Err(ParseError::expecting(
                self.span(),
                format!("unexpected end of line while parsing {what}"),
                &[&want.to_string()],
            )),
        }
    }

    fn atom(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let span = self.span();
        match self.next() {
            Some(Tok::Atom(s)) => Ok((s, span)),
            Some(t) => Err(ParseError::new(span, format!("found {t} while parsing {what}"))),
            None => Err(ParseError::new(span, format!("missing {what}"))),
        }
    }

    fn name(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let (s, span) = self.atom(what)?;
        if !is_name(&s) {
            return Err(ParseError::new(span, format!("`{s}` is not a valid name")));
        }
        if is_keyword(&s) {
            return Err(ParseError::new(span, format!("`{s}` is a reserved word")));
        }
        Ok((s, span))
    }

    fn label(&mut self, what: &str) -> Result<(String, Span), ParseError> {
        let (s, span) = self.atom(what)?;
        if !is_label(&s) {
            return Err(ParseError::new(span, format!("`{s}` is not a valid label")));
        }
        if is_keyword(&s) {
            return Err(ParseError::new(span, format!("`{s}` is a reserved word")));
        }
        Ok((s, span))
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn peek_atom(&self) -> Option<&str> {
        match self.peek() {
            Some(Tok::Atom(s)) => Some(s.as_str()),
            _ => None,
        }
    }
}

fn parse_category_at(cur: &mut Cursor) -> Result<Category, ParseError> {
    let mut acc = match cur.peek() {
        Some(Tok::Atom(s)) if s == "s" => {
            cur.next();
            Category::Base
        }
        Some(Tok::LParen) => {
            cur.next();
            let inner = parse_category_at(cur)?;
            cur.expect(&Tok::RParen, "a parenthesized category")?;
            inner
        }
        _ => {
            return Err(ParseError::expecting(cur.span(), "not a category", &["s", "("]));
        }
    };
    while cur.peek() == Some(&Tok::Slash) {
        cur.next();
        cur.expect(&Tok::LParen, "a functor argument list")?;
        if cur.peek() == Some(&Tok::RParen) {
            return Err(ParseError::new(cur.span(), "empty category argument list"));
        }
        let mut args = vec![parse_category_at(cur)?];
        while cur.peek() == Some(&Tok::Comma) {
            cur.next();
            args.push(parse_category_at(cur)?);
        }
        cur.expect(&Tok::RParen, "a functor argument list")?;
        acc = Category::Functor(Box::new(acc), args);
    }
    Ok(acc)
}

fn parse_binder_at(cur: &mut Cursor) -> Result<Binder, ParseError> {
    let (name, _) = cur.name("a binder name")?;
    if cur.peek() == Some(&Tok::Colon) {
        cur.next();
        let cat = parse_category_at(cur)?;
        Ok(Binder::annotated(name, cat))
    } else {
        Ok(Binder::new(name))
    }
}

fn parse_item_at(cur: &mut Cursor) -> Result<Formula, ParseError> {
    match cur.peek() {
        Some(Tok::LBracket) => {
            cur.next();
            let mut binders = vec![parse_binder_at(cur)?];
            while matches!(cur.peek(), Some(Tok::Atom(_))) {
                binders.push(parse_binder_at(cur)?);
            }
            let mut seen = HashSet::new();
            for b in &binders {
                if !seen.insert(b.name.clone()) {
                    return Err(ParseError::new(
                        cur.span(),
                        format!("binder `{}` repeated in one quantifier", b.name),
                    ));
                }
            }
            cur.expect(&Tok::RBracket, "a quantifier prefix")?;
            cur.expect(&Tok::LParen, "a quantifier body")?;
            let body = parse_formula_at(cur)?;
            cur.expect(&Tok::RParen, "a quantifier body")?;
            Ok(Formula::Quant(binders, Box::new(body)))
        }
        Some(Tok::LParen) => {
            cur.next();
            let f = parse_formula_at(cur)?;
            cur.expect(&Tok::RParen, "a parenthesized formula")?;
            Ok(f)
        }
        Some(Tok::Atom(_)) => {
            let (name, _) = cur.name("a formula")?;
            let mut acc = Formula::Var(name);
            while cur.peek() == Some(&Tok::LParen) {
                cur.next();
                let mut args = vec![parse_formula_at(cur)?];
                while cur.peek() == Some(&Tok::Comma) {
                    cur.next();
                    args.push(parse_formula_at(cur)?);
                }
                cur.expect(&Tok::RParen, "an argument list")?;
                acc = Formula::Apply(Box::new(acc), args);
            }
            Ok(acc)
        }
        _ => Err(ParseError::expecting(cur.span(), "not a formula", &["name", "[", "("])),
    }
}

fn parse_formula_at(cur: &mut Cursor) -> Result<Formula, ParseError> {
    let left = parse_item_at(cur)?;
    if cur.peek() == Some(&Tok::Equiv) {
        cur.next();
        let right = parse_item_at(cur)?;
        if cur.peek() == Some(&Tok::Equiv) {
            return Err(ParseError::new(
                cur.span(),
                "the biconditional does not associate; parenthesize nested `<=>`",
            ));
        }
        Ok(Formula::equiv(left, right))
    } else {
        Ok(left)
    }
}

/// Parse a standalone formula.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = tokenize(text, 1, 0)?;
    let end = Span { line: 1, col: text.chars().count() + 1 };
    let mut cur = Cursor::new(toks, end);
    let f = parse_formula_at(&mut cur)?;
    if !cur.done() {
        return Err(ParseError::new(
            cur.span(),
            format!("trailing input after formula: {}", cur.peek().unwrap()),
        ));
    }
    Ok(f)
}

/// Parse a standalone category.
pub fn parse_category(text: &str) -> Result<Category, ParseError> {
    let toks = tokenize(text, 1, 0)?;
    let end = Span { line: 1, col: text.chars().count() + 1 };
    let mut cur = Cursor::new(toks, end);
    let c = parse_category_at(&mut cur)?;
    if !cur.done() {
        return Err(ParseError::new(
            cur.span(),
            format!("trailing input after category: {}", cur.peek().unwrap()),
        ));
    }
    Ok(c)
}

fn parse_refs_until_break(cur: &mut Cursor) -> Result<Vec<String>, ParseError> {
    let mut refs = Vec::new();
    while matches!(cur.peek(), Some(Tok::Atom(_))) {
        let (r, _) = cur.label("a line reference")?;
        refs.push(r);
    }
    Ok(refs)
}

fn parse_step(cur: &mut Cursor) -> Result<Step, ParseError> {
    let span = cur.span();
    match cur.peek_atom() {
        Some("sub") => {
            cur.next();
            let (binder, _) = cur.name("a binder name")?;
            cur.expect(&Tok::Assign, "a substitution step")?;
            let delta = parse_formula_at(cur)?;
            Ok(Step::Sub { binder, delta })
        }
        Some("assg") => {
            cur.next();
            Ok(Step::AssG)
        }
        Some("eqe") => {
            cur.next();
            let (r, _) = cur.label("a line reference")?;
            Ok(Step::EqE(r))
        }
        Some("use") => {
            cur.next();
            let (name, _) = cur.name("a rule name")?;
            let refs = parse_refs_until_break(cur)?;
            Ok(Step::Use { name, refs })
        }
        _ => Err(ParseError::expecting(
            span,
            "not a justification step",
            &["sub", "assg", "eqe", "use"],
        )),
    }
}

fn parse_just(cur: &mut Cursor) -> Result<Just, ParseError> {
    match cur.peek_atom() {
        Some("def") => {
            cur.next();
            Ok(Just::Def)
        }
        Some("eqi") => {
            cur.next();
            let (a, _) = cur.label("a subproof reference")?;
            let (b, _) = cur.label("a subproof reference")?;
            Ok(Just::EqI(a, b))
        }
        Some("gen") => {
            cur.next();
            let (a, _) = cur.label("a scope reference")?;
            Ok(Just::Gen(a))
        }
        Some("use") => {
            cur.next();
            let (name, _) = cur.name("a rule name")?;
            let refs = parse_refs_until_break(cur)?;
            Ok(Just::Use { name, refs })
        }
        Some("raa") => {
            cur.next();
            let (a, _) = cur.label("a subproof reference")?;
            Ok(Just::Raa(a))
        }
        Some(_) => {
            let (seed, _) = cur.label("a citation")?;
            let mut steps = Vec::new();
            while cur.peek() == Some(&Tok::Semi) {
                cur.next();
                steps.push(parse_step(cur)?);
            }
            Ok(Just::Chain { seed, steps })
        }
        None => Err(ParseError::expecting(
            cur.span(),
            "missing justification",
            &["citation", "eqi", "gen", "use", "raa", "def"],
        )),
    }
}

/// One physical line of a script, before tree assembly.
enum Raw {
    Dev(String),
    Thm(Line),
    Derive(Derive),
    OpenScope(Scope),
    Line(Line),
}

fn strip_comment(s: &str) -> &str {
    let mut in_str = false;
    for (i, c) in s.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &s[..i],
            _ => {}
        }
    }
    s
}

fn parse_raw(cur: &mut Cursor, span: Span) -> Result<Raw, ParseError> {
    match cur.peek_atom() {
        Some("dev") => {
            cur.next();
            match cur.next() {
                Some(Tok::Str(s)) => Ok(Raw::Dev(s)),
                _ => Err(ParseError::new(span, "`dev` takes a quoted name")),
            }
        }
        Some("thm") => {
            cur.next();
            let (label, _) = cur.label("a thesis label")?;
            cur.expect(&Tok::Colon, "a thesis")?;
            let formula = parse_formula_at(cur)?;
            match cur.peek_atom() {
                Some("by") => {
                    cur.next();
                }
                _ => {
                    return Err(ParseError::expecting(cur.span(), "a thesis needs `by`", &["by"]))
                }
            }
            let just = parse_just(cur)?;
            Ok(Raw::Thm(Line { label, formula, just, span }))
        }
        Some("derive") => {
            cur.next();
            let (name, _) = cur.name("a rule name")?;
            match cur.peek_atom() {
                Some("from") => {
                    cur.next();
                }
                _ => {
                    return Err(ParseError::expecting(
                        cur.span(),
                        "`derive` needs `from`",
                        &["from"],
                    ))
                }
            }
            let (from, _) = cur.label("a scope label")?;
            Ok(Raw::Derive(Derive { name, from, span }))
        }
        Some(_) => {
            let (label, _) = cur.label("a label")?;
            cur.expect(&Tok::Colon, "a labeled line")?;
            match cur.peek_atom() {
                Some("quant") => {
                    cur.next();
                    let mut binders = vec![parse_binder_at(cur)?];
                    while matches!(cur.peek(), Some(Tok::Atom(_))) {
                        binders.push(parse_binder_at(cur)?);
                    }
                    let mut seen = HashSet::new();
                    for b in &binders {
                        if !seen.insert(b.name.clone()) {
                            return Err(ParseError::new(
                                span,
                                format!("binder `{}` repeated in one scope", b.name),
                            ));
                        }
                    }
                    Ok(Raw::OpenScope(Scope {
                        label,
                        kind: ScopeKind::Quant(binders),
                        body: Vec::new(),
                        span,
                    }))
                }
                Some("hyp") => {
                    cur.next();
                    let formula = parse_formula_at(cur)?;
                    Ok(Raw::OpenScope(Scope {
                        label,
                        kind: ScopeKind::Hyp(formula),
                        body: Vec::new(),
                        span,
                    }))
                }
                _ => {
                    let formula = parse_formula_at(cur)?;
                    match cur.peek_atom() {
                        Some("by") => {
                            cur.next();
                        }
                        _ => {
                            return Err(ParseError::expecting(
                                cur.span(),
                                "a proof line needs `by`",
                                &["by"],
                            ))
                        }
                    }
                    let just = parse_just(cur)?;
                    Ok(Raw::Line(Line { label, formula, just, span }))
                }
            }
        }
        None => Err(ParseError::new(span, "empty line")),
    }
}

/// Parse a whole proof script.
pub fn parse_script(text: &str) -> Result<Script, ParseError> {
    let mut script = Script { dev_name: None, items: Vec::new() };
    let mut labels: HashSet<String> = HashSet::new();
    // Stack of open scopes with their indentation level.
    let mut stack: Vec<(usize, Scope)> = Vec::new();
    let mut saw_item = false;

    fn close_to(
        level: usize,
        stack: &mut Vec<(usize, Scope)>,
        items: &mut Vec<Item>,
    ) {
        while let Some((l, _)) = stack.last() {
            if *l >= level {
                let (_, scope) = stack.pop().unwrap();
                match stack.last_mut() {
                    Some((_, parent)) => parent.body.push(Node::Scope(scope)),
                    None => items.push(Item::Scope(scope)),
                }
            } else {
                break;
            }
        }
    }

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = strip_comment(raw_line);
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start_matches(' ').len();
        let span = Span { line: line_no, col: indent + 1 };
        if content.trim_start().starts_with('\t') || content[..indent].contains('\t') {
            return Err(ParseError::new(span, "tab indentation is not allowed"));
        }
        if indent % 2 != 0 {
            return Err(ParseError::new(span, "indentation must be a multiple of 2 spaces"));
        }
        let level = indent / 2;
        let open_depth = stack.len();
        if level > open_depth {
            return Err(ParseError::new(
                span,
                format!("indent level {level} with no open scope at level {open_depth}"),
            ));
        }

        let toks = tokenize(content.trim_start(), line_no, indent)?;
        let end = Span { line: line_no, col: content.chars().count() + 1 };
        let mut cur = Cursor::new(toks, end);
        let raw = parse_raw(&mut cur, span)?;
        if !cur.done() {
            return Err(ParseError::new(
                cur.span(),
                format!("trailing input: {}", cur.peek().unwrap()),
            ));
        }

        match raw {
            Raw::Dev(name) => {
                if saw_item || script.dev_name.is_some() || level != 0 {
                    return Err(ParseError::new(span, "`dev` must be the first item"));
                }
                script.dev_name = Some(name);
                continue;
            }
            Raw::Thm(line) => {
                if level != 0 {
                    return Err(ParseError::new(span, "`thm` lines live at depth 0"));
                }
                close_to(0, &mut stack, &mut script.items);
                check_label(&mut labels, &line.label, span)?;
                script.items.push(Item::Thm(line));
            }
            Raw::Derive(d) => {
                if level != 0 {
                    return Err(ParseError::new(span, "`derive` lives at depth 0"));
                }
                close_to(0, &mut stack, &mut script.items);
                script.items.push(Item::Derive(d));
            }
            Raw::OpenScope(scope) => {
                close_to(level, &mut stack, &mut script.items);
                check_label(&mut labels, &scope.label, span)?;
                stack.push((level, scope));
            }
            Raw::Line(line) => {
                if level == 0 {
                    return Err(ParseError::new(
                        span,
                        "a bare proof line cannot appear at depth 0; use `thm`",
                    ));
                }
                close_to(level, &mut stack, &mut script.items);
                check_label(&mut labels, &line.label, span)?;
                match stack.last_mut() {
                    Some((_, parent)) => parent.body.push(Node::Line(line)),
                    None => unreachable!("level > 0 implies an open scope"),
                }
            }
        }
        saw_item = true;
    }
    close_to(0, &mut stack, &mut script.items);

    // Scopes must not be empty.
    fn check_nonempty(scope: &Scope) -> Result<(), ParseError> {
        if scope.body.is_empty() {
            return Err(ParseError::new(
                scope.span,
                format!("scope `{}` has an empty body", scope.label),
            ));
        }
        for n in &scope.body {
            if let Node::Scope(s) = n {
                check_nonempty(s)?;
            }
        }
        Ok(())
    }
    for item in &script.items {
        if let Item::Scope(s) = item {
            check_nonempty(s)?;
        }
    }
    Ok(script)
}

fn check_label(labels: &mut HashSet<String>, label: &str, span: Span) -> Result<(), ParseError> {
    if !labels.insert(label.to_string()) {
        return Err(ParseError::new(span, format!("duplicate label `{label}`")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::print_formula;

    #[test]
    fn formula_closed_thesis() {
        let f = parse_formula("[p q]((p <=> q) <=> (q <=> p))").unwrap();
        match &f {
            Formula::Quant(bs, body) => {
                assert_eq!(bs.len(), 2);
                assert!(matches!(body.as_ref(), Formula::Equiv(_, _)));
            }
            other => panic!("unexpected parse: {other:?}"),
        }
    }

    #[test]
    fn formula_apply_heads() {
        let f = parse_formula("[f](f([p](p)) <=> f(q))").unwrap();
        let printed = print_formula(&f);
        assert_eq!(printed, "[f](f([p](p)) <=> f(q))");
    }

    #[test]
    fn formula_biconditional_is_non_associative() {
        assert!(parse_formula("p <=> q <=> r").is_err());
    }

    #[test]
    fn formula_multi_link_application() {
        let f = parse_formula("K(p)(q)").unwrap();
        assert_eq!(print_formula(&f), "K(p)(q)");
    }

    #[test]
    fn category_examples() {
        assert_eq!(
            parse_category("s/(s)").unwrap(),
            Category::functor(Category::Base, vec![Category::Base])
        );
        assert_eq!(parse_category("s").unwrap(), Category::Base);
        assert!(parse_category("s/()").is_err());
        assert_eq!(
            parse_category("(s/(s))/(s)").unwrap(),
            Category::functor(
                Category::functor(Category::Base, vec![Category::Base]),
                vec![Category::Base]
            )
        );
        assert_eq!(
            parse_category("s/(s,s)").unwrap(),
            Category::functor(Category::Base, vec![Category::Base, Category::Base])
        );
    }

    #[test]
    fn script_empty() {
        let s = parse_script("").unwrap();
        assert!(s.items.is_empty());
        assert!(s.dev_name.is_none());
    }

    #[test]
    fn script_small() {
        let text = "\
dev \"demo\"
s1: quant p
  1.1: hyp p
    1.2: p by 1.1
  1.3: (p <=> p) by eqi 1.1 1.1
thm 2: [p](p <=> p) by gen s1
";
        let s = parse_script(text).unwrap();
        assert_eq!(s.dev_name.as_deref(), Some("demo"));
        assert_eq!(s.items.len(), 2);
        match &s.items[0] {
            Item::Scope(sc) => {
                assert_eq!(sc.label, "s1");
                assert_eq!(sc.body.len(), 2);
            }
            other => panic!("expected scope, got {other:?}"),
        }
    }

    #[test]
    fn script_dangling_indent() {
        let err = parse_script("    x: p by 1\n").unwrap_err();
        assert!(err.msg.contains("no open scope"));
    }

    #[test]
    fn script_duplicate_label() {
        let text = "\
s1: quant p
  1.1: hyp p
    1.1: p by 1.1
";
        let err = parse_script(text).unwrap_err();
        assert!(err.msg.contains("duplicate label"));
    }

    #[test]
    fn print_then_parse_round_trips() {
        for text in [
            "[p q]((p <=> q) <=> (q <=> p))",
            "(Vr <=> [p](p <=> p))",
            "not([p q](p <=> q))",
            "[f: s/(s)](p <=> ([r](p <=> f(r)) <=> [r](q <=> f(r))))",
            "K(p)(q)",
        ] {
            let f = parse_formula(text).unwrap();
            let printed = print_formula(&f);
            let again = parse_formula(&printed).unwrap();
            assert_eq!(f, again, "round trip failed for {text}");
        }
    }
}
