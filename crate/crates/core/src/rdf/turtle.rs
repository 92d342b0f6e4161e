//! Turtle reader and writer.
//!
//! The reader covers the subset the harness meets in practice: `@prefix` /
//! `PREFIX`, `@base` / `BASE`, the `a` keyword, predicate lists (`;`), object
//! lists (`,`), blank nodes (labelled and `[ ]`), collections, and plain,
//! language-tagged, typed, numeric and boolean literals. Anything else is a
//! [`ParseError`] carrying the line and column where reading stopped.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use thiserror::Error;

use super::graph::{Graph, Triple};
use super::term::{is_absolute_iri, Literal, Term};
use super::vocab::{
    RDF_FIRST, RDF_NIL, RDF_REST, RDF_TYPE, XSD, XSD_BOOLEAN, XSD_DECIMAL, XSD_DOUBLE,
    XSD_INTEGER, XSD_STRING,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("undeclared prefix `{0}:`")]
    UndeclaredPrefix(String),
    #[error("malformed IRI <{0}>")]
    MalformedIri(String),
    #[error("relative IRI <{0}> without @base")]
    RelativeIri(String),
    #[error("unterminated {0}")]
    Unterminated(&'static str),
    #[error("bad literal: {0}")]
    BadLiteral(String),
    #[error("bad escape sequence `{0}`")]
    BadEscape(String),
    #[error("literal used as {0}")]
    LiteralPosition(&'static str),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
}

/// Parses a Turtle document into a [`Graph`].
///
/// Blank nodes are relabelled `b0`, `b1`, ... in order of first appearance,
/// so parsing the same text twice yields identical graphs.
pub fn parse_turtle(document: &str) -> Result<Graph, ParseError> {
    let mut parser = Parser {
        src: document,
        pos: 0,
        graph: Graph::new(),
        prefixes: BTreeMap::new(),
        base: None,
        labels: BTreeMap::new(),
        next_blank: 0,
    };
    parser.document()?;
    Ok(parser.graph)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    graph: Graph,
    prefixes: BTreeMap<String, String>,
    base: Option<String>,
    labels: BTreeMap<String, Term>,
    next_blank: usize,
}

type PResult<T> = Result<T, ParseError>;

fn is_pn_chars_base(c: char) -> bool {
    c.is_alphabetic()
}

fn is_pn_chars_u(c: char) -> bool {
    is_pn_chars_base(c) || c == '_'
}

fn is_pn_chars(c: char) -> bool {
    is_pn_chars_u(c)
        || c == '-'
        || c.is_ascii_digit()
        || c == '\u{B7}'
        || ('\u{300}'..='\u{36F}').contains(&c)
        || ('\u{203F}'..='\u{2040}').contains(&c)
        || c.is_numeric()
}

fn is_local_escapable(c: char) -> bool {
    "_~.-!$&'()*+,;=/?#@%".contains(c)
}

fn describe(c: Option<char>) -> String {
    match c {
        Some(c) => format!("`{}`", c.escape_debug()),
        None => String::from("end of input"),
    }
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        let before = &self.src[..pos];
        let line = before.matches('\n').count() + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = before[line_start..].chars().count() + 1;
        ParseError { line, column, kind }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        self.error_at(self.pos, kind)
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.error(ParseErrorKind::Unexpected {
            expected,
            found: describe(self.peek()),
        })
    }

    fn expect(&mut self, c: char, expected: &'static str) -> PResult<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(expected))
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Case-insensitive keyword followed by whitespace (SPARQL-style directives).
    fn at_keyword(&self, keyword: &str) -> bool {
        let rest = self.rest();
        rest.len() > keyword.len()
            && rest.is_char_boundary(keyword.len())
            && rest[..keyword.len()].eq_ignore_ascii_case(keyword)
            && rest[keyword.len()..]
                .chars()
                .next()
                .is_some_and(char::is_whitespace)
    }

    fn document(&mut self) -> PResult<()> {
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Ok(());
            }
            self.statement()?;
        }
    }

    fn statement(&mut self) -> PResult<()> {
        if self.rest().starts_with("@prefix") {
            self.pos += "@prefix".len();
            self.prefix_decl()?;
            return self.expect('.', "`.` after @prefix");
        }
        if self.rest().starts_with("@base") {
            self.pos += "@base".len();
            self.base_decl()?;
            return self.expect('.', "`.` after @base");
        }
        if self.at_keyword("PREFIX") {
            self.pos += "PREFIX".len();
            return self.prefix_decl();
        }
        if self.at_keyword("BASE") {
            self.pos += "BASE".len();
            return self.base_decl();
        }
        self.triples()?;
        self.skip_ws();
        match self.peek() {
            Some('.') => {
                self.bump();
                Ok(())
            }
            None => Err(self.error(ParseErrorKind::Unterminated("statement"))),
            _ => Err(self.unexpected("`.` ending the statement")),
        }
    }

    fn prefix_decl(&mut self) -> PResult<()> {
        self.skip_ws();
        let start = self.pos;
        let prefix = self.pn_prefix();
        if self.peek() != Some(':') {
            self.pos = start;
            return Err(self.unexpected("prefix name ending in `:`"));
        }
        self.bump();
        self.skip_ws();
        if self.peek() != Some('<') {
            return Err(self.unexpected("namespace IRI"));
        }
        let namespace = self.iri_ref()?;
        self.graph.set_prefix(prefix.clone(), namespace.clone());
        self.prefixes.insert(prefix, namespace);
        Ok(())
    }

    fn base_decl(&mut self) -> PResult<()> {
        self.skip_ws();
        if self.peek() != Some('<') {
            return Err(self.unexpected("base IRI"));
        }
        let base = self.iri_ref()?;
        self.base = Some(base);
        Ok(())
    }

    fn triples(&mut self) -> PResult<()> {
        self.skip_ws();
        match self.peek() {
            Some('[') => {
                let subject = self.blank_node_property_list()?;
                self.skip_ws();
                if self.peek() != Some('.') {
                    self.predicate_object_list(&subject)?;
                }
                Ok(())
            }
            _ => {
                let subject = self.subject()?;
                self.predicate_object_list(&subject)
            }
        }
    }

    fn subject(&mut self) -> PResult<Term> {
        self.skip_ws();
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri_ref()?)),
            Some('_') if self.peek_nth(1) == Some(':') => self.blank_label(),
            Some('(') => self.collection(),
            Some('"') | Some('\'') => Err(self.error(ParseErrorKind::LiteralPosition("subject"))),
            Some(c) if c == ':' || is_pn_chars_base(c) => Ok(Term::Iri(self.prefixed_name()?)),
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' => {
                Err(self.error(ParseErrorKind::LiteralPosition("subject")))
            }
            _ => Err(self.unexpected("subject")),
        }
    }

    fn predicate_object_list(&mut self, subject: &Term) -> PResult<()> {
        loop {
            let predicate = self.verb()?;
            self.object_list(subject, &predicate)?;
            self.skip_ws();
            if self.peek() != Some(';') {
                return Ok(());
            }
            while self.peek() == Some(';') {
                self.bump();
                self.skip_ws();
            }
            match self.peek() {
                Some('.') | Some(']') | None => return Ok(()),
                _ => {}
            }
        }
    }

    fn verb(&mut self) -> PResult<Term> {
        self.skip_ws();
        match self.peek() {
            Some('a') if !self.peek_nth(1).is_some_and(|c| is_pn_chars(c) || c == ':' || c == '.') => {
                self.bump();
                Ok(Term::iri(RDF_TYPE))
            }
            Some('<') => Ok(Term::Iri(self.iri_ref()?)),
            Some(c) if c == ':' || is_pn_chars_base(c) => Ok(Term::Iri(self.prefixed_name()?)),
            Some('"') | Some('\'') => Err(self.error(ParseErrorKind::LiteralPosition("predicate"))),
            Some('_') | Some('[') => Err(self.unexpected("IRI predicate")),
            _ => Err(self.unexpected("predicate")),
        }
    }

    fn object_list(&mut self, subject: &Term, predicate: &Term) -> PResult<()> {
        loop {
            let object = self.object()?;
            self.emit(subject.clone(), predicate.clone(), object)?;
            self.skip_ws();
            if self.peek() == Some(',') {
                self.bump();
            } else {
                return Ok(());
            }
        }
    }

    fn emit(&mut self, subject: Term, predicate: Term, object: Term) -> PResult<()> {
        let triple = Triple::new(subject, predicate, object).map_err(|e| {
            self.error(ParseErrorKind::Unexpected {
                expected: "well-formed triple",
                found: e.to_string(),
            })
        })?;
        self.graph.insert(triple);
        Ok(())
    }

    fn object(&mut self) -> PResult<Term> {
        self.skip_ws();
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri_ref()?)),
            Some('_') if self.peek_nth(1) == Some(':') => self.blank_label(),
            Some('[') => self.blank_node_property_list(),
            Some('(') => self.collection(),
            Some('"') | Some('\'') => self.rdf_literal(),
            Some(c) if c.is_ascii_digit() || c == '+' || c == '-' => self.numeric_literal(),
            Some('.') if self.peek_nth(1).is_some_and(|c| c.is_ascii_digit()) => {
                self.numeric_literal()
            }
            Some(_) if self.at_boolean("true") => Ok(self.boolean("true")),
            Some(_) if self.at_boolean("false") => Ok(self.boolean("false")),
            Some(c) if c == ':' || is_pn_chars_base(c) => Ok(Term::Iri(self.prefixed_name()?)),
            None => Err(self.error(ParseErrorKind::Unterminated("statement"))),
            _ => Err(self.unexpected("object")),
        }
    }

    fn at_boolean(&self, word: &str) -> bool {
        self.rest().starts_with(word)
            && !self.rest()[word.len()..]
                .chars()
                .next()
                .is_some_and(|c| is_pn_chars(c) || c == ':')
    }

    fn boolean(&mut self, word: &str) -> Term {
        self.pos += word.len();
        Term::Literal(Literal::typed(word, XSD_BOOLEAN))
    }

    fn fresh_blank(&mut self) -> Term {
        let term = Term::Blank(format!("b{}", self.next_blank));
        self.next_blank += 1;
        term
    }

    fn blank_label(&mut self) -> PResult<Term> {
        let start = self.pos;
        self.pos += 2;
        let mut chars: Vec<(char, usize)> = Vec::new();
        match self.peek() {
            Some(c) if is_pn_chars_u(c) || c.is_ascii_digit() => {
                chars.push((c, self.pos));
                self.bump();
            }
            _ => {
                return Err(self.error_at(
                    start,
                    ParseErrorKind::Unexpected {
                        expected: "blank node label",
                        found: describe(self.peek()),
                    },
                ))
            }
        }
        while let Some(c) = self.peek() {
            if is_pn_chars(c) || c == '.' {
                chars.push((c, self.pos));
                self.bump();
            } else {
                break;
            }
        }
        while let Some(&('.', at)) = chars.last() {
            self.pos = at;
            chars.pop();
        }
        let label: String = chars.iter().map(|(c, _)| *c).collect();
        if let Some(term) = self.labels.get(&label) {
            return Ok(term.clone());
        }
        let term = self.fresh_blank();
        self.labels.insert(label, term.clone());
        Ok(term)
    }

    fn blank_node_property_list(&mut self) -> PResult<Term> {
        self.bump(); // '['
        let node = self.fresh_blank();
        self.skip_ws();
        if self.peek() == Some(']') {
            self.bump();
            return Ok(node);
        }
        self.predicate_object_list(&node)?;
        self.skip_ws();
        match self.peek() {
            Some(']') => {
                self.bump();
                Ok(node)
            }
            None => Err(self.error(ParseErrorKind::Unterminated("blank node `[`"))),
            _ => Err(self.unexpected("`]`")),
        }
    }

    fn collection(&mut self) -> PResult<Term> {
        self.bump(); // '('
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.bump();
                    break;
                }
                None => return Err(self.error(ParseErrorKind::Unterminated("collection `(`"))),
                _ => items.push(self.object()?),
            }
        }
        let mut head = Term::iri(RDF_NIL);
        let cells: Vec<Term> = items.iter().map(|_| self.fresh_blank()).collect();
        for (i, item) in items.into_iter().enumerate().rev() {
            let cell = cells[i].clone();
            self.emit(cell.clone(), Term::iri(RDF_FIRST), item)?;
            self.emit(cell.clone(), Term::iri(RDF_REST), head)?;
            head = cell;
        }
        Ok(head)
    }

    fn iri_ref(&mut self) -> PResult<String> {
        let start = self.pos;
        self.bump(); // '<'
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error_at(start, ParseErrorKind::Unterminated("IRI"))),
                Some('>') => break,
                Some('\\') => {
                    let c = self.uchar()?;
                    out.push(c);
                }
                Some(c)
                    if c <= ' ' || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') =>
                {
                    // keep scanning for the closing bracket for a better message
                    out.push(c);
                    while let Some(c) = self.bump() {
                        if c == '>' || c == '\n' {
                            break;
                        }
                        out.push(c);
                    }
                    return Err(self.error_at(start, ParseErrorKind::MalformedIri(out)));
                }
                Some(c) => out.push(c),
            }
        }
        if is_absolute_iri(&out) {
            return Ok(out);
        }
        match &self.base {
            Some(base) => Ok(resolve_iri(base, &out)),
            None => Err(self.error_at(start, ParseErrorKind::RelativeIri(out))),
        }
    }

    /// Reads the body of a `\u` / `\U` escape (the backslash is consumed).
    fn uchar(&mut self) -> PResult<char> {
        let at = self.pos.saturating_sub(1);
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            other => {
                return Err(self.error_at(
                    at,
                    ParseErrorKind::BadEscape(format!("\\{}", other.map(String::from).unwrap_or_default())),
                ))
            }
        };
        let rest = self.rest();
        let hex = rest.get(..width).filter(|h| h.chars().all(|c| c.is_ascii_hexdigit()));
        let Some(hex) = hex else {
            return Err(self.error_at(at, ParseErrorKind::BadEscape(String::from("\\u"))));
        };
        let code = u32::from_str_radix(hex, 16).ok().and_then(char::from_u32);
        match code {
            Some(c) => {
                self.pos += width;
                Ok(c)
            }
            None => Err(self.error_at(at, ParseErrorKind::BadEscape(format!("\\u{hex}")))),
        }
    }

    fn pn_prefix(&mut self) -> String {
        let start = self.pos;
        match self.peek() {
            Some(c) if is_pn_chars_base(c) => {
                self.bump();
            }
            _ => return String::new(),
        }
        let mut last_good = self.pos;
        while let Some(c) = self.peek() {
            if is_pn_chars(c) {
                self.bump();
                last_good = self.pos;
            } else if c == '.' {
                self.bump();
            } else {
                break;
            }
        }
        self.pos = last_good;
        String::from(&self.src[start..last_good])
    }

    fn prefixed_name(&mut self) -> PResult<String> {
        let start = self.pos;
        let prefix = self.pn_prefix();
        if self.peek() != Some(':') {
            self.pos = start;
            return Err(self.unexpected("IRI or prefixed name"));
        }
        self.bump();
        let local = self.pn_local()?;
        match self.prefixes.get(&prefix) {
            Some(ns) => {
                let mut iri = ns.clone();
                iri.push_str(&local);
                Ok(iri)
            }
            None => Err(self.error_at(start, ParseErrorKind::UndeclaredPrefix(prefix))),
        }
    }

    fn pn_local(&mut self) -> PResult<String> {
        // (decoded char, start offset, was escaped)
        let mut parts: Vec<(String, usize, bool)> = Vec::new();
        loop {
            let at = self.pos;
            let first = parts.is_empty();
            match self.peek() {
                Some('%') => {
                    let hex = self.rest().get(1..3);
                    match hex {
                        Some(h) if h.chars().all(|c| c.is_ascii_hexdigit()) => {
                            parts.push((format!("%{h}"), at, true));
                            self.pos += 3;
                        }
                        _ => return Err(self.error(ParseErrorKind::BadEscape(String::from("%")))),
                    }
                }
                Some('\\') => match self.peek_nth(1) {
                    Some(c) if is_local_escapable(c) => {
                        parts.push((String::from(c), at, true));
                        self.pos += 1 + c.len_utf8();
                    }
                    other => {
                        return Err(self.error(ParseErrorKind::BadEscape(format!(
                            "\\{}",
                            other.map(String::from).unwrap_or_default()
                        ))))
                    }
                },
                Some(c) if is_pn_chars_u(c) || c == ':' || c.is_ascii_digit() => {
                    parts.push((String::from(c), at, false));
                    self.bump();
                }
                Some(c) if !first && (is_pn_chars(c) || c == '.') => {
                    parts.push((String::from(c), at, false));
                    self.bump();
                }
                _ => break,
            }
        }
        while let Some((s, at, false)) = parts.last() {
            if s != "." {
                break;
            }
            self.pos = *at;
            parts.pop();
        }
        Ok(parts.into_iter().map(|(s, _, _)| s).collect())
    }

    fn rdf_literal(&mut self) -> PResult<Term> {
        let lexical = self.string()?;
        match self.peek() {
            Some('@') => {
                let at = self.pos;
                self.bump();
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let tag = &self.src[start..self.pos];
                let valid = !tag.is_empty()
                    && tag.split('-').enumerate().all(|(i, part)| {
                        !part.is_empty()
                            && if i == 0 {
                                part.chars().all(|c| c.is_ascii_alphabetic())
                            } else {
                                part.chars().all(|c| c.is_ascii_alphanumeric())
                            }
                    });
                if !valid {
                    return Err(self.error_at(at, ParseErrorKind::BadLiteral(format!("language tag `@{tag}`"))));
                }
                Ok(Term::Literal(Literal::lang(lexical, tag.to_ascii_lowercase())))
            }
            Some('^') if self.peek_nth(1) == Some('^') => {
                self.pos += 2;
                let datatype = match self.peek() {
                    Some('<') => self.iri_ref()?,
                    Some(c) if c == ':' || is_pn_chars_base(c) => self.prefixed_name()?,
                    _ => return Err(self.unexpected("datatype IRI")),
                };
                Ok(Term::Literal(Literal::typed(lexical, datatype)))
            }
            _ => Ok(Term::Literal(Literal::string(lexical))),
        }
    }

    fn string(&mut self) -> PResult<String> {
        let start = self.pos;
        let quote = self.bump().unwrap_or('"');
        let long = self.peek() == Some(quote) && self.peek_nth(1) == Some(quote);
        if long {
            self.pos += 2;
        }
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.error_at(start, ParseErrorKind::Unterminated("string literal")));
            };
            match c {
                '\\' => {
                    let at = self.pos - 1;
                    match self.peek() {
                        Some('u') | Some('U') => out.push(self.uchar()?),
                        Some(e) => {
                            let decoded = match e {
                                't' => '\t',
                                'b' => '\u{8}',
                                'n' => '\n',
                                'r' => '\r',
                                'f' => '\u{c}',
                                '"' => '"',
                                '\'' => '\'',
                                '\\' => '\\',
                                other => {
                                    return Err(self.error_at(at, ParseErrorKind::BadEscape(format!("\\{other}"))))
                                }
                            };
                            self.bump();
                            out.push(decoded);
                        }
                        None => {
                            return Err(self.error_at(start, ParseErrorKind::Unterminated("string literal")))
                        }
                    }
                }
                c if c == quote => {
                    if !long {
                        return Ok(out);
                    }
                    if self.peek() == Some(quote) && self.peek_nth(1) == Some(quote) {
                        // a closing triple quote may be preceded by up to two quote chars
                        let mut run = 3;
                        while self.peek_nth(run - 1) == Some(quote) {
                            run += 1;
                        }
                        for _ in 0..run - 3 {
                            out.push(quote);
                        }
                        self.pos += (run - 1) * quote.len_utf8();
                        return Ok(out);
                    }
                    out.push(c);
                }
                '\n' | '\r' if !long => {
                    return Err(self.error_at(start, ParseErrorKind::Unterminated("string literal")));
                }
                c => out.push(c),
            }
        }
    }

    fn numeric_literal(&mut self) -> PResult<Term> {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.bump();
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.bump();
            }
            p.pos - s
        };
        let int_digits = digits(self);
        let mut frac_digits = 0;
        let mut has_dot = false;
        if self.peek() == Some('.') {
            let next = self.peek_nth(1);
            let exp_follows = matches!(next, Some('e') | Some('E')) && int_digits > 0;
            if next.is_some_and(|c| c.is_ascii_digit()) || exp_follows {
                self.bump();
                has_dot = true;
                frac_digits = digits(self);
            }
        }
        let mut has_exp = false;
        if matches!(self.peek(), Some('e') | Some('E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error_at(start, ParseErrorKind::BadLiteral(String::from("exponent without digits"))));
            }
            has_exp = true;
        }
        if int_digits + frac_digits == 0 {
            return Err(self.error_at(
                start,
                ParseErrorKind::BadLiteral(format!("`{}`", &self.src[start..self.pos])),
            ));
        }
        let lexical = &self.src[start..self.pos];
        let datatype = if has_exp {
            XSD_DOUBLE
        } else if has_dot {
            XSD_DECIMAL
        } else {
            XSD_INTEGER
        };
        Ok(Term::Literal(Literal::typed(lexical, datatype)))
    }
}

/// Resolves `reference` against an absolute `base` (RFC 3986, section 5.2).
pub fn resolve_iri(base: &str, reference: &str) -> String {
    if is_absolute_iri(reference) {
        return String::from(reference);
    }
    let (scheme, rest) = base.split_once(':').unwrap_or(("", base));
    let (authority, path_query) = match rest.strip_prefix("//") {
        Some(r) => {
            let end = r.find(['/', '?', '#']).unwrap_or(r.len());
            (Some(&r[..end]), &r[end..])
        }
        None => (None, rest),
    };
    let base_no_frag = path_query.split('#').next().unwrap_or("");
    let (base_path, base_query) = match base_no_frag.split_once('?') {
        Some((p, q)) => (p, Some(q)),
        None => (base_no_frag, None),
    };
    let mut out = String::new();
    out.push_str(scheme);
    out.push(':');
    if let Some(r) = reference.strip_prefix("//") {
        out.push_str("//");
        out.push_str(r);
        return out;
    }
    if let Some(a) = authority {
        out.push_str("//");
        out.push_str(a);
    }
    if reference.is_empty() {
        out.push_str(base_path);
        if let Some(q) = base_query {
            out.push('?');
            out.push_str(q);
        }
    } else if reference.starts_with('#') {
        out.push_str(base_path);
        if let Some(q) = base_query {
            out.push('?');
            out.push_str(q);
        }
        out.push_str(reference);
    } else if reference.starts_with('?') {
        out.push_str(base_path);
        out.push_str(reference);
    } else if reference.starts_with('/') {
        out.push_str(&remove_dot_segments(reference));
    } else {
        let dir = match base_path.rfind('/') {
            Some(i) => &base_path[..=i],
            None if authority.is_some() => "/",
            None => "",
        };
        let (ref_path, tail) = match reference.find(['?', '#']) {
            Some(i) => (&reference[..i], &reference[i..]),
            None => (reference, ""),
        };
        let merged = format!("{dir}{ref_path}");
        out.push_str(&remove_dot_segments(&merged));
        out.push_str(tail);
    }
    out
}

fn remove_dot_segments(path: &str) -> String {
    let mut stack: Vec<&str> = Vec::new();
    let absolute = path.starts_with('/');
    let segments: Vec<&str> = path.split('/').collect();
    let last = segments.len().saturating_sub(1);
    let mut trailing_slash = false;
    for (i, seg) in segments.iter().enumerate() {
        match *seg {
            "." => trailing_slash = i == last,
            ".." => {
                if stack.len() > usize::from(absolute) {
                    stack.pop();
                }
                trailing_slash = i == last;
            }
            s => {
                stack.push(s);
                trailing_slash = false;
            }
        }
    }
    let mut out = stack.join("/");
    if absolute && !out.starts_with('/') {
        out.insert(0, '/');
    }
    if trailing_slash && !out.ends_with('/') {
        out.push('/');
    }
    out
}

/// Writes `graph` as Turtle. The output re-parses to a graph isomorphic to
/// `graph`; with no blank nodes it re-parses to an equal graph.
pub fn serialize_turtle(graph: &Graph) -> String {
    let mut out = String::new();
    let prefixes: Vec<(&String, &String)> = graph
        .prefixes()
        .iter()
        .filter(|(p, ns)| valid_prefix_name(p) && is_absolute_iri(ns))
        .collect();
    for (prefix, ns) in &prefixes {
        let _ = writeln!(out, "@prefix {prefix}: <{}> .", escape_iri(ns));
    }
    if !prefixes.is_empty() && !graph.is_empty() {
        out.push('\n');
    }

    let mut blank_ids: BTreeMap<&str, usize> = BTreeMap::new();
    for t in graph.iter() {
        for term in [t.subject(), t.object()] {
            if let Term::Blank(label) = term {
                let next = blank_ids.len();
                blank_ids.entry(label.as_str()).or_insert(next);
            }
        }
    }
    let writer = TermWriter {
        prefixes: &prefixes,
        blank_ids: &blank_ids,
    };

    let mut current_subject: Option<&Term> = None;
    let mut current_predicate: Option<&Term> = None;
    for t in graph.iter() {
        if current_subject != Some(t.subject()) {
            if current_subject.is_some() {
                out.push_str(" .\n");
            }
            writer.write(&mut out, t.subject());
            out.push(' ');
            writer.write_predicate(&mut out, t.predicate());
            out.push(' ');
            current_subject = Some(t.subject());
            current_predicate = Some(t.predicate());
        } else if current_predicate != Some(t.predicate()) {
            out.push_str(" ;\n    ");
            writer.write_predicate(&mut out, t.predicate());
            out.push(' ');
            current_predicate = Some(t.predicate());
        } else {
            out.push_str(", ");
        }
        writer.write(&mut out, t.object());
    }
    if current_subject.is_some() {
        out.push_str(" .\n");
    }
    out
}

struct TermWriter<'a> {
    prefixes: &'a [(&'a String, &'a String)],
    blank_ids: &'a BTreeMap<&'a str, usize>,
}

impl TermWriter<'_> {
    fn write_predicate(&self, out: &mut String, term: &Term) {
        if term.as_iri() == Some(RDF_TYPE) {
            out.push('a');
        } else {
            self.write(out, term);
        }
    }

    fn write(&self, out: &mut String, term: &Term) {
        match term {
            Term::Iri(iri) => self.write_iri(out, iri),
            Term::Blank(label) => {
                let _ = write!(out, "_:b{}", self.blank_ids[label.as_str()]);
            }
            Term::Literal(lit) => {
                out.push('"');
                for c in lit.lexical.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\r' => out.push_str("\\r"),
                        '\t' => out.push_str("\\t"),
                        '\u{8}' => out.push_str("\\b"),
                        '\u{c}' => out.push_str("\\f"),
                        c => out.push(c),
                    }
                }
                out.push('"');
                if let Some(lang) = &lit.language {
                    out.push('@');
                    out.push_str(lang);
                } else if lit.datatype != XSD_STRING {
                    out.push_str("^^");
                    self.write_iri(out, &lit.datatype);
                }
            }
        }
    }

    fn write_iri(&self, out: &mut String, iri: &str) {
        let best = self
            .prefixes
            .iter()
            .filter(|(_, ns)| iri.starts_with(ns.as_str()) && valid_local_name(&iri[ns.len()..]))
            .max_by_key(|(_, ns)| ns.len());
        match best {
            Some((prefix, ns)) => {
                let _ = write!(out, "{prefix}:{}", &iri[ns.len()..]);
            }
            None => {
                let _ = write!(out, "<{}>", escape_iri(iri));
            }
        }
    }
}

fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if c <= ' ' || matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') {
            let _ = write!(out, "\\u{:04X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

fn valid_prefix_name(prefix: &str) -> bool {
    let mut chars = prefix.chars();
    match chars.next() {
        None => true,
        Some(c) if is_pn_chars_base(c) => {
            prefix.chars().all(|c| is_pn_chars(c) || c == '.') && !prefix.ends_with('.')
        }
        Some(_) => false,
    }
}

/// Conservative check for locals that can be written without escapes.
fn valid_local_name(local: &str) -> bool {
    let mut chars = local.chars();
    match chars.next() {
        None => return true,
        Some(c) if is_pn_chars_u(c) || c.is_ascii_digit() => {}
        Some(_) => return false,
    }
    local.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !local.ends_with('.')
        && local.chars().all(|c| c.is_ascii() || c.is_alphanumeric())
}

/// Namespace-qualified name for `iri` using `graph`'s prefixes, for messages.
pub fn compact_iri(prefixes: &BTreeMap<String, String>, iri: &str) -> String {
    prefixes
        .iter()
        .filter(|(_, ns)| iri.starts_with(ns.as_str()) && iri.len() > ns.len())
        .max_by_key(|(_, ns)| ns.len())
        .map(|(p, ns)| format!("{p}:{}", &iri[ns.len()..]))
        .unwrap_or_else(|| {
            if let Some(local) = iri.strip_prefix(XSD) {
                format!("xsd:{local}")
            } else {
                format!("<{iri}>")
            }
        })
}
