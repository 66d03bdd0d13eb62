use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{AggOp, AnalyticalQuery, Comparator, FilterExpr, PatternTerm, TriplePattern, Variable};
use crate::error::{Error, Result};
use crate::term::{Term, XSD_DECIMAL, XSD_DOUBLE, XSD_INTEGER};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    Iri(String),
    Prefixed(String, String),
    Literal {
        lexical: String,
        datatype: Option<DatatypeRef>,
        language: Option<String>,
    },
    Number(String),
    Blank(String),
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
enum DatatypeRef {
    Iri(String),
    Prefixed(String, String),
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        position,
        message: message.into(),
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with('#') {
                let line = trimmed.find('\n').unwrap_or(trimmed.len());
                self.pos += line;
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let end = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        self.pos += end;
        &rest[..end]
    }

    fn tokens(mut self) -> Result<Vec<(usize, Tok)>> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let start = self.pos;
            let Some(c) = self.peek_char() else {
                break;
            };
            let tok = match c {
                '?' | '$' => {
                    self.pos += 1;
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(syntax(start, "empty variable name"));
                    }
                    Tok::Var(name.into())
                }
                '<' => self.angle(start)?,
                '"' | '\'' => self.string(start, c)?,
                '{' | '}' | '(' | ')' | '.' | ',' | '*' => {
                    if c == '.' && self.rest()[1..].starts_with(|d: char| d.is_ascii_digit()) {
                        self.number()
                    } else {
                        self.pos += 1;
                        Tok::Punct(match c {
                            '{' => "{",
                            '}' => "}",
                            '(' => "(",
                            ')' => ")",
                            '.' => ".",
                            ',' => ",",
                            _ => "*",
                        })
                    }
                }
                '=' => {
                    self.pos += 1;
                    Tok::Punct("=")
                }
                '!' => {
                    if self.rest().starts_with("!=") {
                        self.pos += 2;
                        Tok::Punct("!=")
                    } else {
                        return Err(syntax(start, "expected `!=`"));
                    }
                }
                '>' => {
                    if self.rest().starts_with(">=") {
                        self.pos += 2;
                        Tok::Punct(">=")
                    } else {
                        self.pos += 1;
                        Tok::Punct(">")
                    }
                }
                '_' if self.rest().starts_with("_:") => {
                    self.pos += 2;
                    let label = self.take_while(is_name_char);
                    if label.is_empty() {
                        return Err(syntax(start, "empty blank node label"));
                    }
                    Tok::Blank(label.into())
                }
                '+' | '-' | '0'..='9' => self.number(),
                c if c.is_alphabetic() || c == ':' => {
                    let prefix = self.take_while(is_name_char);
                    if self.peek_char() == Some(':') {
                        self.pos += 1;
                        let raw = self.take_while(|c| is_name_char(c) || c == '.');
                        // A trailing '.' ends the triple, not the name.
                        let local = raw.trim_end_matches('.');
                        self.pos -= raw.len() - local.len();
                        Tok::Prefixed(prefix.into(), local.into())
                    } else {
                        Tok::Word(prefix.into())
                    }
                }
                other => return Err(syntax(start, format!("unexpected character `{other}`"))),
            };
            out.push((start, tok));
        }
        Ok(out)
    }

    /// `<` starts an IRI unless it is a comparator: an IRI reference runs to
    /// the next `>` without whitespace.
    fn angle(&mut self, start: usize) -> Result<Tok> {
        let rest = &self.rest()[1..];
        let end = rest.find(|c: char| c == '>' || c.is_whitespace() || c == '<' || c == '"');
        match end {
            Some(i) if rest[i..].starts_with('>') && !rest[..i].starts_with('=') => {
                self.pos += i + 2;
                Ok(Tok::Iri(rest[..i].into()))
            }
            _ if rest.starts_with('=') => {
                self.pos += 2;
                Ok(Tok::Punct("<="))
            }
            _ => {
                let _ = start;
                self.pos += 1;
                Ok(Tok::Punct("<"))
            }
        }
    }

    fn string(&mut self, start: usize, quote: char) -> Result<Tok> {
        self.pos += 1;
        let mut lexical = String::new();
        loop {
            let Some(c) = self.peek_char() else {
                return Err(syntax(start, "unterminated string literal"));
            };
            self.pos += c.len_utf8();
            match c {
                c if c == quote => break,
                '\\' => {
                    let Some(e) = self.peek_char() else {
                        return Err(syntax(start, "unterminated escape"));
                    };
                    self.pos += 1;
                    lexical.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        other => return Err(syntax(self.pos - 1, format!("bad escape `\\{other}`"))),
                    });
                }
                c => lexical.push(c),
            }
        }
        let mut datatype = None;
        let mut language = None;
        if self.rest().starts_with('@') {
            self.pos += 1;
            let tag = self.take_while(|c| c.is_alphanumeric() || c == '-');
            if tag.is_empty() {
                return Err(syntax(self.pos, "empty language tag"));
            }
            language = Some(tag.into());
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            let at = self.pos;
            match self.peek_char() {
                Some('<') => match self.angle(at)? {
                    Tok::Iri(iri) => datatype = Some(DatatypeRef::Iri(iri)),
                    _ => return Err(syntax(at, "expected datatype IRI")),
                },
                _ => {
                    let prefix = self.take_while(is_name_char);
                    if self.peek_char() != Some(':') {
                        return Err(syntax(at, "expected datatype IRI"));
                    }
                    self.pos += 1;
                    let local = self.take_while(is_name_char);
                    datatype = Some(DatatypeRef::Prefixed(prefix.into(), local.into()));
                }
            }
        }
        Ok(Tok::Literal {
            lexical,
            datatype,
            language,
        })
    }

    fn number(&mut self) -> Tok {
        let start = self.pos;
        if matches!(self.peek_char(), Some('+' | '-')) {
            self.pos += 1;
        }
        self.take_while(|c| c.is_ascii_digit());
        if self.rest().starts_with('.') && self.rest()[1..].starts_with(|c: char| c.is_ascii_digit()) {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        }
        if self.rest().starts_with(['e', 'E']) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek_char(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            }
        }
        Tok::Number(self.src[start..self.pos].into())
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    idx: usize,
    end: usize,
    prefixes: BTreeMap<String, String>,
}

impl Parser {
    fn pos(&self) -> usize {
        self.toks.get(self.idx).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.idx).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.idx).map(|(_, t)| t.clone());
        self.idx += 1;
        t
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.idx += 1;
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{kw}`")))
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn expect_punct(&mut self, p: &str) -> Result<()> {
        if self.is_punct(p) {
            self.idx += 1;
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected `{p}`")))
        }
    }

    fn var(&mut self) -> Result<Variable> {
        let at = self.pos();
        match self.next() {
            Some(Tok::Var(name)) => Variable::new(name),
            _ => Err(syntax(at, "expected variable")),
        }
    }

    fn expand(&self, at: usize, prefix: &str, local: &str) -> Result<String> {
        match self.prefixes.get(prefix) {
            Some(ns) => Ok(format!("{ns}{local}")),
            None => Err(syntax(at, format!("undeclared prefix `{prefix}:`"))),
        }
    }

    fn constant(&mut self) -> Result<Term> {
        let at = self.pos();
        match self.next() {
            Some(Tok::Iri(iri)) => Term::iri(iri),
            Some(Tok::Prefixed(p, l)) => Term::iri(self.expand(at, &p, &l)?),
            Some(Tok::Blank(label)) => Term::blank(label),
            Some(Tok::Number(n)) => {
                let dt = if n.contains(['e', 'E']) {
                    XSD_DOUBLE
                } else if n.contains('.') {
                    XSD_DECIMAL
                } else {
                    XSD_INTEGER
                };
                Term::typed(n, dt).map_err(|e| syntax(at, e.to_string()))
            }
            Some(Tok::Literal {
                lexical,
                datatype,
                language,
            }) => match (datatype, language) {
                (Some(DatatypeRef::Iri(dt)), _) => Term::typed(lexical, dt).map_err(|e| syntax(at, e.to_string())),
                (Some(DatatypeRef::Prefixed(p, l)), _) => {
                    let dt = self.expand(at, &p, &l)?;
                    Term::typed(lexical, dt).map_err(|e| syntax(at, e.to_string()))
                }
                (None, Some(lang)) => Ok(Term::lang_string(lexical, lang)),
                (None, None) => Ok(Term::plain(lexical)),
            },
            Some(Tok::Word(w)) if w == "a" => Term::iri(RDF_TYPE),
            _ => Err(syntax(at, "expected a term")),
        }
    }

    fn pattern_term(&mut self) -> Result<PatternTerm> {
        if matches!(self.peek(), Some(Tok::Var(_))) {
            Ok(PatternTerm::Var(self.var()?))
        } else {
            Ok(PatternTerm::Const(self.constant()?))
        }
    }

    fn comparator(&mut self) -> Result<Comparator> {
        let at = self.pos();
        match self.next() {
            Some(Tok::Punct(p)) => match p {
                "=" => Ok(Comparator::Eq),
                "!=" => Ok(Comparator::Ne),
                "<" => Ok(Comparator::Lt),
                "<=" => Ok(Comparator::Le),
                ">" => Ok(Comparator::Gt),
                ">=" => Ok(Comparator::Ge),
                _ => Err(syntax(at, "expected comparator")),
            },
            _ => Err(syntax(at, "expected comparator")),
        }
    }

    fn filter(&mut self) -> Result<FilterExpr> {
        self.expect_keyword("FILTER")?;
        self.expect_punct("(")?;
        let variable = self.var()?;
        let comparator = self.comparator()?;
        let constant = self.constant()?;
        self.expect_punct(")")?;
        FilterExpr::new(variable, comparator, constant)
    }

    fn query(&mut self) -> Result<AnalyticalQuery> {
        while self.is_keyword("PREFIX") {
            self.idx += 1;
            let at = self.pos();
            let prefix = match self.next() {
                Some(Tok::Prefixed(p, l)) if l.is_empty() => p,
                _ => return Err(syntax(at, "expected `prefix:`")),
            };
            let at = self.pos();
            let Some(Tok::Iri(ns)) = self.next() else {
                return Err(syntax(at, "expected namespace IRI"));
            };
            self.prefixes.insert(prefix, ns);
        }

        self.expect_keyword("SELECT")?;
        let mut projected = Vec::new();
        while matches!(self.peek(), Some(Tok::Var(_))) {
            projected.push((self.pos(), self.var()?));
        }
        self.expect_punct("(")?;
        let at = self.pos();
        let agg_op = match self.next() {
            Some(Tok::Word(kw)) => {
                AggOp::from_keyword(&kw).ok_or_else(|| Error::Semantic(format!("unsupported aggregate `{kw}`")))?
            }
            _ => return Err(syntax(at, "expected aggregate")),
        };
        self.expect_punct("(")?;
        let agg_var = self.var()?;
        self.expect_punct(")")?;
        self.expect_keyword("AS")?;
        let result_var = self.var()?;
        self.expect_punct(")")?;

        self.expect_keyword("WHERE")?;
        self.expect_punct("{")?;
        let mut pattern = Vec::new();
        let mut filters = Vec::new();
        loop {
            if self.is_punct("}") {
                self.idx += 1;
                break;
            }
            if self.is_keyword("FILTER") {
                filters.push(self.filter()?);
                continue;
            }
            if self.is_punct(".") && !pattern.is_empty() {
                self.idx += 1;
                continue;
            }
            let at = self.pos();
            let s = self.pattern_term()?;
            let p = self.pattern_term()?;
            let o = self.pattern_term()?;
            let tp = TriplePattern::new(s, p, o).map_err(|e| match e {
                Error::Semantic(m) => syntax(at, m),
                e => e,
            })?;
            pattern.push(tp);
            if !(self.is_punct(".") || self.is_punct("}") || self.is_keyword("FILTER")) {
                return Err(syntax(self.pos(), "expected `.` or `}`"));
            }
        }

        let mut group_vars = Vec::new();
        if self.is_keyword("GROUP") {
            self.idx += 1;
            self.expect_keyword("BY")?;
            group_vars.push(self.var()?);
            while matches!(self.peek(), Some(Tok::Var(_))) {
                group_vars.push(self.var()?);
            }
        }
        if self.idx < self.toks.len() {
            return Err(syntax(self.pos(), "unexpected trailing input"));
        }
        for (at, v) in &projected {
            if !group_vars.contains(v) {
                return Err(Error::Semantic(format!(
                    "projected variable {v} (offset {at}) is not grouped"
                )));
            }
        }
        AnalyticalQuery::new(group_vars, pattern, filters, agg_op, agg_var, result_var)
    }
}

/// Parses the analytical subset:
///
/// ```text
/// PREFIX* SELECT var* ( AGG ( var ) AS var )
///   WHERE { triplePattern ( . triplePattern )* FILTER( var CMP const )* }
///   GROUP BY var+
/// ```
///
/// Keywords are case-insensitive. The `GROUP BY` clause may be omitted
/// when nothing is projected, which is how the all-rows view renders.
pub fn parse_query(text: &str) -> Result<AnalyticalQuery> {
    let toks = Lexer { src: text, pos: 0 }.tokens()?;
    let mut parser = Parser {
        toks,
        idx: 0,
        end: text.len(),
        prefixes: BTreeMap::new(),
    };
    parser.query()
}
