//! N-Triples reading and writing.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use sofos_core::graph::{Graph, GraphBuilder};
use sofos_core::term::Term;

use crate::error::{Result, SofosError};

struct Line<'a> {
    text: &'a str,
    pos: usize,
    number: usize,
}

impl<'a> Line<'a> {
    fn err(&self, message: impl Into<String>) -> SofosError {
        SofosError::Parse {
            line: self.number,
            message: format!("{} (column {})", message.into(), self.pos + 1),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start_matches([' ', '\t']);
        self.pos = self.text.len() - trimmed.len();
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.bump() {
            Some(x) if x == c => Ok(()),
            Some(x) => Err(self.err(format!("expected `{c}`, found `{x}`"))),
            None => Err(self.err(format!("expected `{c}`, found end of line"))),
        }
    }

    fn hex_escape(&mut self, digits: usize) -> Result<char> {
        let start = self.pos;
        for _ in 0..digits {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => {}
                _ => return Err(self.err("malformed \\u escape")),
            }
        }
        let code = u32::from_str_radix(&self.text[start..self.pos], 16).expect("hex digits");
        char::from_u32(code).ok_or_else(|| self.err(format!("invalid code point U+{code:X}")))
    }

    fn iri(&mut self) -> Result<String> {
        self.expect('<')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated IRI")),
                Some('>') => break,
                Some('\\') => match self.bump() {
                    Some('u') => out.push(self.hex_escape(4)?),
                    Some('U') => out.push(self.hex_escape(8)?),
                    _ => return Err(self.err("bad escape in IRI")),
                },
                Some(c) if c.is_whitespace() || "<\"{}|^`".contains(c) => {
                    return Err(self.err(format!("character `{c}` not allowed in IRI")))
                }
                Some(c) => out.push(c),
            }
        }
        if out.is_empty() {
            return Err(self.err("empty IRI"));
        }
        Ok(out)
    }

    fn blank(&mut self) -> Result<String> {
        self.expect('_')?;
        self.expect(':')?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || "_-.".contains(c) {
                self.bump();
            } else {
                break;
            }
        }
        // A trailing dot ends the statement, not the label.
        while self.text[start..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        if self.pos == start {
            return Err(self.err("empty blank node label"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn literal(&mut self) -> Result<Term> {
        self.expect('"')?;
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err("unterminated string literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex_escape(4)?,
                        Some('U') => self.hex_escape(8)?,
                        _ => return Err(self.err("bad escape in string literal")),
                    };
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        match self.peek() {
            Some('@') => {
                self.bump();
                let start = self.pos;
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == '-' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                if self.pos == start {
                    return Err(self.err("empty language tag"));
                }
                Ok(Term::lang_string(lexical, &self.text[start..self.pos]))
            }
            Some('^') => {
                self.bump();
                self.expect('^')?;
                let dt = self.iri()?;
                Term::typed(lexical, dt).map_err(|e| self.err(e.to_string()))
            }
            _ => Ok(Term::plain(lexical)),
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri()?)),
            Some('_') => Ok(Term::BlankNode(self.blank()?)),
            Some('"') => self.literal(),
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of line")),
        }
    }
}

/// Parses one statement line. `Ok(None)` for blank and comment lines.
pub fn parse_line(text: &str, number: usize) -> Result<Option<(Term, Term, Term)>> {
    let mut line = Line { text, pos: 0, number };
    line.skip_ws();
    if matches!(line.peek(), None | Some('#')) {
        return Ok(None);
    }
    let s = line.term()?;
    line.skip_ws();
    let p = line.term()?;
    line.skip_ws();
    let o = line.term()?;
    line.skip_ws();
    line.expect('.')?;
    line.skip_ws();
    if !matches!(line.peek(), None | Some('#')) {
        return Err(line.err("trailing content after `.`"));
    }
    Ok(Some((s, p, o)))
}

/// Reads a whole N-Triples document. Duplicate statements collapse.
pub fn read_graph<R: BufRead>(reader: R) -> Result<Graph> {
    let mut b = GraphBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let number = i + 1;
        let line = line.map_err(|e| SofosError::io(format!("line {number}"), e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if let Some((s, p, o)) = parse_line(line, number)? {
            b.insert(&s, &p, &o).map_err(|e| SofosError::Parse {
                line: number,
                message: e.to_string(),
            })?;
        }
    }
    Ok(b.build())
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    read_graph(text.as_bytes())
}

pub fn load_file(path: &std::path::Path) -> Result<Graph> {
    let f = std::fs::File::open(path).map_err(|e| SofosError::io(path.display().to_string(), e))?;
    read_graph(std::io::BufReader::new(f))
}

fn push_iri(out: &mut String, iri: &str) {
    out.push('<');
    for c in iri.chars() {
        if c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(c) {
            let _ = write!(out, "\\u{:04X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out.push('>');
}

/// N-Triples form of one term. IRIs escape characters the grammar forbids.
pub fn format_term(t: &Term) -> String {
    let mut out = String::new();
    match t {
        Term::Iri(iri) => push_iri(&mut out, iri),
        Term::BlankNode(_) => out = t.to_string(),
        Term::Literal {
            lexical,
            datatype,
            language,
        } => {
            out = Term::plain(lexical.as_str()).to_string();
            if let Some(lang) = language {
                out.push('@');
                out.push_str(lang);
            } else if let Some(dt) = datatype {
                out.push_str("^^");
                push_iri(&mut out, dt);
            }
        }
    }
    out
}

pub fn format_triple(s: &Term, p: &Term, o: &Term) -> String {
    format!("{} {} {} .", format_term(s), format_term(p), format_term(o))
}

pub fn write_triples<'a, W, I>(mut w: W, triples: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a Term, &'a Term, &'a Term)>,
{
    for (s, p, o) in triples {
        writeln!(w, "{}", format_triple(s, p, o))?;
    }
    Ok(())
}

/// The graph in sorted term order, so equal graphs serialize identically.
pub fn serialize_graph(g: &Graph) -> String {
    let mut out = String::new();
    for (s, p, o) in g.term_triples() {
        out.push_str(&format_triple(&s, &p, &o));
        out.push('\n');
    }
    out
}
