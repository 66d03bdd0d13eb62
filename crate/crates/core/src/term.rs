//! RDF terms and the numeric view of literals used by aggregation.

use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;

use crate::error::Error;

pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_FLOAT: &str = "http://www.w3.org/2001/XMLSchema#float";

const XSD_INTEGER_FAMILY: &[&str] = &[
    XSD_INTEGER,
    "http://www.w3.org/2001/XMLSchema#int",
    "http://www.w3.org/2001/XMLSchema#long",
    "http://www.w3.org/2001/XMLSchema#short",
    "http://www.w3.org/2001/XMLSchema#byte",
    "http://www.w3.org/2001/XMLSchema#nonNegativeInteger",
    "http://www.w3.org/2001/XMLSchema#positiveInteger",
    "http://www.w3.org/2001/XMLSchema#negativeInteger",
    "http://www.w3.org/2001/XMLSchema#nonPositiveInteger",
    "http://www.w3.org/2001/XMLSchema#unsignedInt",
    "http://www.w3.org/2001/XMLSchema#unsignedLong",
    "http://www.w3.org/2001/XMLSchema#unsignedShort",
    "http://www.w3.org/2001/XMLSchema#unsignedByte",
];

const XSD_FLOAT_FAMILY: &[&str] = &[XSD_DOUBLE, XSD_DECIMAL, XSD_FLOAT];

/// Kind tag of a [`Term`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TermKind {
    Iri,
    BlankNode,
    Literal,
}

/// An RDF term. IRIs are stored without angle brackets, blank nodes without
/// the `_:` prefix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    BlankNode(String),
    Literal {
        lexical: String,
        datatype: Option<String>,
        language: Option<String>,
    },
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Result<Self, Error> {
        let iri = iri.into();
        if iri.is_empty() {
            return Err(Error::InvalidTerm("empty IRI".into()));
        }
        Ok(Term::Iri(iri))
    }

    pub fn blank(label: impl Into<String>) -> Result<Self, Error> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidTerm("empty blank node label".into()));
        }
        Ok(Term::BlankNode(label))
    }

    /// Plain literal without datatype or language tag.
    pub fn plain(lexical: impl Into<String>) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            datatype: None,
            language: None,
        }
    }

    /// Typed literal. Numeric datatypes must carry a parseable lexical form.
    pub fn typed(lexical: impl Into<String>, datatype: impl Into<String>) -> Result<Self, Error> {
        let lexical = lexical.into();
        let datatype = datatype.into();
        if datatype.is_empty() {
            return Err(Error::InvalidTerm("empty datatype IRI".into()));
        }
        let term = Term::Literal {
            lexical,
            datatype: Some(datatype),
            language: None,
        };
        if term.has_numeric_datatype() && term.numeric().is_none() {
            let Term::Literal { lexical, datatype, .. } = &term else {
                unreachable!()
            };
            return Err(Error::InvalidTerm(alloc::format!(
                "literal \"{lexical}\" is not a valid <{}>",
                datatype.as_deref().unwrap_or_default()
            )));
        }
        Ok(term)
    }

    pub fn lang_string(lexical: impl Into<String>, language: impl Into<String>) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            datatype: None,
            language: Some(language.into()),
        }
    }

    pub fn integer(value: i64) -> Self {
        Term::Literal {
            lexical: value.to_string(),
            datatype: Some(XSD_INTEGER.into()),
            language: None,
        }
    }

    pub fn double(value: f64) -> Self {
        Term::Literal {
            lexical: format_double(value),
            datatype: Some(XSD_DOUBLE.into()),
            language: None,
        }
    }

    /// Literal carrying `n` with the datatype matching its representation.
    pub fn number(n: Number) -> Self {
        match n {
            Number::Int(i) => Term::integer(i),
            Number::Float(f) => Term::double(f),
        }
    }

    pub fn kind(&self) -> TermKind {
        match self {
            Term::Iri(_) => TermKind::Iri,
            Term::BlankNode(_) => TermKind::BlankNode,
            Term::Literal { .. } => TermKind::Literal,
        }
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal { .. })
    }

    /// The lexical value: IRI string, blank label or literal lexical form.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(s) | Term::BlankNode(s) => s,
            Term::Literal { lexical, .. } => lexical,
        }
    }

    fn has_numeric_datatype(&self) -> bool {
        match self {
            Term::Literal { datatype: Some(dt), .. } => {
                XSD_INTEGER_FAMILY.contains(&dt.as_str()) || XSD_FLOAT_FAMILY.contains(&dt.as_str())
            }
            _ => false,
        }
    }

    /// Numeric value of a literal. Untyped literals count as numeric when
    /// their lexical form parses; typed literals only for XSD numeric types.
    /// Integer lexical forms yield [`Number::Int`], everything else
    /// [`Number::Float`].
    pub fn numeric(&self) -> Option<Number> {
        let Term::Literal {
            lexical,
            datatype,
            language,
        } = self
        else {
            return None;
        };
        if language.is_some() {
            return None;
        }
        match datatype.as_deref() {
            None => Number::parse(lexical),
            Some(dt) if XSD_INTEGER_FAMILY.contains(&dt) => lexical.trim().parse::<i64>().ok().map(Number::Int),
            Some(dt) if XSD_FLOAT_FAMILY.contains(&dt) => Number::parse(lexical),
            Some(_) => None,
        }
    }
}

impl fmt::Display for Term {
    /// N-Triples style rendering.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::BlankNode(label) => write!(f, "_:{label}"),
            Term::Literal {
                lexical,
                datatype,
                language,
            } => {
                f.write_str("\"")?;
                for c in lexical.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")?;
                if let Some(lang) = language {
                    write!(f, "@{lang}")
                } else if let Some(dt) = datatype {
                    write!(f, "^^<{dt}>")
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Shortest round-tripping decimal rendering; always contains a `.`, `e`,
/// `inf` or `NaN` so it never reads back as an integer.
pub fn format_double(value: f64) -> String {
    if value.is_infinite() {
        return if value > 0.0 { "INF".into() } else { "-INF".into() };
    }
    alloc::format!("{value:?}")
}

/// Numeric literal value. Integers stay exact; anything else is an `f64`.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(untagged))]
pub enum Number {
    Int(i64),
    Float(f64),
}

impl Number {
    pub fn parse(lexical: &str) -> Option<Number> {
        let s = lexical.trim();
        if s.is_empty() {
            return None;
        }
        if let Ok(i) = s.parse::<i64>() {
            return Some(Number::Int(i));
        }
        // Rust accepts "inf"/"nan" spellings that XSD writes differently.
        match s {
            "INF" | "+INF" => return Some(Number::Float(f64::INFINITY)),
            "-INF" => return Some(Number::Float(f64::NEG_INFINITY)),
            "NaN" => return Some(Number::Float(f64::NAN)),
            _ => {}
        }
        if s.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
            return None;
        }
        s.parse::<f64>().ok().map(Number::Float)
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Number::Int(i) => i as f64,
            Number::Float(f) => f,
        }
    }

    pub fn is_int(self) -> bool {
        matches!(self, Number::Int(_))
    }

    /// Numeric comparison; `None` only when a NaN is involved.
    pub fn compare(self, other: Number) -> Option<Ordering> {
        match (self, other) {
            (Number::Int(a), Number::Int(b)) => Some(a.cmp(&b)),
            (a, b) => a.as_f64().partial_cmp(&b.as_f64()),
        }
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.compare(*other) == Some(Ordering::Equal)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Int(i) => write!(f, "{i}"),
            Number::Float(x) => f.write_str(&format_double(*x)),
        }
    }
}
