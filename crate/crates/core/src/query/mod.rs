//! The analytical query subset: one aggregate over a basic graph pattern,
//! optional filters, grouped by a set of variables.

mod parser;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::term::Term;

pub use parser::parse_query;

/// A query variable, stored without the leading `?`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Variable(String);

impl Variable {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let name = name.strip_prefix(['?', '$']).map(String::from).unwrap_or(name);
        if name.is_empty() {
            return Err(Error::Semantic("empty variable name".into()));
        }
        if !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(Error::Semantic(format!("invalid variable name `{name}`")));
        }
        Ok(Variable(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternTerm {
    Const(Term),
    Var(Variable),
}

impl PatternTerm {
    pub fn var(&self) -> Option<&Variable> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Const(_) => None,
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Const(t) => write!(f, "{t}"),
            PatternTerm::Var(v) => write!(f, "{v}"),
        }
    }
}

impl From<Variable> for PatternTerm {
    fn from(v: Variable) -> Self {
        PatternTerm::Var(v)
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Const(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TriplePattern {
    pub s: PatternTerm,
    pub p: PatternTerm,
    pub o: PatternTerm,
}

impl TriplePattern {
    pub fn new(s: impl Into<PatternTerm>, p: impl Into<PatternTerm>, o: impl Into<PatternTerm>) -> Result<Self> {
        let tp = TriplePattern {
            s: s.into(),
            p: p.into(),
            o: o.into(),
        };
        tp.validate()?;
        Ok(tp)
    }

    fn validate(&self) -> Result<()> {
        if let PatternTerm::Const(t) = &self.p {
            if !t.is_iri() {
                return Err(Error::Semantic(format!("predicate {t} is not an IRI")));
            }
        }
        if let PatternTerm::Const(t) = &self.s {
            if t.is_literal() {
                return Err(Error::Semantic(format!("literal subject {t}")));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        [&self.s, &self.p, &self.o].into_iter().filter_map(PatternTerm::var)
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.s, self.p, self.o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Comparator {
    #[cfg_attr(feature = "serde", serde(rename = "="))]
    Eq,
    #[cfg_attr(feature = "serde", serde(rename = "!="))]
    Ne,
    #[cfg_attr(feature = "serde", serde(rename = "<"))]
    Lt,
    #[cfg_attr(feature = "serde", serde(rename = "<="))]
    Le,
    #[cfg_attr(feature = "serde", serde(rename = ">"))]
    Gt,
    #[cfg_attr(feature = "serde", serde(rename = ">="))]
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

/// `FILTER(?var CMP constant)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FilterExpr {
    pub variable: Variable,
    pub comparator: Comparator,
    pub constant: Term,
}

impl FilterExpr {
    pub fn new(variable: Variable, comparator: Comparator, constant: Term) -> Result<Self> {
        if comparator.is_ordering() && constant.numeric().is_none() {
            return Err(Error::Semantic(format!(
                "comparator `{}` needs a numeric constant, got {constant}",
                comparator.symbol()
            )));
        }
        Ok(FilterExpr {
            variable,
            comparator,
            constant,
        })
    }

    /// Whether `value` passes. Equality is numeric when both sides are
    /// numeric, term identity otherwise; ordering needs numbers on both sides.
    pub fn accepts(&self, value: &Term) -> bool {
        use core::cmp::Ordering::*;
        let numeric = value.numeric().zip(self.constant.numeric());
        match self.comparator {
            Comparator::Eq | Comparator::Ne => {
                let equal = match numeric {
                    Some((a, b)) => a.compare(b) == Some(Equal),
                    None => value == &self.constant,
                };
                equal == (self.comparator == Comparator::Eq)
            }
            cmp => {
                let Some(ord) = numeric.and_then(|(a, b)| a.compare(b)) else {
                    return false;
                };
                match cmp {
                    Comparator::Lt => ord == Less,
                    Comparator::Le => ord != Greater,
                    Comparator::Gt => ord == Greater,
                    Comparator::Ge => ord != Less,
                    Comparator::Eq | Comparator::Ne => unreachable!(),
                }
            }
        }
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "FILTER({} {} {})",
            self.variable,
            self.comparator.symbol(),
            self.constant
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum AggOp {
    Sum,
    Avg,
    Count,
    Max,
    Min,
}

impl AggOp {
    /// One-hot ordering used by feature vectors.
    pub const ALL: [AggOp; 5] = [AggOp::Sum, AggOp::Avg, AggOp::Count, AggOp::Max, AggOp::Min];

    pub fn keyword(self) -> &'static str {
        match self {
            AggOp::Sum => "SUM",
            AggOp::Avg => "AVG",
            AggOp::Count => "COUNT",
            AggOp::Max => "MAX",
            AggOp::Min => "MIN",
        }
    }

    pub fn from_keyword(kw: &str) -> Option<Self> {
        AggOp::ALL.into_iter().find(|op| op.keyword().eq_ignore_ascii_case(kw))
    }
}

impl fmt::Display for AggOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// `SELECT X agg(u) WHERE P GROUP BY X`, validated on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AnalyticalQuery {
    group_vars: Vec<Variable>,
    pattern: Vec<TriplePattern>,
    filters: Vec<FilterExpr>,
    agg_op: AggOp,
    agg_var: Variable,
    result_var: Variable,
}

impl AnalyticalQuery {
    pub fn new(
        group_vars: Vec<Variable>,
        pattern: Vec<TriplePattern>,
        filters: Vec<FilterExpr>,
        agg_op: AggOp,
        agg_var: Variable,
        result_var: Variable,
    ) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::Semantic("empty graph pattern".into()));
        }
        let mut seen = BTreeSet::new();
        let mut unique_pattern = Vec::with_capacity(pattern.len());
        for tp in pattern {
            tp.validate()?;
            if seen.insert(tp.clone()) {
                unique_pattern.push(tp);
            }
        }
        let vars: BTreeSet<&Variable> = unique_pattern.iter().flat_map(|tp| tp.variables()).collect();
        let mut grouped = BTreeSet::new();
        for v in &group_vars {
            if !vars.contains(v) {
                return Err(Error::Semantic(format!(
                    "GROUP BY variable {v} does not occur in WHERE"
                )));
            }
            if !grouped.insert(v) {
                return Err(Error::Semantic(format!("duplicate GROUP BY variable {v}")));
            }
        }
        if !vars.contains(&agg_var) {
            return Err(Error::Semantic(format!(
                "aggregate variable {agg_var} does not occur in WHERE"
            )));
        }
        if grouped.contains(&agg_var) {
            return Err(Error::Semantic(format!(
                "aggregate variable {agg_var} is also a GROUP BY variable"
            )));
        }
        for f in &filters {
            if !vars.contains(&f.variable) {
                return Err(Error::Semantic(format!(
                    "FILTER variable {} does not occur in WHERE",
                    f.variable
                )));
            }
            if f.comparator.is_ordering() && f.constant.numeric().is_none() {
                return Err(Error::Semantic(format!(
                    "comparator `{}` needs a numeric constant",
                    f.comparator.symbol()
                )));
            }
        }
        if vars.contains(&result_var) {
            return Err(Error::Semantic(format!(
                "result variable {result_var} already occurs in WHERE"
            )));
        }
        Ok(AnalyticalQuery {
            group_vars,
            pattern: unique_pattern,
            filters,
            agg_op,
            agg_var,
            result_var,
        })
    }

    pub fn group_vars(&self) -> &[Variable] {
        &self.group_vars
    }

    pub fn pattern(&self) -> &[TriplePattern] {
        &self.pattern
    }

    pub fn filters(&self) -> &[FilterExpr] {
        &self.filters
    }

    pub fn agg_op(&self) -> AggOp {
        self.agg_op
    }

    pub fn agg_var(&self) -> &Variable {
        &self.agg_var
    }

    pub fn result_var(&self) -> &Variable {
        &self.result_var
    }

    /// All variables mentioned by the pattern, sorted.
    pub fn pattern_vars(&self) -> BTreeSet<&Variable> {
        self.pattern.iter().flat_map(|tp| tp.variables()).collect()
    }

    /// Same pattern and aggregate, different grouping and filters.
    pub fn with_grouping(&self, group_vars: Vec<Variable>, filters: Vec<FilterExpr>) -> Result<Self> {
        AnalyticalQuery::new(
            group_vars,
            self.pattern.clone(),
            filters,
            self.agg_op,
            self.agg_var.clone(),
            self.result_var.clone(),
        )
    }

    /// Renames every variable through `map`; unmapped variables keep their
    /// name.
    pub fn rename(&self, map: &dyn Fn(&Variable) -> Variable) -> Result<Self> {
        let term = |t: &PatternTerm| match t {
            PatternTerm::Var(v) => PatternTerm::Var(map(v)),
            c => c.clone(),
        };
        AnalyticalQuery::new(
            self.group_vars.iter().map(map).collect(),
            self.pattern
                .iter()
                .map(|tp| TriplePattern {
                    s: term(&tp.s),
                    p: term(&tp.p),
                    o: term(&tp.o),
                })
                .collect(),
            self.filters
                .iter()
                .map(|f| FilterExpr {
                    variable: map(&f.variable),
                    comparator: f.comparator,
                    constant: f.constant.clone(),
                })
                .collect(),
            self.agg_op,
            map(&self.agg_var),
            map(&self.result_var),
        )
    }
}

impl fmt::Display for AnalyticalQuery {
    /// Renders in the accepted grammar; the output parses back to an equal
    /// query.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT")?;
        for v in &self.group_vars {
            write!(f, " {v}")?;
        }
        write!(
            f,
            " ({}({}) AS {}) WHERE {{ ",
            self.agg_op, self.agg_var, self.result_var
        )?;
        for (i, tp) in self.pattern.iter().enumerate() {
            if i > 0 {
                f.write_str(" . ")?;
            }
            write!(f, "{tp}")?;
        }
        for filter in &self.filters {
            write!(f, " {filter}")?;
        }
        f.write_str(" }")?;
        if !self.group_vars.is_empty() {
            f.write_str(" GROUP BY")?;
            for v in &self.group_vars {
                write!(f, " {v}")?;
            }
        }
        Ok(())
    }
}
