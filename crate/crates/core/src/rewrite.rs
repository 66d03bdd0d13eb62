//! Answering queries from materialized views.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{evaluate, finish_groups, row_layout, visit_bgp, GroupPartials, Partial, Sum};
use crate::graph::{Graph, TermId};
use crate::lattice::Lattice;
use crate::materialize::{
    dim_predicate, ExpandedGraph, MaterializedView, AGG_COUNT, AGG_MAX, AGG_MIN, AGG_SUM, IN_VIEW,
};
use crate::query::{AggOp, AnalyticalQuery, FilterExpr, PatternTerm, TriplePattern, Variable};
use crate::term::{Number, Term};

/// Where a query is answered.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum Source {
    BaseGraph,
    View(String),
}

impl Source {
    pub fn label(&self) -> &str {
        match self {
            Source::BaseGraph => "base",
            Source::View(id) => id,
        }
    }
}

/// How stored partials combine into the query's aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum Rollup {
    SumOfSums,
    SumOfCounts,
    MinOfMins,
    MaxOfMaxes,
    SumsOverCounts,
}

impl Rollup {
    pub fn for_op(op: AggOp) -> Self {
        match op {
            AggOp::Sum => Rollup::SumOfSums,
            AggOp::Count => Rollup::SumOfCounts,
            AggOp::Min => Rollup::MinOfMins,
            AggOp::Max => Rollup::MaxOfMaxes,
            AggOp::Avg => Rollup::SumsOverCounts,
        }
    }
}

/// Variables of the rewritten pattern that are not dimensions.
#[derive(Debug, Clone, PartialEq, Eq)]
struct EncodingVars {
    group: Variable,
    sum: Variable,
    count: Variable,
    extra: Variable,
}

fn fresh(base: &str, taken: &BTreeSet<&Variable>) -> Variable {
    let mut name = String::from(base);
    loop {
        let v = Variable::new(name.clone()).expect("valid variable name");
        if !taken.contains(&v) {
            return v;
        }
        name.push('_');
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewritePlan {
    pub source: Source,
    /// The query in facet variable names.
    pub query: AnalyticalQuery,
    /// Grouping variables as the caller named them.
    pub output_vars: Vec<Variable>,
    /// Triple patterns over the view encoding; empty for the base graph.
    pub pattern: Vec<TriplePattern>,
    pub rollup: Rollup,
    vars: Option<EncodingVars>,
}

impl RewritePlan {
    /// The translated query in the query grammar. For views the aggregate
    /// shown is the one applied to the primary partial; AVG divides the
    /// rolled-up sum by the rolled-up count.
    pub fn render(&self) -> String {
        let Some(vars) = &self.vars else {
            return format!("{}", self.query);
        };
        let (op, var) = match self.rollup {
            Rollup::SumOfSums | Rollup::SumsOverCounts => (AggOp::Sum, &vars.sum),
            Rollup::SumOfCounts => (AggOp::Sum, &vars.count),
            Rollup::MinOfMins => (AggOp::Min, &vars.extra),
            Rollup::MaxOfMaxes => (AggOp::Max, &vars.extra),
        };
        match AnalyticalQuery::new(
            self.query.group_vars().to_vec(),
            self.pattern.clone(),
            self.query.filters().to_vec(),
            op,
            var.clone(),
            self.query.result_var().clone(),
        ) {
            Ok(q) => format!("{q}"),
            Err(e) => format!("<unrenderable: {e}>"),
        }
    }
}

fn iri(s: &str) -> PatternTerm {
    PatternTerm::Const(Term::Iri(s.into()))
}

fn view_pattern(view: &MaterializedView, needed: &[Variable], vars: &EncodingVars) -> Result<Vec<TriplePattern>> {
    let g = PatternTerm::Var(vars.group.clone());
    let mut pattern = alloc::vec![TriplePattern::new(
        g.clone(),
        iri(IN_VIEW),
        PatternTerm::Const(view.view_iri().clone()),
    )?];
    for x in needed {
        pattern.push(TriplePattern::new(
            g.clone(),
            PatternTerm::Const(dim_predicate(x)),
            PatternTerm::Var(x.clone()),
        )?);
    }
    pattern.push(TriplePattern::new(
        g.clone(),
        iri(AGG_SUM),
        PatternTerm::Var(vars.sum.clone()),
    )?);
    pattern.push(TriplePattern::new(
        g.clone(),
        iri(AGG_COUNT),
        PatternTerm::Var(vars.count.clone()),
    )?);
    match view.agg_op() {
        AggOp::Min => pattern.push(TriplePattern::new(
            g,
            iri(AGG_MIN),
            PatternTerm::Var(vars.extra.clone()),
        )?),
        AggOp::Max => pattern.push(TriplePattern::new(
            g,
            iri(AGG_MAX),
            PatternTerm::Var(vars.extra.clone()),
        )?),
        _ => {}
    }
    Ok(pattern)
}

/// Picks the usable materialized view with the lowest cost in `costs`
/// (indexed by node mask), ties by id; the base graph when none is usable.
pub fn choose_view(eg: &ExpandedGraph, lattice: &Lattice, costs: &[f64], q: &AnalyticalQuery) -> Result<RewritePlan> {
    let conformed = lattice.facet().conform(q)?;
    let mut best: Option<(&MaterializedView, f64)> = None;
    // Views iterate in id order, so strict `<` keeps the smallest id.
    for view in eg.views().values() {
        let node = lattice.node_or_err(view.node_id())?;
        if !lattice.can_answer_conformed(node, &conformed) {
            continue;
        }
        let c = costs[node.mask() as usize];
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((view, c));
        }
    }
    let rollup = Rollup::for_op(conformed.agg_op());
    let output_vars = q.group_vars().to_vec();
    let Some((view, _)) = best else {
        return Ok(RewritePlan {
            source: Source::BaseGraph,
            query: conformed,
            output_vars,
            pattern: Vec::new(),
            rollup,
            vars: None,
        });
    };

    let mut needed: Vec<Variable> = conformed.group_vars().to_vec();
    for f in conformed.filters() {
        if !needed.contains(&f.variable) {
            needed.push(f.variable.clone());
        }
    }
    let taken: BTreeSet<&Variable> = needed.iter().chain([conformed.result_var()]).collect();
    let vars = EncodingVars {
        group: fresh("g", &taken),
        sum: fresh("sum", &taken),
        count: fresh("count", &taken),
        extra: fresh(if conformed.agg_op() == AggOp::Min { "min" } else { "max" }, &taken),
    };
    let pattern = view_pattern(view, &needed, &vars)?;
    Ok(RewritePlan {
        source: Source::View(view.node_id().into()),
        query: conformed,
        output_vars,
        pattern,
        rollup,
        vars: Some(vars),
    })
}

fn number_of(g: &Graph, id: TermId, what: &str) -> Result<Number> {
    g.term(id)
        .numeric()
        .ok_or_else(|| Error::Evaluation(format!("stored {what} {} is not numeric", g.term(id))))
}

/// Runs `plan`. `q` must be the query the plan was made for.
pub fn rewrite_and_execute(
    eg: &ExpandedGraph,
    plan: &RewritePlan,
    q: &AnalyticalQuery,
) -> Result<crate::eval::ResultTable> {
    if q.group_vars() != plan.output_vars.as_slice()
        || q.agg_op() != plan.query.agg_op()
        || q.filters().len() != plan.query.filters().len()
    {
        return Err(Error::InvalidSelection(
            "rewrite plan was made for a different query".into(),
        ));
    }
    let Some(vars) = &plan.vars else {
        let mut table = evaluate(eg.base(), &plan.query)?;
        table.group_vars = plan.output_vars.clone();
        return Ok(table);
    };
    let Source::View(id) = &plan.source else {
        unreachable!("encoding variables imply a view source")
    };
    let view = eg
        .view(id)
        .ok_or_else(|| Error::UnknownView(format!("view {id} is not materialized")))?;
    let g = view.graph();
    let filters: &[FilterExpr] = plan.query.filters();
    let op = plan.query.agg_op();

    let mut partials: GroupPartials = BTreeMap::new();
    let mut key = Vec::with_capacity(plan.query.group_vars().len());
    let order = row_layout(&plan.pattern);
    let pos = |v: &Variable| order.iter().position(|x| x == v);
    let group_slots = plan
        .query
        .group_vars()
        .iter()
        .map(|v| pos(v).ok_or_else(|| Error::Planning(format!("{v} missing from rewritten pattern"))))
        .collect::<Result<Vec<_>>>()?;
    let sum_slot = pos(&vars.sum).expect("sum variable in pattern");
    let count_slot = pos(&vars.count).expect("count variable in pattern");
    let extra_slot = pos(&vars.extra);

    visit_bgp(g, &plan.pattern, filters, |row| {
        key.clear();
        key.extend(group_slots.iter().map(|&i| row[i]));
        let sum = match number_of(g, row[sum_slot], "sum")? {
            Number::Int(i) => Sum::Int(i),
            Number::Float(f) => Sum::Float(f),
        };
        let count = match number_of(g, row[count_slot], "count")? {
            Number::Int(i) => i,
            Number::Float(_) => return Err(Error::Evaluation("stored count is not an integer".into())),
        };
        let extra = match extra_slot {
            Some(i) => Some(number_of(g, row[i], "extremum")?),
            None => None,
        };
        let p = Partial {
            count,
            sum: Some(sum),
            min: if op == AggOp::Min { extra } else { None },
            max: if op == AggOp::Max { extra } else { None },
        };
        match partials.get_mut(&key) {
            Some(acc) => acc.merge(&p)?,
            None => {
                partials.insert(key.clone(), p);
            }
        }
        Ok(())
    })?;
    finish_groups(g, &plan.output_vars, &partials, op)
}

/// Chooses a view for `q` and runs it.
pub fn answer(
    eg: &ExpandedGraph,
    lattice: &Lattice,
    costs: &[f64],
    q: &AnalyticalQuery,
) -> Result<(RewritePlan, crate::eval::ResultTable)> {
    let plan = choose_view(eg, lattice, costs, q)?;
    let table = rewrite_and_execute(eg, &plan, q)?;
    Ok((plan, table))
}
