//! Basic graph pattern evaluation and grouped aggregation.
//!
//! Patterns are compiled to variable slots, ordered greedily by estimated
//! cardinality and evaluated as an index nested-loop join. Filters run as
//! soon as their variable is bound.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{Graph, TermId};
use crate::query::{AggOp, AnalyticalQuery, FilterExpr, PatternTerm, TriplePattern, Variable};
use crate::term::{Number, Term};

/// Solutions of a basic graph pattern. Each row holds one id per variable,
/// aligned with `variables`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solutions {
    pub variables: Vec<Variable>,
    pub rows: Vec<Vec<TermId>>,
}

impl Solutions {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn slot(&self, var: &Variable) -> Option<usize> {
        self.variables.iter().position(|v| v == var)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Const(TermId),
    Var(usize),
}

#[derive(Debug)]
struct CompiledPattern {
    s: Slot,
    p: Slot,
    o: Slot,
}

impl CompiledPattern {
    fn slots(&self) -> [Slot; 3] {
        [self.s, self.p, self.o]
    }

    fn vars(&self) -> impl Iterator<Item = usize> {
        self.slots().into_iter().filter_map(|s| match s {
            Slot::Var(i) => Some(i),
            Slot::Const(_) => None,
        })
    }
}

/// A compiled, ordered join plan. `None` plans have a constant that is not
/// in the graph and therefore no solutions.
struct Plan<'q> {
    variables: Vec<Variable>,
    steps: Vec<CompiledPattern>,
    /// Filters to check once step `i` has run.
    filters_after: Vec<Vec<(usize, &'q FilterExpr)>>,
}

fn var_index(vars: &mut Vec<Variable>, v: &Variable) -> usize {
    match vars.iter().position(|x| x == v) {
        Some(i) => i,
        None => {
            vars.push(v.clone());
            vars.len() - 1
        }
    }
}

/// Variable order of the rows [`visit_bgp`] emits: first occurrence in
/// `pattern`.
pub fn row_layout(pattern: &[TriplePattern]) -> Vec<Variable> {
    let mut vars = Vec::new();
    for tp in pattern {
        for v in tp.variables() {
            var_index(&mut vars, v);
        }
    }
    vars
}

/// Rejects patterns whose variable-bearing triples fall apart into more than
/// one connected component.
fn check_connected(pattern: &[TriplePattern]) -> Result<()> {
    let with_vars: Vec<BTreeSet<&Variable>> = pattern
        .iter()
        .map(|tp| tp.variables().collect::<BTreeSet<_>>())
        .filter(|vs| !vs.is_empty())
        .collect();
    if with_vars.len() <= 1 {
        return Ok(());
    }
    let mut reached = vec![false; with_vars.len()];
    reached[0] = true;
    let mut frontier = vec![0];
    while let Some(i) = frontier.pop() {
        for j in 0..with_vars.len() {
            if !reached[j] && !with_vars[i].is_disjoint(&with_vars[j]) {
                reached[j] = true;
                frontier.push(j);
            }
        }
    }
    if reached.iter().all(|r| *r) {
        Ok(())
    } else {
        Err(Error::Planning(
            "graph pattern is disconnected (would need a cross product)".into(),
        ))
    }
}

fn estimate(g: &Graph, tp: &CompiledPattern, bound: &[bool]) -> f64 {
    let is_bound = |s: Slot| match s {
        Slot::Const(_) => true,
        Slot::Var(i) => bound[i],
    };
    let total = g.len().max(1) as f64;
    let mut n;
    let (subjects, objects) = match tp.p {
        Slot::Const(p) => {
            let st = g.predicate_stats(g.term(p));
            n = st.triples as f64;
            (st.distinct_subjects.max(1) as f64, st.distinct_objects.max(1) as f64)
        }
        Slot::Var(i) => {
            n = total;
            if bound[i] {
                n /= g.stats().predicates.len().max(1) as f64;
            }
            let terms = g.dictionary().len().max(1) as f64;
            (terms, terms)
        }
    };
    if is_bound(tp.s) {
        n /= subjects;
    }
    if is_bound(tp.o) {
        n /= objects;
    }
    n
}

fn plan<'q>(g: &Graph, pattern: &[TriplePattern], filters: &'q [FilterExpr]) -> Result<Option<Plan<'q>>> {
    if pattern.is_empty() {
        return Err(Error::Planning("empty graph pattern".into()));
    }
    check_connected(pattern)?;
    let mut variables = Vec::new();
    let mut compiled = Vec::with_capacity(pattern.len());
    let mut missing = false;
    for tp in pattern {
        let mut slot = |t: &PatternTerm| match t {
            PatternTerm::Var(v) => Slot::Var(var_index(&mut variables, v)),
            PatternTerm::Const(c) => match g.id_of(c) {
                Some(id) => Slot::Const(id),
                None => {
                    missing = true;
                    Slot::Const(TermId(u32::MAX))
                }
            },
        };
        let (s, p, o) = (slot(&tp.s), slot(&tp.p), slot(&tp.o));
        compiled.push(CompiledPattern { s, p, o });
    }
    let mut filter_slots = Vec::with_capacity(filters.len());
    for f in filters {
        let Some(i) = variables.iter().position(|v| v == &f.variable) else {
            return Err(Error::Semantic(format!(
                "FILTER variable {} does not occur in the pattern",
                f.variable
            )));
        };
        if f.comparator.is_ordering() && f.constant.numeric().is_none() {
            return Err(Error::Semantic(format!(
                "comparator `{}` needs a numeric constant",
                f.comparator.symbol()
            )));
        }
        filter_slots.push((i, f));
    }
    if missing {
        return Ok(None);
    }

    // Greedy: cheapest pattern first, then cheapest pattern sharing a bound
    // variable (ground patterns are always eligible).
    let mut bound = vec![false; variables.len()];
    let mut remaining: Vec<CompiledPattern> = compiled;
    let mut steps = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let first = steps.is_empty();
        let mut best: Option<(usize, f64)> = None;
        for (i, tp) in remaining.iter().enumerate() {
            let mut vars = tp.vars().peekable();
            let connected = first || vars.peek().is_none() || tp.vars().any(|v| bound[v]);
            if !connected {
                continue;
            }
            let est = estimate(g, tp, &bound);
            if best.is_none_or(|(_, b)| est < b) {
                best = Some((i, est));
            }
        }
        let (i, _) = best.expect("connected pattern always has a next step");
        let tp = remaining.remove(i);
        for v in tp.vars() {
            bound[v] = true;
        }
        steps.push(tp);
    }

    let mut filters_after = vec![Vec::new(); steps.len()];
    let mut bound = vec![false; variables.len()];
    let mut pending = filter_slots;
    for (i, tp) in steps.iter().enumerate() {
        for v in tp.vars() {
            bound[v] = true;
        }
        let (ready, rest): (Vec<_>, Vec<_>) = pending.into_iter().partition(|(v, _)| bound[*v]);
        filters_after[i] = ready;
        pending = rest;
    }
    Ok(Some(Plan {
        variables,
        steps,
        filters_after,
    }))
}

const UNBOUND: TermId = TermId(u32::MAX);

fn join<F>(g: &Graph, plan: &Plan<'_>, depth: usize, row: &mut Vec<TermId>, emit: &mut F) -> Result<()>
where
    F: FnMut(&[TermId]) -> Result<()>,
{
    if depth == plan.steps.len() {
        return emit(row);
    }
    let tp = &plan.steps[depth];
    let resolve = |s: Slot, row: &[TermId]| match s {
        Slot::Const(id) => Some(id),
        Slot::Var(i) if row[i] != UNBOUND => Some(row[i]),
        Slot::Var(_) => None,
    };
    let (s, p, o) = (resolve(tp.s, row), resolve(tp.p, row), resolve(tp.o, row));
    for t in g.match_ids(s, p, o) {
        let mut assigned: [Option<usize>; 3] = [None; 3];
        let mut ok = true;
        for (k, (slot, value)) in tp.slots().into_iter().zip([t.s, t.p, t.o]).enumerate() {
            if let Slot::Var(i) = slot {
                if row[i] == UNBOUND {
                    row[i] = value;
                    assigned[k] = Some(i);
                } else if row[i] != value {
                    // Repeated variable inside one pattern.
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            ok = plan.filters_after[depth]
                .iter()
                .all(|(v, f)| f.accepts(g.term(row[*v])));
        }
        if ok {
            join(g, plan, depth + 1, row, emit)?;
        }
        for i in assigned.into_iter().flatten() {
            row[i] = UNBOUND;
        }
    }
    Ok(())
}

/// Calls `emit` once per solution. Returns the variable order of the rows.
pub fn visit_bgp<F>(g: &Graph, pattern: &[TriplePattern], filters: &[FilterExpr], mut emit: F) -> Result<Vec<Variable>>
where
    F: FnMut(&[TermId]) -> Result<()>,
{
    let Some(plan) = plan(g, pattern, filters)? else {
        let mut vars = Vec::new();
        for tp in pattern {
            for v in tp.variables() {
                var_index(&mut vars, v);
            }
        }
        return Ok(vars);
    };
    let mut row = vec![UNBOUND; plan.variables.len()];
    join(g, &plan, 0, &mut row, &mut emit)?;
    Ok(plan.variables)
}

/// Every solution mapping of `pattern` over `g` that passes `filters`.
pub fn evaluate_bgp(g: &Graph, pattern: &[TriplePattern], filters: &[FilterExpr]) -> Result<Solutions> {
    let mut rows = Vec::new();
    let variables = visit_bgp(g, pattern, filters, |row| {
        rows.push(row.to_vec());
        Ok(())
    })?;
    Ok(Solutions { variables, rows })
}

/// Running sum that stays an exact integer until a float shows up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sum {
    Int(i64),
    Float(f64),
}

impl Sum {
    pub fn plus(self, n: Number) -> Result<Sum> {
        Ok(match (self, n) {
            (Sum::Int(a), Number::Int(b)) => Sum::Int(
                a.checked_add(b)
                    .ok_or_else(|| Error::Evaluation("integer overflow in SUM".into()))?,
            ),
            (Sum::Int(a), Number::Float(b)) => Sum::Float(a as f64 + b),
            (Sum::Float(a), n) => Sum::Float(a + n.as_f64()),
        })
    }

    pub fn number(self) -> Number {
        match self {
            Sum::Int(i) => Number::Int(i),
            Sum::Float(f) => Number::Float(f),
        }
    }
}

/// Decomposable per-group partials: everything needed to roll a group up
/// into a coarser grouping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partial {
    pub count: i64,
    /// `None` when the measure was not numeric and numbers were optional.
    pub sum: Option<Sum>,
    pub min: Option<Number>,
    pub max: Option<Number>,
}

impl Partial {
    pub fn empty() -> Self {
        Partial {
            count: 0,
            sum: Some(Sum::Int(0)),
            min: None,
            max: None,
        }
    }

    fn observe(&mut self, value: Option<Number>) -> Result<()> {
        self.count += 1;
        match value {
            Some(n) => {
                self.sum = match self.sum {
                    Some(s) => Some(s.plus(n)?),
                    None => None,
                };
                if self.min.is_none_or(|m| n.compare(m) == Some(core::cmp::Ordering::Less)) {
                    self.min = Some(n);
                }
                if self
                    .max
                    .is_none_or(|m| n.compare(m) == Some(core::cmp::Ordering::Greater))
                {
                    self.max = Some(n);
                }
            }
            None => self.sum = None,
        }
        Ok(())
    }

    /// Combines two partials of the same coarser group.
    pub fn merge(&mut self, other: &Partial) -> Result<()> {
        self.count += other.count;
        self.sum = match (self.sum, other.sum) {
            (Some(a), Some(b)) => Some(a.plus(b.number())?),
            _ => None,
        };
        self.min = match (self.min, other.min) {
            (Some(a), Some(b)) => Some(if b.compare(a) == Some(core::cmp::Ordering::Less) {
                b
            } else {
                a
            }),
            (a, b) => a.or(b),
        };
        self.max = match (self.max, other.max) {
            (Some(a), Some(b)) => Some(if b.compare(a) == Some(core::cmp::Ordering::Greater) {
                b
            } else {
                a
            }),
            (a, b) => a.or(b),
        };
        Ok(())
    }

    /// Final aggregate value.
    pub fn finish(&self, op: AggOp) -> Result<Number> {
        let missing = || Error::Evaluation(format!("{op} over non-numeric values"));
        match op {
            AggOp::Count => Ok(Number::Int(self.count)),
            AggOp::Sum => self.sum.map(Sum::number).ok_or_else(missing),
            AggOp::Avg => {
                let sum = self.sum.ok_or_else(missing)?;
                let total = match sum {
                    Sum::Int(i) => i as f64,
                    Sum::Float(f) => f,
                };
                Ok(Number::Float(total / self.count as f64))
            }
            AggOp::Min => self.min.ok_or_else(missing),
            AggOp::Max => self.max.ok_or_else(missing),
        }
    }
}

/// Per-group partials keyed by group key ids (aligned with the grouping
/// variables).
pub type GroupPartials = BTreeMap<Vec<TermId>, Partial>;

/// Groups the solutions of `pattern`/`filters` by `group_vars` and folds
/// `agg_var` into [`Partial`]s. With `require_numeric`, a non-numeric
/// measure is an error naming the term.
pub fn group_partials(
    g: &Graph,
    pattern: &[TriplePattern],
    filters: &[FilterExpr],
    group_vars: &[Variable],
    agg_var: &Variable,
    require_numeric: bool,
) -> Result<GroupPartials> {
    let mut groups: GroupPartials = BTreeMap::new();
    let mut slots: Option<(Vec<usize>, usize)> = None;
    let order = row_layout(pattern);
    let mut key = Vec::with_capacity(group_vars.len());
    visit_bgp(g, pattern, filters, |row| {
        let (group_slots, agg_slot) = match &slots {
            Some(s) => s,
            None => {
                // Plan variable order matches first-occurrence order.
                let pos = |v: &Variable| order.iter().position(|x| x == v).expect("pattern var");
                slots = Some((group_vars.iter().map(pos).collect(), pos(agg_var)));
                slots.as_ref().unwrap()
            }
        };
        key.clear();
        key.extend(group_slots.iter().map(|&i| row[i]));
        let measure = g.term(row[*agg_slot]);
        let value = measure.numeric();
        if value.is_none() && require_numeric {
            return Err(Error::Evaluation(format!(
                "non-numeric value {measure} for aggregate variable {agg_var}"
            )));
        }
        match groups.get_mut(&key) {
            Some(p) => p.observe(value)?,
            None => {
                let mut p = Partial::empty();
                p.observe(value)?;
                groups.insert(key.clone(), p);
            }
        }
        Ok(())
    })?;
    Ok(groups)
}

/// Aggregated answer: one value per distinct group key.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub group_vars: Vec<Variable>,
    pub rows: BTreeMap<Vec<Term>, Number>,
}

impl ResultTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Same keys; integer values equal exactly, any float within
    /// `rel_tol` relative error.
    pub fn approx_eq(&self, other: &ResultTable, rel_tol: f64) -> bool {
        self.rows.len() == other.rows.len()
            && self.rows.iter().zip(other.rows.iter()).all(|((ka, va), (kb, vb))| {
                ka == kb
                    && match (va, vb) {
                        (Number::Int(a), Number::Int(b)) => a == b,
                        (a, b) => {
                            let (a, b) = (a.as_f64(), b.as_f64());
                            a == b || libm::fabs(a - b) <= rel_tol * libm::fmax(libm::fabs(a), libm::fabs(b))
                        }
                    }
            })
    }
}

/// Turns id-keyed partials into a term-keyed result table.
pub fn finish_groups(g: &Graph, group_vars: &[Variable], partials: &GroupPartials, op: AggOp) -> Result<ResultTable> {
    let mut rows = BTreeMap::new();
    for (key, partial) in partials {
        let terms: Vec<Term> = key.iter().map(|id| g.term(*id).clone()).collect();
        rows.insert(terms, partial.finish(op)?);
    }
    Ok(ResultTable {
        group_vars: group_vars.to_vec(),
        rows,
    })
}

/// Evaluates an analytical query over the base graph.
pub fn evaluate(g: &Graph, q: &AnalyticalQuery) -> Result<ResultTable> {
    let numeric = q.agg_op() != AggOp::Count;
    let partials = group_partials(g, q.pattern(), q.filters(), q.group_vars(), q.agg_var(), numeric)?;
    finish_groups(g, q.group_vars(), &partials, q.agg_op())
}
