//! View materialization as blank-node group encodings.
//!
//! Each group of a view becomes one blank node `_:v_<viewId>_<i>` carrying
//!
//! ```text
//! _:g <urn:sofos:dim:<var>> value        one per grouping variable
//! _:g <urn:sofos:agg:sum>   literal
//! _:g <urn:sofos:agg:count> literal
//! _:g <urn:sofos:agg:min|max> literal    only for MIN / MAX facets
//! _:g <urn:sofos:inView>    <urn:sofos:view:<viewId>>
//! ```
//!
//! Groups are numbered in sorted group-key order, so the encoding of a view
//! is fully deterministic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{group_partials, Partial, Sum};
use crate::graph::{Graph, GraphBuilder};
use crate::lattice::{Lattice, ViewNode};
use crate::query::{AggOp, Variable};
use crate::term::Term;

pub const DIM_PREFIX: &str = "urn:sofos:dim:";
pub const AGG_SUM: &str = "urn:sofos:agg:sum";
pub const AGG_COUNT: &str = "urn:sofos:agg:count";
pub const AGG_MIN: &str = "urn:sofos:agg:min";
pub const AGG_MAX: &str = "urn:sofos:agg:max";
pub const IN_VIEW: &str = "urn:sofos:inView";
pub const VIEW_PREFIX: &str = "urn:sofos:view:";

pub fn view_iri(id: &str) -> Term {
    Term::Iri(format!("{VIEW_PREFIX}{id}"))
}

pub fn dim_predicate(var: &Variable) -> Term {
    Term::Iri(format!("{DIM_PREFIX}{}", var.name()))
}

pub fn group_label(view_id: &str, index: usize) -> String {
    format!("v_{view_id}_{index}")
}

/// Which optional partial a facet's aggregate needs besides sum and count.
pub fn extra_partial(op: AggOp) -> Option<&'static str> {
    match op {
        AggOp::Min => Some(AGG_MIN),
        AggOp::Max => Some(AGG_MAX),
        _ => None,
    }
}

/// Encoding triples per group.
pub fn triples_per_group(group_vars: usize, op: AggOp) -> usize {
    group_vars + 3 + usize::from(extra_partial(op).is_some())
}

/// One stored group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRecord {
    pub label: String,
    /// Aligned with the view's grouping variables.
    pub key: Vec<Term>,
    pub partial: Partial,
}

impl GroupRecord {
    pub fn sum_term(&self) -> Result<Term> {
        match self.partial.sum {
            Some(Sum::Int(i)) => Ok(Term::integer(i)),
            Some(Sum::Float(f)) => Ok(Term::double(f)),
            None => Err(Error::Evaluation(format!(
                "group {} has a non-numeric measure",
                self.label
            ))),
        }
    }

    fn extra_term(&self, op: AggOp) -> Result<Option<(&'static str, Term)>> {
        let Some(pred) = extra_partial(op) else {
            return Ok(None);
        };
        let value = if op == AggOp::Min {
            self.partial.min
        } else {
            self.partial.max
        };
        let value = value.ok_or_else(|| Error::Evaluation(format!("group {} has no {op}", self.label)))?;
        Ok(Some((pred, Term::number(value))))
    }
}

/// A view's groups and their encoding.
#[derive(Debug, Clone)]
pub struct MaterializedView {
    node_id: String,
    view_iri: Term,
    group_vars: Vec<Variable>,
    agg_op: AggOp,
    groups: Vec<GroupRecord>,
    /// Encoding in emission order.
    triples: Vec<(Term, Term, Term)>,
    graph: Graph,
    term_count: usize,
}

impl MaterializedView {
    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn view_iri(&self) -> &Term {
        &self.view_iri
    }

    pub fn group_vars(&self) -> &[Variable] {
        &self.group_vars
    }

    pub fn agg_op(&self) -> AggOp {
        self.agg_op
    }

    pub fn groups(&self) -> &[GroupRecord] {
        &self.groups
    }

    /// The encoding triples, grouped per blank node.
    pub fn triples(&self) -> &[(Term, Term, Term)] {
        &self.triples
    }

    /// The encoding as a queryable graph.
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn triple_count(&self) -> usize {
        self.graph.len()
    }

    /// Distinct subject and object terms of the encoding.
    pub fn term_count(&self) -> usize {
        self.term_count
    }
}

/// Evaluates `node`'s query keeping decomposable partials and encodes the
/// groups. The measure must be numeric.
pub fn materialize(g: &Graph, lattice: &Lattice, node: &ViewNode) -> Result<MaterializedView> {
    let facet = lattice.facet();
    let partials = group_partials(g, facet.pattern(), &[], node.group_vars(), facet.agg_var(), true)?;
    let mut sorted: BTreeMap<Vec<Term>, Partial> = BTreeMap::new();
    for (key, partial) in partials {
        sorted.insert(key.iter().map(|id| g.term(*id).clone()).collect(), partial);
    }

    let view_iri = view_iri(node.id());
    let in_view = Term::Iri(IN_VIEW.into());
    let sum_p = Term::Iri(AGG_SUM.into());
    let count_p = Term::Iri(AGG_COUNT.into());
    let dims: Vec<Term> = node.group_vars().iter().map(dim_predicate).collect();
    let op = facet.agg_op();

    let mut groups = Vec::with_capacity(sorted.len());
    let mut triples = Vec::with_capacity(sorted.len() * triples_per_group(dims.len(), op));
    for (i, (key, partial)) in sorted.into_iter().enumerate() {
        let record = GroupRecord {
            label: group_label(node.id(), i),
            key,
            partial,
        };
        let b = Term::BlankNode(record.label.clone());
        for (pred, value) in dims.iter().zip(&record.key) {
            triples.push((b.clone(), pred.clone(), value.clone()));
        }
        triples.push((b.clone(), sum_p.clone(), record.sum_term()?));
        triples.push((b.clone(), count_p.clone(), Term::integer(record.partial.count)));
        if let Some((pred, value)) = record.extra_term(op)? {
            triples.push((b.clone(), Term::Iri(pred.into()), value));
        }
        triples.push((b, in_view.clone(), view_iri.clone()));
        groups.push(record);
    }

    let mut builder = GraphBuilder::new();
    let mut nodes = BTreeSet::new();
    for (s, p, o) in &triples {
        builder.insert(s, p, o)?;
        nodes.insert(s);
        nodes.insert(o);
    }
    let term_count = nodes.len();
    Ok(MaterializedView {
        node_id: node.id().into(),
        view_iri,
        group_vars: node.group_vars().to_vec(),
        agg_op: op,
        groups,
        triples,
        graph: builder.build(),
        term_count,
    })
}

/// The base graph plus its materialized views. The base is shared.
#[derive(Debug, Clone)]
pub struct ExpandedGraph {
    base: Arc<Graph>,
    views: BTreeMap<String, MaterializedView>,
}

impl ExpandedGraph {
    pub fn new(base: Arc<Graph>) -> Self {
        ExpandedGraph {
            base,
            views: BTreeMap::new(),
        }
    }

    pub fn base(&self) -> &Arc<Graph> {
        &self.base
    }

    /// Views by node id, in id order.
    pub fn views(&self) -> &BTreeMap<String, MaterializedView> {
        &self.views
    }

    pub fn view(&self, id: &str) -> Option<&MaterializedView> {
        self.views.get(id)
    }

    pub fn total_view_triples(&self) -> usize {
        self.views.values().map(MaterializedView::triple_count).sum()
    }

    /// View triples over base triples.
    pub fn storage_amplification(&self) -> Result<f64> {
        if self.base.is_empty() {
            return Err(Error::Undefined("storage amplification of an empty base graph".into()));
        }
        Ok(self.total_view_triples() as f64 / self.base.len() as f64)
    }
}

/// Materializes every id in `view_ids`. The root is never materialized; it
/// is the base graph itself.
pub fn expand<S: AsRef<str>>(base: Arc<Graph>, lattice: &Lattice, view_ids: &[S]) -> Result<ExpandedGraph> {
    let mut seen = BTreeSet::new();
    let mut nodes = Vec::with_capacity(view_ids.len());
    for id in view_ids {
        let id = id.as_ref();
        let node = lattice.node_or_err(id)?;
        if lattice.is_root(node) {
            return Err(Error::InvalidSelection(format!(
                "`{id}` is the root view; it is answered from the base graph"
            )));
        }
        if !seen.insert(id) {
            return Err(Error::InvalidSelection(format!("view `{id}` listed twice")));
        }
        nodes.push(node);
    }
    let mut eg = ExpandedGraph::new(base);
    for node in nodes {
        let view = materialize(&eg.base, lattice, node)?;
        eg.views.insert(node.id().into(), view);
    }
    Ok(eg)
}
