//! JSON shapes shared by the CLI and the HTTP service.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use sofos_core::cost::{CostContext, CostModel, ViewProfile};
use sofos_core::eval::ResultTable;
use sofos_core::graph::Graph;
use sofos_core::lattice::Lattice;
use sofos_core::materialize::MaterializedView;
use sofos_core::query::AnalyticalQuery;
use sofos_core::term::{Number, Term};

use crate::error::Result;

pub fn number(n: Number) -> Value {
    match n {
        Number::Int(i) => json!(i),
        Number::Float(f) if f.is_finite() => json!(f),
        Number::Float(f) => json!(f.to_string()),
    }
}

/// Costs serialize as numbers, with `"inf"` for unreachable nodes.
pub fn cost(c: f64) -> Value {
    if c.is_finite() {
        json!(c)
    } else {
        json!("inf")
    }
}

pub fn graph_stats(g: &Graph) -> Value {
    let st = g.stats();
    json!({
        "triples": st.total_triples,
        "distinctTerms": st.distinct_terms,
        "predicates": st.predicates,
    })
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeJson {
    pub id: String,
    pub mask: u32,
    pub level: usize,
    pub group_vars: Vec<String>,
    pub is_root: bool,
    pub query: String,
    pub parents: Vec<String>,
    pub children: Vec<String>,
    pub ancestors: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub costs: BTreeMap<String, Value>,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LatticeJson {
    pub facet: String,
    pub group_vars: Vec<String>,
    pub aggregate: String,
    pub measure: String,
    pub root: String,
    pub apex: String,
    pub node_count: usize,
    pub nodes: Vec<NodeJson>,
}

fn ids<'a>(nodes: impl IntoIterator<Item = &'a sofos_core::lattice::ViewNode>) -> Vec<String> {
    nodes.into_iter().map(|v| v.id().to_string()).collect()
}

/// Lattice description; `costs` maps a model name to per-mask costs.
pub fn lattice(l: &Lattice, costs: &BTreeMap<String, Vec<f64>>) -> LatticeJson {
    let facet = l.facet();
    let nodes = l
        .nodes()
        .iter()
        .map(|v| NodeJson {
            id: v.id().to_string(),
            mask: v.mask(),
            level: v.level(),
            group_vars: v.group_vars().iter().map(|x| x.name().to_string()).collect(),
            is_root: l.is_root(v),
            query: v.query().to_string(),
            parents: ids(l.parents(v)),
            children: ids(l.children(v)),
            ancestors: ids(l.ancestors(v)),
            costs: costs
                .iter()
                .map(|(name, c)| (name.clone(), cost(c[v.mask() as usize])))
                .collect(),
        })
        .collect();
    LatticeJson {
        facet: facet.query().to_string(),
        group_vars: facet.group_vars().iter().map(|x| x.name().to_string()).collect(),
        aggregate: facet.agg_op().to_string(),
        measure: facet.agg_var().name().to_string(),
        root: l.root().id().to_string(),
        apex: l.apex().id().to_string(),
        node_count: l.len(),
        nodes,
    }
}

/// Per-node costs under one model, plus the profile that produced them.
pub fn cost_report(ctx: &CostContext<'_>, model: &CostModel) -> Result<Value> {
    let costs = ctx.node_costs(model)?;
    let mut nodes = Vec::new();
    for v in ctx.lattice().nodes() {
        let profile: Option<ViewProfile> = match model {
            CostModel::TripleCount | CostModel::AggValueCount | CostModel::NodeCount => Some(ctx.profile(v)?),
            _ => None,
        };
        nodes.push(json!({
            "id": v.id(),
            "cost": cost(costs[v.mask() as usize]),
            "profile": profile,
        }));
    }
    Ok(json!({ "model": model.kind().name(), "nodes": nodes }))
}

fn key_object(vars: &[sofos_core::query::Variable], key: &[Term]) -> serde_json::Map<String, Value> {
    vars.iter()
        .zip(key)
        .map(|(v, t)| (v.name().to_string(), json!(t.to_string())))
        .collect()
}

/// Stored group records of a materialized view, first `limit` in label order.
pub fn view_data(m: &MaterializedView, limit: Option<usize>) -> Result<Value> {
    let op = m.agg_op();
    let mut groups = Vec::new();
    for g in m.groups().iter().take(limit.unwrap_or(usize::MAX)) {
        groups.push(json!({
            "label": g.label,
            "key": key_object(m.group_vars(), &g.key),
            "sum": g.partial.sum.map(|s| number(s.number())),
            "count": g.partial.count,
            "min": g.partial.min.map(number),
            "max": g.partial.max.map(number),
            "value": number(g.partial.finish(op)?),
        }));
    }
    Ok(json!({
        "viewId": m.node_id(),
        "viewIri": m.view_iri().to_string(),
        "groupVars": m.group_vars().iter().map(|v| v.name()).collect::<Vec<_>>(),
        "aggregate": op.to_string(),
        "groupCount": m.groups().len(),
        "tripleCount": m.triple_count(),
        "termCount": m.term_count(),
        "groups": groups,
    }))
}

pub fn result_table(t: &ResultTable) -> Value {
    let rows: Vec<Value> = t
        .rows
        .iter()
        .map(|(k, n)| json!({ "key": key_object(&t.group_vars, k), "value": number(*n) }))
        .collect();
    json!({
        "groupVars": t.group_vars.iter().map(|v| v.name()).collect::<Vec<_>>(),
        "rows": rows,
    })
}

/// One query per line, in the query language.
pub fn workload_text(queries: &[AnalyticalQuery]) -> String {
    queries.iter().map(|q| format!("{q}\n")).collect()
}

pub fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
