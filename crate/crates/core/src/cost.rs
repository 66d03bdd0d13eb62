//! Cost models over lattice nodes.
//!
//! | model           | cost of view `v`                                         |
//! |-----------------|----------------------------------------------------------|
//! | `Random`        | 1 (the selector breaks ties with a seeded shuffle)       |
//! | `TripleCount`   | triples in `v`'s materialized encoding                   |
//! | `AggValueCount` | rows of `v`'s query                                      |
//! | `NodeCount`     | distinct subject/object terms of the encoding            |
//! | `Learned`       | regressor prediction on `v`'s features, clamped to ≥ ε   |
//! | `UserDefined`   | 0 for the user's views, +∞ for the others, 1 for root    |

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::cell::OnceCell;
use core::fmt;

use crate::error::{Error, Result};
use crate::eval::{evaluate, group_partials, Sum};
use crate::graph::Graph;
use crate::lattice::{Lattice, ViewNode};
use crate::materialize::{extra_partial, group_label, triples_per_group, view_iri};
use crate::query::{AggOp, AnalyticalQuery, PatternTerm, Variable};
use crate::term::Term;

pub use crate::regressor::{train, LinearRegressor, Regressor, TrainConfig, TrainingLog};

/// Lower bound applied to learned predictions.
pub const LEARNED_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum CostModelKind {
    Random,
    TripleCount,
    AggValueCount,
    NodeCount,
    Learned,
    UserDefined,
}

impl CostModelKind {
    pub const ALL: [CostModelKind; 6] = [
        CostModelKind::Random,
        CostModelKind::TripleCount,
        CostModelKind::AggValueCount,
        CostModelKind::NodeCount,
        CostModelKind::Learned,
        CostModelKind::UserDefined,
    ];

    /// Short name used on the command line and in the API.
    pub fn name(self) -> &'static str {
        match self {
            CostModelKind::Random => "random",
            CostModelKind::TripleCount => "triples",
            CostModelKind::AggValueCount => "aggvalues",
            CostModelKind::NodeCount => "nodes",
            CostModelKind::Learned => "learned",
            CostModelKind::UserDefined => "user",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        Some(match lower.as_str() {
            "random" => CostModelKind::Random,
            "triples" | "triplecount" => CostModelKind::TripleCount,
            "aggvalues" | "aggvaluecount" => CostModelKind::AggValueCount,
            "nodes" | "nodecount" => CostModelKind::NodeCount,
            "learned" => CostModelKind::Learned,
            "user" | "userdefined" => CostModelKind::UserDefined,
            _ => return None,
        })
    }
}

impl fmt::Display for CostModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone)]
pub enum CostModel {
    Random {
        seed: u64,
    },
    TripleCount,
    AggValueCount,
    NodeCount,
    Learned(Arc<dyn Regressor>),
    /// The user's picks, in the order given.
    UserDefined {
        chosen: Vec<String>,
    },
}

impl fmt::Debug for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostModel::Random { seed } => write!(f, "Random {{ seed: {seed} }}"),
            CostModel::Learned(r) => write!(f, "Learned({} features)", r.feature_dim()),
            CostModel::UserDefined { chosen } => write!(f, "UserDefined {chosen:?}"),
            other => f.write_str(other.kind().name()),
        }
    }
}

impl CostModel {
    pub fn kind(&self) -> CostModelKind {
        match self {
            CostModel::Random { .. } => CostModelKind::Random,
            CostModel::TripleCount => CostModelKind::TripleCount,
            CostModel::AggValueCount => CostModelKind::AggValueCount,
            CostModel::NodeCount => CostModelKind::NodeCount,
            CostModel::Learned(_) => CostModelKind::Learned,
            CostModel::UserDefined { .. } => CostModelKind::UserDefined,
        }
    }

    /// Cost of `v` within `ctx`'s lattice.
    pub fn cost(&self, ctx: &CostContext<'_>, v: &ViewNode) -> Result<f64> {
        Ok(match self {
            CostModel::Random { .. } => 1.0,
            CostModel::TripleCount => ctx.profile(v)?.triple_count as f64,
            CostModel::AggValueCount => ctx.profile(v)?.group_count as f64,
            CostModel::NodeCount => ctx.profile(v)?.node_count as f64,
            CostModel::Learned(reg) => {
                let x = ctx.features(v.query())?;
                let y = reg.predict(&x.values)?;
                if y.is_nan() {
                    return Err(Error::Evaluation("learned model predicted NaN".into()));
                }
                y.max(LEARNED_EPSILON)
            }
            CostModel::UserDefined { chosen } => {
                if ctx.lattice().is_root(v) {
                    1.0
                } else if chosen.iter().any(|c| c == v.id()) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        })
    }
}

/// Size of a view's encoding, computed from its group partials without
/// building triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct ViewProfile {
    pub group_count: usize,
    pub triple_count: usize,
    pub node_count: usize,
}

/// Computes the profile of `v` by evaluating its query with partials.
pub fn view_profile(g: &Graph, lattice: &Lattice, v: &ViewNode) -> Result<ViewProfile> {
    let facet = lattice.facet();
    let op = facet.agg_op();
    let numeric = op != AggOp::Count;
    let partials = group_partials(g, facet.pattern(), &[], v.group_vars(), facet.agg_var(), numeric)?;
    let groups = partials.len();
    let triple_count = groups * triples_per_group(v.group_vars().len(), op);

    // Distinct nodes: one blank node per group, the view IRI, every
    // dimension value and every partial literal. Literals may coincide
    // with each other and with dimension values, hence the set.
    let mut values: BTreeSet<Term> = BTreeSet::new();
    for (key, partial) in &partials {
        for id in key {
            values.insert(g.term(*id).clone());
        }
        values.insert(match partial.sum {
            Some(Sum::Int(i)) => Term::integer(i),
            Some(Sum::Float(f)) => Term::double(f),
            None => return Err(Error::Evaluation(format!("view {} has a non-numeric measure", v.id()))),
        });
        values.insert(Term::integer(partial.count));
        if extra_partial(op).is_some() {
            let n = if op == AggOp::Min { partial.min } else { partial.max };
            if let Some(n) = n {
                values.insert(Term::number(n));
            }
        }
    }
    let mut node_count = values.len() + groups;
    if groups > 0 {
        node_count += usize::from(!values.contains(&view_iri(v.id())));
        // Group labels are blank nodes and cannot collide with data values
        // unless the data already uses the same label.
        node_count -= (0..groups)
            .filter(|i| values.contains(&Term::BlankNode(group_label(v.id(), *i))))
            .count();
    }
    Ok(ViewProfile {
        group_count: groups,
        triple_count,
        node_count,
    })
}

/// Fixed-order numeric description of a query for the learned model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Feature configuration and name list for one (graph, facet) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    names: Vec<String>,
    /// Graphs up to this many triples get exact group counts.
    exact_group_limit: usize,
}

impl FeatureSpace {
    pub const DEFAULT_EXACT_GROUP_LIMIT: usize = 50_000;

    pub fn new(lattice: &Lattice) -> Self {
        let facet = lattice.facet();
        let mut names = Vec::new();
        for (i, tp) in facet.pattern().iter().enumerate() {
            let label = match &tp.p {
                PatternTerm::Const(t) => String::from(t.lexical()),
                PatternTerm::Var(v) => format!("{v}"),
            };
            names.push(format!("pattern{i}.present[{label}]"));
            names.push(format!("pattern{i}.frequency[{label}]"));
        }
        names.push("groupVarCount".into());
        for op in AggOp::ALL {
            names.push(format!("agg.{op}"));
        }
        for v in facet.group_vars() {
            names.push(format!("distinct[{}]", v.name()));
        }
        names.push("filterCount".into());
        names.push("groupCount".into());
        FeatureSpace {
            names,
            exact_group_limit: Self::DEFAULT_EXACT_GROUP_LIMIT,
        }
    }

    pub fn with_exact_group_limit(mut self, limit: usize) -> Self {
        self.exact_group_limit = limit;
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }
}

/// Distinct values a variable can take, from predicate statistics: the
/// tightest bound over the constant-predicate patterns it occurs in.
fn distinct_estimate(g: &Graph, lattice: &Lattice, var: &Variable) -> usize {
    let mut best: Option<usize> = None;
    for tp in lattice.facet().pattern() {
        let PatternTerm::Const(p) = &tp.p else { continue };
        let st = g.predicate_stats(p);
        if tp.o.var() == Some(var) {
            best = Some(best.map_or(st.distinct_objects, |b| b.min(st.distinct_objects)));
        }
        if tp.s.var() == Some(var) {
            best = Some(best.map_or(st.distinct_subjects, |b| b.min(st.distinct_subjects)));
        }
    }
    best.unwrap_or_else(|| g.dictionary().len())
}

/// Shared state for pricing the nodes of one lattice over one graph.
/// Profiles are computed on first use and cached.
pub struct CostContext<'a> {
    graph: &'a Graph,
    lattice: &'a Lattice,
    profiles: Vec<OnceCell<ViewProfile>>,
    features: FeatureSpace,
}

impl<'a> CostContext<'a> {
    pub fn new(graph: &'a Graph, lattice: &'a Lattice) -> Self {
        CostContext {
            graph,
            lattice,
            profiles: (0..lattice.len()).map(|_| OnceCell::new()).collect(),
            features: FeatureSpace::new(lattice),
        }
    }

    pub fn with_feature_space(mut self, features: FeatureSpace) -> Self {
        self.features = features;
        self
    }

    pub fn graph(&self) -> &'a Graph {
        self.graph
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    pub fn feature_space(&self) -> &FeatureSpace {
        &self.features
    }

    pub fn profile(&self, v: &ViewNode) -> Result<ViewProfile> {
        let cell = &self.profiles[v.mask() as usize];
        if let Some(p) = cell.get() {
            return Ok(*p);
        }
        let p = view_profile(self.graph, self.lattice, v)?;
        let _ = cell.set(p);
        Ok(p)
    }

    /// Seeds the cache, e.g. with profiles computed elsewhere in parallel.
    pub fn insert_profile(&self, v: &ViewNode, profile: ViewProfile) {
        let _ = self.profiles[v.mask() as usize].set(profile);
    }

    /// Cost of every node under `model`, indexed by mask.
    pub fn node_costs(&self, model: &CostModel) -> Result<Vec<f64>> {
        self.lattice.nodes().iter().map(|v| model.cost(self, v)).collect()
    }

    /// Feature vector of a query conforming to the facet (a node query or a
    /// workload query).
    pub fn features(&self, q: &AnalyticalQuery) -> Result<FeatureVector> {
        let g = self.graph;
        let facet = self.lattice.facet();
        let q = facet.conform(q)?;
        let total = g.len().max(1) as f64;
        let mut values = Vec::with_capacity(self.features.dim());

        let mentioned: BTreeSet<&Variable> = q
            .group_vars()
            .iter()
            .chain(q.filters().iter().map(|f| &f.variable))
            .chain(core::iter::once(q.agg_var()))
            .collect();
        for tp in facet.pattern() {
            let present = tp.variables().any(|v| mentioned.contains(v));
            values.push(if present { 1.0 } else { 0.0 });
            let freq = match &tp.p {
                PatternTerm::Const(p) => g.predicate_stats(p).triples as f64 / total,
                PatternTerm::Var(_) => 1.0,
            };
            values.push(freq);
        }
        values.push(q.group_vars().len() as f64);
        for op in AggOp::ALL {
            values.push(if op == q.agg_op() { 1.0 } else { 0.0 });
        }
        let mut distinct_product = 1.0f64;
        for v in facet.group_vars() {
            if q.group_vars().contains(v) {
                let d = distinct_estimate(g, self.lattice, v) as f64;
                distinct_product *= d.max(1.0);
                values.push(d);
            } else {
                values.push(0.0);
            }
        }
        values.push(q.filters().len() as f64);
        let groups = if g.len() <= self.features.exact_group_limit {
            evaluate(g, &q)?.len() as f64
        } else {
            let bindings = facet
                .pattern()
                .iter()
                .filter_map(|tp| match &tp.p {
                    PatternTerm::Const(p) => Some(g.predicate_stats(p).triples),
                    PatternTerm::Var(_) => None,
                })
                .min()
                .unwrap_or(g.len()) as f64;
            distinct_product.min(bindings)
        };
        values.push(groups);
        debug_assert_eq!(values.len(), self.features.dim());
        if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Evaluation(format!(
                "feature {} is not finite",
                self.features.names[bad]
            )));
        }
        Ok(FeatureVector { values })
    }
}

/// Costs of every node under several models, keyed by model name.
pub fn cost_table(ctx: &CostContext<'_>, models: &[CostModel]) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    for m in models {
        out.insert(String::from(m.kind().name()), ctx.node_costs(m)?);
    }
    Ok(out)
}
