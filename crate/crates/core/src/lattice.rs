//! Facets and the lattice of views they induce.
//!
//! A view groups the facet's pattern by a subset of its grouping variables.
//! Subsets are stored as bitmasks over the facet's variable order, so the
//! node for subset `m` lives at index `m` and `w ⪯ v` is `w & !v == 0`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::query::{AggOp, AnalyticalQuery, PatternTerm, TriplePattern, Variable};

/// Largest facet we agree to expand into a lattice.
pub const MAX_GROUP_VARS: usize = 20;

/// `⟨X, P, agg(u)⟩`: the root query a lattice is built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Facet {
    query: AnalyticalQuery,
}

impl Facet {
    pub fn new(query: AnalyticalQuery) -> Result<Self> {
        if query.group_vars().is_empty() {
            return Err(Error::Semantic("a facet needs at least one grouping variable".into()));
        }
        if !query.filters().is_empty() {
            return Err(Error::Semantic(
                "a facet cannot carry FILTERs; restrict with constants in the pattern".into(),
            ));
        }
        Ok(Facet { query })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Facet::new(crate::query::parse_query(text)?)
    }

    pub fn query(&self) -> &AnalyticalQuery {
        &self.query
    }

    pub fn group_vars(&self) -> &[Variable] {
        self.query.group_vars()
    }

    pub fn pattern(&self) -> &[TriplePattern] {
        self.query.pattern()
    }

    pub fn agg_op(&self) -> AggOp {
        self.query.agg_op()
    }

    pub fn agg_var(&self) -> &Variable {
        self.query.agg_var()
    }

    /// Restates `q` in this facet's variable names.
    ///
    /// `q` conforms when some renaming of its variables maps its pattern
    /// onto the facet pattern, its measure onto `u` and its aggregate is the
    /// facet's. Grouping variables must then land inside `X`.
    pub fn conform(&self, q: &AnalyticalQuery) -> Result<AnalyticalQuery> {
        if q.agg_op() != self.agg_op() {
            return Err(Error::FacetMismatch(format!(
                "aggregate {} differs from the facet's {}",
                q.agg_op(),
                self.agg_op()
            )));
        }
        if q.pattern().len() != self.pattern().len() {
            return Err(Error::FacetMismatch("graph patterns differ".into()));
        }
        let mut map = BTreeMap::new();
        map.insert(q.agg_var().clone(), self.agg_var().clone());
        let mut used = alloc::vec![false; self.pattern().len()];
        if !match_patterns(q.pattern(), self.pattern(), 0, &mut used, &mut map) {
            return Err(Error::FacetMismatch("graph patterns differ".into()));
        }
        let result_var = self.query.result_var().clone();
        let renamed = q.rename(&|v: &Variable| {
            if v == q.result_var() {
                result_var.clone()
            } else {
                map.get(v).cloned().unwrap_or_else(|| v.clone())
            }
        })?;
        for v in renamed.group_vars() {
            if !self.group_vars().contains(v) {
                return Err(Error::FacetMismatch(format!(
                    "grouping variable {v} is not a facet dimension"
                )));
            }
        }
        Ok(renamed)
    }
}

fn bind(map: &mut BTreeMap<Variable, Variable>, from: &Variable, to: &Variable) -> Option<bool> {
    match map.get(from) {
        Some(existing) => (existing == to).then_some(false),
        None => {
            if map.values().any(|v| v == to) {
                return None;
            }
            map.insert(from.clone(), to.clone());
            Some(true)
        }
    }
}

/// Backtracking search for an injective variable renaming taking every
/// pattern in `qs` onto a distinct pattern in `fs`.
fn match_patterns(
    qs: &[TriplePattern],
    fs: &[TriplePattern],
    i: usize,
    used: &mut Vec<bool>,
    map: &mut BTreeMap<Variable, Variable>,
) -> bool {
    if i == qs.len() {
        return true;
    }
    for j in 0..fs.len() {
        if used[j] {
            continue;
        }
        let mut added = Vec::new();
        let mut ok = true;
        for (a, b) in [(&qs[i].s, &fs[j].s), (&qs[i].p, &fs[j].p), (&qs[i].o, &fs[j].o)] {
            match (a, b) {
                (PatternTerm::Const(x), PatternTerm::Const(y)) if x == y => {}
                (PatternTerm::Var(x), PatternTerm::Var(y)) => match bind(map, x, y) {
                    Some(true) => added.push(x.clone()),
                    Some(false) => {}
                    None => {
                        ok = false;
                        break;
                    }
                },
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            used[j] = true;
            if match_patterns(qs, fs, i + 1, used, map) {
                return true;
            }
            used[j] = false;
        }
        for v in added {
            map.remove(&v);
        }
    }
    false
}

/// One view of the lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewNode {
    mask: u32,
    id: String,
    group_vars: Vec<Variable>,
    query: AnalyticalQuery,
}

impl ViewNode {
    /// Sorted variable names joined by `_`, or `apex` for the empty set.
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Grouping variables in facet order.
    pub fn group_vars(&self) -> &[Variable] {
        &self.group_vars
    }

    pub fn query(&self) -> &AnalyticalQuery {
        &self.query
    }

    pub fn level(&self) -> usize {
        self.mask.count_ones() as usize
    }
}

/// Canonical id of a variable subset.
pub fn canonical_id<'a>(vars: impl IntoIterator<Item = &'a Variable>) -> String {
    let mut names: Vec<&str> = vars.into_iter().map(Variable::name).collect();
    if names.is_empty() {
        return "apex".into();
    }
    names.sort_unstable();
    names.join("_")
}

#[derive(Debug, Clone)]
pub struct Lattice {
    facet: Facet,
    nodes: Vec<ViewNode>,
    by_id: BTreeMap<String, u32>,
}

impl Lattice {
    pub fn build(facet: Facet) -> Result<Self> {
        let vars = facet.group_vars();
        if vars.len() > MAX_GROUP_VARS {
            return Err(Error::Capacity(format!(
                "{} grouping variables; lattices are limited to {MAX_GROUP_VARS}",
                vars.len()
            )));
        }
        let size = 1u32 << vars.len();
        let mut nodes = Vec::with_capacity(size as usize);
        let mut by_id = BTreeMap::new();
        for mask in 0..size {
            let group_vars: Vec<Variable> = vars
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, v)| v.clone())
                .collect();
            let id = canonical_id(&group_vars);
            if by_id.insert(id.clone(), mask).is_some() {
                return Err(Error::Semantic(format!(
                    "view id `{id}` is ambiguous; rename variables containing `_` or named `apex`"
                )));
            }
            let query = facet.query().with_grouping(group_vars.clone(), Vec::new())?;
            nodes.push(ViewNode {
                mask,
                id,
                group_vars,
                query,
            });
        }
        Ok(Lattice { facet, nodes, by_id })
    }

    pub fn facet(&self) -> &Facet {
        &self.facet
    }

    /// Nodes indexed by mask.
    pub fn nodes(&self) -> &[ViewNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&ViewNode> {
        self.by_id.get(id).map(|m| &self.nodes[*m as usize])
    }

    pub fn node_or_err(&self, id: &str) -> Result<&ViewNode> {
        self.node(id).ok_or_else(|| Error::UnknownView(id.into()))
    }

    pub fn by_mask(&self, mask: u32) -> &ViewNode {
        &self.nodes[mask as usize]
    }

    pub fn root(&self) -> &ViewNode {
        self.nodes.last().expect("lattice has a root")
    }

    pub fn apex(&self) -> &ViewNode {
        &self.nodes[0]
    }

    pub fn is_root(&self, v: &ViewNode) -> bool {
        v.mask == self.root().mask
    }

    /// `w ⪯ v`: `w` groups by a subset of `v`'s variables.
    pub fn precedes(&self, w: &ViewNode, v: &ViewNode) -> bool {
        w.mask & !v.mask == 0
    }

    /// Masks of the subsets of `mask`, including itself and 0.
    pub fn submasks(mask: u32) -> impl Iterator<Item = u32> {
        let mut next = Some(mask);
        core::iter::from_fn(move || {
            let cur = next?;
            next = if cur == 0 { None } else { Some((cur - 1) & mask) };
            Some(cur)
        })
    }

    /// Every `w ⪯ v`, including `v`.
    pub fn descendants(&self, v: &ViewNode) -> Vec<&ViewNode> {
        Self::submasks(v.mask).map(|m| &self.nodes[m as usize]).collect()
    }

    /// Every `u` with `v ⪯ u`, excluding `v`.
    pub fn ancestors(&self, v: &ViewNode) -> Vec<&ViewNode> {
        let free = self.root().mask & !v.mask;
        Self::submasks(free)
            .filter(|m| *m != 0)
            .map(|m| &self.nodes[(m | v.mask) as usize])
            .collect()
    }

    /// Hasse neighbours one level up.
    pub fn parents(&self, v: &ViewNode) -> Vec<&ViewNode> {
        (0..self.facet.group_vars().len())
            .filter(|i| v.mask & (1 << i) == 0)
            .map(|i| &self.nodes[(v.mask | (1 << i)) as usize])
            .collect()
    }

    /// Hasse neighbours one level down.
    pub fn children(&self, v: &ViewNode) -> Vec<&ViewNode> {
        (0..self.facet.group_vars().len())
            .filter(|i| v.mask & (1 << i) != 0)
            .map(|i| &self.nodes[(v.mask & !(1 << i)) as usize])
            .collect()
    }

    /// Can `q` be answered from `v`'s stored partials? `q` must conform to
    /// the facet. Every grouping and filter variable has to be kept by `v`;
    /// the aggregate is always recomposable from sum/count/min/max partials.
    pub fn can_answer(&self, v: &ViewNode, q: &AnalyticalQuery) -> Result<bool> {
        let q = self.facet.conform(q)?;
        Ok(self.can_answer_conformed(v, &q))
    }

    /// [`Lattice::can_answer`] for a query already in facet variables.
    pub fn can_answer_conformed(&self, v: &ViewNode, q: &AnalyticalQuery) -> bool {
        let kept = |x: &Variable| v.group_vars.contains(x);
        q.group_vars().iter().all(kept) && q.filters().iter().all(|f| kept(&f.variable))
    }

    /// Smallest node keeping every grouping and filter variable of a
    /// conformed query, if those are all facet dimensions.
    pub fn required_mask(&self, q: &AnalyticalQuery) -> Option<u32> {
        let mut mask = 0;
        for v in q.group_vars().iter().chain(q.filters().iter().map(|f| &f.variable)) {
            let i = self.facet.group_vars().iter().position(|x| x == v)?;
            mask |= 1 << i;
        }
        Some(mask)
    }
}
