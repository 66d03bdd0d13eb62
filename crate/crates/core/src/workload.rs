//! Random workloads and synthetic star-shaped graphs.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{row_layout, visit_bgp};
use crate::graph::{Graph, GraphBuilder};
use crate::lattice::{Facet, Lattice};
use crate::query::{AggOp, AnalyticalQuery, Comparator, FilterExpr, PatternTerm, TriplePattern, Variable};
use crate::term::Term;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase", default))]
pub struct WorkloadSpec {
    pub count: usize,
    pub seed: u64,
    pub filter_probability: f64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            count: 100,
            seed: 0,
            filter_probability: 0.3,
        }
    }
}

/// Sorted distinct values bound to each facet dimension.
pub fn observed_values(g: &Graph, facet: &Facet) -> Result<Vec<Vec<Term>>> {
    let dims = facet.group_vars();
    let mut sets: Vec<BTreeSet<Term>> = dims.iter().map(|_| BTreeSet::new()).collect();
    let order = row_layout(facet.pattern());
    let pos: Vec<usize> = dims
        .iter()
        .map(|v| order.iter().position(|x| x == v).expect("dimension in pattern"))
        .collect();
    visit_bgp(g, facet.pattern(), &[], |row| {
        for (set, &i) in sets.iter_mut().zip(&pos) {
            let t = g.term(row[i]);
            if !set.contains(t) {
                set.insert(t.clone());
            }
        }
        Ok(())
    })?;
    Ok(sets.into_iter().map(|s| s.into_iter().collect()).collect())
}

/// `spec.count` queries drawn from the facet: a uniform non-empty subset of
/// the dimensions, and with probability `filter_probability` an equality
/// filter on one of them with an observed value.
pub fn generate_workload(g: &Graph, lattice: &Lattice, spec: &WorkloadSpec) -> Result<Vec<AnalyticalQuery>> {
    if g.is_empty() {
        return Err(Error::Evaluation("cannot draw a workload from an empty graph".into()));
    }
    if !(0.0..=1.0).contains(&spec.filter_probability) {
        return Err(Error::Semantic(format!(
            "filter probability {} is outside [0, 1]",
            spec.filter_probability
        )));
    }
    let facet = lattice.facet();
    let values = if spec.filter_probability > 0.0 {
        observed_values(g, facet)?
    } else {
        facet.group_vars().iter().map(|_| Vec::new()).collect()
    };
    let n = facet.group_vars().len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let mask: u32 = rng.random_range(1..(1u32 << n));
        let dims: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let group_vars: Vec<Variable> = dims.iter().map(|&i| facet.group_vars()[i].clone()).collect();
        let mut filters = Vec::new();
        if rng.random_bool(spec.filter_probability) {
            let d = dims[rng.random_range(0..dims.len())];
            let domain = &values[d];
            if !domain.is_empty() {
                let value = domain[rng.random_range(0..domain.len())].clone();
                filters.push(FilterExpr::new(facet.group_vars()[d].clone(), Comparator::Eq, value)?);
            }
        }
        out.push(facet.query().with_grouping(group_vars, filters)?);
    }
    Ok(out)
}

/// How observations pick dimension values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub enum Assignment {
    /// Uniform random value per observation and dimension.
    Uniform,
    /// Observations enumerate value combinations in order, the first
    /// dimension varying fastest, so `n = product of cardinalities` covers
    /// every combination exactly once.
    Cyclic,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct StarParams {
    pub observations: usize,
    /// Dimension names (valid variable names) and cardinalities.
    pub dims: Vec<(String, usize)>,
    /// Inclusive measure range.
    pub measure_range: (i64, i64),
    pub seed: u64,
    pub assignment: Assignment,
    pub agg: AggOp,
}

pub const SYNTH_PREFIX: &str = "urn:sofos:synth:";

fn synth(local: &str) -> Term {
    Term::Iri(format!("{SYNTH_PREFIX}{local}"))
}

/// Builds a star graph with one observation node per row and the facet
/// grouping by every dimension.
pub fn synthesize_star(params: &StarParams) -> Result<(Graph, Facet)> {
    if params.observations == 0 {
        return Err(Error::Semantic("a star graph needs at least one observation".into()));
    }
    if params.dims.is_empty() {
        return Err(Error::Semantic("a star graph needs at least one dimension".into()));
    }
    let (lo, hi) = params.measure_range;
    if lo > hi {
        return Err(Error::Semantic(format!("empty measure range {lo}..={hi}")));
    }
    let mut names = BTreeSet::new();
    let mut dim_vars = Vec::new();
    for (name, card) in &params.dims {
        let v = Variable::new(name.clone())?;
        if matches!(name.as_str(), "obs" | "measure" | "total") || !names.insert(name.as_str()) {
            return Err(Error::Semantic(format!(
                "dimension name {name} is reserved or repeated"
            )));
        }
        if *card == 0 {
            return Err(Error::Semantic(format!("dimension {name} has cardinality 0")));
        }
        dim_vars.push(v);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let preds: Vec<Term> = params.dims.iter().map(|(n, _)| synth(n)).collect();
    let values: Vec<Vec<Term>> = params
        .dims
        .iter()
        .map(|(n, card)| (0..*card).map(|i| synth(&format!("{n}_{i}"))).collect())
        .collect();
    let measure = synth("measure");
    let mut b = GraphBuilder::new();
    for i in 0..params.observations {
        let obs = synth(&format!("obs{i}"));
        let mut rest = i;
        for (d, (_, card)) in params.dims.iter().enumerate() {
            let v = match params.assignment {
                Assignment::Uniform => rng.random_range(0..*card),
                Assignment::Cyclic => {
                    let v = rest % card;
                    rest /= card;
                    v
                }
            };
            b.insert(&obs, &preds[d], &values[d][v])?;
        }
        let m = rng.random_range(lo..=hi);
        b.insert(&obs, &measure, &Term::integer(m))?;
    }

    let obs_var = Variable::new("obs")?;
    let measure_var = Variable::new("measure")?;
    let mut pattern = Vec::with_capacity(dim_vars.len() + 1);
    for (p, v) in preds.iter().zip(&dim_vars) {
        pattern.push(TriplePattern::new(
            PatternTerm::Var(obs_var.clone()),
            PatternTerm::Const(p.clone()),
            PatternTerm::Var(v.clone()),
        )?);
    }
    pattern.push(TriplePattern::new(
        PatternTerm::Var(obs_var),
        PatternTerm::Const(measure),
        PatternTerm::Var(measure_var.clone()),
    )?);
    let q = AnalyticalQuery::new(
        dim_vars,
        pattern,
        Vec::new(),
        params.agg,
        measure_var,
        Variable::new("total")?,
    )?;
    Ok((b.build(), Facet::new(q)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::evaluate;
    use crate::fixture::{fix_pop_graph, FIX_POP_FACET};

    fn fix() -> (Graph, Lattice) {
        (
            fix_pop_graph(),
            Lattice::build(Facet::parse(FIX_POP_FACET).unwrap()).unwrap(),
        )
    }

    #[test]
    fn zero_count() {
        let (g, l) = fix();
        let spec = WorkloadSpec {
            count: 0,
            ..Default::default()
        };
        assert!(generate_workload(&g, &l, &spec).unwrap().is_empty());
    }

    #[test]
    fn queries_group_by_nonempty_subsets() {
        let (g, l) = fix();
        let spec = WorkloadSpec {
            count: 100,
            seed: 5,
            ..Default::default()
        };
        let w = generate_workload(&g, &l, &spec).unwrap();
        assert_eq!(w.len(), 100);
        for q in &w {
            assert!(!q.group_vars().is_empty());
            assert!(q.group_vars().iter().all(|v| l.facet().group_vars().contains(v)));
            assert!(l.can_answer(l.root(), q).unwrap());
        }
        assert_eq!(w, generate_workload(&g, &l, &spec).unwrap());
    }

    #[test]
    fn filter_values_come_from_observed_bindings() {
        let (g, l) = fix();
        let spec = WorkloadSpec {
            count: 60,
            seed: 1,
            filter_probability: 1.0,
        };
        let allowed: BTreeSet<Term> = ["ex:FR", "ex:BE", "ex:French", "ex:Dutch"]
            .iter()
            .map(|s| Term::iri(*s).unwrap())
            .chain([Term::integer(2020), Term::integer(2021)])
            .collect();
        for q in generate_workload(&g, &l, &spec).unwrap() {
            assert_eq!(q.filters().len(), 1);
            let f = &q.filters()[0];
            assert!(allowed.contains(&f.constant), "{}", f.constant);
            assert!(q.group_vars().contains(&f.variable));
        }
    }

    #[test]
    fn empty_graph_rejected() {
        let (_, l) = fix();
        assert!(generate_workload(&Graph::empty(), &l, &WorkloadSpec::default()).is_err());
    }

    fn params(n: usize, dims: &[(&str, usize)], assignment: Assignment) -> StarParams {
        StarParams {
            observations: n,
            dims: dims.iter().map(|(d, c)| (String::from(*d), *c)).collect(),
            measure_range: (1, 100),
            seed: 3,
            assignment,
            agg: AggOp::Sum,
        }
    }

    #[test]
    fn star_shape() {
        let (g, f) = synthesize_star(&params(10, &[("a", 2), ("b", 3)], Assignment::Uniform)).unwrap();
        assert_eq!(g.len(), 30);
        assert_eq!(f.group_vars().len(), 2);
        let t = evaluate(&g, f.query()).unwrap();
        assert!(t.len() <= 6);
        assert_eq!(
            synthesize_star(&params(10, &[("a", 2), ("b", 3)], Assignment::Uniform))
                .unwrap()
                .0,
            g
        );
    }

    #[test]
    fn cyclic_days_roll_up_by_365() {
        let (g, f) = synthesize_star(&params(3650, &[("day", 365), ("year", 10)], Assignment::Cyclic)).unwrap();
        let l = Lattice::build(f).unwrap();
        let groups = |id: &str| evaluate(&g, l.node(id).unwrap().query()).unwrap().len();
        assert_eq!(groups("day"), 365);
        assert_eq!(groups("year"), 10);
        assert_eq!(groups("day_year"), 3650);
        assert_eq!(groups("day_year") / groups("year"), 365);
    }

    #[test]
    fn star_preconditions() {
        assert!(synthesize_star(&params(0, &[("a", 2)], Assignment::Uniform)).is_err());
        assert!(synthesize_star(&params(1, &[("a", 0)], Assignment::Uniform)).is_err());
        assert!(synthesize_star(&params(1, &[("obs", 2)], Assignment::Uniform)).is_err());
        assert!(synthesize_star(&params(1, &[], Assignment::Uniform)).is_err());
    }
}
