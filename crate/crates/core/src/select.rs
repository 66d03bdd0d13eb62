//! Budget-k view selection.
//!
//! Costs are looked up once per node and the selectors work on the
//! resulting vector (indexed by node mask), so the same code serves every
//! cost model.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cost::{CostContext, CostModel, CostModelKind};
use crate::error::{Error, Result};
use crate::lattice::Lattice;

/// Largest number of subsets the exhaustive selector will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionStep {
    pub candidate: String,
    pub benefit: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "camelCase"))]
pub struct SelectionPlan {
    pub chosen: Vec<String>,
    pub budget: usize,
    pub model: CostModelKind,
    pub per_step: Vec<SelectionStep>,
    pub total_estimated_cost: f64,
}

/// Knobs beyond the view budget.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectOptions {
    /// Per-node query weights, indexed by mask. Uniform when absent.
    pub weights: Option<Vec<f64>>,
    /// Cap on the summed triple counts of the chosen views.
    pub triple_budget: Option<usize>,
}

/// Cheapest cost of answering `target` from `selected` or the root.
pub fn answer_cost(lattice: &Lattice, costs: &[f64], selected: &[u32], target: u32) -> f64 {
    let root = lattice.root().mask();
    selected
        .iter()
        .filter(|&&v| target & !v == 0)
        .map(|&v| costs[v as usize])
        .fold(costs[root as usize], f64::min)
}

fn check_weights(lattice: &Lattice, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != lattice.len() {
            return Err(Error::InvalidSelection(format!(
                "expected {} node weights, got {}",
                lattice.len(),
                w.len()
            )));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidSelection(
                "node weights must be finite and non-negative".into(),
            ));
        }
    }
    Ok(())
}

fn weight(weights: Option<&[f64]>, mask: u32) -> f64 {
    weights.map_or(1.0, |w| w[mask as usize])
}

/// Σ over all nodes of weight × answer cost.
pub fn total_cost(lattice: &Lattice, costs: &[f64], selected: &[u32], weights: Option<&[f64]>) -> f64 {
    lattice
        .nodes()
        .iter()
        .map(|w| weight(weights, w.mask()) * answer_cost(lattice, costs, selected, w.mask()))
        .sum()
}

/// Benefit of adding `candidate` when nodes currently cost `current`.
fn benefit(costs: &[f64], current: &[f64], candidate: u32, weights: Option<&[f64]>) -> f64 {
    let c = costs[candidate as usize];
    Lattice::submasks(candidate)
        .map(|w| weight(weights, w) * (current[w as usize] - c).max(0.0))
        .sum()
}

/// Greedy selection over a precomputed cost vector.
///
/// `shuffle_seed` replaces the (cost, id) tie-break with a seeded random
/// order and disables the early stop; `triple_counts` is required when
/// `options.triple_budget` is set.
pub fn greedy_with_costs(
    lattice: &Lattice,
    costs: &[f64],
    k: usize,
    model: CostModelKind,
    shuffle_seed: Option<u64>,
    options: &SelectOptions,
    triple_counts: Option<&[f64]>,
) -> Result<SelectionPlan> {
    let weights = options.weights.as_deref();
    check_weights(lattice, weights)?;
    if options.triple_budget.is_some() && triple_counts.is_none() {
        return Err(Error::InvalidSelection("triple budget needs triple counts".into()));
    }
    let root = lattice.root().mask();
    let mut candidates: Vec<u32> = lattice
        .nodes()
        .iter()
        .filter(|v| v.mask() != root)
        .map(|v| v.mask())
        .collect();
    candidates.sort_by(|a, b| lattice.by_mask(*a).id().cmp(lattice.by_mask(*b).id()));
    // Position in this list is the final tie-break.
    if let Some(seed) = shuffle_seed {
        candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let mut current: Vec<f64> = alloc::vec![costs[root as usize]; lattice.len()];
    let mut chosen: Vec<u32> = Vec::new();
    let mut per_step = Vec::new();
    let mut used_triples = 0.0;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &c) in candidates.iter().enumerate() {
            if chosen.contains(&c) {
                continue;
            }
            if let (Some(cap), Some(tc)) = (options.triple_budget, triple_counts) {
                if used_triples + tc[c as usize] > cap as f64 {
                    continue;
                }
            }
            let b = benefit(costs, &current, c, weights);
            let better = match best {
                None => true,
                Some((bp, bb)) => {
                    let bc = candidates[bp];
                    if b != bb {
                        b > bb
                    } else if shuffle_seed.is_some() {
                        false
                    } else {
                        costs[c as usize] < costs[bc as usize]
                    }
                }
            };
            if better {
                best = Some((pos, b));
            }
        }
        let Some((pos, b)) = best else { break };
        if b <= 0.0 && shuffle_seed.is_none() {
            break;
        }
        let c = candidates[pos];
        for w in Lattice::submasks(c) {
            current[w as usize] = current[w as usize].min(costs[c as usize]);
        }
        if let Some(tc) = triple_counts {
            used_triples += tc[c as usize];
        }
        chosen.push(c);
        per_step.push(SelectionStep {
            candidate: String::from(lattice.by_mask(c).id()),
            benefit: b,
        });
    }
    Ok(SelectionPlan {
        total_estimated_cost: total_cost(lattice, costs, &chosen, weights),
        chosen: per_step.iter().map(|s| s.candidate.clone()).collect(),
        budget: k,
        model,
        per_step,
    })
}

/// Greedy selection under `model`. The user-defined model returns the
/// user's own picks after validating them.
pub fn greedy_select(
    ctx: &CostContext<'_>,
    model: &CostModel,
    k: usize,
    options: &SelectOptions,
) -> Result<SelectionPlan> {
    if let CostModel::UserDefined { chosen } = model {
        return user_plan(ctx, model, chosen, k, options);
    }
    let costs = ctx.node_costs(model)?;
    let triples = match options.triple_budget {
        Some(_) => Some(ctx.node_costs(&CostModel::TripleCount)?),
        None => None,
    };
    let seed = match model {
        CostModel::Random { seed } => Some(*seed),
        _ => None,
    };
    greedy_with_costs(
        ctx.lattice(),
        &costs,
        k,
        model.kind(),
        seed,
        options,
        triples.as_deref(),
    )
}

fn user_plan(
    ctx: &CostContext<'_>,
    model: &CostModel,
    chosen: &[String],
    k: usize,
    options: &SelectOptions,
) -> Result<SelectionPlan> {
    let lattice = ctx.lattice();
    let weights = options.weights.as_deref();
    check_weights(lattice, weights)?;
    if chosen.len() > k {
        return Err(Error::InvalidSelection(format!(
            "{} views chosen but the budget is {k}",
            chosen.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut masks = Vec::new();
    for id in chosen {
        let v = lattice.node_or_err(id)?;
        if lattice.is_root(v) {
            return Err(Error::InvalidSelection(format!(
                "the root view {id} cannot be selected"
            )));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidSelection(format!("view {id} chosen twice")));
        }
        masks.push(v.mask());
    }
    let costs = ctx.node_costs(model)?;
    let root = lattice.root().mask();
    let mut current: Vec<f64> = alloc::vec![costs[root as usize]; lattice.len()];
    let mut per_step = Vec::new();
    for &c in &masks {
        let b = benefit(&costs, &current, c, weights);
        for w in Lattice::submasks(c) {
            current[w as usize] = current[w as usize].min(costs[c as usize]);
        }
        per_step.push(SelectionStep {
            candidate: String::from(lattice.by_mask(c).id()),
            benefit: b,
        });
    }
    Ok(SelectionPlan {
        chosen: chosen.to_vec(),
        budget: k,
        model: CostModelKind::UserDefined,
        per_step,
        total_estimated_cost: total_cost(lattice, &costs, &masks, weights),
    })
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(x) => x / (i + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// Minimum-total-cost subset of size `min(k, candidates)` by enumeration.
pub fn exhaustive_with_costs(
    lattice: &Lattice,
    costs: &[f64],
    k: usize,
    model: CostModelKind,
    weights: Option<&[f64]>,
) -> Result<SelectionPlan> {
    check_weights(lattice, weights)?;
    let root = lattice.root().mask();
    let mut candidates: Vec<u32> = lattice
        .nodes()
        .iter()
        .filter(|v| v.mask() != root)
        .map(|v| v.mask())
        .collect();
    candidates.sort_by(|a, b| lattice.by_mask(*a).id().cmp(lattice.by_mask(*b).id()));
    let n = candidates.len();
    let size = k.min(n);
    let combos = binomial(n as u64, size as u64);
    if combos > EXHAUSTIVE_LIMIT {
        return Err(Error::Capacity(format!(
            "exhaustive selection would enumerate {combos} subsets (limit {EXHAUSTIVE_LIMIT})"
        )));
    }

    // Lexicographic enumeration of index combinations; the first minimum
    // wins, which is the lexicographically smallest id list.
    let mut idx: Vec<usize> = (0..size).collect();
    let mut best: Option<(f64, Vec<u32>)> = None;
    loop {
        let subset: Vec<u32> = idx.iter().map(|&i| candidates[i]).collect();
        let total = total_cost(lattice, costs, &subset, weights);
        if best.as_ref().is_none_or(|(t, _)| total < *t) {
            best = Some((total, subset));
        }
        let Some(i) = (0..size).rev().find(|&i| idx[i] < n - size + i) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (total, subset) = best.expect("at least the empty subset is enumerated");

    let mut current: Vec<f64> = alloc::vec![costs[root as usize]; lattice.len()];
    let mut per_step = Vec::new();
    for &c in &subset {
        let b = benefit(costs, &current, c, weights);
        for w in Lattice::submasks(c) {
            current[w as usize] = current[w as usize].min(costs[c as usize]);
        }
        per_step.push(SelectionStep {
            candidate: String::from(lattice.by_mask(c).id()),
            benefit: b,
        });
    }
    Ok(SelectionPlan {
        chosen: per_step.iter().map(|s| s.candidate.clone()).collect(),
        budget: k,
        model,
        per_step,
        total_estimated_cost: total,
    })
}

/// Exhaustive selection under `model`.
pub fn exhaustive_select(
    ctx: &CostContext<'_>,
    model: &CostModel,
    k: usize,
    options: &SelectOptions,
) -> Result<SelectionPlan> {
    let costs = ctx.node_costs(model)?;
    exhaustive_with_costs(ctx.lattice(), &costs, k, model.kind(), options.weights.as_deref())
}

/// Σ_w cost(root) − Σ_w answer_cost(w, chosen), with uniform weights.
pub fn total_benefit(lattice: &Lattice, costs: &[f64], plan: &SelectionPlan) -> Result<f64> {
    let masks = plan
        .chosen
        .iter()
        .map(|id| lattice.node_or_err(id).map(|v| v.mask()))
        .collect::<Result<Vec<_>>>()?;
    Ok(total_cost(lattice, costs, &[], None) - total_cost(lattice, costs, &masks, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{fix_pop_graph, FIX_POP_FACET};
    use crate::graph::Graph;
    use crate::lattice::Facet;
    use alloc::vec;

    fn setup() -> (Graph, Lattice) {
        (
            fix_pop_graph(),
            Lattice::build(Facet::parse(FIX_POP_FACET).unwrap()).unwrap(),
        )
    }

    fn mask(l: &Lattice, id: &str) -> u32 {
        l.node(id).unwrap().mask()
    }

    #[test]
    fn answer_cost_examples() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let costs = ctx.node_costs(&CostModel::AggValueCount).unwrap();
        for n in l.nodes() {
            assert_eq!(answer_cost(&l, &costs, &[], n.mask()), 4.0);
        }
        let sel = [mask(&l, "c_l")];
        assert_eq!(answer_cost(&l, &costs, &sel, mask(&l, "l")), 3.0);
        assert_eq!(answer_cost(&l, &costs, &sel, mask(&l, "y")), 4.0);
    }

    #[test]
    fn greedy_picks_c_for_aggvalues() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let plan = greedy_select(&ctx, &CostModel::AggValueCount, 1, &SelectOptions::default()).unwrap();
        assert_eq!(plan.chosen, vec!["c"]);
        assert_eq!(plan.per_step[0].benefit, 4.0);
        assert_eq!(plan.total_estimated_cost, 8.0 * 4.0 - 4.0);
    }

    #[test]
    fn zero_budget() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let plan = greedy_select(&ctx, &CostModel::TripleCount, 0, &SelectOptions::default()).unwrap();
        assert!(plan.chosen.is_empty());
        let ex = exhaustive_select(&ctx, &CostModel::AggValueCount, 0, &SelectOptions::default()).unwrap();
        assert!(ex.chosen.is_empty());
        assert_eq!(ex.total_estimated_cost, 32.0);
    }

    #[test]
    fn random_is_seeded() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let run = |seed| greedy_select(&ctx, &CostModel::Random { seed }, 3, &SelectOptions::default()).unwrap();
        let a = run(11);
        assert_eq!(a.chosen.len(), 3);
        assert_eq!(a, run(11));
        let distinct: BTreeSet<_> = a.chosen.iter().collect();
        assert_eq!(distinct.len(), 3);
        assert!(!a.chosen.iter().any(|c| c == "c_l_y"));
        let plans: BTreeSet<Vec<String>> = (0..20).map(|s| run(s).chosen).collect();
        assert!(plans.len() > 1);
    }

    #[test]
    fn exhaustive_not_worse_than_greedy() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        for k in 0..=7 {
            for m in [CostModel::AggValueCount, CostModel::TripleCount, CostModel::NodeCount] {
                let gr = greedy_select(&ctx, &m, k, &SelectOptions::default()).unwrap();
                let ex = exhaustive_select(&ctx, &m, k, &SelectOptions::default()).unwrap();
                assert!(ex.total_estimated_cost <= gr.total_estimated_cost);
            }
        }
    }

    #[test]
    fn exhaustive_small_lattice_takes_all() {
        let g = fix_pop_graph();
        let f = Facet::parse(
            "SELECT ?c ?l (SUM(?u) AS ?t) WHERE { ?o <ex:country> ?c . ?o <ex:lang> ?l . ?o <ex:pop> ?u } GROUP BY ?c ?l",
        )
        .unwrap();
        let l = Lattice::build(f).unwrap();
        let ctx = CostContext::new(&g, &l);
        let ex = exhaustive_select(&ctx, &CostModel::AggValueCount, 3, &SelectOptions::default()).unwrap();
        assert_eq!(ex.chosen, vec!["apex", "c", "l"]);
    }

    #[test]
    fn user_plan_validation() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let user = |ids: &[&str]| CostModel::UserDefined {
            chosen: ids.iter().map(|s| String::from(*s)).collect(),
        };
        let plan = greedy_select(&ctx, &user(&["c", "l"]), 2, &SelectOptions::default()).unwrap();
        assert_eq!(plan.chosen, vec!["c", "l"]);
        assert_eq!(plan.model, CostModelKind::UserDefined);
        let opts = SelectOptions::default();
        assert!(matches!(
            greedy_select(&ctx, &user(&["c_l_y"]), 2, &opts),
            Err(Error::InvalidSelection(_))
        ));
        assert!(matches!(
            greedy_select(&ctx, &user(&["zz"]), 2, &opts),
            Err(Error::UnknownView(_))
        ));
        assert!(matches!(
            greedy_select(&ctx, &user(&["c", "c"]), 2, &opts),
            Err(Error::InvalidSelection(_))
        ));
        assert!(matches!(
            greedy_select(&ctx, &user(&["c", "l", "y"]), 2, &opts),
            Err(Error::InvalidSelection(_))
        ));
    }

    #[test]
    fn triple_budget_caps_selection() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let opts = SelectOptions {
            weights: None,
            triple_budget: Some(10),
        };
        let plan = greedy_select(&ctx, &CostModel::AggValueCount, 3, &opts).unwrap();
        let tc = ctx.node_costs(&CostModel::TripleCount).unwrap();
        let used: f64 = plan.chosen.iter().map(|id| tc[mask(&l, id) as usize]).sum();
        assert!(used <= 10.0);
        assert!(!plan.chosen.is_empty());
    }

    #[test]
    fn weights_steer_selection() {
        let (g, l) = setup();
        let ctx = CostContext::new(&g, &l);
        let mut w = vec![0.0; l.len()];
        w[mask(&l, "y") as usize] = 1.0;
        let opts = SelectOptions {
            weights: Some(w),
            triple_budget: None,
        };
        let plan = greedy_select(&ctx, &CostModel::AggValueCount, 1, &opts).unwrap();
        assert_eq!(plan.chosen, vec!["y"]);
        let bad = SelectOptions {
            weights: Some(vec![1.0]),
            triple_budget: None,
        };
        assert!(greedy_select(&ctx, &CostModel::AggValueCount, 1, &bad).is_err());
    }

    #[test]
    fn binomial_counts() {
        assert_eq!(binomial(7, 3), 35);
        assert_eq!(binomial(1023, 3), 1023 * 1022 * 1021 / 6);
    }
}
