//! Training the learned cost model on measured query runtimes, and turning
//! model names from configs and requests into cost models.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sofos_core::cost::{train, CostContext, CostModel, CostModelKind, LinearRegressor, TrainConfig};
use sofos_core::eval::evaluate;
use sofos_core::graph::Graph;
use sofos_core::lattice::Lattice;
use sofos_core::query::AnalyticalQuery;
use sofos_core::workload::{generate_workload, WorkloadSpec};

use crate::error::{Result, SofosError};

/// Median of `reps` timed base evaluations after one warm-up, in seconds.
pub fn measure_seconds(g: &Graph, q: &AnalyticalQuery, reps: usize) -> Result<f64> {
    evaluate(g, q)?;
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        std::hint::black_box(evaluate(g, q)?);
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2].max(1e-9))
}

/// One (features, seconds) sample per query.
pub fn training_samples(
    ctx: &CostContext<'_>,
    queries: &[AnalyticalQuery],
    reps: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    queries
        .iter()
        .map(|q| Ok((ctx.features(q)?.values, measure_seconds(ctx.graph(), q, reps)?)))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainSpec {
    pub workload: WorkloadSpec,
    pub repetitions: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainSpec {
            workload: WorkloadSpec::default(),
            repetitions: 3,
            learning_rate: c.learning_rate,
            epochs: c.epochs,
        }
    }
}

/// Every lattice view query plus a generated workload, timed on the base
/// graph, fit by gradient descent.
pub fn train_on_runtimes(g: &Graph, l: &Lattice, spec: &TrainSpec) -> Result<LinearRegressor> {
    let ctx = CostContext::new(g, l);
    let mut queries: Vec<AnalyticalQuery> = l.nodes().iter().map(|v| v.query().clone()).collect();
    queries.extend(generate_workload(g, l, &spec.workload)?);
    let samples = training_samples(&ctx, &queries, spec.repetitions)?;
    let config = TrainConfig {
        learning_rate: spec.learning_rate,
        epochs: spec.epochs,
    };
    Ok(train(ctx.feature_space().names().to_vec(), &samples, config)?)
}

pub fn save_model(path: &Path, model: &LinearRegressor) -> Result<()> {
    let text = serde_json::to_string_pretty(model)?;
    std::fs::write(path, text).map_err(|e| SofosError::io(path.display().to_string(), e))
}

pub fn load_model(path: &Path) -> Result<LinearRegressor> {
    let text = std::fs::read_to_string(path).map_err(|e| SofosError::io(path.display().to_string(), e))?;
    let model: LinearRegressor = serde_json::from_str(&text)?;
    if !model.is_trained() {
        return Err(SofosError::Invalid(format!("{}: model is not trained", path.display())));
    }
    Ok(model)
}

/// A saved model only applies to lattices with the same feature space.
pub fn check_compatible(model: &LinearRegressor, names: &[String]) -> Result<()> {
    if model.feature_names != names {
        return Err(SofosError::Invalid(format!(
            "model was trained on {} features that do not match this facet's {}",
            model.feature_names.len(),
            names.len()
        )));
    }
    Ok(())
}

/// Builds a cost model from its name. `learned` supplies the regressor when
/// the name asks for one.
pub fn resolve_model(
    name: &str,
    seed: Option<u64>,
    views: Option<&[String]>,
    learned: impl FnOnce() -> Result<LinearRegressor>,
) -> Result<CostModel> {
    let kind = CostModelKind::from_name(name).ok_or_else(|| {
        let known: Vec<&str> = CostModelKind::ALL.iter().map(|k| k.name()).collect();
        SofosError::Invalid(format!(
            "unknown cost model `{name}`; expected one of {}",
            known.join(", ")
        ))
    })?;
    if views.is_some() && kind != CostModelKind::UserDefined {
        return Err(SofosError::Invalid(format!(
            "views are only accepted with the user model, not `{kind}`"
        )));
    }
    Ok(match kind {
        CostModelKind::Random => CostModel::Random {
            seed: seed.unwrap_or(0),
        },
        CostModelKind::TripleCount => CostModel::TripleCount,
        CostModelKind::AggValueCount => CostModel::AggValueCount,
        CostModelKind::NodeCount => CostModel::NodeCount,
        CostModelKind::Learned => CostModel::Learned(Arc::new(learned()?)),
        CostModelKind::UserDefined => CostModel::UserDefined {
            chosen: views
                .ok_or_else(|| SofosError::Invalid("the user model needs a list of views".into()))?
                .to_vec(),
        },
    })
}
