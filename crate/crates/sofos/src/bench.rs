//! Workload benchmarking across selection configurations.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sofos_core::cost::{CostContext, CostModel, CostModelKind};
use sofos_core::eval::ResultTable;
use sofos_core::graph::Graph;
use sofos_core::lattice::Lattice;
use sofos_core::materialize::{expand, ExpandedGraph};
use sofos_core::query::AnalyticalQuery;
use sofos_core::rewrite::{answer, Source};
use sofos_core::select::{greedy_select, SelectOptions};

use crate::error::{Result, SofosError};
use crate::learn::{check_compatible, load_model, resolve_model, train_on_runtimes, TrainSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// One entry of a configs file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BenchConfig {
    pub model: String,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub views: Option<Vec<String>>,
    #[serde(default)]
    pub model_path: Option<PathBuf>,
}

impl BenchConfig {
    /// The budget; user configs default to the number of picked views.
    pub fn budget(&self) -> Result<usize> {
        match (self.k, &self.views) {
            (Some(k), _) => Ok(k),
            (None, Some(v)) => Ok(v.len()),
            (None, None) => Err(SofosError::Invalid(format!(
                "config for model `{}` has no k",
                self.model
            ))),
        }
    }
}

/// Turns config entries into cost models. Learned entries load `modelPath`
/// or train on the base graph with `train`.
pub fn resolve_configs(
    configs: &[BenchConfig],
    g: &Graph,
    l: &Lattice,
    train: &TrainSpec,
) -> Result<Vec<(CostModel, usize)>> {
    let names = CostContext::new(g, l).feature_space().names().to_vec();
    configs
        .iter()
        .map(|c| {
            let learned = || {
                let model = match &c.model_path {
                    Some(path) => load_model(path)?,
                    None => train_on_runtimes(g, l, train)?,
                };
                check_compatible(&model, &names)?;
                Ok(model)
            };
            Ok((
                resolve_model(&c.model, c.seed, c.views.as_deref(), learned)?,
                c.budget()?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct BenchOptions {
    pub verify: bool,
    pub repetitions: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            verify: false,
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueryRow {
    pub index: usize,
    pub query: String,
    pub wall_time_ns: u64,
    pub source: String,
    pub row_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConfigurationReport {
    /// `None` for the base-only configuration.
    pub model: Option<CostModelKind>,
    pub k: usize,
    pub chosen: Vec<String>,
    pub queries: Vec<QueryRow>,
    pub mean_latency_ns: f64,
    pub median_latency_ns: f64,
    pub p95_latency_ns: f64,
    pub speedup: f64,
    pub storage_amplification: f64,
    pub view_triples: usize,
    pub view_terms: usize,
    pub selection_wall_time_ns: u64,
    pub materialization_wall_time_ns: u64,
    pub base_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub schema_version: u32,
    pub base_triples: usize,
    pub workload_size: usize,
    pub configurations: Vec<ConfigurationReport>,
}

fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos().min(u64::MAX as u128) as u64
}

fn mean(xs: &[u64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64
}

/// Median; even lengths average the two middle values.
pub fn median(xs: &[u64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_unstable();
    match s.len() {
        0 => 0.0,
        n if n % 2 == 1 => s[n / 2] as f64,
        n => (s[n / 2 - 1] as f64 + s[n / 2] as f64) / 2.0,
    }
}

/// Nearest-rank 95th percentile.
pub fn p95(xs: &[u64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_unstable();
    if s.is_empty() {
        return 0.0;
    }
    let rank = (0.95 * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1] as f64
}

struct Run {
    rows: Vec<QueryRow>,
    tables: Vec<(Source, ResultTable)>,
}

/// Runs every query once as warm-up, then `reps` timed times.
fn run_queries(
    eg: &ExpandedGraph,
    l: &Lattice,
    costs: &[f64],
    workload: &[AnalyticalQuery],
    reps: usize,
) -> Result<Run> {
    let mut rows = Vec::with_capacity(workload.len());
    let mut tables = Vec::with_capacity(workload.len());
    for (index, q) in workload.iter().enumerate() {
        let (plan, table) = answer(eg, l, costs, q)?;
        let mut times = Vec::with_capacity(reps);
        for _ in 0..reps.max(1) {
            let t = Instant::now();
            std::hint::black_box(answer(eg, l, costs, q)?);
            times.push(elapsed_ns(t));
        }
        rows.push(QueryRow {
            index,
            query: q.to_string(),
            wall_time_ns: median(&times) as u64,
            source: plan.source.label().to_string(),
            row_count: table.len(),
        });
        tables.push((plan.source, table));
    }
    Ok(Run { rows, tables })
}

fn summarize(
    model: Option<CostModelKind>,
    k: usize,
    chosen: Vec<String>,
    eg: &ExpandedGraph,
    run: &Run,
    selection_ns: u64,
    materialization_ns: u64,
) -> Result<ConfigurationReport> {
    let times: Vec<u64> = run.rows.iter().map(|r| r.wall_time_ns).collect();
    Ok(ConfigurationReport {
        model,
        k,
        chosen,
        mean_latency_ns: mean(&times),
        median_latency_ns: median(&times),
        p95_latency_ns: p95(&times),
        speedup: 1.0,
        storage_amplification: eg.storage_amplification()?,
        view_triples: eg.total_view_triples(),
        view_terms: eg.views().values().map(|v| v.term_count()).sum(),
        selection_wall_time_ns: selection_ns,
        materialization_wall_time_ns: materialization_ns,
        base_fallbacks: run.tables.iter().filter(|(s, _)| *s == Source::BaseGraph).count(),
        queries: run.rows.clone(),
    })
}

/// Base-only run first, then one run per configuration. Timing is
/// sequential. `progress` sees (finished, total) configurations.
pub fn run_bench(
    base: Arc<Graph>,
    l: &Lattice,
    workload: &[AnalyticalQuery],
    configs: &[(CostModel, usize)],
    options: BenchOptions,
    progress: &dyn Fn(usize, usize),
) -> Result<BenchReport> {
    if workload.is_empty() {
        return Err(SofosError::Invalid("the workload is empty".into()));
    }
    let total = configs.len() + 1;
    let ctx = CostContext::new(&base, l);
    let base_eg = ExpandedGraph::new(base.clone());
    let base_costs = vec![0.0; l.len()];
    let base_run = run_queries(&base_eg, l, &base_costs, workload, options.repetitions)?;
    let base_report = summarize(None, 0, Vec::new(), &base_eg, &base_run, 0, 0)?;
    let base_mean = base_report.mean_latency_ns;
    let mut configurations = vec![base_report];
    progress(1, total);

    for (i, (model, k)) in configs.iter().enumerate() {
        let t = Instant::now();
        let plan = greedy_select(&ctx, model, *k, &SelectOptions::default())?;
        let costs = ctx.node_costs(model)?;
        let selection_ns = elapsed_ns(t);
        let t = Instant::now();
        let eg = expand(base.clone(), l, &plan.chosen)?;
        let materialization_ns = elapsed_ns(t);
        let run = run_queries(&eg, l, &costs, workload, options.repetitions)?;
        if options.verify {
            verify(&run, &base_run, workload)?;
        }
        let mut report = summarize(
            Some(model.kind()),
            *k,
            plan.chosen,
            &eg,
            &run,
            selection_ns,
            materialization_ns,
        )?;
        report.speedup = base_mean.max(1.0) / report.mean_latency_ns.max(1.0);
        configurations.push(report);
        progress(i + 2, total);
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        base_triples: base.len(),
        workload_size: workload.len(),
        configurations,
    })
}

fn verify(run: &Run, base: &Run, workload: &[AnalyticalQuery]) -> Result<()> {
    for (i, ((source, got), (_, want))) in run.tables.iter().zip(&base.tables).enumerate() {
        if let Source::View(id) = source {
            if !got.approx_eq(want, 1e-9) {
                return Err(SofosError::Verification {
                    query: workload[i].to_string(),
                    view: id.clone(),
                    detail: format!("{} rows from the view, {} from the base graph", got.len(), want.len()),
                });
            }
        }
    }
    Ok(())
}

/// One line per configuration.
pub fn write_csv<W: std::io::Write>(report: &BenchReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "model",
        "k",
        "chosen",
        "meanLatencyNs",
        "medianLatencyNs",
        "p95LatencyNs",
        "speedup",
        "storageAmplification",
        "selectionWallTimeNs",
        "materializationWallTimeNs",
        "baseFallbacks",
    ])?;
    for c in &report.configurations {
        out.write_record([
            c.model.map_or("base", |m| m.name()).to_string(),
            c.k.to_string(),
            c.chosen.join(";"),
            c.mean_latency_ns.to_string(),
            c.median_latency_ns.to_string(),
            c.p95_latency_ns.to_string(),
            c.speedup.to_string(),
            c.storage_amplification.to_string(),
            c.selection_wall_time_ns.to_string(),
            c.materialization_wall_time_ns.to_string(),
            c.base_fallbacks.to_string(),
        ])?;
    }
    out.flush().map_err(|e| SofosError::io("csv output", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use sofos_core::fixture::{fix_pop_graph, FIX_POP_FACET};
    use sofos_core::lattice::Facet;
    use sofos_core::workload::{generate_workload, WorkloadSpec};

    fn setup() -> (Arc<Graph>, Lattice, Vec<AnalyticalQuery>) {
        let g = Arc::new(fix_pop_graph());
        let l = Lattice::build(Facet::parse(FIX_POP_FACET).unwrap()).unwrap();
        let w = generate_workload(
            &g,
            &l,
            &WorkloadSpec {
                count: 30,
                seed: 5,
                filter_probability: 0.5,
            },
        )
        .unwrap();
        (g, l, w)
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[5, 1, 3]), 3.0);
        assert_eq!(median(&[4, 1, 3, 2]), 2.5);
        assert_eq!(p95(&(1..=100).collect::<Vec<_>>()), 95.0);
        assert_eq!(p95(&[7]), 7.0);
        assert_eq!(mean(&[]), 0.0);
    }

    #[test]
    fn no_configs_gives_base_only() {
        let (g, l, w) = setup();
        let r = run_bench(g, &l, &w, &[], BenchOptions::default(), &|_, _| {}).unwrap();
        assert_eq!(r.configurations.len(), 1);
        let base = &r.configurations[0];
        assert_eq!(base.model, None);
        assert_eq!(base.storage_amplification, 0.0);
        assert_eq!(base.base_fallbacks, w.len());
        assert!(base.queries.iter().all(|q| q.source == "base"));
    }

    #[test]
    fn full_materialization_never_falls_back() {
        let (g, l, w) = setup();
        let configs = [(CostModel::AggValueCount, 7), (CostModel::NodeCount, 2)];
        let r = run_bench(
            g,
            &l,
            &w,
            &configs,
            BenchOptions {
                verify: true,
                repetitions: 1,
            },
            &|_, _| {},
        )
        .unwrap();
        assert_eq!(r.configurations.len(), 3);
        for c in &r.configurations {
            assert_eq!(c.queries.len(), w.len());
            assert!(c.speedup > 0.0);
        }
        let full = &r.configurations[1];
        assert_eq!(full.chosen.len(), 7);
        // Only queries grouping by every dimension need the root, which is the base graph.
        let finest = w.iter().filter(|q| q.group_vars().len() == 3).count();
        assert_eq!(full.base_fallbacks, finest);
        for (row, q) in full.queries.iter().zip(&w) {
            assert_eq!(row.source == "base", q.group_vars().len() == 3);
        }
        assert!(full.storage_amplification > 0.0);
        for (a, b) in full.queries.iter().zip(&r.configurations[0].queries) {
            assert_eq!(a.row_count, b.row_count);
        }
    }

    #[test]
    fn csv_has_one_line_per_configuration() {
        let (g, l, w) = setup();
        let r = run_bench(
            g,
            &l,
            &w,
            &[(CostModel::TripleCount, 1)],
            BenchOptions::default(),
            &|_, _| {},
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("base,0,"));
    }

    #[test]
    fn config_budget_defaults() {
        let c: BenchConfig = serde_json::from_str(r#"{"model":"user","views":["c","l"]}"#).unwrap();
        assert_eq!(c.budget().unwrap(), 2);
        let c: BenchConfig = serde_json::from_str(r#"{"model":"nodes"}"#).unwrap();
        assert!(c.budget().is_err());
        assert!(serde_json::from_str::<BenchConfig>(r#"{"model":"nodes","bogus":1}"#).is_err());
    }
}
