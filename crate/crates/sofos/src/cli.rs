//! Command-line interface. Every subcommand prints JSON to stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sofos_core::cost::{CostContext, CostModel, CostModelKind};
use sofos_core::graph::Graph;
use sofos_core::lattice::{Facet, Lattice};
use sofos_core::materialize::expand;
use sofos_core::query::{parse_query, AggOp};
use sofos_core::rewrite::answer;
use sofos_core::select::{exhaustive_select, greedy_select, SelectOptions, SelectionPlan};
use sofos_core::workload::{generate_workload, synthesize_star, Assignment, StarParams, WorkloadSpec};

use crate::bench::{resolve_configs, run_bench, write_csv, BenchConfig, BenchOptions};
use crate::error::{Result, SofosError};
use crate::learn::{check_compatible, load_model, resolve_model, save_model, train_on_runtimes, TrainSpec};
use crate::{json as shapes, ntriples};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "sofos",
    version,
    about = "Materialized view selection over RDF analytical facets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct FacetArgs {
    /// File holding the facet query.
    #[arg(long)]
    pub facet: PathBuf,
    /// N-Triples graph.
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// random, triples, aggvalues, nodes, learned or user.
    #[arg(long, default_value = "aggvalues", value_parser = parse_model_name)]
    pub model: String,
    /// Seed for the random model.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated view ids for the user model.
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    /// Saved learned model; trained on the fly when absent.
    #[arg(long)]
    pub learned_model: Option<PathBuf>,
}

/// Views to materialize: a saved plan or an explicit list.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ViewSource {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an N-Triples file and print its statistics.
    Load { file: PathBuf },
    /// Parse a facet and describe it.
    Facet {
        #[arg(long)]
        facet: PathBuf,
    },
    /// Print the facet's lattice, optionally with costs.
    Lattice {
        #[arg(long)]
        facet: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Comma-separated cost models to evaluate per node (needs --graph).
        #[arg(long, value_delimiter = ',', value_parser = parse_model_name)]
        costs: Vec<String>,
    },
    /// Select views under a budget.
    Select {
        #[command(flatten)]
        input: FacetArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k: Option<usize>,
        /// Exhaustive oracle instead of greedy.
        #[arg(long)]
        exhaustive: bool,
        /// Skip candidates that would push materialized triples past this.
        #[arg(long)]
        triple_budget: Option<usize>,
        /// Also write the plan here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize views and summarize them.
    Materialize {
        #[command(flatten)]
        input: FacetArgs,
        #[command(flatten)]
        source: ViewSource,
        /// Directory receiving one `<view>.nt` per view.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the expanded graph as N-Triples.
    Export {
        #[command(flatten)]
        input: FacetArgs,
        #[command(flatten)]
        source: ViewSource,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded workload.
    Workload {
        #[command(flatten)]
        input: FacetArgs,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Answer one query, using views if given.
    Query {
        #[command(flatten)]
        input: FacetArgs,
        #[arg(long)]
        query: String,
        #[arg(long, value_delimiter = ',')]
        views: Vec<String>,
        /// Cost model ranking usable views.
        #[arg(long, default_value = "aggvalues", value_parser = parse_model_name)]
        model: String,
    },
    /// Benchmark configurations against the base graph.
    Bench {
        #[command(flatten)]
        input: FacetArgs,
        /// JSON array of {model, k, seed?, views?, modelPath?}.
        #[arg(long)]
        configs: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        /// Check every view-answered result against the base graph.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value = "bench-report.json")]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Train the learned cost model on measured runtimes.
    Train {
        #[command(flatten)]
        input: FacetArgs,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic star graph and its facet.
    Synth {
        #[arg(long)]
        observations: usize,
        /// Comma-separated name:cardinality pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_dim, required = true)]
        dims: Vec<(String, usize)>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inclusive measure range as min:max.
        #[arg(long, default_value = "1:100", value_parser = parse_range)]
        measure_range: (i64, i64),
        /// Assign dimension values round-robin instead of at random.
        #[arg(long)]
        cyclic: bool,
        #[arg(long, default_value = "SUM", value_parser = parse_agg)]
        agg: AggOp,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        facet_out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        /// Directory of `*.nt` datasets to preload; reports are saved here.
        #[arg(long, env = "DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.3)]
    pub filter_probability: f64,
}

impl SpecArgs {
    fn spec(&self) -> WorkloadSpec {
        WorkloadSpec {
            count: self.count,
            seed: self.seed,
            filter_probability: self.filter_probability,
        }
    }
}

fn parse_model_name(s: &str) -> std::result::Result<String, String> {
    match CostModelKind::from_name(s) {
        Some(k) => Ok(k.name().to_string()),
        None => Err(format!("unknown cost model `{s}`")),
    }
}

fn parse_dim(s: &str) -> std::result::Result<(String, usize), String> {
    let (name, card) = s.split_once(':').ok_or("expected name:cardinality")?;
    let card = card.parse().map_err(|e| format!("bad cardinality `{card}`: {e}"))?;
    Ok((name.to_string(), card))
}

fn parse_range(s: &str) -> std::result::Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected min:max")?;
    let lo = a.parse().map_err(|e| format!("bad bound `{a}`: {e}"))?;
    let hi = b.parse().map_err(|e| format!("bad bound `{b}`: {e}"))?;
    if lo > hi {
        return Err("min exceeds max".into());
    }
    Ok((lo, hi))
}

fn parse_agg(s: &str) -> std::result::Result<AggOp, String> {
    AggOp::from_keyword(s).ok_or_else(|| format!("unknown aggregate `{s}`"))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SofosError::io(path.display().to_string(), e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| SofosError::io(path.display().to_string(), e))
}

fn load_lattice(path: &Path) -> Result<Lattice> {
    Ok(Lattice::build(Facet::parse(&read_text(path)?)?)?)
}

fn load_input(input: &FacetArgs) -> Result<(Arc<Graph>, Lattice)> {
    Ok((
        Arc::new(ntriples::load_file(&input.graph)?),
        load_lattice(&input.facet)?,
    ))
}

fn model_for(args: &ModelArgs, g: &Graph, l: &Lattice) -> Result<CostModel> {
    if args.views.is_some() && args.model != "user" && args.model != "aggvalues" {
        return Err(SofosError::Invalid("--views goes with --model user".into()));
    }
    let name = if args.views.is_some() {
        "user"
    } else {
        args.model.as_str()
    };
    resolve_model(name, args.seed, args.views.as_deref(), || {
        let model = match &args.learned_model {
            Some(p) => load_model(p)?,
            None => train_on_runtimes(g, l, &TrainSpec::default())?,
        };
        check_compatible(&model, CostContext::new(g, l).feature_space().names())?;
        Ok(model)
    })
}

fn chosen_views(source: &ViewSource) -> Result<Vec<String>> {
    match (&source.plan, &source.views) {
        (Some(p), _) => Ok(serde_json::from_str::<SelectionPlan>(&read_text(p)?)?.chosen),
        (None, Some(v)) => Ok(v.clone()),
        (None, None) => Ok(Vec::new()),
    }
}

fn print(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(v)?).map_err(|e| SofosError::io("stdout", e))
}

/// Parses `argv` and runs it, returning the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                SofosError::Invalid(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            }
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Load { file } => {
            let g = ntriples::load_file(&file)?;
            print(&json!({ "file": file, "stats": shapes::graph_stats(&g) }))
        }
        Command::Facet { facet } => {
            let l = load_lattice(&facet)?;
            let f = l.facet();
            print(&json!({
                "query": f.query().to_string(),
                "groupVars": f.group_vars().iter().map(|v| v.name()).collect::<Vec<_>>(),
                "aggregate": f.agg_op().to_string(),
                "measure": f.agg_var().name(),
                "latticeSize": l.len(),
            }))
        }
        Command::Lattice { facet, graph, costs } => {
            let l = load_lattice(&facet)?;
            let mut table = std::collections::BTreeMap::new();
            if !costs.is_empty() {
                let path = graph.ok_or_else(|| SofosError::Invalid("--costs needs --graph".into()))?;
                let g = ntriples::load_file(&path)?;
                let ctx = CostContext::new(&g, &l);
                for name in costs {
                    let args = ModelArgs {
                        model: name.clone(),
                        seed: None,
                        views: None,
                        learned_model: None,
                    };
                    if name == "user" {
                        return Err(SofosError::Invalid("the user model has no standalone costs".into()));
                    }
                    table.insert(name, ctx.node_costs(&model_for(&args, &g, &l)?)?);
                }
            }
            print(&serde_json::to_value(shapes::lattice(&l, &table))?)
        }
        Command::Select {
            input,
            model,
            k,
            exhaustive,
            triple_budget,
            out,
        } => {
            let (g, l) = load_input(&input)?;
            let k = match (k, &model.views) {
                (Some(k), _) => k,
                (None, Some(v)) => v.len(),
                (None, None) => return Err(SofosError::Invalid("--k is required".into())),
            };
            let cost_model = model_for(&model, &g, &l)?;
            let ctx = CostContext::new(&g, &l);
            let options = SelectOptions {
                weights: None,
                triple_budget,
            };
            let plan = if exhaustive {
                exhaustive_select(&ctx, &cost_model, k, &options)?
            } else {
                greedy_select(&ctx, &cost_model, k, &options)?
            };
            let text = serde_json::to_string_pretty(&plan)?;
            if let Some(path) = out {
                write_file(&path, format!("{text}\n"))?;
            }
            print(&serde_json::to_value(&plan)?)
        }
        Command::Materialize { input, source, out } => {
            let (g, l) = load_input(&input)?;
            let eg = expand(g, &l, &chosen_views(&source)?)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| SofosError::io(dir.display().to_string(), e))?;
            }
            let mut views = Vec::new();
            for v in eg.views().values() {
                let file = match &out {
                    Some(dir) => {
                        let path = dir.join(format!("{}.nt", v.node_id()));
                        let mut buf = Vec::new();
                        ntriples::write_triples(&mut buf, v.triples().iter().map(|(s, p, o)| (s, p, o)))
                            .map_err(|e| SofosError::io(path.display().to_string(), e))?;
                        write_file(&path, buf)?;
                        Some(path)
                    }
                    None => None,
                };
                views.push(json!({
                    "id": v.node_id(),
                    "groups": v.groups().len(),
                    "triples": v.triple_count(),
                    "terms": v.term_count(),
                    "file": file,
                }));
            }
            print(&json!({
                "views": views,
                "baseTriples": eg.base().len(),
                "totalViewTriples": eg.total_view_triples(),
                "storageAmplification": eg.storage_amplification().ok(),
            }))
        }
        Command::Export { input, source, out } => {
            let (g, l) = load_input(&input)?;
            let eg = expand(g, &l, &chosen_views(&source)?)?;
            let mut text = ntriples::serialize_graph(eg.base());
            for v in eg.views().values() {
                for (s, p, o) in v.triples() {
                    text.push_str(&ntriples::format_triple(s, p, o));
                    text.push('\n');
                }
            }
            match out {
                Some(path) => {
                    write_file(&path, &text)?;
                    print(&json!({ "file": path, "triples": eg.base().len() + eg.total_view_triples() }))
                }
                None => std::io::stdout()
                    .lock()
                    .write_all(text.as_bytes())
                    .map_err(|e| SofosError::io("stdout", e)),
            }
        }
        Command::Workload { input, spec } => {
            let (g, l) = load_input(&input)?;
            let spec = spec.spec();
            let queries = generate_workload(&g, &l, &spec)?;
            let texts: Vec<String> = queries.iter().map(|q| q.to_string()).collect();
            print(&json!({ "spec": spec, "queries": texts }))
        }
        Command::Query {
            input,
            query,
            views,
            model,
        } => {
            let (g, l) = load_input(&input)?;
            let q = parse_query(&query)?;
            let args = ModelArgs {
                model,
                seed: None,
                views: None,
                learned_model: None,
            };
            let costs = CostContext::new(&g, &l).node_costs(&model_for(&args, &g, &l)?)?;
            let eg = expand(g, &l, &views)?;
            let (plan, table) = answer(&eg, &l, &costs, &q)?;
            print(&json!({
                "source": plan.source.label(),
                "rewritten": plan.render(),
                "result": shapes::result_table(&table),
            }))
        }
        Command::Bench {
            input,
            configs,
            spec,
            repetitions,
            verify,
            out,
            csv,
        } => {
            let (g, l) = load_input(&input)?;
            let configs: Vec<BenchConfig> = serde_json::from_str(&read_text(&configs)?)?;
            let spec = spec.spec();
            let train = TrainSpec {
                workload: WorkloadSpec {
                    seed: spec.seed.wrapping_add(1),
                    ..spec
                },
                ..TrainSpec::default()
            };
            let resolved = resolve_configs(&configs, &g, &l, &train)?;
            let workload = generate_workload(&g, &l, &spec)?;
            let options = BenchOptions {
                verify,
                repetitions: repetitions.max(1),
            };
            let report = run_bench(g, &l, &workload, &resolved, options, &|_, _| {})?;
            write_file(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            if let Some(path) = &csv {
                let f = std::fs::File::create(path).map_err(|e| SofosError::io(path.display().to_string(), e))?;
                write_csv(&report, f)?;
            }
            print(&json!({
                "report": out,
                "csv": csv,
                "configurations": report.configurations.len(),
                "verified": verify,
            }))
        }
        Command::Train {
            input,
            spec,
            repetitions,
            epochs,
            learning_rate,
            out,
        } => {
            let (g, l) = load_input(&input)?;
            let mut train = TrainSpec {
                workload: spec.spec(),
                repetitions: repetitions.max(1),
                ..TrainSpec::default()
            };
            if let Some(e) = epochs {
                train.epochs = e;
            }
            if let Some(lr) = learning_rate {
                train.learning_rate = lr;
            }
            let model = train_on_runtimes(&g, &l, &train)?;
            save_model(&out, &model)?;
            print(&json!({ "model": out, "features": model.feature_names.len(), "training": model.training }))
        }
        Command::Synth {
            observations,
            dims,
            seed,
            measure_range,
            cyclic,
            agg,
            out,
            facet_out,
        } => {
            let params = StarParams {
                observations,
                dims,
                measure_range,
                seed,
                assignment: if cyclic {
                    Assignment::Cyclic
                } else {
                    Assignment::Uniform
                },
                agg,
            };
            let (g, facet) = synthesize_star(&params)?;
            write_file(&out, ntriples::serialize_graph(&g))?;
            if let Some(path) = &facet_out {
                write_file(path, format!("{}\n", facet.query()))?;
            }
            print(&json!({ "graph": out, "facet": facet.query().to_string(), "stats": shapes::graph_stats(&g) }))
        }
        Command::Serve { port, data_dir } => {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| SofosError::io("tokio runtime", e))?;
            rt.block_on(crate::server::serve(port, data_dir))
        }
    }
}
