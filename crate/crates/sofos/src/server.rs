//! HTTP JSON service.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use sofos_core::cost::{CostContext, CostModel, CostModelKind, LinearRegressor, ViewProfile};
use sofos_core::graph::Graph;
use sofos_core::lattice::{Facet, Lattice};
use sofos_core::materialize::{expand, ExpandedGraph};
use sofos_core::query::{parse_query, AnalyticalQuery};
use sofos_core::rewrite::{choose_view, rewrite_and_execute};
use sofos_core::select::{exhaustive_select, greedy_select, SelectOptions, SelectionPlan};
use sofos_core::workload::{generate_workload, WorkloadSpec};

use crate::bench::{run_bench, BenchConfig, BenchOptions, BenchReport};
use crate::error::SofosError;
use crate::learn::{resolve_model, train_on_runtimes, TrainSpec};
use crate::{json as shapes, ntriples};

pub const OPENAPI: &str = include_str!("openapi.json");

const BODY_LIMIT: usize = 512 * 1024 * 1024;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} `{id}`"))
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }
}

/// Syntax problems are 400, everything else the engine rejects is 422.
pub fn status_of(e: &SofosError) -> StatusCode {
    use sofos_core::Error as E;
    match e {
        SofosError::Parse { .. } | SofosError::Json(_) | SofosError::Csv(_) => StatusCode::BAD_REQUEST,
        SofosError::Core(E::Syntax { .. } | E::InvalidTerm(_) | E::InvalidTriple(_)) => StatusCode::BAD_REQUEST,
        SofosError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl From<SofosError> for ApiError {
    fn from(e: SofosError) -> Self {
        ApiError::new(status_of(&e), e.to_string())
    }
}

impl From<sofos_core::Error> for ApiError {
    fn from(e: sofos_core::Error) -> Self {
        SofosError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "status": self.status.as_u16() });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

struct FacetEntry {
    dataset: String,
    lattice: Arc<Lattice>,
    profiles: Option<Arc<Vec<ViewProfile>>>,
    costs: BTreeMap<String, Vec<f64>>,
    learned: Option<Arc<LinearRegressor>>,
    expanded: Option<Arc<ExpandedGraph>>,
}

struct PlanEntry {
    facet: String,
    plan: SelectionPlan,
}

struct WorkloadEntry {
    facet: String,
    queries: Arc<Vec<AnalyticalQuery>>,
}

#[derive(Clone)]
struct Job {
    kind: &'static str,
    facet: String,
    phase: &'static str,
    progress: f64,
    result: Option<Value>,
    error: Option<Value>,
}

#[derive(Default)]
struct Session {
    datasets: BTreeMap<String, Arc<Graph>>,
    facets: BTreeMap<String, FacetEntry>,
    plans: BTreeMap<String, PlanEntry>,
    workloads: BTreeMap<String, WorkloadEntry>,
    jobs: BTreeMap<String, Job>,
    reports: BTreeMap<String, Arc<BenchReport>>,
    busy: BTreeSet<String>,
    counter: u64,
}

impl Session {
    fn next_id(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn facet(&self, id: &str) -> ApiResult<&FacetEntry> {
        self.facets.get(id).ok_or_else(|| ApiError::not_found("facet", id))
    }

    fn facet_mut(&mut self, id: &str) -> ApiResult<&mut FacetEntry> {
        self.facets.get_mut(id).ok_or_else(|| ApiError::not_found("facet", id))
    }

    fn snapshot(&self, facet: &str) -> ApiResult<Snapshot> {
        let f = self.facet(facet)?;
        Ok(Snapshot {
            graph: self.datasets[&f.dataset].clone(),
            lattice: f.lattice.clone(),
            profiles: f.profiles.clone(),
            learned: f.learned.clone(),
        })
    }
}

/// Immutable inputs for work done outside the session lock.
struct Snapshot {
    graph: Arc<Graph>,
    lattice: Arc<Lattice>,
    profiles: Option<Arc<Vec<ViewProfile>>>,
    learned: Option<Arc<LinearRegressor>>,
}

impl Snapshot {
    fn context(&self) -> CostContext<'_> {
        let ctx = CostContext::new(&self.graph, &self.lattice);
        if let Some(p) = &self.profiles {
            for (v, prof) in self.lattice.nodes().iter().zip(p.iter()) {
                ctx.insert_profile(v, *prof);
            }
        }
        ctx
    }

    fn all_profiles(&self, ctx: &CostContext<'_>) -> ApiResult<Arc<Vec<ViewProfile>>> {
        let profiles = self
            .lattice
            .nodes()
            .iter()
            .map(|v| ctx.profile(v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Arc::new(profiles))
    }

    fn model(&self, name: &str, seed: Option<u64>, views: Option<&[String]>) -> ApiResult<CostModel> {
        let learned = || match &self.learned {
            Some(m) => Ok((**m).clone()),
            None => Err(SofosError::Invalid(
                "no trained model for this facet; POST /train first".into(),
            )),
        };
        match &self.learned {
            Some(m) if CostModelKind::from_name(name) == Some(CostModelKind::Learned) => {
                Ok(CostModel::Learned(m.clone()))
            }
            _ => Ok(resolve_model(name, seed, views, learned)?),
        }
    }
}

pub struct AppState {
    session: RwLock<Session>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(data_dir: Option<PathBuf>) -> Arc<Self> {
        Arc::new(AppState {
            session: RwLock::new(Session::default()),
            data_dir,
        })
    }

    /// Loads every `*.nt` file in the data directory, named by file stem.
    pub fn preload(&self) -> Result<Vec<String>, SofosError> {
        let Some(dir) = &self.data_dir else {
            return Ok(Vec::new());
        };
        let entries = std::fs::read_dir(dir).map_err(|e| SofosError::io(dir.display().to_string(), e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "nt"))
            .collect();
        paths.sort();
        let mut names = Vec::new();
        for p in paths {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let g = ntriples::load_file(&p)?;
            self.write().datasets.insert(name.clone(), Arc::new(g));
            names.push(name);
        }
        Ok(names)
    }

    fn read(&self) -> RwLockReadGuard<'_, Session> {
        self.session.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, Session> {
        self.session.write().unwrap_or_else(|e| e.into_inner())
    }

    fn persist_report(&self, id: &str, report: &BenchReport) -> Result<(), SofosError> {
        let Some(dir) = &self.data_dir else { return Ok(()) };
        let dir = dir.join("reports");
        std::fs::create_dir_all(&dir).map_err(|e| SofosError::io(dir.display().to_string(), e))?;
        let path = dir.join(format!("{id}.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(report)?)
            .map_err(|e| SofosError::io(path.display().to_string(), e))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(post_dataset).get(list_datasets))
        .route("/datasets/{name}", get(get_dataset).delete(delete_dataset))
        .route("/facets", post(post_facet).get(list_facets))
        .route("/lattice/{facet}", get(get_lattice))
        .route("/lattice/{facet}/costs", get(get_costs))
        .route("/select", post(post_select))
        .route("/plans/{id}", get(get_plan))
        .route("/materialize", post(post_materialize))
        .route("/views/{id}/data", get(get_view_data))
        .route("/workload", post(post_workload))
        .route("/bench", post(post_bench))
        .route("/train", post(post_train))
        .route("/explain", post(post_explain))
        .route("/jobs/{id}", get(get_job))
        .route("/reports/{id}", get(get_report))
        .route("/openapi.json", get(openapi))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(port: u16, data_dir: Option<PathBuf>) -> Result<(), SofosError> {
    let state = AppState::new(data_dir);
    let loaded = state.preload()?;
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| SofosError::io(addr.to_string(), e))?;
    let bound = listener.local_addr().map_err(|e| SofosError::io(addr.to_string(), e))?;
    println!("{}", json!({ "listening": bound.to_string(), "datasets": loaded }));
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| SofosError::io(bound.to_string(), e))
}

async fn openapi() -> Response {
    ([(axum::http::header::CONTENT_TYPE, "application/json")], OPENAPI).into_response()
}

#[derive(Deserialize)]
struct NameParam {
    name: Option<String>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

fn referenced(s: &Session, dataset: &str) -> bool {
    s.facets.values().any(|f| f.dataset == dataset)
}

async fn post_dataset(
    State(st): State<Arc<AppState>>,
    Query(p): Query<NameParam>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<Value>)> {
    if let Some(n) = &p.name {
        if !valid_name(n) {
            return Err(ApiError::bad_request(format!("invalid dataset name `{n}`")));
        }
    }
    let graph = blocking(move || {
        let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request(format!("body is not UTF-8: {e}")))?;
        Ok(ntriples::parse_graph(text)?)
    })
    .await?;
    let mut s = st.write();
    let name = match p.name {
        Some(n) => n,
        None => s.next_id("d"),
    };
    if referenced(&s, &name) {
        return Err(ApiError::conflict(format!("dataset `{name}` is used by a facet")));
    }
    let stats = shapes::graph_stats(&graph);
    s.datasets.insert(name.clone(), Arc::new(graph));
    Ok((StatusCode::CREATED, Json(json!({ "name": name, "stats": stats }))))
}

async fn list_datasets(State(st): State<Arc<AppState>>) -> ApiResult {
    let s = st.read();
    let list: Vec<Value> = s
        .datasets
        .iter()
        .map(|(name, g)| json!({ "name": name, "triples": g.len(), "distinctTerms": g.stats().distinct_terms }))
        .collect();
    Ok(Json(json!({ "datasets": list })))
}

async fn get_dataset(State(st): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult {
    let s = st.read();
    let g = s
        .datasets
        .get(&name)
        .ok_or_else(|| ApiError::not_found("dataset", &name))?;
    Ok(Json(json!({ "name": name, "stats": shapes::graph_stats(g) })))
}

async fn delete_dataset(State(st): State<Arc<AppState>>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    let mut s = st.write();
    if !s.datasets.contains_key(&name) {
        return Err(ApiError::not_found("dataset", &name));
    }
    if referenced(&s, &name) {
        return Err(ApiError::conflict(format!("dataset `{name}` is used by a facet")));
    }
    s.datasets.remove(&name);
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FacetRequest {
    dataset: String,
    query: String,
    id: Option<String>,
}

async fn post_facet(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: FacetRequest = parse_body(&body)?;
    if let Some(id) = &req.id {
        if !valid_name(id) {
            return Err(ApiError::bad_request(format!("invalid facet id `{id}`")));
        }
    }
    if !st.read().datasets.contains_key(&req.dataset) {
        return Err(ApiError::not_found("dataset", &req.dataset));
    }
    let lattice = Lattice::build(Facet::parse(&req.query)?)?;
    let mut s = st.write();
    let id = match req.id {
        Some(id) => id,
        None => s.next_id("f"),
    };
    if s.facets.contains_key(&id) {
        return Err(ApiError::conflict(format!("facet `{id}` already exists")));
    }
    let out = json!({ "id": id, "dataset": req.dataset, "lattice": shapes::lattice(&lattice, &BTreeMap::new()) });
    s.facets.insert(
        id,
        FacetEntry {
            dataset: req.dataset,
            lattice: Arc::new(lattice),
            profiles: None,
            costs: BTreeMap::new(),
            learned: None,
            expanded: None,
        },
    );
    Ok((StatusCode::CREATED, Json(out)))
}

async fn list_facets(State(st): State<Arc<AppState>>) -> ApiResult {
    let s = st.read();
    let list: Vec<Value> = s
        .facets
        .iter()
        .map(|(id, f)| {
            json!({
                "id": id,
                "dataset": f.dataset,
                "query": f.lattice.facet().query().to_string(),
                "materialized": f.expanded.as_ref().map(|eg| eg.views().keys().cloned().collect::<Vec<_>>()),
                "trained": f.learned.is_some(),
            })
        })
        .collect();
    Ok(Json(json!({ "facets": list })))
}

async fn get_lattice(State(st): State<Arc<AppState>>, Path(facet): Path<String>) -> ApiResult {
    let s = st.read();
    let f = s.facet(&facet)?;
    let mut out = serde_json::to_value(shapes::lattice(&f.lattice, &f.costs)).map_err(SofosError::from)?;
    out["id"] = json!(facet);
    out["dataset"] = json!(f.dataset);
    out["materialized"] = json!(f
        .expanded
        .as_ref()
        .map(|eg| eg.views().keys().cloned().collect::<Vec<_>>()));
    Ok(Json(out))
}

#[derive(Deserialize)]
struct CostParams {
    model: String,
    seed: Option<u64>,
    views: Option<String>,
}

fn split_views(v: Option<&str>) -> Option<Vec<String>> {
    v.map(|s| s.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect())
}

fn cost_key(model: &CostModel) -> String {
    match model {
        CostModel::Random { seed } => format!("random:{seed}"),
        CostModel::UserDefined { chosen } => format!("user:{}", chosen.join(",")),
        other => other.kind().name().to_string(),
    }
}

async fn get_costs(
    State(st): State<Arc<AppState>>,
    Path(facet): Path<String>,
    Query(p): Query<CostParams>,
) -> ApiResult {
    let snap = st.read().snapshot(&facet)?;
    let views = split_views(p.views.as_deref());
    let model = snap.model(&p.model, p.seed, views.as_deref())?;
    let (report, costs, profiles) = blocking(move || {
        let ctx = snap.context();
        let report = shapes::cost_report(&ctx, &model)?;
        let costs = ctx.node_costs(&model)?;
        let profiles = match model {
            CostModel::TripleCount | CostModel::AggValueCount | CostModel::NodeCount => Some(snap.all_profiles(&ctx)?),
            _ => None,
        };
        Ok((report, (cost_key(&model), costs), profiles))
    })
    .await?;
    let mut s = st.write();
    let f = s.facet_mut(&facet)?;
    f.costs.insert(costs.0, costs.1);
    if f.profiles.is_none() {
        f.profiles = profiles;
    }
    Ok(Json(report))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct SelectRequest {
    facet_id: String,
    model: String,
    k: Option<usize>,
    seed: Option<u64>,
    views: Option<Vec<String>>,
    #[serde(default)]
    exhaustive: bool,
    triple_budget: Option<usize>,
}

async fn post_select(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: SelectRequest = parse_body(&body)?;
    let snap = st.read().snapshot(&req.facet_id)?;
    let model = snap.model(&req.model, req.seed, req.views.as_deref())?;
    let k = match (req.k, &req.views) {
        (Some(k), _) => k,
        (None, Some(v)) => v.len(),
        (None, None) => return Err(ApiError::unprocessable("k is required")),
    };
    let options = SelectOptions {
        weights: None,
        triple_budget: req.triple_budget,
    };
    let exhaustive = req.exhaustive;
    let plan = blocking(move || {
        let ctx = snap.context();
        let plan = if exhaustive && !matches!(model, CostModel::UserDefined { .. }) {
            exhaustive_select(&ctx, &model, k, &options)?
        } else {
            greedy_select(&ctx, &model, k, &options)?
        };
        Ok(plan)
    })
    .await?;
    let mut s = st.write();
    let id = s.next_id("p");
    let out = json!({ "planId": id, "facetId": req.facet_id, "plan": plan });
    s.plans.insert(
        id,
        PlanEntry {
            facet: req.facet_id,
            plan,
        },
    );
    Ok((StatusCode::CREATED, Json(out)))
}

async fn get_plan(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = st.read();
    let p = s.plans.get(&id).ok_or_else(|| ApiError::not_found("plan", &id))?;
    Ok(Json(json!({ "planId": id, "facetId": p.facet, "plan": p.plan })))
}

/// Registers a job and marks its facet busy, or fails with 409.
fn start_job(s: &mut Session, kind: &'static str, facet: &str) -> ApiResult<String> {
    if s.busy.contains(facet) {
        return Err(ApiError::conflict(format!(
            "a job is already running on facet `{facet}`"
        )));
    }
    s.busy.insert(facet.to_string());
    let id = s.next_id("j");
    s.jobs.insert(
        id.clone(),
        Job {
            kind,
            facet: facet.to_string(),
            phase: "running",
            progress: 0.0,
            result: None,
            error: None,
        },
    );
    Ok(id)
}

/// Runs `work` on the blocking pool; its result or error lands in the job.
fn spawn_job<F>(st: Arc<AppState>, id: String, work: F)
where
    F: FnOnce(&dyn Fn(f64)) -> Result<Value, ApiError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || {
        let progress = |p: f64| {
            if let Some(j) = st.write().jobs.get_mut(&id) {
                j.progress = p;
            }
        };
        let outcome = work(&progress);
        let mut s = st.write();
        if let Some(j) = s.jobs.get_mut(&id) {
            match outcome {
                Ok(v) => {
                    j.phase = "done";
                    j.progress = 1.0;
                    j.result = Some(v);
                }
                Err(e) => {
                    j.phase = "failed";
                    j.error = Some(json!({ "status": e.status.as_u16(), "error": e.message }));
                }
            }
            let facet = j.facet.clone();
            s.busy.remove(&facet);
        }
    });
}

fn accepted(id: &str) -> (StatusCode, Json<Value>) {
    (StatusCode::ACCEPTED, Json(json!({ "jobId": id })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct MaterializeRequest {
    plan_id: String,
}

async fn post_materialize(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: MaterializeRequest = parse_body(&body)?;
    let (id, snap, chosen, facet) = {
        let mut s = st.write();
        let plan = s
            .plans
            .get(&req.plan_id)
            .ok_or_else(|| ApiError::not_found("plan", &req.plan_id))?;
        let (facet, chosen) = (plan.facet.clone(), plan.plan.chosen.clone());
        let snap = s.snapshot(&facet)?;
        (start_job(&mut s, "materialize", &facet)?, snap, chosen, facet)
    };
    let state = st.clone();
    let plan_id = req.plan_id;
    spawn_job(st, id.clone(), move |_| {
        let eg = expand(snap.graph.clone(), &snap.lattice, &chosen)?;
        let views: Vec<Value> = eg
            .views()
            .values()
            .map(|v| json!({ "id": v.node_id(), "groups": v.groups().len(), "triples": v.triple_count(), "terms": v.term_count() }))
            .collect();
        let out = json!({
            "facetId": facet,
            "planId": plan_id,
            "views": views,
            "totalViewTriples": eg.total_view_triples(),
            "storageAmplification": eg.storage_amplification().ok(),
        });
        state.write().facet_mut(&facet)?.expanded = Some(Arc::new(eg));
        Ok(out)
    });
    Ok(accepted(&id))
}

#[derive(Deserialize)]
struct ViewDataParams {
    limit: Option<usize>,
    facet: Option<String>,
}

async fn get_view_data(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(p): Query<ViewDataParams>,
) -> ApiResult {
    let s = st.read();
    // Without an explicit facet, the first facet (by id) holding the view.
    let found = match &p.facet {
        Some(f) => {
            let entry = s.facet(f)?;
            entry
                .expanded
                .as_ref()
                .and_then(|eg| eg.view(&id))
                .map(|v| (f.clone(), v))
        }
        None => s
            .facets
            .iter()
            .find_map(|(f, e)| e.expanded.as_ref().and_then(|eg| eg.view(&id)).map(|v| (f.clone(), v))),
    };
    let (facet, view) = found.ok_or_else(|| ApiError::not_found("materialized view", &id))?;
    let mut out = shapes::view_data(view, p.limit)?;
    out["facetId"] = json!(facet);
    Ok(Json(out))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct WorkloadRequest {
    facet_id: String,
    #[serde(default)]
    spec: WorkloadSpec,
}

async fn post_workload(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: WorkloadRequest = parse_body(&body)?;
    let snap = st.read().snapshot(&req.facet_id)?;
    let spec = req.spec;
    let queries = blocking(move || Ok(generate_workload(&snap.graph, &snap.lattice, &spec)?)).await?;
    let texts: Vec<String> = queries.iter().map(|q| q.to_string()).collect();
    let mut s = st.write();
    let id = s.next_id("w");
    s.workloads.insert(
        id.clone(),
        WorkloadEntry {
            facet: req.facet_id.clone(),
            queries: Arc::new(queries),
        },
    );
    Ok((
        StatusCode::CREATED,
        Json(json!({ "workloadId": id, "facetId": req.facet_id, "spec": spec, "queries": texts })),
    ))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BenchRequest {
    facet_id: String,
    workload_id: Option<String>,
    spec: Option<WorkloadSpec>,
    #[serde(default)]
    configs: Vec<BenchConfig>,
    #[serde(default)]
    verify: bool,
    repetitions: Option<usize>,
}

async fn post_bench(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: BenchRequest = parse_body(&body)?;
    let workload = match &req.workload_id {
        Some(w) => {
            let s = st.read();
            let entry = s.workloads.get(w).ok_or_else(|| ApiError::not_found("workload", w))?;
            if entry.facet != req.facet_id {
                return Err(ApiError::unprocessable(format!(
                    "workload `{w}` belongs to facet `{}`",
                    entry.facet
                )));
            }
            Some(entry.queries.clone())
        }
        None => None,
    };
    let snap = st.read().snapshot(&req.facet_id)?;
    let mut configs = Vec::with_capacity(req.configs.len());
    for c in &req.configs {
        if c.model_path.is_some() {
            return Err(ApiError::unprocessable(
                "modelPath is not accepted over HTTP; POST /train instead",
            ));
        }
        configs.push((snap.model(&c.model, c.seed, c.views.as_deref())?, c.budget()?));
    }
    let options = BenchOptions {
        verify: req.verify,
        repetitions: req.repetitions.unwrap_or(3).max(1),
    };
    let spec = req.spec.unwrap_or_default();
    let id = start_job(&mut st.write(), "bench", &req.facet_id)?;
    let state = st.clone();
    spawn_job(st, id.clone(), move |progress| {
        let workload = match workload {
            Some(w) => w,
            None => Arc::new(generate_workload(&snap.graph, &snap.lattice, &spec)?),
        };
        let report = run_bench(
            snap.graph.clone(),
            &snap.lattice,
            &workload,
            &configs,
            options,
            &|done, total| progress(done as f64 / total as f64),
        )?;
        let mut s = state.write();
        let rid = s.next_id("r");
        drop(s);
        state.persist_report(&rid, &report)?;
        state.write().reports.insert(rid.clone(), Arc::new(report));
        Ok(json!({ "reportId": rid }))
    });
    Ok(accepted(&id))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct TrainRequest {
    facet_id: String,
    #[serde(default)]
    spec: TrainSpec,
}

async fn post_train(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: TrainRequest = parse_body(&body)?;
    let snap = st.read().snapshot(&req.facet_id)?;
    let id = start_job(&mut st.write(), "train", &req.facet_id)?;
    let state = st.clone();
    let facet = req.facet_id;
    let spec = req.spec;
    spawn_job(st, id.clone(), move |_| {
        let model = train_on_runtimes(&snap.graph, &snap.lattice, &spec)?;
        let out = json!({ "facetId": facet, "features": model.feature_names.len(), "training": model.training });
        state.write().facet_mut(&facet)?.learned = Some(Arc::new(model));
        Ok(out)
    });
    Ok(accepted(&id))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ExplainRequest {
    facet_id: String,
    query: String,
    model: Option<String>,
    seed: Option<u64>,
}

/// Plans a query against the facet's current materialization and runs it.
async fn post_explain(State(st): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: ExplainRequest = parse_body(&body)?;
    let q = parse_query(&req.query)?;
    let (snap, eg) = {
        let s = st.read();
        let f = s.facet(&req.facet_id)?;
        (s.snapshot(&req.facet_id)?, f.expanded.clone())
    };
    let model = snap.model(req.model.as_deref().unwrap_or("aggvalues"), req.seed, None)?;
    blocking(move || {
        let eg = eg.unwrap_or_else(|| Arc::new(ExpandedGraph::new(snap.graph.clone())));
        let costs = snap.context().node_costs(&model)?;
        let plan = choose_view(&eg, &snap.lattice, &costs, &q)?;
        let table = rewrite_and_execute(&eg, &plan, &q)?;
        Ok(Json(json!({
            "source": plan.source.label(),
            "rollup": plan.rollup,
            "rewritten": plan.render(),
            "result": shapes::result_table(&table),
        })))
    })
    .await
}

async fn get_job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = st.read();
    let j = s.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(json!({
        "id": id,
        "kind": j.kind,
        "facetId": j.facet,
        "phase": j.phase,
        "progress": j.progress,
        "result": j.result,
        "error": j.error,
    })))
}

async fn get_report(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let s = st.read();
    let r = s.reports.get(&id).ok_or_else(|| ApiError::not_found("report", &id))?;
    Ok(Json(serde_json::to_value(&**r).map_err(SofosError::from)?))
}
