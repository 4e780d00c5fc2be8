//! HTTP API over datasets, cohorts, long-running analyses and exported
//! models.
//!
//! | method | path | response |
//! |---|---|---|
//! | POST | `/datasets` | 201 `{id, n_rows, n_cols, clean_report}` |
//! | GET | `/datasets/{id}/summary` | per-column summaries |
//! | POST | `/cohorts` | 201 `{id, dataset_id, n_rows, flowchart, missingness}` |
//! | GET | `/cohorts/{id}/flowchart` | `{id, flowchart, text}` |
//! | POST | `/analyses/bayesnet` | 202 `{job_id}` |
//! | POST | `/analyses/svm-grid` | 202 `{job_id}` |
//! | GET | `/jobs/{id}` | `{id, kind, status, result?, error?}` |
//! | GET | `/models` | artifact summaries |
//! | GET | `/models/{id}` | artifact metadata and input schema |
//! | POST | `/models/{id}/predict` | prediction for a record |

use std::collections::HashMap;
use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use caselab_core::analysis::{run_bayesnet, run_svm_grid, BayesAnalysisConfig, SvmAnalysisConfig};
use caselab_core::cohort::{apply_criteria, missingness_comparison, Criterion, Flowchart};
use caselab_core::registry::{personalized_predict, ModelArtifact, Payload, Registry, RegistryError};
use caselab_core::stats::describe;
use caselab_core::tabular::{clean_sentinels, read_csv, ColumnSpec, Dataset, Record, Schema};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub artifact_dir: PathBuf,
    /// Analyses allowed to run at once.
    pub workers: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("artifact directory: {0}")]
    Registry(#[from] RegistryError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

struct CohortEntry {
    dataset_id: String,
    data: Arc<Dataset>,
    flowchart: Flowchart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Shared state: immutable dataset and cohort snapshots, the artifact
/// registry and the job table.
pub struct AppState {
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    cohorts: RwLock<HashMap<String, Arc<CohortEntry>>>,
    registry: RwLock<Registry>,
    jobs: Mutex<HashMap<String, Job>>,
    next_id: AtomicU64,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(registry: Registry, workers: usize) -> Arc<Self> {
        Arc::new(Self {
            datasets: RwLock::default(),
            cohorts: RwLock::default(),
            registry: RwLock::new(registry),
            jobs: Mutex::default(),
            next_id: AtomicU64::new(1),
            workers: Arc::new(Semaphore::new(workers.max(1))),
        })
    }

    fn fresh_id(&self, prefix: &str) -> String {
        format!("{prefix}-{}", self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn set_job(&self, id: &str, update: impl FnOnce(&mut Job)) {
        if let Some(job) = self.jobs.lock().unwrap().get_mut(id) {
            // finished jobs are immutable
            if !matches!(job.status, JobStatus::Done | JobStatus::Failed) {
                update(job);
            }
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        Self {
            status,
            message: message.to_string(),
            field: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("{what} `{id}` not found"))
    }

    fn unprocessable(message: impl ToString) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if let Some(f) = self.field {
            body["field"] = Value::String(f);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), r.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}/summary", get(dataset_summary))
        .route("/cohorts", post(create_cohort))
        .route("/cohorts/{id}/flowchart", get(cohort_flowchart))
        .route("/analyses/bayesnet", post(start_bayesnet))
        .route("/analyses/svm-grid", post(start_svm_grid))
        .route("/jobs/{id}", get(get_job))
        .route("/models", get(list_models))
        .route("/models/{id}", get(get_model))
        .route("/models/{id}/predict", post(predict))
        .with_state(state)
}

/// Serves on an already bound listener until `shutdown` resolves, then lets
/// in-flight requests finish.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Opens the artifact directory, binds the port and serves until `shutdown`.
pub async fn serve(
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let registry = Registry::open(&config.artifact_dir)?;
    log::info!(
        "loaded {} artifacts from {}",
        registry.len(),
        config.artifact_dir.display()
    );
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|source| ServiceError::Bind {
            addr: config.addr,
            source,
        })?;
    log::info!("listening on {}", listener.local_addr()?);
    serve_on(listener, AppState::new(registry, config.workers), shutdown).await
}

// ---------- datasets ----------

#[derive(Deserialize)]
struct NewDataset {
    csv: String,
    schema: SchemaInput,
    #[serde(default = "yes")]
    clean: bool,
}

/// Either `{"columns": [...]}` or the bare column list.
#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaInput {
    Wrapped(Schema),
    Columns(Vec<ColumnSpec>),
}

fn yes() -> bool {
    true
}

async fn create_dataset(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewDataset>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(body) = body?;
    let schema = match body.schema {
        SchemaInput::Wrapped(s) => s,
        SchemaInput::Columns(c) => Schema::new(c).map_err(ApiError::unprocessable)?,
    };
    let id = state.fresh_id("ds");
    let raw = read_csv(body.csv.as_bytes(), &schema, &format!("upload {id}")).map_err(ApiError::unprocessable)?;
    let (ds, report) = if body.clean {
        let (ds, r) = clean_sentinels(&raw);
        (ds, Some(r))
    } else {
        (raw, None)
    };
    let out = json!({ "id": id, "n_rows": ds.n_rows(), "n_cols": ds.n_cols(), "clean_report": report });
    state.datasets.write().unwrap().insert(id, Arc::new(ds));
    Ok((StatusCode::CREATED, Json(out)))
}

fn dataset(state: &AppState, id: &str) -> ApiResult<Arc<Dataset>> {
    state
        .datasets
        .read()
        .unwrap()
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("dataset", id))
}

fn summaries(ds: &Dataset) -> Value {
    let vars: Vec<Value> = ds
        .schema()
        .names()
        .map(|name| match describe(ds, name) {
            Ok(s) => json!({ "name": name, "summary": s }),
            Err(e) => json!({ "name": name, "error": e.to_string() }),
        })
        .collect();
    json!({ "n_rows": ds.n_rows(), "variables": vars })
}

async fn dataset_summary(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let ds = dataset(&state, &id)?;
    let mut out = summaries(&ds);
    out["id"] = Value::String(id);
    Ok(Json(out))
}

// ---------- cohorts ----------

#[derive(Deserialize)]
struct NewCohort {
    dataset_id: String,
    #[serde(default)]
    criteria: Vec<Criterion>,
    #[serde(default)]
    analysis_vars: Vec<String>,
}

async fn create_cohort(
    State(state): State<Arc<AppState>>,
    body: Result<Json<NewCohort>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(body) = body?;
    let ds = dataset(&state, &body.dataset_id)?;
    let (cohort, flowchart) =
        apply_criteria(&ds, &body.criteria, &body.analysis_vars).map_err(ApiError::unprocessable)?;
    let (screened, _) = apply_criteria(&ds, &body.criteria, &[] as &[&str]).map_err(ApiError::unprocessable)?;
    let missingness = missingness_comparison(&screened, &body.analysis_vars).map_err(ApiError::unprocessable)?;
    let id = state.fresh_id("co");
    let out = json!({
        "id": id,
        "dataset_id": body.dataset_id,
        "n_rows": cohort.n_rows(),
        "flowchart": flowchart,
        "missingness": missingness,
    });
    let entry = CohortEntry {
        dataset_id: body.dataset_id,
        data: Arc::new(cohort),
        flowchart,
    };
    state.cohorts.write().unwrap().insert(id, Arc::new(entry));
    Ok((StatusCode::CREATED, Json(out)))
}

fn cohort(state: &AppState, id: &str) -> ApiResult<Arc<CohortEntry>> {
    state
        .cohorts
        .read()
        .unwrap()
        .get(id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("cohort", id))
}

async fn cohort_flowchart(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let c = cohort(&state, &id)?;
    Ok(Json(json!({
        "id": id,
        "dataset_id": c.dataset_id,
        "flowchart": c.flowchart,
        "text": c.flowchart.render_text(),
    })))
}

// ---------- analyses and jobs ----------

#[derive(Deserialize)]
struct Source {
    #[serde(default)]
    cohort_id: Option<String>,
    #[serde(default)]
    dataset_id: Option<String>,
}

fn source_data(state: &AppState, src: &Source) -> ApiResult<Arc<Dataset>> {
    match (&src.cohort_id, &src.dataset_id) {
        (Some(c), None) => Ok(cohort(state, c)?.data.clone()),
        (None, Some(d)) => dataset(state, d),
        _ => Err(ApiError::unprocessable("give exactly one of cohort_id or dataset_id")),
    }
}

#[derive(Deserialize)]
struct BayesRequest {
    #[serde(flatten)]
    source: Source,
    #[serde(flatten)]
    config: BayesAnalysisConfig,
}

#[derive(Deserialize)]
struct SvmRequest {
    #[serde(flatten)]
    source: Source,
    #[serde(flatten)]
    config: SvmAnalysisConfig,
}

fn spawn_job<F>(state: &Arc<AppState>, kind: &str, work: F) -> String
where
    F: FnOnce() -> Result<(Value, ModelArtifact), String> + Send + 'static,
{
    let id = state.fresh_id("job");
    state.jobs.lock().unwrap().insert(
        id.clone(),
        Job {
            id: id.clone(),
            kind: kind.to_string(),
            status: JobStatus::Queued,
            result: None,
            error: None,
        },
    );
    let st = state.clone();
    let job_id = id.clone();
    tokio::spawn(async move {
        let _permit = st.workers.clone().acquire_owned().await.expect("semaphore open");
        st.set_job(&job_id, |j| j.status = JobStatus::Running);
        let outcome = tokio::task::spawn_blocking(work)
            .await
            .unwrap_or_else(|e| Err(format!("analysis panicked: {e}")));
        let outcome = outcome.and_then(|(mut result, artifact)| {
            let registered = st
                .registry
                .write()
                .unwrap()
                .register(artifact)
                .map_err(|e| e.to_string())?;
            result["model_id"] = Value::String(registered.id.clone());
            Ok(result)
        });
        st.set_job(&job_id, |j| match outcome {
            Ok(r) => {
                j.result = Some(r);
                j.status = JobStatus::Done;
            }
            Err(e) => {
                j.error = Some(e);
                j.status = JobStatus::Failed;
            }
        });
    });
    id
}

async fn start_bayesnet(
    State(state): State<Arc<AppState>>,
    body: Result<Json<BayesRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(body) = body?;
    let data = source_data(&state, &body.source)?;
    let config = body.config;
    let id = spawn_job(&state, "bayesnet", move || {
        let a = run_bayesnet(&data, &config).map_err(|e| e.to_string())?;
        let nodes = a.scored.dag.nodes().to_vec();
        let edges: Vec<[&str; 2]> = a
            .scored
            .dag
            .edges()
            .into_iter()
            .map(|(f, t)| [nodes[f].as_str(), nodes[t].as_str()])
            .collect();
        let result = json!({
            "nodes": nodes,
            "edges": edges,
            "bic": a.scored.total,
            "family_scores": a.scored.family_scores,
            "paths": a.paths,
            "edge_list": a.scored.dag.edge_list(),
            "dot": a.scored.dag.to_dot(),
        });
        Ok((result, a.artifact))
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}

async fn start_svm_grid(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SvmRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let Json(body) = body?;
    let data = source_data(&state, &body.source)?;
    let config = body.config;
    let id = spawn_job(&state, "svm-grid", move || {
        let a = run_svm_grid(&data, &config).map_err(|e| e.to_string())?;
        let result = json!({ "grid": a.grid, "gammas": config.grid.gammas, "costs": config.grid.costs });
        Ok((result, a.artifact))
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": id }))))
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Job>> {
    state
        .jobs
        .lock()
        .unwrap()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("job", &id))
}

// ---------- models ----------

fn artifact(state: &AppState, id: &str) -> ApiResult<Arc<ModelArtifact>> {
    state
        .registry
        .read()
        .unwrap()
        .get(id)
        .ok_or_else(|| ApiError::not_found("model", id))
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "models": state.registry.read().unwrap().list() }))
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let a = artifact(&state, &id)?;
    let target = match &a.payload {
        Payload::BayesNet { network, target } => {
            let t = network.node_index(target).expect("artifact target is a node");
            Some(json!({ "name": target, "categories": network.categories(t) }))
        }
        Payload::Svm { model, .. } => Some(json!({ "labels": model.labels() })),
    };
    Ok(Json(json!({
        "id": a.id,
        "kind": a.kind(),
        "format_version": a.format_version,
        "created_at": a.created_at,
        "schema_fingerprint": a.schema_fingerprint,
        "input_schema": a.input_schema,
        "required_variables": a.required_variables,
        "training": a.training,
        "metrics": a.metrics,
        "output": target,
    })))
}

async fn predict(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<Record>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let a = artifact(&state, &id)?;
    let Json(record) = body?;
    match personalized_predict(&a, &record) {
        Ok(p) => Ok(Json(serde_json::to_value(p).expect("prediction serializes"))),
        Err(e) if e.is_input_error() => Err(ApiError {
            field: e.field().map(str::to_string),
            ..ApiError::unprocessable(&e)
        }),
        Err(e) => Err(ApiError::new(StatusCode::CONFLICT, e)),
    }
}
