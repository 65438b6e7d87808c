//! HTTP service.
//!
//! | method | path | |
//! |---|---|---|
//! | GET  | `/api/health` | liveness |
//! | GET  | `/api/constituencies` | preset reward weights |
//! | GET  | `/api/experiments` | all experiment records |
//! | POST | `/api/experiments` | submit an optimization |
//! | GET  | `/api/experiments/{id}?since=N` | record plus history from entry N |
//! | POST | `/api/experiments/{id}/validation` | start validation |
//! | GET  | `/api/experiments/{id}/validation` | validation report |
//! | POST | `/api/rollout` | one seeded real-simulator trajectory |
//!
//! Optimizations and validations run on blocking worker threads; handlers
//! only touch the store, so polling never waits on a running job.

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use firesmac_core::mdp::{
    discounted_return, rollout, Constituency, ConstituencyWeights, LandscapeSummary, StepLine,
};
use firesmac_core::policy::{LetBurnAll, Policy, PolicyParams, SuppressAll};
use firesmac_core::smac::io::HistoryLine;
use firesmac_core::surrogate::TrajectoryDb;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::WorkbenchConfig;
use crate::runner::{create_experiment, run_experiment, run_validation};
use crate::store::{ExperimentRecord, ExperimentStore, Status};
use crate::WorkbenchError;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ExperimentStore>,
    pub db: Arc<TrajectoryDb>,
    pub config: Arc<WorkbenchConfig>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(|| async { Json(json!({"status": "ok"})) }))
        .route("/api/constituencies", get(constituencies))
        .route("/api/experiments", get(list_experiments).post(submit_experiment))
        .route("/api/experiments/{id}", get(get_experiment))
        .route("/api/experiments/{id}/validation", get(get_validation).post(start_validation))
        .route("/api/rollout", post(rollout_trace))
        .with_state(state)
}

impl IntoResponse for WorkbenchError {
    fn into_response(self) -> Response {
        let status = match &self {
            WorkbenchError::NotFound(_) => StatusCode::NOT_FOUND,
            WorkbenchError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            WorkbenchError::Conflict(_) => StatusCode::CONFLICT,
            WorkbenchError::Mdp(
                firesmac_core::mdp::MdpError::InvalidWeights(_)
                | firesmac_core::mdp::MdpError::UnknownConstituency(_),
            ) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, WorkbenchError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct ConstituencyInfo {
    pub name: String,
    pub weights: ConstituencyWeights,
}

async fn constituencies() -> Json<Vec<ConstituencyInfo>> {
    Json(
        Constituency::ALL
            .iter()
            .map(|c| ConstituencyInfo { name: c.name().into(), weights: c.weights() })
            .collect(),
    )
}

async fn list_experiments(State(s): State<AppState>) -> ApiResult<Json<Vec<ExperimentRecord>>> {
    let store = s.store.clone();
    Ok(Json(blocking(move || store.list()).await?))
}

/// Weights arrive as a loose map so that bad values produce a readable
/// validation error rather than a generic decode failure.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitRequest {
    pub constituency: Option<String>,
    pub weights: Option<serde_json::Value>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
}

pub fn parse_weights(value: serde_json::Value) -> Result<ConstituencyWeights, WorkbenchError> {
    serde_json::from_value::<ConstituencyWeights>(value)
        .map_err(|e| WorkbenchError::Invalid(format!("weights: {e}")))
}

async fn submit_experiment(
    State(s): State<AppState>,
    body: Result<Json<SubmitRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<(StatusCode, Json<ExperimentRecord>)> {
    let Json(req) = body.map_err(|e| WorkbenchError::Invalid(e.body_text()))?;
    let (constituency, weights) = match (req.constituency, req.weights) {
        (Some(name), None) => {
            let c: Constituency = name.parse()?;
            (Some(c), c.weights())
        }
        (None, Some(w)) => (None, parse_weights(w)?),
        (Some(_), Some(_)) => {
            return Err(WorkbenchError::Invalid("give either constituency or weights, not both".into()))
        }
        (None, None) => return Err(WorkbenchError::Invalid("constituency or weights is required".into())),
    };
    let seed = req.seed.unwrap_or(s.config.smac.seed);
    let budget = req.budget.unwrap_or(s.config.smac.budget);
    let record = create_experiment(&s.store, constituency, weights, seed, budget, &s.config)?;
    let id = record.id.clone();
    tokio::task::spawn_blocking(move || {
        // The outcome is recorded in the store either way.
        let _ = run_experiment(&s.store, &id, &s.db, &s.config);
    });
    Ok((StatusCode::ACCEPTED, Json(record)))
}

#[derive(Debug, Deserialize)]
pub struct SinceQuery {
    #[serde(default)]
    pub since: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentView {
    pub record: ExperimentRecord,
    /// History entries with index ≥ `since`.
    pub history: Vec<HistoryLine>,
    pub since: usize,
    /// Index to pass as `since` on the next poll.
    pub next: usize,
}

async fn get_experiment(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SinceQuery>,
) -> ApiResult<Json<ExperimentView>> {
    let store = s.store.clone();
    blocking(move || {
        // Read the record first: history only grows, so it is never behind.
        let record = store.load(&id)?;
        let history = store.read_history(&id, q.since)?;
        let next = q.since + history.len();
        Ok(Json(ExperimentView { record, history, since: q.since, next }))
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRequest {
    pub n_rollouts: Option<usize>,
}

async fn start_validation(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<ValidationRequest>>,
) -> ApiResult<(StatusCode, Json<ExperimentRecord>)> {
    let n = body.and_then(|b| b.0.n_rollouts).unwrap_or(s.config.validation.n_rollouts);
    if n < crate::validation::MIN_ROLLOUTS {
        return Err(WorkbenchError::Invalid(format!(
            "n_rollouts must be at least {}",
            crate::validation::MIN_ROLLOUTS
        )));
    }
    let record = {
        let store = s.store.clone();
        let id = id.clone();
        blocking(move || {
            let r = store.load(&id)?;
            if r.status != Status::Done {
                return Err(WorkbenchError::Conflict(format!("experiment {id} is {:?}", r.status)));
            }
            if matches!(r.validation_status, Some(Status::Pending | Status::Running)) {
                return Err(WorkbenchError::Conflict(format!("experiment {id} is already validating")));
            }
            store.update(&id, |r| r.validation_status = Some(Status::Pending))
        })
        .await?
    };
    tokio::task::spawn_blocking(move || {
        let _ = run_validation(&s.store, &id, &s.db, &s.config, n);
    });
    Ok((StatusCode::ACCEPTED, Json(record)))
}

async fn get_validation(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let store = s.store.clone();
    blocking(move || {
        let record = store.load(&id)?;
        match store.load_validation(&id)? {
            Some(report) if record.validation_status == Some(Status::Done) => {
                Ok(Json(report).into_response())
            }
            _ => match record.validation_status {
                None => Err(WorkbenchError::NotFound(format!("validation for {id}"))),
                Some(Status::Failed) => {
                    Ok((StatusCode::OK, Json(json!({"status": "failed", "error": record.validation_error})))
                        .into_response())
                }
                Some(status) => Ok((StatusCode::ACCEPTED, Json(json!({ "status": status }))).into_response()),
            },
        }
    })
    .await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutRequest {
    /// Tree-policy parameters; alternatively `policy` names a trivial policy.
    pub theta: Option<Vec<f64>>,
    pub policy: Option<String>,
    pub seed: u64,
    /// Optional reward weights for a discounted return in the response.
    pub weights: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RolloutResponse {
    pub seed: u64,
    pub initial: LandscapeSummary,
    pub steps: Vec<StepLine>,
    pub suppressed: usize,
    pub discounted_return: Option<f64>,
}

async fn rollout_trace(
    State(s): State<AppState>,
    body: Result<Json<RolloutRequest>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<RolloutResponse>> {
    let Json(req) = body.map_err(|e| WorkbenchError::Invalid(e.body_text()))?;
    let policy: Box<dyn Policy + Send> = match (req.theta, req.policy.as_deref()) {
        (Some(theta), None) => {
            Box::new(PolicyParams::from_slice(&theta).map_err(|e| WorkbenchError::Invalid(e.to_string()))?)
        }
        (None, Some("suppress_all")) => Box::new(SuppressAll),
        (None, Some("let_burn_all")) => Box::new(LetBurnAll),
        (None, Some(other)) => {
            return Err(WorkbenchError::Invalid(format!(
                "unknown policy {other:?}; expected suppress_all or let_burn_all"
            )))
        }
        _ => return Err(WorkbenchError::Invalid("give exactly one of theta or policy".into())),
    };
    let weights = req.weights.map(parse_weights).transpose()?;
    let sim = s.config.sim.clone();
    blocking(move || {
        let traj = rollout(policy.as_ref(), req.seed, &sim)?;
        let discounted = weights.map(|w| discounted_return(&traj, &w, sim.discount)).transpose()?;
        Ok(Json(RolloutResponse {
            seed: traj.seed,
            initial: traj.initial,
            suppressed: traj.suppressed(),
            steps: traj.steps.iter().map(StepLine::from).collect(),
            discounted_return: discounted,
        }))
    })
    .await
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, WorkbenchError> + Send + 'static,
) -> Result<T, WorkbenchError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| WorkbenchError::Internal(format!("worker panicked: {e}")))?
}
