//! Optimization and validation jobs shared by the CLI and the service.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use firesmac_core::mdp::{Constituency, ConstituencyWeights};
use firesmac_core::policy::PolicyParams;
use firesmac_core::smac::{optimize, Bounds, HistoryEntry, SmacResult};
use firesmac_core::surrogate::{
    build_database, estimate_value, read_database, write_database, EstimateConfig, SurrogateError,
    TrajectoryDb,
};

use crate::config::WorkbenchConfig;
use crate::store::{ExperimentRecord, ExperimentStore, Incumbent, Status};
use crate::validation::{validate, ValidationReport};
use crate::WorkbenchError;

pub fn build_db(config: &WorkbenchConfig) -> Result<TrajectoryDb, WorkbenchError> {
    let s = &config.surrogate;
    Ok(build_database(s.n_policies, s.trajectories_per_policy, &config.sim, s.build_seed)?)
}

pub fn save_db(db: &TrajectoryDb, path: &Path) -> Result<(), WorkbenchError> {
    let file = File::create(path)
        .map_err(|e| WorkbenchError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    write_database(BufWriter::new(file), db)?;
    Ok(())
}

pub fn load_db(path: &Path) -> Result<TrajectoryDb, WorkbenchError> {
    let file = File::open(path)
        .map_err(|e| WorkbenchError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    Ok(read_database(std::io::BufReader::new(file))?)
}

/// Surrogate objective over raw parameter vectors.
pub fn surrogate_objective<'a>(
    db: &'a TrajectoryDb,
    weights: ConstituencyWeights,
    estimate: EstimateConfig,
) -> impl Fn(&[f64]) -> Result<f64, SurrogateError> + Sync + 'a {
    let gamma = db.config().discount;
    move |theta: &[f64]| {
        let params = PolicyParams::from_slice(theta)
            .map_err(|e| SurrogateError::Format(format!("optimizer produced invalid policy: {e}")))?;
        Ok(estimate_value(db, &params, &weights, gamma, &estimate)?.mean)
    }
}

/// Run SMAC against the surrogate, calling `on_batch` after every batch.
pub fn optimize_weights(
    db: &TrajectoryDb,
    weights: ConstituencyWeights,
    budget: usize,
    seed: u64,
    config: &WorkbenchConfig,
    on_batch: &mut dyn FnMut(u32, &[HistoryEntry]),
) -> Result<SmacResult, WorkbenchError> {
    let objective = surrogate_objective(db, weights, config.surrogate.estimate());
    let mut observer = |it: u32, batch: &[HistoryEntry]| on_batch(it, batch);
    Ok(optimize(objective, &Bounds::policy(), budget, seed, &config.smac.config(), &mut observer)?)
}

/// A new pending experiment, persisted.
pub fn create_experiment(
    store: &ExperimentStore,
    constituency: Option<Constituency>,
    weights: ConstituencyWeights,
    seed: u64,
    budget: usize,
    config: &WorkbenchConfig,
) -> Result<ExperimentRecord, WorkbenchError> {
    let min = config.smac.config().min_budget();
    if budget < min {
        return Err(WorkbenchError::Invalid(format!("budget {budget} is below the minimum of {min}")));
    }
    let record = ExperimentRecord::new(constituency, weights, seed, budget);
    store.create(&record)?;
    Ok(record)
}

/// Run a pending experiment to completion, streaming history to its file.
/// Failures are recorded in the experiment before being returned.
pub fn run_experiment(
    store: &ExperimentStore,
    id: &str,
    db: &TrajectoryDb,
    config: &WorkbenchConfig,
) -> Result<ExperimentRecord, WorkbenchError> {
    let record = store.update(id, |r| {
        r.status = Status::Running;
        r.evaluations = 0;
        r.error = None;
    })?;
    let result = (|| {
        let mut writer = store.history_writer(id)?;
        let start = Instant::now();
        let mut written = 0usize;
        let mut io_error = None;
        let mut on_batch = |_: u32, batch: &[HistoryEntry]| {
            if io_error.is_some() {
                return;
            }
            match writer.append(batch, start.elapsed().as_secs_f64()) {
                Ok(()) => {
                    written += batch.len();
                    let n = written;
                    if let Err(e) = store.update(id, |r| r.evaluations = n) {
                        io_error = Some(e);
                    }
                }
                Err(e) => io_error = Some(e.into()),
            }
        };
        let result = optimize_weights(db, record.weights, record.budget, record.seed, config, &mut on_batch)?;
        if let Some(e) = io_error {
            return Err(e);
        }
        Ok(result)
    })();
    match result {
        Ok(result) => store.update(id, |r| {
            r.status = Status::Done;
            r.evaluations = result.history.len();
            r.incumbent = Some(Incumbent {
                theta: PolicyParams::from_slice(&result.best_theta).expect("optimizer stays in bounds"),
                value: result.best_value,
            });
        }),
        Err(e) => {
            store.update(id, |r| {
                r.status = Status::Failed;
                r.error = Some(e.to_string());
            })?;
            Err(e)
        }
    }
}

/// Validate a finished experiment and persist the report.
pub fn run_validation(
    store: &ExperimentStore,
    id: &str,
    db: &TrajectoryDb,
    config: &WorkbenchConfig,
    n_rollouts: usize,
) -> Result<ValidationReport, WorkbenchError> {
    let record = store.load(id)?;
    let incumbent = match (&record.status, &record.incumbent) {
        (Status::Done, Some(inc)) => inc.clone(),
        _ => return Err(WorkbenchError::Conflict(format!("experiment {id} has not finished optimizing"))),
    };
    store.update(id, |r| {
        r.validation_status = Some(Status::Running);
        r.validation_error = None;
    })?;
    let outcome = validate(
        &incumbent.theta,
        incumbent.value,
        &record.weights,
        db,
        &config.surrogate.estimate(),
        n_rollouts,
        config.validation.seed,
    )
    .and_then(|(report, lines)| {
        store.save_validation(id, &report, &lines)?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            let returns = report.policies[0].returns.clone();
            store.update(id, |r| {
                r.validation_status = Some(Status::Done);
                r.validation = Some(returns);
            })?;
            Ok(report)
        }
        Err(e) => {
            store.update(id, |r| {
                r.validation_status = Some(Status::Failed);
                r.validation_error = Some(e.to_string());
            })?;
            Err(e)
        }
    }
}
