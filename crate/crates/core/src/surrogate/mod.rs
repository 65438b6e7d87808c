//! Model-free Monte Carlo surrogate.
//!
//! A database of real-simulator transitions is collected once from the
//! two-threshold seed policy class. New policies are then evaluated by
//! stitching: a fresh ignition stream is drawn, the policy picks an action at
//! each ignition, and the nearest unused stored transition with the same
//! action supplies the reward and the next landscape state.
//!
//! Transitions are compared on five features: ERC, season day, days to the
//! next weather event, fraction of high-fuel cells and year. Features are
//! divided by their standard deviation over the database before taking the
//! Euclidean distance.

mod store;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{
    discounted_return, ignition_seed, init_landscape, landscape_seed, rollout, sample_ignitions_at,
    ConstituencyWeights, FireOutcome, LandscapeSummary, MdpError, RewardVector, SimConfig, Trajectory,
    TrajectoryStep,
};
use crate::policy::{Action, IgnitionEvent, Policy, SeedPolicyParams};
use crate::rng::{derive_seed, stream};

pub use store::{read_database, write_database, SCHEMA_VERSION};

pub const N_FEATURES: usize = 5;
pub const SCALE_FLOOR: f64 = 1e-9;

pub const DEFAULT_SEED_POLICIES: usize = 360;
pub const DEFAULT_TRAJECTORIES_PER_POLICY: usize = 1;
pub const DEFAULT_SURROGATE_TRAJECTORIES: usize = 30;

pub type Features = [f64; N_FEATURES];

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("no stored transition with action {action:?} for year {year}")]
    Coverage { year: u32, action: Action },
    #[error("database needs at least one seed policy and one trajectory per policy")]
    EmptyRequest,
    #[error("surrogate needs at least one stitched trajectory per estimate")]
    NoTrajectories,
    #[error("corrupt trajectory database: {0}")]
    Format(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSource {
    pub policy: u32,
    pub trajectory_seed: u64,
    pub step: u32,
}

/// One stored real-simulator transition.
///
/// `successor_features` are the features of the next decision point of the
/// source trajectory, so fuel growth through years without ignitions is part
/// of the transition. The last step of a trajectory reuses its own event
/// fields with the final landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub features: Features,
    pub action: Action,
    pub reward: RewardVector,
    pub successor_features: Features,
    pub outcome: FireOutcome,
    pub summary: LandscapeSummary,
    pub source: RecordSource,
}

/// How a database was produced; kept for provenance in the file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub n_policies: usize,
    pub trajectories_per_policy: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDb {
    config: SimConfig,
    info: BuildInfo,
    records: Vec<TransitionRecord>,
    scales: Features,
    /// `strata[year][action]` lists record ids.
    strata: Vec<[Vec<u32>; 2]>,
}

fn action_slot(a: Action) -> usize {
    match a {
        Action::Suppress => 0,
        Action::LetBurn => 1,
    }
}

pub fn event_features(event: &IgnitionEvent, fraction_high_fuel: f64) -> Features {
    [
        event.erc,
        event.season_day as f64,
        event.days_to_weather_event as f64,
        fraction_high_fuel,
        event.year as f64,
    ]
}

impl TrajectoryDb {
    pub fn from_records(config: SimConfig, info: BuildInfo, records: Vec<TransitionRecord>) -> Self {
        let scales = feature_scales(&records);
        Self::with_scales(config, info, records, scales)
    }

    pub(crate) fn with_scales(
        config: SimConfig,
        info: BuildInfo,
        records: Vec<TransitionRecord>,
        scales: Features,
    ) -> Self {
        let mut strata: Vec<[Vec<u32>; 2]> =
            (0..config.horizon_years).map(|_| [Vec::new(), Vec::new()]).collect();
        for (id, r) in records.iter().enumerate() {
            let year = r.features[4] as usize;
            if year >= strata.len() {
                strata.resize_with(year + 1, || [Vec::new(), Vec::new()]);
            }
            strata[year][action_slot(r.action)].push(id as u32);
        }
        Self { config, info, records, scales, strata }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn info(&self) -> BuildInfo {
        self.info
    }

    pub fn records(&self) -> &[TransitionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scales(&self) -> &Features {
        &self.scales
    }

    /// Normalized Euclidean distance between two feature vectors.
    pub fn distance(&self, a: &Features, b: &Features) -> f64 {
        self.distance_sq(a, b).sqrt()
    }

    #[inline]
    fn distance_sq(&self, a: &Features, b: &Features) -> f64 {
        let mut acc = 0.0;
        for i in 0..N_FEATURES {
            let d = (a[i] - b[i]) / self.scales[i];
            acc += d * d;
        }
        acc
    }

    /// Nearest unused record with `action`, searching the query's year first
    /// and widening one year at a time.
    fn nearest(&self, query: &Features, action: Action, used: &[bool]) -> Option<usize> {
        let slot = action_slot(action);
        let n_years = self.strata.len() as i64;
        let year = (query[4] as i64).clamp(0, (n_years - 1).max(0));
        for radius in 0..n_years.max(1) {
            let mut best: Option<(f64, usize)> = None;
            let lower = year - radius;
            let upper = year + radius;
            let years = if radius == 0 { [Some(year), None] } else { [Some(lower), Some(upper)] };
            let mut in_range = false;
            for y in years.into_iter().flatten() {
                if y < 0 || y >= n_years {
                    continue;
                }
                in_range = true;
                for &id in &self.strata[y as usize][slot] {
                    let id = id as usize;
                    if used[id] {
                        continue;
                    }
                    let d = self.distance_sq(query, &self.records[id].features);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, id));
                    }
                }
            }
            if let Some((_, id)) = best {
                return Some(id);
            }
            if !in_range {
                break;
            }
        }
        None
    }
}

fn feature_scales(records: &[TransitionRecord]) -> Features {
    let mut scales = [SCALE_FLOOR; N_FEATURES];
    if records.is_empty() {
        return scales;
    }
    let n = records.len() as f64;
    for (i, scale) in scales.iter_mut().enumerate() {
        let mean = records.iter().map(|r| r.features[i]).sum::<f64>() / n;
        let var = records.iter().map(|r| (r.features[i] - mean).powi(2)).sum::<f64>() / n;
        *scale = var.sqrt().max(SCALE_FLOOR);
    }
    scales
}

/// Turn a real trajectory into transition records.
pub fn trajectory_records(traj: &Trajectory, config: &SimConfig, policy: u32) -> Vec<TransitionRecord> {
    let n_cells = config.n_cells() as f64;
    traj.steps
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let high_cells = s.event.fuel_high_pixels / config.pixels_per_cell;
            let features = event_features(&s.event, high_cells as f64 / n_cells);
            let successor_features = match traj.steps.get(k + 1) {
                Some(next) => {
                    let cells = next.event.fuel_high_pixels / config.pixels_per_cell;
                    event_features(&next.event, cells as f64 / n_cells)
                }
                None => {
                    let mut f = features;
                    f[3] = s.summary.fraction_high_fuel;
                    f[4] += 1.0;
                    f
                }
            };
            TransitionRecord {
                features,
                action: s.action,
                reward: s.reward,
                successor_features,
                outcome: s.outcome,
                summary: s.summary,
                source: RecordSource { policy, trajectory_seed: traj.seed, step: k as u32 },
            }
        })
        .collect()
}

/// Run the seed policy class on the real simulator and store every step.
pub fn build_database(
    n_policies: usize,
    trajectories_per_policy: usize,
    config: &SimConfig,
    seed: u64,
) -> Result<TrajectoryDb, SurrogateError> {
    if n_policies == 0 || trajectories_per_policy == 0 {
        return Err(SurrogateError::EmptyRequest);
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, stream::SEED_POLICIES, 0));
    let policies: Vec<SeedPolicyParams> =
        (0..n_policies).map(|_| SeedPolicyParams::sample(&mut rng)).collect();

    let jobs: Vec<(usize, u64)> = (0..n_policies)
        .flat_map(|p| {
            (0..trajectories_per_policy).map(move |t| {
                let index = (p * trajectories_per_policy + t) as u64;
                (p, derive_seed(seed, stream::DB_ROLLOUT, index))
            })
        })
        .collect();

    let chunks: Vec<Vec<TransitionRecord>> = jobs
        .par_iter()
        .map(|&(p, traj_seed)| {
            let traj = rollout(&policies[p], traj_seed, config)?;
            Ok(trajectory_records(&traj, config, p as u32))
        })
        .collect::<Result<_, MdpError>>()?;

    let info = BuildInfo { n_policies, trajectories_per_policy, seed };
    Ok(TrajectoryDb::from_records(config.clone(), info, chunks.into_iter().flatten().collect()))
}

/// Stitched trajectory plus the ids of the records it consumed, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchTrace {
    pub trajectory: Trajectory,
    pub record_ids: Vec<usize>,
}

pub fn stitch_trajectory<P: Policy + ?Sized>(
    db: &TrajectoryDb,
    policy: &P,
    seed: u64,
) -> Result<Trajectory, SurrogateError> {
    stitch_trajectory_traced(db, policy, seed).map(|t| t.trajectory)
}

pub fn stitch_trajectory_traced<P: Policy + ?Sized>(
    db: &TrajectoryDb,
    policy: &P,
    seed: u64,
) -> Result<StitchTrace, SurrogateError> {
    let config = &db.config;
    let n_cells = config.n_cells();
    let start = init_landscape(landscape_seed(seed), config)?.summary();
    let mut fraction_high_fuel = start.fraction_high_fuel;
    let mut used = vec![false; db.records.len()];
    let mut steps = Vec::new();
    let mut record_ids = Vec::new();

    for year in 0..config.horizon_years {
        let mut high_cells = (fraction_high_fuel * n_cells as f64).round() as u64;
        let events =
            sample_ignitions_at(year, high_cells * config.pixels_per_cell, config, ignition_seed(seed, year));
        for drawn in &events {
            let event = IgnitionEvent { fuel_high_pixels: high_cells * config.pixels_per_cell, ..*drawn };
            let action = policy.decide(&event);
            let query = event_features(&event, high_cells as f64 / n_cells as f64);
            let id = db.nearest(&query, action, &used).ok_or(SurrogateError::Coverage { year, action })?;
            used[id] = true;
            let rec = &db.records[id];
            steps.push(TrajectoryStep {
                event,
                action,
                reward: rec.reward,
                outcome: rec.outcome,
                summary: rec.summary,
            });
            record_ids.push(id);
            fraction_high_fuel = rec.successor_features[3];
            high_cells = (fraction_high_fuel * n_cells as f64).round() as u64;
        }
    }

    Ok(StitchTrace {
        trajectory: Trajectory { seed, horizon_years: config.horizon_years, initial: start, steps },
        record_ids,
    })
}

/// Settings for one surrogate value query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub n_trajectories: usize,
    pub base_seed: u64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { n_trajectories: DEFAULT_SURROGATE_TRAJECTORIES, base_seed: 0x005E_ED0F_F14E }
    }
}

impl EstimateConfig {
    pub fn trajectory_seed(&self, index: usize) -> u64 {
        derive_seed(self.base_seed, stream::SURROGATE, index as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub mean: f64,
    pub per_trajectory: Vec<f64>,
}

/// Mean weighted discounted return over stitched trajectories.
pub fn estimate_value<P: Policy + ?Sized>(
    db: &TrajectoryDb,
    policy: &P,
    weights: &ConstituencyWeights,
    gamma: f64,
    settings: &EstimateConfig,
) -> Result<ValueEstimate, SurrogateError> {
    if settings.n_trajectories == 0 {
        return Err(SurrogateError::NoTrajectories);
    }
    let per_trajectory = (0..settings.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let traj = stitch_trajectory(db, policy, settings.trajectory_seed(i))?;
            Ok(discounted_return(&traj, weights, gamma)?)
        })
        .collect::<Result<Vec<f64>, SurrogateError>>()?;
    let mean = per_trajectory.iter().sum::<f64>() / per_trajectory.len() as f64;
    Ok(ValueEstimate { mean, per_trajectory })
}
