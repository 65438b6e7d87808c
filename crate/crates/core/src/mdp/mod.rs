//! Desk-scale stochastic wildfire MDP.
//!
//! Decision points are lightning ignitions. Each fire is resolved on a grid
//! by a seeded spread process; between fire seasons the landscape grows and a
//! harvest rule removes fuel. Rewards are the five components of
//! [`RewardVector`], composed by [`ConstituencyWeights`].

mod config;
mod io;
mod landscape;
mod reward;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::SimConfig;
pub use io::{read_trajectory_lines, write_trajectory_lines, StepLine};
pub use landscape::{sample_ignitions_at, Cell, FireOutcome, LandscapeState, LandscapeSummary, YearEnd};
pub use reward::{constituency, Constituency, ConstituencyWeights, RewardVector};

use crate::policy::{Action, IgnitionEvent, Policy};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid simulator configuration: {0}")]
    Config(String),
    #[error("event from year {event_year} applied to landscape in year {state_year}")]
    Protocol { event_year: u32, state_year: u32 },
    #[error("discount factor {0} outside (0, 1]")]
    Discount(f64),
    #[error("unknown constituency `{0}`")]
    UnknownConstituency(String),
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error("malformed trajectory line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One decision point and its consequences.
///
/// `summary` describes the landscape after the transition: after the fire,
/// and for the last ignition of a year also after that year's harvest and
/// growth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub event: IgnitionEvent,
    pub action: Action,
    pub reward: RewardVector,
    pub outcome: FireOutcome,
    pub summary: LandscapeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub horizon_years: u32,
    pub initial: LandscapeSummary,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn suppressed(&self) -> usize {
        self.steps.iter().filter(|s| s.action.is_suppress()).count()
    }

    pub fn total_smoky_days(&self) -> u64 {
        self.steps.iter().map(|s| s.outcome.smoky_days as u64).sum()
    }
}

pub fn init_landscape(seed: u64, config: &SimConfig) -> Result<LandscapeState, MdpError> {
    LandscapeState::init(seed, config)
}

/// Seed of the landscape backing trajectory `seed`.
pub fn landscape_seed(seed: u64) -> u64 {
    derive_seed(seed, stream::LANDSCAPE, 0)
}

pub fn ignition_seed(seed: u64, year: u32) -> u64 {
    derive_seed(seed, stream::IGNITIONS, year as u64)
}

pub fn fire_seed(seed: u64, year: u32, index: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::FIRE, year as u64), stream::FIRE, index as u64)
}

/// Simulate `config.horizon_years` fire seasons under `policy`.
///
/// Timber revenue from a year without ignitions is carried to the next
/// decision point.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    seed: u64,
    config: &SimConfig,
) -> Result<Trajectory, MdpError> {
    let mut state = init_landscape(landscape_seed(seed), config)?;
    let initial = state.summary();
    let mut steps: Vec<TrajectoryStep> = Vec::new();
    let mut carried_timber = 0.0;

    for year in 0..config.horizon_years {
        let events = state.sample_ignitions(ignition_seed(seed, year));
        for (k, drawn) in events.iter().enumerate() {
            let event = IgnitionEvent { fuel_high_pixels: state.high_fuel_pixels(), ..*drawn };
            let action = policy.decide(&event);
            let (mut reward, outcome) = state.step(&event, action, fire_seed(seed, year, k))?;
            reward.timber += std::mem::take(&mut carried_timber);
            steps.push(TrajectoryStep { event, action, reward, outcome, summary: state.summary() });
        }
        let end = state.advance_year();
        match (events.is_empty(), steps.last_mut()) {
            (false, Some(last)) => {
                last.reward.timber += end.timber;
                last.summary = state.summary();
            }
            _ => carried_timber += end.timber,
        }
    }

    Ok(Trajectory { seed, horizon_years: config.horizon_years, initial, steps })
}

/// Sum over steps of `gamma^year` times the weighted reward.
pub fn discounted_return(traj: &Trajectory, w: &ConstituencyWeights, gamma: f64) -> Result<f64, MdpError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MdpError::Discount(gamma));
    }
    Ok(traj.steps.iter().map(|s| gamma.powi(s.event.year as i32) * s.reward.weighted(w)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{LetBurnAll, SuppressAll};

    fn step_at(year: u32, air: f64) -> TrajectoryStep {
        TrajectoryStep {
            event: IgnitionEvent {
                fuel_high_pixels: 0,
                erc: 0.0,
                season_day: 0,
                days_to_weather_event: 0,
                year,
            },
            action: Action::LetBurn,
            reward: RewardVector { air, ..RewardVector::default() },
            outcome: FireOutcome::default(),
            summary: LandscapeSummary::default(),
        }
    }

    fn traj(steps: Vec<TrajectoryStep>) -> Trajectory {
        Trajectory { seed: 0, horizon_years: 3, initial: LandscapeSummary::default(), steps }
    }

    #[test]
    fn discounting_examples() {
        let w = ConstituencyWeights::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let one = traj(vec![step_at(0, 5.0)]);
        assert_eq!(discounted_return(&one, &w, 0.9).unwrap(), 5.0);
        let three = traj(vec![step_at(0, 1.0), step_at(1, 1.0), step_at(2, 1.0)]);
        assert!((discounted_return(&three, &w, 0.9).unwrap() - 2.71).abs() < 1e-12);
        assert_eq!(discounted_return(&traj(vec![]), &w, 0.9).unwrap(), 0.0);
        assert!(matches!(discounted_return(&one, &w, 0.0), Err(MdpError::Discount(_))));
        assert!(matches!(discounted_return(&one, &w, 1.5), Err(MdpError::Discount(_))));
    }

    #[test]
    fn discount_is_per_year_not_per_ignition() {
        let w = ConstituencyWeights::new(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        let single = traj(vec![step_at(0, 1.0), step_at(1, 1.0)]);
        let doubled = traj(vec![step_at(0, 1.0), step_at(1, 1.0), step_at(1, 1.0)]);
        let a = discounted_return(&single, &w, 0.5).unwrap();
        let b = discounted_return(&doubled, &w, 0.5).unwrap();
        assert!((b - a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rollout_is_reproducible() {
        let cfg = SimConfig { horizon_years: 20, ..SimConfig::default() };
        let p = crate::policy::sample_params(3);
        let a = rollout(&p, 11, &cfg).unwrap();
        let b = rollout(&p, 11, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, rollout(&p, 12, &cfg).unwrap());
    }

    #[test]
    fn zero_horizon_is_empty() {
        let cfg = SimConfig { horizon_years: 0, ..SimConfig::default() };
        assert!(rollout(&SuppressAll, 1, &cfg).unwrap().steps.is_empty());
    }

    #[test]
    fn trajectory_invariants() {
        let cfg = SimConfig::default();
        for policy in [&SuppressAll as &dyn Policy, &LetBurnAll, &crate::policy::sample_params(5)] {
            let t = rollout(policy, 4, &cfg).unwrap();
            assert!(t.steps.windows(2).all(|w| w[0].event.year <= w[1].event.year));
            for s in &t.steps {
                assert!(s.reward.has_valid_signs(), "{:?}", s.reward);
                assert!(s.outcome.burned_cells as usize <= cfg.n_cells());
                assert!((0.0..=1.0).contains(&s.summary.fraction_high_fuel));
                assert!((0.0..=1.0).contains(&s.summary.fraction_old_lowdensity));
                assert!(s.summary.total_fuel >= 0.0);
                if s.action == Action::LetBurn {
                    assert_eq!(s.reward.suppression, 0.0);
                }
            }
        }
    }

    #[test]
    fn suppression_reduces_smoke_on_paired_seeds() {
        let cfg = SimConfig::default();
        let (mut sup, mut burn) = (0u64, 0u64);
        for seed in 0..30 {
            sup += rollout(&SuppressAll, seed, &cfg).unwrap().total_smoky_days();
            burn += rollout(&LetBurnAll, seed, &cfg).unwrap().total_smoky_days();
        }
        assert!(sup <= burn, "suppress {sup} vs let-burn {burn}");
    }
}
