//! Suppression policy classes.
//!
//! The optimized class is a fixed-structure binary decision tree of depth four.
//! The root test (fire-ending weather within eight days) has a hard-coded
//! threshold; the remaining fourteen thresholds are tunable:
//!
//! | layer | feature                          | thresholds   | bounds        |
//! |-------|----------------------------------|--------------|---------------|
//! | 0     | days to weather event `<= 8`     | fixed        |               |
//! | 1     | high-fuel pixel count            | `theta[0..2]`  | `[0, 1e6]`  |
//! | 2     | energy release component         | `theta[2..6]`  | `[0, 100]`  |
//! | 3     | distance to season boundary      | `theta[6..14]` | `[0, 90]`   |
//!
//! Thresholds inside a layer are assigned to nodes left to right. At every
//! comparison the right branch is taken only when the feature strictly exceeds
//! the threshold; a leaf suppresses when the boundary distance strictly
//! exceeds its threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded_rng;

pub const N_PARAMS: usize = 14;
pub const N_LEAVES: usize = 16;
pub const SEASON_LENGTH: u32 = 180;
pub const WEATHER_EVENT_DAYS: u32 = 8;

pub const FUEL_MAX: f64 = 1_000_000.0;
pub const ERC_MAX: f64 = 100.0;
pub const BOUNDARY_MAX: f64 = 90.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("expected {expected} policy parameters, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("parameter {index} = {value} outside [{lower}, {upper}]")]
    OutOfBounds { index: usize, value: f64, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Suppress,
    LetBurn,
}

impl Action {
    pub fn is_suppress(self) -> bool {
        matches!(self, Action::Suppress)
    }
}

/// Features observed at a decision point (one lightning ignition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgnitionEvent {
    pub fuel_high_pixels: u64,
    pub erc: f64,
    pub season_day: u32,
    pub days_to_weather_event: u32,
    pub year: u32,
}

impl IgnitionEvent {
    /// Days to the nearer end of the fire season.
    pub fn boundary_distance(&self) -> u32 {
        let day = self.season_day.min(SEASON_LENGTH - 1);
        day.min(SEASON_LENGTH - 1 - day)
    }
}

/// Lower and upper bound of tree parameter `index`.
pub fn param_bounds(index: usize) -> (f64, f64) {
    match index {
        0..=1 => (0.0, FUEL_MAX),
        2..=5 => (0.0, ERC_MAX),
        6..=13 => (0.0, BOUNDARY_MAX),
        _ => panic!("policy parameter index {index} out of range"),
    }
}

pub fn lower_bounds() -> Vec<f64> {
    (0..N_PARAMS).map(|i| param_bounds(i).0).collect()
}

pub fn upper_bounds() -> Vec<f64> {
    (0..N_PARAMS).map(|i| param_bounds(i).1).collect()
}

/// The fourteen thresholds of the decision-tree policy.
///
/// Serializes as a flat array of 14 numbers in threshold order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolicyParams {
    theta: [f64; N_PARAMS],
}

impl PolicyParams {
    pub fn new(theta: [f64; N_PARAMS]) -> Result<Self, PolicyError> {
        for (index, &value) in theta.iter().enumerate() {
            let (lower, upper) = param_bounds(index);
            // NaN fails both comparisons, so test containment positively.
            if !(value >= lower && value <= upper) {
                return Err(PolicyError::OutOfBounds { index, value, lower, upper });
            }
        }
        Ok(Self { theta })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self, PolicyError> {
        let arr: [f64; N_PARAMS] =
            theta.try_into().map_err(|_| PolicyError::Arity { expected: N_PARAMS, got: theta.len() })?;
        Self::new(arr)
    }

    pub fn lower() -> Self {
        Self { theta: lower_bounds().try_into().unwrap() }
    }

    pub fn upper() -> Self {
        Self { theta: upper_bounds().try_into().unwrap() }
    }

    pub fn theta(&self) -> &[f64; N_PARAMS] {
        &self.theta
    }

    pub fn fuel_threshold(&self, node: usize) -> f64 {
        self.theta[node]
    }

    pub fn erc_threshold(&self, node: usize) -> f64 {
        self.theta[2 + node]
    }

    pub fn boundary_threshold(&self, node: usize) -> f64 {
        self.theta[6 + node]
    }
}

impl TryFrom<Vec<f64>> for PolicyParams {
    type Error = PolicyError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_slice(&v)
    }
}

impl From<PolicyParams> for Vec<f64> {
    fn from(p: PolicyParams) -> Self {
        p.theta.to_vec()
    }
}

/// Index in `0..16` of the leaf reached by `event`, ordered left to right.
/// Odd leaves are the Suppress outcomes.
pub fn tree_leaf(params: &PolicyParams, event: &IgnitionEvent) -> usize {
    let weather_soon = event.days_to_weather_event <= WEATHER_EVENT_DAYS;
    let l0 = weather_soon as usize;

    let fuel = event.fuel_high_pixels as f64;
    let l1 = (fuel > params.fuel_threshold(l0)) as usize;
    let n1 = 2 * l0 + l1;

    let l2 = (event.erc > params.erc_threshold(n1)) as usize;
    let n2 = 2 * n1 + l2;

    let distance = event.boundary_distance() as f64;
    let suppress = (distance > params.boundary_threshold(n2)) as usize;
    2 * n2 + suppress
}

pub fn evaluate_tree_policy(params: &PolicyParams, event: &IgnitionEvent) -> Action {
    if tree_leaf(params, event) % 2 == 1 {
        Action::Suppress
    } else {
        Action::LetBurn
    }
}

/// The two-threshold class used to seed the trajectory database.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedPolicyParams {
    erc_threshold: f64,
    day_threshold: f64,
}

impl SeedPolicyParams {
    pub fn new(erc_threshold: f64, day_threshold: f64) -> Result<Self, PolicyError> {
        if !(0.0..=ERC_MAX).contains(&erc_threshold) {
            return Err(PolicyError::OutOfBounds {
                index: 0,
                value: erc_threshold,
                lower: 0.0,
                upper: ERC_MAX,
            });
        }
        let day_max = SEASON_LENGTH as f64;
        if !(day_threshold >= 0.0 && day_threshold < day_max) {
            return Err(PolicyError::OutOfBounds {
                index: 1,
                value: day_threshold,
                lower: 0.0,
                upper: day_max,
            });
        }
        Ok(Self { erc_threshold, day_threshold })
    }

    pub fn erc_threshold(&self) -> f64 {
        self.erc_threshold
    }

    pub fn day_threshold(&self) -> f64 {
        self.day_threshold
    }

    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        Self {
            erc_threshold: rng.random_range(0.0..=ERC_MAX),
            day_threshold: rng.random_range(0.0..SEASON_LENGTH as f64),
        }
    }
}

pub fn evaluate_seed_policy(params: &SeedPolicyParams, event: &IgnitionEvent) -> Action {
    if event.erc > params.erc_threshold && event.season_day as f64 > params.day_threshold {
        Action::Suppress
    } else {
        Action::LetBurn
    }
}

/// Draw every threshold independently and uniformly from its bounds.
pub fn sample_params(seed: u64) -> PolicyParams {
    let mut rng = seeded_rng(seed);
    sample_params_with(&mut rng)
}

pub fn sample_params_with<R: Rng>(rng: &mut R) -> PolicyParams {
    let mut theta = [0.0; N_PARAMS];
    for (i, t) in theta.iter_mut().enumerate() {
        let (lo, hi) = param_bounds(i);
        *t = rng.random_range(lo..=hi);
    }
    PolicyParams { theta }
}

/// Anything that maps an ignition to an action.
pub trait Policy: Sync {
    fn decide(&self, event: &IgnitionEvent) -> Action;
}

impl Policy for PolicyParams {
    fn decide(&self, event: &IgnitionEvent) -> Action {
        evaluate_tree_policy(self, event)
    }
}

impl Policy for SeedPolicyParams {
    fn decide(&self, event: &IgnitionEvent) -> Action {
        evaluate_seed_policy(self, event)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuppressAll;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LetBurnAll;

impl Policy for SuppressAll {
    fn decide(&self, _: &IgnitionEvent) -> Action {
        Action::Suppress
    }
}

impl Policy for LetBurnAll {
    fn decide(&self, _: &IgnitionEvent) -> Action {
        Action::LetBurn
    }
}

impl<F> Policy for F
where
    F: Fn(&IgnitionEvent) -> Action + Sync,
{
    fn decide(&self, event: &IgnitionEvent) -> Action {
        self(event)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn event(fuel: u64, erc: f64, day: u32, forecast: u32) -> IgnitionEvent {
        IgnitionEvent {
            fuel_high_pixels: fuel,
            erc,
            season_day: day,
            days_to_weather_event: forecast,
            year: 0,
        }
    }

    #[test]
    fn lower_bounds_suppress_mid_season() {
        let p = PolicyParams::lower();
        assert_eq!(evaluate_tree_policy(&p, &event(1, 1.0, 90, 30)), Action::Suppress);
    }

    #[test]
    fn upper_bounds_never_suppress() {
        let p = PolicyParams::upper();
        for day in 0..SEASON_LENGTH {
            for forecast in [0, 8, 9, 50] {
                let e = event(2_000_000, 100.0, day, forecast);
                assert_eq!(evaluate_tree_policy(&p, &e), Action::LetBurn);
            }
        }
    }

    #[test]
    fn season_start_ties_go_left() {
        let p = PolicyParams::lower();
        assert_eq!(evaluate_tree_policy(&p, &event(1, 1.0, 0, 30)), Action::LetBurn);
        assert_eq!(evaluate_tree_policy(&p, &event(1, 1.0, 179, 30)), Action::LetBurn);
    }

    #[test]
    fn weather_threshold_is_inclusive() {
        // Fuel thresholds differ per weather branch; pick values that expose the branch.
        let mut theta = [0.0; N_PARAMS];
        theta[0] = FUEL_MAX; // no-weather branch: fuel never exceeds
        theta[1] = 0.0;
        let p = PolicyParams::new(theta).unwrap();
        let soon = event(10, 50.0, 60, WEATHER_EVENT_DAYS);
        let late = event(10, 50.0, 60, WEATHER_EVENT_DAYS + 1);
        // soon: l0=1, fuel 10 > 0 -> l1=1, erc 50 > 0 -> leaf node 7.
        assert_eq!(tree_leaf(&p, &soon) / 2, 7);
        // late: l0=0, fuel 10 <= 1e6 -> l1=0, erc -> l2=1 -> node 1.
        assert_eq!(tree_leaf(&p, &late) / 2, 1);
    }

    #[test]
    fn thresholds_map_left_to_right() {
        // Make each leaf threshold unique and check the reached node's threshold is used.
        let mut theta = [0.0; N_PARAMS];
        theta[0] = 500.0;
        theta[1] = 500.0;
        for (k, t) in theta[2..6].iter_mut().enumerate() {
            *t = 40.0 + k as f64;
        }
        for (k, t) in theta[6..14].iter_mut().enumerate() {
            *t = 10.0 * k as f64;
        }
        let p = PolicyParams::new(theta).unwrap();
        // forecast 30 (left), fuel 1000 > 500 (right), erc 10 <= 41 (left) -> node 2.
        let e = event(1000, 10.0, 25, 30);
        assert_eq!(tree_leaf(&p, &e) / 2, 2);
        // boundary 25 > 20 -> suppress
        assert_eq!(evaluate_tree_policy(&p, &e), Action::Suppress);
        let e = event(1000, 10.0, 20, 30);
        assert_eq!(evaluate_tree_policy(&p, &e), Action::LetBurn);
    }

    #[test]
    fn seed_policy_examples() {
        let e = event(0, 50.0, 10, 3);
        let p = SeedPolicyParams::new(0.0, 0.0).unwrap();
        assert_eq!(evaluate_seed_policy(&p, &e), Action::Suppress);
        let p = SeedPolicyParams::new(100.0, 0.0).unwrap();
        assert_eq!(evaluate_seed_policy(&p, &e), Action::LetBurn);
        let p = SeedPolicyParams::new(50.0, 10.0).unwrap();
        assert_eq!(evaluate_seed_policy(&p, &event(0, 50.0, 11, 3)), Action::LetBurn);
    }

    #[test]
    fn parameter_domain_errors() {
        assert_eq!(PolicyParams::from_slice(&[0.0; 13]), Err(PolicyError::Arity { expected: 14, got: 13 }));
        let mut theta = [0.0; N_PARAMS];
        theta[3] = 100.5;
        assert!(matches!(PolicyParams::new(theta), Err(PolicyError::OutOfBounds { index: 3, .. })));
        theta[3] = f64::NAN;
        assert!(PolicyParams::new(theta).is_err());
        assert!(SeedPolicyParams::new(-1.0, 0.0).is_err());
        assert!(SeedPolicyParams::new(0.0, 180.0).is_err());
    }

    #[test]
    fn params_serialize_as_flat_array() {
        let p = PolicyParams::lower();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0,0.0]");
        let back: PolicyParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<PolicyParams>("[1.0, 2.0]").is_err());
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        assert_eq!(sample_params(7), sample_params(7));
        assert_ne!(sample_params(7), sample_params(8));
        let mut rng = seeded_rng(11);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let p = sample_params_with(&mut rng);
            assert!(PolicyParams::new(*p.theta()).is_ok());
            sum += p.theta()[2];
        }
        let mean = sum / 10_000.0;
        assert!((45.0..=55.0).contains(&mean), "mean {mean}");
    }

    fn arb_params() -> impl Strategy<Value = PolicyParams> {
        any::<u64>().prop_map(sample_params)
    }

    fn arb_event() -> impl Strategy<Value = IgnitionEvent> {
        (0u64..1_200_000, 0.0f64..=100.0, 0u32..SEASON_LENGTH, 0u32..60)
            .prop_map(|(f, e, d, w)| event(f, e, d, w))
    }

    proptest! {
        #[test]
        fn exactly_one_leaf(p in arb_params(), e in arb_event()) {
            let leaf = tree_leaf(&p, &e);
            prop_assert!(leaf < N_LEAVES);
            prop_assert_eq!(evaluate_tree_policy(&p, &e).is_suppress(), leaf % 2 == 1);
        }

        #[test]
        fn raising_reached_leaf_threshold_never_adds_suppression(
            p in arb_params(), e in arb_event(), bump in 0.0f64..90.0
        ) {
            let node = tree_leaf(&p, &e) / 2;
            let mut theta = *p.theta();
            theta[6 + node] = (theta[6 + node] + bump).min(BOUNDARY_MAX);
            let raised = PolicyParams::new(theta).unwrap();
            if evaluate_tree_policy(&p, &e) == Action::LetBurn {
                prop_assert_eq!(evaluate_tree_policy(&raised, &e), Action::LetBurn);
            }
        }

        #[test]
        fn boundary_distance_is_symmetric(e in arb_event()) {
            let mirrored = IgnitionEvent { season_day: SEASON_LENGTH - 1 - e.season_day, ..e };
            prop_assert_eq!(e.boundary_distance(), mirrored.boundary_distance());
        }
    }
}
