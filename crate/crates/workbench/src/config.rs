//! The single configuration file shared by every subcommand.

use std::path::Path;

use firesmac_core::mdp::SimConfig;
use firesmac_core::smac::{ForestConfig, ProposalConfig, SmacConfig};
use firesmac_core::surrogate::{
    EstimateConfig, DEFAULT_SEED_POLICIES, DEFAULT_SURROGATE_TRAJECTORIES, DEFAULT_TRAJECTORIES_PER_POLICY,
};
use serde::{Deserialize, Serialize};

use crate::WorkbenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub sim: SimConfig,
    pub surrogate: SurrogateSettings,
    pub smac: SmacSettings,
    pub validation: ValidationSettings,
}

impl WorkbenchConfig {
    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorkbenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, WorkbenchError> {
        let cfg: Self = toml::from_str(text).map_err(|e| WorkbenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), WorkbenchError> {
        self.sim.validate()?;
        if self.surrogate.n_policies == 0 || self.surrogate.trajectories_per_policy == 0 {
            return Err(WorkbenchError::Config("surrogate database must not be empty".into()));
        }
        if self.surrogate.n_trajectories == 0 {
            return Err(WorkbenchError::Config("surrogate.n_trajectories must be positive".into()));
        }
        if self.validation.n_rollouts == 0 {
            return Err(WorkbenchError::Config("validation.n_rollouts must be positive".into()));
        }
        let min = self.smac.config().min_budget();
        if self.smac.budget < min {
            return Err(WorkbenchError::Config(format!("smac.budget must be at least {min}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    pub n_policies: usize,
    pub trajectories_per_policy: usize,
    /// Seed for sampling seed policies and their rollouts.
    pub build_seed: u64,
    /// Stitched trajectories per value query.
    pub n_trajectories: usize,
    /// Base seed of the ignition streams used during stitching.
    pub query_seed: u64,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        let est = EstimateConfig::default();
        Self {
            n_policies: DEFAULT_SEED_POLICIES,
            trajectories_per_policy: DEFAULT_TRAJECTORIES_PER_POLICY,
            build_seed: 42,
            n_trajectories: DEFAULT_SURROGATE_TRAJECTORIES,
            query_seed: est.base_seed,
        }
    }
}

impl SurrogateSettings {
    pub fn estimate(&self) -> EstimateConfig {
        EstimateConfig { n_trajectories: self.n_trajectories, base_seed: self.query_seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmacSettings {
    /// Default evaluation budget when a request does not give one.
    pub budget: usize,
    /// Default optimizer seed when a request does not give one.
    pub seed: u64,
    pub n_initial: usize,
    pub forest: ForestConfig,
    pub proposal: ProposalConfig,
}

impl Default for SmacSettings {
    fn default() -> Self {
        let c = SmacConfig::default();
        Self { budget: 200, seed: 7, n_initial: c.n_initial, forest: c.forest, proposal: c.proposal }
    }
}

impl SmacSettings {
    pub fn config(&self) -> SmacConfig {
        SmacConfig { n_initial: self.n_initial, forest: self.forest, proposal: self.proposal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    pub n_rollouts: usize,
    /// Base seed of the validation rollouts; independent of the surrogate's
    /// query seeds.
    pub seed: u64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self { n_rollouts: 50, seed: 1 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(WorkbenchConfig::from_toml("").unwrap(), WorkbenchConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = WorkbenchConfig::default();
        assert_eq!(WorkbenchConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_override() {
        let cfg = WorkbenchConfig::from_toml(
            "[sim]\ngrid_width = 40\n[smac]\nbudget = 30\n[smac.forest]\nn_trees = 5\n",
        )
        .unwrap();
        assert_eq!(cfg.sim.grid_width, 40);
        assert_eq!(cfg.sim.grid_height, SimConfig::default().grid_height);
        assert_eq!(cfg.smac.budget, 30);
        assert_eq!(cfg.smac.forest.n_trees, 5);
        assert_eq!(cfg.smac.forest.min_split, 10);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(WorkbenchConfig::from_toml("[sim]\ngrid_widht = 3\n").is_err());
        assert!(WorkbenchConfig::from_toml("[smac]\nbudget = 5\n").is_err());
        assert!(WorkbenchConfig::from_toml("[validation]\nn_rollouts = 0\n").is_err());
        assert!(WorkbenchConfig::from_toml("[sim]\ngrid_width = 0\n").is_err());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let text = include_str!("../../../configs/default.toml");
        assert_eq!(WorkbenchConfig::from_toml(text).unwrap(), WorkbenchConfig::default());
    }
}
