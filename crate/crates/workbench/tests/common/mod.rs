#![allow(dead_code)]

use firesmac_workbench::config::WorkbenchConfig;

/// A small landscape and database so tests run in seconds.
pub const SMALL_CONFIG: &str = r#"
[sim]
grid_width = 30
grid_height = 30
horizon_years = 20

[surrogate]
n_policies = 40

[smac]
budget = 20

[smac.proposal]
random_pool = 500
"#;

pub fn small_config() -> WorkbenchConfig {
    WorkbenchConfig::from_toml(SMALL_CONFIG).unwrap()
}
