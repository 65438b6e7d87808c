use serde::{Deserialize, Serialize};

use super::MdpError;

/// Every constant of the desk-scale simulator.
///
/// Deserializes from a table where any missing key takes its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    /// Landscape pixels represented by one grid cell.
    pub pixels_per_cell: u64,
    pub horizon_years: u32,
    pub discount: f64,

    // ignitions
    pub ignitions_per_year: f64,
    pub weather_event_p: f64,
    pub erc_alpha: f64,
    pub erc_beta: f64,

    // initial landscape
    pub init_fuel_min: f64,
    pub init_fuel_max: f64,
    pub init_age_max: u32,
    pub init_density_min: f64,

    // vegetation
    pub fuel_growth: f64,
    pub density_growth: f64,
    pub high_fuel_threshold: f64,
    pub old_age_threshold: u32,
    pub low_density_threshold: f64,

    // fire behaviour
    pub spread_max: f64,
    pub erc_exponent: f64,
    pub fuel_half_saturation: f64,
    pub cells_per_day: u32,
    pub max_natural_days: u32,
    pub suppress_spread_factor: f64,
    pub suppress_duration_factor: f64,

    // suppression cost
    pub cost_fixed: f64,
    pub cost_per_cell: f64,
    pub cost_per_day: f64,

    // harvest
    pub harvest_fraction: f64,
    pub harvest_density_factor: f64,
    pub timber_price: f64,

    // penalties
    pub ecology_weight: f64,
    pub ecology_target: f64,
    pub air_per_smoky_day: f64,
    pub recreation_weight: f64,
    pub recreation_target: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_width: 100,
            grid_height: 100,
            pixels_per_cell: 100,
            horizon_years: 100,
            discount: 0.96,

            ignitions_per_year: 2.0,
            weather_event_p: 0.1,
            erc_alpha: 2.0,
            erc_beta: 1.2,

            init_fuel_min: 4.0,
            init_fuel_max: 30.0,
            init_age_max: 120,
            init_density_min: 0.2,

            fuel_growth: 1.0,
            density_growth: 0.01,
            high_fuel_threshold: 10.0,
            old_age_threshold: 60,
            low_density_threshold: 0.5,

            spread_max: 1.0,
            erc_exponent: 0.5,
            fuel_half_saturation: 5.0,
            cells_per_day: 2,
            max_natural_days: 40,
            suppress_spread_factor: 0.6,
            suppress_duration_factor: 0.5,

            cost_fixed: 20.0,
            cost_per_cell: 0.5,
            cost_per_day: 10.0,

            harvest_fraction: 0.02,
            harvest_density_factor: 0.3,
            timber_price: 0.05,

            ecology_weight: 400.0,
            ecology_target: 0.2,
            air_per_smoky_day: 10.0,
            recreation_weight: 400.0,
            recreation_target: 0.3,
        }
    }
}

impl SimConfig {
    pub fn n_cells(&self) -> usize {
        self.grid_width * self.grid_height
    }

    pub fn total_pixels(&self) -> u64 {
        self.n_cells() as u64 * self.pixels_per_cell
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        let bad = |msg: &str| Err(MdpError::Config(msg.to_string()));
        if self.grid_width == 0 || self.grid_height == 0 {
            return bad("grid dimensions must be positive");
        }
        if self.pixels_per_cell == 0 {
            return bad("pixels_per_cell must be positive");
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        if !(self.ignitions_per_year >= 0.0 && self.ignitions_per_year.is_finite()) {
            return bad("ignitions_per_year must be finite and nonnegative");
        }
        if !(self.weather_event_p > 0.0 && self.weather_event_p <= 1.0) {
            return bad("weather_event_p must lie in (0, 1]");
        }
        if !(self.erc_alpha > 0.0 && self.erc_beta > 0.0) {
            return bad("ERC beta shape parameters must be positive");
        }
        if !(self.init_fuel_min >= 0.0 && self.init_fuel_max >= self.init_fuel_min) {
            return bad("initial fuel range is empty or negative");
        }
        if !(0.0..=1.0).contains(&self.init_density_min) {
            return bad("init_density_min must lie in [0, 1]");
        }
        for (name, v) in [
            ("suppress_spread_factor", self.suppress_spread_factor),
            ("suppress_duration_factor", self.suppress_duration_factor),
            ("harvest_fraction", self.harvest_fraction),
            ("harvest_density_factor", self.harvest_density_factor),
            ("spread_max", self.spread_max),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MdpError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        for (name, v) in [
            ("fuel_growth", self.fuel_growth),
            ("density_growth", self.density_growth),
            ("fuel_half_saturation", self.fuel_half_saturation),
            ("cost_fixed", self.cost_fixed),
            ("cost_per_cell", self.cost_per_cell),
            ("cost_per_day", self.cost_per_day),
            ("timber_price", self.timber_price),
            ("ecology_weight", self.ecology_weight),
            ("air_per_smoky_day", self.air_per_smoky_day),
            ("recreation_weight", self.recreation_weight),
            ("erc_exponent", self.erc_exponent),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MdpError::Config(format!("{name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }
}
