use rand::Rng;
use rand_distr::{Beta, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::{MdpError, RewardVector, SimConfig};
use crate::policy::{Action, IgnitionEvent, SEASON_LENGTH};
use crate::rng::{mix64, seeded_rng, unit_f64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub fuel: f64,
    pub age: u32,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FireOutcome {
    pub burned_cells: u32,
    pub smoky_days: u32,
    pub suppression_cost: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSummary {
    pub fraction_high_fuel: f64,
    pub fraction_old_lowdensity: f64,
    pub total_fuel: f64,
}

/// What `advance_year` produced between fire seasons.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct YearEnd {
    pub harvested_fuel: f64,
    pub harvested_cells: usize,
    pub timber: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeState {
    config: SimConfig,
    cells: Vec<Cell>,
    burned_this_season: Vec<bool>,
    year: u32,
    tally: Tally,
}

/// Running landscape totals, kept in sync with `cells`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    high_fuel: usize,
    old_lowdensity: usize,
    total_fuel: f64,
}

impl Tally {
    fn of(cells: &[Cell], c: &SimConfig) -> Self {
        let mut t = Tally::default();
        for cell in cells {
            t.add(cell, c);
        }
        t
    }

    #[inline]
    fn add(&mut self, cell: &Cell, c: &SimConfig) {
        self.high_fuel += is_high_fuel(cell, c) as usize;
        self.old_lowdensity += is_old_lowdensity(cell, c) as usize;
        self.total_fuel += cell.fuel;
    }

    #[inline]
    fn remove(&mut self, cell: &Cell, c: &SimConfig) {
        self.high_fuel -= is_high_fuel(cell, c) as usize;
        self.old_lowdensity -= is_old_lowdensity(cell, c) as usize;
        self.total_fuel -= cell.fuel;
    }
}

#[inline]
fn is_high_fuel(cell: &Cell, c: &SimConfig) -> bool {
    cell.fuel >= c.high_fuel_threshold
}

#[inline]
fn is_old_lowdensity(cell: &Cell, c: &SimConfig) -> bool {
    cell.age >= c.old_age_threshold && cell.density <= c.low_density_threshold
}

impl LandscapeState {
    /// A fuel-heavy starting landscape, deterministic per seed.
    pub fn init(seed: u64, config: &SimConfig) -> Result<Self, MdpError> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let n = config.n_cells();
        let cells = (0..n)
            .map(|_| {
                let age = if config.init_age_max == 0 { 0 } else { rng.random_range(0..config.init_age_max) };
                let fuel = rng.random_range(config.init_fuel_min..=config.init_fuel_max);
                let density = (config.init_density_min + age as f64 * config.density_growth).min(1.0);
                Cell { fuel, age, density }
            })
            .collect::<Vec<_>>();
        let tally = Tally::of(&cells, config);
        Ok(Self { config: config.clone(), cells, burned_this_season: vec![false; n], year: 0, tally })
    }

    pub fn from_cells(cells: Vec<Cell>, year: u32, config: &SimConfig) -> Result<Self, MdpError> {
        config.validate()?;
        if cells.len() != config.n_cells() {
            return Err(MdpError::Config(format!(
                "expected {} cells, got {}",
                config.n_cells(),
                cells.len()
            )));
        }
        let n = cells.len();
        let tally = Tally::of(&cells, config);
        Ok(Self { config: config.clone(), cells, burned_this_season: vec![false; n], year, tally })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn year(&self) -> u32 {
        self.year
    }

    pub fn high_fuel_cells(&self) -> usize {
        self.tally.high_fuel
    }

    pub fn high_fuel_pixels(&self) -> u64 {
        self.high_fuel_cells() as u64 * self.config.pixels_per_cell
    }

    pub fn summary(&self) -> LandscapeSummary {
        let n = self.cells.len() as f64;
        LandscapeSummary {
            fraction_high_fuel: self.tally.high_fuel as f64 / n,
            fraction_old_lowdensity: self.tally.old_lowdensity as f64 / n,
            // Running sums drift; clamp so an all-bare landscape reads exactly zero.
            total_fuel: self.tally.total_fuel.max(0.0),
        }
    }

    /// This year's lightning ignitions in season order.
    pub fn sample_ignitions(&self, rng_seed: u64) -> Vec<IgnitionEvent> {
        sample_ignitions_at(self.year, self.high_fuel_pixels(), &self.config, rng_seed)
    }

    /// Resolve one ignition under `action`.
    ///
    /// The returned reward carries the suppression, air, ecology and
    /// recreation components; timber is credited by [`advance_year`].
    ///
    /// [`advance_year`]: LandscapeState::advance_year
    pub fn step(
        &mut self,
        event: &IgnitionEvent,
        action: Action,
        rng_seed: u64,
    ) -> Result<(RewardVector, FireOutcome), MdpError> {
        if event.year != self.year {
            return Err(MdpError::Protocol { event_year: event.year, state_year: self.year });
        }
        let outcome = self.burn(event, action, rng_seed);
        let summary = self.summary();
        let c = &self.config;
        let reward = RewardVector {
            suppression: -outcome.suppression_cost,
            timber: 0.0,
            ecology: -c.ecology_weight * (summary.fraction_high_fuel - c.ecology_target).powi(2),
            air: -c.air_per_smoky_day * outcome.smoky_days as f64,
            recreation: -c.recreation_weight
                * (summary.fraction_old_lowdensity - c.recreation_target).powi(2),
        };
        Ok((reward, outcome))
    }

    fn burn(&mut self, event: &IgnitionEvent, action: Action, rng_seed: u64) -> FireOutcome {
        let c = &self.config;
        let (w, h) = (c.grid_width, c.grid_height);
        let suppress = action.is_suppress();

        // All draws happen before the action is consulted, so Suppress and
        // LetBurn share the ignition cell, natural duration and flammability field.
        let mut rng = seeded_rng(rng_seed);
        let ignition = rng.random_range(0..self.cells.len());
        let u_duration: f64 = rng.random();
        let field_seed: u64 = rng.random();

        let erc = (event.erc / 100.0).clamp(0.0, 1.0);
        let natural = 1 + (c.max_natural_days as f64 * erc * u_duration) as u32;
        let boundary_cap = event.boundary_distance().min(SEASON_LENGTH) + 1;
        let weather_cap = event.days_to_weather_event.saturating_add(1);
        let mut duration = natural.min(boundary_cap).min(weather_cap);
        let mut spread = c.spread_max * erc.powf(c.erc_exponent);
        if suppress {
            duration = ((duration as f64 * c.suppress_duration_factor) as u32).max(1);
            spread *= c.suppress_spread_factor;
        }

        let half = c.fuel_half_saturation;
        let flammable = |idx: usize, fuel: f64| -> bool {
            if fuel <= 0.0 {
                return false;
            }
            let p = spread * fuel / (fuel + half);
            unit_f64(mix64(field_seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))) < p
        };

        let mut burned = vec![ignition];
        self.burned_this_season[ignition] = true;
        let mut frontier = vec![ignition];
        let mut next = Vec::new();
        let steps = (duration - 1) * c.cells_per_day;
        for _ in 0..steps {
            if frontier.is_empty() {
                break;
            }
            for &idx in &frontier {
                let (x, y) = (idx % w, idx / w);
                let mut visit = |nb: usize| {
                    if !self.burned_this_season[nb] && flammable(nb, self.cells[nb].fuel) {
                        self.burned_this_season[nb] = true;
                        burned.push(nb);
                        next.push(nb);
                    }
                };
                if x > 0 {
                    visit(idx - 1);
                }
                if x + 1 < w {
                    visit(idx + 1);
                }
                if y > 0 {
                    visit(idx - w);
                }
                if y + 1 < h {
                    visit(idx + w);
                }
            }
            std::mem::swap(&mut frontier, &mut next);
            next.clear();
        }

        for &idx in &burned {
            self.tally.remove(&self.cells[idx], c);
            self.cells[idx] = Cell { fuel: 0.0, age: 0, density: 0.0 };
            self.tally.add(&self.cells[idx], c);
        }

        let burned_cells = burned.len() as u32;
        let suppression_cost = if suppress {
            c.cost_fixed + c.cost_per_cell * burned_cells as f64 + c.cost_per_day * duration as f64
        } else {
            0.0
        };
        FireOutcome { burned_cells, smoky_days: duration, suppression_cost }
    }

    /// Harvest, then grow, then move to the next year.
    ///
    /// The harvest takes all fuel from the oldest, densest `harvest_fraction`
    /// of cells that carry fuel and thins their density.
    pub fn advance_year(&mut self) -> YearEnd {
        let c = &self.config;
        let quota = (c.harvest_fraction * self.cells.len() as f64).round() as usize;
        let mut end = YearEnd::default();
        if quota > 0 {
            let mut order: Vec<usize> = (0..self.cells.len()).filter(|&i| self.cells[i].fuel > 0.0).collect();
            let key = |i: usize| self.cells[i].age as f64 * self.cells[i].density;
            let take = quota.min(order.len());
            if take > 0 && take < order.len() {
                order.select_nth_unstable_by(take - 1, |&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
            }
            for &i in &order[..take] {
                let cell = &mut self.cells[i];
                end.harvested_fuel += cell.fuel;
                cell.fuel = 0.0;
                cell.density *= c.harvest_density_factor;
            }
            end.harvested_cells = take;
        }
        end.timber = c.timber_price * end.harvested_fuel;

        let mut tally = Tally::default();
        for (cell, burned) in self.cells.iter_mut().zip(&mut self.burned_this_season) {
            if !*burned {
                cell.fuel += c.fuel_growth;
                cell.density = (cell.density + c.density_growth).min(1.0);
            }
            cell.age += 1;
            *burned = false;
            tally.add(cell, c);
        }
        self.tally = tally;
        self.year += 1;
        end
    }
}

/// Ignitions for one year, independent of the landscape except for the
/// reported high-fuel pixel count.
pub fn sample_ignitions_at(
    year: u32,
    fuel_high_pixels: u64,
    config: &SimConfig,
    rng_seed: u64,
) -> Vec<IgnitionEvent> {
    let mut rng = seeded_rng(rng_seed);
    let count = if config.ignitions_per_year > 0.0 {
        Poisson::new(config.ignitions_per_year).expect("validated rate").sample(&mut rng) as usize
    } else {
        0
    };
    let erc_dist = Beta::new(config.erc_alpha, config.erc_beta).expect("validated shape");
    let forecast = Geometric::new(config.weather_event_p).expect("validated probability");
    let mut events: Vec<IgnitionEvent> = (0..count)
        .map(|_| IgnitionEvent {
            fuel_high_pixels,
            erc: (100.0 * erc_dist.sample(&mut rng)).clamp(0.0, 100.0),
            season_day: rng.random_range(0..SEASON_LENGTH),
            days_to_weather_event: forecast.sample(&mut rng).min(u32::MAX as u64) as u32,
            year,
        })
        .collect();
    events.sort_by_key(|e| e.season_day);
    events
}
