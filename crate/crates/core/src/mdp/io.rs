//! Line-delimited trajectory records, one JSON object per step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{FireOutcome, LandscapeSummary, MdpError, RewardVector, TrajectoryStep};
use crate::policy::{Action, IgnitionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLine {
    pub year: u32,
    pub fuel_high_pixels: u64,
    pub erc: f64,
    pub season_day: u32,
    pub days_to_weather_event: u32,
    pub action: Action,
    pub suppression: f64,
    pub timber: f64,
    pub ecology: f64,
    pub air: f64,
    pub recreation: f64,
    pub burned_cells: u32,
    pub smoky_days: u32,
    pub fraction_high_fuel: f64,
    pub fraction_old_lowdensity: f64,
    pub total_fuel: f64,
}

impl From<&TrajectoryStep> for StepLine {
    fn from(s: &TrajectoryStep) -> Self {
        Self {
            year: s.event.year,
            fuel_high_pixels: s.event.fuel_high_pixels,
            erc: s.event.erc,
            season_day: s.event.season_day,
            days_to_weather_event: s.event.days_to_weather_event,
            action: s.action,
            suppression: s.reward.suppression,
            timber: s.reward.timber,
            ecology: s.reward.ecology,
            air: s.reward.air,
            recreation: s.reward.recreation,
            burned_cells: s.outcome.burned_cells,
            smoky_days: s.outcome.smoky_days,
            fraction_high_fuel: s.summary.fraction_high_fuel,
            fraction_old_lowdensity: s.summary.fraction_old_lowdensity,
            total_fuel: s.summary.total_fuel,
        }
    }
}

impl From<StepLine> for TrajectoryStep {
    fn from(l: StepLine) -> Self {
        Self {
            event: IgnitionEvent {
                fuel_high_pixels: l.fuel_high_pixels,
                erc: l.erc,
                season_day: l.season_day,
                days_to_weather_event: l.days_to_weather_event,
                year: l.year,
            },
            action: l.action,
            reward: RewardVector {
                suppression: l.suppression,
                timber: l.timber,
                ecology: l.ecology,
                air: l.air,
                recreation: l.recreation,
            },
            // Suppression cost is the negated suppression component.
            outcome: FireOutcome {
                burned_cells: l.burned_cells,
                smoky_days: l.smoky_days,
                suppression_cost: -l.suppression,
            },
            summary: LandscapeSummary {
                fraction_high_fuel: l.fraction_high_fuel,
                fraction_old_lowdensity: l.fraction_old_lowdensity,
                total_fuel: l.total_fuel,
            },
        }
    }
}

pub fn write_trajectory_lines<W: Write>(mut out: W, steps: &[TrajectoryStep]) -> Result<(), MdpError> {
    for s in steps {
        serde_json::to_writer(&mut out, &StepLine::from(s)).map_err(|e| MdpError::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trajectory_lines<R: BufRead>(input: R) -> Result<Vec<TrajectoryStep>, MdpError> {
    let mut steps = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: StepLine = serde_json::from_str(&line)
            .map_err(|e| MdpError::Format { line: i + 1, message: e.to_string() })?;
        steps.push(parsed.into());
    }
    Ok(steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{rollout, SimConfig};

    #[test]
    fn lines_round_trip() {
        let cfg = SimConfig { horizon_years: 10, ..SimConfig::default() };
        let t = rollout(&crate::policy::sample_params(1), 2, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trajectory_lines(&mut buf, &t.steps).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), t.steps.len());
        let back = read_trajectory_lines(&buf[..]).unwrap();
        assert_eq!(back.len(), t.steps.len());
        for (a, b) in back.iter().zip(&t.steps) {
            assert_eq!(a.event, b.event);
            assert_eq!(a.reward, b.reward);
            assert_eq!(a.summary, b.summary);
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let err = read_trajectory_lines("{\"year\":1}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, MdpError::Format { line: 1, .. }));
    }
}
