use serde::{Deserialize, Serialize};

use super::state::{Engine, EngineConfig};
use super::{SETTLE_SPEED, SETTLE_STEPS};
use crate::error::{Error, Result};
use crate::graph::EditEvent;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Physics, integrator, repulsion, dt and seed; `levels` is ignored.
    pub engine: EngineConfig,
    /// Levels of the multilevel run.
    pub multi_levels: usize,
    /// Side of the random initialization cube.
    pub init_box: f64,
    pub max_steps: u64,
    /// Relative band around the final potential.
    pub band: f64,
    /// Also re-randomize the settled multilevel layout and let it settle
    /// again.
    pub reset: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            engine: EngineConfig::default(),
            multi_levels: 3,
            init_box: 10.0,
            max_steps: 50_000,
            band: 0.05,
            reset: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settling {
    /// Steps until the potential stays within the band of its final value.
    pub steps_to_band: u64,
    /// Step at which the settledness window completed, if it did.
    pub settled_at: Option<u64>,
    pub steps: u64,
    pub initial_potential: f64,
    pub final_potential: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRun {
    pub levels: usize,
    pub settle: Settling,
    pub reset: Option<Settling>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub single: ConvergenceRun,
    pub multi: ConvergenceRun,
    /// Multilevel reached the band in no more steps than single-level.
    pub multilevel_not_slower: bool,
}

/// Number of leading samples after which every sample lies within
/// `band * |final|` of the final sample.
pub fn steps_to_within(series: &[f64], band: f64) -> u64 {
    let Some(&last) = series.last() else { return 0 };
    let tol = band * last.abs();
    let outside = series.iter().rposition(|v| (v - last).abs() > tol);
    outside.map_or(0, |k| k as u64 + 1)
}

fn settle(engine: &mut Engine, max_steps: u64, band: f64) -> Result<Settling> {
    let initial = engine.base_energy()?.potential;
    let mut series = Vec::new();
    let mut calm = 0;
    let mut settled_at = None;
    let start = engine.steps();
    while engine.steps() - start < max_steps {
        engine.step()?;
        series.push(engine.base_energy()?.potential);
        if engine.relative_speed()? < SETTLE_SPEED {
            calm += 1;
        } else {
            calm = 0;
        }
        if calm >= SETTLE_STEPS {
            settled_at = Some(engine.steps() - start);
            break;
        }
    }
    Ok(Settling {
        steps_to_band: steps_to_within(&series, band),
        settled_at,
        steps: engine.steps() - start,
        initial_potential: initial,
        final_potential: series.last().copied().unwrap_or(initial),
    })
}

fn one(config: &CompareConfig, events: &[EditEvent], levels: usize, reset: bool) -> Result<ConvergenceRun> {
    let mut ec = config.engine.clone();
    ec.levels = levels;
    ec.init_box = Some(config.init_box);
    let mut engine = Engine::new(ec)?;
    for e in events {
        engine.apply(&e.edit)?;
    }
    let first = settle(&mut engine, config.max_steps, config.band)?;
    let again = if reset {
        engine.randomize(config.init_box)?;
        Some(settle(&mut engine, config.max_steps, config.band)?)
    } else {
        None
    };
    Ok(ConvergenceRun { levels, settle: first, reset: again })
}

/// Lays out the same static graph from the same random initialization with
/// one level and with `multi_levels` levels, and reports how many steps
/// each needs before its potential stays within the band of its final value.
pub fn compare_convergence(config: &CompareConfig, events: &[EditEvent]) -> Result<CompareReport> {
    if config.multi_levels < 2 {
        return Err(Error::Config("multilevel run needs at least 2 levels".into()));
    }
    let single = one(config, events, 1, false)?;
    let multi = one(config, events, config.multi_levels, config.reset)?;
    Ok(CompareReport {
        multilevel_not_slower: multi.settle.steps_to_band <= single.settle.steps_to_band,
        single,
        multi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_entry() {
        assert_eq!(steps_to_within(&[], 0.05), 0);
        assert_eq!(steps_to_within(&[5.0], 0.05), 0);
        assert_eq!(steps_to_within(&[10.0, 3.0, 1.04, 0.97, 1.0], 0.05), 2);
        assert_eq!(steps_to_within(&[1.0, 2.0, 1.0], 0.05), 2);
    }
}
