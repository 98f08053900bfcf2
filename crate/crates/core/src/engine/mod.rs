//! Orchestration: event ingestion, the step loop, frame emission, scenario
//! generators and the benchmark drivers.

mod bench;
mod compare;
mod frames;
pub mod scenario;
mod state;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bench::{bench_matching, summarize, BenchConfig, BenchReport, BenchRow, Summary};
pub use compare::{compare_convergence, steps_to_within, CompareConfig, CompareReport, ConvergenceRun};
pub use frames::{read_frames, Frame, FrameHeader, FrameVertex, FrameWriter, LevelDiagnostics, FRAME_FORMAT};
pub use state::{Engine, EngineConfig, PLACEMENT_JITTER};

use crate::coarsen::MatchStats;
use crate::dynamics::{EquilibriumReport, Repulsion};
use crate::error::{Error, Result};
use crate::graph::EditEvent;

/// Level-0 speed, relative to the level's mean velocity, below which the
/// layout counts as calm.
pub const SETTLE_SPEED: f64 = 1e-3;
/// Consecutive calm steps required to call a layout settled.
pub const SETTLE_STEPS: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub engine: EngineConfig,
    /// Untimed events are applied one per this many steps.
    pub steps_per_batch: u64,
    /// Step budget.
    pub max_steps: u64,
    pub frame_stride: u64,
    /// Adds per-level energies and max force to every frame.
    pub frame_diagnostics: bool,
    /// After the stream ends, keep going until the exact single-level
    /// gradient is at most this.
    pub check_equilibrium: Option<f64>,
    /// Once settled with Barnes-Hut but short of the equilibrium tolerance,
    /// finish with exact repulsion.
    pub polish_exact: bool,
    /// After the stream ends, stop as soon as the layout is settled.
    pub stop_when_settled: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: EngineConfig::default(),
            steps_per_batch: 1,
            max_steps: 100_000,
            frame_stride: 1,
            frame_diagnostics: false,
            check_equilibrium: None,
            polish_exact: true,
            stop_when_settled: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if self.steps_per_batch == 0 {
            return Err(Error::Config("steps per batch must be at least 1".into()));
        }
        if self.frame_stride == 0 {
            return Err(Error::Config("frame stride must be at least 1".into()));
        }
        if let Some(tol) = self.check_equilibrium {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::Config("equilibrium tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelReport {
    pub vertices: usize,
    pub edges: usize,
    #[serde(rename = "V")]
    pub potential: f64,
    #[serde(rename = "T")]
    pub kinetic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoarseningReport {
    /// Base edits applied.
    pub updates: usize,
    /// Match-equation evaluations per update at the base level.
    pub base_evaluations: Summary,
    /// Evaluations per update summed over all levels.
    pub total_evaluations: Summary,
    pub per_level: Vec<MatchStats>,
}

impl CoarseningReport {
    pub fn from_updates(updates: &[Vec<MatchStats>], levels: usize) -> Self {
        let base: Vec<f64> = updates.iter().map(|u| u.first().map_or(0, |s| s.evaluations) as f64).collect();
        let total: Vec<f64> = updates.iter().map(|u| u.iter().map(|s| s.evaluations).sum::<u64>() as f64).collect();
        let mut per_level = vec![MatchStats::default(); levels.saturating_sub(1)];
        for u in updates {
            for (acc, s) in per_level.iter_mut().zip(u) {
                acc.evaluations += s.evaluations;
                acc.queue_pushes += s.queue_pushes;
                acc.queue_pops += s.queue_pops;
                acc.stale_pops += s.stale_pops;
                acc.matches += s.matches;
                acc.unmatches += s.unmatches;
            }
        }
        CoarseningReport {
            updates: updates.len(),
            base_evaluations: summarize(&base),
            total_evaluations: summarize(&total),
            per_level,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub steps: u64,
    pub t: f64,
    pub vertices: usize,
    pub edges: usize,
    pub events_applied: usize,
    pub frames_written: u64,
    pub levels: Vec<LevelReport>,
    /// Largest level-0 world speed.
    pub max_speed: f64,
    /// Largest level-0 speed relative to the mean velocity.
    pub max_relative_speed: f64,
    /// Magnitude of the level-0 mean velocity.
    pub drift_speed: f64,
    pub settled: bool,
    /// Step at which the settledness window was first completed.
    pub settled_at_step: Option<u64>,
    pub equilibrium: Option<EquilibriumReport>,
    pub repulsion: Repulsion,
    pub coarsening: CoarseningReport,
}

/// Runs the event loop: due events are applied and propagated, then one step
/// is integrated and a frame emitted every `frame_stride` steps. After the
/// stream is exhausted the run continues until the stopping rule is met or
/// the step budget runs out.
pub fn run<W: Write>(config: &RunConfig, events: &[EditEvent], mut frames: Option<&mut FrameWriter<W>>) -> Result<RunReport> {
    let mut engine = Engine::new(config.engine.clone())?;
    run_engine(&mut engine, config, events, frames.as_deref_mut())
}

/// [`run`] on an existing engine.
pub fn run_engine<W: Write>(
    engine: &mut Engine,
    config: &RunConfig,
    events: &[EditEvent],
    mut frames: Option<&mut FrameWriter<W>>,
) -> Result<RunReport> {
    config.validate()?;
    let mut timed: Vec<&EditEvent> = events.iter().filter(|e| e.t.is_some()).collect();
    timed.sort_by(|a, b| a.t.unwrap().total_cmp(&b.t.unwrap()));
    let untimed: Vec<&EditEvent> = events.iter().filter(|e| e.t.is_none()).collect();
    let (mut ti, mut ui) = (0, 0);
    let mut applied = 0;
    let mut calm = 0u64;
    let mut settled_at = None;
    let mut settled = false;
    let mut equilibrium = None;
    let mut frame_index = 0u64;
    let slack = 1e-9 * engine.config().dt;

    while engine.steps() < config.max_steps {
        let now = engine.time();
        while ti < timed.len() && timed[ti].t.unwrap() <= now + slack {
            engine.apply(&timed[ti].edit)?;
            ti += 1;
            applied += 1;
            calm = 0;
        }
        if ui < untimed.len() && engine.steps() % config.steps_per_batch == 0 {
            engine.apply(&untimed[ui].edit)?;
            ui += 1;
            applied += 1;
            calm = 0;
        }
        let drained = ti == timed.len() && ui == untimed.len();
        if drained && engine.vertex_count() == 0 {
            settled = true;
            break;
        }
        if drained && calm >= SETTLE_STEPS {
            if settled_at.is_none() {
                settled_at = Some(engine.steps());
            }
            match config.check_equilibrium {
                Some(tol) => {
                    let report = engine.equilibrium(tol)?;
                    let pass = report.pass;
                    equilibrium = Some(report);
                    if pass {
                        settled = true;
                        break;
                    }
                    if config.polish_exact && engine.config().repulsion != Repulsion::Exact {
                        engine.set_repulsion(Repulsion::Exact);
                    }
                    calm = 0;
                }
                None if config.stop_when_settled => {
                    settled = true;
                    break;
                }
                None => {}
            }
        }
        engine.step()?;
        if engine.relative_speed()? < SETTLE_SPEED {
            calm += 1;
        } else {
            calm = 0;
        }
        if let Some(w) = frames.as_deref_mut() {
            if engine.steps() % config.frame_stride == 0 {
                w.write(&engine.frame(frame_index, config.frame_diagnostics)?)?;
                frame_index += 1;
            }
        }
    }

    if let Some(tol) = config.check_equilibrium {
        equilibrium = Some(engine.equilibrium(tol)?);
    }
    settled |= calm >= SETTLE_STEPS;
    let energies = engine.energies()?;
    let (drift, relative) = engine.drift()?;
    let levels = {
        let chain = engine.chain();
        (0..chain.levels())
            .map(|l| {
                let view = chain.level(l);
                LevelReport {
                    vertices: view.vertex_count(),
                    edges: view.edge_count(),
                    potential: energies[l].potential,
                    kinetic: energies[l].kinetic,
                }
            })
            .collect()
    };
    Ok(RunReport {
        steps: engine.steps(),
        t: engine.time(),
        vertices: engine.vertex_count(),
        edges: engine.chain().base().edge_count(),
        events_applied: applied,
        frames_written: frames.map_or(0, |w| w.written()),
        levels,
        max_speed: engine.max_speed()?,
        max_relative_speed: relative,
        drift_speed: drift.iter().map(|c| c * c).sum::<f64>().sqrt(),
        settled,
        settled_at_step: settled_at,
        equilibrium,
        repulsion: engine.config().repulsion,
        coarsening: CoarseningReport::from_updates(engine.update_stats(), engine.chain().levels()),
    })
}
