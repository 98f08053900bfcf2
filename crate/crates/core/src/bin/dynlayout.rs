use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use dynlayout_core::dynamics::{Gravity, PhysicsParams, Repulsion};
use dynlayout_core::engine::{
    bench_matching, compare_convergence, run_engine, scenario, BenchConfig, CompareConfig, Engine, EngineConfig,
    FrameHeader, FrameWriter, RunConfig,
};
use dynlayout_core::graph::{read_events, write_events, EditEvent};
use dynlayout_core::integrate::Integrator;
use dynlayout_core::{Error, Result};

/// Isolated vertices would otherwise all be placed within the jitter radius
/// of the origin.
const GNP_BOX: f64 = 10.0;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scenario {
    Cube,
    Gnp,
    Tree,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Euler,
    Rk4,
}

/// Continuously running multilevel force-directed layout of a dynamic graph.
#[derive(Debug, Parser)]
#[command(name = "dynlayout", version)]
struct Cli {
    /// Graphs in the coarsening chain, base included.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    #[arg(long, value_enum, default_value_t = Method::Rk4)]
    integrator: Method,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Time dilation of coarse-level terms.
    #[arg(long, default_value_t = 0.1)]
    phi: f64,
    /// Barnes-Hut opening angle; 0 selects exact pairwise repulsion.
    #[arg(long, default_value_t = 0.7)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Event stream in JSON Lines; `-` reads stdin.
    #[arg(long, value_name = "FILE", conflicts_with = "scenario")]
    events: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    /// Cube side, vertex count (gnp) or key count (tree).
    #[arg(long, default_value_t = 10)]
    size: usize,
    /// Final edge probability of the gnp scenario.
    #[arg(long, default_value_t = 0.01)]
    p_max: f64,
    /// Time for the gnp edge probability to rise from 0 to 1.
    #[arg(long, default_value_t = 100.0)]
    ramp: f64,
    #[arg(long, default_value_t = 1.0)]
    tree_interval: f64,
    #[arg(long, default_value_t = 0.05)]
    tree_accel: f64,
    /// Frame stream output in JSON Lines.
    #[arg(long, value_name = "OUT")]
    frames: Option<PathBuf>,
    #[arg(long, value_name = "N", default_value_t = 1)]
    frame_stride: u64,
    /// Adds per-level energies and max force to each frame.
    #[arg(long)]
    frame_diagnostics: bool,
    /// Step budget.
    #[arg(long, value_name = "MAX", default_value_t = 100_000)]
    steps: u64,
    /// Steps between consecutive untimed events.
    #[arg(long, default_value_t = 1)]
    steps_per_batch: u64,
    /// Keep running after the stream ends until the exact gradient is at
    /// most TOL.
    #[arg(long, value_name = "TOL")]
    check_equilibrium: Option<f64>,
    /// Do not switch to exact repulsion when Barnes-Hut settles short of
    /// the equilibrium tolerance.
    #[arg(long)]
    no_polish: bool,
    /// Keep stepping after the layout settles, up to the budget.
    #[arg(long)]
    no_stop: bool,
    /// Place new vertices uniformly in a cube of this side. The gnp
    /// scenario uses 10 unless set, since its vertices start isolated.
    #[arg(long)]
    init_box: Option<f64>,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    dim: u8,
    #[arg(long, default_value_t = 1.0)]
    spring: f64,
    #[arg(long, default_value_t = 1.0)]
    repulsion: f64,
    #[arg(long, default_value_t = 0.05)]
    softening: f64,
    #[arg(long, default_value_t = 2.0)]
    damping: f64,
    #[arg(long, default_value_t = 2.0)]
    frame_damping: f64,
    /// Pull along the last axis on directed edges.
    #[arg(long)]
    gravity: Option<f64>,
    /// Run the matching cost benchmark instead of a layout.
    #[arg(long, conflicts_with = "compare_convergence")]
    bench_matching: bool,
    /// Comma-separated edge counts for the benchmark.
    #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000, 100_000])]
    bench_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 3, 4])]
    bench_degrees: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    bench_updates: usize,
    /// Compare single-level and multilevel settling on the input graph.
    #[arg(long)]
    compare_convergence: bool,
    /// Also re-randomize the settled multilevel layout and settle again.
    #[arg(long)]
    reset: bool,
    /// Report destination; stdout when absent.
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Write the coarsening chain as JSON after the run.
    #[arg(long, value_name = "FILE")]
    dump_chain: Option<PathBuf>,
    /// Write the input event stream (e.g. a generated scenario) and exit.
    #[arg(long, value_name = "FILE")]
    write_events: Option<PathBuf>,
}

impl Cli {
    fn engine_config(&self) -> EngineConfig {
        let dim = self.dim as usize;
        let mut direction = [0.0; 3];
        direction[dim - 1] = 1.0;
        EngineConfig {
            levels: self.levels,
            physics: PhysicsParams {
                k: self.spring,
                f0: self.repulsion,
                eps: self.softening,
                damping: self.damping,
                damping_alpha: self.frame_damping,
                damping_beta: self.frame_damping,
                phi: self.phi,
                gravity: self.gravity.map(|strength| Gravity { strength, direction }),
                dim,
            },
            repulsion: Repulsion::from_theta(self.theta),
            integrator: match self.integrator {
                Method::Euler => Integrator::Euler,
                Method::Rk4 => Integrator::Rk4,
            },
            dt: self.dt,
            seed: self.seed,
            init_box: self.init_box.or(match self.scenario {
                Some(Scenario::Gnp) => Some(GNP_BOX),
                _ => None,
            }),
        }
    }

    fn events(&self) -> Result<Vec<EditEvent>> {
        if let Some(path) = &self.events {
            return if path.as_os_str() == "-" {
                read_events(io::stdin().lock())
            } else {
                read_events(BufReader::new(File::open(path)?))
            };
        }
        Ok(match self.scenario {
            Some(Scenario::Cube) => scenario::cube(self.size),
            Some(Scenario::Gnp) => {
                scenario::gnp(self.size, scenario::GnpSchedule { p_max: self.p_max, ramp: self.ramp }, self.seed)
            }
            Some(Scenario::Tree) => scenario::tree(
                self.size,
                scenario::TreeSchedule { interval: self.tree_interval, accel: self.tree_accel },
                self.seed,
            ),
            None => Vec::new(),
        })
    }
}

fn emit<T: Serialize>(path: Option<&PathBuf>, value: &T) -> Result<()> {
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    if cli.bench_matching {
        let config = BenchConfig {
            sizes: cli.bench_sizes.clone(),
            degrees: cli.bench_degrees.clone(),
            updates: cli.bench_updates,
            seed: cli.seed,
        };
        return emit(cli.report.as_ref(), &bench_matching(&config)?);
    }

    let events = cli.events()?;
    if let Some(path) = &cli.write_events {
        let mut out = BufWriter::new(File::create(path)?);
        write_events(&mut out, &events)?;
        out.flush()?;
        return Ok(());
    }

    if cli.compare_convergence {
        let config = CompareConfig {
            engine: cli.engine_config(),
            multi_levels: cli.levels.max(2),
            init_box: cli.init_box.unwrap_or(10.0),
            max_steps: cli.steps,
            band: 0.05,
            reset: cli.reset,
        };
        return emit(cli.report.as_ref(), &compare_convergence(&config, &events)?);
    }

    let config = RunConfig {
        engine: cli.engine_config(),
        steps_per_batch: cli.steps_per_batch,
        max_steps: cli.steps,
        frame_stride: cli.frame_stride,
        frame_diagnostics: cli.frame_diagnostics,
        check_equilibrium: cli.check_equilibrium,
        polish_exact: !cli.no_polish,
        stop_when_settled: !cli.no_stop,
    };
    config.validate()?;
    let mut engine = Engine::new(config.engine.clone())?;
    let report = match &cli.frames {
        Some(path) => {
            let header = FrameHeader::new(config.engine.physics.dim, config.engine.levels, config.engine.dt);
            let mut writer = FrameWriter::new(BufWriter::new(File::create(path)?), &header)?;
            let report = run_engine(&mut engine, &config, &events, Some(&mut writer))?;
            writer.finish()?;
            report
        }
        None => run_engine::<io::Sink>(&mut engine, &config, &events, None)?,
    };
    if let Some(path) = &cli.dump_chain {
        emit(Some(path), &engine.chain().dump())?;
    }
    emit(cli.report.as_ref(), &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynlayout: {e}");
            ExitCode::from(exit_byte(&e))
        }
    }
}

fn exit_byte(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
