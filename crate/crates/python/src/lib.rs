//! Python bindings: the layout engine, scenario generators and the matching
//! benchmark. Structured results cross the boundary as JSON text in the same
//! formats the command-line tool writes.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use dynlayout_core::dynamics::{Gravity, PhysicsParams, Repulsion};
use dynlayout_core::engine::{
    bench_matching as core_bench, compare_convergence as core_compare, scenario, BenchConfig, CompareConfig, Engine,
    EngineConfig,
};
use dynlayout_core::graph::{read_events, write_events, Edit, EdgeId, EditEvent, VertexId};
use dynlayout_core::integrate::Integrator;
use dynlayout_core::Error;

create_exception!(dynlayout, DynlayoutError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => DynlayoutError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| to_py(e.into()))
}

fn parse_events(text: &str) -> PyResult<Vec<EditEvent>> {
    read_events(text.as_bytes()).map_err(to_py)
}

fn events_text(events: &[EditEvent]) -> PyResult<String> {
    let mut out = Vec::new();
    write_events(&mut out, events).map_err(to_py)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[allow(clippy::too_many_arguments)]
fn engine_config(
    levels: usize,
    dim: usize,
    dt: f64,
    phi: f64,
    theta: f64,
    seed: u64,
    integrator: &str,
    spring: f64,
    repulsion: f64,
    softening: f64,
    damping: f64,
    frame_damping: f64,
    gravity: Option<f64>,
    init_box: Option<f64>,
) -> PyResult<EngineConfig> {
    let integrator = match integrator {
        "rk4" => Integrator::Rk4,
        "euler" => Integrator::Euler,
        other => return Err(PyValueError::new_err(format!("unknown integrator {other:?}, expected 'rk4' or 'euler'"))),
    };
    if !(1..=3).contains(&dim) {
        return Err(PyValueError::new_err("dim must be 1, 2 or 3"));
    }
    let mut direction = [0.0; 3];
    direction[dim - 1] = 1.0;
    let config = EngineConfig {
        levels,
        physics: PhysicsParams {
            k: spring,
            f0: repulsion,
            eps: softening,
            damping,
            damping_alpha: frame_damping,
            damping_beta: frame_damping,
            phi,
            gravity: gravity.map(|strength| Gravity { strength, direction }),
            dim,
        },
        repulsion: Repulsion::from_theta(theta),
        integrator,
        dt,
        seed,
        init_box,
    };
    config.validate().map_err(to_py)?;
    Ok(config)
}

/// Multilevel force-directed layout of a graph edited online.
///
/// Edits take effect immediately; the coarsening chain and the simulation
/// state are brought up to date before the next step.
#[pyclass(name = "Engine", module = "dynlayout")]
struct PyEngine {
    inner: Engine,
}

#[pymethods]
impl PyEngine {
    #[new]
    #[pyo3(signature = (
        levels = 3, dim = 3, dt = 0.01, phi = 0.1, theta = 0.7, seed = 0, integrator = "rk4",
        spring = 1.0, repulsion = 1.0, softening = 0.05, damping = 2.0, frame_damping = 2.0,
        gravity = None, init_box = None,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        levels: usize,
        dim: usize,
        dt: f64,
        phi: f64,
        theta: f64,
        seed: u64,
        integrator: &str,
        spring: f64,
        repulsion: f64,
        softening: f64,
        damping: f64,
        frame_damping: f64,
        gravity: Option<f64>,
        init_box: Option<f64>,
    ) -> PyResult<Self> {
        let config = engine_config(
            levels, dim, dt, phi, theta, seed, integrator, spring, repulsion, softening, damping, frame_damping,
            gravity, init_box,
        )?;
        Ok(PyEngine { inner: Engine::new(config).map_err(to_py)? })
    }

    fn add_vertex(&mut self, id: u64) -> PyResult<()> {
        self.inner.apply(&Edit::AddVertex { id: VertexId(id) }).map_err(to_py)
    }

    fn remove_vertex(&mut self, id: u64) -> PyResult<()> {
        self.inner.apply(&Edit::RemoveVertex { id: VertexId(id) }).map_err(to_py)
    }

    #[pyo3(signature = (id, u, v, directed = false))]
    fn add_edge(&mut self, id: u64, u: u64, v: u64, directed: bool) -> PyResult<()> {
        self.inner
            .apply(&Edit::AddEdge { id: EdgeId(id), u: VertexId(u), v: VertexId(v), directed })
            .map_err(to_py)
    }

    fn remove_edge(&mut self, id: u64) -> PyResult<()> {
        self.inner.apply(&Edit::RemoveEdge { id: EdgeId(id) }).map_err(to_py)
    }

    /// Applies every edit of a JSON Lines event stream in file order,
    /// ignoring event times. Returns the number of edits applied.
    fn apply_events(&mut self, jsonl: &str) -> PyResult<usize> {
        let events = parse_events(jsonl)?;
        for e in &events {
            self.inner.apply(&e.edit).map_err(to_py)?;
        }
        Ok(events.len())
    }

    /// Advances `n` integration steps.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, py: Python<'_>, n: u64) -> PyResult<()> {
        for _ in 0..n {
            self.inner.step().map_err(to_py)?;
            if n > 1 {
                py.check_signals()?;
            }
        }
        Ok(())
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.inner.steps()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    /// World positions of the base vertices, keyed by id.
    fn positions(&mut self) -> PyResult<BTreeMap<u64, Vec<f64>>> {
        Ok(self.inner.positions().map_err(to_py)?.into_iter().map(|(id, p)| (id.0, p)).collect())
    }

    /// Per-level `{"T", "V", "frame_T"}` from finest to coarsest.
    fn energies(&mut self) -> PyResult<Vec<BTreeMap<&'static str, f64>>> {
        Ok(self
            .inner
            .energies()
            .map_err(to_py)?
            .into_iter()
            .map(|e| BTreeMap::from([("T", e.kinetic), ("V", e.potential), ("frame_T", e.frame_kinetic)]))
            .collect())
    }

    /// Largest base-vertex speed relative to the mean base velocity.
    fn relative_speed(&mut self) -> PyResult<f64> {
        self.inner.relative_speed().map_err(to_py)
    }

    fn max_speed(&mut self) -> PyResult<f64> {
        self.inner.max_speed().map_err(to_py)
    }

    /// Exact single-level gradient check of the current base layout, as
    /// JSON.
    fn equilibrium(&mut self, tol: f64) -> PyResult<String> {
        json(&self.inner.equilibrium(tol).map_err(to_py)?)
    }

    /// The current frame in the frame-stream format.
    #[pyo3(signature = (diagnostics = false))]
    fn frame(&mut self, diagnostics: bool) -> PyResult<String> {
        let index = self.inner.steps();
        json(&self.inner.frame(index, diagnostics).map_err(to_py)?)
    }

    /// Partitions, matchings and coarse edges of every level pair, as JSON.
    fn chain_dump(&self) -> PyResult<String> {
        json(&self.inner.chain().dump())
    }

    /// Re-places every base vertex uniformly in a cube of side `side`, at
    /// rest.
    fn randomize(&mut self, side: f64) -> PyResult<()> {
        self.inner.randomize(side).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Engine(levels={}, vertices={}, steps={})",
            self.inner.config().levels,
            self.inner.vertex_count(),
            self.inner.steps()
        )
    }
}

/// Event stream of the `n x n x n` grid graph.
#[pyfunction]
fn cube_events(n: usize) -> PyResult<String> {
    events_text(&scenario::cube(n))
}

/// Event stream of an evolving random graph whose edge probability rises
/// linearly to `p_max` over `ramp` time units.
#[pyfunction]
#[pyo3(signature = (n, p_max = 0.01, ramp = 100.0, seed = 0))]
fn gnp_events(n: usize, p_max: f64, ramp: f64, seed: u64) -> PyResult<String> {
    events_text(&scenario::gnp(n, scenario::GnpSchedule { p_max, ramp }, seed))
}

/// Event stream of binary-search-tree insertions of `count` random keys at
/// accelerating times.
#[pyfunction]
#[pyo3(signature = (count, interval = 1.0, accel = 0.05, seed = 0))]
fn tree_events(count: usize, interval: f64, accel: f64, seed: u64) -> PyResult<String> {
    events_text(&scenario::tree(count, scenario::TreeSchedule { interval, accel }, seed))
}

/// Matching re-evaluations per update on degree-capped random graphs, as
/// JSON.
#[pyfunction]
#[pyo3(signature = (sizes = vec![1_000, 10_000], degrees = vec![2, 3, 4], updates = 20_000, seed = 0))]
fn bench_matching(py: Python<'_>, sizes: Vec<usize>, degrees: Vec<usize>, updates: usize, seed: u64) -> PyResult<String> {
    let config = BenchConfig { sizes, degrees, updates, seed };
    let report = py.detach(|| core_bench(&config)).map_err(to_py)?;
    json(&report)
}

/// Single-level against multilevel settling on the graph of an event
/// stream, as JSON.
#[pyfunction]
#[pyo3(signature = (
    events, levels = 3, dt = 0.01, theta = 0.7, seed = 0, frame_damping = 2.0, init_box = 10.0,
    max_steps = 50_000,
))]
#[allow(clippy::too_many_arguments)]
fn compare_convergence(
    py: Python<'_>,
    events: &str,
    levels: usize,
    dt: f64,
    theta: f64,
    seed: u64,
    frame_damping: f64,
    init_box: f64,
    max_steps: u64,
) -> PyResult<String> {
    let events = parse_events(events)?;
    let engine =
        engine_config(levels, 3, dt, 0.1, theta, seed, "rk4", 1.0, 1.0, 0.05, 2.0, frame_damping, None, None)?;
    let config = CompareConfig { engine, multi_levels: levels, init_box, max_steps, band: 0.05, reset: false };
    let report = py.detach(|| core_compare(&config, &events)).map_err(to_py)?;
    json(&report)
}

#[pymodule]
fn dynlayout(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEngine>()?;
    m.add_function(wrap_pyfunction!(cube_events, m)?)?;
    m.add_function(wrap_pyfunction!(gnp_events, m)?)?;
    m.add_function(wrap_pyfunction!(tree_events, m)?)?;
    m.add_function(wrap_pyfunction!(bench_matching, m)?)?;
    m.add_function(wrap_pyfunction!(compare_convergence, m)?)?;
    m.add("DynlayoutError", m.py().get_type::<DynlayoutError>())?;
    Ok(())
}
