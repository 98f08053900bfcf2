//! Force-directed layout of graphs under online edits.
//!
//! The engine keeps a chain of progressively coarser graphs up to date with a
//! fully dynamic randomized matching ([`coarsen`]), and simulates every level
//! of the chain at once as a single damped dynamical system ([`dynamics`]),
//! with coarse levels acting as evolving affine reference frames for the
//! finer ones. Repulsion is evaluated with a Barnes-Hut tree ([`nbody`]) and
//! the whole state is advanced by explicit Euler or RK4 steps
//! ([`integrate`]). [`engine`] ties it together: event ingestion, frame
//! emission, scenario generators and benchmarks.

pub mod coarsen;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod graph;
pub mod integrate;
pub mod nbody;

pub use error::{Error, Result};
pub use graph::{BaseGraph, Edit, EditEvent, EdgeId, VertexId};
