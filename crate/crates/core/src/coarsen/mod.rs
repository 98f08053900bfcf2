//! Dynamic coarsening: a chain of graphs `G0, G1, ..., Gm` where each coarser
//! graph is obtained by contracting a priority-greedy maximal matching of the
//! one below it, kept up to date under online edits.
//!
//! Every level pair is maintained by a [`Matcher`], which reacts to edits of
//! its finer graph, restores the greedy fixpoint by change propagation, and
//! reports the resulting edits of its coarser graph. [`LevelChain`] feeds
//! those edits upward level by level.

mod chain;
mod matcher;
pub mod oracle;
mod priority;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use chain::{ChainDump, CoarseEdgeDump, CoarseVertexDump, LevelChain, LevelDump, LevelRef};
pub use matcher::{MatchFlag, MatchStats, Matcher, Members};
pub use priority::{edge_key, level_seed, mix64, priority, EdgeKey, EdgeOrder, Priority};

use crate::error::{Error, Result};
use crate::graph::{BaseGraph, VertexId};

/// Read access to the finer graph of a level pair.
pub trait FineGraph {
    fn has_vertex(&self, v: VertexId) -> bool;
    fn has_edge(&self, a: VertexId, b: VertexId) -> bool;
    fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_;
}

impl FineGraph for BaseGraph {
    fn has_vertex(&self, v: VertexId) -> bool {
        self.contains_vertex(v)
    }

    fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.edge_between(a, b).is_some()
    }

    fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.incident(v).map(|(w, _)| w)
    }
}

/// A structural change of one level's graph, as seen by the level above.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LevelEdit {
    AddVertex { id: VertexId },
    RemoveVertex { id: VertexId },
    AddEdge { u: VertexId, v: VertexId },
    RemoveEdge { u: VertexId, v: VertexId },
}

/// A coarse level's graph: distinct edges only. Multiplicities are tracked by
/// the matcher that produces the level.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LevelGraph {
    adjacency: BTreeMap<VertexId, BTreeSet<VertexId>>,
    edge_count: usize,
}

impl LevelGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Edges as canonical pairs, ascending.
    pub fn edges(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.adjacency
            .iter()
            .flat_map(|(a, n)| n.range(*a..).map(move |b| (*a, *b)))
    }

    pub fn degree(&self, v: VertexId) -> Option<usize> {
        self.adjacency.get(&v).map(|n| n.len())
    }

    pub fn apply(&mut self, edit: &LevelEdit) -> Result<()> {
        match *edit {
            LevelEdit::AddVertex { id } => {
                if self.adjacency.insert(id, BTreeSet::new()).is_some() {
                    return Err(Error::Structure(format!("coarse vertex {id} added twice")));
                }
            }
            LevelEdit::RemoveVertex { id } => match self.adjacency.get(&id) {
                None => return Err(Error::UnknownVertex(id)),
                Some(n) if !n.is_empty() => {
                    return Err(Error::Structure(format!("coarse vertex {id} removed with edges")))
                }
                Some(_) => {
                    self.adjacency.remove(&id);
                }
            },
            LevelEdit::AddEdge { u, v } => {
                if u == v {
                    return Err(Error::SelfLoop(u));
                }
                for w in [u, v] {
                    if !self.adjacency.contains_key(&w) {
                        return Err(Error::UnknownVertex(w));
                    }
                }
                if !self.adjacency.get_mut(&u).unwrap().insert(v) {
                    return Err(Error::DuplicateEdge(u, v));
                }
                self.adjacency.get_mut(&v).unwrap().insert(u);
                self.edge_count += 1;
            }
            LevelEdit::RemoveEdge { u, v } => {
                let present = self.adjacency.get_mut(&u).map(|n| n.remove(&v)).unwrap_or(false);
                if !present {
                    return Err(Error::Structure(format!("coarse edge {u}-{v} not present")));
                }
                self.adjacency.get_mut(&v).unwrap().remove(&u);
                self.edge_count -= 1;
            }
        }
        Ok(())
    }
}

impl FineGraph for LevelGraph {
    fn has_vertex(&self, v: VertexId) -> bool {
        self.adjacency.contains_key(&v)
    }

    fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        self.adjacency.get(&a).is_some_and(|n| n.contains(&b))
    }

    fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.adjacency.get(&v).into_iter().flat_map(|n| n.iter().copied())
    }
}
