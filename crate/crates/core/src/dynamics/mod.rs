//! Multilevel layout dynamics.
//!
//! The coarsest level is a plain damped particle system. Every finer level
//! `l` stores per-vertex displacements `δ` relative to an affine projection of
//! its parent level, `x = δ + α y + β`, where `y` is the world position of the
//! vertex's coarse parent and the frame `(α, β)` is itself a dynamic variable
//! pulled around by the displacements.

mod forces;
mod system;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::coarsen::LevelChain;
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::nbody::RepulsionLaw;

pub use forces::{
    equilibrium_check, level_forces, level_potential, spring_forces, two_body_separation, EquilibriumReport,
};
pub use system::{Evaluation, LevelEnergy, MultilevelSystem};

/// Constant gravity pulling directed edges along `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gravity {
    pub strength: f64,
    pub direction: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams {
    /// Spring constant.
    pub k: f64,
    /// Repulsion constant, per unordered pair.
    pub f0: f64,
    /// Repulsion softening length.
    pub eps: f64,
    /// Vertex drag.
    pub damping: f64,
    pub damping_alpha: f64,
    pub damping_beta: f64,
    /// Time dilation of parent velocity and acceleration terms.
    pub phi: f64,
    pub gravity: Option<Gravity>,
    pub dim: usize,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            k: 1.0,
            f0: 1.0,
            eps: 0.05,
            damping: 2.0,
            damping_alpha: 2.0,
            damping_beta: 2.0,
            phi: 0.1,
            gravity: None,
            dim: 3,
        }
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        let all = [self.k, self.f0, self.eps, self.damping, self.damping_alpha, self.damping_beta, self.phi];
        if all.iter().any(|x| !x.is_finite()) {
            return bad("physics parameters must be finite");
        }
        if self.k <= 0.0 {
            return bad("K must be positive");
        }
        if self.f0 < 0.0 {
            return bad("f0 must be non-negative");
        }
        if self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        if self.damping < 0.0 || self.damping_alpha < 0.0 || self.damping_beta < 0.0 {
            return bad("dampings must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return bad("phi must lie in [0, 1]");
        }
        if self.dim != 2 && self.dim != 3 {
            return bad("dimension must be 2 or 3");
        }
        if let Some(g) = self.gravity {
            if !g.strength.is_finite() || g.direction.iter().any(|c| !c.is_finite()) {
                return bad("gravity must be finite");
            }
        }
        Ok(())
    }

    pub fn law(&self) -> RepulsionLaw {
        RepulsionLaw { f0: self.f0, eps: self.eps }
    }
}

/// How the all-pairs repulsion is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Repulsion {
    Exact,
    BarnesHut { theta: f64 },
}

impl Repulsion {
    /// `theta = 0` selects the exact sum.
    pub fn from_theta(theta: f64) -> Self {
        if theta == 0.0 {
            Repulsion::Exact
        } else {
            Repulsion::BarnesHut { theta }
        }
    }
}

/// Structure of one level, with vertices addressed by dense index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LevelTopology {
    /// Vertex ids, ascending; position in this list is the dense index.
    pub ids: Vec<VertexId>,
    pub index: HashMap<VertexId, usize>,
    /// Distinct undirected edges.
    pub edges: Vec<(usize, usize)>,
    /// `(tail, head)` of directed edges (level 0 only).
    pub directed: Vec<(usize, usize)>,
    /// Index of each vertex's parent in the next coarser level; empty at the
    /// coarsest level.
    pub parent: Vec<usize>,
}

impl LevelTopology {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// The structure of the whole chain, frozen for the duration of a step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Hierarchy {
    pub levels: Vec<LevelTopology>,
}

impl Hierarchy {
    pub fn from_chain(chain: &LevelChain) -> Result<Self> {
        let count = chain.levels();
        let mut levels: Vec<LevelTopology> = (0..count)
            .map(|l| {
                let view = chain.level(l);
                let ids = view.vertices();
                let index: HashMap<VertexId, usize> = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
                let edges = view.edges().iter().map(|(a, b)| (index[a], index[b])).collect();
                LevelTopology { ids, index, edges, directed: Vec::new(), parent: Vec::new() }
            })
            .collect();
        let directed = chain
            .base()
            .edges()
            .filter(|(_, r)| r.directed)
            .map(|(_, r)| (levels[0].index[&r.u], levels[0].index[&r.v]))
            .collect();
        levels[0].directed = directed;
        for l in 0..count - 1 {
            let parent = levels[l]
                .ids
                .iter()
                .map(|v| {
                    let p = chain
                        .parent(l, *v)
                        .ok_or_else(|| Error::Structure(format!("level {l} vertex {v} has no parent")))?;
                    levels[l + 1]
                        .index
                        .get(&p)
                        .copied()
                        .ok_or_else(|| Error::Structure(format!("parent {p} missing at level {}", l + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            levels[l].parent = parent;
        }
        Ok(Hierarchy { levels })
    }

    /// A single-level hierarchy over `n` vertices with the given edges.
    pub fn single(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let ids: Vec<VertexId> = (0..n as u64).map(VertexId).collect();
        let index = ids.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        Hierarchy { levels: vec![LevelTopology { ids, index, edges, directed: Vec::new(), parent: Vec::new() }] }
    }

    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn check(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Structure("hierarchy has no levels".into()));
        }
        for (l, t) in self.levels.iter().enumerate() {
            let n = t.len();
            if t.edges.iter().chain(&t.directed).any(|&(a, b)| a >= n || b >= n || a == b) {
                return Err(Error::Structure(format!("level {l}: edge index out of range")));
            }
            if l < self.coarsest() {
                let m = self.levels[l + 1].len();
                if t.parent.len() != n || t.parent.iter().any(|&p| p >= m) {
                    return Err(Error::Structure(format!("level {l}: parent map inconsistent")));
                }
            } else if !t.parent.is_empty() {
                return Err(Error::Structure("coarsest level has parents".into()));
            }
        }
        Ok(())
    }
}

/// Offsets of one level's variables in the flat state vector.
///
/// At the coarsest level `pos`/`vel` hold world positions and velocities and
/// there is no frame. At finer levels they hold `δ` and `δ̇`, followed by the
/// frame `α` (row-major), `α̇`, `β`, `β̇`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelSlots {
    pub n: usize,
    pub pos: usize,
    pub vel: usize,
    pub frame: Option<FrameSlots>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameSlots {
    pub alpha: usize,
    pub alpha_dot: usize,
    pub beta: usize,
    pub beta_dot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateLayout {
    pub dim: usize,
    pub levels: Vec<LevelSlots>,
    pub len: usize,
}

impl StateLayout {
    /// Coarsest level first in memory, then each finer level in order
    /// `0, 1, ..., L-1`.
    pub fn new(hierarchy: &Hierarchy, dim: usize) -> Self {
        let coarsest = hierarchy.coarsest();
        let mut levels = vec![LevelSlots { n: 0, pos: 0, vel: 0, frame: None }; hierarchy.levels.len()];
        let n = hierarchy.levels[coarsest].len();
        levels[coarsest] = LevelSlots { n, pos: 0, vel: n * dim, frame: None };
        let mut off = 2 * n * dim;
        for (l, slot) in levels.iter_mut().enumerate().take(coarsest) {
            let n = hierarchy.levels[l].len();
            let pos = off;
            let vel = pos + n * dim;
            let alpha = vel + n * dim;
            let alpha_dot = alpha + dim * dim;
            let beta = alpha_dot + dim * dim;
            let beta_dot = beta + dim;
            off = beta_dot + dim;
            *slot = LevelSlots { n, pos, vel, frame: Some(FrameSlots { alpha, alpha_dot, beta, beta_dot }) };
        }
        StateLayout { dim, levels, len: off }
    }

    /// Names a flat index for diagnostics, e.g. `level 1 delta[4].y`.
    pub fn describe(&self, index: usize, hierarchy: &Hierarchy) -> String {
        let dim = self.dim;
        let axis = ["x", "y", "z"];
        for (l, s) in self.levels.iter().enumerate() {
            let vertex = |base: usize, what: &str| {
                let k = index - base;
                let id = hierarchy.levels[l].ids.get(k / dim).map(|v| v.to_string()).unwrap_or_default();
                format!("level {l} {what}[{id}].{}", axis[k % dim])
            };
            let (pname, vname) = if s.frame.is_some() { ("delta", "delta_dot") } else { ("x", "x_dot") };
            if (s.pos..s.pos + s.n * dim).contains(&index) {
                return vertex(s.pos, pname);
            }
            if (s.vel..s.vel + s.n * dim).contains(&index) {
                return vertex(s.vel, vname);
            }
            if let Some(f) = s.frame {
                let entries = [
                    (f.alpha, dim * dim, "alpha"),
                    (f.alpha_dot, dim * dim, "alpha_dot"),
                    (f.beta, dim, "beta"),
                    (f.beta_dot, dim, "beta_dot"),
                ];
                for (start, len, name) in entries {
                    if (start..start + len).contains(&index) {
                        return format!("level {l} {name}[{}]", index - start);
                    }
                }
            }
        }
        format!("component {index}")
    }

    /// A state with `α = I` and everything else zero.
    pub fn identity_state(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.len];
        for slot in &self.levels {
            if let Some(f) = slot.frame {
                for k in 0..self.dim {
                    s[f.alpha + k * self.dim + k] = 1.0;
                }
            }
        }
        s
    }
}
