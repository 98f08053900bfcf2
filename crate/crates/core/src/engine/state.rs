use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frames::{Frame, FrameVertex, LevelDiagnostics};
use crate::coarsen::{mix64, LevelChain, MatchStats};
use crate::dynamics::{
    equilibrium_check, level_potential, EquilibriumReport, Hierarchy, LevelEnergy, MultilevelSystem, PhysicsParams, Repulsion,
    StateLayout,
};
use crate::error::{Error, Result};
use crate::graph::{Edit, VertexId};
use crate::integrate::{Integrator, Stepper};

/// Radius of the random offset given to newly placed vertices.
pub const PLACEMENT_JITTER: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Graphs in the chain, base included.
    pub levels: usize,
    pub physics: PhysicsParams,
    pub repulsion: Repulsion,
    pub integrator: Integrator,
    pub dt: f64,
    pub seed: u64,
    /// Place new base vertices uniformly in a cube of this side centred on
    /// the origin instead of next to their neighbors.
    pub init_box: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            levels: 3,
            physics: PhysicsParams::default(),
            repulsion: Repulsion::BarnesHut { theta: 0.7 },
            integrator: Integrator::Rk4,
            dt: 0.01,
            seed: 0,
            init_box: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        if self.levels == 0 {
            return Err(Error::Config("levels must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if let Repulsion::BarnesHut { theta } = self.repulsion {
            if !(theta.is_finite() && theta >= 0.0) {
                return Err(Error::Config("theta must be non-negative".into()));
            }
        }
        if let Some(b) = self.init_box {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Config("init box must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
struct FrameValues {
    alpha: Vec<f64>,
    alpha_dot: Vec<f64>,
    beta: Vec<f64>,
    beta_dot: Vec<f64>,
}

/// World positions/velocities by id, per level, plus the frames.
#[derive(Clone, Debug, Default)]
struct Snapshot {
    levels: Vec<HashMap<VertexId, (Vec<f64>, Vec<f64>)>>,
    frames: Vec<Option<FrameValues>>,
}

/// Graph chain plus simulation state, advanced one step at a time.
#[derive(Clone, Debug)]
pub struct Engine {
    config: EngineConfig,
    chain: LevelChain,
    hierarchy: Hierarchy,
    state: Vec<f64>,
    steps: u64,
    stepper: Stepper,
    rng: ChaCha8Rng,
    /// World state captured before the first edit since the last sync.
    pending: Option<Snapshot>,
    updates: Vec<Vec<MatchStats>>,
}

fn mean(rows: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim];
    for r in rows {
        for c in 0..dim {
            m[c] += r[c] / rows.len() as f64;
        }
    }
    m
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let chain = LevelChain::new(config.levels, config.seed)?;
        let hierarchy = Hierarchy::from_chain(&chain)?;
        let state = StateLayout::new(&hierarchy, config.physics.dim).identity_state();
        let rng = ChaCha8Rng::seed_from_u64(mix64(config.seed ^ 0x5eed_0f_1a7));
        Ok(Engine {
            config,
            chain,
            hierarchy,
            state,
            steps: 0,
            stepper: Stepper::new(),
            rng,
            pending: None,
            updates: Vec::new(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn chain(&self) -> &LevelChain {
        &self.chain
    }

    pub fn dim(&self) -> usize {
        self.config.physics.dim
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Simulation time, `steps * dt`.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.config.dt
    }

    pub fn set_repulsion(&mut self, repulsion: Repulsion) {
        self.config.repulsion = repulsion;
    }

    pub fn set_dt(&mut self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        self.config.dt = dt;
        Ok(())
    }

    /// Per-level coarsening instrumentation of every base edit applied.
    pub fn update_stats(&self) -> &[Vec<MatchStats>] {
        &self.updates
    }

    /// Applies one base edit and propagates coarsening through the chain.
    /// The simulation state is re-flattened lazily before the next step.
    pub fn apply(&mut self, edit: &Edit) -> Result<()> {
        if self.pending.is_none() {
            self.pending = Some(self.snapshot());
        }
        self.chain.apply(edit)?;
        self.updates.push(self.chain.last_update().to_vec());
        Ok(())
    }

    /// The hierarchy and state, re-flattened if edits are pending.
    pub fn sync(&mut self) -> Result<()> {
        if let Some(snap) = self.pending.take() {
            self.remap(snap)?;
        }
        Ok(())
    }

    pub fn hierarchy(&mut self) -> Result<&Hierarchy> {
        self.sync()?;
        Ok(&self.hierarchy)
    }

    pub fn state(&mut self) -> Result<&[f64]> {
        self.sync()?;
        Ok(&self.state)
    }

    /// Replaces the flat state; its length must match the current layout.
    pub fn set_state(&mut self, state: Vec<f64>) -> Result<()> {
        self.sync()?;
        if state.len() != self.state.len() {
            return Err(Error::Structure(format!("state has {} entries, layout needs {}", state.len(), self.state.len())));
        }
        self.state = state;
        Ok(())
    }

    pub fn system(&self) -> MultilevelSystem<'_> {
        MultilevelSystem::new(self.config.physics, &self.hierarchy, self.config.repulsion)
    }

    pub fn step(&mut self) -> Result<()> {
        self.sync()?;
        let sys = MultilevelSystem::new(self.config.physics, &self.hierarchy, self.config.repulsion);
        self.stepper.step(self.config.integrator, &sys, &mut self.state, self.config.dt)?;
        self.steps += 1;
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.chain.base().vertex_count()
    }

    /// Level-0 world positions, ascending by id.
    pub fn positions(&mut self) -> Result<Vec<(VertexId, Vec<f64>)>> {
        self.sync()?;
        let dim = self.dim();
        let pos = self.system().world_positions(&self.state);
        Ok(self.hierarchy.levels[0].ids.iter().zip(pos[0].chunks(dim)).map(|(v, p)| (*v, p.to_vec())).collect())
    }

    pub fn energies(&mut self) -> Result<Vec<LevelEnergy>> {
        self.sync()?;
        Ok(self.system().energies(&self.state))
    }

    /// Kinetic and potential energy of level 0 only.
    pub fn base_energy(&mut self) -> Result<LevelEnergy> {
        self.sync()?;
        let sys = self.system();
        let (pos, vel) = sys.world_kinematics(&self.state);
        let potential = level_potential(&pos[0], &self.hierarchy.levels[0], &self.config.physics, self.config.repulsion, true);
        let kinetic = 0.5 * vel[0].iter().map(|v| v * v).sum::<f64>();
        Ok(LevelEnergy { kinetic, potential, frame_kinetic: 0.0 })
    }

    pub fn max_speed(&mut self) -> Result<f64> {
        self.sync()?;
        Ok(self.system().max_speed(&self.state))
    }

    /// Mean level-0 world velocity and the largest speed relative to it.
    pub fn drift(&mut self) -> Result<(Vec<f64>, f64)> {
        self.sync()?;
        Ok(self.system().drift(&self.state))
    }

    /// Largest level-0 speed in the frame moving with the level's mean
    /// velocity; this is what settledness is judged on.
    pub fn relative_speed(&mut self) -> Result<f64> {
        Ok(self.drift()?.1)
    }

    pub fn equilibrium(&mut self, tol: f64) -> Result<EquilibriumReport> {
        self.sync()?;
        let pos = self.system().world_positions(&self.state);
        Ok(equilibrium_check(&pos[0], &self.hierarchy.levels[0], &self.config.physics, tol))
    }

    /// The current level-0 layout as a frame.
    pub fn frame(&mut self, index: u64, diagnostics: bool) -> Result<Frame> {
        self.sync()?;
        let dim = self.dim();
        let sys = self.system();
        let energies = sys.energies(&self.state);
        let (pos, _) = sys.world_kinematics(&self.state);
        let vertices = self.hierarchy.levels[0]
            .ids
            .iter()
            .zip(pos[0].chunks(dim))
            .map(|(v, p)| FrameVertex { id: *v, position: p.to_vec() })
            .collect();
        let levels = if diagnostics {
            let e = sys.evaluate(&self.state);
            Some(
                energies
                    .iter()
                    .enumerate()
                    .map(|(l, en)| LevelDiagnostics {
                        vertices: self.hierarchy.levels[l].len(),
                        potential: en.potential,
                        kinetic: en.kinetic,
                        max_force: e.forces[l]
                            .chunks(dim)
                            .map(|f| f.iter().map(|c| c * c).sum::<f64>().sqrt())
                            .fold(0.0, f64::max),
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(Frame {
            frame: index,
            t: self.time(),
            vertices,
            potential: energies[0].potential,
            kinetic: energies[0].kinetic,
            levels,
        })
    }

    /// Places every base vertex uniformly at random in a cube of side `side`
    /// with zero velocity; coarse vertices move to their members' centroids.
    pub fn randomize(&mut self, side: f64) -> Result<()> {
        self.sync()?;
        let dim = self.dim();
        let mut snap = Snapshot { levels: vec![HashMap::new(); self.hierarchy.levels.len()], frames: Vec::new() };
        for v in &self.hierarchy.levels[0].ids {
            let p: Vec<f64> = (0..dim).map(|_| (self.rng.random::<f64>() - 0.5) * side).collect();
            snap.levels[0].insert(*v, (p, vec![0.0; dim]));
        }
        snap.frames = self.snapshot().frames;
        self.remap(snap)
    }

    fn snapshot(&self) -> Snapshot {
        let dim = self.dim();
        let sys = self.system();
        let (pos, vel) = sys.world_kinematics(&self.state);
        let levels = self
            .hierarchy
            .levels
            .iter()
            .enumerate()
            .map(|(l, t)| {
                t.ids
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let r = i * dim..(i + 1) * dim;
                        (*v, (pos[l][r.clone()].to_vec(), vel[l][r].to_vec()))
                    })
                    .collect()
            })
            .collect();
        let frames = sys
            .layout
            .levels
            .iter()
            .map(|s| {
                s.frame.map(|f| FrameValues {
                    alpha: self.state[f.alpha..f.alpha + dim * dim].to_vec(),
                    alpha_dot: self.state[f.alpha_dot..f.alpha_dot + dim * dim].to_vec(),
                    beta: self.state[f.beta..f.beta + dim].to_vec(),
                    beta_dot: self.state[f.beta_dot..f.beta_dot + dim].to_vec(),
                })
            })
            .collect();
        Snapshot { levels, frames }
    }

    fn jitter(&mut self) -> Vec<f64> {
        let dim = self.dim();
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.rng.random::<f64>() * 2.0 - 1.0).collect();
            if v.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                return v.into_iter().map(|c| c * PLACEMENT_JITTER).collect();
            }
        }
    }

    /// Anchor for a new base vertex: the surviving base members of its
    /// nearest coarse ancestor, else its already placed neighbors.
    fn anchor(&self, v: VertexId, placed: &HashMap<VertexId, Vec<f64>>, old: &HashMap<VertexId, (Vec<f64>, Vec<f64>)>) -> Option<Vec<f64>> {
        let dim = self.dim();
        let mut c = v;
        for l in 0..self.chain.levels() - 1 {
            c = self.chain.parent(l, c)?;
            let members = self.chain.base_members(l + 1, c);
            let rows: Vec<&[f64]> = members.iter().filter_map(|m| old.get(m).map(|(p, _)| p.as_slice())).collect();
            if !rows.is_empty() {
                return Some(mean(&rows, dim));
            }
        }
        let rows: Vec<&[f64]> =
            self.chain.base().incident(v).filter_map(|(w, _)| placed.get(&w).map(|p| p.as_slice())).collect();
        (!rows.is_empty()).then(|| mean(&rows, dim))
    }

    /// Rebuilds the hierarchy from the chain and re-flattens the state so
    /// that surviving vertices keep their world positions and velocities.
    fn remap(&mut self, snap: Snapshot) -> Result<()> {
        let dim = self.dim();
        let hierarchy = Hierarchy::from_chain(&self.chain)?;
        let top = hierarchy.coarsest();
        let mut pos: Vec<Vec<f64>> = Vec::with_capacity(top + 1);
        let mut vel: Vec<Vec<f64>> = Vec::with_capacity(top + 1);

        let base = &hierarchy.levels[0];
        let mut placed: HashMap<VertexId, Vec<f64>> = HashMap::new();
        let (mut p0, mut v0) = (vec![0.0; base.len() * dim], vec![0.0; base.len() * dim]);
        for (i, id) in base.ids.iter().enumerate() {
            let r = i * dim..(i + 1) * dim;
            if let Some((p, v)) = snap.levels[0].get(id) {
                p0[r.clone()].copy_from_slice(p);
                v0[r].copy_from_slice(v);
                placed.insert(*id, p.clone());
                continue;
            }
            let p = match self.config.init_box {
                Some(side) => (0..dim).map(|_| (self.rng.random::<f64>() - 0.5) * side).collect(),
                None => {
                    let a = self.anchor(*id, &placed, &snap.levels[0]).unwrap_or_else(|| vec![0.0; dim]);
                    let j = self.jitter();
                    a.iter().zip(j).map(|(a, j)| a + j).collect::<Vec<f64>>()
                }
            };
            p0[r].copy_from_slice(&p);
            placed.insert(*id, p);
        }
        pos.push(p0);
        vel.push(v0);

        for l in 1..=top {
            let t = &hierarchy.levels[l];
            let fine = &hierarchy.levels[l - 1];
            let matcher = self.chain.matcher(l - 1);
            let (mut pl, mut vl) = (vec![0.0; t.len() * dim], vec![0.0; t.len() * dim]);
            for (i, id) in t.ids.iter().enumerate() {
                let r = i * dim..(i + 1) * dim;
                if let Some((p, v)) = snap.levels.get(l).and_then(|m| m.get(id)) {
                    pl[r.clone()].copy_from_slice(p);
                    vl[r].copy_from_slice(v);
                    continue;
                }
                let members = matcher
                    .members(*id)
                    .ok_or_else(|| Error::Structure(format!("coarse vertex {id} has no members")))?;
                let idx: Vec<usize> = members.iter().map(|m| fine.index[&m]).collect();
                let prow: Vec<&[f64]> = idx.iter().map(|&k| &pos[l - 1][k * dim..(k + 1) * dim]).collect();
                let vrow: Vec<&[f64]> = idx.iter().map(|&k| &vel[l - 1][k * dim..(k + 1) * dim]).collect();
                pl[r.clone()].copy_from_slice(&mean(&prow, dim));
                vl[r].copy_from_slice(&mean(&vrow, dim));
            }
            pos.push(pl);
            vel.push(vl);
        }

        let frames: Vec<Option<FrameValues>> = (0..=top).map(|l| snap.frames.get(l).cloned().flatten()).collect();
        self.hierarchy = hierarchy;
        self.state = assemble(&self.hierarchy, dim, &pos, &vel, &frames);
        Ok(())
    }

    /// Sets all levels from given world positions and velocities (flat,
    /// stride `dim`, per level in hierarchy order), keeping the frames.
    pub fn set_world(&mut self, pos: &[Vec<f64>], vel: &[Vec<f64>]) -> Result<()> {
        self.sync()?;
        let frames = self.snapshot().frames;
        let dim = self.dim();
        for (l, t) in self.hierarchy.levels.iter().enumerate() {
            if pos.get(l).map(|p| p.len()) != Some(t.len() * dim) || vel.get(l).map(|v| v.len()) != Some(t.len() * dim) {
                return Err(Error::Structure(format!("level {l}: world arrays do not match")));
            }
        }
        self.state = assemble(&self.hierarchy, dim, pos, vel, &frames);
        Ok(())
    }
}

/// Builds the flat state realizing the given world kinematics:
/// `δ = x - (αy + β)` and `δ̇ = ẋ - (β̇ + α̇y + αẏ)`.
fn assemble(h: &Hierarchy, dim: usize, pos: &[Vec<f64>], vel: &[Vec<f64>], frames: &[Option<FrameValues>]) -> Vec<f64> {
    let layout = StateLayout::new(h, dim);
    let mut s = layout.identity_state();
    let top = h.coarsest();
    let t = layout.levels[top];
    s[t.pos..t.pos + t.n * dim].copy_from_slice(&pos[top]);
    s[t.vel..t.vel + t.n * dim].copy_from_slice(&vel[top]);
    for l in 0..top {
        let slot = layout.levels[l];
        let f = slot.frame.expect("finer level has a frame");
        let fv = frames.get(l).cloned().flatten().unwrap_or_else(|| {
            let mut alpha = vec![0.0; dim * dim];
            for k in 0..dim {
                alpha[k * dim + k] = 1.0;
            }
            FrameValues { alpha, alpha_dot: vec![0.0; dim * dim], beta: vec![0.0; dim], beta_dot: vec![0.0; dim] }
        });
        s[f.alpha..f.alpha + dim * dim].copy_from_slice(&fv.alpha);
        s[f.alpha_dot..f.alpha_dot + dim * dim].copy_from_slice(&fv.alpha_dot);
        s[f.beta..f.beta + dim].copy_from_slice(&fv.beta);
        s[f.beta_dot..f.beta_dot + dim].copy_from_slice(&fv.beta_dot);
        for (i, &p) in h.levels[l].parent.iter().enumerate() {
            let y = &pos[l + 1][p * dim..(p + 1) * dim];
            let yd = &vel[l + 1][p * dim..(p + 1) * dim];
            for r in 0..dim {
                let mut proj = fv.beta[r];
                let mut proj_v = fv.beta_dot[r];
                for c in 0..dim {
                    proj += fv.alpha[r * dim + c] * y[c];
                    proj_v += fv.alpha_dot[r * dim + c] * y[c] + fv.alpha[r * dim + c] * yd[c];
                }
                s[slot.pos + i * dim + r] = pos[l][i * dim + r] - proj;
                s[slot.vel + i * dim + r] = vel[l][i * dim + r] - proj_v;
            }
        }
    }
    s
}
