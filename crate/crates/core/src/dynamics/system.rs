use serde::Serialize;

use super::forces::{level_forces, level_potential};
use super::{Hierarchy, LevelSlots, PhysicsParams, Repulsion, StateLayout};
use crate::integrate::OdeSystem;

/// `out += m v` for a row-major `dim x dim` matrix.
fn mat_vec_add(m: &[f64], v: &[f64], scale: f64, out: &mut [f64]) {
    let dim = v.len();
    for r in 0..dim {
        let mut s = 0.0;
        for c in 0..dim {
            s += m[r * dim + c] * v[c];
        }
        out[r] += scale * s;
    }
}

/// Frame accelerations `(α̈, β̈)` from displacements `delta` and parent
/// positions `y` (both flat, stride `dim`, already gathered per fine vertex).
pub fn frame_acceleration(
    delta: &[f64],
    y: &[f64],
    alpha_dot: &[f64],
    beta_dot: &[f64],
    dim: usize,
    damping_alpha: f64,
    damping_beta: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = delta.len() / dim;
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim];
    if n == 0 {
        return (a, b);
    }
    for (d, yy) in delta.chunks(dim).zip(y.chunks(dim)) {
        for r in 0..dim {
            b[r] += d[r];
            for c in 0..dim {
                a[r * dim + c] += d[r] * yy[c] + yy[r] * d[c];
            }
        }
    }
    let inv = 1.0 / n as f64;
    for (x, v) in a.iter_mut().zip(alpha_dot) {
        *x = *x * inv - damping_alpha * v;
    }
    for (x, v) in b.iter_mut().zip(beta_dot) {
        *x = *x * inv - damping_beta * v;
    }
    (a, b)
}

/// Everything derived from one state snapshot, per level.
#[derive(Clone, Debug, Default)]
pub struct Evaluation {
    /// World positions.
    pub positions: Vec<Vec<f64>>,
    /// World velocities.
    pub velocities: Vec<Vec<f64>>,
    /// World accelerations implied by the equations of motion.
    pub accelerations: Vec<Vec<f64>>,
    /// Conservative forces (springs, repulsion, gravity at level 0).
    pub forces: Vec<Vec<f64>>,
    /// Second derivative of the level's own position variable: `ẍ` at the
    /// coarsest level, `δ̈` elsewhere.
    pub state_accelerations: Vec<Vec<f64>>,
    /// `(α̈, β̈)` for each finer level.
    pub frame_accelerations: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LevelEnergy {
    /// `½ Σ |ẋ|²` over world velocities.
    pub kinetic: f64,
    pub potential: f64,
    /// `½ (|α̇|² + |β̇|²)`; zero at the coarsest level.
    pub frame_kinetic: f64,
}

impl LevelEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// The coupled multilevel equations of motion over a fixed hierarchy.
#[derive(Clone, Debug)]
pub struct MultilevelSystem<'a> {
    pub params: PhysicsParams,
    pub hierarchy: &'a Hierarchy,
    pub layout: StateLayout,
    pub repulsion: Repulsion,
    /// Pins the coarsest level: its positions and velocities stay constant.
    pub frozen_coarsest: bool,
}

impl<'a> MultilevelSystem<'a> {
    pub fn new(params: PhysicsParams, hierarchy: &'a Hierarchy, repulsion: Repulsion) -> Self {
        let layout = StateLayout::new(hierarchy, params.dim);
        MultilevelSystem { params, hierarchy, layout, repulsion, frozen_coarsest: false }
    }

    fn coarsest(&self) -> usize {
        self.hierarchy.coarsest()
    }

    fn slots(&self, l: usize) -> LevelSlots {
        self.layout.levels[l]
    }

    /// Gathers a parent-level quantity onto the vertices of level `l`.
    fn gather(&self, l: usize, parent: &[f64]) -> Vec<f64> {
        let dim = self.params.dim;
        let mut out = Vec::with_capacity(self.hierarchy.levels[l].len() * dim);
        for &p in &self.hierarchy.levels[l].parent {
            out.extend_from_slice(&parent[p * dim..(p + 1) * dim]);
        }
        out
    }

    /// World positions of every level, evaluated top-down.
    pub fn world_positions(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let dim = self.params.dim;
        let top = self.coarsest();
        let mut pos = vec![Vec::new(); top + 1];
        let s = self.slots(top);
        pos[top] = state[s.pos..s.pos + s.n * dim].to_vec();
        for l in (0..top).rev() {
            let s = self.slots(l);
            let f = s.frame.expect("finer level has a frame");
            let alpha = &state[f.alpha..f.alpha + dim * dim];
            let beta = &state[f.beta..f.beta + dim];
            let y = self.gather(l, &pos[l + 1]);
            let mut x = state[s.pos..s.pos + s.n * dim].to_vec();
            for (xi, yi) in x.chunks_mut(dim).zip(y.chunks(dim)) {
                mat_vec_add(alpha, yi, 1.0, xi);
                for c in 0..dim {
                    xi[c] += beta[c];
                }
            }
            pos[l] = x;
        }
        pos
    }

    /// World positions and velocities of every level, without forces.
    pub fn world_kinematics(&self, state: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let dim = self.params.dim;
        let top = self.coarsest();
        let pos = self.world_positions(state);
        let mut vel = vec![Vec::new(); top + 1];
        let s = self.slots(top);
        vel[top] = if self.frozen_coarsest {
            vec![0.0; s.n * dim]
        } else {
            state[s.vel..s.vel + s.n * dim].to_vec()
        };
        for l in (0..top).rev() {
            let s = self.slots(l);
            let f = s.frame.expect("finer level has a frame");
            let alpha = &state[f.alpha..f.alpha + dim * dim];
            let alpha_dot = &state[f.alpha_dot..f.alpha_dot + dim * dim];
            let beta_dot = &state[f.beta_dot..f.beta_dot + dim];
            let y = self.gather(l, &pos[l + 1]);
            let yd = self.gather(l, &vel[l + 1]);
            let mut v = state[s.vel..s.vel + s.n * dim].to_vec();
            for i in 0..s.n {
                let r = i * dim..(i + 1) * dim;
                let vi = &mut v[r.clone()];
                mat_vec_add(alpha_dot, &y[r.clone()], 1.0, vi);
                mat_vec_add(alpha, &yd[r], 1.0, vi);
                for c in 0..dim {
                    vi[c] += beta_dot[c];
                }
            }
            vel[l] = v;
        }
        (pos, vel)
    }

    pub fn evaluate(&self, state: &[f64]) -> Evaluation {
        let p = &self.params;
        let dim = p.dim;
        let top = self.coarsest();
        let levels = top + 1;
        let positions = self.world_positions(state);
        let forces: Vec<Vec<f64>> = (0..levels)
            .map(|l| level_forces(&positions[l], &self.hierarchy.levels[l], p, self.repulsion, l == 0))
            .collect();
        let mut velocities = vec![Vec::new(); levels];
        let mut accelerations = vec![Vec::new(); levels];
        let mut state_accelerations = vec![Vec::new(); levels];
        let mut frame_accelerations = vec![None; levels];

        let s = self.slots(top);
        if self.frozen_coarsest {
            velocities[top] = vec![0.0; s.n * dim];
            accelerations[top] = vec![0.0; s.n * dim];
        } else {
            let v = &state[s.vel..s.vel + s.n * dim];
            velocities[top] = v.to_vec();
            accelerations[top] = forces[top].iter().zip(v).map(|(f, v)| f - p.damping * v).collect();
        }
        state_accelerations[top] = accelerations[top].clone();

        for l in (0..top).rev() {
            let s = self.slots(l);
            let fr = s.frame.expect("finer level has a frame");
            let delta = &state[s.pos..s.pos + s.n * dim];
            let delta_dot = &state[s.vel..s.vel + s.n * dim];
            let alpha = &state[fr.alpha..fr.alpha + dim * dim];
            let alpha_dot = &state[fr.alpha_dot..fr.alpha_dot + dim * dim];
            let beta_dot = &state[fr.beta_dot..fr.beta_dot + dim];
            let y = self.gather(l, &positions[l + 1]);
            let yd = self.gather(l, &velocities[l + 1]);
            let ydd = self.gather(l, &accelerations[l + 1]);
            let (a_dd, b_dd) = frame_acceleration(delta, &y, alpha_dot, beta_dot, dim, p.damping_alpha, p.damping_beta);

            let mut dd = vec![0.0; s.n * dim];
            let mut vel = vec![0.0; s.n * dim];
            let mut acc = vec![0.0; s.n * dim];
            let phi = p.phi;
            for i in 0..s.n {
                let r = i * dim..(i + 1) * dim;
                let (yi, ydi, yddi) = (&y[r.clone()], &yd[r.clone()], &ydd[r.clone()]);
                let mut proj = b_dd.clone();
                mat_vec_add(&a_dd, yi, 1.0, &mut proj);
                let mut dilated = proj.clone();
                mat_vec_add(alpha_dot, ydi, 2.0 * phi, &mut dilated);
                mat_vec_add(alpha, yddi, phi * phi, &mut dilated);
                let mut world = proj;
                mat_vec_add(alpha_dot, ydi, 2.0, &mut world);
                mat_vec_add(alpha, yddi, 1.0, &mut world);
                let mut v = beta_dot.to_vec();
                mat_vec_add(alpha_dot, yi, 1.0, &mut v);
                mat_vec_add(alpha, ydi, 1.0, &mut v);
                for c in 0..dim {
                    let k = i * dim + c;
                    dd[k] = forces[l][k] - p.damping * delta_dot[k] - dilated[c];
                    acc[k] = dd[k] + world[c];
                    vel[k] = delta_dot[k] + v[c];
                }
            }
            velocities[l] = vel;
            accelerations[l] = acc;
            state_accelerations[l] = dd;
            frame_accelerations[l] = Some((a_dd, b_dd));
        }

        Evaluation { positions, velocities, accelerations, forces, state_accelerations, frame_accelerations }
    }

    /// Per-level world kinetic and potential energy.
    pub fn energies(&self, state: &[f64]) -> Vec<LevelEnergy> {
        let (pos, vel) = self.world_kinematics(state);
        let dim = self.params.dim;
        (0..self.hierarchy.levels.len())
            .map(|l| {
                let kinetic = 0.5 * vel[l].iter().map(|v| v * v).sum::<f64>();
                let potential =
                    level_potential(&pos[l], &self.hierarchy.levels[l], &self.params, self.repulsion, l == 0);
                let frame_kinetic = match self.slots(l).frame {
                    Some(f) => {
                        0.5 * state[f.alpha_dot..f.alpha_dot + dim * dim].iter().map(|v| v * v).sum::<f64>()
                            + 0.5 * state[f.beta_dot..f.beta_dot + dim].iter().map(|v| v * v).sum::<f64>()
                    }
                    None => 0.0,
                };
                LevelEnergy { kinetic, potential, frame_kinetic }
            })
            .collect()
    }

    /// Largest world speed at level 0.
    pub fn max_speed(&self, state: &[f64]) -> f64 {
        let (_, vel) = self.world_kinematics(state);
        vel[0]
            .chunks(self.params.dim)
            .map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Mean world velocity of level 0, and the largest level-0 speed
    /// relative to it.
    ///
    /// The frame equations pull `β` toward the mean displacement without any
    /// reaction on the displacements, so a fine level can keep translating
    /// rigidly, with `δ̇ = 0` and `β̇ = mean(δ) / d_β`, after every internal
    /// motion has died out. The relative speed ignores that mode.
    pub fn drift(&self, state: &[f64]) -> (Vec<f64>, f64) {
        let dim = self.params.dim;
        let (_, vel) = self.world_kinematics(state);
        let n = vel[0].len() / dim;
        let mut mean = vec![0.0; dim];
        if n == 0 {
            return (mean, 0.0);
        }
        for v in vel[0].chunks(dim) {
            for (m, c) in mean.iter_mut().zip(v) {
                *m += c / n as f64;
            }
        }
        let rel = vel[0]
            .chunks(dim)
            .map(|v| v.iter().zip(&mean).map(|(c, m)| (c - m) * (c - m)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        (mean, rel)
    }
}

impl OdeSystem for MultilevelSystem<'_> {
    fn len(&self) -> usize {
        self.layout.len
    }

    fn derivatives(&self, state: &[f64], out: &mut [f64]) {
        let dim = self.params.dim;
        let e = self.evaluate(state);
        let top = self.coarsest();
        for l in 0..=top {
            let s = self.slots(l);
            let n = s.n * dim;
            if l == top && self.frozen_coarsest {
                out[s.pos..s.pos + 2 * n].fill(0.0);
                continue;
            }
            out[s.pos..s.pos + n].copy_from_slice(&state[s.vel..s.vel + n]);
            out[s.vel..s.vel + n].copy_from_slice(&e.state_accelerations[l]);
            if let (Some(f), Some((a, b))) = (s.frame, &e.frame_accelerations[l]) {
                out[f.alpha..f.alpha + dim * dim].copy_from_slice(&state[f.alpha_dot..f.alpha_dot + dim * dim]);
                out[f.alpha_dot..f.alpha_dot + dim * dim].copy_from_slice(a);
                out[f.beta..f.beta + dim].copy_from_slice(&state[f.beta_dot..f.beta_dot + dim]);
                out[f.beta_dot..f.beta_dot + dim].copy_from_slice(b);
            }
        }
    }

    fn describe(&self, index: usize) -> String {
        self.layout.describe(index, self.hierarchy)
    }
}
