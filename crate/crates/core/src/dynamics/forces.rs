use serde::Serialize;

use super::{LevelTopology, PhysicsParams, Repulsion};
use crate::graph::VertexId;
use crate::nbody::{exact_forces, exact_potential, BhTree};

/// Spring forces `-K Σ (x_i - x_j)` over `edges`.
pub fn spring_forces(x: &[f64], dim: usize, edges: &[(usize, usize)], k: f64) -> Vec<f64> {
    let mut f = vec![0.0; x.len()];
    for &(a, b) in edges {
        for c in 0..dim {
            let d = k * (x[a * dim + c] - x[b * dim + c]);
            f[a * dim + c] -= d;
            f[b * dim + c] += d;
        }
    }
    f
}

/// Conservative force on every vertex of a level: springs, repulsion and,
/// when `gravity` is set, the directed-edge gravity term. No drag.
pub fn level_forces(x: &[f64], topo: &LevelTopology, p: &PhysicsParams, mode: Repulsion, gravity: bool) -> Vec<f64> {
    let dim = p.dim;
    let mut f = spring_forces(x, dim, &topo.edges, p.k);
    if p.f0 != 0.0 && topo.len() > 1 {
        let rep = match mode {
            Repulsion::Exact => exact_forces(x, dim, &p.law()),
            Repulsion::BarnesHut { theta } => BhTree::build(x, dim).forces(&p.law(), theta),
        };
        for (a, b) in f.iter_mut().zip(rep) {
            *a += b;
        }
    }
    if let (true, Some(g)) = (gravity, p.gravity) {
        for &(tail, head) in &topo.directed {
            for c in 0..dim {
                let w = g.strength * g.direction[c];
                f[head * dim + c] += w;
                f[tail * dim + c] -= w;
            }
        }
    }
    f
}

/// Potential energy of a level, consistent with [`level_forces`].
pub fn level_potential(x: &[f64], topo: &LevelTopology, p: &PhysicsParams, mode: Repulsion, gravity: bool) -> f64 {
    let dim = p.dim;
    let mut v = 0.0;
    for &(a, b) in &topo.edges {
        let r2: f64 = (0..dim).map(|c| (x[a * dim + c] - x[b * dim + c]).powi(2)).sum();
        v += 0.5 * p.k * r2;
    }
    if p.f0 != 0.0 && topo.len() > 1 {
        v += match mode {
            Repulsion::Exact => exact_potential(x, dim, &p.law()),
            Repulsion::BarnesHut { theta } => BhTree::build(x, dim).potential(&p.law(), theta),
        };
    }
    if let (true, Some(g)) = (gravity, p.gravity) {
        for &(tail, head) in &topo.directed {
            for c in 0..dim {
                v -= g.strength * g.direction[c] * (x[head * dim + c] - x[tail * dim + c]);
            }
        }
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// Largest per-vertex norm of the single-level gradient.
    pub max_gradient: f64,
    pub worst_vertex: Option<VertexId>,
    pub tol: f64,
    pub pass: bool,
}

/// Evaluates the exact single-level gradient at world positions `x` of the
/// base level and compares its largest per-vertex norm with `tol`.
pub fn equilibrium_check(x: &[f64], topo: &LevelTopology, p: &PhysicsParams, tol: f64) -> EquilibriumReport {
    let dim = p.dim;
    let f = level_forces(x, topo, p, Repulsion::Exact, true);
    let mut max_gradient = 0.0;
    let mut worst_vertex = None;
    for (i, g) in f.chunks(dim).enumerate() {
        let n = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > max_gradient || worst_vertex.is_none() {
            max_gradient = n;
            worst_vertex = Some(topo.ids[i]);
        }
    }
    EquilibriumReport { max_gradient, worst_vertex, tol, pass: max_gradient <= tol }
}

/// Rest length of a single spring against its pair repulsion: the root of
/// `K r = f0 / (eps + r)^2`.
pub fn two_body_separation(p: &PhysicsParams) -> f64 {
    let g = |r: f64| p.k * r - p.f0 / ((p.eps + r) * (p.eps + r));
    let (mut lo, mut hi) = (0.0, 1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Gravity, Hierarchy};

    fn params(k: f64, f0: f64) -> PhysicsParams {
        PhysicsParams { k, f0, ..Default::default() }
    }

    #[test]
    fn potential_small_cases() {
        let one = Hierarchy::single(1, vec![]);
        assert_eq!(level_potential(&[1.0, 2.0, 3.0], &one.levels[0], &params(1.0, 1.0), Repulsion::Exact, true), 0.0);

        let apart = Hierarchy::single(2, vec![]);
        let r = 1.3;
        let p = params(1.0, 1.0);
        let v = level_potential(&[0.0, 0.0, 0.0, r, 0.0, 0.0], &apart.levels[0], &p, Repulsion::Exact, true);
        assert!((v - 1.0 / (p.eps + r)).abs() < 1e-15);

        let joined = Hierarchy::single(2, vec![(0, 1)]);
        let v = level_potential(&[0.0, 0.0, 0.0, 2.0, 0.0, 0.0], &joined.levels[0], &params(1.0, 0.0), Repulsion::Exact, true);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn symmetric_spring_pair() {
        let h = Hierarchy::single(2, vec![(0, 1)]);
        let f = level_forces(&[-1.0, 0.0, 0.0, 1.0, 0.0, 0.0], &h.levels[0], &params(1.0, 0.0), Repulsion::Exact, true);
        assert_eq!(f, vec![2.0, 0.0, 0.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn triangle_forces_are_radial() {
        let h = Hierarchy::single(3, vec![(0, 1), (1, 2), (0, 2)]);
        let mut x = Vec::new();
        for k in 0..3 {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            x.extend([2.0 * a.cos(), 2.0 * a.sin(), 0.0]);
        }
        let f = level_forces(&x, &h.levels[0], &params(1.0, 1.0), Repulsion::Exact, true);
        for i in 0..3 {
            let cross = x[3 * i] * f[3 * i + 1] - x[3 * i + 1] * f[3 * i];
            assert!(cross.abs() < 1e-12);
            assert!(f[3 * i + 2].abs() < 1e-15);
        }
    }

    #[test]
    fn gravity_pulls_head_along_direction() {
        let mut h = Hierarchy::single(2, vec![(0, 1)]);
        h.levels[0].directed = vec![(0, 1)];
        let g = Gravity { strength: 0.5, direction: [0.0, 1.0, 0.0] };
        let p = PhysicsParams { f0: 0.0, gravity: Some(g), ..Default::default() };
        let x = [0.0; 6];
        let f = level_forces(&x, &h.levels[0], &p, Repulsion::Exact, true);
        assert_eq!(f, vec![0.0, -0.5, 0.0, 0.0, 0.5, 0.0]);
        let without = level_forces(&x, &h.levels[0], &p, Repulsion::Exact, false);
        assert_eq!(without, vec![0.0; 6]);
        // Potential decreases as the head moves along the direction.
        let moved = [0.0, 0.0, 0.0, 0.0, 0.1, 0.0];
        let v0 = level_potential(&x, &h.levels[0], &p, Repulsion::Exact, true);
        let v1 = level_potential(&moved, &h.levels[0], &p, Repulsion::Exact, true);
        assert!(v1 < v0 + 0.5 * 0.01 + 1e-12);
    }

    #[test]
    fn equilibrium_at_two_body_root() {
        let p = PhysicsParams::default();
        let r = two_body_separation(&p);
        assert!((p.k * r - p.f0 / (p.eps + r).powi(2)).abs() < 1e-12);
        let h = Hierarchy::single(2, vec![(0, 1)]);
        let x = [0.3, -0.2, 0.1, 0.3 + r, -0.2, 0.1];
        assert!(equilibrium_check(&x, &h.levels[0], &p, 1e-6).pass);
        let off = [0.0, 0.0, 0.0, 3.0, 1.0, 0.0];
        let report = equilibrium_check(&off, &h.levels[0], &p, 1e-6);
        assert!(!report.pass && report.max_gradient > 1.0);
    }
}
