//! Pairwise repulsion `f0 / (eps + r)^2`: exact summation and a Barnes-Hut
//! approximation over a quadtree (2-D) or octree (3-D).
//!
//! Positions are flat slices with stride `dim`. Each unordered pair
//! contributes `f0 / (eps + r)` to the potential exactly once.

use rayon::prelude::*;

use crate::coarsen::mix64;

/// Below this separation two points are treated as coincident.
pub const COINCIDENT: f64 = 1e-12;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepulsionLaw {
    pub f0: f64,
    pub eps: f64,
}

impl RepulsionLaw {
    pub fn magnitude(&self, r: f64) -> f64 {
        self.f0 / ((self.eps + r) * (self.eps + r))
    }

    pub fn energy(&self, r: f64) -> f64 {
        self.f0 / (self.eps + r)
    }
}

/// Deterministic unit direction used in place of `(x_i - x_j)/r` when the
/// two points coincide. Antisymmetric: `dir(i, j) = -dir(j, i)`.
pub fn coincident_direction(i: u64, j: u64, dim: usize) -> [f64; 3] {
    let (lo, hi, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let mut h = mix64(lo.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ mix64(hi));
    loop {
        let mut v = [0.0; 3];
        let mut norm2 = 0.0;
        for c in v.iter_mut().take(dim) {
            h = mix64(h);
            *c = (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            norm2 += *c * *c;
        }
        if norm2 > 1e-4 && norm2 <= 1.0 {
            let n = norm2.sqrt();
            return v.map(|c| sign * c / n);
        }
    }
}

fn point(coords: &[f64], dim: usize, i: usize) -> [f64; 3] {
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(&coords[i * dim..(i + 1) * dim]);
    p
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Force on `i` from `j` (repulsive), adding into `out`.
fn add_pair(law: &RepulsionLaw, xi: [f64; 3], xj: [f64; 3], i: usize, j: usize, dim: usize, out: &mut [f64; 3]) {
    let d = sub(xi, xj);
    let r = norm(d);
    let unit = if r < COINCIDENT { coincident_direction(i as u64, j as u64, dim) } else { d.map(|c| c / r) };
    let m = law.magnitude(r);
    for k in 0..3 {
        out[k] += m * unit[k];
    }
}

/// Exact repulsion on point `i` by direct summation.
pub fn exact_repulsion(coords: &[f64], dim: usize, law: &RepulsionLaw, i: usize) -> [f64; 3] {
    let n = coords.len() / dim;
    let xi = point(coords, dim, i);
    let mut f = [0.0; 3];
    for j in 0..n {
        if j != i {
            add_pair(law, xi, point(coords, dim, j), i, j, dim, &mut f);
        }
    }
    f
}

/// Exact repulsion on every point, flat with stride `dim`. Each unordered
/// pair is evaluated once and applied to both ends.
pub fn exact_forces(coords: &[f64], dim: usize, law: &RepulsionLaw) -> Vec<f64> {
    match dim {
        2 => exact_forces_dim::<2>(coords, law),
        3 => exact_forces_dim::<3>(coords, law),
        _ => {
            let n = coords.len() / dim;
            let mut out = vec![0.0; coords.len()];
            for i in 0..n {
                let f = exact_repulsion(coords, dim, law, i);
                out[i * dim..(i + 1) * dim].copy_from_slice(&f[..dim]);
            }
            out
        }
    }
}

fn exact_forces_dim<const D: usize>(coords: &[f64], law: &RepulsionLaw) -> Vec<f64> {
    let pts: Vec<[f64; D]> = coords.chunks_exact(D).map(|c| c.try_into().unwrap()).collect();
    let mut acc = vec![[0.0; D]; pts.len()];
    for i in 0..pts.len() {
        let xi = pts[i];
        let mut fi = [0.0; D];
        for j in i + 1..pts.len() {
            let mut d = [0.0; D];
            let mut r2 = 0.0;
            for k in 0..D {
                d[k] = xi[k] - pts[j][k];
                r2 += d[k] * d[k];
            }
            let r = r2.sqrt();
            let scale = if r < COINCIDENT {
                let u = coincident_direction(i as u64, j as u64, D);
                d.copy_from_slice(&u[..D]);
                law.magnitude(r)
            } else {
                let s = law.eps + r;
                law.f0 / (s * s * r)
            };
            for k in 0..D {
                let f = scale * d[k];
                fi[k] += f;
                acc[j][k] -= f;
            }
        }
        for k in 0..D {
            acc[i][k] += fi[k];
        }
    }
    acc.into_iter().flatten().collect()
}

/// Exact repulsion potential, each unordered pair once.
pub fn exact_potential(coords: &[f64], dim: usize, law: &RepulsionLaw) -> f64 {
    let n = coords.len() / dim;
    let mut v = 0.0;
    for i in 0..n {
        let xi = point(coords, dim, i);
        for j in i + 1..n {
            v += law.energy(norm(sub(xi, point(coords, dim, j))));
        }
    }
    v
}

#[derive(Clone, Debug)]
pub struct Node {
    pub center: [f64; 3],
    /// Half the side length of the node's cube.
    pub half: f64,
    pub count: usize,
    pub centroid: [f64; 3],
    /// Range into [`BhTree::order`] of the points under this node.
    pub start: usize,
    /// First child in [`BhTree::nodes`]; children are contiguous.
    pub first_child: u32,
    pub child_count: u8,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.first_child == NONE
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half
    }

    fn contains(&self, p: [f64; 3], dim: usize) -> bool {
        (0..dim).all(|k| (p[k] - self.center[k]).abs() <= self.half)
    }
}

/// Barnes-Hut spatial tree, rebuilt from scratch for each evaluation.
#[derive(Clone, Debug)]
pub struct BhTree {
    dim: usize,
    points: Vec<[f64; 3]>,
    /// Point indices permuted so every node owns a contiguous range.
    pub order: Vec<usize>,
    pub nodes: Vec<Node>,
    max_depth: usize,
    leaf_size: usize,
    scratch: Vec<usize>,
}

pub const DEFAULT_MAX_DEPTH: usize = 40;
/// Points a node may hold before it is split.
pub const LEAF_SIZE: usize = 8;

impl BhTree {
    pub fn build(coords: &[f64], dim: usize) -> Self {
        Self::build_with(coords, dim, DEFAULT_MAX_DEPTH, LEAF_SIZE)
    }

    pub fn build_with(coords: &[f64], dim: usize, max_depth: usize, leaf_size: usize) -> Self {
        assert!(dim == 2 || dim == 3, "dimension must be 2 or 3");
        let n = coords.len() / dim;
        let points: Vec<[f64; 3]> = (0..n).map(|i| point(coords, dim, i)).collect();
        let mut tree = BhTree { dim, points, order: (0..n).collect(), nodes: Vec::new(), max_depth, leaf_size: leaf_size.max(1), scratch: Vec::new() };
        if n == 0 {
            return tree;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &tree.points {
            for k in 0..dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let mut center = [0.0; 3];
        let mut half: f64 = 0.0;
        for k in 0..dim {
            center[k] = 0.5 * (lo[k] + hi[k]);
            half = half.max(0.5 * (hi[k] - lo[k]));
        }
        // Slack keeps boundary points strictly inside after rounding.
        half = half * (1.0 + 1e-9) + 1e-12;
        tree.nodes.push(Node { center, half, count: n, centroid: [0.0; 3], start: 0, first_child: NONE, child_count: 0 });
        tree.subdivide(0, 0);
        tree
    }

    fn subdivide(&mut self, node: usize, depth: usize) {
        let Node { center, half, count, start, .. } = self.nodes[node];
        if count <= self.leaf_size || depth >= self.max_depth {
            let mut c = [0.0; 3];
            for &i in &self.order[start..start + count] {
                for k in 0..3 {
                    c[k] += self.points[i][k];
                }
            }
            self.nodes[node].centroid = c.map(|x| x / count as f64);
            return;
        }
        let dim = self.dim;
        let octant = |p: &[f64; 3]| -> usize { (0..dim).map(|k| ((p[k] >= center[k]) as usize) << k).sum() };
        let slice = &mut self.order[start..start + count];
        let points = &self.points;
        let mut bins = [0usize; 8];
        for &i in slice.iter() {
            bins[octant(&points[i])] += 1;
        }
        let mut cursor = [0usize; 8];
        for o in 1..8 {
            cursor[o] = cursor[o - 1] + bins[o - 1];
        }
        self.scratch.clear();
        self.scratch.resize(count, 0);
        for &i in slice.iter() {
            let o = octant(&points[i]);
            self.scratch[cursor[o]] = i;
            cursor[o] += 1;
        }
        slice.copy_from_slice(&self.scratch);
        let first = self.nodes.len();
        let mut offset = start;
        let quarter = 0.5 * half;
        for (o, &len) in bins.iter().enumerate().take(1 << dim) {
            if len == 0 {
                continue;
            }
            let mut c = center;
            for (k, ck) in c.iter_mut().enumerate().take(dim) {
                *ck += if o >> k & 1 == 1 { quarter } else { -quarter };
            }
            self.nodes.push(Node {
                center: c,
                half: quarter,
                count: len,
                centroid: [0.0; 3],
                start: offset,
                first_child: NONE,
                child_count: 0,
            });
            offset += len;
        }
        let k = self.nodes.len() - first;
        self.nodes[node].first_child = first as u32;
        self.nodes[node].child_count = k as u8;
        let mut c = [0.0; 3];
        for child in first..first + k {
            self.subdivide(child, depth + 1);
            let ch = &self.nodes[child];
            for (a, b) in c.iter_mut().zip(ch.centroid) {
                *a += b * ch.count as f64;
            }
        }
        self.nodes[node].centroid = c.map(|x| x / count as f64);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn children(&self, node: usize) -> std::ops::Range<usize> {
        let n = &self.nodes[node];
        if n.is_leaf() {
            0..0
        } else {
            n.first_child as usize..n.first_child as usize + n.child_count as usize
        }
    }

    /// Points stored under `node`.
    pub fn members(&self, node: usize) -> &[usize] {
        let n = &self.nodes[node];
        &self.order[n.start..n.start + n.count]
    }

    /// Recomputes every node's count and centroid directly from its points
    /// and checks containment and the leaf partition.
    pub fn audit(&self, tol: f64) -> Result<(), String> {
        let n = self.points.len();
        let mut seen = vec![0u32; n];
        for (id, node) in self.nodes.iter().enumerate() {
            let members = self.members(id);
            if members.len() != node.count {
                return Err(format!("node {id}: count mismatch"));
            }
            let mut c = [0.0; 3];
            for &i in members {
                if !node.contains(self.points[i], self.dim) {
                    return Err(format!("node {id}: point {i} outside box"));
                }
                for k in 0..3 {
                    c[k] += self.points[i][k] / node.count as f64;
                }
            }
            let scale = 1.0 + norm(c);
            if norm(sub(c, node.centroid)) > tol * scale {
                return Err(format!("node {id}: centroid mismatch"));
            }
            if node.is_leaf() {
                for &i in members {
                    seen[i] += 1;
                }
            } else {
                let total: usize = self.children(id).map(|c| self.nodes[c].count).sum();
                if total != node.count {
                    return Err(format!("node {id}: children counts do not sum"));
                }
            }
        }
        if n > 0 && seen.iter().any(|&s| s != 1) {
            return Err("leaves do not partition the points".into());
        }
        Ok(())
    }

    /// Approximate repulsion on point `i`. A node is opened when it contains
    /// the query point or when `width / distance > theta`; leaves are summed
    /// exactly.
    pub fn repulsion(&self, law: &RepulsionLaw, i: usize, theta: f64) -> [f64; 3] {
        let mut f = [0.0; 3];
        if self.nodes.is_empty() {
            return f;
        }
        let xi = self.points[i];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.is_leaf() {
                for &j in self.members(id) {
                    if j != i {
                        add_pair(law, xi, self.points[j], i, j, self.dim, &mut f);
                    }
                }
                continue;
            }
            let d = sub(xi, node.centroid);
            let r = norm(d);
            if node.contains(xi, self.dim) || r < COINCIDENT || node.width() > theta * r {
                stack.extend(self.children(id));
            } else {
                let m = node.count as f64 * law.magnitude(r);
                for k in 0..3 {
                    f[k] += m * d[k] / r;
                }
            }
        }
        f
    }

    /// Repulsion on every point, flat with stride `dim`.
    pub fn forces(&self, law: &RepulsionLaw, theta: f64) -> Vec<f64> {
        let dim = self.dim;
        let mut out = vec![0.0; self.points.len() * dim];
        out.par_chunks_mut(dim).enumerate().for_each(|(i, o)| {
            let f = self.repulsion(law, i, theta);
            o.copy_from_slice(&f[..dim]);
        });
        out
    }

    /// Potential consistent with [`repulsion`](Self::repulsion): each point's
    /// interaction with the nodes it would accept, halved.
    pub fn potential(&self, law: &RepulsionLaw, theta: f64) -> f64 {
        let per_point: Vec<f64> = (0..self.points.len())
            .into_par_iter()
            .map(|i| {
                let xi = self.points[i];
                let mut v = 0.0;
                let mut stack = vec![0usize];
                while let Some(id) = stack.pop() {
                    let node = &self.nodes[id];
                    if node.is_leaf() {
                        for &j in self.members(id) {
                            if j != i {
                                v += law.energy(norm(sub(xi, self.points[j])));
                            }
                        }
                        continue;
                    }
                    let r = norm(sub(xi, node.centroid));
                    if node.contains(xi, self.dim) || r < COINCIDENT || node.width() > theta * r {
                        stack.extend(self.children(id));
                    } else {
                        v += node.count as f64 * law.energy(r);
                    }
                }
                v
            })
            .collect();
        0.5 * per_point.iter().sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const LAW: RepulsionLaw = RepulsionLaw { f0: 1.0, eps: 0.05 };

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * dim).map(|_| rng.random_range(-5.0..5.0)).collect()
    }

    fn rel_err(a: [f64; 3], b: [f64; 3]) -> f64 {
        norm(sub(a, b)) / norm(b).max(1e-300)
    }

    #[test]
    fn single_point_is_a_leaf_at_the_point() {
        let t = BhTree::build(&[1.0, 2.0, 3.0], 3);
        assert_eq!(t.nodes.len(), 1);
        assert!(t.nodes[0].is_leaf());
        assert_eq!(t.nodes[0].centroid, [1.0, 2.0, 3.0]);
        assert_eq!(t.repulsion(&LAW, 0, 0.7), [0.0; 3]);
    }

    #[test]
    fn cube_corners_center_at_cube_center() {
        let mut c = Vec::new();
        for i in 0..8 {
            c.extend([(i & 1) as f64, (i >> 1 & 1) as f64, (i >> 2 & 1) as f64]);
        }
        let t = BhTree::build_with(&c, 3, DEFAULT_MAX_DEPTH, 1);
        for k in 0..3 {
            assert!((t.nodes[0].centroid[k] - 0.5).abs() < 1e-15);
        }
        assert_eq!(t.children(0).len(), 8);
        assert!(BhTree::build(&c, 3).nodes[0].is_leaf());
    }

    #[test]
    fn audit_random_trees() {
        for dim in [2, 3] {
            let c = random_points(1000, dim, 7);
            BhTree::build(&c, dim).audit(1e-12).unwrap();
        }
    }

    #[test]
    fn coincident_points_bucket_at_max_depth() {
        let c = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 2.0, 0.0, 0.0];
        let t = BhTree::build_with(&c, 3, DEFAULT_MAX_DEPTH, 1);
        t.audit(1e-12).unwrap();
        let f0 = t.repulsion(&LAW, 0, 0.7);
        let f1 = t.repulsion(&LAW, 1, 0.7);
        let e0 = exact_repulsion(&c, 3, &LAW, 0);
        assert!(rel_err(f0, e0) < 1e-12);
        // Coincident pair pushes apart along opposite directions.
        let mag = LAW.magnitude(0.0);
        assert!(norm(f0) > 0.5 * mag && norm(f1) > 0.5 * mag);
    }

    #[test]
    fn coincident_direction_is_antisymmetric_unit() {
        for (i, j) in [(0, 1), (5, 3), (100, 7)] {
            for dim in [2, 3] {
                let a = coincident_direction(i, j, dim);
                let b = coincident_direction(j, i, dim);
                assert!((norm(a) - 1.0).abs() < 1e-12);
                for k in 0..3 {
                    assert_eq!(a[k], -b[k]);
                }
                if dim == 2 {
                    assert_eq!(a[2], 0.0);
                }
            }
        }
    }

    #[test]
    fn two_points_magnitude() {
        let r = 1.7;
        let c = [0.0, 0.0, 0.0, r, 0.0, 0.0];
        let f = exact_repulsion(&c, 3, &LAW, 0);
        let expected = 1.0 / ((0.05 + r) * (0.05 + r));
        assert!((f[0] + expected).abs() < 1e-15);
        for theta in [0.0, 0.5, 2.0, 100.0] {
            let t = BhTree::build(&c, 3);
            assert_eq!(t.repulsion(&LAW, 0, theta), f);
        }
    }

    #[test]
    fn ring_center_feels_no_force() {
        let n = 12;
        let mut c = vec![0.0, 0.0];
        for k in 0..n {
            let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            c.extend([a.cos(), a.sin()]);
        }
        assert!(norm(exact_repulsion(&c, 2, &LAW, 0)) < 1e-12);
    }

    #[test]
    fn theta_zero_matches_exact() {
        for dim in [2, 3] {
            let c = random_points(300, dim, 11);
            let t = BhTree::build(&c, dim);
            for i in 0..300 {
                let e = exact_repulsion(&c, dim, &LAW, i);
                assert!(rel_err(t.repulsion(&LAW, i, 0.0), e) < 1e-9);
            }
            let pe = exact_potential(&c, dim, &LAW);
            assert!((t.potential(&LAW, 0.0) - pe).abs() < 1e-9 * pe);
        }
    }

    #[test]
    fn exact_forces_sum_to_zero() {
        let c = random_points(100, 3, 3);
        let f = exact_forces(&c, 3, &LAW);
        let mut total = [0.0; 3];
        let mut scale = 0.0;
        for i in 0..100 {
            for k in 0..3 {
                total[k] += f[3 * i + k];
                scale += f[3 * i + k].abs();
            }
        }
        assert!(norm(total) < 1e-9 * scale.max(1.0));
    }

    #[test]
    fn error_grows_with_theta() {
        let c = random_points(500, 3, 5);
        let t = BhTree::build(&c, 3);
        let exact = exact_forces(&c, 3, &LAW);
        let rms = |theta: f64| {
            let f = t.forces(&LAW, theta);
            let s: f64 = (0..500)
                .map(|i| {
                    let a = point(&f, 3, i);
                    let b = point(&exact, 3, i);
                    rel_err(a, b).powi(2)
                })
                .sum();
            (s / 500.0).sqrt()
        };
        let errs: Vec<f64> = [0.0, 0.3, 0.7, 1.2].iter().map(|&t| rms(t)).collect();
        assert!(errs[0] < 1e-12);
        assert!(errs[1] <= errs[2] && errs[2] <= errs[3], "{errs:?}");
    }
}
