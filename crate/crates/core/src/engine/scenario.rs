//! Event-stream generators for the demonstration graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, Edit, EditEvent, VertexId};

/// `n x n x n` lattice with 6-neighbor edges, everything at `t = 0`.
pub fn cube(n: usize) -> Vec<EditEvent> {
    let id = |x: usize, y: usize, z: usize| VertexId(((x * n + y) * n + z) as u64);
    let mut events: Vec<EditEvent> =
        (0..(n * n * n) as u64).map(|i| EditEvent::at(Edit::AddVertex { id: VertexId(i) }, 0.0)).collect();
    let mut next = 0u64;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let here = id(x, y, z);
                let mut link = |other: VertexId| {
                    events.push(EditEvent::at(
                        Edit::AddEdge { id: EdgeId(next), u: here, v: other, directed: false },
                        0.0,
                    ));
                    next += 1;
                };
                if x + 1 < n {
                    link(id(x + 1, y, z));
                }
                if y + 1 < n {
                    link(id(x, y + 1, z));
                }
                if z + 1 < n {
                    link(id(x, y, z + 1));
                }
            }
        }
    }
    events
}

/// Edge probability rising linearly, `p(t) = min(p_max, t / ramp)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnpSchedule {
    pub p_max: f64,
    /// Time for `p` to rise from 0 to 1.
    pub ramp: f64,
}

/// Random-graph evolution: every pair gets a uniform trigger `u`, and its
/// edge is added when `p(t)` first exceeds `u`, i.e. at `t = u * ramp`.
/// Vertices are all added at `t = 0`; edges are ordered by time.
pub fn gnp(n: usize, schedule: GnpSchedule, seed: u64) -> Vec<EditEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events: Vec<EditEvent> =
        (0..n as u64).map(|i| EditEvent::at(Edit::AddVertex { id: VertexId(i) }, 0.0)).collect();
    let mut edges = Vec::new();
    for a in 0..n as u64 {
        for b in a + 1..n as u64 {
            let u: f64 = rng.random();
            if u < schedule.p_max {
                edges.push((u * schedule.ramp, a, b));
            }
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0));
    for (k, (t, a, b)) in edges.into_iter().enumerate() {
        events.push(EditEvent::at(
            Edit::AddEdge { id: EdgeId(k as u64), u: VertexId(a), v: VertexId(b), directed: false },
            t,
        ));
    }
    events
}

/// Insertions arrive faster and faster: the `k`-th gap is
/// `interval / (1 + accel * k)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSchedule {
    pub interval: f64,
    pub accel: f64,
}

impl Default for TreeSchedule {
    fn default() -> Self {
        TreeSchedule { interval: 1.0, accel: 0.05 }
    }
}

/// Binary-search-tree insertions of `count` distinct random keys.
pub fn tree(count: usize, schedule: TreeSchedule, seed: u64) -> Vec<EditEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keys = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    while keys.len() < count {
        let k: u64 = rng.random();
        if seen.insert(k) {
            keys.push(k);
        }
    }
    tree_from_keys(&keys, schedule)
}

/// BST insertion of `keys` in order: vertex `k` is the `k`-th key, linked
/// to its parent at the moment it is inserted. Duplicate keys are skipped.
pub fn tree_from_keys<K: Ord + Copy>(keys: &[K], schedule: TreeSchedule) -> Vec<EditEvent> {
    // Node: key, left child, right child (indices).
    let mut nodes: Vec<(K, Option<usize>, Option<usize>)> = Vec::with_capacity(keys.len());
    let mut events = Vec::new();
    let mut t = 0.0;
    let mut edge = 0u64;
    for &key in keys {
        let mut parent = None;
        if !nodes.is_empty() {
            let mut cur = 0;
            loop {
                let (k, left, right) = nodes[cur];
                let next = match key.cmp(&k) {
                    std::cmp::Ordering::Less => left,
                    std::cmp::Ordering::Greater => right,
                    std::cmp::Ordering::Equal => break,
                };
                match next {
                    Some(n) => cur = n,
                    None => {
                        parent = Some((cur, key < k));
                        break;
                    }
                }
            }
            if parent.is_none() {
                continue;
            }
        }
        let me = nodes.len();
        nodes.push((key, None, None));
        events.push(EditEvent::at(Edit::AddVertex { id: VertexId(me as u64) }, t));
        if let Some((p, left)) = parent {
            if left {
                nodes[p].1 = Some(me);
            } else {
                nodes[p].2 = Some(me);
            }
            events.push(EditEvent::at(
                Edit::AddEdge { id: EdgeId(edge), u: VertexId(p as u64), v: VertexId(me as u64), directed: false },
                t,
            ));
            edge += 1;
        }
        t += schedule.interval / (1.0 + schedule.accel * (me as f64));
    }
    events
}
