#![allow(dead_code)]

use dynlayout_core::engine::{Engine, EngineConfig};
use dynlayout_core::graph::{Edit, EdgeId, EditEvent, VertexId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random tree on `n` vertices plus each remaining pair with probability
/// `p`, as an untimed event stream.
pub fn connected_graph(n: u64, p: f64, seed: u64) -> Vec<EditEvent> {
    let mut r = rng(seed);
    let mut events: Vec<EditEvent> = (0..n).map(|i| EditEvent::untimed(Edit::AddVertex { id: VertexId(i) })).collect();
    let mut pairs = std::collections::BTreeSet::new();
    for b in 1..n {
        pairs.insert((r.random_range(0..b), b));
    }
    for a in 0..n {
        for b in a + 1..n {
            if r.random::<f64>() < p {
                pairs.insert((a, b));
            }
        }
    }
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        events.push(EditEvent::untimed(Edit::AddEdge { id: EdgeId(k as u64), u: VertexId(a), v: VertexId(b), directed: false }));
    }
    events
}

pub fn engine_with(config: EngineConfig, events: &[EditEvent]) -> Engine {
    let mut e = Engine::new(config).unwrap();
    for ev in events {
        e.apply(&ev.edit).unwrap();
    }
    e.sync().unwrap();
    e
}

pub fn random_coords(n: usize, dim: usize, side: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n * dim).map(|_| r.random_range(-0.5 * side..0.5 * side)).collect()
}

/// Root of `K r = f0 / (eps + r)^2` by Newton's method on
/// `K r (eps + r)^2 - f0`.
pub fn newton_separation(k: f64, f0: f64, eps: f64) -> f64 {
    let mut r: f64 = (f0 / k).cbrt();
    for _ in 0..100 {
        let g = k * r * (eps + r).powi(2) - f0;
        let dg = k * (eps + r).powi(2) + 2.0 * k * r * (eps + r);
        r -= g / dg;
    }
    r
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
