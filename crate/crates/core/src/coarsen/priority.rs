use std::collections::HashMap;

use crate::graph::{canonical, VertexId};

/// Canonical `(min, max)` endpoint pair of an edge at some level.
pub type EdgeKey = (VertexId, VertexId);

pub fn edge_key(a: VertexId, b: VertexId) -> EdgeKey {
    canonical(a, b)
}

/// Position of an edge in the matching order. Greater means higher priority:
/// it is considered earlier by the greedy scan and dominates every adjacent
/// edge of lower priority.
///
/// Ordering is by hashed rank, then by key, so it is total and injective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Priority {
    rank: u64,
    key: EdgeKey,
}

impl Priority {
    pub fn key(&self) -> EdgeKey {
        self.key
    }

    /// The priority as a real number in `[0, 1)`.
    pub fn value(&self) -> f64 {
        (self.rank >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for level `level` of a chain rooted at `root`.
pub fn level_seed(root: u64, level: usize) -> u64 {
    mix64(root ^ mix64(0x9e37_79b9_7f4a_7c15_u64.wrapping_mul(level as u64 + 1)))
}

pub fn priority(key: EdgeKey, seed: u64) -> Priority {
    let (a, b) = key;
    let h = mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let h = mix64(h ^ a.0);
    let rank = mix64(h ^ b.0.rotate_left(32));
    Priority { rank, key }
}

/// The total order used by one level's matcher.
#[derive(Clone, Debug)]
pub enum EdgeOrder {
    Hashed { seed: u64 },
    /// Explicit ranks for some edges (higher rank = higher priority); edges
    /// without a rank fall back to the hash. Used to reproduce hand-made
    /// examples.
    Ranked { seed: u64, ranks: HashMap<EdgeKey, u64> },
}

impl EdgeOrder {
    /// Highest priority first: `keys[0]` is considered first by the greedy scan.
    pub fn from_sequence<I: IntoIterator<Item = EdgeKey>>(seed: u64, keys: I) -> Self {
        let ranks = keys
            .into_iter()
            .enumerate()
            .map(|(i, k)| (edge_key(k.0, k.1), u64::MAX - i as u64))
            .collect();
        EdgeOrder::Ranked { seed, ranks }
    }

    pub fn priority(&self, key: EdgeKey) -> Priority {
        match self {
            EdgeOrder::Hashed { seed } => priority(key, *seed),
            EdgeOrder::Ranked { seed, ranks } => match ranks.get(&key) {
                Some(&rank) => Priority { rank, key },
                None => priority(key, *seed),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(a: u64, b: u64) -> EdgeKey {
        edge_key(VertexId(a), VertexId(b))
    }

    #[test]
    fn deterministic() {
        assert_eq!(priority(k(3, 9), 17), priority(k(3, 9), 17));
        assert_eq!(priority(k(3, 9), 17).value(), priority(k(9, 3), 17).value());
        assert_ne!(priority(k(3, 9), 17).value(), priority(k(3, 9), 18).value());
    }

    #[test]
    fn order_positions_distinct() {
        let mut ps: Vec<Priority> = (0..100_000u64).map(|i| priority(k(i, i + 1 + i % 7), 5)).collect();
        ps.sort();
        assert!(ps.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn values_in_unit_interval() {
        for i in 0..10_000u64 {
            let v = priority(k(i, i * 31 + 1), 99).value();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn kolmogorov_smirnov_uniform() {
        let n = 100_000usize;
        let mut vals: Vec<f64> = (0..n as u64).map(|i| priority(k(i / 3, i + 100_000), 2024).value()).collect();
        vals.sort_by(f64::total_cmp);
        let d = vals
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let lo = x - i as f64 / n as f64;
                let hi = (i + 1) as f64 / n as f64 - x;
                lo.max(hi)
            })
            .fold(0.0, f64::max);
        // Asymptotic critical value at the 1% level.
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn explicit_sequence_order() {
        let order = EdgeOrder::from_sequence(0, [k(1, 2), k(2, 3), k(3, 4)]);
        let p = |a, b| order.priority(k(a, b));
        assert!(p(1, 2) > p(2, 3));
        assert!(p(2, 3) > p(3, 4));
    }
}
