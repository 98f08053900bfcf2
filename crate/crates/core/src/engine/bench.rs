use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarsen::{level_seed, EdgeOrder, LevelChain};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, VertexId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

/// Mean and nearest-rank percentiles.
pub fn summarize(samples: &[f64]) -> Summary {
    if samples.is_empty() {
        return Summary::default();
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
    Summary {
        count: s.len(),
        mean: s.iter().sum::<f64>() / s.len() as f64,
        p50: rank(0.5),
        p90: rank(0.9),
        p99: rank(0.99),
        max: s[s.len() - 1],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Target edge counts.
    pub sizes: Vec<usize>,
    /// Degree caps.
    pub degrees: Vec<usize>,
    /// Measured updates per configuration (half removals, half insertions).
    pub updates: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { sizes: vec![1_000, 10_000, 100_000], degrees: vec![2, 3, 4], updates: 20_000, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub degree: usize,
    pub edges: usize,
    pub vertices: usize,
    /// Match-equation evaluations per update.
    pub evaluations: Summary,
    /// Queue pushes plus pops per update.
    pub queue_operations: Summary,
    /// `e^{2(d-1)}`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, degree: usize, edges: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.degree == degree && r.edges == edges)
    }
}

/// Builds a random graph with every degree at most `degree` and about
/// `edges` edges, then measures a churn of random removals and insertions
/// that keeps the edge count steady. Only the base level is maintained.
pub fn bench_matching(config: &BenchConfig) -> Result<BenchReport> {
    let mut rows = Vec::new();
    for &d in &config.degrees {
        if d < 1 {
            return Err(Error::Config("degree cap must be at least 1".into()));
        }
        for &m in &config.sizes {
            rows.push(bench_one(d, m, config.updates, config.seed)?);
        }
    }
    Ok(BenchReport { rows })
}

fn bench_one(d: usize, m: usize, updates: usize, seed: u64) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(level_seed(seed, d * 1_000_003 + m));
    // Mean degree about two thirds of the cap.
    let n = ((3 * m) as f64 / d as f64).ceil().max(2.0) as usize;
    let mut chain = LevelChain::with_orders(vec![EdgeOrder::Hashed { seed: rng.random() }]);
    let vs: Vec<VertexId> = (0..n).map(|_| chain.add_vertex()).collect::<Result<_>>()?;
    let mut ids: Vec<EdgeId> = Vec::with_capacity(m);

    let try_insert = |chain: &mut LevelChain, rng: &mut ChaCha8Rng| -> Result<Option<EdgeId>> {
        for _ in 0..1000 {
            let a = *vs.choose(rng).unwrap();
            let b = *vs.choose(rng).unwrap();
            let g = chain.base();
            if a != b && g.degree(a).unwrap() < d && g.degree(b).unwrap() < d && g.edge_between(a, b).is_none() {
                return Ok(Some(chain.add_edge(a, b)?));
            }
        }
        Ok(None)
    };

    while ids.len() < m {
        match try_insert(&mut chain, &mut rng)? {
            Some(e) => ids.push(e),
            None => break,
        }
    }

    let mut evals = Vec::with_capacity(updates);
    let mut queue_ops = Vec::with_capacity(updates);
    for k in 0..updates {
        if k % 2 == 0 && !ids.is_empty() {
            let i = rng.random_range(0..ids.len());
            chain.remove_edge(ids.swap_remove(i))?;
        } else {
            match try_insert(&mut chain, &mut rng)? {
                Some(e) => ids.push(e),
                None => continue,
            }
        }
        let s = chain.last_update()[0];
        evals.push(s.evaluations as f64);
        queue_ops.push(s.queue_operations() as f64);
    }

    Ok(BenchRow {
        degree: d,
        edges: m,
        vertices: n,
        evaluations: summarize(&evals),
        queue_operations: summarize(&queue_ops),
        bound: (2.0 * (d as f64 - 1.0)).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let s = summarize(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert_eq!((s.p50, s.p90, s.p99, s.max), (50.0, 90.0, 99.0, 100.0));
        assert_eq!(s.mean, 50.5);
        assert_eq!(summarize(&[]).count, 0);
    }

    #[test]
    fn single_insertion_records_an_evaluation() {
        let mut chain = LevelChain::new(2, 0).unwrap();
        let a = chain.add_vertex().unwrap();
        let b = chain.add_vertex().unwrap();
        chain.add_edge(a, b).unwrap();
        assert!(chain.last_update()[0].evaluations >= 1);
    }

    #[test]
    fn small_bench_runs() {
        let r = bench_matching(&BenchConfig { sizes: vec![200], degrees: vec![3], updates: 500, seed: 1 }).unwrap();
        let row = r.row(3, 200).unwrap();
        assert_eq!(row.edges, 200);
        assert!(row.evaluations.mean > 0.0 && row.evaluations.mean < row.bound);
    }
}
