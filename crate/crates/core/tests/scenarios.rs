use dynlayout_core::engine::scenario::{cube, gnp, tree, tree_from_keys, GnpSchedule, TreeSchedule};
use dynlayout_core::graph::{BaseGraph, Edit, EditEvent};

/// Union-find with path halving and union by size.
struct Components {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Components { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// False when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }

    fn largest(&mut self) -> usize {
        let roots: Vec<usize> = (0..self.parent.len()).filter(|&v| self.find(v) == v).collect();
        roots.into_iter().map(|v| self.size[v]).max().unwrap_or(0)
    }
}

fn counts(events: &[EditEvent]) -> (usize, usize) {
    let g = BaseGraph::replay(events.iter().map(|e| &e.edit)).unwrap();
    (g.vertex_count(), g.edge_count())
}

#[test]
fn cube_sizes() {
    assert_eq!(counts(&cube(1)), (1, 0));
    assert_eq!(counts(&cube(2)), (8, 12));
    let mut lattice_edges = 0;
    for x in 0..10i32 {
        for y in 0..10i32 {
            for z in 0..10i32 {
                for (dx, dy, dz) in [(1, 0, 0), (0, 1, 0), (0, 0, 1)] {
                    if x + dx < 10 && y + dy < 10 && z + dz < 10 {
                        lattice_edges += 1;
                    }
                }
            }
        }
    }
    assert_eq!(counts(&cube(10)), (1000, lattice_edges));
}

fn largest_fraction(n: usize, p: f64, seed: u64) -> f64 {
    let events = gnp(n, GnpSchedule { p_max: p, ramp: 1.0 }, seed);
    let mut uf = Components::new(n);
    for e in &events {
        if let Edit::AddEdge { u, v, .. } = e.edit {
            uf.union(u.0 as usize, v.0 as usize);
        }
    }
    uf.largest() as f64 / n as f64
}

#[test]
fn gnp_giant_component_threshold() {
    let n = 500;
    let above: f64 = (0..20).map(|s| largest_fraction(n, 3.0 / n as f64, s)).sum::<f64>() / 20.0;
    let below: f64 = (0..20).map(|s| largest_fraction(n, 0.5 / n as f64, s)).sum::<f64>() / 20.0;
    assert!(above > 0.5, "{above}");
    assert!(below < 0.05, "{below}");
}

#[test]
fn gnp_extremes() {
    assert_eq!(counts(&gnp(30, GnpSchedule { p_max: 0.0, ramp: 10.0 }, 1)).1, 0);
    let all = gnp(30, GnpSchedule { p_max: 1.0, ramp: 10.0 }, 1);
    assert_eq!(counts(&all).1, 30 * 29 / 2);
    let times: Vec<f64> = all.iter().map(|e| e.t.unwrap()).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(times.iter().all(|&t| (0.0..=10.0).contains(&t)));
}

#[test]
fn random_trees_are_trees() {
    for seed in 0..5 {
        let events = tree(1023, TreeSchedule::default(), seed);
        let (v, e) = counts(&events);
        assert_eq!((v, e), (1023, 1022));
        let mut uf = Components::new(1023);
        for ev in &events {
            if let Edit::AddEdge { u, v, .. } = ev.edit {
                assert!(uf.union(u.0 as usize, v.0 as usize), "cycle through {u} and {v}");
            }
        }
        let times: Vec<f64> = events.iter().filter_map(|e| e.t).collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn small_trees() {
    assert_eq!(counts(&tree(1, TreeSchedule::default(), 0)), (1, 0));
    let events = tree_from_keys(&[2, 1, 3], TreeSchedule::default());
    let g = BaseGraph::replay(events.iter().map(|e| &e.edit)).unwrap();
    let ids: Vec<_> = g.vertices().collect();
    assert_eq!(g.degree(ids[0]), Some(2));
    assert!(g.edge_between(ids[0], ids[1]).is_some() && g.edge_between(ids[0], ids[2]).is_some());
}
