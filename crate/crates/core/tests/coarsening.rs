use std::collections::BTreeSet;

use dynlayout_core::coarsen::oracle::{static_greedy_matching, verify_chain};
use dynlayout_core::coarsen::{edge_key, EdgeKey, EdgeOrder, LevelChain, LevelEdit, MatchFlag, Matcher};
use dynlayout_core::{BaseGraph, EdgeId, VertexId};
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn v(i: u64) -> VertexId {
    VertexId(i)
}

fn key(a: u64, b: u64) -> EdgeKey {
    edge_key(v(a), v(b))
}

/// Member sets of every coarse vertex at level 1, independent of coarse ids.
fn parts(chain: &LevelChain) -> BTreeSet<Vec<u64>> {
    chain.dump().levels[0].partition.iter().map(|c| c.members.clone()).collect()
}

/// Coarse edges at level 1 as (members, members, count).
fn coarse_edges(chain: &LevelChain) -> BTreeSet<(Vec<u64>, Vec<u64>, u32)> {
    let dump = chain.dump();
    let level = &dump.levels[0];
    let members = |id: u64| level.partition.iter().find(|c| c.id == id).unwrap().members.clone();
    level
        .coarse_edges
        .iter()
        .map(|e| {
            let (a, b) = (members(e.u), members(e.v));
            if a < b { (a, b, e.count) } else { (b, a, e.count) }
        })
        .collect()
}

mod figure {
    use super::*;

    const A: u64 = 0;
    const B: u64 = 1;
    const D: u64 = 2;
    const E: u64 = 3;
    const G: u64 = 4;
    const H: u64 = 5;

    /// Edges e1..e7 by index 1..=7 (index 0 unused).
    fn edges() -> [EdgeKey; 8] {
        [key(0, 0), key(A, B), key(A, D), key(B, E), key(D, E), key(D, G), key(E, H), key(G, H)]
    }

    fn order() -> EdgeOrder {
        let e = edges();
        EdgeOrder::from_sequence(0, [e[6], e[2], e[3], e[7], e[5], e[1], e[4]])
    }

    fn build() -> (LevelChain, Vec<EdgeId>) {
        let mut chain = LevelChain::with_orders(vec![order()]);
        for _ in 0..6 {
            chain.add_vertex().unwrap();
        }
        let ids = edges()[1..].iter().map(|(a, b)| chain.add_edge(*a, *b).unwrap()).collect();
        (chain, ids)
    }

    fn members(list: &[&[u64]]) -> BTreeSet<Vec<u64>> {
        list.iter().map(|m| m.to_vec()).collect()
    }

    #[test]
    fn static_oracle_gives_initial_matching() {
        let e = edges();
        let m = static_greedy_matching(e[1..].iter().copied(), &order());
        assert_eq!(m, BTreeSet::from([e[2], e[6]]));
    }

    #[test]
    fn initial_matching_and_coarse_graph() {
        let (chain, _) = build();
        let e = edges();
        assert_eq!(chain.matcher(0).matched_edges(), vec![e[2], e[6]]);
        assert_eq!(parts(&chain), members(&[&[A, D], &[E, H], &[B], &[G]]));
        let expected: BTreeSet<_> = [
            (vec![A, D], vec![B], 1),
            (vec![B], vec![E, H], 1),
            (vec![A, D], vec![E, H], 1),
            (vec![A, D], vec![G], 1),
            (vec![E, H], vec![G], 1),
        ]
        .into_iter()
        .map(|(a, b, c)| if a < b { (a, b, c) } else { (b, a, c) })
        .collect();
        assert_eq!(coarse_edges(&chain), expected);
        verify_chain(&chain).unwrap();
    }

    #[test]
    fn deleting_e2_rematches_e5_and_e1() {
        let (mut chain, ids) = build();
        let e = edges();
        chain.remove_edge(ids[1]).unwrap();
        let mut expected = vec![e[6], e[5], e[1]];
        expected.sort();
        assert_eq!(chain.matcher(0).matched_edges(), expected);
        // Re-evaluation touches exactly e5, e1 and e4.
        assert_eq!(chain.last_update()[0].evaluations, 3);
        assert_eq!(parts(&chain), members(&[&[A, B], &[D, G], &[E, H]]));
        let expected: BTreeSet<_> = [(vec![A, B], vec![E, H], 1), (vec![D, G], vec![E, H], 2)].into_iter().collect();
        assert_eq!(coarse_edges(&chain), expected);
        verify_chain(&chain).unwrap();
    }
}

#[test]
fn empty_graph_empty_matching() {
    assert!(static_greedy_matching([], &EdgeOrder::Hashed { seed: 1 }).is_empty());
    let chain = LevelChain::new(3, 1).unwrap();
    assert!(chain.dump().levels.iter().all(|l| l.partition.is_empty()));
    verify_chain(&chain).unwrap();
}

#[test]
fn triangle_matches_its_first_edge() {
    for seed in 0..20 {
        let order = EdgeOrder::Hashed { seed };
        let tri = [key(0, 1), key(1, 2), key(0, 2)];
        let m = static_greedy_matching(tri, &order);
        let best = tri.iter().max_by_key(|k| order.priority(**k)).unwrap();
        assert_eq!(m, BTreeSet::from([*best]));
    }
}

#[test]
fn single_edge_match_then_unmatch() {
    let mut chain = LevelChain::new(2, 9).unwrap();
    let a = chain.add_vertex().unwrap();
    let b = chain.add_vertex().unwrap();
    assert_eq!(chain.level(1).vertex_count(), 2);
    let e = chain.add_edge(a, b).unwrap();
    assert_eq!(chain.last_update()[0].evaluations, 1);
    assert_eq!(chain.level(1).vertex_count(), 1);
    assert_eq!(chain.level(1).edge_count(), 0);
    chain.remove_edge(e).unwrap();
    assert_eq!(chain.level(1).vertex_count(), 2);
    assert_eq!(chain.level(1).edge_count(), 0);
    verify_chain(&chain).unwrap();
}

/// Drives a bare matcher on a fine graph by hand.
struct Harness {
    graph: BaseGraph,
    matcher: Matcher,
    out: Vec<LevelEdit>,
}

impl Harness {
    fn new(order: EdgeOrder, n: u64) -> Self {
        let mut h = Harness { graph: BaseGraph::new(), matcher: Matcher::new(order), out: Vec::new() };
        for _ in 0..n {
            let id = h.graph.add_vertex();
            h.matcher.on_add_vertex(id, &mut h.out).unwrap();
        }
        h
    }

    fn add(&mut self, a: u64, b: u64) -> EdgeId {
        let e = self.graph.add_edge(v(a), v(b)).unwrap();
        self.matcher.on_add_edge(&self.graph, v(a), v(b), &mut self.out).unwrap();
        e
    }
}

#[test]
fn unmatch_single_edge_restores_singletons_with_counted_edge() {
    let mut h = Harness::new(EdgeOrder::Hashed { seed: 3 }, 2);
    h.add(0, 1);
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert_eq!(h.matcher.coarse_vertices().count(), 1);
    assert!(h.matcher.coarse_edges().is_empty());
    // Force the edge to lose its match by dominating it with a new,
    // higher-priority neighbor edge.
    let order = EdgeOrder::from_sequence(0, [key(1, 2), key(0, 1)]);
    let mut h = Harness::new(order, 3);
    h.add(0, 1);
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert!(h.matcher.is_matched(v(0), v(1)));
    h.add(1, 2);
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert!(!h.matcher.is_matched(v(0), v(1)));
    assert_eq!(h.matcher.coarse_vertices().count(), 2);
    let edges = h.matcher.coarse_edges();
    assert_eq!(edges.len(), 1);
    assert_eq!(edges[0].1, 1);
}

#[test]
fn path_middle_edge_contracts() {
    // Path 0-1-2-3 with the middle edge first.
    let order = EdgeOrder::from_sequence(0, [key(1, 2), key(0, 1), key(2, 3)]);
    let mut h = Harness::new(order, 4);
    h.add(0, 1);
    h.add(1, 2);
    h.add(2, 3);
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert_eq!(h.matcher.matched_edges(), vec![key(1, 2)]);
    let mid = h.matcher.image(v(1)).unwrap();
    assert_eq!(h.matcher.image(v(2)), Some(mid));
    let edges = h.matcher.coarse_edges();
    assert_eq!(edges.len(), 2);
    for (k, c) in edges {
        assert_eq!(c, 1);
        assert!(k.0 == mid || k.1 == mid);
    }
    h.matcher.audit(&h.graph, &h.graph.vertices().collect::<Vec<_>>()).unwrap();
}

#[test]
fn match_equation_cases() {
    let order = EdgeOrder::from_sequence(0, [key(0, 1), key(1, 2)]);
    let mut h = Harness::new(order, 4);
    h.add(0, 1);
    h.add(1, 2);
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert!(h.matcher.is_matched(v(0), v(1)));
    assert_eq!(h.matcher.match_equation(v(1), v(2)), MatchFlag::Unmatched);
    // An isolated edge has no dominators.
    let mut iso = Harness::new(EdgeOrder::Hashed { seed: 0 }, 2);
    iso.add(0, 1);
    assert_eq!(iso.matcher.match_equation(v(0), v(1)), MatchFlag::Matched);
}

#[test]
fn empty_queue_propagate_is_a_noop() {
    let mut h = Harness::new(EdgeOrder::Hashed { seed: 0 }, 3);
    let before = h.matcher.stats();
    h.matcher.propagate(&h.graph, &mut h.out).unwrap();
    assert_eq!(h.matcher.stats().evaluations, before.evaluations);
}

#[test]
fn random_500_edge_graph_satisfies_all_match_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut chain = LevelChain::new(2, 42).unwrap();
    let vs: Vec<VertexId> = (0..200).map(|_| chain.add_vertex().unwrap()).collect();
    while chain.base().edge_count() < 500 {
        let a = *vs.choose(&mut rng).unwrap();
        let b = *vs.choose(&mut rng).unwrap();
        if a != b && chain.base().edge_between(a, b).is_none() {
            chain.add_edge(a, b).unwrap();
        }
    }
    let m = chain.matcher(0);
    for (_, rec) in chain.base().edges() {
        let (a, b) = rec.key();
        let flag = if m.is_matched(a, b) { MatchFlag::Matched } else { MatchFlag::Unmatched };
        assert_eq!(m.match_equation(a, b), flag);
    }
    verify_chain(&chain).unwrap();
}

/// Random edit against `chain` with degrees capped at `max_degree`.
fn random_edit(chain: &mut LevelChain, rng: &mut ChaCha8Rng, max_degree: usize) {
    let g = chain.base();
    let verts: Vec<VertexId> = g.vertices().collect();
    let roll = rng.random_range(0..100);
    if verts.len() < 2 || roll < 10 {
        chain.add_vertex().unwrap();
    } else if roll < 15 {
        let x = *verts.choose(rng).unwrap();
        chain.remove_vertex(x).unwrap();
    } else if roll < 65 || g.edge_count() == 0 {
        for _ in 0..20 {
            let a = *verts.choose(rng).unwrap();
            let b = *verts.choose(rng).unwrap();
            if a != b
                && g.edge_between(a, b).is_none()
                && g.degree(a).unwrap() < max_degree
                && g.degree(b).unwrap() < max_degree
            {
                chain.add_edge(a, b).unwrap();
                return;
            }
        }
    } else {
        let ids: Vec<EdgeId> = g.edges().map(|(e, _)| e).collect();
        let e = *ids.choose(rng).unwrap();
        chain.remove_edge(e).unwrap();
    }
}

#[test]
fn random_scripts_match_static_oracle_each_step() {
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chain = LevelChain::new(4, seed).unwrap();
        for _ in 0..300 {
            random_edit(&mut chain, &mut rng, 4);
            verify_chain(&chain).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }
}

#[test]
fn history_independence() {
    // The same final edge set reached through different edit histories
    // yields identical coarse structure at level 1.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 40u64;
    let target: Vec<(u64, u64)> = (0..80)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            (a.min(b), a.max(b))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let build = |order_seed: u64| {
        let mut r = ChaCha8Rng::seed_from_u64(order_seed);
        let mut chain = LevelChain::new(2, 77).unwrap();
        for _ in 0..n {
            chain.add_vertex().unwrap();
        }
        // Insert some decoys first, then the target in shuffled order, then
        // remove the decoys.
        let mut decoys = Vec::new();
        for _ in 0..30 {
            let a = r.random_range(0..n);
            let b = (a + r.random_range(1..n)) % n;
            let (a, b) = (a.min(b), a.max(b));
            if !target.contains(&(a, b)) && chain.base().edge_between(v(a), v(b)).is_none() {
                decoys.push(chain.add_edge(v(a), v(b)).unwrap());
            }
        }
        let mut edges = target.clone();
        use rand::seq::SliceRandom;
        edges.shuffle(&mut r);
        for (a, b) in edges {
            chain.add_edge(v(a), v(b)).unwrap();
        }
        for e in decoys {
            chain.remove_edge(e).unwrap();
        }
        chain
    };
    let a = build(1);
    let b = build(2);
    assert_eq!(a.matcher(0).matched_edges(), b.matcher(0).matched_edges());
    assert_eq!(parts(&a), parts(&b));
    assert_eq!(coarse_edges(&a), coarse_edges(&b));
}

#[test]
fn dump_serializes() {
    let mut chain = LevelChain::new(3, 0).unwrap();
    let a = chain.add_vertex().unwrap();
    let b = chain.add_vertex().unwrap();
    chain.add_edge(a, b).unwrap();
    let json = serde_json::to_value(chain.dump()).unwrap();
    let level0 = &json["levels"][0];
    assert_eq!(level0["matched"], serde_json::json!([[0, 1]]));
    assert_eq!(level0["partition"][0]["members"], serde_json::json!([0, 1]));
    assert_eq!(json["levels"][1]["partition"][0]["base_members"], serde_json::json!([0, 1]));
}

#[derive(Clone, Debug)]
enum Op {
    AddVertex,
    AddEdge(usize, usize),
    RemoveEdge(usize),
    RemoveVertex(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => Just(Op::AddVertex),
        5 => (any::<usize>(), any::<usize>()).prop_map(|(a, b)| Op::AddEdge(a, b)),
        2 => any::<usize>().prop_map(Op::RemoveEdge),
        1 => any::<usize>().prop_map(Op::RemoveVertex),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_chain_equals_rebuild(seed in any::<u64>(), ops in prop::collection::vec(op(), 1..150)) {
        let mut chain = LevelChain::new(3, seed).unwrap();
        for _ in 0..6 {
            chain.add_vertex().unwrap();
        }
        for o in ops {
            let verts: Vec<VertexId> = chain.base().vertices().collect();
            let edges: Vec<EdgeId> = chain.base().edges().map(|(e, _)| e).collect();
            match o {
                Op::AddVertex => { chain.add_vertex().unwrap(); }
                Op::AddEdge(a, b) if verts.len() >= 2 => {
                    let (a, b) = (verts[a % verts.len()], verts[b % verts.len()]);
                    if a != b && chain.base().edge_between(a, b).is_none() {
                        chain.add_edge(a, b).unwrap();
                    }
                }
                Op::RemoveEdge(i) if !edges.is_empty() => chain.remove_edge(edges[i % edges.len()]).unwrap(),
                Op::RemoveVertex(i) if !verts.is_empty() => chain.remove_vertex(verts[i % verts.len()]).unwrap(),
                _ => {}
            }
            prop_assert!(verify_chain(&chain).is_ok(), "{:?}", verify_chain(&chain));
        }
        // Replaying the base log from scratch gives the same graph.
        let rebuilt = BaseGraph::replay(chain.base().log()).unwrap();
        prop_assert_eq!(&rebuilt, chain.base());
    }
}
