//! From-scratch reference computations for checking the dynamic matcher.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::chain::LevelChain;
use super::priority::{EdgeKey, EdgeOrder};
use crate::graph::VertexId;

/// Greedy matching: scan edges from highest to lowest priority, keeping each
/// edge that shares no endpoint with an edge already kept.
pub fn static_greedy_matching<I>(edges: I, order: &EdgeOrder) -> BTreeSet<EdgeKey>
where
    I: IntoIterator<Item = EdgeKey>,
{
    let mut ranked: Vec<_> = edges.into_iter().map(|k| order.priority(k)).collect();
    ranked.sort_unstable_by(|a, b| b.cmp(a));
    let mut used: HashSet<VertexId> = HashSet::new();
    let mut matching = BTreeSet::new();
    for p in ranked {
        let (a, b) = p.key();
        if !used.contains(&a) && !used.contains(&b) {
            used.insert(a);
            used.insert(b);
            matching.insert((a, b));
        }
    }
    matching
}

/// A contracted graph described by member sets, independent of coarse ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contraction {
    pub parts: BTreeSet<BTreeSet<VertexId>>,
    pub edges: BTreeMap<(BTreeSet<VertexId>, BTreeSet<VertexId>), u32>,
}

/// Contracts every matched edge, counting finer edges between parts.
pub fn contract(vertices: &[VertexId], edges: &[EdgeKey], matching: &BTreeSet<EdgeKey>) -> Contraction {
    let mut part_of: BTreeMap<VertexId, BTreeSet<VertexId>> =
        vertices.iter().map(|v| (*v, BTreeSet::from([*v]))).collect();
    for (a, b) in matching {
        let part = BTreeSet::from([*a, *b]);
        part_of.insert(*a, part.clone());
        part_of.insert(*b, part);
    }
    let mut counts = BTreeMap::new();
    for (a, b) in edges {
        let (pa, pb) = (&part_of[a], &part_of[b]);
        if pa != pb {
            let key = if pa < pb { (pa.clone(), pb.clone()) } else { (pb.clone(), pa.clone()) };
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    Contraction { parts: part_of.into_values().collect(), edges: counts }
}

/// Checks every level of `chain` against a from-scratch rebuild: the matching
/// must equal the static greedy matching of that level's current graph under
/// the same order, and the coarse graph must equal its contraction (parts and
/// multiplicities).
pub fn verify_chain(chain: &LevelChain) -> Result<(), String> {
    if chain.pending() != 0 {
        return Err("chain is not quiescent".into());
    }
    for l in 0..chain.levels() - 1 {
        let fine = chain.level(l);
        let vertices = fine.vertices();
        let edges = fine.edges();
        let m = chain.matcher(l);
        let expected = static_greedy_matching(edges.iter().copied(), m.order());
        let actual: BTreeSet<EdgeKey> = m.matched_edges().into_iter().collect();
        if expected != actual {
            return Err(format!(
                "level {l}: matching differs from static greedy ({} vs {} edges)",
                actual.len(),
                expected.len()
            ));
        }
        let reference = contract(&vertices, &edges, &expected);
        let members = |c: VertexId| -> BTreeSet<VertexId> { m.members(c).unwrap().iter().collect() };
        let parts: BTreeSet<BTreeSet<VertexId>> = m.coarse_vertices().map(|(c, _)| members(c)).collect();
        let mut counts = BTreeMap::new();
        for ((a, b), count) in m.coarse_edges() {
            let (pa, pb) = (members(a), members(b));
            let key = if pa < pb { (pa, pb) } else { (pb, pa) };
            counts.insert(key, count);
        }
        let actual = Contraction { parts, edges: counts };
        if actual != reference {
            return Err(format!("level {}: coarse graph differs from contraction", l + 1));
        }
    }
    chain.audit()
}
