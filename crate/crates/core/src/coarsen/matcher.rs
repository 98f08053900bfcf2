use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::Serialize;

use super::priority::{edge_key, EdgeKey, EdgeOrder, Priority};
use super::{FineGraph, LevelEdit};
use crate::error::{Error, Result};
use crate::graph::VertexId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchFlag {
    Matched,
    Unmatched,
}

/// Finer-level vertices making up one coarse vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Members {
    pub first: VertexId,
    pub second: Option<VertexId>,
}

impl Members {
    pub fn single(v: VertexId) -> Self {
        Members { first: v, second: None }
    }

    pub fn pair(a: VertexId, b: VertexId) -> Self {
        Members { first: a.min(b), second: Some(a.max(b)) }
    }

    pub fn iter(&self) -> impl Iterator<Item = VertexId> {
        std::iter::once(self.first).chain(self.second)
    }

    fn contains(&self, v: VertexId) -> bool {
        self.first == v || self.second == Some(v)
    }
}

/// Cumulative instrumentation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MatchStats {
    /// Match-equation evaluations performed by propagation.
    pub evaluations: u64,
    pub queue_pushes: u64,
    pub queue_pops: u64,
    /// Pops discarded because the entry's generation was stale.
    pub stale_pops: u64,
    pub matches: u64,
    pub unmatches: u64,
}

impl MatchStats {
    pub fn since(&self, earlier: &MatchStats) -> MatchStats {
        MatchStats {
            evaluations: self.evaluations - earlier.evaluations,
            queue_pushes: self.queue_pushes - earlier.queue_pushes,
            queue_pops: self.queue_pops - earlier.queue_pops,
            stale_pops: self.stale_pops - earlier.stale_pops,
            matches: self.matches - earlier.matches,
            unmatches: self.unmatches - earlier.unmatches,
        }
    }

    pub fn queue_operations(&self) -> u64 {
        self.queue_pushes + self.queue_pops
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct QueueEntry {
    priority: Priority,
    generation: u64,
}

/// Maintains the priority-greedy maximal matching of one finer graph and the
/// coarse graph obtained by contracting it.
///
/// The finer graph is not owned: every entry point takes it by reference and
/// expects it to already reflect the edit being reported. Coarse-level changes
/// are appended to an `out` buffer in an order that is valid to replay on the
/// coarse graph (edge removals before vertex removals, vertex additions before
/// edge additions).
#[derive(Clone, Debug)]
pub struct Matcher {
    order: EdgeOrder,
    mate: HashMap<VertexId, VertexId>,
    image: HashMap<VertexId, VertexId>,
    members: BTreeMap<VertexId, Members>,
    counts: HashMap<EdgeKey, u32>,
    queue: BinaryHeap<QueueEntry>,
    queued: HashMap<EdgeKey, u64>,
    generation: u64,
    next_coarse: u64,
    stats: MatchStats,
}

impl Matcher {
    pub fn new(order: EdgeOrder) -> Self {
        Matcher {
            order,
            mate: HashMap::new(),
            image: HashMap::new(),
            members: BTreeMap::new(),
            counts: HashMap::new(),
            queue: BinaryHeap::new(),
            queued: HashMap::new(),
            generation: 0,
            next_coarse: 0,
            stats: MatchStats::default(),
        }
    }

    pub fn order(&self) -> &EdgeOrder {
        &self.order
    }

    pub fn priority(&self, a: VertexId, b: VertexId) -> Priority {
        self.order.priority(edge_key(a, b))
    }

    pub fn stats(&self) -> MatchStats {
        self.stats
    }

    /// Live entries waiting in the propagation queue.
    pub fn pending(&self) -> usize {
        self.queued.len()
    }

    pub fn is_matched(&self, a: VertexId, b: VertexId) -> bool {
        self.mate.get(&a) == Some(&b)
    }

    pub fn mate(&self, v: VertexId) -> Option<VertexId> {
        self.mate.get(&v).copied()
    }

    /// The coarse vertex containing finer vertex `v`.
    pub fn image(&self, v: VertexId) -> Option<VertexId> {
        self.image.get(&v).copied()
    }

    pub fn members(&self, coarse: VertexId) -> Option<Members> {
        self.members.get(&coarse).copied()
    }

    /// Coarse vertices with their members, ascending by coarse id.
    pub fn coarse_vertices(&self) -> impl Iterator<Item = (VertexId, Members)> + '_ {
        self.members.iter().map(|(c, m)| (*c, *m))
    }

    /// Coarse edges with multiplicities, sorted by key.
    pub fn coarse_edges(&self) -> Vec<(EdgeKey, u32)> {
        let mut edges: Vec<_> = self.counts.iter().map(|(k, c)| (*k, *c)).collect();
        edges.sort_unstable();
        edges
    }

    pub fn coarse_count(&self, a: VertexId, b: VertexId) -> u32 {
        self.counts.get(&edge_key(a, b)).copied().unwrap_or(0)
    }

    /// Matched edges, sorted.
    pub fn matched_edges(&self) -> Vec<EdgeKey> {
        let mut m: Vec<EdgeKey> = self.mate.iter().filter(|(a, b)| a < b).map(|(a, b)| (*a, *b)).collect();
        m.sort_unstable();
        m
    }

    /// Evaluates `m(e)` for `e = a-b` against the current flags: matched iff
    /// no adjacent edge of higher priority is matched. A matched adjacent edge
    /// can only be the edge to the current mate of `a` or `b`, so only those
    /// two are inspected.
    pub fn match_equation(&self, a: VertexId, b: VertexId) -> MatchFlag {
        let p = self.priority(a, b);
        for (u, other) in [(a, b), (b, a)] {
            if let Some(&m) = self.mate.get(&u) {
                if m != other && self.priority(u, m) > p {
                    return MatchFlag::Unmatched;
                }
            }
        }
        MatchFlag::Matched
    }

    pub fn handle<G: FineGraph>(&mut self, fine: &G, edit: &LevelEdit, out: &mut Vec<LevelEdit>) -> Result<()> {
        match *edit {
            LevelEdit::AddVertex { id } => self.on_add_vertex(id, out),
            LevelEdit::RemoveVertex { id } => self.on_remove_vertex(fine, id, out),
            LevelEdit::AddEdge { u, v } => self.on_add_edge(fine, u, v, out),
            LevelEdit::RemoveEdge { u, v } => self.on_remove_edge(fine, u, v, out),
        }
    }

    pub fn on_add_vertex(&mut self, v: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        if self.image.contains_key(&v) {
            return Err(Error::Structure(format!("vertex {v} already has a coarse image")));
        }
        let c = self.fresh_coarse();
        self.members.insert(c, Members::single(v));
        self.image.insert(v, c);
        out.push(LevelEdit::AddVertex { id: c });
        Ok(())
    }

    /// `v` must already be isolated in (and removed from) the finer graph.
    pub fn on_remove_vertex<G: FineGraph>(&mut self, fine: &G, v: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        let c = *self.image.get(&v).ok_or(Error::UnknownVertex(v))?;
        if self.mate.contains_key(&v) || self.members[&c] != Members::single(v) || fine.neighbors(v).next().is_some() {
            return Err(Error::Structure(format!("vertex {v} removed while it still has edges")));
        }
        self.image.remove(&v);
        self.members.remove(&c);
        out.push(LevelEdit::RemoveVertex { id: c });
        Ok(())
    }

    /// The edge `a-b` must already be present in the finer graph.
    pub fn on_add_edge<G: FineGraph>(&mut self, fine: &G, a: VertexId, b: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        if !fine.has_edge(a, b) {
            return Err(Error::Structure(format!("edge {a}-{b} reported added but absent")));
        }
        let ca = *self.image.get(&a).ok_or(Error::UnknownVertex(a))?;
        let cb = *self.image.get(&b).ok_or(Error::UnknownVertex(b))?;
        if ca == cb {
            return Err(Error::Structure(format!("new edge {a}-{b} is internal to coarse vertex {ca}")));
        }
        self.increment(ca, cb, out);
        self.enqueue(edge_key(a, b));
        Ok(())
    }

    /// The edge `a-b` must already be gone from the finer graph.
    pub fn on_remove_edge<G: FineGraph>(&mut self, fine: &G, a: VertexId, b: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        if fine.has_edge(a, b) {
            return Err(Error::Structure(format!("edge {a}-{b} reported removed but present")));
        }
        let key = edge_key(a, b);
        self.queued.remove(&key);
        if self.is_matched(a, b) {
            self.unmatch(fine, a, b, out)?;
        } else {
            let ca = *self.image.get(&a).ok_or(Error::UnknownVertex(a))?;
            let cb = *self.image.get(&b).ok_or(Error::UnknownVertex(b))?;
            self.decrement(ca, cb, out)?;
            self.enqueue_dependents(fine, a, b);
        }
        Ok(())
    }

    /// Drains the queue highest priority first until the greedy fixpoint holds.
    pub fn propagate<G: FineGraph>(&mut self, fine: &G, out: &mut Vec<LevelEdit>) -> Result<()> {
        while let Some(entry) = self.queue.pop() {
            self.stats.queue_pops += 1;
            let key = entry.priority.key();
            if self.queued.get(&key) != Some(&entry.generation) {
                self.stats.stale_pops += 1;
                continue;
            }
            self.queued.remove(&key);
            let (a, b) = key;
            if !fine.has_edge(a, b) {
                continue;
            }
            self.stats.evaluations += 1;
            let want = self.match_equation(a, b) == MatchFlag::Matched;
            let have = self.is_matched(a, b);
            if want && !have {
                self.do_match(fine, a, b, out)?;
            } else if !want && have {
                self.unmatch(fine, a, b, out)?;
            }
        }
        Ok(())
    }

    fn do_match<G: FineGraph>(&mut self, fine: &G, a: VertexId, b: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        let p = self.priority(a, b);
        for u in [a, b] {
            if let Some(m) = self.mate(u) {
                if self.priority(u, m) < p {
                    self.unmatch(fine, u, m, out)?;
                }
            }
        }
        if self.mate.contains_key(&a) || self.mate.contains_key(&b) {
            return Err(Error::Structure(format!("match({a},{b}) with a matched dominator")));
        }
        let old = [self.image[&a], self.image[&b]];
        self.mate.insert(a, b);
        self.mate.insert(b, a);
        self.regroup(fine, &old, &[Members::pair(a, b)], out)?;
        self.stats.matches += 1;
        self.enqueue_dependents(fine, a, b);
        Ok(())
    }

    fn unmatch<G: FineGraph>(&mut self, fine: &G, a: VertexId, b: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        if !self.is_matched(a, b) {
            return Err(Error::Structure(format!("unmatch({a},{b}) on an unmatched edge")));
        }
        self.mate.remove(&a);
        self.mate.remove(&b);
        let old = [self.image[&a]];
        self.regroup(fine, &old, &[Members::single(a), Members::single(b)], out)?;
        self.stats.unmatches += 1;
        self.enqueue_dependents(fine, a, b);
        Ok(())
    }

    /// Replaces coarse vertices `old` by fresh ones with the given member
    /// sets (which must cover the same finer vertices), re-deriving the
    /// counts of every coarse edge touching them.
    fn regroup<G: FineGraph>(
        &mut self,
        fine: &G,
        old: &[VertexId],
        groups: &[Members],
        out: &mut Vec<LevelEdit>,
    ) -> Result<()> {
        let mut group: Vec<VertexId> = Vec::with_capacity(2 * old.len());
        for c in old {
            let m = self.members.remove(c).ok_or(Error::UnknownVertex(*c))?;
            group.extend(m.iter());
        }
        let inside = |x: VertexId| group.contains(&x);

        for &u in &group {
            for x in fine.neighbors(u) {
                if !inside(x) || u < x {
                    let (cu, cx) = (self.image[&u], self.image[&x]);
                    if cu != cx {
                        self.decrement(cu, cx, out)?;
                    }
                }
            }
        }
        for c in old {
            out.push(LevelEdit::RemoveVertex { id: *c });
        }
        for g in groups {
            let c = self.fresh_coarse();
            self.members.insert(c, *g);
            for v in g.iter() {
                debug_assert!(group.contains(&v));
                self.image.insert(v, c);
            }
            out.push(LevelEdit::AddVertex { id: c });
        }
        for &u in &group {
            for x in fine.neighbors(u) {
                if !inside(x) || u < x {
                    let (cu, cx) = (self.image[&u], self.image[&x]);
                    if cu != cx {
                        self.increment(cu, cx, out);
                    }
                }
            }
        }
        Ok(())
    }

    fn increment(&mut self, ca: VertexId, cb: VertexId, out: &mut Vec<LevelEdit>) {
        let key = edge_key(ca, cb);
        let count = self.counts.entry(key).or_insert(0);
        *count += 1;
        if *count == 1 {
            out.push(LevelEdit::AddEdge { u: key.0, v: key.1 });
        }
    }

    fn decrement(&mut self, ca: VertexId, cb: VertexId, out: &mut Vec<LevelEdit>) -> Result<()> {
        let key = edge_key(ca, cb);
        let count = self
            .counts
            .get_mut(&key)
            .ok_or_else(|| Error::Structure(format!("coarse edge {ca}-{cb} has no count")))?;
        *count -= 1;
        if *count == 0 {
            self.counts.remove(&key);
            out.push(LevelEdit::RemoveEdge { u: key.0, v: key.1 });
        }
        Ok(())
    }

    fn fresh_coarse(&mut self) -> VertexId {
        let id = VertexId(self.next_coarse);
        self.next_coarse += 1;
        id
    }

    fn enqueue(&mut self, key: EdgeKey) {
        if self.queued.contains_key(&key) {
            return;
        }
        self.generation += 1;
        self.queued.insert(key, self.generation);
        self.queue.push(QueueEntry { priority: self.order.priority(key), generation: self.generation });
        self.stats.queue_pushes += 1;
    }

    /// Enqueues every `e'` with `e -> e'`: edges sharing an endpoint with
    /// `a-b` and lower priority. `a-b` itself need not be present.
    fn enqueue_dependents<G: FineGraph>(&mut self, fine: &G, a: VertexId, b: VertexId) {
        let p = self.priority(a, b);
        for (u, other) in [(a, b), (b, a)] {
            for x in fine.neighbors(u) {
                if x != other && self.priority(u, x) < p {
                    self.enqueue(edge_key(u, x));
                }
            }
        }
    }

    /// Brute-force check of the matcher's internal invariants against the
    /// finer graph: validity, partition, recounted coarse multiplicities, and
    /// (when the queue is empty) the match equations.
    pub fn audit<G: FineGraph>(&self, fine: &G, fine_vertices: &[VertexId]) -> std::result::Result<(), String> {
        for (a, b) in &self.mate {
            if self.mate.get(b) != Some(a) {
                return Err(format!("mate map asymmetric at {a}"));
            }
            if !fine.has_edge(*a, *b) {
                return Err(format!("matched edge {a}-{b} not in graph"));
            }
        }
        if self.image.len() != fine_vertices.len() {
            return Err(format!("{} images for {} vertices", self.image.len(), fine_vertices.len()));
        }
        let mut covered = 0;
        for (c, m) in &self.members {
            covered += m.iter().count();
            for v in m.iter() {
                if self.image.get(&v) != Some(c) {
                    return Err(format!("member {v} of {c} maps elsewhere"));
                }
            }
            if let Some(second) = m.second {
                if !self.is_matched(m.first, second) {
                    return Err(format!("pair {c} is not a matched edge"));
                }
            } else if self.mate.contains_key(&m.first) {
                return Err(format!("matched vertex {} in singleton", m.first));
            }
        }
        if covered != fine_vertices.len() {
            return Err("partition does not cover the finer vertices".into());
        }
        let mut recount: HashMap<EdgeKey, u32> = HashMap::new();
        for &u in fine_vertices {
            for x in fine.neighbors(u) {
                if u < x {
                    let (cu, cx) = (self.image[&u], self.image[&x]);
                    if cu != cx {
                        *recount.entry(edge_key(cu, cx)).or_insert(0) += 1;
                    } else if !(self.members[&cu].contains(u) && self.members[&cu].contains(x)) {
                        return Err("internal edge outside a pair".into());
                    }
                }
            }
        }
        if recount != self.counts {
            return Err("coarse edge counts differ from recount".into());
        }
        if self.queued.is_empty() {
            for &u in fine_vertices {
                for x in fine.neighbors(u) {
                    if u < x {
                        let p = self.priority(u, x);
                        let dominated = [u, x].iter().any(|&w| {
                            fine.neighbors(w)
                                .any(|y| self.is_matched(w, y) && self.priority(w, y) > p)
                        });
                        if dominated == self.is_matched(u, x) {
                            return Err(format!("match equation violated at {u}-{x}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
