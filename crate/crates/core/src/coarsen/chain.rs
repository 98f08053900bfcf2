use serde::Serialize;

use super::matcher::{MatchStats, Matcher};
use super::priority::{level_seed, EdgeKey, EdgeOrder};
use super::{FineGraph, LevelEdit, LevelGraph};
use crate::error::{Error, Result};
use crate::graph::{BaseGraph, Edit, EdgeId, VertexId};

/// The base graph plus `levels - 1` dynamically maintained coarse graphs.
///
/// Level 0 is the base graph; level `l + 1` is the contraction of level `l`
/// by the matching held in `matcher(l)`.
#[derive(Clone, Debug)]
pub struct LevelChain {
    base: BaseGraph,
    upper: Vec<LevelGraph>,
    matchers: Vec<Matcher>,
    last_update: Vec<MatchStats>,
}

/// Borrowed view of one level's graph.
#[derive(Clone, Copy, Debug)]
pub enum LevelRef<'a> {
    Base(&'a BaseGraph),
    Coarse(&'a LevelGraph),
}

impl LevelRef<'_> {
    pub fn vertices(&self) -> Vec<VertexId> {
        match self {
            LevelRef::Base(g) => g.vertices().collect(),
            LevelRef::Coarse(g) => g.vertices().collect(),
        }
    }

    /// Canonical edge keys, ascending.
    pub fn edges(&self) -> Vec<EdgeKey> {
        match self {
            LevelRef::Base(g) => {
                let mut e: Vec<EdgeKey> = g.edges().map(|(_, r)| r.key()).collect();
                e.sort_unstable();
                e
            }
            LevelRef::Coarse(g) => g.edges().collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            LevelRef::Base(g) => g.vertex_count(),
            LevelRef::Coarse(g) => g.vertex_count(),
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            LevelRef::Base(g) => g.edge_count(),
            LevelRef::Coarse(g) => g.edge_count(),
        }
    }
}

impl FineGraph for LevelRef<'_> {
    fn has_vertex(&self, v: VertexId) -> bool {
        match self {
            LevelRef::Base(g) => g.has_vertex(v),
            LevelRef::Coarse(g) => g.has_vertex(v),
        }
    }

    fn has_edge(&self, a: VertexId, b: VertexId) -> bool {
        match self {
            LevelRef::Base(g) => g.has_edge(a, b),
            LevelRef::Coarse(g) => g.has_edge(a, b),
        }
    }

    fn neighbors(&self, v: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        let (base, coarse) = match self {
            LevelRef::Base(g) => (Some(g.neighbors(v)), None),
            LevelRef::Coarse(g) => (None, Some(g.neighbors(v))),
        };
        base.into_iter().flatten().chain(coarse.into_iter().flatten())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoarseVertexDump {
    pub id: u64,
    /// Member ids at the finer level, sorted.
    pub members: Vec<u64>,
    /// Base-graph vertices represented, sorted.
    pub base_members: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoarseEdgeDump {
    pub u: u64,
    pub v: u64,
    pub count: u32,
}

/// One level pair: the partition of level `level` and the coarse graph it
/// induces at `level + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelDump {
    pub level: usize,
    pub partition: Vec<CoarseVertexDump>,
    pub matched: Vec<[u64; 2]>,
    pub coarse_edges: Vec<CoarseEdgeDump>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ChainDump {
    pub levels: Vec<LevelDump>,
}

impl LevelChain {
    /// A chain of `levels` graphs (base included) with per-level hashed
    /// orders derived from `seed`.
    pub fn new(levels: usize, seed: u64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Config("a chain needs at least one level".into()));
        }
        let orders = (0..levels - 1).map(|l| EdgeOrder::Hashed { seed: level_seed(seed, l) }).collect();
        Ok(Self::with_orders(orders))
    }

    /// One matcher per order; `orders[l]` orders the edges of level `l`.
    pub fn with_orders(orders: Vec<EdgeOrder>) -> Self {
        let n = orders.len();
        LevelChain {
            base: BaseGraph::new(),
            upper: vec![LevelGraph::default(); n],
            matchers: orders.into_iter().map(Matcher::new).collect(),
            last_update: vec![MatchStats::default(); n],
        }
    }

    /// Number of graphs in the chain, base included.
    pub fn levels(&self) -> usize {
        self.matchers.len() + 1
    }

    pub fn base(&self) -> &BaseGraph {
        &self.base
    }

    pub fn level(&self, l: usize) -> LevelRef<'_> {
        if l == 0 {
            LevelRef::Base(&self.base)
        } else {
            LevelRef::Coarse(&self.upper[l - 1])
        }
    }

    /// The matcher mapping level `l` onto level `l + 1`.
    pub fn matcher(&self, l: usize) -> &Matcher {
        &self.matchers[l]
    }

    /// Per-level instrumentation deltas of the most recent [`apply`](Self::apply).
    pub fn last_update(&self) -> &[MatchStats] {
        &self.last_update
    }

    /// Total queue entries still pending across levels (zero at quiescence).
    pub fn pending(&self) -> usize {
        self.matchers.iter().map(|m| m.pending()).sum()
    }

    /// The coarse vertex at level `l + 1` containing `v` of level `l`.
    pub fn parent(&self, l: usize, v: VertexId) -> Option<VertexId> {
        self.matchers.get(l)?.image(v)
    }

    /// Base vertices represented by vertex `v` of level `l`, sorted.
    pub fn base_members(&self, l: usize, v: VertexId) -> Vec<VertexId> {
        let mut out = Vec::new();
        self.collect_base(l, v, &mut out);
        out.sort_unstable();
        out
    }

    fn collect_base(&self, l: usize, v: VertexId, out: &mut Vec<VertexId>) {
        if l == 0 {
            out.push(v);
            return;
        }
        if let Some(m) = self.matchers[l - 1].members(v) {
            for w in m.iter() {
                self.collect_base(l - 1, w, out);
            }
        }
    }

    /// Applies one base edit and propagates coarsening to quiescence at every
    /// level. On error the base graph is left unchanged.
    pub fn apply(&mut self, edit: &Edit) -> Result<()> {
        let before: Vec<MatchStats> = self.matchers.iter().map(|m| m.stats()).collect();
        let primitives = self.base.expand(edit)?;
        let mut pending = Vec::new();
        for p in &primitives {
            let change = match *p {
                Edit::AddVertex { id } => {
                    self.base.insert_vertex(id)?;
                    LevelEdit::AddVertex { id }
                }
                Edit::AddEdge { id, u, v, directed } => {
                    self.base.insert_edge(id, u, v, directed)?;
                    LevelEdit::AddEdge { u, v }
                }
                Edit::RemoveEdge { id } => {
                    let rec = self.base.remove_edge(id)?;
                    LevelEdit::RemoveEdge { u: rec.u, v: rec.v }
                }
                Edit::RemoveVertex { id } => {
                    self.base.remove_vertex(id)?;
                    LevelEdit::RemoveVertex { id }
                }
            };
            if let Some(m) = self.matchers.first_mut() {
                m.handle(&self.base, &change, &mut pending)?;
            }
        }
        if let Some(m) = self.matchers.first_mut() {
            m.propagate(&self.base, &mut pending)?;
        }
        for l in 0..self.upper.len() {
            let mut next = Vec::new();
            for change in std::mem::take(&mut pending) {
                self.upper[l].apply(&change)?;
                if let Some(m) = self.matchers.get_mut(l + 1) {
                    m.handle(&self.upper[l], &change, &mut next)?;
                }
            }
            if let Some(m) = self.matchers.get_mut(l + 1) {
                m.propagate(&self.upper[l], &mut next)?;
            }
            pending = next;
        }
        for (slot, (m, b)) in self.last_update.iter_mut().zip(self.matchers.iter().zip(&before)) {
            *slot = m.stats().since(b);
        }
        Ok(())
    }

    pub fn add_vertex(&mut self) -> Result<VertexId> {
        let id = self.base.next_vertex_id();
        self.apply(&Edit::AddVertex { id })?;
        Ok(id)
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId> {
        let id = self.base.next_edge_id();
        self.apply(&Edit::AddEdge { id, u, v, directed: false })?;
        Ok(id)
    }

    pub fn remove_edge(&mut self, e: EdgeId) -> Result<()> {
        self.apply(&Edit::RemoveEdge { id: e })
    }

    pub fn remove_vertex(&mut self, v: VertexId) -> Result<()> {
        self.apply(&Edit::RemoveVertex { id: v })
    }

    pub fn dump(&self) -> ChainDump {
        let levels = self
            .matchers
            .iter()
            .enumerate()
            .map(|(l, m)| LevelDump {
                level: l,
                partition: m
                    .coarse_vertices()
                    .map(|(c, mem)| CoarseVertexDump {
                        id: c.0,
                        members: mem.iter().map(|v| v.0).collect(),
                        base_members: self.base_members(l + 1, c).iter().map(|v| v.0).collect(),
                    })
                    .collect(),
                matched: m.matched_edges().iter().map(|(a, b)| [a.0, b.0]).collect(),
                coarse_edges: m
                    .coarse_edges()
                    .iter()
                    .map(|((a, b), count)| CoarseEdgeDump { u: a.0, v: b.0, count: *count })
                    .collect(),
            })
            .collect();
        ChainDump { levels }
    }

    /// Runs every matcher's internal audit and checks that each coarse graph
    /// holds exactly the coarse vertices and edges its matcher reports.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for (l, m) in self.matchers.iter().enumerate() {
            let fine = self.level(l);
            m.audit(&fine, &fine.vertices()).map_err(|e| format!("level {l}: {e}"))?;
            let coarse = &self.upper[l];
            let ids: Vec<VertexId> = m.coarse_vertices().map(|(c, _)| c).collect();
            if ids != coarse.vertices().collect::<Vec<_>>() {
                return Err(format!("level {}: vertex set differs from matcher", l + 1));
            }
            let edges: Vec<EdgeKey> = m.coarse_edges().iter().map(|(k, _)| *k).collect();
            if edges != coarse.edges().collect::<Vec<_>>() {
                return Err(format!("level {}: edge set differs from matcher", l + 1));
            }
        }
        Ok(())
    }
}
