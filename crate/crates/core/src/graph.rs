//! The mutable level-0 graph and the edit events that drive it.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vertex identifier. Also used for the vertices of coarse levels, where each
/// level has its own id namespace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VertexId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Canonical unordered endpoint pair `(min, max)`.
pub fn canonical(a: VertexId, b: VertexId) -> (VertexId, VertexId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeRecord {
    /// Tail when `directed`.
    pub u: VertexId,
    /// Head when `directed`.
    pub v: VertexId,
    pub directed: bool,
}

impl EdgeRecord {
    pub fn key(&self) -> (VertexId, VertexId) {
        canonical(self.u, self.v)
    }
}

/// One line of an event stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Edit {
    AddVertex {
        id: VertexId,
    },
    AddEdge {
        id: EdgeId,
        u: VertexId,
        v: VertexId,
        /// Orientation `u -> v`, only consulted by the gravity force.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        directed: bool,
    },
    RemoveEdge {
        id: EdgeId,
    },
    RemoveVertex {
        id: VertexId,
    },
}

/// An edit with an optional application time in simulation seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditEvent {
    #[serde(flatten)]
    pub edit: Edit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

impl EditEvent {
    pub fn untimed(edit: Edit) -> Self {
        EditEvent { edit, t: None }
    }

    pub fn at(edit: Edit, t: f64) -> Self {
        EditEvent { edit, t: Some(t) }
    }
}

/// Parses a JSON Lines event stream. Blank lines are skipped; errors carry
/// the 1-based line number.
pub fn read_events<R: BufRead>(reader: R) -> Result<Vec<EditEvent>> {
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let event: EditEvent = serde_json::from_str(trimmed).map_err(|e| Error::MalformedEvent {
            line: n + 1,
            message: e.to_string(),
        })?;
        if let Some(t) = event.t {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::MalformedEvent {
                    line: n + 1,
                    message: format!("event time must be finite and non-negative, got {t}"),
                });
            }
        }
        events.push(event);
    }
    Ok(events)
}

pub fn write_events<W: Write>(mut writer: W, events: &[EditEvent]) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut writer, event)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Undirected simple graph with stable, never-reused identifiers.
#[derive(Clone, Debug, Default)]
pub struct BaseGraph {
    adjacency: BTreeMap<VertexId, BTreeMap<VertexId, EdgeId>>,
    edges: BTreeMap<EdgeId, EdgeRecord>,
    retired_vertices: HashSet<VertexId>,
    retired_edges: HashSet<EdgeId>,
    next_vertex: u64,
    next_edge: u64,
    log: Vec<Edit>,
}

impl PartialEq for BaseGraph {
    fn eq(&self, other: &Self) -> bool {
        self.adjacency == other.adjacency && self.edges == other.edges
    }
}

impl BaseGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a graph by applying a log of primitive edits to an empty graph.
    pub fn replay<'a, I: IntoIterator<Item = &'a Edit>>(log: I) -> Result<Self> {
        let mut g = BaseGraph::new();
        for edit in log {
            g.apply(edit)?;
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.adjacency.contains_key(&v)
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges.contains_key(&e)
    }

    pub fn edge(&self, e: EdgeId) -> Option<&EdgeRecord> {
        self.edges.get(&e)
    }

    pub fn edge_between(&self, a: VertexId, b: VertexId) -> Option<EdgeId> {
        self.adjacency.get(&a)?.get(&b).copied()
    }

    pub fn degree(&self, v: VertexId) -> Option<usize> {
        self.adjacency.get(&v).map(|n| n.len())
    }

    /// Vertices in ascending id order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.adjacency.keys().copied()
    }

    /// Edges in ascending id order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &EdgeRecord)> + '_ {
        self.edges.iter().map(|(id, rec)| (*id, rec))
    }

    /// Neighbors of `v` with the connecting edge, ascending by neighbor id.
    pub fn incident(&self, v: VertexId) -> impl Iterator<Item = (VertexId, EdgeId)> + '_ {
        self.adjacency
            .get(&v)
            .into_iter()
            .flat_map(|n| n.iter().map(|(w, e)| (*w, *e)))
    }

    /// Every primitive edit applied so far, in order.
    pub fn log(&self) -> &[Edit] {
        &self.log
    }

    /// The id [`add_vertex`](Self::add_vertex) would assign next.
    pub fn next_vertex_id(&self) -> VertexId {
        VertexId(self.next_vertex)
    }

    pub fn next_edge_id(&self) -> EdgeId {
        EdgeId(self.next_edge)
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let id = VertexId(self.next_vertex);
        self.insert_vertex(id).expect("fresh vertex id");
        id
    }

    /// Adds a vertex with a caller-chosen id, which must never have been used.
    pub fn insert_vertex(&mut self, id: VertexId) -> Result<()> {
        if self.adjacency.contains_key(&id) || self.retired_vertices.contains(&id) {
            return Err(Error::VertexIdReused(id));
        }
        self.adjacency.insert(id, BTreeMap::new());
        self.next_vertex = self.next_vertex.max(id.0 + 1);
        self.log.push(Edit::AddVertex { id });
        Ok(())
    }

    pub fn add_edge(&mut self, u: VertexId, v: VertexId) -> Result<EdgeId> {
        let id = EdgeId(self.next_edge);
        self.insert_edge(id, u, v, false)?;
        Ok(id)
    }

    pub fn add_directed_edge(&mut self, tail: VertexId, head: VertexId) -> Result<EdgeId> {
        let id = EdgeId(self.next_edge);
        self.insert_edge(id, tail, head, true)?;
        Ok(id)
    }

    pub fn insert_edge(&mut self, id: EdgeId, u: VertexId, v: VertexId, directed: bool) -> Result<()> {
        if u == v {
            return Err(Error::SelfLoop(u));
        }
        if self.edges.contains_key(&id) || self.retired_edges.contains(&id) {
            return Err(Error::EdgeIdReused(id));
        }
        for w in [u, v] {
            if !self.adjacency.contains_key(&w) {
                return Err(Error::UnknownVertex(w));
            }
        }
        if self.adjacency[&u].contains_key(&v) {
            let (a, b) = canonical(u, v);
            return Err(Error::DuplicateEdge(a, b));
        }
        self.adjacency.get_mut(&u).unwrap().insert(v, id);
        self.adjacency.get_mut(&v).unwrap().insert(u, id);
        self.edges.insert(id, EdgeRecord { u, v, directed });
        self.next_edge = self.next_edge.max(id.0 + 1);
        self.log.push(Edit::AddEdge { id, u, v, directed });
        Ok(())
    }

    pub fn remove_edge(&mut self, id: EdgeId) -> Result<EdgeRecord> {
        let rec = self.edges.remove(&id).ok_or(Error::UnknownEdge(id))?;
        self.adjacency.get_mut(&rec.u).unwrap().remove(&rec.v);
        self.adjacency.get_mut(&rec.v).unwrap().remove(&rec.u);
        self.retired_edges.insert(id);
        self.log.push(Edit::RemoveEdge { id });
        Ok(rec)
    }

    /// Removes every incident edge (in ascending neighbor order), then the
    /// vertex. Returns the primitive edits performed.
    pub fn remove_vertex(&mut self, id: VertexId) -> Result<Vec<Edit>> {
        let incident: Vec<EdgeId> = self
            .adjacency
            .get(&id)
            .ok_or(Error::UnknownVertex(id))?
            .values()
            .copied()
            .collect();
        let mut done = Vec::with_capacity(incident.len() + 1);
        for e in incident {
            self.remove_edge(e)?;
            done.push(Edit::RemoveEdge { id: e });
        }
        self.remove_isolated_vertex(id)?;
        done.push(Edit::RemoveVertex { id });
        Ok(done)
    }

    fn remove_isolated_vertex(&mut self, id: VertexId) -> Result<()> {
        match self.adjacency.get(&id) {
            None => return Err(Error::UnknownVertex(id)),
            Some(n) if !n.is_empty() => {
                return Err(Error::Structure(format!("vertex {id} still has {} edges", n.len())))
            }
            Some(_) => {}
        }
        self.adjacency.remove(&id);
        self.retired_vertices.insert(id);
        self.log.push(Edit::RemoveVertex { id });
        Ok(())
    }

    /// Splits an edit into the primitive edits it implies, validating against
    /// the current graph without modifying it.
    pub fn expand(&self, edit: &Edit) -> Result<Vec<Edit>> {
        match edit {
            Edit::RemoveVertex { id } => {
                let n = self.adjacency.get(id).ok_or(Error::UnknownVertex(*id))?;
                let mut out: Vec<Edit> = n.values().map(|e| Edit::RemoveEdge { id: *e }).collect();
                out.push(edit.clone());
                Ok(out)
            }
            _ => Ok(vec![edit.clone()]),
        }
    }

    /// Applies a primitive edit. `RemoveVertex` on a vertex with edges is
    /// expanded first. Returns the primitive edits actually performed.
    pub fn apply(&mut self, edit: &Edit) -> Result<Vec<Edit>> {
        match *edit {
            Edit::AddVertex { id } => self.insert_vertex(id).map(|_| vec![edit.clone()]),
            Edit::AddEdge { id, u, v, directed } => {
                self.insert_edge(id, u, v, directed).map(|_| vec![edit.clone()])
            }
            Edit::RemoveEdge { id } => self.remove_edge(id).map(|_| vec![edit.clone()]),
            Edit::RemoveVertex { id } => self.remove_vertex(id),
        }
    }

    /// Checks `degree(v) == |adj(v)|`, adjacency symmetry and the handshake
    /// identity. Used by tests.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        let mut degree_sum = 0;
        for (v, n) in &self.adjacency {
            degree_sum += n.len();
            for (w, e) in n {
                if v == w {
                    return Err(format!("self-loop at {v}"));
                }
                let rec = self.edges.get(e).ok_or_else(|| format!("dangling edge {e}"))?;
                if rec.key() != canonical(*v, *w) {
                    return Err(format!("edge {e} endpoints disagree with adjacency"));
                }
                if self.adjacency.get(w).and_then(|m| m.get(v)) != Some(e) {
                    return Err(format!("asymmetric adjacency {v}-{w}"));
                }
            }
        }
        if degree_sum != 2 * self.edges.len() {
            return Err(format!("degree sum {degree_sum} != 2|E| = {}", 2 * self.edges.len()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_vertex_fresh_ids() {
        let mut g = BaseGraph::new();
        let a = g.add_vertex();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.edge_count(), 0);
        let b = g.add_vertex();
        assert_ne!(a, b);
    }

    #[test]
    fn many_vertices_all_degree_zero() {
        let mut g = BaseGraph::new();
        let ids: Vec<_> = (0..100_000).map(|_| g.add_vertex()).collect();
        let distinct: HashSet<_> = ids.iter().collect();
        assert_eq!(distinct.len(), 100_000);
        assert_eq!(g.vertex_count(), 100_000);
        assert!(ids.iter().all(|v| g.degree(*v) == Some(0)));
    }

    #[test]
    fn add_edge_updates_degrees() {
        let mut g = BaseGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        g.add_edge(a, b).unwrap();
        assert_eq!((g.degree(a), g.degree(b)), (Some(1), Some(1)));
    }

    #[test]
    fn rejects_self_loop_and_duplicates() {
        let mut g = BaseGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        assert!(matches!(g.add_edge(a, a), Err(Error::SelfLoop(_))));
        g.add_edge(a, b).unwrap();
        assert!(matches!(g.add_edge(b, a), Err(Error::DuplicateEdge(..))));
        assert!(matches!(g.add_edge(a, VertexId(99)), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn triangle_minus_vertex_is_an_edge() {
        let mut g = BaseGraph::new();
        let v: Vec<_> = (0..3).map(|_| g.add_vertex()).collect();
        g.add_edge(v[0], v[1]).unwrap();
        g.add_edge(v[1], v[2]).unwrap();
        g.add_edge(v[0], v[2]).unwrap();
        let done = g.remove_vertex(v[0]).unwrap();
        assert_eq!(done.len(), 3);
        assert!(matches!(done[2], Edit::RemoveVertex { .. }));
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(g.edge_between(v[1], v[2]).is_some());
        g.check_consistency().unwrap();
    }

    #[test]
    fn double_remove_errors() {
        let mut g = BaseGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let e = g.add_edge(a, b).unwrap();
        g.remove_edge(e).unwrap();
        assert!(matches!(g.remove_edge(e), Err(Error::UnknownEdge(_))));
        assert!(matches!(g.remove_vertex(VertexId(42)), Err(Error::UnknownVertex(_))));
    }

    #[test]
    fn ids_are_never_reused() {
        let mut g = BaseGraph::new();
        let a = g.add_vertex();
        g.remove_vertex(a).unwrap();
        assert!(matches!(g.insert_vertex(a), Err(Error::VertexIdReused(_))));
        let b = g.add_vertex();
        assert!(b > a);
    }

    #[test]
    fn event_line_format() {
        let src = r#"{"op":"add_vertex","id":7}
{"op":"add_vertex","id":3,"t":0.5}

{"op":"add_edge","id":12,"u":7,"v":3}
{"op":"remove_edge","id":12}
{"op":"remove_vertex","id":7}
"#;
        let events = read_events(src.as_bytes()).unwrap();
        assert_eq!(events.len(), 5);
        assert_eq!(events[1].t, Some(0.5));
        assert_eq!(
            events[2].edit,
            Edit::AddEdge { id: EdgeId(12), u: VertexId(7), v: VertexId(3), directed: false }
        );
        let mut buf = Vec::new();
        write_events(&mut buf, &events[..3]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().collect::<Vec<_>>(),
            [
                r#"{"op":"add_vertex","id":7}"#,
                r#"{"op":"add_vertex","id":3,"t":0.5}"#,
                r#"{"op":"add_edge","id":12,"u":7,"v":3}"#,
            ]
        );
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let src = "{\"op\":\"add_vertex\",\"id\":1}\n{\"op\":\"explode\"}\n";
        match read_events(src.as_bytes()) {
            Err(Error::MalformedEvent { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
