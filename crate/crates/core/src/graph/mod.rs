//! Static undirected topology and per-node load state.

mod generate;
mod io;

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::scalar::Load;

pub use generate::{generate, generate_loads, generate_topology, LoadInit, Topology};
pub use io::{load_graph, parse_graph, serialize_graph, GraphFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Validation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl GraphError {
    pub(crate) fn validation(message: impl Into<String>) -> Self {
        GraphError::Validation(message.into())
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        GraphError::InvalidParameter(message.into())
    }
}

/// Connected, simple, undirected graph. Adjacency lists are sorted by id and
/// the diameter is computed once at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
    diameter: usize,
}

impl Graph {
    /// Validates and builds a graph from an edge list.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::validation("graph must have at least one node"));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for &(u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(GraphError::validation(format!(
                    "edge {u}-{v} references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(GraphError::validation(format!("self-loop on node {u}")));
            }
            adjacency[u].push(NodeId(v));
            adjacency[v].push(NodeId(u));
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(GraphError::validation(format!(
                    "duplicate edge {u}-{}",
                    w[0]
                )));
            }
        }
        let mut graph = Graph {
            adjacency,
            edge_count: edges.len(),
            diameter: 0,
        };
        let diameter = graph
            .eccentricities()
            .into_iter()
            .try_fold(0usize, |acc, ecc| ecc.map(|e| acc.max(e)))
            .ok_or_else(|| GraphError::validation("graph is disconnected"))?;
        graph.diameter = diameter;
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.adjacency.len()).map(NodeId)
    }

    /// Neighbors of `u` in ascending id order.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u.0]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u.0].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u.0].binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .filter(move |v| v.0 > u)
                .map(move |&v| (NodeId(u), v))
        })
    }

    /// BFS distances from `source`; `None` marks unreachable nodes.
    pub fn distances_from(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source.0] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u.0].expect("queued nodes have a distance");
            for &v in self.neighbors(u) {
                if dist[v.0].is_none() {
                    dist[v.0] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    fn eccentricities(&self) -> Vec<Option<usize>> {
        self.nodes()
            .map(|s| {
                self.distances_from(s)
                    .into_iter()
                    .try_fold(0usize, |acc, d| d.map(|d| acc.max(d)))
            })
            .collect()
    }
}

/// Exact diameter (maximum BFS eccentricity). Cached at construction.
pub fn diameter(graph: &Graph) -> usize {
    graph.diameter()
}

/// Per-node loads. Every entry is non-negative.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoadVector<S> {
    values: Vec<S>,
}

impl<S: Load> LoadVector<S> {
    pub fn new(values: Vec<S>) -> Result<Self, GraphError> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| v.is_negative()) {
            return Err(GraphError::validation(format!(
                "node {i} has negative load {v}"
            )));
        }
        Ok(LoadVector { values })
    }

    /// Checks that the vector fits `graph`.
    pub fn for_graph(graph: &Graph, values: Vec<S>) -> Result<Self, GraphError> {
        if values.len() != graph.node_count() {
            return Err(GraphError::validation(format!(
                "{} loads given for {} nodes",
                values.len(),
                graph.node_count()
            )));
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: NodeId) -> &S {
        &self.values[u.0]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.values.iter()
    }

    pub fn total(&self) -> S {
        self.values.iter().fold(S::zero(), |acc, v| acc + v.clone())
    }

    pub fn max(&self) -> Option<&S> {
        self.values.iter().max()
    }

    pub fn min(&self) -> Option<&S> {
        self.values.iter().min()
    }

    /// Applies net per-node changes. Fails if any load would go negative.
    pub(crate) fn with_deltas(&self, deltas: &[S]) -> Result<Self, GraphError> {
        let values = self
            .values
            .iter()
            .zip(deltas)
            .map(|(v, d)| v.clone() + d.clone())
            .collect();
        Self::new(values)
    }
}

impl<S> std::ops::Index<NodeId> for LoadVector<S> {
    type Output = S;

    fn index(&self, u: NodeId) -> &S {
        &self.values[u.0]
    }
}

impl<S: Load> LoadVector<S> {
    pub(crate) fn zeros(len: usize) -> Vec<S> {
        vec![S::zero(); len]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges).unwrap()
    }

    #[test]
    fn adjacency_sorted_and_symmetric() {
        let g = Graph::new(4, &[(2, 0), (0, 1), (3, 0), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(NodeId(0)), &[NodeId(1), NodeId(2), NodeId(3)]);
        for (u, v) in g.edges() {
            assert!(g.has_edge(v, u));
        }
        assert_eq!(g.edges().count(), 4);
    }

    #[test]
    fn rejects_bad_topologies() {
        assert!(matches!(
            Graph::new(2, &[(0, 0)]),
            Err(GraphError::Validation(_))
        ));
        assert!(Graph::new(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(3, &[(0, 1)]).is_err());
        assert!(Graph::new(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn single_node_graph_has_zero_diameter() {
        assert_eq!(Graph::new(1, &[]).unwrap().diameter(), 0);
    }

    #[test]
    fn path_diameter() {
        assert_eq!(diameter(&path(5)), 4);
        assert_eq!(diameter(&path(2)), 1);
    }

    #[test]
    fn negative_loads_rejected() {
        assert!(LoadVector::new(vec![1i64, -1]).is_err());
        let lv = LoadVector::new(vec![3i64, 4]).unwrap();
        assert_eq!(lv.total(), 7);
        assert!(lv.with_deltas(&[-4, 4]).is_err());
    }
}
