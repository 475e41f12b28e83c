//! Deterministic topology and load generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, GraphError, LoadVector};
use crate::scalar::Load;

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    Path(usize),
    Cycle(usize),
    /// Node 0 is the center.
    Star(usize),
    /// G(n, p) followed by deterministic augmentation until connected.
    RandomConnected { n: usize, edge_prob: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadInit<S> {
    /// Independent integers in `0..=max`.
    Uniform { max: u64, seed: u64 },
    Explicit(Vec<S>),
    PointMass { node: usize, amount: S, base: S },
}

pub fn generate_topology(kind: &Topology) -> Result<Graph, GraphError> {
    match *kind {
        Topology::Path(n) => {
            require_nodes(n, 2)?;
            let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            Graph::new(n, &edges)
        }
        Topology::Cycle(n) => {
            require_nodes(n, 3)?;
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            edges.push((n - 1, 0));
            Graph::new(n, &edges)
        }
        Topology::Star(n) => {
            require_nodes(n, 2)?;
            let edges: Vec<_> = (1..n).map(|i| (0, i)).collect();
            Graph::new(n, &edges)
        }
        Topology::RandomConnected { n, edge_prob, seed } => {
            require_nodes(n, 2)?;
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(GraphError::invalid(format!(
                    "edge probability {edge_prob} outside [0, 1]"
                )));
            }
            Graph::new(n, &random_connected_edges(n, edge_prob, seed))
        }
    }
}

fn require_nodes(n: usize, min: usize) -> Result<(), GraphError> {
    if n < min {
        return Err(GraphError::invalid(format!("need at least {min} nodes, got {n}")));
    }
    Ok(())
}

fn random_connected_edges(n: usize, edge_prob: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(edge_prob) {
                edges.push((u, v));
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                parent[ru] = rv;
            }
        }
    }

    // Join every remaining component to the component of node 0 through a
    // random member on each side.
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for u in 0..n {
        let r = find(&mut parent, u);
        if root_slot[r] == usize::MAX {
            root_slot[r] = components.len();
            components.push(Vec::new());
        }
        components[root_slot[r]].push(u);
    }
    let mut joined: Vec<usize> = components[0].clone();
    for comp in &components[1..] {
        let a = joined[rng.random_range(0..joined.len())];
        let b = comp[rng.random_range(0..comp.len())];
        edges.push((a.min(b), a.max(b)));
        joined.extend_from_slice(comp);
    }
    edges
}

pub fn generate_loads<S: Load>(
    graph: &Graph,
    init: &LoadInit<S>,
) -> Result<LoadVector<S>, GraphError> {
    let n = graph.node_count();
    let values = match init {
        LoadInit::Uniform { max, seed } => {
            let max = i64::try_from(*max)
                .map_err(|_| GraphError::invalid(format!("uniform max {max} too large")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..n)
                .map(|_| S::from_units(rng.random_range(0..=max)))
                .collect()
        }
        LoadInit::Explicit(values) => values.clone(),
        LoadInit::PointMass { node, amount, base } => {
            if *node >= n {
                return Err(GraphError::invalid(format!("point mass node {node} outside 0..{n}")));
            }
            let mut values = vec![base.clone(); n];
            values[*node] = amount.clone();
            values
        }
    };
    LoadVector::for_graph(graph, values).map_err(|e| match e {
        GraphError::Validation(m) => GraphError::InvalidParameter(m),
        other => other,
    })
}

pub fn generate<S: Load>(
    kind: &Topology,
    init: &LoadInit<S>,
) -> Result<(Graph, LoadVector<S>), GraphError> {
    let graph = generate_topology(kind)?;
    let loads = generate_loads(&graph, init)?;
    Ok((graph, loads))
}
