//! Line-oriented graph files.
//!
//! ```text
//! # comment
//! n 3
//! node 0 9
//! node 1 0
//! node 2 4
//! edge 0 1
//! edge 1 2
//! ```
//!
//! Loads are integers in discrete mode and `p/q` or integers in continuous
//! mode. Node ids must cover `0..n` exactly once.

use std::fmt::Write as _;
use std::path::Path;

use super::{Graph, GraphError, LoadVector};
use crate::scalar::Load;

/// Syntactic content of a graph file, before topology validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFile<S> {
    pub node_count: usize,
    pub loads: Vec<S>,
    pub edges: Vec<(usize, usize)>,
}

impl<S: Load> GraphFile<S> {
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut node_count: Option<usize> = None;
        let mut loads: Vec<Option<S>> = Vec::new();
        let mut edges = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| GraphError::Parse {
                line: line_no,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["n", count] => {
                    if node_count.is_some() {
                        return Err(parse_err("node count declared twice".into()));
                    }
                    let count: usize = count
                        .parse()
                        .map_err(|_| parse_err(format!("bad node count '{count}'")))?;
                    node_count = Some(count);
                    loads = vec![None; count];
                }
                ["node", id, load] => {
                    let n = node_count.ok_or_else(|| parse_err("'n' must come first".into()))?;
                    let id = parse_id(id).map_err(parse_err)?;
                    let load = S::parse_load(load)
                        .ok_or_else(|| parse_err(format!("bad load '{load}'")))?;
                    if id >= n {
                        return Err(GraphError::validation(format!(
                            "node id {id} outside 0..{n}"
                        )));
                    }
                    if loads[id].replace(load).is_some() {
                        return Err(GraphError::validation(format!("node {id} declared twice")));
                    }
                }
                ["edge", u, v] => {
                    if node_count.is_none() {
                        return Err(parse_err("'n' must come first".into()));
                    }
                    let u = parse_id(u).map_err(parse_err)?;
                    let v = parse_id(v).map_err(parse_err)?;
                    edges.push((u, v));
                }
                _ => return Err(parse_err(format!("unrecognized line '{line}'"))),
            }
        }

        let node_count = node_count.ok_or(GraphError::Parse {
            line: 0,
            message: "missing 'n <count>' line".into(),
        })?;
        let loads = loads
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| GraphError::validation(format!("node {i} has no load line"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GraphFile {
            node_count,
            loads,
            edges,
        })
    }

    pub fn into_graph(self) -> Result<(Graph, LoadVector<S>), GraphError> {
        let graph = Graph::new(self.node_count, &self.edges)?;
        let loads = LoadVector::for_graph(&graph, self.loads)?;
        Ok((graph, loads))
    }
}

fn parse_id(text: &str) -> Result<usize, String> {
    text.parse().map_err(|_| format!("bad node id '{text}'"))
}

/// Parses and validates graph file text.
pub fn parse_graph<S: Load>(text: &str) -> Result<(Graph, LoadVector<S>), GraphError> {
    GraphFile::parse(text)?.into_graph()
}

/// Reads a graph file from disk.
pub fn load_graph<S: Load>(path: impl AsRef<Path>) -> Result<(Graph, LoadVector<S>), GraphError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_graph(&text)
}

pub fn serialize_graph<S: Load>(graph: &Graph, loads: &LoadVector<S>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n {}", graph.node_count());
    for (i, load) in loads.iter().enumerate() {
        let _ = writeln!(out, "node {i} {load}");
    }
    for (u, v) in graph.edges() {
        let _ = writeln!(out, "edge {u} {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;
    use crate::graph::NodeId;

    #[test]
    fn smallest_connected_graph() {
        let (g, loads) = parse_graph::<i64>("n 2\nnode 0 10\nnode 1 0\nedge 0 1\n").unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(loads.as_slice(), &[10, 0]);
        assert_eq!(g.diameter(), 1);
    }

    #[test]
    fn staircase_path_fixture() {
        // 0,1,1,2,2,...,n-1,n-1,n on a 2n-node path, n = 5
        let n = 5;
        let mut values = vec![0i64];
        for k in 1..n {
            values.extend([k, k]);
        }
        values.push(n);
        let mut text = format!("n {}\n", values.len());
        for (i, v) in values.iter().enumerate() {
            text += &format!("node {i} {v}\n");
        }
        for i in 1..values.len() {
            text += &format!("edge {} {i}\n", i - 1);
        }
        let (g, loads) = parse_graph::<i64>(&text).unwrap();
        assert_eq!(g.node_count(), 2 * n as usize);
        assert_eq!(loads.max().unwrap() - loads.min().unwrap(), n);
    }

    #[test]
    fn self_loop_is_a_validation_error() {
        let err = parse_graph::<i64>("n 1\nnode 0 1\nedge 0 0\n").unwrap_err();
        assert!(matches!(err, GraphError::Validation(_)), "{err:?}");
    }

    #[test]
    fn malformed_lines_are_parse_errors() {
        for text in [
            "n two\n",
            "node 0 1\n",
            "n 2\nnode 0 x\nnode 1 0\nedge 0 1\n",
            "n 2\nnode 0 1\nnode 1 0\nedge 0\n",
            "n 2\nvertex 0\n",
            "",
        ] {
            assert!(
                matches!(parse_graph::<i64>(text), Err(GraphError::Parse { .. })),
                "{text:?}"
            );
        }
    }

    #[test]
    fn validation_failures() {
        let cases = [
            "n 3\nnode 0 1\nnode 1 1\nnode 2 1\nedge 0 1\n",
            "n 2\nnode 0 -1\nnode 1 0\nedge 0 1\n",
            "n 2\nnode 0 1\nnode 1 0\nedge 0 1\nedge 1 0\n",
            "n 2\nnode 0 1\nedge 0 1\n",
            "n 2\nnode 0 1\nnode 0 2\nnode 1 0\nedge 0 1\n",
            "n 2\nnode 0 1\nnode 2 0\nedge 0 1\n",
        ];
        for text in cases {
            assert!(
                matches!(parse_graph::<i64>(text), Err(GraphError::Validation(_))),
                "{text:?}"
            );
        }
    }

    #[test]
    fn rational_loads_and_comments() {
        let text = "# two nodes\nn 2 # count\nnode 0 7/2\nnode 1 1/2\n\nedge 0 1\n";
        let (g, loads) = parse_graph::<BigRational>(text).unwrap();
        assert_eq!(loads.total(), BigRational::from_integer(4.into()));
        assert!(g.has_edge(NodeId(0), NodeId(1)));
        let again = serialize_graph(&g, &loads);
        assert!(again.contains("node 0 7/2"));
    }
}
