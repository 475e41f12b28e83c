//! Textual generator specs: `path:8`, `random:n=12,p=0.3,seed=7`,
//! `uniform:max=100,seed=3`, `explicit:9,0,4`, `point:0,100,0`,
//! `staircase:8`. A graph spec is a topology optionally joined to a load
//! spec with `+`.

use dealbal::graph::{generate_loads, LoadInit, Topology};
use dealbal::{Graph, GraphError, Load, LoadVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("bad spec '{spec}': {message}")]
    Bad { spec: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadSpec {
    Uniform { max: u64, seed: u64 },
    /// Values kept as text until the scalar type is known.
    Explicit(Vec<String>),
    Point { node: usize, amount: String, base: String },
    /// `0, 1, 1, 2, 2, ..., n-1, n-1, n` on `2n` nodes.
    Staircase { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSpec {
    pub topology: Topology,
    pub loads: Option<LoadSpec>,
}

struct Args<'a> {
    spec: &'a str,
    positional: Vec<&'a str>,
    named: Vec<(&'a str, &'a str)>,
}

impl<'a> Args<'a> {
    fn split(spec: &'a str) -> (&'a str, Self) {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut positional = Vec::new();
        let mut named = Vec::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((k, v)) => named.push((k.trim(), v.trim())),
                None => positional.push(item),
            }
        }
        (name.trim(), Args { spec, positional, named })
    }

    fn err(&self, message: impl Into<String>) -> SpecError {
        SpecError::Bad { spec: self.spec.to_string(), message: message.into() }
    }

    /// Value of `key`, given by name or at position `pos`.
    fn get(&self, key: &str, pos: usize) -> Option<&'a str> {
        self.named
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .or_else(|| self.positional.get(pos).copied())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, pos: usize, default: Option<T>) -> Result<T, SpecError> {
        match self.get(key, pos) {
            Some(text) => text.parse().map_err(|_| self.err(format!("bad value '{text}' for {key}"))),
            None => default.ok_or_else(|| self.err(format!("missing {key}"))),
        }
    }

    fn allow(&self, keys: &[&str]) -> Result<(), SpecError> {
        if let Some((k, _)) = self.named.iter().find(|(k, _)| !keys.contains(k)) {
            return Err(self.err(format!("unknown key '{k}'")));
        }
        if self.positional.len() > keys.len() {
            return Err(self.err("too many arguments"));
        }
        Ok(())
    }
}

pub fn parse_topology(spec: &str) -> Result<Topology, SpecError> {
    let (name, args) = Args::split(spec);
    match name {
        "path" | "cycle" | "star" => {
            args.allow(&["n"])?;
            let n = args.parse("n", 0, None)?;
            Ok(match name {
                "path" => Topology::Path(n),
                "cycle" => Topology::Cycle(n),
                _ => Topology::Star(n),
            })
        }
        "random" => {
            args.allow(&["n", "p", "seed"])?;
            let edge_prob: f64 = args.parse("p", 1, None)?;
            if !(0.0..=1.0).contains(&edge_prob) {
                return Err(args.err("p must lie in [0, 1]"));
            }
            Ok(Topology::RandomConnected { n: args.parse("n", 0, None)?, edge_prob, seed: args.parse("seed", 2, Some(0))? })
        }
        other => Err(args.err(format!("unknown topology '{other}'"))),
    }
}

pub fn parse_loads(spec: &str) -> Result<LoadSpec, SpecError> {
    let (name, args) = Args::split(spec);
    match name {
        "uniform" => {
            args.allow(&["max", "seed"])?;
            Ok(LoadSpec::Uniform { max: args.parse("max", 0, None)?, seed: args.parse("seed", 1, Some(0))? })
        }
        "explicit" => {
            if !args.named.is_empty() {
                return Err(args.err("explicit loads take plain values"));
            }
            Ok(LoadSpec::Explicit(args.positional.iter().map(|s| s.to_string()).collect()))
        }
        "point" => {
            args.allow(&["node", "amount", "base"])?;
            Ok(LoadSpec::Point {
                node: args.parse("node", 0, None)?,
                amount: args.get("amount", 1).ok_or_else(|| args.err("missing amount"))?.to_string(),
                base: args.get("base", 2).unwrap_or("0").to_string(),
            })
        }
        "staircase" => {
            args.allow(&["n"])?;
            Ok(LoadSpec::Staircase { n: args.parse("n", 0, None)? })
        }
        other => Err(args.err(format!("unknown load spec '{other}'"))),
    }
}

pub fn parse_graph_spec(spec: &str) -> Result<GraphSpec, SpecError> {
    let (topo, loads) = match spec.split_once('+') {
        Some((t, l)) => (t, Some(parse_loads(l.trim())?)),
        None => (spec, None),
    };
    Ok(GraphSpec { topology: parse_topology(topo.trim())?, loads })
}

fn scalar<S: Load>(text: &str) -> Result<S, SpecError> {
    S::parse_load(text).ok_or_else(|| SpecError::Bad { spec: text.to_string(), message: "not a load value".into() })
}

pub fn build_loads<S: Load>(graph: &Graph, spec: &LoadSpec) -> Result<LoadVector<S>, SpecError> {
    let init = match spec {
        LoadSpec::Uniform { max, seed } => LoadInit::Uniform { max: *max, seed: *seed },
        LoadSpec::Explicit(values) => LoadInit::Explicit(values.iter().map(|v| scalar(v)).collect::<Result<_, _>>()?),
        LoadSpec::Point { node, amount, base } => LoadInit::PointMass { node: *node, amount: scalar(amount)?, base: scalar(base)? },
        LoadSpec::Staircase { n } => {
            let mut values = vec![S::from_units(0)];
            for i in 1..*n as i64 {
                values.extend([S::from_units(i), S::from_units(i)]);
            }
            values.push(S::from_units(*n as i64));
            LoadInit::Explicit(values)
        }
    };
    Ok(generate_loads(graph, &init)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dealbal::graph::generate_topology;

    #[test]
    fn topologies() {
        assert_eq!(parse_topology("path:8").unwrap(), Topology::Path(8));
        assert_eq!(
            parse_topology("random:n=5,p=0.5,seed=2").unwrap(),
            Topology::RandomConnected { n: 5, edge_prob: 0.5, seed: 2 }
        );
        assert_eq!(
            parse_topology("random:6,0.2").unwrap(),
            Topology::RandomConnected { n: 6, edge_prob: 0.2, seed: 0 }
        );
        assert!(parse_topology("grid:3").is_err());
        assert!(parse_topology("path:x").is_err());
        assert!(parse_topology("path:n=3,m=2").is_err());
        assert!(parse_topology("random:4,1.5").is_err());
    }

    #[test]
    fn combined_spec() {
        let g = parse_graph_spec("star:4 + point:0,16").unwrap();
        assert_eq!(g.topology, Topology::Star(4));
        let graph = generate_topology(&g.topology).unwrap();
        let loads: LoadVector<i64> = build_loads(&graph, g.loads.as_ref().unwrap()).unwrap();
        assert_eq!(loads.as_slice(), &[16, 0, 0, 0]);
    }

    #[test]
    fn staircase_and_explicit() {
        let graph = generate_topology(&Topology::Path(6)).unwrap();
        let loads: LoadVector<i64> = build_loads(&graph, &LoadSpec::Staircase { n: 3 }).unwrap();
        assert_eq!(loads.as_slice(), &[0, 1, 1, 2, 2, 3]);
        let graph = generate_topology(&Topology::Path(3)).unwrap();
        let loads: LoadVector<dealbal::Rational> =
            build_loads(&graph, &parse_loads("explicit:1/2,0,4").unwrap()).unwrap();
        assert_eq!(loads.as_slice()[0], dealbal::Rational::new(1.into(), 2.into()));
        assert!(build_loads::<i64>(&graph, &parse_loads("explicit:1,2").unwrap()).is_err());
    }
}
