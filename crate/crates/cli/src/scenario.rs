//! Scenario files: `[section]` headers, `key = value` lines, `#` comments.
//!
//! ```text
//! [algorithm]
//! kind = discrete
//!
//! [graph]
//! generator = path:3
//! loads = explicit:9,0,4
//!
//! [run]
//! max_rounds = 100
//! checks = monotonic, matching_degree, conservation
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use dealbal::asynchronous::SchedulePolicy;
use dealbal::graph::Topology;
use dealbal::stab::FaultModel;
use dealbal::{Load, Rational};
use thiserror::Error;

use crate::spec::{parse_loads, parse_topology, LoadSpec, SpecError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("[{section}] {key}: {message}")]
    Value { section: String, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// Sections and keys in file order, before interpretation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioDoc {
    sections: Vec<(String, Vec<(String, String)>)>,
}

const SECTIONS: [&str; 3] = ["algorithm", "graph", "run"];

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut doc = ScenarioDoc::default();
        let mut current: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let syntax = |message: String| ScenarioError::Syntax { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| syntax("unclosed section header".into()))?.trim();
                if !SECTIONS.contains(&name) {
                    return Err(syntax(format!("unknown section [{name}]")));
                }
                if doc.sections.iter().any(|(s, _)| s == name) {
                    return Err(syntax(format!("section [{name}] repeated")));
                }
                doc.sections.push((name.to_string(), Vec::new()));
                current = Some(doc.sections.len() - 1);
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| syntax(format!("expected key = value, got '{line}'")))?;
            let i = current.ok_or_else(|| syntax("key outside any section".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(syntax("empty key".into()));
            }
            let entries = &mut doc.sections[i].1;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(syntax(format!("key '{key}' repeated")));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, entries)| entries.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    /// Sets or replaces a value, creating the section if needed.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let i = match self.sections.iter().position(|(s, _)| s == section) {
            Some(i) => i,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[i].1;
        match entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => entries.push((key.to_string(), value.to_string())),
        }
    }

    fn keys<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.sections
            .iter()
            .filter(move |(s, _)| s == section)
            .flat_map(|(_, e)| e.iter().map(|(k, _)| k.as_str()))
    }
}

impl fmt::Display for ScenarioDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (section, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            writeln!(f, "[{section}]")?;
            for (k, v) in entries {
                writeln!(f, "{k} = {v}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Check {
    Monotonic,
    Fairness,
    Lemma2,
    Lemma6,
    MatchingDegree,
    Conservation,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Monotonic,
        Check::Fairness,
        Check::Lemma2,
        Check::Lemma6,
        Check::MatchingDegree,
        Check::Conservation,
    ];

    /// Bit in the trace `checks` column.
    pub fn bit(self) -> u32 {
        1 << (self as u32)
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::Monotonic => "monotonic",
            Check::Fairness => "fairness",
            Check::Lemma2 => "lemma2",
            Check::Lemma6 => "lemma6",
            Check::MatchingDegree => "matching_degree",
            Check::Conservation => "conservation",
        }
    }

    pub fn parse(text: &str) -> Option<Check> {
        Check::ALL.into_iter().find(|c| c.name() == text.trim())
    }
}

pub fn parse_checks(text: &str) -> Result<BTreeSet<Check>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "none")
        .map(|s| Check::parse(s).ok_or_else(|| format!("unknown check '{s}'")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    Continuous { eps: Rational },
    Discrete,
    Multi,
    Diffusion { alpha: Rational, eps: Rational },
    Async { policy: SchedulePolicy },
    SelfStab { policy: SchedulePolicy, k: usize, faults: FaultModel },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmSpec::Continuous { .. } => "continuous",
            AlgorithmSpec::Discrete => "discrete",
            AlgorithmSpec::Multi => "multi",
            AlgorithmSpec::Diffusion { .. } => "diffusion",
            AlgorithmSpec::Async { .. } => "async",
            AlgorithmSpec::SelfStab { .. } => "selfstab",
        }
    }

    pub fn supports(&self, check: Check) -> bool {
        use AlgorithmSpec::*;
        match check {
            Check::Monotonic | Check::Conservation => true,
            Check::Fairness | Check::MatchingDegree => matches!(self, Continuous { .. } | Discrete),
            Check::Lemma2 => matches!(self, Continuous { .. }),
            Check::Lemma6 => matches!(self, Discrete),
        }
    }

    pub fn is_stepwise(&self) -> bool {
        matches!(self, AlgorithmSpec::Async { .. } | AlgorithmSpec::SelfStab { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File(PathBuf),
    Generator(Topology),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub algorithm: AlgorithmSpec,
    pub graph: GraphSource,
    /// Required with a generator; overrides the file's loads otherwise.
    pub loads: Option<LoadSpec>,
    pub max_rounds: usize,
    pub max_steps: u64,
    pub checks: BTreeSet<Check>,
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Trace every `stride`-th step (stepwise engines).
    pub stride: u64,
}

pub const DEFAULT_MAX_ROUNDS: usize = 100_000;
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;
pub const DEFAULT_K: usize = 3;

const ALGORITHM_KEYS: [&str; 9] = ["kind", "eps", "alpha", "policy", "seed", "k", "fault_seed", "garbage", "corrupt"];
const GRAPH_KEYS: [&str; 3] = ["file", "generator", "loads"];
const RUN_KEYS: [&str; 6] = ["max_rounds", "max_steps", "checks", "trace", "summary", "stride"];

struct Reader<'a> {
    doc: &'a ScenarioDoc,
}

impl Reader<'_> {
    fn err(section: &str, key: &str, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Value { section: section.into(), key: key.into(), message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, ScenarioError> {
        match self.doc.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Self::err(section, key, format!("bad value '{v}'"))),
        }
    }

    fn rational(&self, key: &str, default: &str) -> Result<Rational, ScenarioError> {
        let text = self.doc.get("algorithm", key).unwrap_or(default);
        Rational::parse_load(text).ok_or_else(|| Self::err("algorithm", key, format!("bad number '{text}'")))
    }

    fn policy(&self) -> Result<SchedulePolicy, ScenarioError> {
        let seed = self.parse("algorithm", "seed", 0u64)?;
        match self.doc.get("algorithm", "policy").unwrap_or("round-robin") {
            "round-robin" => Ok(SchedulePolicy::RoundRobinFair),
            "random" => Ok(SchedulePolicy::RandomFair { seed }),
            "adversarial" => Ok(SchedulePolicy::AdversarialLongestQueue { seed }),
            other => Err(Self::err("algorithm", "policy", format!("unknown policy '{other}'"))),
        }
    }
}

impl Scenario {
    /// Interprets a document. Relative graph files resolve against `base_dir`.
    pub fn from_doc(doc: &ScenarioDoc, base_dir: &Path) -> Result<Self, ScenarioError> {
        for (section, allowed) in [("algorithm", &ALGORITHM_KEYS[..]), ("graph", &GRAPH_KEYS[..]), ("run", &RUN_KEYS[..])] {
            if let Some(k) = doc.keys(section).find(|k| !allowed.contains(k)) {
                return Err(Reader::err(section, k, "unknown key"));
            }
        }
        let r = Reader { doc };
        let kind = doc
            .get("algorithm", "kind")
            .ok_or_else(|| ScenarioError::Invalid("[algorithm] kind is required".into()))?;
        let algorithm = match kind {
            "continuous" => AlgorithmSpec::Continuous { eps: r.rational("eps", "1")? },
            "discrete" => AlgorithmSpec::Discrete,
            "multi" => AlgorithmSpec::Multi,
            "diffusion" => AlgorithmSpec::Diffusion { alpha: r.rational("alpha", "1/2")?, eps: r.rational("eps", "1")? },
            "async" => AlgorithmSpec::Async { policy: r.policy()? },
            "selfstab" => {
                let k = r.parse("algorithm", "k", DEFAULT_K)?;
                let corrupt = doc.get("algorithm", "corrupt").unwrap_or("none");
                let mut faults = FaultModel {
                    seed: r.parse("algorithm", "fault_seed", 0u64)?,
                    garbage: r.parse("algorithm", "garbage", 0usize)?,
                    ..Default::default()
                };
                for part in corrupt.split(',').map(str::trim).filter(|p| !p.is_empty() && *p != "none") {
                    match part {
                        "nodes" => faults.corrupt_nodes = true,
                        "links" => faults.corrupt_links = true,
                        other => return Err(Reader::err("algorithm", "corrupt", format!("unknown target '{other}'"))),
                    }
                }
                if faults.garbage > k {
                    return Err(Reader::err("algorithm", "garbage", format!("exceeds the channel bound k = {k}")));
                }
                AlgorithmSpec::SelfStab { policy: r.policy()?, k, faults }
            }
            other => return Err(Reader::err("algorithm", "kind", format!("unknown algorithm '{other}'"))),
        };
        let stray: &[&str] = match &algorithm {
            AlgorithmSpec::Continuous { .. } => &["alpha", "policy", "seed", "k", "fault_seed", "garbage", "corrupt"],
            AlgorithmSpec::Discrete | AlgorithmSpec::Multi => {
                &["eps", "alpha", "policy", "seed", "k", "fault_seed", "garbage", "corrupt"]
            }
            AlgorithmSpec::Diffusion { .. } => &["policy", "seed", "k", "fault_seed", "garbage", "corrupt"],
            AlgorithmSpec::Async { .. } => &["eps", "alpha", "k", "fault_seed", "garbage", "corrupt"],
            AlgorithmSpec::SelfStab { .. } => &["eps", "alpha"],
        };
        if let Some(k) = stray.iter().find(|k| doc.get("algorithm", k).is_some()) {
            return Err(Reader::err("algorithm", k, format!("does not apply to {kind}")));
        }

        let graph = match (doc.get("graph", "file"), doc.get("graph", "generator")) {
            (Some(f), None) => GraphSource::File(base_dir.join(f)),
            (None, Some(g)) => GraphSource::Generator(parse_topology(g)?),
            (Some(_), Some(_)) => return Err(ScenarioError::Invalid("[graph] takes either file or generator, not both".into())),
            (None, None) => return Err(ScenarioError::Invalid("[graph] needs file or generator".into())),
        };
        let loads = doc.get("graph", "loads").map(parse_loads).transpose()?;
        if matches!(graph, GraphSource::Generator(_)) && loads.is_none() {
            return Err(ScenarioError::Invalid("[graph] generator needs loads".into()));
        }

        let checks = parse_checks(doc.get("run", "checks").unwrap_or("")).map_err(|m| Reader::err("run", "checks", m))?;
        let scenario = Scenario {
            algorithm,
            graph,
            loads,
            max_rounds: r.parse("run", "max_rounds", DEFAULT_MAX_ROUNDS)?,
            max_steps: r.parse("run", "max_steps", DEFAULT_MAX_STEPS)?,
            checks,
            trace: doc.get("run", "trace").map(PathBuf::from),
            summary: doc.get("run", "summary").map(PathBuf::from),
            stride: r.parse("run", "stride", 1u64)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        Scenario::from_doc(&ScenarioDoc::parse(text)?, base_dir)
    }

    /// Rejects checks the algorithm cannot support and empty horizons.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if let Some(c) = self.checks.iter().find(|c| !self.algorithm.supports(**c)) {
            return Err(ScenarioError::Invalid(format!(
                "check {} does not apply to {}",
                c.name(),
                self.algorithm.name()
            )));
        }
        if self.max_rounds == 0 || self.max_steps == 0 {
            return Err(ScenarioError::Invalid("max_rounds and max_steps must be positive".into()));
        }
        if self.stride == 0 {
            return Err(ScenarioError::Invalid("stride must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISCRETE: &str = "\
[algorithm]
kind = discrete   # single proposal

[graph]
generator = path:3
loads = explicit:9,0,4

[run]
checks = monotonic, lemma6, conservation
";

    #[test]
    fn parses_a_discrete_scenario() {
        let s = Scenario::parse(DISCRETE, Path::new(".")).unwrap();
        assert_eq!(s.algorithm, AlgorithmSpec::Discrete);
        assert_eq!(s.graph, GraphSource::Generator(Topology::Path(3)));
        assert_eq!(s.checks.len(), 3);
        assert_eq!(s.max_rounds, DEFAULT_MAX_ROUNDS);
    }

    #[test]
    fn rejects_mismatched_checks() {
        let text = DISCRETE.replace("lemma6", "lemma2");
        assert!(matches!(Scenario::parse(&text, Path::new(".")), Err(ScenarioError::Invalid(_))));
        let text = DISCRETE.replace("discrete", "multi").replace("lemma6", "fairness");
        assert!(Scenario::parse(&text, Path::new(".")).is_err());
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let err = ScenarioDoc::parse("[algorithm]\nkind discrete\n").unwrap_err();
        assert_eq!(err, ScenarioError::Syntax { line: 2, message: "expected key = value, got 'kind discrete'".into() });
        assert!(ScenarioDoc::parse("kind = x").is_err());
        assert!(ScenarioDoc::parse("[nope]").is_err());
        assert!(ScenarioDoc::parse("[run]\na = 1\na = 2").is_err());
    }

    #[test]
    fn selfstab_fields() {
        let text = "[algorithm]\nkind = selfstab\nk = 2\ngarbage = 2\ncorrupt = nodes\npolicy = random\nseed = 4\nfault_seed = 9\n[graph]\ngenerator = path:2\nloads = explicit:10,0\n";
        let s = Scenario::parse(text, Path::new(".")).unwrap();
        let AlgorithmSpec::SelfStab { policy, k, faults } = s.algorithm else { panic!() };
        assert_eq!((policy, k), (SchedulePolicy::RandomFair { seed: 4 }, 2));
        assert!(faults.corrupt_nodes && !faults.corrupt_links);
        assert_eq!(faults.seed, 9);
        assert!(Scenario::parse(&text.replace("garbage = 2", "garbage = 3"), Path::new(".")).is_err());
        assert!(Scenario::parse(&text.replace("k = 2", "eps = 1"), Path::new(".")).is_err());
    }

    #[test]
    fn doc_round_trips_and_overrides() {
        let mut doc = ScenarioDoc::parse(DISCRETE).unwrap();
        doc.set("run", "max_rounds", "7");
        doc.set("graph", "loads", "explicit:1,2,3");
        let again = ScenarioDoc::parse(&doc.to_string()).unwrap();
        assert_eq!(again, doc);
        let s = Scenario::from_doc(&again, Path::new(".")).unwrap();
        assert_eq!(s.max_rounds, 7);
    }
}
