//! Runs one scenario: engine dispatch, invariant checks, trace rows and
//! the key-value summary.

use std::fmt::Display;

use dealbal::asynchronous::{run_async, AsyncConfig, AsyncError, StepTrace};
use dealbal::check::{check_fairness, check_matching_degree, check_monotonic_step, CheckResult};
use dealbal::graph::{generate_topology, load_graph};
use dealbal::stab::{run_selfstab, SelfStabConfig, StabError};
use dealbal::sync::{run_continuous, run_diffusion, run_discrete, run_multi, SyncError, SyncRun};
use dealbal::{compute_metrics, Graph, GraphError, Load, LoadVector, Rational, Transfer, Units};
use thiserror::Error;

use crate::scenario::{AlgorithmSpec, Check, GraphSource, Scenario};
use crate::spec::{build_loads, SpecError};
use crate::trace::{fraction, potential_of, TraceRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_HORIZON: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph file gives no loads and the scenario sets none")]
    MissingLoads,
    #[error("{0}")]
    Parameter(String),
    /// The engine hit a state its protocol rules out.
    #[error("protocol error: {0}")]
    Protocol(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Protocol(_) => EXIT_VIOLATION,
            _ => EXIT_PARSE,
        }
    }
}

impl From<SyncError> for RunError {
    fn from(e: SyncError) -> Self {
        RunError::Parameter(e.to_string())
    }
}

impl From<AsyncError> for RunError {
    fn from(e: AsyncError) -> Self {
        match e {
            AsyncError::Node(n) => RunError::Protocol(n.to_string()),
            other => RunError::Parameter(other.to_string()),
        }
    }
}

impl From<StabError> for RunError {
    fn from(e: StabError) -> Self {
        RunError::Parameter(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// First violating round (sync) or step (async).
    Violation { at: u64, check: Check, detail: String },
    HorizonExceeded,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::Violation { .. } => EXIT_VIOLATION,
            Status::HorizonExceeded => EXIT_HORIZON,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Violation { .. } => "violation",
            Status::HorizonExceeded => "horizon_exceeded",
        }
    }
}

/// Observed cost against its theoretical budget (rounds or deals).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetUse {
    pub observed: u128,
    pub budget: u128,
}

impl BudgetUse {
    pub fn ratio(&self) -> f64 {
        match (self.observed, self.budget) {
            (0, _) => 0.0,
            (_, 0) => f64::INFINITY,
            (o, b) => o as f64 / b as f64,
        }
    }

    pub fn within(&self) -> bool {
        self.observed <= self.budget
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub records: Vec<TraceRecord>,
    pub summary: Vec<(String, String)>,
    pub budget: Option<BudgetUse>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render_summary(&self) -> String {
        self.summary.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[derive(Default)]
struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, key: &str, value: impl Display) {
        self.0.push((key.to_string(), value.to_string()));
    }

    fn opt(&mut self, key: &str, value: Option<impl Display>) {
        match value {
            Some(v) => self.put(key, v),
            None => self.put(key, "none"),
        }
    }
}

fn mask(checks: &[Check]) -> u32 {
    checks.iter().map(|c| c.bit()).fold(0, |a, b| a | b)
}

fn instance<S: Load>(scenario: &Scenario) -> Result<(Graph, LoadVector<S>), RunError> {
    let (graph, file_loads) = match &scenario.graph {
        GraphSource::File(path) => {
            let (g, l) = load_graph::<S>(path)?;
            (g, Some(l))
        }
        GraphSource::Generator(t) => (generate_topology(t)?, None),
    };
    let loads = match &scenario.loads {
        Some(spec) => build_loads(&graph, spec)?,
        None => file_loads.ok_or(RunError::MissingLoads)?,
    };
    Ok((graph, loads))
}

/// Executes a validated scenario. Writes nothing to disk.
pub fn execute(scenario: &Scenario) -> Result<Outcome, RunError> {
    let checks: Vec<Check> = scenario.checks.iter().copied().collect();
    match &scenario.algorithm {
        AlgorithmSpec::Continuous { eps } => {
            let (g, loads) = instance::<Rational>(scenario)?;
            let run = run_continuous(&g, loads.clone(), eps, scenario.max_rounds)?;
            Ok(sync_outcome(scenario, &checks, &g, &loads, run, Some("continuous")))
        }
        AlgorithmSpec::Diffusion { alpha, eps } => {
            let (g, loads) = instance::<Rational>(scenario)?;
            let run = run_diffusion(&g, loads.clone(), alpha, eps, scenario.max_rounds)?;
            Ok(sync_outcome(scenario, &checks, &g, &loads, run, None))
        }
        AlgorithmSpec::Discrete => {
            let (g, loads) = instance::<Units>(scenario)?;
            let run = run_discrete(&g, loads.clone(), scenario.max_rounds)?;
            Ok(sync_outcome(scenario, &checks, &g, &loads, run, Some("discrete")))
        }
        AlgorithmSpec::Multi => {
            let (g, loads) = instance::<Units>(scenario)?;
            let run = run_multi(&g, loads.clone(), scenario.max_rounds)?;
            Ok(sync_outcome(scenario, &checks, &g, &loads, run, Some("n_k_squared")))
        }
        AlgorithmSpec::Async { .. } | AlgorithmSpec::SelfStab { .. } => stepwise(scenario, &checks),
    }
}

fn head<S: Load>(s: &mut Summary, scenario: &Scenario, g: &Graph, initial: &LoadVector<S>) {
    let m = compute_metrics(g, initial);
    s.put("algorithm", scenario.algorithm.name());
    s.put("nodes", g.node_count());
    s.put("edges", g.edge_count());
    s.put("diameter", g.diameter());
    s.put("initial_sum", initial.total());
    s.put("initial_discrepancy", &m.discrepancy);
    s.put("initial_potential", fraction(&m.potential));
    let names: Vec<&str> = scenario.checks.iter().map(|c| c.name()).collect();
    s.put("checks", if names.is_empty() { "none".to_string() } else { names.join(",") });
}

fn tail(s: &mut Summary, status: &Status) {
    match status {
        Status::Violation { at, check, detail } => {
            s.put("first_violation", at);
            s.put("violated_check", check.name());
            s.put("violation", detail);
        }
        _ => s.put("first_violation", "none"),
    }
    s.put("status", status.label());
    s.put("exit_code", status.exit_code());
}

fn first_message<S: Display>(result: &CheckResult<S>) -> String {
    result.violations.first().map_or_else(String::new, |v| v.to_string())
}

fn sync_outcome<S: Load>(
    scenario: &Scenario,
    checks: &[Check],
    g: &Graph,
    initial: &LoadVector<S>,
    run: SyncRun<S>,
    budget_kind: Option<&str>,
) -> Outcome {
    let n = g.node_count();
    let edge_messages = 2 * g.edge_count() as u64;
    let mut current: Vec<S> = initial.as_slice().to_vec();
    let mut records = vec![TraceRecord::from_values(0, &current, 0, 0, mask(checks))];
    let (mut deals, mut messages) = (0u64, 0u64);
    let mut violation: Option<Status> = None;

    for report in &run.reports {
        let idx = report.round_index as u64 + 1;
        let after = apply(&current, &report.deals);
        let mut passed = 0u32;
        for &check in checks {
            let failure = match check {
                Check::Monotonic => Some(check_monotonic_step(&current, &after, &report.deals))
                    .filter(|r| !r.passed())
                    .map(|r| first_message(&r)),
                Check::Fairness => Some(check_fairness(&current, &report.deals))
                    .filter(|r| !r.passed())
                    .map(|r| first_message(&r)),
                Check::MatchingDegree => Some(check_matching_degree(n, &report.deals))
                    .filter(|r| !r.passed())
                    .map(|r| first_message(&r)),
                Check::Lemma2 | Check::Lemma6 => (!report.lemma_floor_satisfied).then(|| {
                    format!(
                        "potential dropped by {} with round discrepancy {}",
                        fraction(&report.potential_drop()),
                        report.metrics_before.discrepancy
                    )
                }),
                Check::Conservation => {
                    let (b, a) = (sum(&current), sum(&after));
                    (b != a).then(|| format!("load sum changed from {b} to {a}"))
                }
            };
            match failure {
                None => passed |= check.bit(),
                Some(detail) => {
                    if violation.is_none() {
                        violation = Some(Status::Violation { at: idx, check, detail });
                    }
                }
            }
        }
        deals += report.deals.len() as u64;
        messages += (report.proposals.len() + report.deals.len()) as u64 + edge_messages;
        records.push(TraceRecord::from_values(idx, &after, deals, messages, passed));
        current = after;
    }
    debug_assert_eq!(current.as_slice(), run.final_loads.as_slice());

    let v = &run.verdict;
    let status = violation.unwrap_or(if v.converged { Status::Ok } else { Status::HorizonExceeded });
    let budget = v.budget_rounds.map(|b| BudgetUse {
        observed: v.rounds_to_target.unwrap_or(v.rounds_used) as u128,
        budget: b as u128,
    });

    let mut s = Summary::default();
    head(&mut s, scenario, g, initial);
    let fin = compute_metrics(g, &run.final_loads);
    s.put("final_discrepancy", &fin.discrepancy);
    s.put("final_potential", fraction(&fin.potential));
    s.put("final_max_local_diff", &fin.max_local_diff);
    s.put("max_rounds", scenario.max_rounds);
    s.put("rounds_used", v.rounds_used);
    s.opt("rounds_to_target", v.rounds_to_target);
    s.put("converged", v.converged);
    s.put("horizon_exceeded", v.horizon_exceeded);
    s.put("total_deals", v.total_deals);
    s.put("messages", messages);
    s.opt("budget_kind", budget_kind);
    s.opt("budget_rounds", v.budget_rounds);
    s.opt("within_budget", v.within_budget);
    s.opt("budget_ratio", budget.map(|b| format!("{:.6}", b.ratio())));
    s.put("lemma_floor_misses", run.reports.iter().filter(|r| !r.lemma_floor_satisfied).count());
    s.put("conservation_drift", sum(run.final_loads.as_slice()) - initial.total());
    tail(&mut s, &status);
    Outcome { status, records, summary: s.0, budget }
}

fn sum<S: Load>(values: &[S]) -> S {
    values.iter().cloned().fold(S::zero(), |a, b| a + b)
}

fn apply<S: Load>(before: &[S], deals: &[Transfer<S>]) -> Vec<S> {
    let mut after = before.to_vec();
    for d in deals {
        after[d.from.0] = after[d.from.0].clone() - d.amount.clone();
        after[d.to.0] = after[d.to.0].clone() + d.amount.clone();
    }
    after
}

fn step_records(trace: &[StepTrace], checks: &[Check]) -> Vec<TraceRecord> {
    trace
        .iter()
        .map(|t| {
            let mut bits = 0;
            if checks.contains(&Check::Monotonic) && t.monotonic_ok {
                bits |= Check::Monotonic.bit();
            }
            if checks.contains(&Check::Conservation) && t.conservation_ok {
                bits |= Check::Conservation.bit();
            }
            TraceRecord::from_values(t.step, &t.effective_loads, t.deals, t.messages, bits)
        })
        .collect()
}

fn stepwise(scenario: &Scenario, checks: &[Check]) -> Result<Outcome, RunError> {
    let (g, loads) = instance::<Units>(scenario)?;
    let mut s = Summary::default();
    head(&mut s, scenario, &g, &loads);
    s.put("max_steps", scenario.max_steps);
    let monotonic = checks.contains(&Check::Monotonic);
    let conservation = checks.contains(&Check::Conservation);

    let (status, records, budget) = match &scenario.algorithm {
        AlgorithmSpec::Async { policy } => {
            let config = AsyncConfig { policy: *policy, max_steps: scenario.max_steps, trace_stride: scenario.stride };
            let run = run_async(&g, &loads, &config)?;
            let v = &run.verdict;
            let mut violation = None;
            if monotonic {
                if let Some((at, what)) = run.violations.first() {
                    violation = Some(Status::Violation { at: *at, check: Check::Monotonic, detail: what.to_string() });
                } else if let Some(d) = run.deals.iter().find(|d| !d.passes_gap_check()) {
                    violation = Some(Status::Violation {
                        at: d.step,
                        check: Check::Monotonic,
                        detail: format!(
                            "deal {}->{} accepted at tentative {} against receiver {}",
                            d.from, d.to, d.proposer_tentative, d.receiver_t_load_before
                        ),
                    });
                }
            }
            if violation.is_none() && conservation {
                if let Some(t) = run.trace.iter().find(|t| !t.conservation_ok) {
                    let detail = format!("effective load sum drifted by step {}", t.step);
                    violation = Some(Status::Violation { at: t.step, check: Check::Conservation, detail });
                }
            }
            let fin = compute_metrics(&g, &run.final_loads);
            s.put("policy", format!("{:?}", policy));
            s.put("steps", v.steps);
            s.put("terminated", v.terminated);
            s.put("horizon_exceeded", v.horizon_exceeded);
            s.put("one_balanced", v.one_balanced);
            s.put("final_discrepancy", fin.discrepancy);
            s.put("final_potential", fraction(&fin.potential));
            s.put("deal_count", v.deal_count);
            s.put("deal_budget", v.deal_budget);
            s.put("within_deal_budget", v.within_deal_budget);
            s.put("messages", v.messages_sent);
            s.put("monotonic_violations", v.monotonic_violations);
            s.put("gap_check_failures", v.gap_check_failures);
            s.put("fifo_violations", v.fifo_violations);
            s.put("conservation_drift", v.sum_drift);
            let status = violation.unwrap_or(if v.terminated { Status::Ok } else { Status::HorizonExceeded });
            let budget = BudgetUse { observed: v.deal_count as u128, budget: v.deal_budget };
            (status, step_records(&run.trace, checks), Some(budget))
        }
        AlgorithmSpec::SelfStab { policy, k, faults } => {
            let config = SelfStabConfig {
                policy: *policy,
                max_steps: scenario.max_steps,
                trace_stride: scenario.stride,
                k: *k,
                faults: faults.clone(),
            };
            let run = run_selfstab(&g, &loads, &config)?;
            let (v, r) = (&run.verdict, &run.report);
            let at = r.stabilization_step;
            let mut violation = None;
            if monotonic && !(r.suffix_monotonic && r.suffix_gap_check) {
                let detail = format!("suffix from step {at} is not monotonic");
                violation = Some(Status::Violation { at, check: Check::Monotonic, detail });
            } else if conservation && !r.suffix_conserving {
                let detail = format!("suffix from step {at} does not conserve load");
                violation = Some(Status::Violation { at, check: Check::Conservation, detail });
            }
            let final_sum: i64 = run.final_loads.iter().sum();
            s.put("policy", format!("{:?}", policy));
            s.put("k", k);
            s.put("capacity", r.capacity);
            s.put("steps", v.steps);
            s.put("terminated", v.terminated);
            s.put("horizon_exceeded", v.horizon_exceeded);
            s.put("one_balanced", v.one_balanced);
            s.put("final_discrepancy", run.final_loads.iter().max().unwrap_or(&0) - run.final_loads.iter().min().unwrap_or(&0));
            s.put("final_potential", fraction(&potential_of(&run.final_loads)));
            s.put("deal_count", v.deal_count);
            s.put("messages", v.messages_sent);
            s.put("frames_sent", v.frames_sent);
            s.put("acks_sent", v.acks_sent);
            s.put("garbage_frames", r.injected.garbage_frames);
            s.put("garbage_acks", r.injected.garbage_acks);
            s.put("corrupted_nodes", r.injected.corrupted_nodes.len());
            s.put("corrupted_senders", r.injected.corrupted_senders);
            s.put("stabilization_step", r.stabilization_step);
            s.put("fault_events", r.fault_events);
            s.put("phantom_deliveries", r.phantom_deliveries);
            s.put("blobs_discarded", r.blobs_discarded);
            s.put("stale_deliveries", r.stale_deliveries);
            s.put("losses", r.losses);
            s.put("watchdog_restarts", r.watchdog_restarts);
            s.put("unexpected_acks", r.unexpected_acks);
            s.put("clamps", r.clamps);
            s.put("clamp_drift", r.clamp_drift);
            s.put("prefix_drift", r.prefix_drift);
            s.put("suffix_monotonic", r.suffix_monotonic);
            s.put("suffix_conserving", r.suffix_conserving);
            s.put("suffix_gap_check", r.suffix_gap_check);
            s.put("suffix_deals", r.suffix_deals);
            s.put("suffix_deal_budget", r.suffix_deal_budget);
            s.put("ends_one_balanced", r.ends_one_balanced);
            s.put("max_channel_occupancy", r.max_channel_occupancy);
            s.put("conservation_drift", final_sum - loads.total());
            let status = violation.unwrap_or(if v.terminated && r.ends_one_balanced {
                Status::Ok
            } else {
                Status::HorizonExceeded
            });
            let budget = BudgetUse { observed: r.suffix_deals as u128, budget: r.suffix_deal_budget };
            (status, step_records(&run.trace, checks), Some(budget))
        }
        _ => unreachable!("synchronous algorithms are handled by execute"),
    };
    s.opt("budget_ratio", budget.map(|b| format!("{:.6}", b.ratio())));
    tail(&mut s, &status);
    Ok(Outcome { status, records, summary: s.0, budget })
}
