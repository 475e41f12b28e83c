//! Barrier-synchronized round engine.
//!
//! Each round has three phases evaluated against round-start loads:
//! proposals, acceptance, and an atomic load update. Nodes are visited in
//! ascending id order, so every run is reproducible.

mod diffusion;
mod multi;
mod single;

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::bounds::{bound_budget, lemma2_floor, lemma6_floor};
use crate::graph::{Graph, LoadVector, NodeId};
use crate::metrics::{compute_metrics, Metrics, Transfer};
use crate::scalar::{ContinuousLoad, DiscreteLoad, Load, LoadMode};

pub use diffusion::round_diffusion;
pub use multi::{accept_multi, plan_waterfill, round_multi, IncomingProposal, WaterfillPlan};
pub use single::{proposal_target, round_continuous, round_discrete};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyncError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{algorithm} needs {expected} loads")]
    ModeMismatch { algorithm: &'static str, expected: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal<S> {
    pub from: NodeId,
    pub to: NodeId,
    pub amount: S,
    /// Proposer's planned post-transfer load (multi-neighbor rounds only).
    pub tentative_load: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundReport<S> {
    pub round_index: usize,
    pub proposals: Vec<Proposal<S>>,
    pub deals: Vec<Transfer<S>>,
    pub metrics_before: Metrics<S>,
    pub metrics_after: Metrics<S>,
    /// Whether the round met its per-round potential floor (trivially true
    /// where no floor applies).
    pub lemma_floor_satisfied: bool,
}

impl<S> RoundReport<S> {
    pub fn potential_drop(&self) -> BigRational {
        &self.metrics_before.potential - &self.metrics_after.potential
    }
}

/// Neighbors strictly below and strictly above a node, ascending by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NeighborhoodSets {
    pub v_less: Vec<NodeId>,
    pub v_more: Vec<NodeId>,
}

pub fn neighborhood_sets<S: Load>(graph: &Graph, loads: &LoadVector<S>, u: NodeId) -> NeighborhoodSets {
    let mut sets = NeighborhoodSets::default();
    for &v in graph.neighbors(u) {
        match loads[v].cmp(&loads[u]) {
            std::cmp::Ordering::Less => sets.v_less.push(v),
            std::cmp::Ordering::Greater => sets.v_more.push(v),
            std::cmp::Ordering::Equal => {}
        }
    }
    sets
}

/// Applies `deals` atomically and assembles the report.
pub(crate) fn finish_round<S: Load>(
    graph: &Graph,
    loads: &LoadVector<S>,
    proposals: Vec<Proposal<S>>,
    deals: Vec<Transfer<S>>,
) -> (LoadVector<S>, RoundReport<S>) {
    let mut deltas = LoadVector::<S>::zeros(loads.len());
    for d in &deals {
        deltas[d.from.0] = deltas[d.from.0].clone() - d.amount.clone();
        deltas[d.to.0] = deltas[d.to.0].clone() + d.amount.clone();
    }
    let after = loads
        .with_deltas(&deltas)
        .expect("round transfers never exceed a donor's load");
    let report = RoundReport {
        round_index: 0,
        proposals,
        deals,
        metrics_before: compute_metrics(graph, loads),
        metrics_after: compute_metrics(graph, &after),
        lemma_floor_satisfied: true,
    };
    (after, report)
}

/// Which synchronous algorithm to run, with its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncAlgorithm {
    Continuous { eps: BigRational },
    Discrete,
    Multi,
    Diffusion { alpha: BigRational, eps: BigRational },
}

impl SyncAlgorithm {
    pub fn name(&self) -> &'static str {
        match self {
            SyncAlgorithm::Continuous { .. } => "continuous",
            SyncAlgorithm::Discrete => "discrete",
            SyncAlgorithm::Multi => "multi",
            SyncAlgorithm::Diffusion { .. } => "diffusion",
        }
    }
}

/// Convergence summary of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncVerdict {
    pub rounds_used: usize,
    /// Rounds until the target (discrepancy within eps, or 1-balanced) was first met.
    pub rounds_to_target: Option<usize>,
    pub converged: bool,
    pub horizon_exceeded: bool,
    /// Theoretical round budget, where one applies.
    pub budget_rounds: Option<u64>,
    pub within_budget: Option<bool>,
    pub total_deals: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncRun<S> {
    pub final_loads: LoadVector<S>,
    pub reports: Vec<RoundReport<S>>,
    pub verdict: SyncVerdict,
}

type TargetFn<'a, S> = Box<dyn Fn(&Metrics<S>) -> bool + 'a>;

enum Stop<'a, S> {
    /// Checked before every round.
    Target(TargetFn<'a, S>),
    /// A round without deals ends the run (and counts).
    FixedPoint,
}

fn drive<S: Load>(
    graph: &Graph,
    loads: LoadVector<S>,
    max_rounds: usize,
    mut round: impl FnMut(&LoadVector<S>) -> (LoadVector<S>, RoundReport<S>),
    stop: Stop<'_, S>,
    target_met: impl Fn(&Metrics<S>) -> bool,
    budget_rounds: Option<u64>,
) -> SyncRun<S> {
    let initial = compute_metrics(graph, &loads);
    let mut rounds_to_target = target_met(&initial).then_some(0);
    let mut current = loads;
    let mut reports: Vec<RoundReport<S>> = Vec::new();
    let mut converged = false;

    loop {
        if let Stop::Target(done) = &stop {
            let metrics = reports.last().map_or(&initial, |r| &r.metrics_after);
            if done(metrics) {
                converged = true;
                break;
            }
        }
        if reports.len() >= max_rounds {
            break;
        }
        let (next, mut report) = round(&current);
        report.round_index = reports.len();
        let idle = report.deals.is_empty();
        if rounds_to_target.is_none() && target_met(&report.metrics_after) {
            rounds_to_target = Some(reports.len() + 1);
        }
        reports.push(report);
        current = next;
        if matches!(stop, Stop::FixedPoint) && idle {
            converged = true;
            break;
        }
    }

    let total_deals = reports.iter().map(|r| r.deals.len()).sum();
    let within_budget = budget_rounds.map(|b| rounds_to_target.is_some_and(|r| r as u64 <= b));
    SyncRun {
        final_loads: current,
        verdict: SyncVerdict {
            rounds_used: reports.len(),
            rounds_to_target,
            converged,
            horizon_exceeded: !converged,
            budget_rounds,
            within_budget,
            total_deals,
        },
        reports,
    }
}

fn validate_rounds(max_rounds: usize) -> Result<(), SyncError> {
    if max_rounds == 0 {
        return Err(SyncError::InvalidParameter("max_rounds must be at least 1".into()));
    }
    Ok(())
}

fn budget_for<S: Load>(graph: &Graph, loads: &LoadVector<S>, eps: &BigRational, mode: LoadMode) -> Option<u64> {
    let k = compute_metrics(graph, loads).discrepancy.to_rational();
    bound_budget(graph.node_count(), graph.diameter(), &k, eps, mode)
        .ok()
        .map(|b| b.rounds_for(mode))
}

/// Runs the continuous single-proposal algorithm until discrepancy `<= eps`.
pub fn run_continuous<S: ContinuousLoad>(
    graph: &Graph,
    loads: LoadVector<S>,
    eps: &S,
    max_rounds: usize,
) -> Result<SyncRun<S>, SyncError> {
    validate_rounds(max_rounds)?;
    if !eps.is_positive() {
        return Err(SyncError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let budget = budget_for(graph, &loads, &eps.to_rational(), LoadMode::Continuous);
    let d = graph.diameter();
    let within = |m: &Metrics<S>| m.discrepancy <= *eps;
    Ok(drive(
        graph,
        loads,
        max_rounds,
        |l| {
            let (next, mut report) = round_continuous(graph, l);
            let k = report.metrics_before.discrepancy.to_rational();
            report.lemma_floor_satisfied = report.potential_drop() >= lemma2_floor(&k, d.max(1));
            (next, report)
        },
        Stop::Target(Box::new(within)),
        within,
        budget,
    ))
}

/// Runs the discrete single-proposal algorithm to its fixed point.
pub fn run_discrete<S: DiscreteLoad>(
    graph: &Graph,
    loads: LoadVector<S>,
    max_rounds: usize,
) -> Result<SyncRun<S>, SyncError> {
    validate_rounds(max_rounds)?;
    let budget = budget_for(graph, &loads, &BigRational::zero(), LoadMode::Discrete);
    let d = graph.diameter();
    Ok(drive(
        graph,
        loads,
        max_rounds,
        |l| {
            let (next, mut report) = round_discrete(graph, l);
            let k = report.metrics_before.discrepancy.to_rational();
            if let Some(floor) = lemma6_floor(&k, d.max(1)) {
                report.lemma_floor_satisfied = report.potential_drop() >= floor;
            }
            (next, report)
        },
        Stop::FixedPoint,
        |m| m.max_local_diff <= S::one(),
        budget,
    ))
}

/// Runs the multi-neighbor algorithm to its fixed point. The reported
/// budget is the `n * K^2` reference, not a proven bound on rounds.
pub fn run_multi<S: DiscreteLoad>(
    graph: &Graph,
    loads: LoadVector<S>,
    max_rounds: usize,
) -> Result<SyncRun<S>, SyncError> {
    validate_rounds(max_rounds)?;
    let k = compute_metrics(graph, &loads).discrepancy.to_rational();
    let reference = k.clone() * k * BigRational::from_integer(graph.node_count().into());
    let budget = num_traits::ToPrimitive::to_u64(&reference.to_integer());
    Ok(drive(
        graph,
        loads,
        max_rounds,
        |l| round_multi(graph, l),
        Stop::FixedPoint,
        |m| m.max_local_diff <= S::one(),
        budget,
    ))
}

/// Runs the diffusion baseline until discrepancy `<= eps`.
pub fn run_diffusion<S: ContinuousLoad>(
    graph: &Graph,
    loads: LoadVector<S>,
    alpha: &S,
    eps: &S,
    max_rounds: usize,
) -> Result<SyncRun<S>, SyncError> {
    validate_rounds(max_rounds)?;
    if !alpha.is_positive() || *alpha > S::one() {
        return Err(SyncError::InvalidParameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if eps.is_negative() {
        return Err(SyncError::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let within = |m: &Metrics<S>| m.discrepancy <= *eps;
    Ok(drive(
        graph,
        loads,
        max_rounds,
        |l| round_diffusion(graph, l, alpha),
        Stop::Target(Box::new(within)),
        within,
        None,
    ))
}

/// Initial loads for [`run_sync`], tagged by mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncLoads {
    Continuous(LoadVector<BigRational>),
    Discrete(LoadVector<i64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyncOutcome {
    Continuous(SyncRun<BigRational>),
    Discrete(SyncRun<i64>),
}

impl SyncOutcome {
    pub fn verdict(&self) -> &SyncVerdict {
        match self {
            SyncOutcome::Continuous(r) => &r.verdict,
            SyncOutcome::Discrete(r) => &r.verdict,
        }
    }
}

/// Runs `algorithm` on concrete loads; the load mode must match the algorithm.
pub fn run_sync(
    graph: &Graph,
    loads: SyncLoads,
    algorithm: &SyncAlgorithm,
    max_rounds: usize,
) -> Result<SyncOutcome, SyncError> {
    let mismatch = |expected| SyncError::ModeMismatch { algorithm: algorithm.name(), expected };
    match (algorithm, loads) {
        (SyncAlgorithm::Continuous { eps }, SyncLoads::Continuous(l)) => {
            run_continuous(graph, l, eps, max_rounds).map(SyncOutcome::Continuous)
        }
        (SyncAlgorithm::Diffusion { alpha, eps }, SyncLoads::Continuous(l)) => {
            run_diffusion(graph, l, alpha, eps, max_rounds).map(SyncOutcome::Continuous)
        }
        (SyncAlgorithm::Discrete, SyncLoads::Discrete(l)) => {
            run_discrete(graph, l, max_rounds).map(SyncOutcome::Discrete)
        }
        (SyncAlgorithm::Multi, SyncLoads::Discrete(l)) => {
            run_multi(graph, l, max_rounds).map(SyncOutcome::Discrete)
        }
        (SyncAlgorithm::Continuous { .. } | SyncAlgorithm::Diffusion { .. }, _) => Err(mismatch("continuous")),
        (SyncAlgorithm::Discrete | SyncAlgorithm::Multi, _) => Err(mismatch("discrete")),
    }
}
