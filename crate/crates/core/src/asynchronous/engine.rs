//! Atomic-step simulation: one message delivery (and the handler it
//! triggers) per step, FIFO per directed edge.

use std::collections::VecDeque;

use thiserror::Error;

use super::message::{AsyncMessage, MessageKind, Outgoing};
use super::node::{AsyncNodeState, NodeError, Phase};
use super::schedule::{ChannelView, SchedulePolicy, Scheduler};
use crate::check::{check_monotonic_step, Violation};
use crate::graph::{Graph, LoadVector, NodeId};
use crate::metrics::{is_one_balanced, Transfer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsyncError {
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A completed deal, as seen by the harness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DealRecord {
    pub step: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub amount: i64,
    pub proposer_tentative: i64,
    pub receiver_t_load_before: i64,
}

impl DealRecord {
    /// The proposer's tentative load was above the receiver's at acceptance.
    pub fn passes_gap_check(&self) -> bool {
        self.proposer_tentative > self.receiver_t_load_before
    }
}

/// Snapshot recorded every `trace_stride` steps (and at the end).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTrace {
    pub step: u64,
    pub effective_loads: Vec<i64>,
    /// Cumulative deals with a positive amount.
    pub deals: u64,
    /// Cumulative messages sent.
    pub messages: u64,
    /// Monotonicity held on every step since the previous snapshot.
    pub monotonic_ok: bool,
    /// Effective load sum equal to the initial sum on every step since the previous snapshot.
    pub conservation_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsyncVerdict {
    pub steps: u64,
    /// Ended 1-balanced with empty channels and every node idle.
    pub terminated: bool,
    pub horizon_exceeded: bool,
    pub one_balanced: bool,
    pub deal_count: u64,
    /// `n * K^2` for the initial discrepancy.
    pub deal_budget: u128,
    pub within_deal_budget: bool,
    pub messages_sent: u64,
    pub monotonic_violations: u64,
    pub first_violation_step: Option<u64>,
    pub gap_check_failures: u64,
    pub fifo_violations: u64,
    /// Final effective sum minus the initial sum.
    pub sum_drift: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsyncRun {
    pub final_loads: LoadVector<i64>,
    pub deals: Vec<DealRecord>,
    pub trace: Vec<StepTrace>,
    /// The first violations found (at most [`MAX_RECORDED_VIOLATIONS`]).
    pub violations: Vec<(u64, Violation<i64>)>,
    pub verdict: AsyncVerdict,
}

pub const MAX_RECORDED_VIOLATIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AsyncConfig {
    pub policy: SchedulePolicy,
    pub max_steps: u64,
    /// Record a [`StepTrace`] every this many steps; 0 records only the final state.
    pub trace_stride: u64,
}

/// Effect of handing one message to its destination node.
#[derive(Debug, Default)]
pub(crate) struct Handled {
    pub sent: Vec<(NodeId, Outgoing)>,
    pub deal: Option<DealRecord>,
    pub unexpected_ack: Option<NodeError>,
}

/// Node states plus the harness-side bookkeeping shared by the plain and
/// the self-stabilizing engines.
#[derive(Debug, Clone)]
pub(crate) struct Protocol {
    pub nodes: Vec<AsyncNodeState>,
    pub neighbors: Vec<Vec<NodeId>>,
    /// Positive ack amounts sent towards each node and not yet delivered.
    pub inbound_ack_deals: Vec<i64>,
    pub proposals_in_flight: u64,
    pub acks_in_flight: u64,
    /// Once set, idle nodes stop re-querying. Never cleared.
    pub stopping: bool,
}

impl Protocol {
    pub fn new(graph: &Graph, loads: &[i64]) -> Self {
        Protocol {
            nodes: graph.nodes().map(|u| AsyncNodeState::new(u, loads[u.0])).collect(),
            neighbors: graph.nodes().map(|u| graph.neighbors(u).to_vec()).collect(),
            inbound_ack_deals: vec![0; graph.node_count()],
            proposals_in_flight: 0,
            acks_in_flight: 0,
            stopping: false,
        }
    }

    /// Load each node would end with once in-flight acks land.
    pub fn effective_loads(&self) -> Vec<i64> {
        self.nodes
            .iter()
            .zip(&self.inbound_ack_deals)
            .map(|(n, inbound)| n.current_load() - inbound)
            .collect()
    }

    pub fn start_all(&mut self) -> Vec<(NodeId, Outgoing)> {
        let mut sent = Vec::new();
        for u in 0..self.nodes.len() {
            self.restart(NodeId(u), &mut sent);
        }
        sent
    }

    /// Begins a new query unless the run is winding down.
    pub fn restart(&mut self, u: NodeId, sent: &mut Vec<(NodeId, Outgoing)>) {
        if self.stopping || self.neighbors[u.0].is_empty() {
            self.nodes[u.0].phase = Phase::Idle;
            return;
        }
        let out = self.nodes[u.0].begin_query(&self.neighbors[u.0]);
        self.emit(u, out, sent);
    }

    pub fn emit(&mut self, from: NodeId, out: Vec<Outgoing>, sent: &mut Vec<(NodeId, Outgoing)>) {
        for o in out {
            match o.kind {
                MessageKind::Proposal { .. } => self.proposals_in_flight += 1,
                MessageKind::Ack { deal } => {
                    self.acks_in_flight += 1;
                    self.inbound_ack_deals[o.to.0] += deal;
                }
                _ => {}
            }
            sent.push((from, o));
        }
    }

    /// Bookkeeping for a protocol message that vanished without delivery.
    pub fn forget(&mut self, kind: MessageKind, to: NodeId) {
        match kind {
            MessageKind::Proposal { .. } => self.proposals_in_flight = self.proposals_in_flight.saturating_sub(1),
            MessageKind::Ack { deal } => {
                self.acks_in_flight = self.acks_in_flight.saturating_sub(1);
                self.inbound_ack_deals[to.0] -= deal;
            }
            _ => {}
        }
    }

    /// Delivers `msg`. `tracked` says whether the message was emitted by
    /// this protocol (and so is counted in flight). With `strict_acks`, an
    /// unexpected ack is reported; otherwise it is ignored.
    pub fn deliver(&mut self, msg: AsyncMessage, tracked: bool, strict_acks: bool, step: u64) -> Handled {
        if tracked {
            self.forget(msg.kind, msg.dst);
        }
        let mut handled = Handled::default();
        let (src, dst) = (msg.src, msg.dst);
        match msg.kind {
            MessageKind::LoadQuery => {
                let reply = self.nodes[dst.0].on_query(src);
                self.emit(dst, vec![reply], &mut handled.sent);
            }
            MessageKind::LoadReply { load } => {
                if let Some(out) = self.nodes[dst.0].on_reply(src, load) {
                    self.emit(dst, out, &mut handled.sent);
                    if self.nodes[dst.0].phase == Phase::Idle {
                        self.restart(dst, &mut handled.sent);
                    }
                }
            }
            MessageKind::Proposal { amount, tentative_load } => {
                let (ack, acceptance) = self.nodes[dst.0].on_proposal(src, amount, tentative_load);
                if acceptance.deal > 0 {
                    handled.deal = Some(DealRecord {
                        step,
                        from: src,
                        to: dst,
                        amount: acceptance.deal,
                        proposer_tentative: acceptance.proposer_tentative,
                        receiver_t_load_before: acceptance.t_load_before,
                    });
                }
                self.emit(dst, vec![ack], &mut handled.sent);
            }
            MessageKind::Ack { deal } => match self.nodes[dst.0].on_ack(src, deal) {
                Ok(true) => self.restart(dst, &mut handled.sent),
                Ok(false) => {}
                Err(e) if strict_acks => handled.unexpected_ack = Some(e),
                Err(_) => {}
            },
        }
        handled
    }

    pub fn any_awaiting_acks(&self) -> bool {
        self.nodes.iter().any(|n| n.phase == Phase::AwaitingAcks)
    }

    pub fn all_idle(&self) -> bool {
        self.nodes.iter().all(|n| n.phase == Phase::Idle)
    }
}

#[derive(Debug, Clone)]
struct Channel {
    queue: VecDeque<(AsyncMessage, u64)>,
    next_seq: u64,
    last_delivered: Option<u64>,
}

/// Directed edges in (src, dst) order and a lookup from a pair to its index.
#[derive(Debug, Clone)]
pub(crate) struct DirectedEdges {
    pub pairs: Vec<(NodeId, NodeId)>,
    offsets: Vec<usize>,
    neighbors: Vec<Vec<NodeId>>,
}

impl DirectedEdges {
    pub fn new(graph: &Graph) -> Self {
        let mut pairs = Vec::new();
        let mut offsets = Vec::new();
        for u in graph.nodes() {
            offsets.push(pairs.len());
            pairs.extend(graph.neighbors(u).iter().map(|&v| (u, v)));
        }
        DirectedEdges {
            pairs,
            offsets,
            neighbors: graph.nodes().map(|u| graph.neighbors(u).to_vec()).collect(),
        }
    }

    pub fn index(&self, src: NodeId, dst: NodeId) -> usize {
        let pos = self.neighbors[src.0]
            .binary_search(&dst)
            .expect("messages only travel along edges");
        self.offsets[src.0] + pos
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }
}

/// Harness-side per-step checks and counters shared with the
/// self-stabilizing engine.
#[derive(Debug, Clone)]
pub(crate) struct StepMonitor {
    pub initial_sum: i64,
    pub prev_effective: Vec<i64>,
    pub violations: Vec<(u64, Violation<i64>)>,
    pub violation_count: u64,
    pub first_violation_step: Option<u64>,
    pub interval_monotonic_ok: bool,
    pub interval_conservation_ok: bool,
}

impl StepMonitor {
    pub fn new(effective: Vec<i64>) -> Self {
        StepMonitor {
            initial_sum: effective.iter().sum(),
            prev_effective: effective,
            violations: Vec::new(),
            violation_count: 0,
            first_violation_step: None,
            interval_monotonic_ok: true,
            interval_conservation_ok: true,
        }
    }

    /// Checks one step; returns whether it was monotonic and conserving.
    pub fn observe(&mut self, step: u64, effective: Vec<i64>, deal: Option<&DealRecord>) -> bool {
        let transfers: Vec<Transfer<i64>> = deal
            .map(|d| Transfer::new(d.from, d.to, d.amount))
            .into_iter()
            .collect();
        let result = check_monotonic_step(&self.prev_effective, &effective, &transfers);
        let conserving = effective.iter().sum::<i64>() == self.initial_sum;
        self.interval_conservation_ok &= conserving;
        let ok = result.passed() && conserving;
        if !result.passed() {
            self.interval_monotonic_ok = false;
            self.violation_count += result.violations.len() as u64;
            self.first_violation_step.get_or_insert(step);
            for v in result.violations {
                if self.violations.len() < MAX_RECORDED_VIOLATIONS {
                    self.violations.push((step, v));
                }
            }
        }
        self.prev_effective = effective;
        ok
    }

    pub fn snapshot(&mut self, step: u64, deals: u64, messages: u64) -> StepTrace {
        let t = StepTrace {
            step,
            effective_loads: self.prev_effective.clone(),
            deals,
            messages,
            monotonic_ok: self.interval_monotonic_ok,
            conservation_ok: self.interval_conservation_ok,
        };
        self.interval_monotonic_ok = true;
        self.interval_conservation_ok = true;
        t
    }
}

pub(crate) fn deal_budget(loads: &[i64]) -> u128 {
    let k = (loads.iter().max().unwrap_or(&0) - loads.iter().min().unwrap_or(&0)) as u128;
    loads.len() as u128 * k * k
}

/// Runs the asynchronous algorithm until quiescent and 1-balanced, or for
/// `max_steps` deliveries.
pub fn run_async(graph: &Graph, loads: &LoadVector<i64>, config: &AsyncConfig) -> Result<AsyncRun, AsyncError> {
    if config.max_steps == 0 {
        return Err(AsyncError::InvalidParameter("max_steps must be at least 1".into()));
    }
    if loads.len() != graph.node_count() {
        return Err(AsyncError::InvalidParameter(format!(
            "{} loads for {} nodes",
            loads.len(),
            graph.node_count()
        )));
    }

    let edges = DirectedEdges::new(graph);
    let mut channels: Vec<Channel> = (0..edges.len())
        .map(|_| Channel { queue: VecDeque::new(), next_seq: 0, last_delivered: None })
        .collect();
    let mut scheduler = Scheduler::new(config.policy, graph.node_count());
    let mut protocol = Protocol::new(graph, loads.as_slice());
    let mut monitor = StepMonitor::new(protocol.effective_loads());
    let deal_budget = deal_budget(loads.as_slice());

    let mut messages_sent = 0u64;
    let mut deals: Vec<DealRecord> = Vec::new();
    let mut trace = Vec::new();
    let mut fifo_violations = 0u64;
    let mut step = 0u64;

    let enqueue = |channels: &mut Vec<Channel>, sent: Vec<(NodeId, Outgoing)>, now: u64, messages_sent: &mut u64| {
        for (src, o) in sent {
            let ch = &mut channels[edges.index(src, o.to)];
            let msg = AsyncMessage { kind: o.kind, src, dst: o.to, seq: ch.next_seq };
            ch.next_seq += 1;
            ch.queue.push_back((msg, now));
            *messages_sent += 1;
        }
    };

    let initial = protocol.start_all();
    enqueue(&mut channels, initial, 0, &mut messages_sent);
    let graph_ref = graph;
    let update_stopping = |protocol: &mut Protocol| {
        if !protocol.stopping
            && protocol.proposals_in_flight == 0
            && protocol.acks_in_flight == 0
            && !protocol.any_awaiting_acks()
        {
            let eff = LoadVector::new(protocol.effective_loads());
            if eff.is_ok_and(|eff| is_one_balanced(graph_ref, &eff)) {
                protocol.stopping = true;
            }
        }
    };
    update_stopping(&mut protocol);

    let mut terminated = false;
    loop {
        let quiet = channels.iter().all(|c| c.queue.is_empty());
        if protocol.stopping && quiet && protocol.all_idle() {
            terminated = true;
            break;
        }
        if step >= config.max_steps {
            break;
        }
        let views: Vec<ChannelView> = channels
            .iter()
            .map(|c| ChannelView {
                len: c.queue.len(),
                head_age: c.queue.front().map_or(0, |&(_, t)| step - t),
            })
            .collect();
        let Some(idx) = scheduler.choose(&views) else {
            // Nothing in flight but not done: every node is waiting on
            // nothing, which the protocol never produces.
            break;
        };
        step += 1;
        let (msg, _) = channels[idx].queue.pop_front().expect("scheduler picks non-empty channels");
        if channels[idx].last_delivered.is_some_and(|last| msg.seq <= last) {
            fifo_violations += 1;
        }
        channels[idx].last_delivered = Some(msg.seq);

        let handled = protocol.deliver(msg, true, true, step);
        if let Some(e) = handled.unexpected_ack {
            return Err(e.into());
        }
        enqueue(&mut channels, handled.sent, step, &mut messages_sent);
        monitor.observe(step, protocol.effective_loads(), handled.deal.as_ref());
        if let Some(d) = handled.deal {
            deals.push(d);
        }
        update_stopping(&mut protocol);

        if config.trace_stride > 0 && step.is_multiple_of(config.trace_stride) {
            trace.push(monitor.snapshot(step, deals.len() as u64, messages_sent));
        }
    }
    if trace.last().is_none_or(|t| t.step != step) {
        trace.push(monitor.snapshot(step, deals.len() as u64, messages_sent));
    }

    let final_values = protocol.effective_loads();
    let sum_drift = final_values.iter().sum::<i64>() - monitor.initial_sum;
    let final_loads = LoadVector::new(final_values).expect("monotonic runs never create negative loads");
    let one_balanced = is_one_balanced(graph, &final_loads);
    let gap_check_failures = deals.iter().filter(|d| !d.passes_gap_check()).count() as u64;
    let deal_count = deals.len() as u64;
    Ok(AsyncRun {
        final_loads,
        verdict: AsyncVerdict {
            steps: step,
            terminated,
            horizon_exceeded: !terminated,
            one_balanced,
            deal_count,
            deal_budget,
            within_deal_budget: deal_count as u128 <= deal_budget,
            messages_sent,
            monotonic_violations: monitor.violation_count,
            first_violation_step: monitor.first_violation_step,
            gap_check_failures,
            fifo_violations,
            sum_drift,
        },
        deals,
        trace,
        violations: monitor.violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, LoadInit, Topology};

    fn config(policy: SchedulePolicy) -> AsyncConfig {
        AsyncConfig { policy, max_steps: 100_000, trace_stride: 1 }
    }

    #[test]
    fn edge_balances_under_every_policy() {
        let (g, loads) = generate(&Topology::Path(2), &LoadInit::Explicit(vec![10i64, 0])).unwrap();
        for policy in [
            SchedulePolicy::RoundRobinFair,
            SchedulePolicy::RandomFair { seed: 3 },
            SchedulePolicy::AdversarialLongestQueue { seed: 3 },
        ] {
            let run = run_async(&g, &loads, &config(policy)).unwrap();
            assert!(run.verdict.terminated, "{policy:?}");
            assert_eq!(run.final_loads.as_slice(), &[5, 5]);
            assert_eq!(run.verdict.sum_drift, 0);
            assert_eq!(run.verdict.monotonic_violations, 0);
        }
    }

    #[test]
    fn balanced_input_makes_no_deals() {
        let (g, loads) = generate(&Topology::Path(4), &LoadInit::Explicit(vec![0i64, 1, 1, 2])).unwrap();
        let run = run_async(&g, &loads, &config(SchedulePolicy::RoundRobinFair)).unwrap();
        assert!(run.verdict.terminated);
        assert_eq!(run.verdict.deal_count, 0);
        assert_eq!(run.final_loads, loads);
    }

    #[test]
    fn seeded_path_runs_conserve_and_balance() {
        let (g, loads) = generate(&Topology::Path(3), &LoadInit::Explicit(vec![9i64, 0, 4])).unwrap();
        for seed in [1, 2] {
            let run = run_async(&g, &loads, &config(SchedulePolicy::RandomFair { seed })).unwrap();
            assert!(run.verdict.terminated && run.verdict.one_balanced);
            assert_eq!(run.final_loads.total(), 13);
            assert!(run.deals.iter().all(DealRecord::passes_gap_check));
            assert_eq!(run.verdict.fifo_violations, 0);
        }
    }

    #[test]
    fn horizon_is_reported() {
        let (g, loads) = generate(&Topology::Path(2), &LoadInit::Explicit(vec![10i64, 0])).unwrap();
        let run = run_async(
            &g,
            &loads,
            &AsyncConfig { policy: SchedulePolicy::RoundRobinFair, max_steps: 2, trace_stride: 0 },
        )
        .unwrap();
        assert!(run.verdict.horizon_exceeded);
        assert_eq!(run.trace.len(), 1);
    }
}
