use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::fault::{inject, FaultModel, InjectedFaults};
use super::link::{Delivery, Link, Origin, Payload, Tag};
use crate::asynchronous::{
    deal_budget, AsyncMessage, ChannelView, DealRecord, DirectedEdges, MessageKind, Outgoing, Phase, Protocol,
    SchedulePolicy, Scheduler, StepMonitor, StepTrace,
};
use crate::check::{check_monotonic_step, Violation};
use crate::graph::{Graph, LoadVector, NodeId};
use crate::metrics::{is_one_balanced, Transfer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfStabConfig {
    pub policy: SchedulePolicy,
    pub max_steps: u64,
    pub trace_stride: u64,
    /// Channel bound.
    pub k: usize,
    pub faults: FaultModel,
}

/// Per-link actions allowed in one scheduling decision.
const MICRO_ACTION_CAP: u64 = 1_000_000;

/// What the faults did and how the run recovered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StabilizationReport {
    pub injected: InjectedFaults,
    /// First step of the fault-free suffix: one past the last step in which
    /// anything fault-related happened (0 if nothing did).
    pub stabilization_step: u64,
    pub fault_events: u64,
    /// Garbage payloads that parsed as protocol messages and were delivered.
    pub phantom_deliveries: u64,
    /// Garbage payloads that did not parse and were dropped.
    pub blobs_discarded: u64,
    pub stale_deliveries: u64,
    pub losses: u64,
    pub watchdog_restarts: u64,
    pub unexpected_acks: u64,
    pub clamps: u64,
    /// Load added by clamping negative loads to zero.
    pub clamp_drift: i64,
    /// Effective-load sum at the stabilization step minus the true initial sum.
    pub prefix_drift: i64,
    pub suffix_monotonic: bool,
    pub suffix_conserving: bool,
    pub suffix_gap_check: bool,
    pub suffix_deals: u64,
    /// `n * K^2` for the effective loads at the stabilization step.
    pub suffix_deal_budget: u128,
    pub ends_one_balanced: bool,
    pub max_channel_occupancy: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfStabVerdict {
    pub steps: u64,
    pub terminated: bool,
    pub horizon_exceeded: bool,
    pub one_balanced: bool,
    pub deal_count: u64,
    pub messages_sent: u64,
    pub frames_sent: u64,
    pub acks_sent: u64,
    pub monotonic_violations: u64,
    pub first_violation_step: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SelfStabRun {
    /// Effective loads at the end. May be negative only if faults forged
    /// acks that were never folded.
    pub final_loads: Vec<i64>,
    pub deals: Vec<DealRecord>,
    pub trace: Vec<StepTrace>,
    pub violations: Vec<(u64, Violation<i64>)>,
    pub verdict: SelfStabVerdict,
    pub report: StabilizationReport,
}

struct Links {
    links: Vec<Link>,
    edges: DirectedEdges,
    next_id: u64,
    next_seq: Vec<u64>,
}

impl Links {
    fn enqueue(&mut self, sent: Vec<(NodeId, Outgoing)>, now: u64, messages: &mut u64) {
        for (src, o) in sent {
            let idx = self.edges.index(src, o.to);
            let msg = AsyncMessage { kind: o.kind, src, dst: o.to, seq: self.next_seq[idx] };
            self.next_seq[idx] += 1;
            self.links[idx].push(Payload::Message(msg), Tag { origin: Origin::Sent(self.next_id), enqueued: now });
            self.next_id += 1;
            *messages += 1;
        }
    }

    /// Whether `u` can still hear back from `q`: a matching request from
    /// `u` or answer from `q` is pending, or garbage may yet arrive.
    fn may_answer(&self, u: NodeId, q: NodeId, request: fn(&MessageKind) -> bool, answer: fn(&MessageKind) -> bool) -> bool {
        let out = &self.links[self.edges.index(u, q)];
        let back = &self.links[self.edges.index(q, u)];
        out.garbage() + back.garbage() > 0
            || out.pending_messages().any(|m| request(&m.kind))
            || back.pending_messages().any(|m| answer(&m.kind))
    }
}

/// Restarts nodes whose wait nothing in flight can end. Returns the
/// number of restarts.
fn watchdog(protocol: &mut Protocol, links: &Links, sent: &mut Vec<(NodeId, Outgoing)>) -> u64 {
    let mut fired = 0;
    for u in 0..protocol.nodes.len() {
        let id = NodeId(u);
        let node = &protocol.nodes[u];
        let stuck = match node.phase {
            Phase::Idle => !protocol.stopping && !protocol.neighbors[u].is_empty(),
            Phase::Querying => !node.awaiting_replies.iter().any(|&q| {
                links.may_answer(
                    id,
                    q,
                    |k| matches!(k, MessageKind::LoadQuery),
                    |k| matches!(k, MessageKind::LoadReply { .. }),
                )
            }),
            Phase::AwaitingAcks => !node.pending_acks.iter().any(|&q| {
                links.may_answer(
                    id,
                    q,
                    |k| matches!(k, MessageKind::Proposal { .. }),
                    |k| matches!(k, MessageKind::Ack { .. }),
                )
            }),
        };
        if stuck {
            let node = &mut protocol.nodes[u];
            node.phase = Phase::Idle;
            node.awaiting_replies.clear();
            node.pending_acks.clear();
            protocol.restart(id, sent);
            fired += 1;
        }
    }
    fired
}

/// Runs the asynchronous algorithm over self-stabilizing links, starting
/// from a configuration hit by `config.faults`.
pub fn run_selfstab(graph: &Graph, loads: &LoadVector<i64>, config: &SelfStabConfig) -> Result<SelfStabRun, StabError> {
    if config.max_steps == 0 {
        return Err(StabError::InvalidParameter("max_steps must be at least 1".into()));
    }
    if loads.len() != graph.node_count() {
        return Err(StabError::InvalidParameter(format!(
            "{} loads for {} nodes",
            loads.len(),
            graph.node_count()
        )));
    }
    if config.faults.garbage > config.k {
        return Err(StabError::InvalidParameter(format!(
            "{} garbage frames per queue exceed the channel bound {}",
            config.faults.garbage, config.k
        )));
    }

    let n = graph.node_count();
    let edges = DirectedEdges::new(graph);
    let mut links = Links {
        links: (0..edges.len()).map(|_| Link::new(config.k)).collect(),
        next_seq: vec![0; edges.len()],
        edges,
        next_id: 0,
    };
    let mut scheduler = Scheduler::new(config.policy, n);
    let mut micro_rng = ChaCha8Rng::seed_from_u64(config.faults.seed ^ 0x6c69_6e6b);
    let mut protocol = Protocol::new(graph, loads.as_slice());
    let true_sum: i64 = loads.as_slice().iter().sum();

    let mut messages_sent = 0u64;
    let initial = protocol.start_all();
    links.enqueue(initial, 0, &mut messages_sent);

    let scale = loads.as_slice().iter().copied().max().unwrap_or(0) + 1;
    let pairs = links.edges.pairs.clone();
    let injected = inject(
        &config.faults,
        config.k,
        &mut protocol.nodes,
        &protocol.neighbors,
        &mut links.links,
        &pairs,
        scale,
    );
    let mut dirty: Vec<NodeId> = injected.corrupted_nodes.clone();

    let mut report = StabilizationReport { injected, capacity: config.k.max(1), ..Default::default() };
    let mut last_fault_step: Option<u64> = None;
    let mut step = 0u64;

    let mut sent = Vec::new();
    let fired = watchdog(&mut protocol, &links, &mut sent);
    if fired > 0 {
        report.watchdog_restarts += fired;
        report.fault_events += fired;
        last_fault_step = Some(0);
    }
    links.enqueue(sent, 0, &mut messages_sent);
    if !report.injected.corrupted_nodes.is_empty() || report.injected.garbage_frames + report.injected.garbage_acks > 0 {
        last_fault_step = Some(0);
    }

    let start = protocol.effective_loads();
    let mut monitor = StepMonitor::new(start.clone());
    let mut sums: Vec<i64> = vec![start.iter().sum()];
    let mut step_ok: Vec<bool> = vec![true];
    let mut loads_at_last_fault = start;

    let update_stopping = |protocol: &mut Protocol, links: &Links, dirty: &[NodeId]| {
        if !protocol.stopping
            && dirty.is_empty()
            && protocol.proposals_in_flight == 0
            && protocol.acks_in_flight == 0
            && !protocol.any_awaiting_acks()
            && links.links.iter().all(|l| l.garbage() == 0)
        {
            let eff = LoadVector::new(protocol.effective_loads());
            if eff.is_ok_and(|eff| is_one_balanced(graph, &eff)) {
                protocol.stopping = true;
            }
        }
    };
    update_stopping(&mut protocol, &links, &dirty);

    let mut deals: Vec<DealRecord> = Vec::new();
    let mut trace = Vec::new();
    let mut frames_sent = 0u64;
    let mut acks_sent = 0u64;
    let mut terminated = false;

    loop {
        if protocol.stopping && protocol.all_idle() && links.links.iter().all(|l| l.work() == 0) {
            terminated = true;
            break;
        }
        if step >= config.max_steps {
            break;
        }
        let views: Vec<ChannelView> = links
            .links
            .iter()
            .map(|l| ChannelView { len: l.work(), head_age: l.oldest().map_or(0, |t| step - t) })
            .collect();
        let Some(idx) = scheduler.choose(&views) else {
            break;
        };
        step += 1;
        let mut faults_now = 0u64;

        let micro = links.links[idx].run_micro(&mut micro_rng, MICRO_ACTION_CAP);
        frames_sent += micro.frames_sent;
        acks_sent += micro.acks_sent;
        faults_now += micro.fault_events;
        for lost in &micro.lost {
            if let Payload::Message(m) = lost {
                protocol.forget(m.kind, m.dst);
            }
            report.losses += 1;
        }

        let mut sent = Vec::new();
        let mut deal = None;
        match micro.delivered {
            Some((Payload::Blob(_), _)) => report.blobs_discarded += 1,
            Some((Payload::Message(m), delivery)) => {
                match delivery {
                    Delivery::Legit => {}
                    Delivery::Stale => report.stale_deliveries += 1,
                    Delivery::Garbage => report.phantom_deliveries += 1,
                }
                let handled = protocol.deliver(m, delivery == Delivery::Legit, true, step);
                if handled.unexpected_ack.is_some() {
                    report.unexpected_acks += 1;
                    faults_now += 1;
                }
                sent = handled.sent;
                deal = handled.deal;
            }
            None => {}
        }

        for node in protocol.nodes.iter_mut() {
            if node.load < 0 {
                report.clamps += 1;
                report.clamp_drift -= node.load;
                node.load = 0;
                node.t_load = node.t_load.max(0);
                faults_now += 1;
            }
        }
        let before = dirty.len();
        dirty.retain(|&u| protocol.nodes[u.0].cycles_started == 0);
        faults_now += (before - dirty.len()) as u64;

        links.enqueue(sent, step, &mut messages_sent);
        let mut restarted = Vec::new();
        let fired = watchdog(&mut protocol, &links, &mut restarted);
        report.watchdog_restarts += fired;
        faults_now += fired;
        links.enqueue(restarted, step, &mut messages_sent);

        let eff = protocol.effective_loads();
        let transfers: Vec<Transfer<i64>> =
            deal.iter().map(|d: &DealRecord| Transfer::new(d.from, d.to, d.amount)).collect();
        step_ok.push(check_monotonic_step(&monitor.prev_effective, &eff, &transfers).passed());
        sums.push(eff.iter().sum());
        if faults_now > 0 {
            report.fault_events += faults_now;
            last_fault_step = Some(step);
            loads_at_last_fault = eff.clone();
        }
        monitor.observe(step, eff, deal.as_ref());
        if let Some(d) = deal {
            deals.push(d);
        }
        update_stopping(&mut protocol, &links, &dirty);

        if config.trace_stride > 0 && step.is_multiple_of(config.trace_stride) {
            trace.push(monitor.snapshot(step, deals.len() as u64, messages_sent));
        }
    }
    if trace.last().is_none_or(|t| t.step != step) {
        trace.push(monitor.snapshot(step, deals.len() as u64, messages_sent));
    }

    let s = last_fault_step.map_or(0, |t| t + 1);
    let base = s.saturating_sub(1) as usize;
    report.stabilization_step = s;
    report.prefix_drift = sums[base.min(sums.len() - 1)] - true_sum;
    report.suffix_monotonic = step_ok.iter().skip(s as usize).all(|&ok| ok);
    report.suffix_conserving = sums.iter().skip(base).all(|&x| x == sums[base.min(sums.len() - 1)]);
    let suffix: Vec<&DealRecord> = deals.iter().filter(|d| d.step >= s).collect();
    report.suffix_gap_check = suffix.iter().all(|d| d.passes_gap_check());
    report.suffix_deals = suffix.len() as u64;
    report.suffix_deal_budget = deal_budget(&loads_at_last_fault);
    report.max_channel_occupancy = links.links.iter().map(|l| l.max_occupancy).max().unwrap_or(0);

    let final_loads = protocol.effective_loads();
    let one_balanced = LoadVector::new(final_loads.clone()).is_ok_and(|l| is_one_balanced(graph, &l));
    report.ends_one_balanced = one_balanced;

    Ok(SelfStabRun {
        final_loads,
        verdict: SelfStabVerdict {
            steps: step,
            terminated,
            horizon_exceeded: !terminated,
            one_balanced,
            deal_count: deals.len() as u64,
            messages_sent,
            frames_sent,
            acks_sent,
            monotonic_violations: monitor.violation_count,
            first_violation_step: monitor.first_violation_step,
        },
        deals,
        trace,
        violations: monitor.violations,
        report,
    })
}
