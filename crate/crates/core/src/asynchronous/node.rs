//! Per-node state machine of the asynchronous algorithm.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::message::{MessageKind, Outgoing};
use crate::graph::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Idle,
    /// Waiting for load replies from `awaiting_replies`.
    Querying,
    /// Waiting for acks from `pending_acks`.
    AwaitingAcks,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NodeError {
    #[error("node {node} got an ack from {from}, which it was not waiting for")]
    UnexpectedAck { node: NodeId, from: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsyncNodeState {
    pub id: NodeId,
    pub load: i64,
    /// Load plus everything received since the last fold.
    pub t_load: i64,
    pub last_received_load: i64,
    pub last_gave_load: i64,
    /// Tentative load announced with this cycle's proposals.
    pub tentative_load: i64,
    pub neighbor_cache: BTreeMap<NodeId, i64>,
    pub pending_acks: BTreeSet<NodeId>,
    pub awaiting_replies: BTreeSet<NodeId>,
    pub phase: Phase,
    /// Cycles started so far.
    pub cycles_started: u64,
}

/// What happened when a proposal was answered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Acceptance {
    pub deal: i64,
    /// Receiver's `t_load` before the deal.
    pub t_load_before: i64,
    pub proposer_tentative: i64,
}

impl AsyncNodeState {
    pub fn new(id: NodeId, load: i64) -> Self {
        AsyncNodeState {
            id,
            load,
            t_load: load,
            last_received_load: 0,
            last_gave_load: 0,
            tentative_load: load,
            neighbor_cache: BTreeMap::new(),
            pending_acks: BTreeSet::new(),
            awaiting_replies: BTreeSet::new(),
            phase: Phase::Idle,
            cycles_started: 0,
        }
    }

    /// Load the node would report: held load adjusted by unfolded bookkeeping.
    pub fn current_load(&self) -> i64 {
        self.load + self.last_received_load - self.last_gave_load
    }

    /// Starts reading neighbor loads.
    pub fn begin_query(&mut self, neighbors: &[NodeId]) -> Vec<Outgoing> {
        self.phase = Phase::Querying;
        self.awaiting_replies = neighbors.iter().copied().collect();
        neighbors
            .iter()
            .map(|&to| Outgoing { to, kind: MessageKind::LoadQuery })
            .collect()
    }

    pub fn on_query(&self, from: NodeId) -> Outgoing {
        Outgoing { to: from, kind: MessageKind::LoadReply { load: self.current_load().max(0) } }
    }

    /// Records a reply. Once every awaited reply is in, starts a cycle and
    /// returns its proposals.
    pub fn on_reply(&mut self, from: NodeId, load: i64) -> Option<Vec<Outgoing>> {
        self.neighbor_cache.insert(from, load);
        let completes = self.phase == Phase::Querying
            && self.awaiting_replies.remove(&from)
            && self.awaiting_replies.is_empty();
        completes.then(|| node_start_cycle(self))
    }

    /// Answers a proposal. Handled in every phase.
    pub fn on_proposal(&mut self, from: NodeId, amount: i64, tentative_load: i64) -> (Outgoing, Acceptance) {
        let t_load_before = self.t_load;
        let gap = tentative_load - self.t_load;
        let deal = if gap > 0 { gap.min(amount).max(0) } else { 0 };
        self.last_received_load += deal;
        self.t_load += deal;
        (
            Outgoing { to: from, kind: MessageKind::Ack { deal } },
            Acceptance { deal, t_load_before, proposer_tentative: tentative_load },
        )
    }

    /// Books an ack. Returns `Ok(true)` when it completed the cycle.
    pub fn on_ack(&mut self, from: NodeId, deal: i64) -> Result<bool, NodeError> {
        if !self.pending_acks.remove(&from) {
            return Err(NodeError::UnexpectedAck { node: self.id, from });
        }
        self.last_gave_load += deal;
        if self.pending_acks.is_empty() && self.phase == Phase::AwaitingAcks {
            self.phase = Phase::Idle;
            return Ok(true);
        }
        Ok(false)
    }

    /// Folds the bookkeeping of the previous cycle into `load`.
    pub fn fold(&mut self) {
        self.load += self.last_received_load - self.last_gave_load;
        self.last_received_load = 0;
        self.last_gave_load = 0;
        self.t_load = self.load;
    }
}

/// Cycle start: fold, plan against the cached neighbor loads and emit
/// proposals. The node ends `AwaitingAcks` if it proposed, `Idle` otherwise.
pub fn node_start_cycle(state: &mut AsyncNodeState) -> Vec<Outgoing> {
    state.fold();
    state.cycles_started += 1;
    let t_load = state.t_load;
    state.tentative_load = t_load;
    state.pending_acks.clear();

    let v_less: Vec<(NodeId, i64)> = state
        .neighbor_cache
        .iter()
        .filter(|(_, &l)| l < t_load)
        .map(|(&q, &l)| (q, l))
        .collect();
    let Some(min_load) = v_less.iter().map(|&(_, l)| l).min() else {
        state.phase = Phase::Idle;
        return Vec::new();
    };

    let load_to_transfer = (t_load - min_load) / 2;
    let tentative = t_load - load_to_transfer;
    state.tentative_load = tentative;
    let pv_less: Vec<(NodeId, i64)> = v_less.into_iter().filter(|&(_, l)| l < tentative).collect();
    let amounts = rr_proposal(load_to_transfer, &pv_less, tentative);

    let out: Vec<Outgoing> = pv_less
        .iter()
        .zip(amounts)
        .filter(|&(_, amount)| amount > 0)
        .map(|(&(to, _), amount)| Outgoing {
            to,
            kind: MessageKind::Proposal { amount, tentative_load: tentative },
        })
        .collect();
    state.pending_acks = out.iter().map(|o| o.to).collect();
    state.phase = if out.is_empty() { Phase::Idle } else { Phase::AwaitingAcks };
    out
}

/// Splits `load_to_transfer` among `targets` (id, cached load) without
/// planning any target above `tentative`. While the whole set can be
/// raised by `tentative - max`, it is; the rest is handed out one unit at
/// a time, ascending id, starting at the lowest-loaded target. Amounts are
/// aligned with `targets`.
pub fn rr_proposal(load_to_transfer: i64, targets: &[(NodeId, i64)], tentative: i64) -> Vec<i64> {
    let mut amounts = vec![0i64; targets.len()];
    let mut planned: Vec<i64> = targets.iter().map(|&(_, l)| l).collect();
    let mut budget = load_to_transfer.max(0);
    let mut members: Vec<usize> = (0..targets.len()).filter(|&i| planned[i] < tentative).collect();
    members.sort_by_key(|&i| targets[i].0);

    while !members.is_empty() && budget > 0 {
        let m = members.iter().map(|&i| planned[i]).max().expect("members is non-empty");
        let step = tentative - m;
        let need = step * members.len() as i64;
        if need <= budget {
            for &i in &members {
                amounts[i] += step;
                planned[i] += step;
            }
            budget -= need;
            members.retain(|&i| planned[i] < tentative);
            continue;
        }

        let start = members
            .iter()
            .enumerate()
            .min_by_key(|&(_, &i)| (planned[i], targets[i].0))
            .map(|(pos, _)| pos)
            .expect("members is non-empty");
        let mut pos = start;
        let mut idle_visits = 0;
        while budget > 0 && idle_visits < members.len() {
            let i = members[pos];
            if planned[i] < tentative {
                amounts[i] += 1;
                planned[i] += 1;
                budget -= 1;
                idle_visits = 0;
            } else {
                idle_visits += 1;
            }
            pos = (pos + 1) % members.len();
        }
        break;
    }
    amounts
}
