//! Transient faults applied to the initial configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::link::{DataFrame, Link, Origin, Payload, Tag};
use crate::asynchronous::{AsyncMessage, AsyncNodeState, MessageKind, Phase};
use crate::graph::NodeId;

/// Which parts of the starting state get scrambled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FaultModel {
    pub seed: u64,
    /// Garbage frames placed in each data queue and each ack queue, at most
    /// `k`; the actual count per queue is drawn from `0..=garbage`.
    pub garbage: usize,
    /// Scramble node bookkeeping, phase, pending sets and caches.
    pub corrupt_nodes: bool,
    /// Scramble sender and receiver link state.
    pub corrupt_links: bool,
    /// Explicit `last_gave_load` values, applied after the random faults.
    pub gave_overrides: Vec<(NodeId, i64)>,
}

impl FaultModel {
    pub fn none() -> Self {
        FaultModel::default()
    }

    pub fn is_none(&self) -> bool {
        self.garbage == 0 && !self.corrupt_nodes && !self.corrupt_links && self.gave_overrides.is_empty()
    }
}

/// Counts of what was injected.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectedFaults {
    pub garbage_frames: u64,
    pub garbage_acks: u64,
    pub corrupted_nodes: Vec<NodeId>,
    pub corrupted_senders: u64,
}

fn random_kind(rng: &mut ChaCha8Rng, scale: i64) -> MessageKind {
    match rng.random_range(0..4) {
        0 => MessageKind::LoadQuery,
        1 => MessageKind::LoadReply { load: rng.random_range(0..=scale) },
        2 => MessageKind::Proposal { amount: rng.random_range(0..=scale), tentative_load: rng.random_range(0..=scale) },
        _ => MessageKind::Ack { deal: rng.random_range(0..=scale) },
    }
}

fn random_payload(rng: &mut ChaCha8Rng, src: NodeId, dst: NodeId, scale: i64) -> Payload {
    if rng.random_bool(0.5) {
        Payload::Blob(rng.random())
    } else {
        let kind = random_kind(rng, scale);
        Payload::Message(AsyncMessage { kind, src, dst, seq: u64::MAX })
    }
}

/// Applies `model` to freshly built nodes and links. `pairs[i]` is the
/// (src, dst) of `links[i]`; `scale` bounds injected load values.
pub(crate) fn inject(
    model: &FaultModel,
    k: usize,
    nodes: &mut [AsyncNodeState],
    neighbors: &[Vec<NodeId>],
    links: &mut [Link],
    pairs: &[(NodeId, NodeId)],
    scale: i64,
) -> InjectedFaults {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut injected = InjectedFaults::default();
    let per_queue = model.garbage.min(k);
    let scale = scale.max(1);

    for (link, &(src, dst)) in links.iter_mut().zip(pairs) {
        if per_queue > 0 {
            let frames = rng.random_range(0..=per_queue);
            for _ in 0..frames {
                let payload = random_payload(&mut rng, src, dst, scale);
                link.data.push_back((DataFrame { payload, bit: rng.random_bool(0.5) }, Origin::Fault));
            }
            let acks = rng.random_range(0..=per_queue);
            link.acks.extend(std::iter::repeat_n(Origin::Fault, acks));
            injected.garbage_frames += frames as u64;
            injected.garbage_acks += acks as u64;
        }
        if model.corrupt_links {
            link.receiver.last_bit = rng.random_bool(0.5);
            link.receiver.swallow = rng.random_range(0..=k);
            if rng.random_bool(0.3) {
                link.sender.current = Some(random_payload(&mut rng, src, dst, scale));
                link.sender.bit = rng.random_bool(0.5);
                link.sender.ack_count = rng.random_range(0..=2 * k);
                link.sender_tag = Some(Tag { origin: Origin::Fault, enqueued: 0 });
                injected.corrupted_senders += 1;
            }
        }
    }

    if model.corrupt_nodes {
        for node in nodes.iter_mut() {
            if !rng.random_bool(0.5) {
                continue;
            }
            let nbrs = &neighbors[node.id.0];
            node.last_received_load = rng.random_range(0..=scale);
            node.last_gave_load = rng.random_range(0..=scale);
            node.t_load = rng.random_range(0..=2 * scale);
            node.tentative_load = rng.random_range(0..=2 * scale);
            node.neighbor_cache = nbrs.iter().map(|&q| (q, rng.random_range(0..=scale))).collect();
            let subset = |rng: &mut ChaCha8Rng| nbrs.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
            node.phase = match rng.random_range(0..3) {
                0 => Phase::Idle,
                1 => Phase::Querying,
                _ => Phase::AwaitingAcks,
            };
            node.awaiting_replies = subset(&mut rng);
            node.pending_acks = subset(&mut rng);
            injected.corrupted_nodes.push(node.id);
        }
    }
    for &(u, gave) in &model.gave_overrides {
        if let Some(node) = nodes.get_mut(u.0) {
            node.last_gave_load = gave;
            if !injected.corrupted_nodes.contains(&u) {
                injected.corrupted_nodes.push(u);
            }
        }
    }
    injected
}
