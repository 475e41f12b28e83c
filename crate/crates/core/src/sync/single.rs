//! Single-proposal rounds: every node proposes to at most one neighbor and
//! accepts at most one proposal.

use crate::graph::{Graph, LoadVector, NodeId};
use crate::metrics::Transfer;
use crate::scalar::{ContinuousLoad, DiscreteLoad, Load};

use super::{finish_round, Proposal, RoundReport};

/// Continuous round: propose half the largest downhill gap, accept the
/// largest incoming proposal.
pub fn round_continuous<S: ContinuousLoad>(
    graph: &Graph,
    loads: &LoadVector<S>,
) -> (LoadVector<S>, RoundReport<S>) {
    single_proposal_round(graph, loads, |gap| gap.is_positive().then(|| gap.half()))
}

/// Discrete round: propose `floor(gap / 2)` only when the gap is at least 2.
pub fn round_discrete<S: DiscreteLoad>(
    graph: &Graph,
    loads: &LoadVector<S>,
) -> (LoadVector<S>, RoundReport<S>) {
    single_proposal_round(graph, loads, |gap| {
        (*gap >= S::two()).then(|| gap.div_floor(&S::two()))
    })
}

fn single_proposal_round<S: Load>(
    graph: &Graph,
    loads: &LoadVector<S>,
    amount_for_gap: impl Fn(&S) -> Option<S>,
) -> (LoadVector<S>, RoundReport<S>) {
    // Phase 1: proposals, from round-start loads only.
    let mut proposals = Vec::new();
    for u in graph.nodes() {
        let Some(v) = proposal_target(graph, loads, u) else { continue };
        let gap = loads[u].clone() - loads[v].clone();
        if let Some(amount) = amount_for_gap(&gap) {
            proposals.push(Proposal { from: u, to: v, amount, tentative_load: None });
        }
    }

    // Phase 2: each receiver takes its largest proposal, lowest proposer id on ties.
    let mut best: Vec<Option<usize>> = vec![None; graph.node_count()];
    for (idx, p) in proposals.iter().enumerate() {
        let slot = &mut best[p.to.0];
        match *slot {
            Some(cur) if proposals[cur].amount >= p.amount => {}
            _ => *slot = Some(idx),
        }
    }
    let deals: Vec<Transfer<S>> = best
        .iter()
        .flatten()
        .map(|&idx| {
            let p = &proposals[idx];
            Transfer::new(p.from, p.to, p.amount.clone())
        })
        .collect();

    // Phase 3: atomic update.
    finish_round(graph, loads, proposals, deals)
}

/// The strictly lower neighbor with the largest gap, lowest id on ties.
pub fn proposal_target<S: Load>(graph: &Graph, loads: &LoadVector<S>, u: NodeId) -> Option<NodeId> {
    graph
        .neighbors(u)
        .iter()
        .copied()
        // Ascending scan with a strict comparison keeps the lowest id on ties.
        .reduce(|best, v| if loads[v] < loads[best] { v } else { best })
        .filter(|&v| loads[v] < loads[u])
}
