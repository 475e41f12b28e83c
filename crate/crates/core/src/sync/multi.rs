//! Multi-neighbor rounds: water-filling proposals and unit round-robin
//! acceptance.

use crate::graph::{Graph, LoadVector, NodeId};
use crate::metrics::Transfer;
use crate::scalar::DiscreteLoad;

use super::{finish_round, neighborhood_sets, Proposal, RoundReport};

/// Outcome of one water-filling pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaterfillPlan<S> {
    /// Units proposed to each lower neighbor, in the order given.
    pub props: Vec<S>,
    pub tentative_load: S,
}

/// Water-filling plan of a node holding `p_load` whose lower neighbors
/// have `v_less_loads` (ascending).
///
/// One unit moves per iteration to the cursor neighbor while
/// `tentative >= load(p_i) + prop(i) + 2`; the cursor advances when the
/// cursor's planned load exceeds the next neighbor's, otherwise it resets
/// to the first neighbor.
///
/// # Panics
///
/// If the input is not ascending or the loop exits while some neighbor
/// still satisfies the transfer condition.
pub fn plan_waterfill<S: DiscreteLoad>(p_load: &S, v_less_loads: &[S]) -> WaterfillPlan<S> {
    assert!(
        v_less_loads.windows(2).all(|w| w[0] <= w[1]),
        "lower neighbors must be sorted ascending"
    );
    let q = v_less_loads.len();
    let mut props = vec![S::zero(); q];
    let mut tentative = p_load.clone();
    if q == 0 {
        return WaterfillPlan { props, tentative_load: tentative };
    }

    let planned = |props: &[S], j: usize| v_less_loads[j].clone() + props[j].clone();
    let mut i = 0;
    while tentative >= planned(&props, i) + S::two() {
        tentative = tentative - S::one();
        props[i] = props[i].clone() + S::one();
        if i + 1 < q && planned(&props, i) > planned(&props, i + 1) {
            i += 1;
        } else {
            i = 0;
        }
    }

    assert!(
        (0..q).all(|j| tentative < planned(&props, j) + S::two()),
        "water-filling stopped with a neighbor still two below the tentative load"
    );
    WaterfillPlan { props, tentative_load: tentative }
}

/// A proposal as seen by its receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncomingProposal<S> {
    pub from: NodeId,
    pub amount: S,
    pub tentative_load: S,
}

/// Units accepted from each incoming proposal (same order as `incoming`).
///
/// Proposers are visited by tentative load descending, lowest id on ties;
/// each pass takes one unit from every proposer that still has units left
/// and whose tentative load is above the receiver's current load. Once a
/// unit is taken from a proposer, its tentative load also caps every later
/// unit, so the receiver never ends above a donor's tentative load.
pub fn accept_multi<S: DiscreteLoad>(receiver_load: &S, incoming: &[IncomingProposal<S>]) -> Vec<S> {
    let mut order: Vec<usize> = (0..incoming.len()).collect();
    order.sort_by(|&a, &b| {
        incoming[b]
            .tentative_load
            .cmp(&incoming[a].tentative_load)
            .then(incoming[a].from.cmp(&incoming[b].from))
    });

    let mut accepted = vec![S::zero(); incoming.len()];
    let mut current = receiver_load.clone();
    let mut cap: Option<S> = None;
    loop {
        let mut progressed = false;
        for &k in &order {
            let prop = &incoming[k];
            let limit = match &cap {
                Some(c) if *c < prop.tentative_load => c,
                _ => &prop.tentative_load,
            };
            if accepted[k] < prop.amount && current < *limit {
                accepted[k] = accepted[k].clone() + S::one();
                current = current + S::one();
                cap = Some(limit.clone());
                progressed = true;
            }
        }
        if !progressed {
            return accepted;
        }
    }
}

/// One multi-neighbor round.
pub fn round_multi<S: DiscreteLoad>(
    graph: &Graph,
    loads: &LoadVector<S>,
) -> (LoadVector<S>, RoundReport<S>) {
    let mut proposals = Vec::new();
    for p in graph.nodes() {
        let mut lower = neighborhood_sets(graph, loads, p).v_less;
        if lower.is_empty() {
            continue;
        }
        lower.sort_by(|a, b| loads[*a].cmp(&loads[*b]).then(a.cmp(b)));
        let lower_loads: Vec<S> = lower.iter().map(|&v| loads[v].clone()).collect();
        let plan = plan_waterfill(&loads[p], &lower_loads);
        for (&v, amount) in lower.iter().zip(plan.props) {
            if amount.is_positive() {
                proposals.push(Proposal {
                    from: p,
                    to: v,
                    amount,
                    tentative_load: Some(plan.tentative_load.clone()),
                });
            }
        }
    }

    let mut inbox: Vec<Vec<usize>> = vec![Vec::new(); graph.node_count()];
    for (idx, prop) in proposals.iter().enumerate() {
        inbox[prop.to.0].push(idx);
    }
    let mut deals = Vec::new();
    for receiver in graph.nodes() {
        let indices = &inbox[receiver.0];
        if indices.is_empty() {
            continue;
        }
        let incoming: Vec<IncomingProposal<S>> = indices
            .iter()
            .map(|&idx| IncomingProposal {
                from: proposals[idx].from,
                amount: proposals[idx].amount.clone(),
                tentative_load: proposals[idx].tentative_load.clone().expect("multi proposals carry a tentative load"),
            })
            .collect();
        for (prop, amount) in incoming.iter().zip(accept_multi(&loads[receiver], &incoming)) {
            if amount.is_positive() {
                deals.push(Transfer::new(prop.from, receiver, amount));
            }
        }
    }
    deals.sort_by_key(|t| (t.from, t.to));

    finish_round(graph, loads, proposals, deals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, LoadInit, Topology};

    fn plan(p: i64, lower: &[i64]) -> (Vec<i64>, i64) {
        let WaterfillPlan { props, tentative_load } = plan_waterfill(&p, lower);
        (props, tentative_load)
    }

    #[test]
    fn waterfill_examples() {
        assert_eq!(plan(12, &[0, 2]), (vec![5, 2], 5));
        assert_eq!(plan(16, &[0, 0, 0]), (vec![4, 4, 4], 4));
        assert_eq!(plan(3, &[2]), (vec![0], 3));
        assert_eq!(plan(5, &[]), (vec![], 5));
    }

    #[test]
    fn two_donor_acceptance() {
        let incoming = [
            IncomingProposal { from: NodeId(1), amount: 4i64, tentative_load: 6 },
            IncomingProposal { from: NodeId(2), amount: 3, tentative_load: 5 },
        ];
        let accepted = accept_multi(&2, &incoming);
        // After the unit from node 2 the receiver stops at 5, node 2's tentative load.
        assert_eq!(accepted, vec![2, 1]);
        assert_eq!(2 + accepted.iter().sum::<i64>(), 5);
    }

    #[test]
    fn acceptance_order_ignores_input_order() {
        let a = IncomingProposal { from: NodeId(4), amount: 2i64, tentative_load: 5 };
        let b = IncomingProposal { from: NodeId(3), amount: 2, tentative_load: 5 };
        assert_eq!(accept_multi(&2, &[a.clone(), b.clone()]), vec![1, 2]);
        assert_eq!(accept_multi(&2, &[b, a]), vec![2, 1]);
    }

    #[test]
    fn star_equalizes_in_one_round() {
        let (g, loads) = generate(
            &Topology::Star(4),
            &LoadInit::PointMass { node: 0, amount: 16i64, base: 0 },
        )
        .unwrap();
        let (after, report) = round_multi(&g, &loads);
        assert_eq!(after.as_slice(), &[4, 4, 4, 4]);
        assert_eq!(report.deals.len(), 3);
    }

    #[test]
    fn small_gap_is_fixed() {
        let (g, loads) = generate(&Topology::Path(2), &LoadInit::Explicit(vec![5i64, 4])).unwrap();
        let (after, report) = round_multi(&g, &loads);
        assert_eq!(after, loads);
        assert!(report.proposals.is_empty());
    }
}
