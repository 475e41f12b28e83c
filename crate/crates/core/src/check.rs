//! Per-step invariant checks. Checkers never fail; they return every
//! violation they find.

use std::fmt;

use num_rational::BigRational;
use num_traits::Zero;

use crate::graph::NodeId;
use crate::metrics::{is_fair_transfer, Transfer};
use crate::scalar::Load;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation<S> {
    /// Transfer did not go from a strictly higher to a strictly lower pre-state load.
    UphillTransfer { from: NodeId, to: NodeId, from_load: S, to_load: S },
    /// Receiver ended the step above the node that gave to it.
    ReceiverAboveDonor { from: NodeId, to: NodeId, from_after: S, to_after: S },
    MaxIncreased { before: S, after: S },
    MinDecreased { before: S, after: S },
    SumChanged { before: S, after: S },
    NegativeLoad { node: NodeId, load: S },
    UnfairTransfer { from: NodeId, to: NodeId, amount: S, gap: S },
    MatchingDegree { node: NodeId, incoming: usize, outgoing: usize },
    PotentialFloor { required: BigRational, drop: BigRational },
    NonPositiveAmount { from: NodeId, to: NodeId, amount: S },
    JoinedMinimum { node: NodeId, before: S, after: S },
    JoinedMaximum { node: NodeId, before: S, after: S },
    /// No node at the minimum gained (or none at the maximum lost).
    StalledExtreme { at_minimum: bool, load: S },
}

impl<S: fmt::Display> fmt::Display for Violation<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UphillTransfer { from, to, from_load, to_load } => {
                write!(f, "transfer {from}->{to} not downhill ({from_load} -> {to_load})")
            }
            Violation::ReceiverAboveDonor { from, to, from_after, to_after } => write!(
                f,
                "receiver {to} ended at {to_after}, above donor {from} at {from_after}"
            ),
            Violation::MaxIncreased { before, after } => {
                write!(f, "maximum load rose from {before} to {after}")
            }
            Violation::MinDecreased { before, after } => {
                write!(f, "minimum load fell from {before} to {after}")
            }
            Violation::SumChanged { before, after } => {
                write!(f, "load sum changed from {before} to {after}")
            }
            Violation::NegativeLoad { node, load } => write!(f, "node {node} has load {load}"),
            Violation::UnfairTransfer { from, to, amount, gap } => {
                write!(f, "transfer {from}->{to} of {amount} exceeds half the gap {gap}")
            }
            Violation::MatchingDegree { node, incoming, outgoing } => write!(
                f,
                "node {node} has {incoming} incoming and {outgoing} outgoing deals"
            ),
            Violation::PotentialFloor { required, drop } => {
                write!(f, "potential dropped by {drop}, required at least {required}")
            }
            Violation::NonPositiveAmount { from, to, amount } => {
                write!(f, "transfer {from}->{to} has non-positive amount {amount}")
            }
            Violation::JoinedMinimum { node, before, after } => {
                write!(f, "node {node} fell from {before} to the minimum ({after})")
            }
            Violation::JoinedMaximum { node, before, after } => {
                write!(f, "node {node} rose from {before} to the maximum ({after})")
            }
            Violation::StalledExtreme { at_minimum: true, load } => {
                write!(f, "no node at the minimum {load} gained load")
            }
            Violation::StalledExtreme { at_minimum: false, load } => {
                write!(f, "no node at the maximum {load} lost load")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult<S> {
    pub violations: Vec<Violation<S>>,
}

impl<S> CheckResult<S> {
    pub fn pass() -> Self {
        CheckResult { violations: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(mut self, other: CheckResult<S>) -> Self {
        self.violations.extend(other.violations);
        self
    }
}

impl<S> Default for CheckResult<S> {
    fn default() -> Self {
        Self::pass()
    }
}

/// Checks one round or step of a monotonic algorithm:
/// every transfer is positive, goes strictly downhill in the pre-state and
/// leaves the receiver no higher than the donor; the maximum never rises,
/// the minimum never falls, the sum is unchanged and no load is negative.
pub fn check_monotonic_step<S: Load>(
    before: &[S],
    after: &[S],
    transfers: &[Transfer<S>],
) -> CheckResult<S> {
    let mut violations = Vec::new();

    for t in transfers {
        if !t.amount.is_positive() {
            violations.push(Violation::NonPositiveAmount {
                from: t.from,
                to: t.to,
                amount: t.amount.clone(),
            });
        }
        let (from_load, to_load) = (&before[t.from.0], &before[t.to.0]);
        if from_load <= to_load {
            violations.push(Violation::UphillTransfer {
                from: t.from,
                to: t.to,
                from_load: from_load.clone(),
                to_load: to_load.clone(),
            });
        }
        let (from_after, to_after) = (&after[t.from.0], &after[t.to.0]);
        if to_after > from_after {
            violations.push(Violation::ReceiverAboveDonor {
                from: t.from,
                to: t.to,
                from_after: from_after.clone(),
                to_after: to_after.clone(),
            });
        }
    }

    if let (Some(b), Some(a)) = (before.iter().max(), after.iter().max()) {
        if a > b {
            violations.push(Violation::MaxIncreased { before: b.clone(), after: a.clone() });
        }
    }
    if let (Some(b), Some(a)) = (before.iter().min(), after.iter().min()) {
        if a < b {
            violations.push(Violation::MinDecreased { before: b.clone(), after: a.clone() });
        }
    }

    let sum = |v: &[S]| v.iter().fold(S::zero(), |acc, x| acc + x.clone());
    let (sb, sa) = (sum(before), sum(after));
    if sb != sa {
        violations.push(Violation::SumChanged { before: sb, after: sa });
    }

    for (i, v) in after.iter().enumerate() {
        if v.is_negative() {
            violations.push(Violation::NegativeLoad { node: NodeId(i), load: v.clone() });
        }
    }

    CheckResult { violations }
}

/// Every transfer satisfies `load(from) - load(to) >= 2 * amount` in the pre-state.
pub fn check_fairness<S: Load>(before: &[S], transfers: &[Transfer<S>]) -> CheckResult<S> {
    let violations = transfers
        .iter()
        .filter(|t| !is_fair_transfer(&before[t.from.0], &before[t.to.0], &t.amount))
        .map(|t| Violation::UnfairTransfer {
            from: t.from,
            to: t.to,
            amount: t.amount.clone(),
            gap: before[t.from.0].clone() - before[t.to.0].clone(),
        })
        .collect();
    CheckResult { violations }
}

/// At most one incoming and one outgoing transfer per node.
pub fn check_matching_degree<S: Load>(
    node_count: usize,
    transfers: &[Transfer<S>],
) -> CheckResult<S> {
    let mut incoming = vec![0usize; node_count];
    let mut outgoing = vec![0usize; node_count];
    for t in transfers {
        outgoing[t.from.0] += 1;
        incoming[t.to.0] += 1;
    }
    let violations = (0..node_count)
        .filter(|&i| incoming[i] > 1 || outgoing[i] > 1)
        .map(|i| Violation::MatchingDegree {
            node: NodeId(i),
            incoming: incoming[i],
            outgoing: outgoing[i],
        })
        .collect();
    CheckResult { violations }
}

/// The potential fell by at least `floor`.
pub fn check_potential_floor<S>(
    potential_before: &BigRational,
    potential_after: &BigRational,
    floor: &BigRational,
) -> CheckResult<S> {
    let drop = potential_before - potential_after;
    if &drop >= floor {
        CheckResult::pass()
    } else {
        CheckResult {
            violations: vec![Violation::PotentialFloor { required: floor.clone(), drop }],
        }
    }
}

/// No node that was strictly above the minimum ends at or below it, and
/// none strictly below the maximum ends at or above it.
pub fn check_no_join_extremes<S: Load>(before: &[S], after: &[S]) -> CheckResult<S> {
    let (Some(l_min), Some(l_max)) = (before.iter().min(), before.iter().max()) else {
        return CheckResult::pass();
    };
    let mut violations = Vec::new();
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        if b > l_min && a <= l_min {
            violations.push(Violation::JoinedMinimum { node: NodeId(i), before: b.clone(), after: a.clone() });
        }
        if b < l_max && a >= l_max {
            violations.push(Violation::JoinedMaximum { node: NodeId(i), before: b.clone(), after: a.clone() });
        }
    }
    CheckResult { violations }
}

/// Some node at the minimum strictly gains and some node at the maximum
/// strictly loses. Only meaningful for rounds that move load.
pub fn check_extremes_progress<S: Load>(before: &[S], after: &[S]) -> CheckResult<S> {
    let (Some(l_min), Some(l_max)) = (before.iter().min(), before.iter().max()) else {
        return CheckResult::pass();
    };
    let pairs = || before.iter().zip(after);
    let mut violations = Vec::new();
    if !pairs().any(|(b, a)| b == l_min && a > b) {
        violations.push(Violation::StalledExtreme { at_minimum: true, load: l_min.clone() });
    }
    if !pairs().any(|(b, a)| b == l_max && a < b) {
        violations.push(Violation::StalledExtreme { at_minimum: false, load: l_max.clone() });
    }
    CheckResult { violations }
}

/// Potential strictly decreased.
pub fn check_potential_decreased<S>(
    potential_before: &BigRational,
    potential_after: &BigRational,
) -> CheckResult<S> {
    if potential_after < potential_before {
        CheckResult::pass()
    } else {
        CheckResult {
            violations: vec![Violation::PotentialFloor {
                required: BigRational::zero(),
                drop: potential_before - potential_after,
            }],
        }
    }
}

/// Potential is at least half the squared discrepancy.
pub fn potential_dominates_discrepancy<S: Load>(potential: &BigRational, discrepancy: &S) -> bool {
    let k = discrepancy.to_rational();
    let two = BigRational::from_integer(2.into());
    *potential >= &k * &k / two || k.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(from: usize, to: usize, amount: i64) -> Transfer<i64> {
        Transfer::new(NodeId(from), NodeId(to), amount)
    }

    #[test]
    fn balancing_round_passes() {
        let r = check_monotonic_step(&[8, 0, 4], &[4, 4, 4], &[t(0, 1, 4)]);
        assert!(r.passed(), "{:?}", r.violations);
    }

    #[test]
    fn uphill_transfer_fails() {
        let r = check_monotonic_step(&[5, 5], &[6, 4], &[t(1, 0, 1)]);
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::UphillTransfer { .. })));
    }

    #[test]
    fn overshooting_transfer_fails() {
        let r = check_monotonic_step(&[10, 0], &[4, 6], &[t(0, 1, 6)]);
        assert!(!r.passed());
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ReceiverAboveDonor { .. })));
        assert!(!check_fairness(&[10, 0], &[t(0, 1, 6)]).passed());
    }

    #[test]
    fn conservation_and_extremes() {
        let r = check_monotonic_step(&[3, 1], &[3, 2], &[]);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::SumChanged { .. })));
        let r = check_monotonic_step(&[3, 1], &[5, -1], &[]);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::MaxIncreased { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::MinDecreased { .. })));
        assert!(r.violations.iter().any(|v| matches!(v, Violation::NegativeLoad { .. })));
    }

    #[test]
    fn matching_degree() {
        assert!(check_matching_degree(3, &[t(0, 1, 1), t(1, 2, 1)]).passed());
        assert!(!check_matching_degree(3, &[t(0, 1, 1), t(2, 1, 1)]).passed());
    }

    #[test]
    fn extreme_sets() {
        assert!(check_no_join_extremes(&[8i64, 0, 4], &[4, 4, 4]).passed());
        let r = check_no_join_extremes(&[8i64, 2, 0], &[8, 0, 2]);
        assert!(r.violations.iter().any(|v| matches!(v, Violation::JoinedMinimum { .. })));
        assert!(check_extremes_progress(&[8i64, 0, 4], &[4, 4, 4]).passed());
        assert_eq!(check_extremes_progress(&[8i64, 0, 4], &[8, 2, 2]).violations.len(), 1);
    }

    #[test]
    fn potential_floor() {
        let r = |x: i64| BigRational::from_integer(x.into());
        assert!(check_potential_floor::<i64>(&r(50), &r(0), &r(50)).passed());
        assert!(!check_potential_floor::<i64>(&r(50), &r(1), &r(50)).passed());
    }
}
