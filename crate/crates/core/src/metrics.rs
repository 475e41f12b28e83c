//! Global imbalance measures and the balance/fairness predicates.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::graph::{Graph, LoadVector, NodeId};
use crate::scalar::{rational_from_int, Load};

/// Snapshot of global imbalance. Everything is exact; `l_avg` and
/// `potential` are rational even for integer loads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics<S> {
    pub discrepancy: S,
    /// Sum over nodes of `(load - l_avg)^2`.
    pub potential: BigRational,
    pub l_max: S,
    pub l_min: S,
    pub l_avg: BigRational,
    /// Largest `|load(u) - load(v)|` over edges.
    pub max_local_diff: S,
}

/// A load movement `from -> to` of `amount`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transfer<S> {
    pub from: NodeId,
    pub to: NodeId,
    pub amount: S,
}

impl<S> Transfer<S> {
    pub fn new(from: NodeId, to: NodeId, amount: S) -> Self {
        Transfer { from, to, amount }
    }
}

pub fn compute_metrics<S: Load>(graph: &Graph, loads: &LoadVector<S>) -> Metrics<S> {
    let l_max = loads.max().cloned().unwrap_or_else(S::zero);
    let l_min = loads.min().cloned().unwrap_or_else(S::zero);
    let max_local_diff = max_local_diff(graph, loads);
    let l_avg = average(loads);
    Metrics {
        discrepancy: l_max.clone() - l_min.clone(),
        potential: potential(loads),
        l_max,
        l_min,
        l_avg,
        max_local_diff,
    }
}

pub fn average<S: Load>(loads: &LoadVector<S>) -> BigRational {
    if loads.is_empty() {
        return BigRational::zero();
    }
    loads.total().to_rational() / rational_from_int(loads.len() as i64)
}

/// Graph potential: sum over nodes of `(load - average)^2`.
pub fn potential<S: Load>(loads: &LoadVector<S>) -> BigRational {
    if loads.is_empty() {
        return BigRational::zero();
    }
    // Over a common denominator L with a_i = x_i * L:
    // sum (x_i - s/n)^2 = (n * sum a_i^2 - (sum a_i)^2) / (n * L^2).
    // One reduction at the end instead of a gcd per term.
    let values: Vec<BigRational> = loads.iter().map(Load::to_rational).collect();
    let common = values
        .iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let scaled: Vec<BigInt> = values
        .iter()
        .map(|v| v.numer() * (&common / v.denom()))
        .collect();
    let n = BigInt::from(values.len());
    let sum: BigInt = scaled.iter().sum();
    let sum_sq: BigInt = scaled.iter().map(|a| a * a).sum();
    BigRational::new(&n * sum_sq - &sum * &sum, n * &common * &common)
}

pub fn max_local_diff<S: Load>(graph: &Graph, loads: &LoadVector<S>) -> S {
    graph
        .edges()
        .map(|(u, v)| (loads[u].clone() - loads[v].clone()).abs())
        .max()
        .unwrap_or_else(S::zero)
}

/// True iff every edge has endpoint loads within `eps` of each other.
pub fn is_eps_balanced<S: Load>(graph: &Graph, loads: &LoadVector<S>, eps: &S) -> bool {
    graph
        .edges()
        .all(|(u, v)| (loads[u].clone() - loads[v].clone()).abs() <= *eps)
}

pub fn is_one_balanced<S: Load>(graph: &Graph, loads: &LoadVector<S>) -> bool {
    is_eps_balanced(graph, loads, &S::one())
}

/// A transfer of `amount` from `load_u` to `load_v` is fair when
/// `load_u - load_v >= 2 * amount`.
pub fn is_fair_transfer<S: Load>(load_u: &S, load_v: &S, amount: &S) -> bool {
    load_u.clone() - load_v.clone() >= S::two() * amount.clone()
}
