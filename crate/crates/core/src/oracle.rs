//! Exhaustive search over fair-transfer sequences on tiny discrete instances.

use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::graph::{Graph, LoadVector};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("state space exceeded the cap of {cap} states")]
    BudgetExceeded { cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// What the search found within the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub min_potential: BigRational,
    pub one_balanced_reachable: bool,
    /// Potentials of every reachable 1-balanced state.
    pub balanced_potentials: BTreeSet<BigRational>,
    pub states_explored: usize,
}

/// Default state cap for [`brute_force_reachable_check`].
pub const DEFAULT_STATE_CAP: usize = 200_000;

/// Breadth-first enumeration of every state reachable through at most
/// `horizon` single fair transfers (any amount `1..=floor(gap/2)` along an
/// edge). Fails once more than `state_cap` distinct states are seen.
pub fn brute_force_reachable_check(
    graph: &Graph,
    loads: &LoadVector<i64>,
    horizon: usize,
    state_cap: usize,
) -> Result<OracleReport, OracleError> {
    if loads.len() != graph.node_count() {
        return Err(OracleError::InvalidParameter(format!(
            "{} loads for {} nodes",
            loads.len(),
            graph.node_count()
        )));
    }
    let n = loads.len() as i128;
    let sum: i128 = loads.iter().map(|&v| v as i128).sum();
    let edges: Vec<(usize, usize)> = graph.edges().map(|(u, v)| (u.0, v.0)).collect();

    // n * potential = n * sum(x^2) - sum^2, an integer.
    let scaled_potential = |s: &[i64]| n * s.iter().map(|&x| (x as i128) * (x as i128)).sum::<i128>() - sum * sum;
    let balanced = |s: &[i64]| edges.iter().all(|&(u, v)| (s[u] - s[v]).abs() <= 1);

    let start = loads.as_slice().to_vec();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(start.clone());
    let mut frontier = vec![start];
    let mut min_scaled = i128::MAX;
    let mut balanced_scaled = BTreeSet::new();

    for depth in 0..=horizon {
        let mut next = Vec::new();
        for state in &frontier {
            let p = scaled_potential(state);
            min_scaled = min_scaled.min(p);
            if balanced(state) {
                balanced_scaled.insert(p);
            }
            if depth == horizon {
                continue;
            }
            for &(a, b) in &edges {
                let (hi, lo) = if state[a] >= state[b] { (a, b) } else { (b, a) };
                let max_amount = (state[hi] - state[lo]) / 2;
                for amount in 1..=max_amount {
                    let mut succ = state.clone();
                    succ[hi] -= amount;
                    succ[lo] += amount;
                    if seen.insert(succ.clone()) {
                        if seen.len() > state_cap {
                            return Err(OracleError::BudgetExceeded { cap: state_cap });
                        }
                        next.push(succ);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }

    let to_potential = |scaled: i128| BigRational::new(BigInt::from(scaled), BigInt::from(n));
    Ok(OracleReport {
        min_potential: to_potential(min_scaled),
        one_balanced_reachable: !balanced_scaled.is_empty(),
        balanced_potentials: balanced_scaled.into_iter().map(to_potential).collect(),
        states_explored: seen.len(),
    })
}
