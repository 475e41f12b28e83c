//! First-order diffusion baseline. Not monotonic: it can overshoot.

use crate::graph::{Graph, LoadVector};
use crate::metrics::Transfer;
use crate::scalar::ContinuousLoad;

use super::{finish_round, RoundReport};

/// Every node sends `alpha * load / degree` to each neighbor at once.
pub fn round_diffusion<S: ContinuousLoad>(
    graph: &Graph,
    loads: &LoadVector<S>,
    alpha: &S,
) -> (LoadVector<S>, RoundReport<S>) {
    let mut transfers = Vec::new();
    for u in graph.nodes() {
        let degree = graph.degree(u);
        if degree == 0 || !loads[u].is_positive() {
            continue;
        }
        let share = alpha.clone() * loads[u].clone() / S::from_units(degree as i64);
        if !share.is_positive() {
            continue;
        }
        for &v in graph.neighbors(u) {
            transfers.push(Transfer::new(u, v, share.clone()));
        }
    }
    finish_round(graph, loads, Vec::new(), transfers)
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;

    use super::*;
    use crate::check::check_monotonic_step;
    use crate::graph::{generate, LoadInit, Topology};
    use crate::scalar::rational_from_int;

    fn rationals(values: &[i64]) -> Vec<BigRational> {
        values.iter().map(|&v| rational_from_int(v)).collect()
    }

    #[test]
    fn edge_oscillates_with_full_alpha() {
        let (g, loads) =
            generate(&Topology::Path(2), &LoadInit::Explicit(rationals(&[10, 0]))).unwrap();
        let one = rational_from_int(1);
        let (after, _) = round_diffusion(&g, &loads, &one);
        assert_eq!(after.as_slice(), rationals(&[0, 10]).as_slice());
        let (back, _) = round_diffusion(&g, &after, &one);
        assert_eq!(back, loads);
    }

    #[test]
    fn star_overshoot_fails_monotonic_check() {
        let (g, loads) =
            generate(&Topology::Star(4), &LoadInit::Explicit(rationals(&[0, 8, 8, 8]))).unwrap();
        let (after, report) = round_diffusion(&g, &loads, &rational_from_int(1));
        assert_eq!(after[crate::graph::NodeId(0)], rational_from_int(24));
        let check = check_monotonic_step(loads.as_slice(), after.as_slice(), &report.deals);
        assert!(!check.passed());
    }

    #[test]
    fn uniform_loads_are_preserved() {
        let (g, loads) =
            generate(&Topology::Cycle(5), &LoadInit::Explicit(rationals(&[2; 5]))).unwrap();
        let alpha = BigRational::new(1.into(), 3.into());
        assert_eq!(round_diffusion(&g, &loads, &alpha).0, loads);
    }
}
