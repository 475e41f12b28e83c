//! Round budgets for the synchronous algorithms and the per-round potential
//! floors used as exact checks.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::{ceil_rational, LoadMode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BoundError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Theoretical round budgets for one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundBudget {
    /// `ceil((6n+3) * D * ln(ceil(n K^2 / (eps^2 / 2))))`; `None` outside continuous mode.
    pub continuous_rounds: Option<u64>,
    /// `ceil((24n+3) * D * ln(ceil(n K^2 / (2 D^2)))) + 6 n D^2`.
    pub discrete_rounds: u64,
    /// `K^2 / (2D)`.
    pub lemma2_floor: BigRational,
    /// `K^2 / (8D)`, present only when `K >= 2D`.
    pub lemma6_floor: Option<BigRational>,
}

impl BoundBudget {
    /// Budget applicable to `mode`.
    pub fn rounds_for(&self, mode: LoadMode) -> u64 {
        match mode {
            LoadMode::Continuous => self.continuous_rounds.unwrap_or(0),
            LoadMode::Discrete => self.discrete_rounds,
        }
    }
}

/// Computes every budget for `n` nodes, diameter `d`, discrepancy `k`.
/// `eps` is only consulted (and must be positive) in continuous mode.
pub fn bound_budget(
    n: usize,
    d: usize,
    k: &BigRational,
    eps: &BigRational,
    mode: LoadMode,
) -> Result<BoundBudget, BoundError> {
    if n < 2 {
        return Err(BoundError::InvalidParameter(format!("need n >= 2, got {n}")));
    }
    if d < 1 {
        return Err(BoundError::InvalidParameter(format!("need D >= 1, got {d}")));
    }
    if k.is_negative() {
        return Err(BoundError::InvalidParameter(format!("negative discrepancy {k}")));
    }
    if mode == LoadMode::Continuous && !eps.is_positive() {
        return Err(BoundError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }

    let n_big = BigRational::from_integer(BigInt::from(n));
    let d_big = BigRational::from_integer(BigInt::from(d));
    let k_sq = k * k;
    let two = BigRational::from_integer(BigInt::from(2));

    let continuous_rounds = if eps.is_positive() {
        let inner = ceil_rational(&(&n_big * &k_sq * &two / (eps * eps)));
        Some(log_budget((6 * n + 3) as f64 * d as f64, &inner))
    } else {
        None
    };

    let inner = ceil_rational(&(&n_big * &k_sq / (&two * &d_big * &d_big)));
    let discrete_rounds = if k.is_zero() {
        0
    } else {
        log_budget((24 * n + 3) as f64 * d as f64, &inner) + (6 * n * d * d) as u64
    };

    Ok(BoundBudget {
        continuous_rounds,
        discrete_rounds,
        lemma2_floor: lemma2_floor(k, d),
        lemma6_floor: lemma6_floor(k, d),
    })
}

/// `ceil(factor * ln(inner))`, rounded up with a relative guard so float
/// error can only loosen the budget. Zero when `inner <= 1`.
fn log_budget(factor: f64, inner: &BigInt) -> u64 {
    if *inner <= BigInt::from(1) {
        return 0;
    }
    let x = factor * ln_bigint(inner);
    let guarded = x + x.abs() * 4.0 * f64::EPSILON;
    guarded.ceil() as u64
}

fn ln_bigint(value: &BigInt) -> f64 {
    match value.to_f64() {
        Some(f) if f.is_finite() => f.ln(),
        _ => {
            // Beyond f64 range: ln(v) = ln(v >> s) + s ln 2.
            let shift = value.bits().saturating_sub(64);
            let top: BigInt = value >> shift;
            top.to_f64().expect("64-bit prefix fits f64").ln()
                + shift as f64 * std::f64::consts::LN_2
        }
    }
}

/// Per-round potential drop guaranteed for the continuous algorithm.
pub fn lemma2_floor(k: &BigRational, d: usize) -> BigRational {
    k * k / BigRational::from_integer(BigInt::from(2 * d))
}

/// Per-round potential drop guaranteed for the discrete algorithm while `K >= 2D`.
pub fn lemma6_floor(k: &BigRational, d: usize) -> Option<BigRational> {
    (*k >= BigRational::from_integer(BigInt::from(2 * d)))
        .then(|| k * k / BigRational::from_integer(BigInt::from(8 * d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rational_from_int;

    #[test]
    fn zero_discrepancy_is_free() {
        let b = bound_budget(5, 2, &rational_from_int(0), &rational_from_int(1), LoadMode::Continuous)
            .unwrap();
        assert_eq!(b.continuous_rounds, Some(0));
        assert_eq!(b.discrete_rounds, 0);
        assert!(b.lemma2_floor.is_zero());
    }

    #[test]
    fn edge_budget() {
        let b = bound_budget(2, 1, &rational_from_int(10), &rational_from_int(1), LoadMode::Continuous)
            .unwrap();
        // 15 * ln(400) = 89.87...
        assert_eq!(b.continuous_rounds, Some(90));
    }

    #[test]
    fn discrete_budget_matches_direct_evaluation() {
        let (n, d, k) = (6usize, 3usize, 40i64);
        let b = bound_budget(n, d, &rational_from_int(k), &rational_from_int(0), LoadMode::Discrete)
            .unwrap();
        let inner = ((n as i64 * k * k) as f64 / (2 * d * d) as f64).ceil();
        let expect = ((24 * n + 3) as f64 * d as f64 * inner.ln()).ceil() as u64 + (6 * n * d * d) as u64;
        assert_eq!(b.discrete_rounds, expect);
        assert_eq!(b.continuous_rounds, None);
    }

    #[test]
    fn lemma_floors() {
        assert_eq!(lemma2_floor(&rational_from_int(10), 2), rational_from_int(25));
        assert_eq!(lemma6_floor(&rational_from_int(3), 2), None);
        assert_eq!(
            lemma6_floor(&rational_from_int(4), 2),
            Some(BigRational::new(1.into(), 1.into()))
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let one = rational_from_int(1);
        assert!(bound_budget(1, 1, &one, &one, LoadMode::Discrete).is_err());
        assert!(bound_budget(3, 0, &one, &one, LoadMode::Discrete).is_err());
        assert!(bound_budget(3, 1, &one, &rational_from_int(0), LoadMode::Continuous).is_err());
    }

    #[test]
    fn huge_arguments_stay_finite() {
        let v: BigInt = BigInt::from(1) << 2000u32;
        let ln = ln_bigint(&v);
        assert!((ln - 2000.0 * std::f64::consts::LN_2).abs() < 1e-6);
    }
}
