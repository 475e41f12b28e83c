//! Trace CSV rows. Potentials are written as exact `p/q` fractions.

use std::fmt::Write as _;

use dealbal::{Load, Rational};

pub const HEADER: &str = "idx,l_max,l_min,discrepancy,potential,deals,messages,checks";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    /// Round (sync) or step (async) index.
    pub idx: u64,
    pub l_max: String,
    pub l_min: String,
    pub discrepancy: String,
    pub potential: Rational,
    /// Cumulative deals.
    pub deals: u64,
    /// Cumulative messages.
    pub messages: u64,
    /// Bits of the enabled checks that held for this row.
    pub checks: u32,
}

impl TraceRecord {
    pub fn from_values<S: Load>(idx: u64, values: &[S], deals: u64, messages: u64, checks: u32) -> Self {
        let l_max = values.iter().max().cloned().unwrap_or_else(S::zero);
        let l_min = values.iter().min().cloned().unwrap_or_else(S::zero);
        TraceRecord {
            idx,
            discrepancy: (l_max.clone() - l_min.clone()).to_string(),
            l_max: l_max.to_string(),
            l_min: l_min.to_string(),
            potential: potential_of(values),
            deals,
            messages,
            checks,
        }
    }
}

/// Sum of squared deviations from the mean. Shift-invariant, so it is
/// defined for the transiently negative loads of faulty runs too.
pub fn potential_of<S: Load>(values: &[S]) -> Rational {
    if values.is_empty() {
        return Rational::from_integer(0.into());
    }
    let rats: Vec<Rational> = values.iter().map(Load::to_rational).collect();
    let n = Rational::from_integer(rats.len().into());
    let avg = rats.iter().sum::<Rational>() / n;
    rats.iter()
        .map(|r| {
            let d = r - &avg;
            &d * &d
        })
        .sum()
}

pub fn fraction(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn render(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.idx,
            r.l_max,
            r.l_min,
            r.discrepancy,
            fraction(&r.potential),
            r.deals,
            r.messages,
            r.checks
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_exact() {
        let r = TraceRecord::from_values(0, &[9i64, 0, 4], 0, 4, 33);
        assert_eq!(fraction(&r.potential), "122/3");
        let text = render(&[r]);
        assert_eq!(text, format!("{HEADER}\n0,9,0,9,122/3,0,4,33\n"));
    }

    #[test]
    fn negative_values_keep_the_potential() {
        let a = potential_of(&[-2i64, 1, 4]);
        let b = potential_of(&[0i64, 3, 6]);
        assert_eq!(a, b);
        let r = TraceRecord::from_values(3, &[-2i64, 1, 4], 1, 1, 0);
        assert_eq!((r.l_min.as_str(), r.discrepancy.as_str()), ("-2", "6"));
    }
}
