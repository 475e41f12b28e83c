//! Scalar types a load can be measured in.
//!
//! Every engine is generic over [`Load`]. Continuous algorithms additionally
//! need exact halving ([`ContinuousLoad`]); discrete algorithms need floor
//! division on integers ([`DiscreteLoad`]). Floating point types are not
//! supported: conservation and the potential floors are checked with exact
//! equality.

use std::fmt::{Debug, Display};
use std::ops::Div;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};

/// Whether a load vector holds divisible or indivisible load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadMode {
    Continuous,
    Discrete,
}

/// An exact, totally ordered load scalar.
pub trait Load:
    Clone + Ord + Signed + Debug + Display + Send + Sync + 'static
{
    const MODE: LoadMode;

    /// Lossless conversion into an arbitrary-precision rational.
    fn to_rational(&self) -> BigRational;

    /// Builds the scalar holding `units` whole load units.
    fn from_units(units: i64) -> Self;

    /// Parses the textual form used by graph files and scenarios.
    fn parse_load(text: &str) -> Option<Self>;

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

/// Loads that can be split in half exactly.
pub trait ContinuousLoad: Load + Div<Output = Self> {
    fn half(&self) -> Self {
        self.clone() / Self::two()
    }
}

/// Integer loads; transfers are whole units.
pub trait DiscreteLoad: Load + Integer {
    fn to_i128(&self) -> Option<i128>;
}

macro_rules! impl_primitive_integer {
    ($($t:ty),*) => {$(
        impl Load for $t {
            const MODE: LoadMode = LoadMode::Discrete;

            fn to_rational(&self) -> BigRational {
                BigRational::from_integer(BigInt::from(*self))
            }

            fn from_units(units: i64) -> Self {
                <$t>::try_from(units).expect("load units out of range")
            }

            fn parse_load(text: &str) -> Option<Self> {
                text.trim().parse().ok()
            }
        }

        impl DiscreteLoad for $t {
            fn to_i128(&self) -> Option<i128> {
                ToPrimitive::to_i128(self)
            }
        }
    )*};
}

impl_primitive_integer!(i32, i64, i128);

impl Load for BigInt {
    const MODE: LoadMode = LoadMode::Discrete;

    fn to_rational(&self) -> BigRational {
        BigRational::from_integer(self.clone())
    }

    fn from_units(units: i64) -> Self {
        BigInt::from(units)
    }

    fn parse_load(text: &str) -> Option<Self> {
        text.trim().parse().ok()
    }
}

impl DiscreteLoad for BigInt {
    fn to_i128(&self) -> Option<i128> {
        ToPrimitive::to_i128(self)
    }
}

impl Load for BigRational {
    const MODE: LoadMode = LoadMode::Continuous;

    fn to_rational(&self) -> BigRational {
        self.clone()
    }

    fn from_units(units: i64) -> Self {
        BigRational::from_integer(BigInt::from(units))
    }

    fn parse_load(text: &str) -> Option<Self> {
        let value: BigRational = text.trim().parse().ok()?;
        // "p/0" parses into a panic-prone ratio on some inputs; reject it outright.
        (!value.denom().is_zero()).then_some(value)
    }
}

impl ContinuousLoad for BigRational {}

impl Load for Rational64 {
    const MODE: LoadMode = LoadMode::Continuous;

    fn to_rational(&self) -> BigRational {
        BigRational::new(BigInt::from(*self.numer()), BigInt::from(*self.denom()))
    }

    fn from_units(units: i64) -> Self {
        Rational64::from_integer(units)
    }

    fn parse_load(text: &str) -> Option<Self> {
        let (numer, denom) = match text.trim().split_once('/') {
            Some((n, d)) => (n.trim().parse().ok()?, d.trim().parse().ok()?),
            None => (text.trim().parse().ok()?, 1i64),
        };
        (denom != 0).then(|| Rational64::new(numer, denom))
    }
}

impl ContinuousLoad for Rational64 {}

/// Smallest integer not below `value`.
pub fn ceil_rational(value: &BigRational) -> BigInt {
    value.ceil().to_integer()
}

/// `value` as a rational, for callers that only hold whole numbers.
pub fn rational_from_int(value: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}
