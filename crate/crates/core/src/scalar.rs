//! Exact scalar types used for predimension values.
//!
//! Every predimension is evaluated in a [`Scalar`]. Strongness is decided by
//! comparing against zero, so only exact ordered fields qualify; the blanket
//! implementation covers `Ratio<I>` for any signed machine or big integer.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};

/// An exact, totally ordered scalar.
pub trait Scalar:
    Clone + Ord + Debug + Display + Send + Sync + Signed + Sum + 'static
{
    /// Builds `numer / denom`. Panics if `denom == 0`.
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn is_integral(&self) -> bool;

    /// Reduced `p/q` rendering with `q > 0`, integers included (`3/1`).
    fn to_pq(&self) -> String;

    /// The value as an `i64` ratio, if it fits.
    fn to_weight(&self) -> Option<Weight>;
}

impl<I> Scalar for Ratio<I>
where
    I: Integer + Signed + Clone + Display + Debug + From<i64> + ToPrimitive + Send + Sync + 'static,
{
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Ratio::new(I::from(numer), I::from(denom))
    }

    fn is_integral(&self) -> bool {
        self.denom().is_one()
    }

    fn to_pq(&self) -> String {
        // Ratio keeps itself reduced with a positive denominator.
        format!("{}/{}", self.numer(), self.denom())
    }

    fn to_weight(&self) -> Option<Weight> {
        Some(Ratio::new(self.numer().to_i64()?, self.denom().to_i64()?))
    }
}

/// Rational weights as they appear in files: `p/q`, reduced.
pub type Weight = Ratio<i64>;

/// Parses `p/q` or a bare integer into a reduced weight.
pub fn parse_ratio(text: &str) -> Option<Weight> {
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i64>().ok()?, q.trim().parse::<i64>().ok()?),
        None => (text.trim().parse::<i64>().ok()?, 1),
    };
    if q == 0 {
        return None;
    }
    Some(Ratio::new(p, q))
}

/// Converts a file weight into an arbitrary scalar.
pub fn lift<T: Scalar>(w: &Weight) -> T {
    T::from_ratio(*w.numer(), *w.denom())
}

pub(crate) fn min_zero<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        x
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn pq_rendering_is_reduced() {
        assert_eq!(Ratio::<i64>::from_ratio(4, 2).to_pq(), "2/1");
        assert_eq!(Ratio::<i64>::from_ratio(3, -6).to_pq(), "-1/2");
        assert_eq!(Ratio::<BigInt>::from_ratio(0, 5).to_pq(), "0/1");
    }

    #[test]
    fn parse_ratio_accepts_integers_and_fractions() {
        assert_eq!(parse_ratio("2/3"), Some(Ratio::new(2, 3)));
        assert_eq!(parse_ratio("5"), Some(Ratio::new(5, 1)));
        assert_eq!(parse_ratio("1/0"), None);
        assert_eq!(parse_ratio("x"), None);
    }
}
