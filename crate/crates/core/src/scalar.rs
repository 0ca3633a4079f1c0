//! Coordinate scalar abstraction.
//!
//! Geometry in this crate only needs ring arithmetic, ordering and a floor
//! operation for grid bucketing, so every coordinate-bearing type is generic
//! over [`Scalar`]. Distances are compared squared, which keeps exact types
//! such as `Ratio<i64>` usable end to end.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{Num, ToPrimitive};

/// A planar coordinate type.
pub trait Scalar:
    Num + PartialOrd + Copy + Debug + Display + FromStr + ToPrimitive + Send + Sync + 'static
{
    /// `floor(self / cell)` as a grid coordinate, or `None` when it does not
    /// fit (non-finite input, overflow).
    fn cell_of(self, cell: Self) -> Option<i64>;

    /// Lossy conversion used for reporting only.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! float_scalar {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            #[inline]
            fn cell_of(self, cell: Self) -> Option<i64> {
                let q = (self / cell).floor();
                if q.is_finite() && q >= i64::MIN as $t && q <= i64::MAX as $t {
                    Some(q as i64)
                } else {
                    None
                }
            }
        }
    )*};
}

float_scalar!(f32, f64);

impl Scalar for Ratio<i64> {
    fn cell_of(self, cell: Self) -> Option<i64> {
        Some((self / cell).floor().to_integer())
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn dist_sq<T: Scalar>(a: (T, T), b: (T, T)) -> T {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_cells_floor_toward_negative_infinity() {
        assert_eq!(3.5f64.cell_of(1.0), Some(3));
        assert_eq!((-0.5f64).cell_of(1.0), Some(-1));
        assert_eq!(70.0f32.cell_of(35.0), Some(2));
        assert_eq!(f64::NAN.cell_of(1.0), None);
        assert_eq!(f64::INFINITY.cell_of(1.0), None);
    }

    #[test]
    fn rational_cells() {
        let x = Ratio::new(7i64, 2);
        assert_eq!(x.cell_of(Ratio::from_integer(2)), Some(1));
        assert_eq!((-x).cell_of(Ratio::from_integer(2)), Some(-2));
    }

    #[test]
    fn squared_distance() {
        assert_eq!(dist_sq((0.0, 0.0), (3.0, 4.0)), 25.0);
        let r = |n| Ratio::from_integer(n);
        assert_eq!(dist_sq((r(1), r(1)), (r(4), r(5))), r(25));
    }
}
