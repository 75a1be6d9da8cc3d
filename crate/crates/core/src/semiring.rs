//! Commutative semirings used for marginalization.
//!
//! Values always live in a floating-point [`Scalar`]; the semiring decides how
//! they are combined:
//!
//! | semiring      | ⊕     | ⊙     | zero | one |
//! |---------------|-------|-------|------|-----|
//! | `sum_product` | `+`   | `×`   | 0    | 1   |
//! | `max_product` | `max` | `×`   | 0    | 1   |
//! | `min_sum`     | `min` | `+`   | +∞   | 0   |
//! | `boolean`     | `∨`   | `∧`   | 0    | 1   |

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semiring {
    SumProduct,
    MaxProduct,
    MinSum,
    Boolean,
}

impl Semiring {
    pub const ALL: [Semiring; 4] = [Semiring::SumProduct, Semiring::MaxProduct, Semiring::MinSum, Semiring::Boolean];

    pub fn name(self) -> &'static str {
        match self {
            Semiring::SumProduct => "sum_product",
            Semiring::MaxProduct => "max_product",
            Semiring::MinSum => "min_sum",
            Semiring::Boolean => "boolean",
        }
    }

    #[inline]
    pub fn zero<T: Scalar>(self) -> T {
        match self {
            Semiring::MinSum => T::infinity(),
            _ => T::zero(),
        }
    }

    #[inline]
    pub fn one<T: Scalar>(self) -> T {
        match self {
            Semiring::MinSum => T::zero(),
            _ => T::one(),
        }
    }

    #[inline]
    pub fn add<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            Semiring::SumProduct => a + b,
            Semiring::MaxProduct | Semiring::Boolean => a.max(b),
            Semiring::MinSum => a.min(b),
        }
    }

    #[inline]
    pub fn mul<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            Semiring::SumProduct | Semiring::MaxProduct => a * b,
            Semiring::MinSum => a + b,
            Semiring::Boolean => a.min(b),
        }
    }

    /// ⊕-fold; the empty sum is `zero`.
    pub fn sum<T: Scalar, I: IntoIterator<Item = T>>(self, items: I) -> T {
        items.into_iter().fold(self.zero(), |acc, x| self.add(acc, x))
    }

    /// ⊙-fold; the empty product is `one`.
    pub fn product<T: Scalar, I: IntoIterator<Item = T>>(self, items: I) -> T {
        items.into_iter().fold(self.one(), |acc, x| self.mul(acc, x))
    }

    /// Exact comparison against the zero element.
    #[inline]
    pub fn is_zero<T: Scalar>(self, x: T) -> bool {
        x == self.zero::<T>()
    }

    /// Zero test with an absolute tolerance for noisy inputs. The min-sum zero
    /// is `+∞` and is always tested exactly.
    #[inline]
    pub fn is_zero_tol<T: Scalar>(self, x: T, tol: T) -> bool {
        match self {
            Semiring::MinSum => x == T::infinity(),
            _ => x.abs() <= tol,
        }
    }

    /// Whether messages can be rescaled (divided, or shifted for min-sum).
    pub fn supports_division(self) -> bool {
        !matches!(self, Semiring::Boolean)
    }

    /// Whether `x` is a legal element of the carrier set.
    pub fn is_valid<T: Scalar>(self, x: T) -> bool {
        if x.is_nan() {
            return false;
        }
        match self {
            Semiring::SumProduct | Semiring::MaxProduct => x >= T::zero() && x.is_finite(),
            Semiring::MinSum => x > T::neg_infinity(),
            Semiring::Boolean => x == T::zero() || x == T::one(),
        }
    }

    /// `true` when `a` is strictly preferred to `b` by the ⊕ order
    /// (larger for the product semirings, smaller for min-sum).
    #[inline]
    pub fn prefers<T: Scalar>(self, a: T, b: T) -> bool {
        match self {
            Semiring::MinSum => a < b,
            _ => a > b,
        }
    }

    /// Rescales `values` in place so that their ⊕-total is `one`
    /// (sum 1, max 1, or min 0). Returns `false` and leaves the slice untouched
    /// when the vector is degenerate (all zero).
    pub fn normalize<T: Scalar>(self, values: &mut [T]) -> bool {
        match self {
            Semiring::SumProduct => {
                let total: T = values.iter().copied().sum();
                if total <= T::zero() || !total.is_finite() {
                    return false;
                }
                values.iter_mut().for_each(|x| *x = *x / total);
                true
            }
            Semiring::MaxProduct => {
                let top = values.iter().copied().fold(T::zero(), T::max);
                if top <= T::zero() || !top.is_finite() {
                    return false;
                }
                values.iter_mut().for_each(|x| *x = *x / top);
                true
            }
            Semiring::MinSum => {
                let low = values.iter().copied().fold(T::infinity(), T::min);
                if !low.is_finite() {
                    return false;
                }
                values.iter_mut().for_each(|x| *x = *x - low);
                true
            }
            Semiring::Boolean => values.iter().any(|&x| !self.is_zero(x)),
        }
    }
}

impl std::fmt::Display for Semiring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Semiring {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Semiring::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| format!("unknown semiring `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn element(r: Semiring) -> BoxedStrategy<f64> {
        match r {
            Semiring::SumProduct | Semiring::MaxProduct => (0.0f64..10.0).boxed(),
            Semiring::MinSum => prop_oneof![9 => -10.0f64..10.0, 1 => Just(f64::INFINITY)].boxed(),
            Semiring::Boolean => prop_oneof![Just(0.0f64), Just(1.0f64)].boxed(),
        }
    }

    fn close(a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    fn triple() -> impl Strategy<Value = (Semiring, f64, f64, f64)> {
        prop_oneof![
            Just(Semiring::SumProduct),
            Just(Semiring::MaxProduct),
            Just(Semiring::MinSum),
            Just(Semiring::Boolean)
        ]
        .prop_flat_map(|r| (Just(r), element(r), element(r), element(r)))
    }

    proptest! {
        #[test]
        fn semiring_axioms((r, a, b, c) in triple()) {
            prop_assert!(close(r.add(a, b), r.add(b, a)));
            prop_assert!(close(r.add(r.add(a, b), c), r.add(a, r.add(b, c))));
            prop_assert!(close(r.add(a, r.zero()), a));
            prop_assert!(close(r.mul(a, b), r.mul(b, a)));
            prop_assert!(close(r.mul(r.mul(a, b), c), r.mul(a, r.mul(b, c))));
            prop_assert!(close(r.mul(a, r.one()), a));
            prop_assert!(r.is_zero(r.mul(a, r.zero())));
            prop_assert!(close(r.mul(a, r.add(b, c)), r.add(r.mul(a, b), r.mul(a, c))));
        }
    }

    #[test]
    fn tropical_and_boolean_encodings() {
        assert_eq!(Semiring::MinSum.zero::<f64>(), f64::INFINITY);
        assert_eq!(Semiring::MinSum.one::<f64>(), 0.0);
        assert_eq!(Semiring::Boolean.add(1.0f64, 0.0), 1.0);
        assert_eq!(Semiring::Boolean.mul(1.0f64, 0.0), 0.0);
        assert!(!Semiring::Boolean.is_valid(0.5f64));
        assert!(!Semiring::SumProduct.is_valid(-1.0f64));
        assert!(Semiring::MinSum.is_valid(-3.0f32));
    }

    #[test]
    fn normalization_per_semiring() {
        let mut v = [2.0, 1.0];
        assert!(Semiring::SumProduct.normalize(&mut v));
        assert_eq!(v, [2.0 / 3.0, 1.0 / 3.0]);
        let mut v = [2.0, 1.0];
        assert!(Semiring::MaxProduct.normalize(&mut v));
        assert_eq!(v, [1.0, 0.5]);
        let mut v = [2.0, 5.0];
        assert!(Semiring::MinSum.normalize(&mut v));
        assert_eq!(v, [0.0, 3.0]);
        let mut v = [0.0f64, 0.0];
        assert!(!Semiring::SumProduct.normalize(&mut v));
    }

    #[test]
    fn tolerant_zero_test() {
        assert!(!Semiring::SumProduct.is_zero(1e-14f64));
        assert!(Semiring::SumProduct.is_zero_tol(1e-14f64, 1e-12));
        assert!(!Semiring::MinSum.is_zero_tol(1e300f64, 1e-12));
    }
}
