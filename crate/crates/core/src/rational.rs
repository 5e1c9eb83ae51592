//! Exact rational helpers shared by the symbolic modules.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar used for all symbolic coefficients.
pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Lossless conversion: every finite `f64` is a dyadic rational.
pub fn from_f64(x: f64) -> Q {
    assert!(x.is_finite(), "cannot convert non-finite {x} to a rational");
    Q::from_float(x).expect("finite float")
}

pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    let r = n.nth_root(k);
    (num_traits::pow(r.clone(), k as usize) == *n).then_some(r)
}

/// Square root of a non-negative rational if it is itself rational.
pub fn sqrt_exact(x: &Q) -> Option<Q> {
    if x.is_negative() {
        return None;
    }
    let n = exact_root(x.numer(), 2)?;
    let d = exact_root(x.denom(), 2)?;
    Some(Q::new(n, d))
}

/// Real (sign-preserving) cube root if it is rational.
pub fn cbrt_exact(x: &Q) -> Option<Q> {
    let neg = x.is_negative();
    let a = x.abs();
    let n = exact_root(a.numer(), 3)?;
    let d = exact_root(a.denom(), 3)?;
    let r = Q::new(n, d);
    Some(if neg { -r } else { r })
}

/// A real number that stays exact as long as every root taken along the way
/// happens to be rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Real {
    Exact(Q),
    Approx(f64),
}

impl Real {
    pub fn zero() -> Self {
        Real::Exact(Q::zero())
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Real::Exact(x) => to_f64(x),
            Real::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Real::Exact(x) => Some(x),
            Real::Approx(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Real::Exact(x) => x.is_zero(),
            Real::Approx(x) => *x == 0.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Real::Exact(x) => x.is_negative(),
            Real::Approx(x) => *x < 0.0,
        }
    }

    pub fn abs(&self) -> Real {
        match self {
            Real::Exact(x) => Real::Exact(x.abs()),
            Real::Approx(x) => Real::Approx(x.abs()),
        }
    }

    /// `sqrt(|self|)`.
    pub fn sqrt_abs(&self) -> Real {
        match self {
            Real::Exact(x) => match sqrt_exact(&x.abs()) {
                Some(r) => Real::Exact(r),
                None => Real::Approx(to_f64(&x.abs()).sqrt()),
            },
            Real::Approx(x) => Real::Approx(x.abs().sqrt()),
        }
    }

    pub fn cbrt(&self) -> Real {
        match self {
            Real::Exact(x) => match cbrt_exact(x) {
                Some(r) => Real::Exact(r),
                None => Real::Approx(to_f64(x).cbrt()),
            },
            Real::Approx(x) => Real::Approx(x.cbrt()),
        }
    }

    pub fn mul(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a * b),
            _ => Real::Approx(self.to_f64() * other.to_f64()),
        }
    }

    pub fn sub(&self, other: &Real) -> Real {
        match (self, other) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a - b),
            _ => Real::Approx(self.to_f64() - other.to_f64()),
        }
    }

    pub fn half(&self) -> Real {
        match self {
            Real::Exact(a) => Real::Exact(a / qi(2)),
            Real::Approx(a) => Real::Approx(a / 2.0),
        }
    }
}

impl From<Q> for Real {
    fn from(x: Q) -> Self {
        Real::Exact(x)
    }
}

/// Renders a rational compactly: `3`, `-1/2`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}
