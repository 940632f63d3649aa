//! Number types that flow through losses and networks.
//!
//! [`Scalar`] is implemented by plain `f64`, by [`Tangent`] (value plus one
//! directional derivative, used to push a parameter-space direction through a
//! reverse sweep) and by [`DualScalar`] (second-order truncated Taylor numbers
//! used for derivatives with respect to network inputs).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_f64(x: f64) -> Self;

    /// The primal (zeroth-order) part.
    fn value(self) -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn scale(self, c: f64) -> Self;
    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn exp_m1(self) -> Self;
    fn relu(self) -> Self;

    fn square(self) -> Self {
        self * self
    }

    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

/// First-order forward-mode number `v + t·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tangent {
    pub v: f64,
    pub t: f64,
}

impl Tangent {
    pub fn new(v: f64, t: f64) -> Self {
        Self { v, t }
    }

    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        Self {
            v: f,
            t: df * self.t,
        }
    }
}

impl Add for Tangent {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            t: self.t + o.t,
        }
    }
}

impl Sub for Tangent {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self {
            v: self.v - o.v,
            t: self.t - o.t,
        }
    }
}

impl Mul for Tangent {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            t: self.v * o.t + self.t * o.v,
        }
    }
}

impl Div for Tangent {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Self {
            v: q,
            t: (self.t - q * o.t) / o.v,
        }
    }
}

impl Neg for Tangent {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            v: -self.v,
            t: -self.t,
        }
    }
}

impl AddAssign for Tangent {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.v += o.v;
        self.t += o.t;
    }
}

impl SubAssign for Tangent {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        self.v -= o.v;
        self.t -= o.t;
    }
}

impl Scalar for Tangent {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self { v: x, t: 0.0 }
    }
    #[inline]
    fn value(self) -> f64 {
        self.v
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        Self {
            v: self.v * c,
            t: self.t * c,
        }
    }
    #[inline]
    fn tanh(self) -> Self {
        let y = self.v.tanh();
        self.chain(y, 1.0 - y * y)
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        self.chain(self.v.exp_m1(), self.v.exp())
    }
    #[inline]
    fn relu(self) -> Self {
        if self.v > 0.0 {
            self
        } else {
            Self::default()
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.v.is_finite() && self.t.is_finite()
    }
}

/// Second-order truncated Taylor number `(f, f', f'')` in one input direction.
///
/// Seeding `(x, 1, 0)` and evaluating a smooth `g` yields `(g(x), g'(x), g''(x))`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl DualScalar {
    pub fn new(value: f64, d1: f64, d2: f64) -> Self {
        Self { value, d1, d2 }
    }

    /// The independent variable `x`.
    pub fn variable(x: f64) -> Self {
        Self::new(x, 1.0, 0.0)
    }

    pub fn constant(x: f64) -> Self {
        Self::new(x, 0.0, 0.0)
    }

    /// Compose with a scalar function given its value and first two derivatives.
    #[inline]
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            value: f,
            d1: df * self.d1,
            d2: d2f * self.d1 * self.d1 + df * self.d2,
        }
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Add for DualScalar {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for DualScalar {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for DualScalar {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for DualScalar {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2)
    }
}

impl AddAssign for DualScalar {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for DualScalar {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Scalar for DualScalar {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    #[inline]
    fn scale(self, c: f64) -> Self {
        Self::new(self.value * c, self.d1 * c, self.d2 * c)
    }
    #[inline]
    fn tanh(self) -> Self {
        let y = self.value.tanh();
        let s = 1.0 - y * y;
        self.chain(y, s, -2.0 * y * s)
    }
    #[inline]
    fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
    #[inline]
    fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        let e = self.value.exp();
        self.chain(self.value.exp_m1(), e, e)
    }
    #[inline]
    fn relu(self) -> Self {
        if self.value > 0.0 {
            self
        } else {
            Self::default()
        }
    }
    #[inline]
    fn is_finite(self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }
}
