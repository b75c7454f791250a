//! Forward-mode automatic differentiation over a fixed-size parameter vector.
//!
//! [`Dual<P>`] carries a value together with its partial derivatives with
//! respect to `P` parameters. Every model formula in this crate is written
//! against the [`Scalar`] trait, so the same code runs on `f64` for plain
//! simulation and on `Dual` when a gradient is needed.
//!
//! Conventions:
//! - `min`/`max` take the derivative of the selected branch; ties select the
//!   first argument.
//! - Dividing by a dual whose value is exactly zero is an error
//!   ([`Scalar::checked_div`]); the `/` operator panics in that case.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use thiserror::Error;

/// Number of calibration parameters differentiated by default.
pub const NUM_PARAMS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("parameter index {index} out of range for {len} parameters")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("division by a dual number with zero value")]
    DivisionByZero,
}

/// Numeric type the spread model can be evaluated on.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn from_f64(x: f64) -> Self;
    /// The real (value) part.
    fn value(&self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn cos(self) -> Self;
    fn sin(self) -> Self;
    fn min(self, other: Self) -> Self;
    fn max(self, other: Self) -> Self;
    fn checked_div(self, rhs: Self) -> Result<Self, AutodiffError>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn scale(self, k: f64) -> Self {
        self * Self::from_f64(k)
    }

    fn clamp(self, lo: f64, hi: f64) -> Self {
        self.max(Self::from_f64(lo)).min(Self::from_f64(hi))
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
    #[inline]
    fn checked_div(self, rhs: Self) -> Result<Self, AutodiffError> {
        if rhs == 0.0 {
            Err(AutodiffError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        self * k
    }
}

/// A value and its gradient with respect to `P` parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const P: usize = NUM_PARAMS> {
    pub value: f64,
    pub grad: [f64; P],
}

impl<const P: usize> Dual<P> {
    pub fn new(value: f64, grad: [f64; P]) -> Self {
        Self { value, grad }
    }

    /// A constant: zero gradient.
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            grad: [0.0; P],
        }
    }

    /// The `index`-th independent variable, seeded with the unit vector `e_index`.
    pub fn parameter(index: usize, value: f64) -> Result<Self, AutodiffError> {
        if index >= P {
            return Err(AutodiffError::IndexOutOfRange { index, len: P });
        }
        let mut grad = [0.0; P];
        grad[index] = 1.0;
        Ok(Self { value, grad })
    }

    /// Applies the chain rule for a unary function with value `f` and derivative `df`.
    #[inline]
    fn chain(self, f: f64, df: f64) -> Self {
        let mut grad = self.grad;
        for g in grad.iter_mut() {
            *g *= df;
        }
        Self { value: f, grad }
    }
}

/// `lift_constant`: a real with zero derivative part.
pub fn lift_constant<const P: usize>(x: f64) -> Dual<P> {
    Dual::constant(x)
}

/// `lift_parameter`: a real seeded as the `i`-th independent variable.
pub fn lift_parameter<const P: usize>(i: usize, x: f64) -> Result<Dual<P>, AutodiffError> {
    Dual::parameter(i, x)
}

impl<const P: usize> Add for Dual<P> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        let mut grad = self.grad;
        for (g, r) in grad.iter_mut().zip(rhs.grad.iter()) {
            *g += r;
        }
        Self {
            value: self.value + rhs.value,
            grad,
        }
    }
}

impl<const P: usize> AddAssign for Dual<P> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<const P: usize> Sub for Dual<P> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        let mut grad = self.grad;
        for (g, r) in grad.iter_mut().zip(rhs.grad.iter()) {
            *g -= r;
        }
        Self {
            value: self.value - rhs.value,
            grad,
        }
    }
}

impl<const P: usize> Mul for Dual<P> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut grad = [0.0; P];
        for (i, g) in grad.iter_mut().enumerate() {
            *g = self.grad[i] * rhs.value + self.value * rhs.grad[i];
        }
        Self {
            value: self.value * rhs.value,
            grad,
        }
    }
}

impl<const P: usize> Div for Dual<P> {
    type Output = Self;
    /// Panics when `rhs.value == 0`; use [`Scalar::checked_div`] to handle it.
    fn div(self, rhs: Self) -> Self {
        match Scalar::checked_div(self, rhs) {
            Ok(q) => q,
            Err(e) => panic!("{e}"),
        }
    }
}

impl<const P: usize> Neg for Dual<P> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        let mut grad = self.grad;
        for g in grad.iter_mut() {
            *g = -*g;
        }
        Self {
            value: -self.value,
            grad,
        }
    }
}

impl<const P: usize> Scalar for Dual<P> {
    #[inline]
    fn from_f64(x: f64) -> Self {
        Self::constant(x)
    }
    #[inline]
    fn value(&self) -> f64 {
        self.value
    }
    #[inline]
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    #[inline]
    fn ln(self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    #[inline]
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    #[inline]
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if other.value < self.value {
            other
        } else {
            self
        }
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if other.value > self.value {
            other
        } else {
            self
        }
    }
    fn checked_div(self, rhs: Self) -> Result<Self, AutodiffError> {
        if rhs.value == 0.0 {
            return Err(AutodiffError::DivisionByZero);
        }
        let inv = 1.0 / rhs.value;
        let value = self.value / rhs.value;
        let mut grad = [0.0; P];
        for (i, g) in grad.iter_mut().enumerate() {
            *g = (self.grad[i] - value * rhs.grad[i]) * inv;
        }
        Ok(Self { value, grad })
    }
    #[inline]
    fn scale(self, k: f64) -> Self {
        let mut grad = self.grad;
        for g in grad.iter_mut() {
            *g *= k;
        }
        Self {
            value: self.value * k,
            grad,
        }
    }
}
