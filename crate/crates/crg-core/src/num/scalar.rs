//! Precision-generic real and complex scalars.
//!
//! The evaluator and ray integrator are written once over [`Real`]; the
//! configured bit count picks `f64` (<= 53) or [`Dd`] (~106, the "128-bit"
//! setting) at run time.

use super::dd::Dd;
use crate::exact::{rational_to_f64_pair, ExactComplex};
use num_rational::BigRational;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_rational(r: &BigRational) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin_cos(self) -> (Self, Self);
    fn atan2(y: Self, x: Self) -> Self;
    fn is_finite(self) -> bool;
    fn is_nan(self) -> bool;
    fn max(self, other: Self) -> Self;
    /// Machine epsilon of the representation.
    fn epsilon() -> f64;
}

impl Real for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64_pair(r).0
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        f64::sin_cos(self)
    }
    fn atan2(y: Self, x: Self) -> Self {
        f64::atan2(y, x)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn is_nan(self) -> bool {
        f64::is_nan(self)
    }
    fn max(self, other: Self) -> Self {
        f64::max(self, other)
    }
    fn epsilon() -> f64 {
        f64::EPSILON
    }
}

impl Real for Dd {
    fn zero() -> Self {
        Dd::ZERO
    }
    fn one() -> Self {
        Dd::ONE
    }
    fn from_f64(x: f64) -> Self {
        Dd::from_f64(x)
    }
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    fn from_rational(r: &BigRational) -> Self {
        let (hi, lo) = rational_to_f64_pair(r);
        Dd::new(hi, lo)
    }
    fn abs(self) -> Self {
        Dd::abs(self)
    }
    fn sqrt(self) -> Self {
        Dd::sqrt(self)
    }
    fn exp(self) -> Self {
        Dd::exp(self)
    }
    fn ln(self) -> Self {
        Dd::ln(self)
    }
    fn sin_cos(self) -> (Self, Self) {
        Dd::sin_cos(self)
    }
    fn atan2(y: Self, x: Self) -> Self {
        Dd::atan2(y, x)
    }
    fn is_finite(self) -> bool {
        Dd::is_finite(self)
    }
    fn is_nan(self) -> bool {
        Dd::is_nan(self)
    }
    fn max(self, other: Self) -> Self {
        Dd::max(self, other)
    }
    fn epsilon() -> f64 {
        Dd::EPS
    }
}

/// Complex number over a generic real scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cplx<T: Real> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Cplx<T> {
    pub fn new(re: T, im: T) -> Self {
        Cplx { re, im }
    }

    pub fn zero() -> Self {
        Cplx {
            re: T::zero(),
            im: T::zero(),
        }
    }

    pub fn one() -> Self {
        Cplx {
            re: T::one(),
            im: T::zero(),
        }
    }

    pub fn from_f64(re: f64, im: f64) -> Self {
        Cplx {
            re: T::from_f64(re),
            im: T::from_f64(im),
        }
    }

    pub fn from_exact(c: &ExactComplex) -> Self {
        Cplx {
            re: T::from_rational(&c.re),
            im: T::from_rational(&c.im),
        }
    }

    pub fn from_polar(r: T, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Cplx {
            re: r * c,
            im: r * s,
        }
    }

    pub fn to_c64(self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn conj(self) -> Self {
        Cplx {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn norm_sqr(self) -> T {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn arg(self) -> T {
        T::atan2(self.im, self.re)
    }

    pub fn scale(self, k: T) -> Self {
        Cplx {
            re: self.re * k,
            im: self.im * k,
        }
    }

    pub fn exp(self) -> Self {
        let m = self.re.exp();
        let (s, c) = self.im.sin_cos();
        Cplx {
            re: m * c,
            im: m * s,
        }
    }

    /// Principal square root via polar form.
    pub fn sqrt(self) -> Self {
        let r = self.abs().sqrt();
        let half = T::from_f64(0.5);
        let theta = self.arg() * half;
        Cplx::from_polar(r, theta)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn is_nan(self) -> bool {
        self.re.is_nan() || self.im.is_nan()
    }

    pub fn inv(self) -> Self {
        let n = self.norm_sqr();
        Cplx {
            re: self.re / n,
            im: -self.im / n,
        }
    }
}

impl<T: Real> Add for Cplx<T> {
    type Output = Cplx<T>;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Cplx {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl<T: Real> Sub for Cplx<T> {
    type Output = Cplx<T>;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Cplx {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

impl<T: Real> Mul for Cplx<T> {
    type Output = Cplx<T>;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Cplx {
            re: self.re * rhs.re - self.im * rhs.im,
            im: self.re * rhs.im + self.im * rhs.re,
        }
    }
}

impl<T: Real> Div for Cplx<T> {
    type Output = Cplx<T>;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        self * rhs.inv()
    }
}

impl<T: Real> Neg for Cplx<T> {
    type Output = Cplx<T>;
    #[inline]
    fn neg(self) -> Self {
        Cplx {
            re: -self.re,
            im: -self.im,
        }
    }
}

/// Numeric precision backend, selected from a requested bit count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Precision {
    /// Native f64 (53-bit significand).
    Double,
    /// Double-double (~106-bit significand); serves any request above 53.
    DoubleDouble,
}

impl Precision {
    pub fn from_bits(bits: u32) -> Precision {
        if bits <= 53 {
            Precision::Double
        } else {
            Precision::DoubleDouble
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            Precision::Double => 53,
            Precision::DoubleDouble => 106,
        }
    }
}
