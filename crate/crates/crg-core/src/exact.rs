//! Exact Gaussian-rational scalars.
//!
//! All symbolic layers (polynomials, exponential polynomials, hulls,
//! grouping keys) run on [`ExactComplex`]: a complex number with
//! `BigRational` real and imaginary parts. Floats only appear at
//! evaluation and asymptotics time.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Complex number with exact rational real/imaginary parts.
///
/// `BigRational` keeps itself in canonical reduced form (gcd 1, positive
/// denominator), so equality and ordering are structural.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        ExactComplex { re, im }
    }

    pub fn zero() -> Self {
        ExactComplex {
            re: BigRational::zero(),
            im: BigRational::zero(),
        }
    }

    pub fn one() -> Self {
        ExactComplex {
            re: BigRational::one(),
            im: BigRational::zero(),
        }
    }

    pub fn i() -> Self {
        ExactComplex {
            re: BigRational::zero(),
            im: BigRational::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        ExactComplex {
            re: BigRational::from_integer(BigInt::from(n)),
            im: BigRational::zero(),
        }
    }

    /// `num/den` as a real rational. Panics on zero denominator.
    pub fn from_ratio(num: i64, den: i64) -> Self {
        ExactComplex {
            re: BigRational::new(BigInt::from(num), BigInt::from(den)),
            im: BigRational::zero(),
        }
    }

    /// `(re_num/re_den) + (im_num/im_den) i`.
    pub fn from_parts(re_num: i64, re_den: i64, im_num: i64, im_den: i64) -> Self {
        ExactComplex {
            re: BigRational::new(BigInt::from(re_num), BigInt::from(re_den)),
            im: BigRational::new(BigInt::from(im_num), BigInt::from(im_den)),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        ExactComplex {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// |z|^2 = re^2 + im^2, exact.
    pub fn norm_sqr(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    /// Multiplicative inverse. Panics on zero.
    pub fn inv(&self) -> Self {
        let n = self.norm_sqr();
        assert!(!n.is_zero(), "division by zero ExactComplex");
        ExactComplex {
            re: &self.re / &n,
            im: -&self.im / &n,
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = ExactComplex::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        ExactComplex {
            re: &self.re * k,
            im: &self.im * k,
        }
    }

    pub fn to_f64(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(rational_to_f64(&self.re), rational_to_f64(&self.im))
    }

    /// Canonical total order: re first, then im. Used for deterministic
    /// term/group ordering, not for any analytic meaning.
    pub fn canon_cmp(&self, other: &Self) -> Ordering {
        self.re.cmp(&other.re).then_with(|| self.im.cmp(&other.im))
    }
}

impl PartialOrd for ExactComplex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.canon_cmp(other))
    }
}

impl Ord for ExactComplex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canon_cmp(other)
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident) => {
        impl<'a, 'b> $trait<&'b ExactComplex> for &'a ExactComplex {
            type Output = ExactComplex;
            fn $method(self, rhs: &'b ExactComplex) -> ExactComplex {
                ExactComplex::$method(self, rhs)
            }
        }
        impl $trait<ExactComplex> for ExactComplex {
            type Output = ExactComplex;
            fn $method(self, rhs: ExactComplex) -> ExactComplex {
                ExactComplex::$method(&self, &rhs)
            }
        }
    };
}

impl ExactComplex {
    fn add(a: &Self, b: &Self) -> Self {
        ExactComplex {
            re: &a.re + &b.re,
            im: &a.im + &b.im,
        }
    }
    fn sub(a: &Self, b: &Self) -> Self {
        ExactComplex {
            re: &a.re - &b.re,
            im: &a.im - &b.im,
        }
    }
    fn mul(a: &Self, b: &Self) -> Self {
        ExactComplex {
            re: &a.re * &b.re - &a.im * &b.im,
            im: &a.re * &b.im + &a.im * &b.re,
        }
    }
    fn div(a: &Self, b: &Self) -> Self {
        ExactComplex::mul(a, &b.inv())
    }
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);
impl_binop!(Div, div);

impl Neg for &ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }
}

impl Neg for ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        -&self
    }
}

impl fmt::Debug for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", fmt_rational(&self.re));
        }
        if self.re.is_zero() {
            return write!(f, "{}", fmt_imag(&self.im));
        }
        if self.im.is_negative() {
            write!(
                f,
                "({}{})",
                fmt_rational(&self.re),
                fmt_imag(&self.im)
            )
        } else {
            write!(
                f,
                "({}+{})",
                fmt_rational(&self.re),
                fmt_imag(&self.im)
            )
        }
    }
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_imag(r: &BigRational) -> String {
    if r == &BigRational::one() {
        "i".to_string()
    } else if r == &-BigRational::one() {
        "-i".to_string()
    } else {
        format!("{}i", fmt_rational(r))
    }
}

/// Exact-to-double conversion via numerator/denominator floats would lose
/// range; `BigRational::to_f64` handles reduction internally.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Split a rational into high and low doubles, `hi + lo` matching the
/// rational to roughly 2^-106 relative. Used to seed double-double values
/// from exact coefficients.
pub fn rational_to_f64_pair(r: &BigRational) -> (f64, f64) {
    let hi = rational_to_f64(r);
    if !hi.is_finite() {
        return (hi, 0.0);
    }
    let hi_r = match BigRational::from_float(hi) {
        Some(v) => v,
        None => return (hi, 0.0),
    };
    let lo = rational_to_f64(&(r - hi_r));
    (hi, lo)
}

/// Serialize a rational as the `"num/den"` string used in JSON output.
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
