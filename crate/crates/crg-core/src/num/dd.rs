//! Double-double arithmetic: an unevaluated sum of two `f64`s giving a
//! ~106-bit significand. This backs the "128-bit" precision setting; the
//! subdominant-branch tracking in the ray integrator needs local errors
//! around 1e-20, which is out of reach for plain `f64`.
//!
//! Algorithms are the classical error-free transformations (Dekker, Knuth)
//! as used in the qd/ddfun family of libraries. The split-based `two_prod`
//! avoids relying on a hardware FMA.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    // 2^27 + 1; valid for |a| < 2^996, far beyond anything the rescaled
    // integrator produces.
    let t = 134217729.0 * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// ~2^-105; relative accuracy floor of normalized double-doubles.
    pub const EPS: f64 = 2.465190328815662e-32;

    pub const LN2: Dd = Dd {
        hi: 0.6931471805599453,
        lo: 2.3190468138462996e-17,
    };
    pub const PI: Dd = Dd {
        hi: 3.141592653589793,
        lo: 1.2246467991473532e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: 1.5707963267948966,
        lo: 6.123233995736766e-17,
    };
    pub const TWO_PI: Dd = Dd {
        hi: 6.283185307179586,
        lo: 2.4492935982947064e-16,
    };
    // Third limb of pi/2, used in trig argument reduction.
    const FRAC_PI_2_T3: f64 = -1.4973849048591698e-33;

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn is_nan(self) -> bool {
        self.hi.is_nan()
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, b);
        Dd::new(s1, s2 + self.lo)
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, b);
        Dd::new(p1, p2 + self.lo * b)
    }

    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p1, p2) = two_prod(q1, b);
        let (s, e) = two_sum(self.hi, -p1);
        let q2 = (s + (e + self.lo - p2)) / b;
        Dd::new(q1, q2)
    }

    /// Exact scaling by a power of two.
    #[inline]
    pub fn ldexp(self, n: i32) -> Dd {
        Dd {
            hi: libm_ldexp(self.hi, n),
            lo: libm_ldexp(self.lo, n),
        }
    }

    pub fn floor(self) -> Dd {
        let fhi = self.hi.floor();
        if fhi == self.hi {
            let flo = self.lo.floor();
            Dd::new(fhi, flo)
        } else {
            Dd { hi: fhi, lo: 0.0 }
        }
    }

    pub fn round(self) -> Dd {
        (self.add_f64(0.5)).floor()
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn sqr(self) -> Dd {
        let (p1, p2) = two_prod(self.hi, self.hi);
        Dd::new(p1, p2 + 2.0 * self.hi * self.lo + self.lo * self.lo)
    }

    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        assert!(self.hi > 0.0, "sqrt of negative double-double");
        // One Newton step on a double seed reaches full precision;
        // a second guards the boundary cases.
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let ax_dd = Dd::from_f64(ax);
        let r = self - ax_dd.sqr();
        let first = ax_dd + Dd::from_f64(r.hi * x * 0.5);
        let r2 = self - first.sqr();
        first + r2.div_f64(2.0 * first.hi)
    }

    pub fn powi(self, n: i32) -> Dd {
        if n == 0 {
            return Dd::ONE;
        }
        let mut e = n.unsigned_abs();
        let mut base = self;
        let mut acc = Dd::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base.sqr();
            }
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }

    pub fn exp(self) -> Dd {
        if self.hi <= -709.0 {
            return Dd::ZERO;
        }
        if self.hi >= 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ONE;
        }
        let m = (self.hi / Dd::LN2.hi).round();
        // r = (x - m ln2) / 2^9, |r| small; the final unscaling squares 9x.
        let r = (self - Dd::LN2.mul_f64(m)).ldexp(-9);
        let thresh = Dd::EPS * 2.0_f64.powi(-9);
        // Taylor for exp(r) - 1; term_n = r^n/n! built as term *= r/(n+1).
        let mut term = r.sqr().ldexp(-1); // r^2/2
        let mut s = r + term;
        let mut n = 2.0f64;
        loop {
            term = (term * r).div_f64(n + 1.0);
            n += 1.0;
            s = s + term;
            if term.hi.abs() <= thresh || n > 40.0 {
                break;
            }
        }
        // Undo the 2^-9 scaling: exp(2x)-1 = 2(exp(x)-1) + (exp(x)-1)^2.
        for _ in 0..9 {
            s = s.ldexp(1) + s.sqr();
        }
        (s + Dd::ONE).ldexp(m as i32)
    }

    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        // Newton on exp(y) = x from a double seed; two steps for margin.
        let mut y = Dd::from_f64(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    /// Simultaneous sine and cosine.
    pub fn sin_cos(self) -> (Dd, Dd) {
        if self.hi == 0.0 && self.lo == 0.0 {
            return (Dd::ZERO, Dd::ONE);
        }
        // Reduce modulo pi/2 with a three-limb constant. Arguments here are
        // imaginary parts of exponents, bounded by the rescale threshold
        // plus coefficient phases (|x| <~ 1e4), so the reduction keeps
        // ~95+ significant bits.
        let k = (self.hi / Dd::FRAC_PI_2.hi).round();
        let r = self - Dd::FRAC_PI_2.mul_f64(k) - Dd::from_f64(Dd::FRAC_PI_2_T3).mul_f64(k);
        let quadrant = ((k as i64) % 4 + 4) % 4;
        let (s, c) = sin_cos_taylor(r);
        match quadrant {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    pub fn sin(self) -> Dd {
        self.sin_cos().0
    }

    pub fn cos(self) -> Dd {
        self.sin_cos().1
    }

    pub fn atan2(y: Dd, x: Dd) -> Dd {
        if y.hi == 0.0 && y.lo == 0.0 {
            return if x.hi >= 0.0 { Dd::ZERO } else { Dd::PI };
        }
        // Newton on tan(theta) = y/x from a double seed, performed on the
        // (cos, sin) pair so it stays valid in every quadrant.
        let mut theta = Dd::from_f64(y.hi.atan2(x.hi));
        for _ in 0..2 {
            let (s, c) = theta.sin_cos();
            let num = y * c - x * s;
            let den = x * c + y * s;
            if den.hi == 0.0 {
                break;
            }
            theta = theta + num / den;
        }
        theta
    }

    pub fn max(self, other: Dd) -> Dd {
        if self < other {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Dd) -> Dd {
        if self < other {
            self
        } else {
            other
        }
    }
}

fn sin_cos_taylor(r: Dd) -> (Dd, Dd) {
    // |r| <= pi/4 after reduction.
    let rsq = r.sqr();
    // sin
    let mut term = r;
    let mut s = r;
    let mut n = 1.0f64;
    loop {
        term = term * rsq;
        term = term.div_f64(-((n + 1.0) * (n + 2.0)));
        s = s + term;
        n += 2.0;
        if term.hi.abs() < Dd::EPS {
            break;
        }
    }
    // cos
    let mut term = Dd::ONE;
    let mut c = Dd::ONE;
    let mut n = 0.0f64;
    loop {
        term = term * rsq;
        term = term.div_f64(-((n + 1.0) * (n + 2.0)));
        c = c + term;
        n += 2.0;
        if term.hi.abs() < Dd::EPS {
            break;
        }
    }
    (s, c)
}

fn libm_ldexp(x: f64, n: i32) -> f64 {
    // Exact power-of-two scaling without pulling in libm explicitly.
    x * f64::powi(2.0, n)
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2b) = quick_two_sum(s1, s2 + t1);
        Dd::new(s1, s2b + t2)
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        Dd::new(p1, p2 + self.hi * rhs.lo + self.lo * rhs.hi)
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs.mul_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs.mul_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dd({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}
