//! Dense univariate polynomials over [`ExactComplex`].

use crate::exact::ExactComplex;
use std::cmp::Ordering;
use std::fmt;

/// Polynomial in `z`, coefficients indexed by power. The zero polynomial
/// has an empty coefficient vector; otherwise the leading coefficient is
/// nonzero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<ExactComplex>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: ExactComplex) -> Self {
        Poly::from_coeffs(vec![c])
    }

    pub fn one() -> Self {
        Poly::constant(ExactComplex::one())
    }

    /// The monomial `c * z^k`.
    pub fn monomial(c: ExactComplex, k: usize) -> Self {
        let mut coeffs = vec![ExactComplex::zero(); k + 1];
        coeffs[k] = c;
        Poly::from_coeffs(coeffs)
    }

    pub fn from_coeffs(mut coeffs: Vec<ExactComplex>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn coeffs(&self) -> &[ExactComplex] {
        &self.coeffs
    }

    /// Coefficient of `z^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> ExactComplex {
        self.coeffs.get(k).cloned().unwrap_or_else(ExactComplex::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Option<&ExactComplex> {
        self.coeffs.last()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn add(&self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(&self.coeff(k) + &rhs.coeff(k));
        }
        Poly::from_coeffs(out)
    }

    pub fn sub(&self, rhs: &Poly) -> Poly {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn mul(&self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![ExactComplex::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Poly::from_coeffs(out)
    }

    pub fn scale(&self, c: &ExactComplex) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() - 1);
        for (k, c) in self.coeffs.iter().enumerate().skip(1) {
            out.push(c * &ExactComplex::from_int(k as i64));
        }
        Poly::from_coeffs(out)
    }

    pub fn eval(&self, z: &ExactComplex) -> ExactComplex {
        let mut acc = ExactComplex::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * z) + c;
        }
        acc
    }

    pub fn eval_f64(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c.to_f64();
        }
        acc
    }

    /// Exact division by a nonzero constant.
    pub fn div_const(&self, c: &ExactComplex) -> Poly {
        self.scale(&c.inv())
    }

    /// Long division over the exact field: returns (quotient, remainder).
    /// Panics on zero divisor.
    pub fn divmod(&self, div: &Poly) -> (Poly, Poly) {
        assert!(!div.is_zero(), "division by the zero polynomial");
        let dd = div.degree().unwrap();
        if self.coeffs.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let lead_inv = div.leading().unwrap().inv();
        let mut rem = self.coeffs.clone();
        let mut quo = vec![ExactComplex::zero(); self.coeffs.len() - dd];
        while rem.len() > dd {
            let k = rem.len() - 1 - dd;
            let factor = rem.last().unwrap() * &lead_inv;
            quo[k] = factor.clone();
            for (j, c) in div.coeffs.iter().enumerate().take(dd) {
                rem[k + j] = &rem[k + j] - &(c * &factor);
            }
            rem.pop(); // top term cancels exactly
            while rem.last().map_or(false, |c| c.is_zero()) {
                rem.pop();
            }
        }
        (Poly::from_coeffs(quo), Poly::from_coeffs(rem))
    }

    /// Exact quotient; panics if the division leaves a remainder.
    pub fn div_exact(&self, div: &Poly) -> Poly {
        let (q, r) = self.divmod(div);
        assert!(r.is_zero(), "inexact polynomial division");
        q
    }

    /// Monic gcd over the exact coefficient field (Euclid).
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let (_, r) = a.divmod(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            return a;
        }
        let lead = a.leading().unwrap().clone();
        a.div_const(&lead)
    }

    /// Canonical order: degree first, then coefficients from the highest
    /// power down, each compared (re, im). Gives deterministic term order
    /// in exponential polynomials.
    pub fn canon_cmp(&self, other: &Poly) -> Ordering {
        let da = self.coeffs.len();
        let db = other.coeffs.len();
        da.cmp(&db).then_with(|| {
            for k in (0..da).rev() {
                let c = self.coeffs[k].canon_cmp(&other.coeffs[k]);
                if c != Ordering::Equal {
                    return c;
                }
            }
            Ordering::Equal
        })
    }
}

impl fmt::Display for Poly {
    /// Printing must round-trip through the DSL parser, so every piece is
    /// emitted as `coeff*z^k` joined by `+`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let cs = format!("{}", c);
            match k {
                0 => write!(f, "{}", cs)?,
                1 => {
                    if c == &ExactComplex::one() {
                        write!(f, "z")?
                    } else {
                        write!(f, "{}*z", cs)?
                    }
                }
                _ => {
                    if c == &ExactComplex::one() {
                        write!(f, "z^{}", k)?
                    } else {
                        write!(f, "{}*z^{}", cs, k)?
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Poly {
        Poly::monomial(ExactComplex::one(), 1)
    }

    #[test]
    fn degree_and_trim() {
        let p = Poly::from_coeffs(vec![
            ExactComplex::one(),
            ExactComplex::zero(),
            ExactComplex::zero(),
        ]);
        assert_eq!(p.degree(), Some(0));
        assert!(Poly::zero().degree().is_none());
    }

    #[test]
    fn product_and_derivative() {
        // (z^2 + 1)' = 2z
        let p = z().mul(&z()).add(&Poly::one());
        assert_eq!(
            p.derivative(),
            Poly::monomial(ExactComplex::from_int(2), 1)
        );
        // (z+1)(z-1) = z^2 - 1
        let a = z().add(&Poly::one());
        let b = z().sub(&Poly::one());
        let prod = a.mul(&b);
        assert_eq!(prod, z().mul(&z()).sub(&Poly::one()));
    }

    #[test]
    fn eval_exact() {
        // p(z) = z^2 - 2/3 at z = 1+i : (1+i)^2 = 2i
        let p = z().mul(&z()).sub(&Poly::constant(ExactComplex::from_ratio(2, 3)));
        let v = p.eval(&ExactComplex::from_parts(1, 1, 1, 1));
        assert_eq!(v, ExactComplex::from_parts(-2, 3, 2, 1));
    }

    #[test]
    fn divmod_and_gcd() {
        // (z + 4/3)(z - 2/3)^2 has gcd with its derivative (z - 2/3).
        let a = z().add(&Poly::constant(ExactComplex::from_ratio(4, 3)));
        let b = z().sub(&Poly::constant(ExactComplex::from_ratio(2, 3)));
        let p = a.mul(&b).mul(&b);
        let g = p.gcd(&p.derivative());
        assert_eq!(g, b);
        let (q, r) = p.divmod(&b);
        assert!(r.is_zero());
        assert_eq!(q, a.mul(&b));
        let sqfree = p.div_exact(&g);
        assert_eq!(sqfree.degree(), Some(2));
        // Remainder path: z^2 / (z+1) leaves remainder 1.
        let (q, r) = z().mul(&z()).divmod(&z().add(&Poly::one()));
        assert_eq!(q, z().sub(&Poly::one()));
        assert_eq!(r, Poly::one());
    }

    #[test]
    fn canonical_order_is_total() {
        let a = Poly::monomial(ExactComplex::one(), 2);
        let b = Poly::monomial(ExactComplex::i(), 2);
        assert_ne!(a.canon_cmp(&b), Ordering::Equal);
        assert_eq!(a.canon_cmp(&a), Ordering::Equal);
    }
}
