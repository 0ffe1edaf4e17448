//! Exponential polynomials `sum_j P_j(z) exp(Q_j(z))` with exact Gaussian
//! rational coefficients, their ring operations, evaluation, and the
//! normalized grouping by top-degree exponent coefficients.

use crate::exact::ExactComplex;
use crate::num::scalar::{Cplx, Real};
use crate::poly::Poly;
use std::collections::BTreeMap;
use std::fmt;

/// One summand `P(z) * exp(Q(z))`.
///
/// Nonzero constant terms of `Q` stay inside `Q`: `exp(c)` with irrational
/// modulus has no exact representation, and term equality must compare the
/// full exponent.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExpPolyTerm {
    pub mantissa: Poly,
    pub exponent: Poly,
}

impl ExpPolyTerm {
    pub fn new(mantissa: Poly, exponent: Poly) -> Self {
        ExpPolyTerm { mantissa, exponent }
    }
}

/// Canonical exponential polynomial: exponents pairwise distinct, no zero
/// mantissas, terms sorted by (deg Q, Q coefficients high-to-low, re/im).
/// The zero function is the empty sum.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExpPoly {
    terms: Vec<ExpPolyTerm>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly { terms: Vec::new() }
    }

    pub fn one() -> Self {
        ExpPoly::from_poly(Poly::one())
    }

    pub fn constant(c: ExactComplex) -> Self {
        ExpPoly::from_poly(Poly::constant(c))
    }

    /// The variable `z` as an exponential polynomial.
    pub fn var() -> Self {
        ExpPoly::from_poly(Poly::monomial(ExactComplex::one(), 1))
    }

    pub fn from_poly(p: Poly) -> Self {
        ExpPoly::from_terms(vec![ExpPolyTerm::new(p, Poly::zero())])
    }

    /// `exp(q)` for a polynomial exponent.
    pub fn exp_of(q: Poly) -> Self {
        ExpPoly::from_terms(vec![ExpPolyTerm::new(Poly::one(), q)])
    }

    /// Canonicalize: merge equal exponents, drop zero mantissas, sort.
    pub fn from_terms(terms: Vec<ExpPolyTerm>) -> Self {
        let mut map: BTreeMap<PolyKey, Poly> = BTreeMap::new();
        for t in terms {
            if t.mantissa.is_zero() {
                continue;
            }
            let key = PolyKey(t.exponent.clone());
            match map.get_mut(&key) {
                Some(m) => *m = m.add(&t.mantissa),
                None => {
                    map.insert(key, t.mantissa);
                }
            }
        }
        let out = map
            .into_iter()
            .filter(|(_, m)| !m.is_zero())
            .map(|(k, m)| ExpPolyTerm::new(m, k.0))
            .collect();
        ExpPoly { terms: out }
    }

    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Max degree of any exponent polynomial; 0 for polynomials and zero.
    pub fn exponent_degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exponent.degree().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// True when every term has zero exponent (a plain polynomial).
    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|t| t.exponent.is_zero())
    }

    pub fn as_poly(&self) -> Option<Poly> {
        if self.terms.is_empty() {
            return Some(Poly::zero());
        }
        if self.terms.len() == 1 && self.terms[0].exponent.is_zero() {
            return Some(self.terms[0].mantissa.clone());
        }
        None
    }

    pub fn add(&self, rhs: &ExpPoly) -> ExpPoly {
        let mut terms = self.terms.clone();
        terms.extend(rhs.terms.iter().cloned());
        ExpPoly::from_terms(terms)
    }

    pub fn neg(&self) -> ExpPoly {
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|t| ExpPolyTerm::new(t.mantissa.neg(), t.exponent.clone()))
                .collect(),
        }
    }

    pub fn sub(&self, rhs: &ExpPoly) -> ExpPoly {
        self.add(&rhs.neg())
    }

    /// Products of exponentials merge by adding exponents.
    pub fn mul(&self, rhs: &ExpPoly) -> ExpPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(ExpPolyTerm::new(
                    a.mantissa.mul(&b.mantissa),
                    a.exponent.add(&b.exponent),
                ));
            }
        }
        ExpPoly::from_terms(terms)
    }

    pub fn scale(&self, c: &ExactComplex) -> ExpPoly {
        if c.is_zero() {
            return ExpPoly::zero();
        }
        ExpPoly {
            terms: self
                .terms
                .iter()
                .map(|t| ExpPolyTerm::new(t.mantissa.scale(c), t.exponent.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> ExpPoly {
        let mut acc = ExpPoly::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// `(P e^Q)' = (P' + P Q') e^Q`.
    pub fn differentiate(&self) -> ExpPoly {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                ExpPolyTerm::new(
                    t.mantissa
                        .derivative()
                        .add(&t.mantissa.mul(&t.exponent.derivative())),
                    t.exponent.clone(),
                )
            })
            .collect();
        ExpPoly::from_terms(terms)
    }

    pub fn derivative_n(&self, n: usize) -> ExpPoly {
        let mut g = self.clone();
        for _ in 0..n {
            g = g.differentiate();
        }
        g
    }

    /// Exact division by `exp(q)`: subtracts `q` from every exponent.
    pub fn div_exp(&self, q: &Poly) -> ExpPoly {
        ExpPoly::from_terms(
            self.terms
                .iter()
                .map(|t| ExpPolyTerm::new(t.mantissa.clone(), t.exponent.sub(q)))
                .collect(),
        )
    }

    /// Evaluate at `z`. The result is returned in scaled form so callers
    /// survive exponents past the floating range; `log_scale` is zero for
    /// moderate inputs.
    pub fn eval<T: Real>(&self, z: Cplx<T>) -> EvalResult<T> {
        if self.terms.is_empty() {
            return EvalResult {
                value: Cplx::zero(),
                log_scale: T::zero(),
            };
        }
        let mut ws = Vec::with_capacity(self.terms.len());
        let mut max_re = T::from_f64(f64::NEG_INFINITY);
        for t in &self.terms {
            let w = eval_poly_cplx(&t.exponent, z);
            if w.re > max_re {
                max_re = w.re;
            }
            ws.push(w);
        }
        // Factor out the dominant exponent when it threatens the exponent
        // range (or is deeply negative, to keep relative accuracy).
        let scale = if max_re.to_f64().abs() > 300.0 {
            max_re
        } else {
            T::zero()
        };
        let mut sum = Cplx::zero();
        for (t, w) in self.terms.iter().zip(ws) {
            let p = eval_poly_cplx(&t.mantissa, z);
            let shifted = Cplx::new(w.re - scale, w.im);
            sum = sum + p * shifted.exp();
        }
        EvalResult {
            value: sum,
            log_scale: scale,
        }
    }

    pub fn eval_f64(&self, z: num_complex::Complex64) -> EvalResult<f64> {
        self.eval(Cplx::new(z.re, z.im))
    }

    /// Rewrite grouping by the coefficient of `z^s` in each exponent; the
    /// residual exponent stays inside the group. `s` defaults to the
    /// exponent degree of `self` but callers grouping an equation pass the
    /// equation-wide degree.
    pub fn normalize_at(&self, s: usize) -> NormalizedExpPoly {
        let mut groups: BTreeMap<ExactComplex, Vec<ExpPolyTerm>> = BTreeMap::new();
        for t in &self.terms {
            let q = t.exponent.coeff(s);
            let residual = t.exponent.sub(&Poly::monomial(q.clone(), s));
            groups
                .entry(q)
                .or_default()
                .push(ExpPolyTerm::new(t.mantissa.clone(), residual));
        }
        let groups = groups
            .into_iter()
            .map(|(q, ts)| (q, ExpPoly::from_terms(ts)))
            .filter(|(_, g)| !g.is_zero())
            .collect();
        NormalizedExpPoly { s, groups }
    }

    pub fn normalize(&self) -> NormalizedExpPoly {
        self.normalize_at(self.exponent_degree())
    }
}

fn eval_poly_cplx<T: Real>(p: &Poly, z: Cplx<T>) -> Cplx<T> {
    let mut acc = Cplx::zero();
    for c in p.coeffs().iter().rev() {
        acc = acc * z + Cplx::from_exact(c);
    }
    acc
}

/// Evaluation result in scaled form: the actual value is
/// `value * exp(log_scale)`.
#[derive(Clone, Copy, Debug)]
pub struct EvalResult<T: Real> {
    pub value: Cplx<T>,
    pub log_scale: T,
}

impl<T: Real> EvalResult<T> {
    /// Plain value when it fits the floating range; `None` flags overflow.
    pub fn value(&self) -> Option<Cplx<T>> {
        if self.log_scale.to_f64() == 0.0 {
            return Some(self.value);
        }
        let mag = self.log_scale.to_f64() + self.value.abs().to_f64().max(1e-300).ln();
        if mag.abs() > 700.0 {
            None
        } else {
            Some(self.value.scale(self.log_scale.exp()))
        }
    }

    /// log |value|, always available (−inf for exact zero).
    pub fn log_abs(&self) -> T {
        let a = self.value.abs();
        if a.to_f64() == 0.0 {
            T::from_f64(f64::NEG_INFINITY)
        } else {
            self.log_scale + a.ln()
        }
    }

    pub fn phase(&self) -> T {
        self.value.arg()
    }
}

/// Eq 3.5-style normal form: `sum_q group_q(z) * exp(q z^s)` with each
/// group of exponent degree <= s-1 and pairwise distinct `q` keys.
#[derive(Clone, PartialEq, Eq)]
pub struct NormalizedExpPoly {
    pub s: usize,
    pub groups: Vec<(ExactComplex, ExpPoly)>,
}

impl NormalizedExpPoly {
    pub fn group(&self, q: &ExactComplex) -> Option<&ExpPoly> {
        self.groups.iter().find(|(k, _)| k == q).map(|(_, g)| g)
    }

    /// Rebuild the plain exponential polynomial (evaluation-equal to the
    /// original; used by the reassembly tests).
    pub fn reassemble(&self) -> ExpPoly {
        let mut acc = ExpPoly::zero();
        for (q, g) in &self.groups {
            let e = ExpPoly::exp_of(Poly::monomial(q.clone(), self.s));
            acc = acc.add(&g.mul(&e));
        }
        acc
    }
}

/// Sorting key wrapper so BTreeMap can order exponent polynomials by the
/// canonical (degree, coefficients) order.
#[derive(Clone, PartialEq, Eq)]
struct PolyKey(Poly);

impl PartialOrd for PolyKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.0.canon_cmp(&other.0))
    }
}

impl Ord for PolyKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.canon_cmp(&other.0)
    }
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for t in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if t.exponent.is_zero() {
                write!(f, "({})", t.mantissa)?;
            } else {
                write!(f, "({})*exp({})", t.mantissa, t.exponent)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}
