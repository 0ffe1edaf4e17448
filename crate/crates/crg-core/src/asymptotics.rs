//! Newton-polygon computation of Puiseux growth exponents for
//! polynomial-coefficient equations, refinement of lower exponent terms,
//! Stokes rays, and indicator-curve candidates.
//!
//! A growing solution `f ~ exp(a z^mu)` balances at least two terms of
//! `sum_k A_k f^(k)` when `f^(k)/f ~ (a mu z^(mu-1))^k`, so admissible
//! exponents come from upper-hull segments of the points (k, deg A_k)
//! with slope sigma < 1, via mu = 1 - sigma and the segment equation
//! `sum b_k c^k = 0` in c = a mu.

use crate::decomp::FundamentalDE;
use crate::exact::ExactComplex;
use crate::geometry::{normalize_angle, Sector, SectorSet};
use crate::num::dd::Dd;
use crate::num::scalar::Cplx;
use crate::poly::Poly;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymError {
    #[error("zero equation")]
    ZeroEquation,
    #[error("root finding failed to converge")]
    RootFinding,
    #[error("need at least two branches for Stokes rays")]
    TooFewBranches,
}

/// The (k, d_k) support points and the admissible upper-hull segments.
#[derive(Debug, Clone)]
pub struct NewtonPolygon {
    /// (derivative order, coefficient degree) for nonzero coefficients.
    pub points: Vec<(usize, BigRational)>,
    /// Admissible segments (growth exponent mu > 0), left to right.
    pub segments: Vec<PolygonSegment>,
    /// Total nonzero-root count over admissible segments.
    pub admissible_count: usize,
}

#[derive(Debug, Clone)]
pub struct PolygonSegment {
    pub k_lo: usize,
    pub k_hi: usize,
    /// Geometric slope sigma of the segment in the (k, d) plane.
    pub slope: BigRational,
    /// Growth exponent mu = 1 - sigma.
    pub mu: BigRational,
    /// All k whose support point lies on the segment line.
    pub on_segment: Vec<usize>,
}

fn upper_hull(points: &[(usize, BigRational)]) -> Vec<(usize, BigRational)> {
    // Points arrive sorted by k (strictly increasing).
    let mut hull: Vec<(usize, BigRational)> = Vec::new();
    for p in points {
        while hull.len() >= 2 {
            let a = &hull[hull.len() - 2];
            let b = &hull[hull.len() - 1];
            // Keep b only if it turns strictly downward (clockwise):
            // cross((b-a),(p-a)) < 0. Collinear points are dropped so each
            // segment is maximal.
            let abx = BigRational::from_usize(b.0 - a.0).unwrap();
            let aby = &b.1 - &a.1;
            let apx = BigRational::from_usize(p.0 - a.0).unwrap();
            let apy = &p.1 - &a.1;
            let cross = &abx * &apy - &aby * &apx;
            if cross.is_negative() {
                break;
            }
            hull.pop();
        }
        hull.push(p.clone());
    }
    hull
}

fn polygon_from_points(points: Vec<(usize, BigRational)>, mu_cap: Option<&BigRational>) -> NewtonPolygon {
    let hull = upper_hull(&points);
    let one = BigRational::one();
    let mut segments = Vec::new();
    let mut admissible_count = 0;
    for w in hull.windows(2) {
        let (k0, d0) = (&w[0].0, &w[0].1);
        let (k1, d1) = (&w[1].0, &w[1].1);
        let run = BigRational::from_usize(k1 - k0).unwrap();
        let slope = (d1 - d0) / &run;
        let mu = &one - &slope;
        if !mu.is_positive() {
            continue;
        }
        if let Some(cap) = mu_cap {
            if &mu >= cap {
                continue;
            }
        }
        let on_segment = points
            .iter()
            .filter(|(k, d)| {
                *k >= *k0
                    && *k <= *k1
                    && d - d0 == &slope * BigRational::from_usize(k - k0).unwrap()
            })
            .map(|(k, _)| *k)
            .collect();
        admissible_count += k1 - k0;
        segments.push(PolygonSegment {
            k_lo: *k0,
            k_hi: *k1,
            slope,
            mu,
            on_segment,
        });
    }
    NewtonPolygon {
        points,
        segments,
        admissible_count,
    }
}

/// Newton polygon of a fundamental (polynomial-coefficient) equation.
pub fn newton_polygon(de: &FundamentalDE) -> Result<NewtonPolygon, AsymError> {
    let mut points = Vec::new();
    for (k, c) in de.coefficients.iter().enumerate() {
        if let Some(d) = c.degree() {
            points.push((k, BigRational::from_usize(d).unwrap()));
        }
    }
    if points.is_empty() {
        return Err(AsymError::ZeroEquation);
    }
    Ok(polygon_from_points(points, None))
}

/// A characteristic root of one polygon segment.
#[derive(Debug, Clone)]
pub struct CharRoot {
    pub value: Complex64,
    /// High-precision value from the Newton polish.
    pub value_dd: Cplx<Dd>,
    pub multiplicity: u32,
    /// Set when numeric clustering could not certify the multiplicity.
    pub multiplicity_uncertain: bool,
}

/// Nonzero roots of `sum_{k on segment} b_k c^k`, with b_k the leading
/// coefficient of the k-th polynomial. Multiplicities come from exact
/// square-free factorization, not from numeric clustering.
pub fn characteristic_roots(
    de: &FundamentalDE,
    segment: &PolygonSegment,
) -> Result<Vec<CharRoot>, AsymError> {
    let mut coeffs = vec![ExactComplex::zero(); segment.k_hi + 1];
    for &k in &segment.on_segment {
        coeffs[k] = de.coefficients[k]
            .leading()
            .cloned()
            .unwrap_or_else(ExactComplex::zero);
    }
    let p = Poly::from_coeffs(coeffs);
    exact_nonzero_roots(&p)
}

/// Exact multiplicity structure via Yun's square-free decomposition, then
/// numeric roots of each (simple-rooted) factor.
fn exact_nonzero_roots(p: &Poly) -> Result<Vec<CharRoot>, AsymError> {
    if p.is_zero() {
        return Err(AsymError::ZeroEquation);
    }
    let mut out = Vec::new();
    for (factor, mult) in squarefree_factors(p) {
        if factor.degree().map_or(true, |d| d == 0) {
            continue;
        }
        let roots = simple_roots(&factor)?;
        for r in roots {
            if r.to_c64().norm() < 1e-300 {
                continue; // c = 0 falls to lower segments
            }
            out.push(CharRoot {
                value: r.to_c64(),
                value_dd: r,
                multiplicity: mult,
                multiplicity_uncertain: false,
            });
        }
    }
    Ok(out)
}

/// Yun's algorithm over the exact field: p = prod f_i^i, returns the
/// nonconstant (f_i, i).
fn squarefree_factors(p: &Poly) -> Vec<(Poly, u32)> {
    let dp = p.derivative();
    let a0 = p.gcd(&dp);
    if a0.degree().map_or(true, |d| d == 0) {
        return vec![(p.clone(), 1)];
    }
    let mut out = Vec::new();
    let mut b = p.div_exact(&a0);
    let mut c = dp.div_exact(&a0);
    let mut i = 1u32;
    loop {
        let d = c.sub(&b.derivative());
        if d.is_zero() {
            if b.degree().map_or(false, |deg| deg > 0) {
                out.push((b, i));
            }
            break;
        }
        let f = b.gcd(&d);
        if f.degree().map_or(false, |deg| deg > 0) {
            out.push((f.clone(), i));
        }
        b = b.div_exact(&f);
        c = d.div_exact(&f);
        i += 1;
        if b.degree().map_or(true, |deg| deg == 0) {
            break;
        }
    }
    out
}

/// All roots of a square-free exact polynomial: Durand-Kerner in f64,
/// then Newton polishing in double-double.
fn simple_roots(p: &Poly) -> Result<Vec<Cplx<Dd>>, AsymError> {
    let deg = p.degree().unwrap_or(0);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let cf: Vec<Complex64> = p.coeffs().iter().map(|c| c.to_f64()).collect();
    let approx = durand_kerner(&cf)?;
    // Newton polish with exact coefficients widened to double-double.
    let cdd: Vec<Cplx<Dd>> = p.coeffs().iter().map(Cplx::<Dd>::from_exact).collect();
    let polished = approx
        .into_iter()
        .map(|r| {
            let mut x = Cplx::<Dd>::from_f64(r.re, r.im);
            newton_polish(&cdd, &mut x);
            x
        })
        .collect();
    Ok(polished)
}

fn newton_polish(coeffs: &[Cplx<Dd>], x: &mut Cplx<Dd>) {
    for _ in 0..4 {
        let mut v = Cplx::<Dd>::zero();
        let mut dv = Cplx::<Dd>::zero();
        for c in coeffs.iter().rev() {
            dv = dv * *x + v;
            v = v * *x + *c;
        }
        if dv.abs().to_f64() == 0.0 {
            break;
        }
        *x = *x - v / dv;
    }
}

fn durand_kerner(coeffs: &[Complex64]) -> Result<Vec<Complex64>, AsymError> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let radius = 1.0
        + monic[..n]
            .iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut xs: Vec<Complex64> = (0..n)
        .map(|k| radius * seed.powu(k as u32 + 1) / seed.norm().powi(k as i32))
        .collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    for _ in 0..300 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= xs[i] - xs[j];
                }
            }
            if den.norm() == 0.0 {
                // Nudge coincident iterates apart.
                xs[i] += Complex64::new(1e-6, 1e-6);
                continue;
            }
            let delta = eval(xs[i]) / den;
            xs[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-13 * radius.max(1.0) {
            return Ok(xs);
        }
    }
    Err(AsymError::RootFinding)
}

/// Puiseux polynomial: `sum a_j z^{mu_j}` with rational exponents, sorted
/// by descending exponent. Coefficients are complex doubles (they involve
/// characteristic roots, which are algebraic, not rational).
#[derive(Debug, Clone, Default)]
pub struct PuiseuxPoly {
    terms: Vec<(BigRational, Complex64)>,
}

impl PuiseuxPoly {
    pub fn zero() -> Self {
        PuiseuxPoly { terms: Vec::new() }
    }

    pub fn from_terms(mut terms: Vec<(BigRational, Complex64)>) -> Self {
        terms.retain(|(_, a)| a.norm() > 0.0);
        terms.sort_by(|x, y| y.0.cmp(&x.0));
        let mut merged: Vec<(BigRational, Complex64)> = Vec::new();
        for (e, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == e => last.1 += a,
                _ => merged.push((e, a)),
            }
        }
        let scale = merged
            .iter()
            .map(|(_, a)| a.norm())
            .fold(0.0f64, f64::max);
        // Drop numerically-cancelled residue so degrees stay meaningful.
        merged.retain(|(_, a)| a.norm() > 1e-250 && a.norm() > 1e-11 * scale);
        PuiseuxPoly { terms: merged }
    }

    pub fn from_poly(p: &Poly) -> Self {
        PuiseuxPoly::from_terms(
            p.coeffs()
                .iter()
                .enumerate()
                .map(|(k, c)| (BigRational::from_usize(k).unwrap(), c.to_f64()))
                .collect(),
        )
    }

    pub fn constant(a: Complex64) -> Self {
        PuiseuxPoly::from_terms(vec![(BigRational::zero(), a)])
    }

    pub fn terms(&self) -> &[(BigRational, Complex64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_exponent(&self) -> Option<&BigRational> {
        self.terms.first().map(|(e, _)| e)
    }

    pub fn coeff_at(&self, e: &BigRational) -> Complex64 {
        self.terms
            .iter()
            .find(|(x, _)| x == e)
            .map(|(_, a)| *a)
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    pub fn add(&self, rhs: &PuiseuxPoly) -> PuiseuxPoly {
        let mut t = self.terms.clone();
        t.extend(rhs.terms.iter().cloned());
        PuiseuxPoly::from_terms(t)
    }

    pub fn mul(&self, rhs: &PuiseuxPoly) -> PuiseuxPoly {
        let mut t = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for (e1, a1) in &self.terms {
            for (e2, a2) in &rhs.terms {
                t.push((e1 + e2, a1 * a2));
            }
        }
        PuiseuxPoly::from_terms(t)
    }

    pub fn scale(&self, a: Complex64) -> PuiseuxPoly {
        PuiseuxPoly::from_terms(self.terms.iter().map(|(e, c)| (e.clone(), c * a)).collect())
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm()).fold(0.0, f64::max)
    }

    /// Drop terms below an absolute magnitude threshold. Used after
    /// operator conjugation, where exact cancellations leave float junk
    /// that would otherwise fake polygon points.
    pub fn prune_below(&self, threshold: f64) -> PuiseuxPoly {
        PuiseuxPoly {
            terms: self
                .terms
                .iter()
                .filter(|(_, a)| a.norm() > threshold)
                .cloned()
                .collect(),
        }
    }

    /// Term-wise derivative: a z^mu -> a mu z^{mu-1}.
    pub fn derivative(&self) -> PuiseuxPoly {
        PuiseuxPoly::from_terms(
            self.terms
                .iter()
                .filter(|(e, _)| !e.is_zero())
                .map(|(e, a)| (e - BigRational::one(), a * e.to_f64().unwrap()))
                .collect(),
        )
    }

    /// Evaluate at z = r e^{i theta} using the principal branch of z^mu.
    pub fn eval_ray(&self, r: f64, theta: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (e, a) in &self.terms {
            let mu = e.to_f64().unwrap();
            acc += a * r.powf(mu) * Complex64::from_polar(1.0, mu * theta);
        }
        acc
    }
}

/// One asymptotic growth branch: `log f ~ Q(z^{1/p})` with
/// `Q = sum a_j z^{mu_j}`, all exponents positive, sorted descending.
#[derive(Debug, Clone)]
pub struct ExponentBranch {
    pub puiseux: Vec<(BigRational, Complex64)>,
    /// lcm of the exponent denominators.
    pub p: u32,
    pub multiplicity: u32,
    /// Multiple characteristic root: log-corrections absorbed in the
    /// O(log) tolerance, lower Puiseux terms not expanded.
    pub log_marker: bool,
}

impl ExponentBranch {
    pub fn leading_mu(&self) -> &BigRational {
        &self.puiseux[0].0
    }

    pub fn leading_a(&self) -> Complex64 {
        self.puiseux[0].1
    }

    /// h-curve value of this branch: Re(a e^{i mu theta}) for the leading
    /// term.
    pub fn indicator_at(&self, theta: f64) -> f64 {
        let mu = self.leading_mu().to_f64().unwrap();
        let a = self.leading_a();
        (a * Complex64::from_polar(1.0, mu * theta)).re
    }

    fn key(&self) -> String {
        self.puiseux
            .iter()
            .map(|(e, a)| format!("{}:{:.9}:{:.9};", e, a.re, a.im))
            .collect()
    }
}

fn lcm_of_denominators(terms: &[(BigRational, Complex64)]) -> u32 {
    use num_integer::Integer;
    let mut l: num_bigint::BigInt = 1.into();
    for (e, _) in terms {
        l = l.lcm(e.denom());
    }
    l.to_u32().unwrap_or(1)
}

/// Compute all growth branches of a fundamental equation, refining each
/// branch until remaining exponents would be nonpositive (or the depth cap
/// hits). Branch selection among the candidates is the connection
/// problem and stays with the numeric matcher.
pub fn exponents(de: &FundamentalDE, refine_depth: usize) -> Result<Vec<ExponentBranch>, AsymError> {
    let polygon = newton_polygon(de)?;
    let base: Vec<PuiseuxPoly> = de.coefficients.iter().map(PuiseuxPoly::from_poly).collect();
    let mut out = Vec::new();
    for seg in &polygon.segments {
        let roots = characteristic_roots(de, seg)?;
        for root in roots {
            let a = root.value / seg.mu.to_f64().unwrap();
            let head = vec![(seg.mu.clone(), a)];
            if root.multiplicity > 1 {
                out.push(ExponentBranch {
                    p: lcm_of_denominators(&head),
                    puiseux: head,
                    multiplicity: root.multiplicity,
                    log_marker: true,
                });
                continue;
            }
            refine_branch(&base, head, refine_depth, &mut out);
        }
    }
    // Deduplicate identical branches.
    let mut seen = std::collections::BTreeSet::new();
    out.retain(|b| seen.insert(b.key()));
    Ok(out)
}

/// Extend `head` (current Puiseux terms, descending) by conjugating the
/// operator with exp(Q) and recursing on the conjugate's polygon.
fn refine_branch(
    coeffs: &[PuiseuxPoly],
    head: Vec<(BigRational, Complex64)>,
    depth_left: usize,
    out: &mut Vec<ExponentBranch>,
) {
    let mu_last = head.last().unwrap().0.clone();
    let emit = |head: &Vec<(BigRational, Complex64)>, mult, marker, out: &mut Vec<ExponentBranch>| {
        out.push(ExponentBranch {
            p: lcm_of_denominators(head),
            puiseux: head.clone(),
            multiplicity: mult,
            log_marker: marker,
        });
    };
    if depth_left == 0 {
        emit(&head, 1, false, out);
        return;
    }
    // w = Q'(z) for the accumulated head.
    let q = PuiseuxPoly::from_terms(head.clone());
    let w = q.derivative();
    let conj = conjugate_operator(coeffs, &w);
    // Cross-coefficient prune: balances cancel exactly in theory but
    // leave ~1e-16 junk in floating arithmetic, which would fake hull
    // points.
    let global = conj.iter().map(|c| c.max_coeff()).fold(0.0f64, f64::max);
    let conj: Vec<PuiseuxPoly> = conj
        .iter()
        .map(|c| c.prune_below(1e-10 * global))
        .collect();
    // Polygon of the conjugated operator, capped strictly below mu_last.
    let mut points = Vec::new();
    for (k, c) in conj.iter().enumerate() {
        if let Some(e) = c.max_exponent() {
            points.push((k, e.clone()));
        }
    }
    if points.is_empty() {
        emit(&head, 1, false, out);
        return;
    }
    let polygon = polygon_from_points(points, Some(&mu_last));
    if polygon.segments.is_empty() {
        emit(&head, 1, false, out);
        return;
    }
    let mut extended = false;
    for seg in &polygon.segments {
        // Segment characteristic equation with the conjugate's leading
        // coefficients along the balance line.
        let d_at = |k: usize| -> BigRational {
            let run = BigRational::from_usize(k - seg.k_lo).unwrap();
            conj[seg.k_lo].max_exponent().unwrap().clone() + &seg.slope * run
        };
        let mut cf = vec![Complex64::new(0.0, 0.0); seg.k_hi + 1];
        for &k in &seg.on_segment {
            cf[k] = conj[k].coeff_at(&d_at(k));
        }
        while cf.last().map_or(false, |c| c.norm() == 0.0) {
            cf.pop();
        }
        if cf.len() < 2 {
            continue;
        }
        let roots = match durand_kerner(&cf) {
            Ok(r) => r,
            Err(_) => continue,
        };
        // Cluster: refinement coefficients are floating, so close roots are
        // treated as one multiple root and flagged.
        let clusters = cluster_roots(&roots, 1e-7);
        for (value, mult) in clusters {
            if value.norm() < 1e-9 {
                continue;
            }
            let a_next = value / seg.mu.to_f64().unwrap();
            let mut next = head.clone();
            next.push((seg.mu.clone(), a_next));
            extended = true;
            if mult > 1 {
                emit(&next, mult, true, out);
            } else {
                refine_branch(coeffs, next, depth_left - 1, out);
            }
        }
    }
    if !extended {
        emit(&head, 1, false, out);
    }
}

fn cluster_roots(roots: &[Complex64], tol: f64) -> Vec<(Complex64, u32)> {
    let scale = roots.iter().map(|r| r.norm()).fold(1.0f64, f64::max);
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![roots[i]];
        used[i] = true;
        for j in i + 1..roots.len() {
            if !used[j] && (roots[j] - roots[i]).norm() < tol * scale {
                used[j] = true;
                members.push(roots[j]);
            }
        }
        let mean = members.iter().sum::<Complex64>() / members.len() as f64;
        out.push((mean, members.len() as u32));
    }
    out
}

/// `sum_m A_m (D + w)^m` where D is d/dz: operator coefficients (by power
/// of D) after the substitution f = e^Q g, with w = Q'.
fn conjugate_operator(coeffs: &[PuiseuxPoly], w: &PuiseuxPoly) -> Vec<PuiseuxPoly> {
    let n = coeffs.len() - 1;
    let mut result = vec![PuiseuxPoly::zero(); n + 1];
    // power = (D + w)^m as operator coefficients, built incrementally.
    let mut power = vec![PuiseuxPoly::constant(Complex64::new(1.0, 0.0))];
    for (m, a_m) in coeffs.iter().enumerate() {
        if !a_m.is_zero() {
            for (j, c) in power.iter().enumerate() {
                result[j] = result[j].add(&a_m.mul(c));
            }
        }
        if m == n {
            break;
        }
        // (D + w) * sum c_j D^j = sum (c_{j-1} + c_j w + c_j') D^j
        let mut next = vec![PuiseuxPoly::zero(); power.len() + 1];
        for (j, c) in power.iter().enumerate() {
            next[j + 1] = next[j + 1].add(c);
            next[j] = next[j].add(&c.mul(w)).add(&c.derivative());
        }
        power = next;
    }
    result
}

/// A dominance-switch direction between two branches.
#[derive(Debug, Clone, Serialize)]
pub struct StokesRay {
    pub angle: f64,
    /// Indices of the branch pair (into the supplied branch list).
    pub pair: (usize, usize),
    /// The Puiseux exponent whose term separated the pair.
    pub level_mu: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct StokesRaySet {
    pub rays: Vec<StokesRay>,
}

/// Stokes rays of a branch family inside `sector`: for each pair, the
/// highest Puiseux term where they differ gives (mu*, delta a); rays are
/// the zeros of cos(mu* theta + arg delta a).
pub fn stokes_rays(branches: &[ExponentBranch], sector: &Sector) -> Result<StokesRaySet, AsymError> {
    if branches.len() < 2 {
        return if branches.is_empty() {
            Err(AsymError::TooFewBranches)
        } else {
            Ok(StokesRaySet::default())
        };
    }
    let mut rays = Vec::new();
    for i in 0..branches.len() {
        for j in i + 1..branches.len() {
            if let Some((mu, da)) = highest_difference(&branches[i], &branches[j]) {
                use std::f64::consts::{FRAC_PI_2, PI};
                let muf = mu.to_f64().unwrap();
                let phase = da.arg();
                // theta = (pi/2 + k pi - arg da) / mu, swept over all k
                // that land in [0, 2pi).
                let k_min = ((phase - FRAC_PI_2) / PI).floor() as i64 - 1;
                let k_max = ((muf * TAU + phase - FRAC_PI_2) / PI).ceil() as i64 + 1;
                for kk in k_min..=k_max {
                    let theta = (FRAC_PI_2 + kk as f64 * PI - phase) / muf;
                    if (0.0..TAU).contains(&theta) && sector.contains(theta) {
                        rays.push(StokesRay {
                            angle: normalize_angle(theta),
                            pair: (i, j),
                            level_mu: mu.to_string(),
                        });
                    }
                }
            }
        }
    }
    rays.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
    rays.dedup_by(|a, b| (a.angle - b.angle).abs() < 1e-12 && a.pair == b.pair);
    Ok(StokesRaySet { rays })
}

/// Highest Puiseux exponent at which two branches differ, with the
/// coefficient difference there.
fn highest_difference(
    a: &ExponentBranch,
    b: &ExponentBranch,
) -> Option<(BigRational, Complex64)> {
    let mut exps: Vec<BigRational> = a
        .puiseux
        .iter()
        .chain(b.puiseux.iter())
        .map(|(e, _)| e.clone())
        .collect();
    exps.sort();
    exps.dedup();
    exps.reverse();
    let coeff = |br: &ExponentBranch, e: &BigRational| -> Complex64 {
        br.puiseux
            .iter()
            .find(|(x, _)| x == e)
            .map(|(_, c)| *c)
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    };
    for e in exps {
        let da = coeff(a, &e) - coeff(b, &e);
        if da.norm() > 1e-9 {
            return Some((e, da));
        }
    }
    None
}

/// One leaf analyzed: its branches and its in-sector Stokes rays.
#[derive(Debug, Clone)]
pub struct AnalyzedLeaf {
    pub de: FundamentalDE,
    pub branches: Vec<ExponentBranch>,
    pub stokes: StokesRaySet,
}

pub fn analyze_leaf(de: FundamentalDE, refine_depth: usize) -> Result<AnalyzedLeaf, AsymError> {
    let branches = exponents(&de, refine_depth)?;
    // Stokes rays within each validity interval.
    let mut stokes = StokesRaySet::default();
    if branches.len() >= 2 {
        for (lo, hi) in de.validity.intervals() {
            let sec = Sector::new(*lo, *hi);
            let rs = stokes_rays(&branches, &sec)?;
            stokes.rays.extend(rs.rays);
        }
    }
    stokes
        .rays
        .sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
    Ok(AnalyzedLeaf {
        de,
        branches,
        stokes,
    })
}

/// A candidate growth (rho, a) attached to the leaf/branch that predicted
/// it.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub rho: BigRational,
    pub a: Complex64,
    pub leaf: usize,
    pub branch: usize,
}

impl Candidate {
    pub fn rho_f64(&self) -> f64 {
        self.rho.to_f64().unwrap_or(f64::NAN)
    }

    pub fn curve_at(&self, theta: f64) -> f64 {
        (self.a * Complex64::from_polar(1.0, self.rho.to_f64().unwrap() * theta)).re
    }

    pub fn branch_id(&self) -> (usize, usize) {
        (self.leaf, self.branch)
    }
}

/// Indicator candidates per sector: each leaf's validity, further split at
/// its Stokes rays, mapped to the leading (mu, a) of every branch.
pub fn indicator_candidates(leaves: &[AnalyzedLeaf]) -> Vec<(Sector, Vec<Candidate>)> {
    let mut out = Vec::new();
    for (leaf_idx, leaf) in leaves.iter().enumerate() {
        let cands: Vec<Candidate> = leaf
            .branches
            .iter()
            .enumerate()
            .map(|(branch_idx, b)| Candidate {
                rho: b.leading_mu().clone(),
                a: b.leading_a(),
                leaf: leaf_idx,
                branch: branch_idx,
            })
            .collect();
        for (lo, hi) in leaf.de.validity.intervals() {
            let mut cuts: Vec<f64> = leaf
                .stokes
                .rays
                .iter()
                .map(|r| r.angle)
                .filter(|a| *a > lo + 1e-12 && *a < hi - 1e-12)
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut start = *lo;
            for c in cuts.into_iter().chain(std::iter::once(*hi)) {
                if c - start > 1e-12 {
                    out.push((Sector::new(start, c), cands.clone()));
                }
                start = c;
            }
        }
    }
    out
}

/// Exceptional directions of the whole analysis with their provenance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RayKind {
    Critical,
    LiftedCritical,
    Stokes,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalRay {
    pub angle: f64,
    pub kind: RayKind,
    /// Marks angles shared by rays from different origins (for example a
    /// lifted critical ray that is also a Stokes ray).
    pub coincident: bool,
}

/// Merge critical, lifted-critical and Stokes directions into one sorted
/// list, flagging coincidences instead of hiding them.
pub fn exceptional_rays(
    critical: &[f64],
    lifted: &[f64],
    stokes: &[f64],
) -> Vec<ExceptionalRay> {
    let mut all: Vec<ExceptionalRay> = Vec::new();
    let push = |angle: f64, kind: RayKind, all: &mut Vec<ExceptionalRay>| {
        let a = normalize_angle(angle);
        if let Some(existing) = all.iter_mut().find(|r| (r.angle - a).abs() < 1e-9) {
            existing.coincident = true;
            return;
        }
        all.push(ExceptionalRay {
            angle: a,
            kind,
            coincident: false,
        });
    };
    for &a in critical {
        push(a, RayKind::Critical, &mut all);
    }
    for &a in lifted {
        push(a, RayKind::LiftedCritical, &mut all);
    }
    for &a in stokes {
        push(a, RayKind::Stokes, &mut all);
    }
    all.sort_by(|x, y| x.angle.partial_cmp(&y.angle).unwrap());
    all
}

/// Piecewise indicator curve h(theta) = |a| cos(rho theta + arg a) on
/// disjoint sectors, rho constant across pieces.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatorCurve {
    pub rho: f64,
    pub pieces: Vec<(Sector, f64, f64)>, // (sector, |a|, arg a)
}

impl IndicatorCurve {
    pub fn value(&self, theta: f64) -> Option<f64> {
        self.pieces
            .iter()
            .find(|(s, _, _)| s.contains(theta))
            .map(|(_, m, p)| m * (self.rho * theta + p).cos())
    }
}

/// Validity-coverage diagnostic: union of leaf sectors plus critical
/// strips (z-plane and lifted) compared against the whole circle.
pub fn coverage(leaves: &[AnalyzedLeaf], strip_sets: &[SectorSet]) -> f64 {
    let mut acc = SectorSet::empty();
    for l in leaves {
        acc = acc.union(&l.de.validity);
    }
    for s in strip_sets {
        acc = acc.union(s);
    }
    acc.measure()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{build_tree, leaves, LinearODE};
    use crate::parser::parse_exppoly;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fde(parts: &[&str]) -> FundamentalDE {
        let coeffs: Vec<Poly> = parts
            .iter()
            .map(|s| parse_exppoly(s).unwrap().as_poly().unwrap())
            .collect();
        FundamentalDE::new(coeffs, Vec::new(), SectorSet::full())
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn polygon_half_slope() {
        // -z f'' - 1/2 f' + 1/4 f : points {(2,1),(1,0),(0,0)}, one
        // admissible segment (0,0)-(2,1), slope 1/2, mu = 1/2.
        let de = fde(&["1/4", "-1/2", "-z"]);
        let p = newton_polygon(&de).unwrap();
        assert_eq!(p.points.len(), 3);
        assert_eq!(p.segments.len(), 1);
        let s = &p.segments[0];
        assert_eq!(s.slope, rat(1, 2));
        assert_eq!(s.mu, rat(1, 2));
        assert_eq!(s.on_segment, vec![0, 2]);
        assert_eq!(p.admissible_count, 2);
    }

    #[test]
    fn polygon_slope_minus_one() {
        // 1/2 f'' + (iz-z) f' - (2iz^2+1) f : single segment of slope -1,
        // mu = 2, all three points on it.
        let de = fde(&["-(2*i*z^2 + 1)", "i*z - z", "1/2"]);
        let p = newton_polygon(&de).unwrap();
        assert_eq!(p.segments.len(), 1);
        let s = &p.segments[0];
        assert_eq!(s.slope, rat(-1, 1));
        assert_eq!(s.mu, rat(2, 1));
        assert_eq!(s.on_segment, vec![0, 1, 2]);
    }

    #[test]
    fn polygon_constant_coefficients() {
        let de = fde(&["-1", "0", "1"]); // f'' - f
        let p = newton_polygon(&de).unwrap();
        assert_eq!(p.segments.len(), 1);
        assert_eq!(p.segments[0].slope, rat(0, 1));
        assert_eq!(p.segments[0].mu, rat(1, 1));
    }

    #[test]
    fn characteristic_roots_with_exact_multiplicity() {
        // c^3 - 4/3 c + 16/27 = (c + 4/3)(c - 2/3)^2.
        let de = fde(&["16/27", "-4/3", "0", "1"]);
        let p = newton_polygon(&de).unwrap();
        let roots = characteristic_roots(&de, &p.segments[0]).unwrap();
        assert_eq!(roots.len(), 2);
        let double = roots
            .iter()
            .find(|r| r.multiplicity == 2)
            .expect("double root");
        assert!((double.value - Complex64::new(2.0 / 3.0, 0.0)).norm() < 1e-12);
        let simple = roots.iter().find(|r| r.multiplicity == 1).unwrap();
        assert!((simple.value - Complex64::new(-4.0 / 3.0, 0.0)).norm() < 1e-12);
        // Multiplicities sum to the order.
        let total: u32 = roots.iter().map(|r| r.multiplicity).sum();
        assert_eq!(total as usize, de.order);
    }

    #[test]
    fn characteristic_roots_quadratics() {
        // 3c^2 - 2c - 1 = (3c+1)(c-1).
        let de = fde(&["-1", "-2", "3"]);
        let p = newton_polygon(&de).unwrap();
        let roots = characteristic_roots(&de, &p.segments[0]).unwrap();
        let mut vals: Vec<f64> = roots.iter().map(|r| r.value.re).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((vals[0] + 1.0 / 3.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);

        // 1/2 c^2 + (i-1)c - 2i = 0 has roots {2, -2i}.
        let de = fde(&["-2*i", "i - 1", "1/2"]);
        let p = newton_polygon(&de).unwrap();
        let roots = characteristic_roots(&de, &p.segments[0]).unwrap();
        assert_eq!(roots.len(), 2);
        for r in &roots {
            let ok = (r.value - Complex64::new(2.0, 0.0)).norm() < 1e-12
                || (r.value - Complex64::new(0.0, -2.0)).norm() < 1e-12;
            assert!(ok, "unexpected root {}", r.value);
            // Back-substitution residual at double-double accuracy.
            let c = r.value_dd;
            let half = Cplx::<Dd>::from_f64(0.5, 0.0);
            let b = Cplx::<Dd>::from_f64(-1.0, 1.0);
            let c0 = Cplx::<Dd>::from_f64(0.0, -2.0);
            let resid = (half * c * c + b * c + c0).abs().to_f64();
            assert!(resid < 1e-12);
        }
    }

    #[test]
    fn branch_for_pure_gaussian_leaf() {
        // f' - 2zf: single branch Q = z^2, p = 1, found exactly.
        let de = fde(&["-2*z", "1"]);
        let bs = exponents(&de, 12).unwrap();
        assert_eq!(bs.len(), 1);
        let b = &bs[0];
        assert_eq!(b.puiseux.len(), 1);
        assert_eq!(b.leading_mu(), &rat(2, 1));
        assert!((b.leading_a() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(b.p, 1);
    }

    #[test]
    fn branches_square_root_pair() {
        // -z f'' - 1/2 f' + 1/4 f: branches +/- z^{1/2} with p = 2 and no
        // further positive Puiseux terms.
        let de = fde(&["1/4", "-1/2", "-z"]);
        let bs = exponents(&de, 12).unwrap();
        assert_eq!(bs.len(), 2);
        for b in &bs {
            assert_eq!(b.leading_mu(), &rat(1, 2));
            assert_eq!(b.p, 2);
            assert_eq!(b.puiseux.len(), 1);
            assert!((b.leading_a().norm() - 1.0).abs() < 1e-10);
            assert!(b.leading_a().im.abs() < 1e-10);
        }
        let sum: Complex64 = bs.iter().map(|b| b.leading_a()).sum();
        assert!(sum.norm() < 1e-10);
    }

    #[test]
    fn branches_constant_coefficient_pair() {
        // 3f'' - 2f' - f: branches z and -z/3.
        let de = fde(&["-1", "-2", "3"]);
        let bs = exponents(&de, 12).unwrap();
        assert_eq!(bs.len(), 2);
        let mut as_: Vec<f64> = bs.iter().map(|b| b.leading_a().re).collect();
        as_.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((as_[0] + 1.0 / 3.0).abs() < 1e-12);
        assert!((as_[1] - 1.0).abs() < 1e-12);
        for b in &bs {
            assert_eq!(b.puiseux.len(), 1, "constant-coefficient branch is exact");
        }
    }

    #[test]
    fn third_order_nonmonic_leaf_branches() {
        // 4z f''' + (6+4iz) f'' + (2i-1) f' - i f: mu=1/2 roots +/-1 and a
        // mu=1 branch -iz with no lower positive terms.
        let de = fde(&["-i", "2*i - 1", "6 + 4*i*z", "4*z"]);
        let bs = exponents(&de, 12).unwrap();
        assert_eq!(bs.len(), 3);
        let halfs: Vec<_> = bs
            .iter()
            .filter(|b| b.leading_mu() == &rat(1, 2))
            .collect();
        assert_eq!(halfs.len(), 2);
        let lin = bs
            .iter()
            .find(|b| b.leading_mu() == &rat(1, 1))
            .expect("linear branch");
        assert!((lin.leading_a() - Complex64::new(0.0, -1.0)).norm() < 1e-10);
        assert_eq!(lin.puiseux.len(), 1);
    }

    #[test]
    fn multiplicity_marker_blocks_expansion() {
        let de = fde(&["16/27", "-4/3", "0", "1"]);
        let bs = exponents(&de, 12).unwrap();
        assert_eq!(bs.len(), 2);
        let double = bs.iter().find(|b| b.multiplicity == 2).unwrap();
        assert!(double.log_marker);
        assert!((double.leading_a() - Complex64::new(2.0 / 3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stokes_rays_for_oscillatory_pair() {
        // f'' + f: branches +/- iz; |e^{iz}| = |e^{-iz}| iff Im z = 0.
        let de = fde(&["1", "0", "1"]);
        let bs = exponents(&de, 12).unwrap();
        let rs = stokes_rays(&bs, &Sector::full()).unwrap();
        let angles: Vec<f64> = rs.rays.iter().map(|r| r.angle).collect();
        assert_eq!(angles.len(), 2);
        assert!(angles.iter().any(|a| a.abs() < 1e-9));
        assert!(angles.iter().any(|a| (a - PI).abs() < 1e-9));
    }

    #[test]
    fn stokes_rays_outside_sector_filtered() {
        // Branches z and -z/3: delta = 4/3 z, rays at pi/2 and 3pi/2,
        // which avoid the open right sector.
        let de = fde(&["-1", "-2", "3"]);
        let bs = exponents(&de, 12).unwrap();
        let right = Sector::new(-FRAC_PI_2 + 0.1, FRAC_PI_2 - 0.1);
        let rs = stokes_rays(&bs, &right).unwrap();
        assert!(rs.rays.is_empty());
        let full = stokes_rays(&bs, &Sector::full()).unwrap();
        let angles: Vec<f64> = full.rays.iter().map(|r| r.angle).collect();
        assert!(angles.iter().any(|a| (a - FRAC_PI_2).abs() < 1e-9));
        assert!(angles.iter().any(|a| (a - 3.0 * FRAC_PI_2).abs() < 1e-9));
    }

    #[test]
    fn single_branch_no_rays() {
        let de = fde(&["-2*z", "1"]);
        let bs = exponents(&de, 12).unwrap();
        let rs = stokes_rays(&bs, &Sector::full()).unwrap();
        assert!(rs.rays.is_empty());
    }

    #[test]
    fn gaussian_square_candidates() {
        // The degree-2 oscillatory leaves both contain the branch a=1
        // (the e^{z^2} direction).
        let eq = LinearODE::parse(
            "(2*z - exp(z) + cos(z^2))*f'' \
             + (exp(z) + exp(2*z) - 2 - 4*z^2 - 2*z*sin(z^2) - 2*z*cos(z^2))*f' \
             + (2*exp(z) + 4*z^2*exp(z) - 2*z*exp(z) - 2*z*exp(2*z) + 4*z^2*sin(z^2) - 2*cos(z^2))*f",
        )
        .unwrap();
        let root = build_tree(&eq, 0.1).unwrap();
        let fs = leaves(&root);
        let analyzed: Vec<AnalyzedLeaf> = fs
            .into_iter()
            .map(|f| analyze_leaf(f, 12).unwrap())
            .collect();
        let cands = indicator_candidates(&analyzed);
        // Everywhere a sector covers theta=0.05-ish, the (2, 1) candidate
        // must be present.
        let sector0 = cands
            .iter()
            .find(|(s, _)| s.contains(0.01))
            .expect("sector near 0");
        assert!(sector0
            .1
            .iter()
            .any(|c| c.rho == rat(2, 1) && (c.a - Complex64::new(1.0, 0.0)).norm() < 1e-9));
        // Oscillatory-sector candidates at pi/4-ish: {1, i} from the
        // conjugated-pair leaf.
        let sector_q = cands
            .iter()
            .find(|(s, _)| s.contains(0.3))
            .expect("sector near pi/8");
        assert_eq!(sector_q.1.len(), 2);
        assert!(sector_q
            .1
            .iter()
            .any(|c| (c.a - Complex64::new(1.0, 0.0)).norm() < 1e-9));
        // Stokes rays of that leaf split its arcs at 3pi/8 or 11pi/8.
        let leaf = &analyzed[sector_q.1[0].leaf];
        assert!(leaf
            .stokes
            .rays
            .iter()
            .any(|r| (r.angle - 3.0 * PI / 8.0).abs() < 1e-9
                || (r.angle - 11.0 * PI / 8.0).abs() < 1e-9));
    }

    #[test]
    fn back_substitution_drops_balance_degree() {
        // For each paper-style leaf and each branch, substituting
        // f^(k)/f ~ (Q')^k must cancel the dominant balance: the residual
        // Puiseux degree drops by at least one Puiseux step.
        let leaves: Vec<FundamentalDE> = vec![
            fde(&["16/27", "-4/3", "0", "1"]),
            fde(&["-1", "-2", "3"]),
            fde(&["1/4", "-1/2", "-z"]),
            fde(&["-i", "2*i - 1", "6 + 4*i*z", "4*z"]),
            fde(&["-(2*i*z^2 + 1)", "i*z - z", "1/2"]),
            fde(&["2*i*z^2 - 1", "-(i*z + z)", "1/2"]),
            fde(&["-2*z", "1"]),
            fde(&["2 - 2*z + 4*z^2", "1", "-1"]),
            fde(&["0", "-(2 + 4*z^2)", "2*z"]),
        ];
        for de in leaves {
            let polygon = newton_polygon(&de).unwrap();
            let coeffs: Vec<PuiseuxPoly> =
                de.coefficients.iter().map(PuiseuxPoly::from_poly).collect();
            for seg in &polygon.segments {
                // Dominant balance degree: d_k + k (mu - 1) for any k on
                // the segment.
                let k0 = seg.on_segment[0];
                let d0 = de.coefficients[k0].degree().unwrap();
                let balance_deg = BigRational::from_usize(d0).unwrap()
                    + (&seg.mu - BigRational::one()) * BigRational::from_usize(k0).unwrap();
                for root in characteristic_roots(&de, seg).unwrap() {
                    let a = root.value / seg.mu.to_f64().unwrap();
                    let q = PuiseuxPoly::from_terms(vec![(seg.mu.clone(), a)]);
                    let w = q.derivative();
                    // sum A_k w^k (truncated log-derivative chain).
                    let mut acc = PuiseuxPoly::zero();
                    let mut wk = PuiseuxPoly::constant(Complex64::new(1.0, 0.0));
                    let mut summand_scale = 0.0f64;
                    for k in 0..=de.order {
                        let term = coeffs[k].mul(&wk);
                        summand_scale = summand_scale.max(term.max_coeff());
                        acc = acc.add(&term);
                        wk = wk.mul(&w);
                    }
                    // Every surviving term at or above the balance degree
                    // must be float residue of an exact cancellation.
                    for (e, a) in acc.terms() {
                        if e >= &balance_deg {
                            assert!(
                                a.norm() < 1e-9 * summand_scale,
                                "balance degree {} not reduced: residual {} at degree {}",
                                balance_deg,
                                a,
                                e
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn root_count_decomposition() {
        // Total admissible multiplicity + leftover slots equals the order.
        for (parts, expected_admissible) in [
            (vec!["16/27", "-4/3", "0", "1"], 3usize),
            (vec!["-1", "-2", "3"], 2),
            (vec!["1/4", "-1/2", "-z"], 2),
            (vec!["-i", "2*i - 1", "6 + 4*i*z", "4*z"], 3),
            (vec!["0", "-(2 + 4*z^2)", "2*z"], 1),
        ] {
            let de = fde(&parts);
            let p = newton_polygon(&de).unwrap();
            assert_eq!(p.admissible_count, expected_admissible);
            assert!(p.admissible_count <= de.order);
            let mut counted = 0u32;
            for seg in &p.segments {
                counted += characteristic_roots(&de, seg)
                    .unwrap()
                    .iter()
                    .map(|r| r.multiplicity)
                    .sum::<u32>();
            }
            assert_eq!(counted as usize, p.admissible_count);
        }
    }

    #[test]
    fn exceptional_ray_merge_flags_coincidences() {
        let rays = exceptional_rays(&[0.0, PI], &[0.0, FRAC_PI_2], &[FRAC_PI_2]);
        assert_eq!(rays.len(), 3);
        let at0 = rays.iter().find(|r| r.angle < 1e-12).unwrap();
        assert!(at0.coincident);
        let at_half = rays
            .iter()
            .find(|r| (r.angle - FRAC_PI_2).abs() < 1e-12)
            .unwrap();
        assert!(at_half.coincident);
        assert_eq!(at_half.kind, RayKind::LiftedCritical);
    }

    #[test]
    fn indicator_identity() {
        // |a| cos(rho theta + arg a) equals Re(a e^{i rho theta}).
        let c = Candidate {
            rho: rat(2, 1),
            a: Complex64::new(-0.3, 0.8),
            leaf: 0,
            branch: 0,
        };
        for k in 0..16 {
            let th = TAU * k as f64 / 16.0;
            let direct = (c.a.norm()) * (2.0 * th + c.a.arg()).cos();
            assert!((c.curve_at(th) - direct).abs() < 1e-12);
        }
    }
}
