//! Ray integration of the companion system with log-rescaling.
//!
//! Coefficients like `e^z` or `e^{i z^2}` make the companion system
//! violently stiff along most rays (a spurious fast mode with rate up to
//! `e^{r}` rides along the slow solution manifold), so the stepper is an
//! L-stable Radau IIA collocation method (5 stages, order 9). For a
//! linear system each step is a single linear solve, no Newton loop.
//! Error control is Richardson step-doubling at the method's full order,
//! which is what makes tolerances near 1e-20 affordable.
//!
//! State magnitudes traverse e^{+-r^2}-sized ranges; whenever the state's
//! log-magnitude passes the rescale threshold the vector is renormalized
//! and the scale accumulated separately, so `log |f|` stays exact up to
//! integration error far beyond floating range.

use super::scalar::{Cplx, Precision, Real};
use crate::decomp::LinearODE;
use crate::exact::ExactComplex;
use crate::exppoly::ExpPoly;
use crate::num::dd::Dd;
use crate::poly::Poly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum IntegrateError {
    #[error("NaN encountered at r = {r} on ray theta = {theta}")]
    NanEncountered { theta: f64, r: f64 },
    #[error("initial state must not be identically zero")]
    ZeroInit,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("closed-form evaluation overflowed at the base point")]
    InitOverflow,
}

/// Integration settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Requested precision in bits; <= 53 runs on f64, above on
    /// double-double.
    pub precision: u32,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Log-magnitude threshold that triggers state renormalization.
    pub rescale_threshold: f64,
    pub r0: f64,
    pub rmax: f64,
    pub samples_per_ray: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            precision: 128,
            rel_tol: 1e-20,
            abs_tol: 1e-32,
            rescale_threshold: 50.0,
            r0: 1.0,
            rmax: 30.0,
            samples_per_ray: 400,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.r0 > 0.0 && self.rmax > self.r0) {
            return Err(IntegrateError::BadConfig(
                "need 0 < r0 < rmax".to_string(),
            ));
        }
        if self.rel_tol <= 0.0 || self.abs_tol <= 0.0 {
            return Err(IntegrateError::BadConfig(
                "tolerances must be positive".to_string(),
            ));
        }
        if self.precision < 53 {
            return Err(IntegrateError::BadConfig(
                "precision below 53 bits".to_string(),
            ));
        }
        if self.samples_per_ray < 2 {
            return Err(IntegrateError::BadConfig(
                "need at least two samples per ray".to_string(),
            ));
        }
        Ok(())
    }

    pub fn sample_radii(&self) -> Vec<f64> {
        let n = self.samples_per_ray;
        let ratio = (self.rmax / self.r0).ln();
        (0..n)
            .map(|k| self.r0 * (ratio * k as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// One measured sample on a ray.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RaySample {
    pub r: f64,
    pub log_abs_f: f64,
    pub log_abs_derivs: Vec<f64>,
}

/// Growth measurements along one ray, with the exceptional-dip mask
/// filled in by the C0 filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayTrace {
    pub theta: f64,
    pub samples: Vec<RaySample>,
    pub filtered: Vec<bool>,
    pub filtered_fraction: f64,
    /// Present when integration stopped early (step-size collapse).
    pub diagnostic: Option<String>,
}

impl RayTrace {
    pub fn unfiltered(&self) -> impl Iterator<Item = (&RaySample, bool)> {
        self.samples.iter().zip(self.filtered.iter().map(|b| !b))
    }
}

/// A coefficient compiled to scalar type T for the integrator hot loop.
struct CompiledExpPoly<T: Real> {
    terms: Vec<(Vec<Cplx<T>>, Vec<Cplx<T>>)>, // (mantissa coeffs, exponent coeffs)
}

impl<T: Real> CompiledExpPoly<T> {
    fn compile(g: &ExpPoly) -> Self {
        let conv = |p: &Poly| -> Vec<Cplx<T>> {
            p.coeffs().iter().map(Cplx::from_exact).collect()
        };
        CompiledExpPoly {
            terms: g
                .terms()
                .iter()
                .map(|t| (conv(&t.mantissa), conv(&t.exponent)))
                .collect(),
        }
    }

    /// Scaled evaluation: returns (v, s) with the true value v e^s.
    fn eval(&self, z: Cplx<T>) -> (Cplx<T>, T) {
        if self.terms.is_empty() {
            return (Cplx::zero(), T::zero());
        }
        let mut ws = Vec::with_capacity(self.terms.len());
        let mut max_re = T::from_f64(f64::NEG_INFINITY);
        for (_, q) in &self.terms {
            let w = horner(q, z);
            if w.re > max_re {
                max_re = w.re;
            }
            ws.push(w);
        }
        let scale = if max_re.to_f64().abs() > 250.0 {
            max_re
        } else {
            T::zero()
        };
        let mut sum = Cplx::zero();
        for ((p, _), w) in self.terms.iter().zip(ws) {
            let m = horner(p, z);
            sum = sum + m * Cplx::new(w.re - scale, w.im).exp();
        }
        (sum, scale)
    }
}

fn horner<T: Real>(coeffs: &[Cplx<T>], z: Cplx<T>) -> Cplx<T> {
    let mut acc = Cplx::zero();
    for c in coeffs.iter().rev() {
        acc = acc * z + *c;
    }
    acc
}

/// Radau IIA tableau of order 2s-1, computed at scalar precision so the
/// method itself never limits accuracy.
struct RadauTableau<T: Real> {
    c: Vec<T>,
    a: Vec<Vec<T>>,
}

impl<T: Real> RadauTableau<T> {
    fn new(stages: usize) -> Self {
        // Interior nodes: roots of (P_{s-1} - P_s)/(1 - t) on [-1, 1],
        // mapped by c = (t+1)/2; the right endpoint t = 1 joins as c = 1.
        let p_prev = legendre(stages - 1);
        let p_cur = legendre(stages);
        let numer = p_prev.sub(&p_cur);
        let denom = Poly::from_coeffs(vec![ExactComplex::one(), ExactComplex::from_int(-1)]);
        let reduced = numer.div_exact(&denom);
        let roots_f64 = real_roots_in_unit_interval(&reduced);
        assert_eq!(roots_f64.len(), stages - 1, "Radau node count");
        let coeffs_t: Vec<T> = reduced
            .coeffs()
            .iter()
            .map(|c| T::from_rational(&c.re))
            .collect();
        let half = T::from_f64(0.5);
        let mut c: Vec<T> = roots_f64
            .into_iter()
            .map(|r| {
                let t = polish_real_root(&coeffs_t, T::from_f64(r));
                (t + T::one()) * half
            })
            .collect();
        c.push(T::one());
        // Collocation conditions: sum_j a_ij c_j^{k-1} = c_i^k / k.
        let s = stages;
        let mut a = vec![vec![T::zero(); s]; s];
        for i in 0..s {
            let mut m = vec![vec![Cplx::<T>::zero(); s]; s];
            let mut rhs = vec![Cplx::<T>::zero(); s];
            for k in 0..s {
                let mut ck = T::one();
                for _ in 0..k {
                    ck = ck * c[i];
                }
                ck = ck * c[i]; // c_i^{k+1}
                rhs[k] = Cplx::new(ck / T::from_f64((k + 1) as f64), T::zero());
                for j in 0..s {
                    let mut cjk = T::one();
                    for _ in 0..k {
                        cjk = cjk * c[j];
                    }
                    m[k][j] = Cplx::new(cjk, T::zero());
                }
            }
            let sol = lu_solve(m, rhs).expect("Vandermonde system is regular");
            for j in 0..s {
                a[i][j] = sol[j].re;
            }
        }
        RadauTableau { c, a }
    }
}

/// Legendre polynomial with exact rational coefficients.
fn legendre(k: usize) -> Poly {
    let mut p0 = Poly::one();
    if k == 0 {
        return p0;
    }
    let t = Poly::monomial(ExactComplex::one(), 1);
    let mut p1 = t.clone();
    for m in 1..k {
        // (m+1) P_{m+1} = (2m+1) t P_m - m P_{m-1}
        let lhs = t
            .mul(&p1)
            .scale(&ExactComplex::from_int(2 * m as i64 + 1))
            .sub(&p0.scale(&ExactComplex::from_int(m as i64)));
        let next = lhs.div_const(&ExactComplex::from_int(m as i64 + 1));
        p0 = p1;
        p1 = next;
    }
    p1
}

/// Simple real roots of an exact polynomial inside (-1, 1) via sign-change
/// bisection (the Radau node polynomial has exactly s-1 of them).
fn real_roots_in_unit_interval(p: &Poly) -> Vec<f64> {
    let cf: Vec<f64> = p
        .coeffs()
        .iter()
        .map(|c| crate::exact::rational_to_f64(&c.re))
        .collect();
    let eval = |x: f64| -> f64 {
        let mut acc = 0.0;
        for c in cf.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    let n = 4000;
    let mut roots = Vec::new();
    let mut prev_x = -1.0 + 1e-9;
    let mut prev_v = eval(prev_x);
    for k in 1..=n {
        let x = -1.0 + 2.0 * k as f64 / n as f64 - 1e-9;
        let v = eval(x);
        if prev_v == 0.0 {
            roots.push(prev_x);
        } else if prev_v * v < 0.0 {
            let (mut lo, mut hi) = (prev_x, x);
            let (mut vlo, _) = (prev_v, v);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let vm = eval(mid);
                if vlo * vm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    vlo = vm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_v = v;
    }
    roots
}

fn polish_real_root<T: Real>(coeffs: &[T], mut x: T) -> T {
    for _ in 0..4 {
        let mut v = T::zero();
        let mut dv = T::zero();
        for c in coeffs.iter().rev() {
            dv = dv * x + v;
            v = v * x + *c;
        }
        if dv.to_f64() == 0.0 {
            break;
        }
        x = x - v / dv;
    }
    x
}

/// Dense LU with partial pivoting over the complex scalar.
fn lu_solve<T: Real>(mut m: Vec<Vec<Cplx<T>>>, mut b: Vec<Cplx<T>>) -> Option<Vec<Cplx<T>>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        let mut best = m[col][col].norm_sqr().to_f64();
        for row in col + 1..n {
            let mag = m[row][col].norm_sqr().to_f64();
            if mag > best {
                best = mag;
                piv = row;
            }
        }
        if !(best > 0.0) || !best.is_finite() {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        let inv = m[col][col].inv();
        for row in col + 1..n {
            let factor = m[row][col] * inv;
            if factor.norm_sqr().to_f64() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = factor * m[col][k];
                m[row][k] = m[row][k] - sub;
            }
            let sub = factor * b[col];
            b[row] = b[row] - sub;
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            let sub = m[col][k] * b[k];
            acc = acc - sub;
        }
        b[col] = acc * m[col][col].inv();
    }
    Some(b)
}

/// The compiled right-hand side `y' = e^{i theta} C(z) y` with C the
/// companion matrix of the coefficient ratios.
struct CompanionSystem<T: Real> {
    n: usize,
    coeffs: Vec<CompiledExpPoly<T>>,
    direction: Cplx<T>,
}

impl<T: Real> CompanionSystem<T> {
    fn new(eq: &LinearODE, theta: f64) -> Self {
        CompanionSystem {
            n: eq.order(),
            coeffs: eq.coeffs().iter().map(CompiledExpPoly::compile).collect(),
            direction: Cplx::from_polar(T::one(), T::from_f64(theta)),
        }
    }

    /// Matrix B(z) with y' = B y (n x n, dense row-major). `None` when the
    /// point is numerically singular (leading coefficient vanishing or an
    /// entry too large to square safely inside the LU).
    fn matrix(&self, z: Cplx<T>) -> Option<Vec<Vec<Cplx<T>>>> {
        let n = self.n;
        let (lead, lead_scale) = self.coeffs[n].eval(z);
        if lead.norm_sqr().to_f64() == 0.0 {
            return None;
        }
        let lead_inv = lead.inv();
        let mut m = vec![vec![Cplx::<T>::zero(); n]; n];
        for row in 0..n.saturating_sub(1) {
            m[row][row + 1] = self.direction;
        }
        for colm in 0..n {
            let (v, s) = self.coeffs[colm].eval(z);
            let expo = (s - lead_scale).to_f64();
            if expo > 300.0 {
                return None;
            }
            let ratio = v * lead_inv.scale((s - lead_scale).exp());
            let mag = ratio.norm_sqr().to_f64();
            if !mag.is_finite() || mag > 1e200 {
                return None;
            }
            m[n - 1][colm] = -(self.direction * ratio);
        }
        Some(m)
    }
}

enum StepOutcome<T: Real> {
    Accept { y: Vec<Cplx<T>>, err: f64 },
    Singular,
}

/// One Radau collocation step of size h from (r, y); linear solve of the
/// stacked stage system.
fn radau_step<T: Real>(
    sys: &CompanionSystem<T>,
    tab: &RadauTableau<T>,
    r: T,
    y: &[Cplx<T>],
    h: T,
) -> Option<Vec<Cplx<T>>> {
    let n = sys.n;
    let s = tab.c.len();
    let dim = s * n;
    let mut mats = Vec::with_capacity(s);
    for c in &tab.c {
        let rj = r + h * *c;
        let zj = sys.direction.scale(rj);
        mats.push(sys.matrix(zj)?);
    }
    let mut big = vec![vec![Cplx::<T>::zero(); dim]; dim];
    let mut rhs = vec![Cplx::<T>::zero(); dim];
    for i in 0..s {
        for row in 0..n {
            let r_idx = i * n + row;
            big[r_idx][r_idx] = Cplx::one();
            rhs[r_idx] = Cplx::new(y[row].re, y[row].im);
            for j in 0..s {
                let w = h * tab.a[i][j];
                for col in 0..n {
                    let sub = mats[j][row][col].scale(w);
                    big[r_idx][j * n + col] = big[r_idx][j * n + col] - sub;
                }
            }
        }
    }
    let sol = lu_solve(big, rhs)?;
    // Stiffly accurate: y1 is the last stage (c_s = 1).
    Some(sol[(s - 1) * n..].to_vec())
}

/// Integrate one ray and sample log-magnitudes at geometric radii.
pub fn integrate_ray_t<T: Real>(
    eq: &LinearODE,
    theta: f64,
    init: &[Cplx<T>],
    config: &IntegratorConfig,
) -> Result<RayTrace, IntegrateError> {
    config.validate()?;
    let n = eq.order();
    assert_eq!(init.len(), n, "init must supply f ... f^(n-1)");
    if init.iter().all(|v| v.norm_sqr().to_f64() == 0.0) {
        return Err(IntegrateError::ZeroInit);
    }
    if init.iter().any(|v| v.is_nan()) {
        return Err(IntegrateError::NanEncountered {
            theta,
            r: config.r0,
        });
    }
    let sys = CompanionSystem::<T>::new(eq, theta);
    let tab = RadauTableau::<T>::new(5);
    let order = 9.0f64;
    let richardson = (2f64).powf(order) - 1.0;

    let radii = config.sample_radii();
    let mut samples = Vec::with_capacity(radii.len());
    let mut diagnostic = None;

    let mut y: Vec<Cplx<T>> = init.to_vec();
    let mut log_scale = T::zero();
    let mut r = T::from_f64(config.r0);

    let record = |samples: &mut Vec<RaySample>, r: f64, y: &[Cplx<T>], log_scale: T| {
        let la = |v: Cplx<T>| -> f64 {
            let a = v.norm_sqr().to_f64();
            if a == 0.0 {
                f64::NEG_INFINITY
            } else {
                log_scale.to_f64() + 0.5 * a.ln()
            }
        };
        samples.push(RaySample {
            r,
            log_abs_f: la(y[0]),
            log_abs_derivs: y.iter().map(|v| la(*v)).collect(),
        });
    };

    record(&mut samples, config.r0, &y, log_scale);

    let mut h = ((config.rmax - config.r0) / 1000.0).min(0.05 * config.r0);
    let mut steps: u64 = 0;
    // A ray that needs more work than this is crawling through a singular
    // point; truncating with a diagnostic beats burning the time budget.
    const MAX_STEPS: u64 = 400_000;
    const MAX_STEPS_PER_TARGET: u64 = 40_000;

    'targets: for &target in &radii[1..] {
        let target_start = steps;
        loop {
            let rf = r.to_f64();
            if rf >= target - 1e-12 * target {
                break;
            }
            if steps > MAX_STEPS || steps - target_start > MAX_STEPS_PER_TARGET {
                diagnostic = Some(format!("step budget exhausted at r = {rf}"));
                break 'targets;
            }
            steps += 1;
            let mut hh = h.min(target - rf);
            if hh <= 0.0 {
                break;
            }
            // Trial: one full step vs two half steps (Richardson).
            let attempt = |hh: f64| -> StepOutcome<T> {
                let ht = T::from_f64(hh);
                let full = radau_step(&sys, &tab, r, &y, ht);
                let half = T::from_f64(hh * 0.5);
                let first = radau_step(&sys, &tab, r, &y, half);
                let (full, first) = match (full, first) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return StepOutcome::Singular,
                };
                let second = match radau_step(&sys, &tab, r + half, &first, half) {
                    Some(v) => v,
                    None => return StepOutcome::Singular,
                };
                let mut err = 0.0f64;
                for k in 0..n {
                    let diff = (second[k] - full[k]).abs().to_f64();
                    let scale = config.abs_tol
                        + config.rel_tol
                            * second[k].abs().to_f64().max(full[k].abs().to_f64()).max(1e-30);
                    err = err.max(diff / scale / richardson);
                }
                StepOutcome::Accept { y: second, err }
            };
            let outcome = attempt(hh);
            match outcome {
                StepOutcome::Singular => {
                    hh *= 0.25;
                    h = hh;
                    if hh < 1e-10 * (1.0 + rf) {
                        diagnostic = Some(format!(
                            "step size collapsed at r = {rf} (singular or unresolvable point on the ray)"
                        ));
                        break 'targets;
                    }
                    continue;
                }
                StepOutcome::Accept { y: y_new, err } => {
                    if !err.is_finite() || y_new.iter().any(|v| v.is_nan()) {
                        // Treat non-finite results like a singular point:
                        // shrink hard and retry until the floor trips.
                        h = hh * 0.25;
                        if h < 1e-10 * (1.0 + rf) {
                            diagnostic = Some(format!(
                                "step size collapsed at r = {rf} (non-finite step result)"
                            ));
                            break 'targets;
                        }
                        continue;
                    }
                    if err <= 1.0 {
                        y = y_new;
                        r = r + T::from_f64(hh);
                        // Renormalize huge/tiny states; the scale rides in
                        // log_scale so log|f| is unaffected.
                        let mx = y
                            .iter()
                            .map(|v| v.abs().to_f64())
                            .fold(0.0f64, f64::max);
                        if mx > 0.0 && mx.ln().abs() > config.rescale_threshold {
                            let ln_mx = mx.ln();
                            let inv = T::from_f64(-ln_mx).exp();
                            for v in y.iter_mut() {
                                *v = v.scale(inv);
                            }
                            log_scale = log_scale + T::from_f64(ln_mx);
                        }
                        let grow = 0.9 * err.powf(-1.0 / (order + 1.0));
                        h = hh * grow.clamp(0.2, 5.0);
                    } else {
                        let shrink = 0.9 * err.powf(-1.0 / (order + 1.0));
                        h = hh * shrink.clamp(0.05, 0.9);
                        if h < 1e-10 * (1.0 + rf) {
                            diagnostic =
                                Some(format!("step size collapsed at r = {rf} under tolerance"));
                            break 'targets;
                        }
                    }
                }
            }
        }
        if diagnostic.is_some() {
            break;
        }
        record(&mut samples, target, &y, log_scale);
    }

    let m = samples.len();
    Ok(RayTrace {
        theta,
        samples,
        filtered: vec![false; m],
        filtered_fraction: 0.0,
        diagnostic,
    })
}

/// Precision-dispatching front end taking f64 initial data.
pub fn integrate_ray(
    eq: &LinearODE,
    theta: f64,
    init: &[Complex64],
    config: &IntegratorConfig,
) -> Result<RayTrace, IntegrateError> {
    match Precision::from_bits(config.precision) {
        Precision::Double => {
            let init: Vec<Cplx<f64>> =
                init.iter().map(|c| Cplx::from_f64(c.re, c.im)).collect();
            integrate_ray_t(eq, theta, &init, config)
        }
        Precision::DoubleDouble => {
            let init: Vec<Cplx<Dd>> =
                init.iter().map(|c| Cplx::from_f64(c.re, c.im)).collect();
            integrate_ray_t(eq, theta, &init, config)
        }
    }
}

/// Initial data `(f(z0), ..., f^(n-1)(z0))` from a closed-form solution,
/// computed by symbolic differentiation then scalar evaluation. Accuracy
/// matches the integration scalar: seeding a subdominant branch demands
/// initial data at least as sharp as the integration tolerance.
pub fn closed_form_init<T: Real>(
    f: &ExpPoly,
    z0: Cplx<T>,
    n: usize,
) -> Result<Vec<Cplx<T>>, IntegrateError> {
    let mut out = Vec::with_capacity(n);
    let mut g = f.clone();
    for _ in 0..n {
        let r = g.eval(z0);
        let v = match r.value() {
            Some(v) => v,
            None => return Err(IntegrateError::InitOverflow),
        };
        out.push(v);
        g = g.differentiate();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::LinearODE;
    use crate::parser::parse_exppoly;
    use std::f64::consts::PI;

    fn ode(parts: &[&str]) -> LinearODE {
        LinearODE::new(parts.iter().map(|s| parse_exppoly(s).unwrap()).collect()).unwrap()
    }

    #[test]
    fn radau_tableau_quadrature_moments() {
        // The last row of A is the Radau weight vector; it integrates
        // monomials exactly through order 2s-1 = 9.
        let tab = RadauTableau::<Dd>::new(5);
        let b = tab.a.last().unwrap();
        for k in 1..=9u32 {
            let mut acc = Dd::ZERO;
            for (j, bj) in b.iter().enumerate() {
                let mut cp = Dd::ONE;
                for _ in 0..k - 1 {
                    cp = cp * tab.c[j];
                }
                acc = acc + *bj * cp;
            }
            let expect = 1.0 / k as f64;
            assert!(
                (acc.to_f64() - expect).abs() < 1e-25,
                "moment {} = {} != {}",
                k,
                acc.to_f64(),
                expect
            );
        }
        // Known 3-stage nodes (4 -+ sqrt 6)/10 as a cross-check of the
        // node construction.
        let tab3 = RadauTableau::<Dd>::new(3);
        let c: Vec<f64> = tab3.c.iter().map(|x| x.to_f64()).collect();
        assert!((c[0] - (4.0 - 6.0f64.sqrt()) / 10.0).abs() < 1e-14);
        assert!((c[1] - (4.0 + 6.0f64.sqrt()) / 10.0).abs() < 1e-14);
        assert!((c[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_growth_to_machine_accuracy() {
        // f'' - f = 0 with f = e^z along theta = 0: log|f(r)| = r.
        let eq = ode(&["-1", "0", "1"]);
        let config = IntegratorConfig {
            rmax: 30.0,
            ..Default::default()
        };
        let f = parse_exppoly("exp(z)").unwrap();
        let init = closed_form_init::<Dd>(&f, Cplx::from_f64(1.0, 0.0), 2).unwrap();
        let trace = integrate_ray_t(&eq, 0.0, &init, &config).unwrap();
        assert!(trace.diagnostic.is_none());
        for s in &trace.samples {
            assert!(
                (s.log_abs_f - s.r).abs() < 1e-6,
                "log|f|({}) = {}",
                s.r,
                s.log_abs_f
            );
        }
        // Derivative magnitudes recorded too.
        assert_eq!(trace.samples[0].log_abs_derivs.len(), 2);
    }

    #[test]
    fn stiff_ray_with_exponential_coefficient() {
        // The third-order system with e^z coefficients along theta = 0 has
        // a parasitic mode with rate ~ -3 e^r; the L-stable stepper must
        // hold the subdominant closed-form solution to high accuracy.
        let eq = ode(&[
            "16/27 - exp(z)",
            "-4/3 - 2*exp(z)",
            "3*exp(z)",
            "1",
        ]);
        let f = parse_exppoly("exp(-4/3*z)*(1 - 7*exp(z))").unwrap();
        let config = IntegratorConfig {
            rmax: 30.0,
            rel_tol: 1e-18,
            ..Default::default()
        };
        let init = closed_form_init::<Dd>(&f, Cplx::from_f64(1.0, 0.0), 3).unwrap();
        let trace = integrate_ray_t(&eq, 0.0, &init, &config).unwrap();
        assert!(trace.diagnostic.is_none(), "{:?}", trace.diagnostic);
        let last = trace.samples.last().unwrap();
        // Closed form: log|f(30)| = log|e^{-40} - 7 e^{-10}|.
        let expect = f
            .eval_f64(Complex64::new(30.0, 0.0))
            .log_abs();
        assert!(
            (last.log_abs_f - expect).abs() < 1e-3,
            "got {}, want {}",
            last.log_abs_f,
            expect
        );
    }

    #[test]
    fn gaussian_growth_beyond_float_range_terms() {
        // f' - 2zf = 0 with f = e^{z^2} on theta = 0 out to r = 15:
        // log|f| = r^2 = 225, far past the rescale threshold.
        let eq = ode(&["-2*z", "1"]);
        let config = IntegratorConfig {
            rmax: 15.0,
            ..Default::default()
        };
        let f = parse_exppoly("exp(z^2)").unwrap();
        let init = closed_form_init::<Dd>(&f, Cplx::from_f64(1.0, 0.0), 1).unwrap();
        let trace = integrate_ray_t(&eq, 0.0, &init, &config).unwrap();
        let last = trace.samples.last().unwrap();
        assert!((last.log_abs_f - 225.0).abs() < 1e-4 * 225.0);
    }

    #[test]
    fn rescale_threshold_invariance() {
        let eq = ode(&["-1", "0", "1"]);
        let f = parse_exppoly("exp(z)").unwrap();
        let mut traces = Vec::new();
        for thr in [50.0, 200.0] {
            let config = IntegratorConfig {
                rmax: 30.0,
                rescale_threshold: thr,
                ..Default::default()
            };
            let init = closed_form_init::<Dd>(&f, Cplx::from_f64(1.0, 0.0), 2).unwrap();
            traces.push(integrate_ray_t(&eq, 0.0, &init, &config).unwrap());
        }
        for (a, b) in traces[0].samples.iter().zip(&traces[1].samples) {
            assert!((a.log_abs_f - b.log_abs_f).abs() < 1e-8);
        }
    }

    #[test]
    fn linearity_in_initial_data() {
        // Scaling init by kappa shifts every log_abs_f by exactly
        // log|kappa|.
        let eq = ode(&["-1", "0", "1"]);
        let f = parse_exppoly("exp(z) + 2*exp(-z)").unwrap();
        let config = IntegratorConfig {
            rmax: 20.0,
            ..Default::default()
        };
        let init = closed_form_init::<Dd>(&f, Cplx::from_f64(1.0, 0.0), 2).unwrap();
        let t1 = integrate_ray_t(&eq, PI / 3.0, &init, &config).unwrap();
        let kappa = Cplx::<Dd>::from_f64(3.5, -1.25);
        let scaled: Vec<Cplx<Dd>> = init.iter().map(|v| *v * kappa).collect();
        let t2 = integrate_ray_t(&eq, PI / 3.0, &scaled, &config).unwrap();
        let shift = kappa.abs().to_f64().ln();
        for (a, b) in t1.samples.iter().zip(&t2.samples) {
            assert!((b.log_abs_f - a.log_abs_f - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_init_rejected() {
        let eq = ode(&["-1", "0", "1"]);
        let init = [Cplx::<f64>::zero(), Cplx::<f64>::zero()];
        assert!(matches!(
            integrate_ray_t(&eq, 0.0, &init, &IntegratorConfig::default()),
            Err(IntegrateError::ZeroInit)
        ));
    }

    #[test]
    fn f64_precision_path_works() {
        let eq = ode(&["-1", "0", "1"]);
        let config = IntegratorConfig {
            precision: 53,
            rel_tol: 1e-12,
            abs_tol: 1e-20,
            rmax: 10.0,
            ..Default::default()
        };
        // init (1, 1) at r0 = 1 selects f = e^{z-1}.
        let trace = integrate_ray(
            &eq,
            0.0,
            &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
            &config,
        )
        .unwrap();
        let last = trace.samples.last().unwrap();
        assert!(
            (last.log_abs_f - 9.0).abs() < 1e-6,
            "log|f|(10) = {}",
            last.log_abs_f
        );
    }

    #[test]
    fn closed_form_init_values() {
        // f = e^{z^2}: (f, f')(1) = (e, 2e).
        let f = parse_exppoly("exp(z^2)").unwrap();
        let init = closed_form_init::<f64>(&f, Cplx::from_f64(1.0, 0.0), 2).unwrap();
        let e = std::f64::consts::E;
        assert!((init[0].re - e).abs() < 1e-12 && init[0].im.abs() < 1e-14);
        assert!((init[1].re - 2.0 * e).abs() < 1e-12);

        // f = e^{-4z/3}(1-7e^z) at 0: f(0) = -6.
        let f = parse_exppoly("exp(-4/3*z)*(1 - 7*exp(z))").unwrap();
        let init = closed_form_init::<f64>(&f, Cplx::zero(), 3).unwrap();
        assert!((init[0].re + 6.0).abs() < 1e-13);

        // cos expansion at 0: (1, 0).
        let f = parse_exppoly("cos(z^2)").unwrap();
        let init = closed_form_init::<f64>(&f, Cplx::zero(), 2).unwrap();
        assert!((init[0].re - 1.0).abs() < 1e-14);
        assert!(init[1].abs() < 1e-14);
    }
}
