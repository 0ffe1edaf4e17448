//! End-to-end growth verification: integrate the equation along a theta
//! grid, estimate order and indicator, and match measurements against the
//! symbolically predicted branch candidates outside the exceptional
//! directions.

use super::estimate::{estimate_indicator, estimate_order, filter_c0, EstimateError};
use super::integrate::{
    closed_form_init, integrate_ray_t, IntegrateError, IntegratorConfig, RayTrace,
};
use super::scalar::{Cplx, Precision, Real};
use crate::asymptotics::{Candidate, ExceptionalRay, RayKind};
use crate::decomp::LinearODE;
use crate::exppoly::ExpPoly;
use crate::geometry::{normalize_angle, Sector};
use crate::num::dd::Dd;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("estimated order {rho_hat:.4} matches no candidate growth exponent within {tol}")]
    RhoMismatch { rho_hat: f64, tol: f64 },
    #[error("every grid direction falls in an excluded zone")]
    AllExcluded,
    #[error("no candidates supplied")]
    NoCandidates,
}

/// Matching options on top of the integrator configuration.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    /// Number of equally spaced grid directions.
    pub theta_count: usize,
    /// Half-width of the exclusion zone around each exceptional ray.
    pub delta_exclusion: f64,
    /// Acceptance threshold on |h_hat - h_predicted|.
    pub tolerance: f64,
    /// Maximum |rho_hat - rho_candidate| for the order match.
    pub rho_match_tol: f64,
    pub filter_window: usize,
    pub drop_threshold: f64,
    /// Match against the maximal-growth candidate only (entire-function
    /// maximal growth queries); default is nearest-candidate matching.
    pub select_max: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            theta_count: 72,
            delta_exclusion: 0.15,
            tolerance: 0.05,
            rho_match_tol: 0.15,
            filter_window: 20,
            drop_threshold: 3.0,
            select_max: false,
        }
    }
}

/// Per-ray initial data at working precision.
pub trait InitProvider<T: Real>: Sync {
    fn init(&self, theta: f64, z0: Cplx<T>) -> Result<Vec<Cplx<T>>, IntegrateError>;
}

/// Initial data from a closed-form solution (symbolic derivatives
/// evaluated at the ray base point, at working precision).
pub struct ClosedFormInit<'a> {
    pub solution: &'a ExpPoly,
    pub order: usize,
}

impl<'a, T: Real> InitProvider<T> for ClosedFormInit<'a> {
    fn init(&self, _theta: f64, z0: Cplx<T>) -> Result<Vec<Cplx<T>>, IntegrateError> {
        closed_form_init(self.solution, z0, self.order)
    }
}

/// One fixed random vector (seeded) shared by all rays; almost surely
/// excites the dominant branch of each sector. Subdominant-branch
/// matching requires closed-form or tuned initial data.
pub struct RandomInit {
    pub order: usize,
    values: Vec<(f64, f64)>,
}

impl RandomInit {
    pub fn new(order: usize, seed: u64) -> RandomInit {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let values = (0..order)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        RandomInit { order, values }
    }
}

impl<T: Real> InitProvider<T> for RandomInit {
    fn init(&self, _theta: f64, _z0: Cplx<T>) -> Result<Vec<Cplx<T>>, IntegrateError> {
        Ok(self
            .values
            .iter()
            .map(|(re, im)| Cplx::from_f64(*re, *im))
            .collect())
    }
}

impl<T: Real, F> InitProvider<T> for F
where
    F: Fn(f64, Cplx<T>) -> Result<Vec<Cplx<T>>, IntegrateError> + Sync,
{
    fn init(&self, theta: f64, z0: Cplx<T>) -> Result<Vec<Cplx<T>>, IntegrateError> {
        self(theta, z0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PerTheta {
    pub theta: f64,
    pub h_hat: Option<f64>,
    /// (leaf, branch) of the matched candidate.
    pub matched: Option<(usize, usize)>,
    pub predicted: Option<f64>,
    pub abs_error: Option<f64>,
    /// Exclusion reason when this direction was not scored.
    pub excluded: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExcludedZone {
    pub sector: Sector,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct VerificationReport {
    pub rho_hat: f64,
    /// The matched exact growth exponent, as "num/den".
    pub rho_matched: String,
    pub per_theta: Vec<PerTheta>,
    pub excluded_zones: Vec<ExcludedZone>,
    pub max_error: f64,
    pub branch_coherent: bool,
    pub pass: bool,
    pub mean_filtered_fraction: f64,
    #[serde(skip)]
    pub traces: Vec<RayTrace>,
}

fn ray_kind_label(kind: &RayKind) -> &'static str {
    match kind {
        RayKind::Critical => "critical ray",
        RayKind::LiftedCritical => "lifted critical ray",
        RayKind::Stokes => "Stokes ray",
    }
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = normalize_angle(a - b);
    d.min(TAU - d)
}

/// Run the full verification at the precision requested in `config`.
pub fn verify(
    eq: &LinearODE,
    candidates: &[(Sector, Vec<Candidate>)],
    exceptional: &[ExceptionalRay],
    init: &InitKind,
    config: &IntegratorConfig,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    match Precision::from_bits(config.precision) {
        Precision::Double => match init {
            InitKind::ClosedForm(f) => verify_t::<f64>(
                eq,
                candidates,
                exceptional,
                &ClosedFormInit {
                    solution: f,
                    order: eq.order(),
                },
                config,
                opts,
            ),
            InitKind::Random(seed) => verify_t::<f64>(
                eq,
                candidates,
                exceptional,
                &RandomInit::new(eq.order(), *seed),
                config,
                opts,
            ),
        },
        Precision::DoubleDouble => match init {
            InitKind::ClosedForm(f) => verify_t::<Dd>(
                eq,
                candidates,
                exceptional,
                &ClosedFormInit {
                    solution: f,
                    order: eq.order(),
                },
                config,
                opts,
            ),
            InitKind::Random(seed) => verify_t::<Dd>(
                eq,
                candidates,
                exceptional,
                &RandomInit::new(eq.order(), *seed),
                config,
                opts,
            ),
        },
    }
}

/// Initial-data source selector for the precision-dispatching front end.
pub enum InitKind<'a> {
    ClosedForm(&'a ExpPoly),
    Random(u64),
}

/// Generic verification over the working scalar.
pub fn verify_t<T: Real>(
    eq: &LinearODE,
    candidates: &[(Sector, Vec<Candidate>)],
    exceptional: &[ExceptionalRay],
    init: &dyn InitProvider<T>,
    config: &IntegratorConfig,
    opts: &VerifyOptions,
) -> Result<VerificationReport, VerifyError> {
    if candidates.is_empty() {
        return Err(VerifyError::NoCandidates);
    }
    let thetas: Vec<f64> = (0..opts.theta_count)
        .map(|k| TAU * k as f64 / opts.theta_count as f64)
        .collect();

    // Integrate all rays (independent work items).
    let traces: Vec<Result<RayTrace, IntegrateError>> = thetas
        .par_iter()
        .map(|&theta| {
            let z0 = Cplx::from_polar(T::from_f64(config.r0), T::from_f64(theta));
            let init = init.init(theta, z0)?;
            let trace = integrate_ray_t(eq, theta, &init, config)?;
            Ok(filter_c0(&trace, opts.filter_window, opts.drop_threshold))
        })
        .collect();
    let traces: Vec<RayTrace> = traces.into_iter().collect::<Result<_, _>>()?;

    let rho_hat = estimate_order(&traces)?;

    // Snap the estimated order to the nearest candidate exponent.
    let mut rho_best: Option<(&BigRational, f64)> = None;
    for (_, cands) in candidates {
        for c in cands {
            let d = (c.rho.to_f64().unwrap() - rho_hat).abs();
            if rho_best.map_or(true, |(_, best)| d < best) {
                rho_best = Some((&c.rho, d));
            }
        }
    }
    let (rho_exact, rho_dist) = rho_best.ok_or(VerifyError::NoCandidates)?;
    if rho_dist > opts.rho_match_tol {
        return Err(VerifyError::RhoMismatch {
            rho_hat,
            tol: opts.rho_match_tol,
        });
    }
    let rho = rho_exact.to_f64().unwrap();

    let excluded_zones: Vec<ExcludedZone> = exceptional
        .iter()
        .map(|r| ExcludedZone {
            sector: Sector::new(r.angle - opts.delta_exclusion, r.angle + opts.delta_exclusion),
            reason: format!(
                "{}{}",
                ray_kind_label(&r.kind),
                if r.coincident { " (coincident)" } else { "" }
            ),
        })
        .collect();

    let mut per_theta = Vec::with_capacity(thetas.len());
    for (k, &theta) in thetas.iter().enumerate() {
        // Exclusion by proximity to an exceptional direction.
        let zone = exceptional
            .iter()
            .find(|r| angular_distance(theta, r.angle) < opts.delta_exclusion);
        if let Some(z) = zone {
            per_theta.push(PerTheta {
                theta,
                h_hat: None,
                matched: None,
                predicted: None,
                abs_error: None,
                excluded: Some(ray_kind_label(&z.kind).to_string()),
            });
            continue;
        }
        let sector_cands = candidates.iter().find(|(s, _)| s.contains(theta));
        let cands = match sector_cands {
            Some((_, c)) => c,
            None => {
                per_theta.push(PerTheta {
                    theta,
                    h_hat: None,
                    matched: None,
                    predicted: None,
                    abs_error: None,
                    excluded: Some("uncovered wedge".to_string()),
                });
                continue;
            }
        };
        let usable: Vec<&Candidate> = cands.iter().filter(|c| &c.rho == rho_exact).collect();
        if usable.is_empty() {
            per_theta.push(PerTheta {
                theta,
                h_hat: None,
                matched: None,
                predicted: None,
                abs_error: None,
                excluded: Some("no candidate at matched order".to_string()),
            });
            continue;
        }
        let h_hat = match estimate_indicator(&traces[k], rho) {
            Ok(h) => h,
            Err(e) => {
                per_theta.push(PerTheta {
                    theta,
                    h_hat: None,
                    matched: None,
                    predicted: None,
                    abs_error: None,
                    excluded: Some(format!("estimation failed: {e}")),
                });
                continue;
            }
        };
        let chosen = if opts.select_max {
            usable
                .iter()
                .max_by(|a, b| {
                    a.curve_at(theta)
                        .partial_cmp(&b.curve_at(theta))
                        .unwrap()
                })
                .unwrap()
        } else {
            usable
                .iter()
                .min_by(|a, b| {
                    (a.curve_at(theta) - h_hat)
                        .abs()
                        .partial_cmp(&(b.curve_at(theta) - h_hat).abs())
                        .unwrap()
                })
                .unwrap()
        };
        let predicted = chosen.curve_at(theta);
        per_theta.push(PerTheta {
            theta,
            h_hat: Some(h_hat),
            matched: Some(chosen.branch_id()),
            predicted: Some(predicted),
            abs_error: Some((predicted - h_hat).abs()),
            excluded: None,
        });
    }

    if per_theta.iter().all(|p| p.excluded.is_some()) {
        return Err(VerifyError::AllExcluded);
    }

    // Branch coherence: between consecutive exceptional rays the matched
    // branch id must not change.
    let coherent = check_coherence(&per_theta);
    let max_error = per_theta
        .iter()
        .filter_map(|p| p.abs_error)
        .fold(0.0f64, f64::max);
    let mean_filtered_fraction = traces
        .iter()
        .map(|t| t.filtered_fraction)
        .sum::<f64>()
        / traces.len().max(1) as f64;
    let pass = coherent && max_error <= opts.tolerance;
    Ok(VerificationReport {
        rho_hat,
        rho_matched: rho_exact.to_string(),
        per_theta,
        excluded_zones,
        max_error,
        branch_coherent: coherent,
        pass,
        mean_filtered_fraction,
        traces,
    })
}

/// Scored directions form runs separated by excluded ones; within each
/// run the matched branch id must be constant.
fn check_coherence(per_theta: &[PerTheta]) -> bool {
    let mut run_id: Option<(usize, usize)> = None;
    // The grid wraps around; start the scan at an excluded direction when
    // one exists so runs are not split at theta = 0.
    let n = per_theta.len();
    let start = per_theta
        .iter()
        .position(|p| p.excluded.is_some())
        .unwrap_or(0);
    for k in 0..n {
        let p = &per_theta[(start + k) % n];
        match (&p.excluded, p.matched) {
            (Some(_), _) => run_id = None,
            (None, Some(id)) => {
                if let Some(prev) = run_id {
                    if prev != id {
                        return false;
                    }
                }
                run_id = Some(id);
            }
            (None, None) => {}
        }
    }
    true
}
