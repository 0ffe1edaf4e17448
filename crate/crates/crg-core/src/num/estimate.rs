//! Exceptional-set filtering and growth estimation from ray traces.
//!
//! The C0 filter marks samples that dip below the rolling log-envelope
//! (the numeric analogue of excising small discs around zeros). The order
//! estimator fits `A r^rho + B` to the angular maximum of log |f| with
//! rho profiled out; the indicator estimator fits an intercept and takes
//! a high quantile of the detrended values. The fitted intercepts absorb
//! the O(log r)/O(1) corrections the growth representation allows, which
//! plain `log|f| / r^rho` ratios would not shed at practical radii.

use super::integrate::RayTrace;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("order estimation needs at least {need} complete rays, got {got}")]
    TooFewRays { need: usize, got: usize },
    #[error("all traces decay; growth order cannot be estimated")]
    AllDecaying,
    #[error("fewer than {need} usable samples in the fit window")]
    InsufficientData { need: usize },
}

/// Mark samples whose log-magnitude falls more than
/// `drop_threshold * log r` below the rolling upper envelope.
pub fn filter_c0(trace: &RayTrace, window: usize, drop_threshold: f64) -> RayTrace {
    let n = trace.samples.len();
    let mut filtered = vec![false; n];
    let w = window.max(1);
    for i in 0..n {
        let lo = i.saturating_sub(w);
        let hi = (i + w + 1).min(n);
        let env = trace.samples[lo..hi]
            .iter()
            .map(|s| s.log_abs_f)
            .fold(f64::NEG_INFINITY, f64::max);
        let s = &trace.samples[i];
        let slack = drop_threshold * s.r.max(std::f64::consts::E).ln();
        filtered[i] = !s.log_abs_f.is_finite() || s.log_abs_f < env - slack;
    }
    let fraction = filtered.iter().filter(|b| **b).count() as f64 / n.max(1) as f64;
    RayTrace {
        theta: trace.theta,
        samples: trace.samples.clone(),
        filtered,
        filtered_fraction: fraction,
        diagnostic: trace.diagnostic.clone(),
    }
}

/// Cumulative filtered fraction among samples with radius <= r.
pub fn filtered_fraction_upto(trace: &RayTrace, r: f64) -> f64 {
    let mut total = 0usize;
    let mut hit = 0usize;
    for (s, f) in trace.samples.iter().zip(&trace.filtered) {
        if s.r <= r {
            total += 1;
            if *f {
                hit += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Least-squares fit of `y = a x + b`; returns (a, b).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return (0.0, sy / n.max(1.0));
    }
    let a = (n * sxy - sx * sy) / det;
    let b = (sy - a * sx) / n;
    (a, b)
}

fn profile_ssr(rs: &[f64], ls: &[f64], rho: f64) -> f64 {
    let xs: Vec<f64> = rs.iter().map(|r| r.powf(rho)).collect();
    let (a, b) = linear_fit(&xs, ls);
    xs.iter()
        .zip(ls)
        .map(|(x, l)| {
            let e = l - a * x - b;
            e * e
        })
        .sum()
}

/// Growth order from the angular maximum curve `L(r) = max_theta log |f|`:
/// profiled least squares of `L = A r^rho + B` over the top half of the
/// radius range, using unfiltered samples with positive L.
pub fn estimate_order(traces: &[RayTrace]) -> Result<f64, EstimateError> {
    let complete: Vec<&RayTrace> = traces.iter().filter(|t| t.diagnostic.is_none()).collect();
    if complete.len() < 8 {
        return Err(EstimateError::TooFewRays {
            need: 8,
            got: complete.len(),
        });
    }
    let len = complete.iter().map(|t| t.samples.len()).min().unwrap();
    let r0 = complete[0].samples[0].r;
    let rmax = complete[0].samples[len - 1].r;
    let r_cut = r0 + 0.5 * (rmax - r0);
    let mut rs = Vec::new();
    let mut ls = Vec::new();
    for k in 0..len {
        let r = complete[0].samples[k].r;
        if r < r_cut {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        for t in &complete {
            if !t.filtered[k] && t.samples[k].log_abs_f.is_finite() {
                best = best.max(t.samples[k].log_abs_f);
            }
        }
        if best.is_finite() && best > 0.0 {
            rs.push(r);
            ls.push(best);
        }
    }
    if rs.len() < 10 {
        return Err(EstimateError::AllDecaying);
    }
    // Coarse scan then golden-section refinement of the profiled SSR.
    let mut best_rho = 0.05;
    let mut best_ssr = f64::INFINITY;
    let mut rho = 0.05;
    while rho <= 8.0 {
        let ssr = profile_ssr(&rs, &ls, rho);
        if ssr < best_ssr {
            best_ssr = ssr;
            best_rho = rho;
        }
        rho += 0.05;
    }
    let (mut lo, mut hi) = ((best_rho - 0.08).max(0.01), best_rho + 0.08);
    const PHI: f64 = 0.618_033_988_749_895;
    for _ in 0..60 {
        let m1 = hi - PHI * (hi - lo);
        let m2 = lo + PHI * (hi - lo);
        if profile_ssr(&rs, &ls, m1) < profile_ssr(&rs, &ls, m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Indicator estimate at one ray: fit `log|f| = a r^rho + b` on unfiltered
/// samples in the top third of the radius range, then take the
/// 0.9-quantile of `(log|f| - b)/r^rho` as a dip-robust limsup proxy.
pub fn estimate_indicator(trace: &RayTrace, rho: f64) -> Result<f64, EstimateError> {
    if trace.samples.is_empty() {
        return Err(EstimateError::InsufficientData { need: 10 });
    }
    let r0 = trace.samples[0].r;
    let rmax = trace.samples.last().unwrap().r;
    let r_cut = r0 + (2.0 / 3.0) * (rmax - r0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (s, keep) in trace.unfiltered() {
        if keep && s.r >= r_cut && s.log_abs_f.is_finite() {
            xs.push(s.r.powf(rho));
            ys.push(s.log_abs_f);
        }
    }
    if xs.len() < 10 {
        return Err(EstimateError::InsufficientData { need: 10 });
    }
    let (_, b) = linear_fit(&xs, &ys);
    let mut vals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - b) / x)
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((vals.len() - 1) as f64 * 0.9).round() as usize;
    Ok(vals[idx])
}
