//! Wall-time probe for representative rays (dev tool; run with
//! `--ignored --nocapture`).

use crg_core::decomp::LinearODE;
use crg_core::num::dd::Dd;
use crg_core::num::integrate::{closed_form_init, integrate_ray_t, IntegratorConfig};
use crg_core::num::scalar::Cplx;
use crg_core::parser::parse_exppoly;
use std::f64::consts::TAU;
use std::io::Write;

#[test]
#[ignore]
fn per_ray_timing_sqrt_growth() {
    let eq = LinearODE::parse(
        "4*z*exp(i*z)*f''' + (6*exp(i*z) + 4*i*z*exp(i*z) - z)*f'' \
         + ((2*i - 1)*exp(i*z) - 1/2)*f' - (i*exp(i*z) - 1/4)*f = 0",
    )
    .unwrap();
    let config = IntegratorConfig {
        rmax: 30.0,
        ..Default::default()
    };
    for k in 0..18 {
        let theta = TAU * k as f64 / 18.0;
        let z0 = Cplx::<Dd>::from_polar(Dd::from_f64(1.0), Dd::from_f64(theta));
        let w = z0.sqrt();
        let half = Dd::from_f64(0.5);
        let (ew, emw) = (w.exp(), (-w).exp());
        let cosh = (ew + emw).scale(half);
        let sinh = (ew - emw).scale(half);
        let wi = w.inv();
        let f1 = sinh * wi.scale(half);
        let q = Dd::from_f64(0.25);
        let f2 = (cosh * wi * wi).scale(q) - (sinh * wi * wi * wi).scale(q);
        let init = vec![cosh, f1, f2];
        let t0 = std::time::Instant::now();
        let tr = integrate_ray_t(&eq, theta, &init, &config).unwrap();
        println!(
            "sqrt theta {:6.3}: {:9.2?} samples {} diag {:?}",
            theta,
            t0.elapsed(),
            tr.samples.len(),
            tr.diagnostic
        );
        std::io::stdout().flush().unwrap();
    }
}

#[test]
#[ignore]
fn per_ray_timing_exp_sum() {
    let eq = LinearODE::parse(
        "f''' + 3*exp(z)*f'' + (-4/3 - 2*exp(z))*f' - (exp(z) - 16/27)*f = 0",
    )
    .unwrap();
    let sol = parse_exppoly("exp(-4/3*z)*(1 - 7*exp(z))").unwrap();
    let config = IntegratorConfig {
        rmax: 30.0,
        rel_tol: 1e-18,
        ..Default::default()
    };
    for k in 0..18 {
        let theta = TAU * k as f64 / 18.0;
        let z0 = Cplx::<Dd>::from_polar(Dd::from_f64(1.0), Dd::from_f64(theta));
        let init = closed_form_init::<Dd>(&sol, z0, 3).unwrap();
        let t0 = std::time::Instant::now();
        let tr = integrate_ray_t(&eq, theta, &init, &config).unwrap();
        println!(
            "expsum theta {:6.3}: {:9.2?} samples {} diag {:?}",
            theta,
            t0.elapsed(),
            tr.samples.len(),
            tr.diagnostic
        );
        std::io::stdout().flush().unwrap();
    }
}
