//! Machine-readable pipeline reports: a versioned JSON document with
//! every symbolic artifact, optional verification results, and an SVG
//! polar plot of measured indicators against predicted curves.
//!
//! Output is byte-deterministic for fixed input and version: floats are
//! printed at 12 significant digits, map keys are sorted (serde_json's
//! BTreeMap backend), and all arrays follow canonical orders.

use crate::asymptotics::{AnalyzedLeaf, Candidate, ExceptionalRay};
use crate::decomp::DecompNode;
use crate::exact::{rational_string, ExactComplex};
use crate::geometry::{FrequencyHull, Sector};
use crate::num::verify::VerificationReport;
use crate::pipeline::Analysis;
use crate::poly::Poly;
use serde_json::{json, Value};
use thiserror::Error;

pub const SCHEMA: &str = "crg-report/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no {0} section")]
    MissingSection(&'static str),
    #[error("malformed report: {0}")]
    Malformed(String),
}

/// 12-significant-digit float formatting used for every float in the
/// report (deterministic across runs).
pub fn fmt_f64(x: f64) -> String {
    format!("{:.11e}", x)
}

fn exact_pair(c: &ExactComplex) -> Value {
    json!([rational_string(&c.re), rational_string(&c.im)])
}

fn exact_quad(c: &ExactComplex) -> Value {
    json!([
        c.re.numer().to_string(),
        c.re.denom().to_string(),
        c.im.numer().to_string(),
        c.im.denom().to_string()
    ])
}

fn poly_pairs(p: &Poly) -> Value {
    Value::Array(p.coeffs().iter().map(exact_pair).collect())
}

fn sector_value(s: &Sector) -> Value {
    json!([fmt_f64(s.lo()), fmt_f64(s.hi())])
}

fn sector_set_value(set: &crate::geometry::SectorSet) -> Value {
    Value::Array(
        set.intervals()
            .iter()
            .map(|(a, b)| json!([fmt_f64(*a), fmt_f64(*b)]))
            .collect(),
    )
}

pub fn hull_value(hull: &FrequencyHull) -> Value {
    json!({
        "points": Value::Array(hull.points.iter().map(exact_quad).collect()),
        "vertices": Value::Array(hull.vertices.iter().map(exact_quad).collect()),
        "criticalAngles": Value::Array(
            crate::geometry::critical_rays(hull).iter().map(|a| Value::String(fmt_f64(*a))).collect()
        ),
        "normals": Value::Array(hull.critical_normals.iter().map(exact_quad).collect()),
    })
}

fn tree_value(node: &DecompNode) -> Value {
    let mut v = serde_json::Map::new();
    v.insert("path".into(), json!(node.path));
    v.insert("level".into(), json!(node.level));
    if let Some(q) = &node.q {
        v.insert("q".into(), exact_pair(q));
    }
    v.insert("isVertex".into(), json!(node.is_vertex));
    v.insert(
        "exponentDegree".into(),
        json!(node.equation.exponent_degree()),
    );
    v.insert("validity".into(), sector_set_value(&node.validity_z));
    if let Some(g) = &node.grouping {
        v.insert("groupingDegree".into(), json!(g.degree));
        v.insert("hull".into(), hull_value(&g.hull));
    }
    if !node.children.is_empty() {
        v.insert(
            "children".into(),
            Value::Array(node.children.iter().map(tree_value).collect()),
        );
    }
    Value::Object(v)
}

fn leaf_value(idx: usize, leaf: &AnalyzedLeaf) -> Value {
    json!({
        "index": idx,
        "path": leaf.de.path,
        "order": leaf.de.order,
        "coefficients": Value::Array(leaf.de.coefficients.iter().map(poly_pairs).collect()),
        "validity": sector_set_value(&leaf.de.validity),
        "branches": Value::Array(leaf.branches.iter().map(|b| json!({
            "puiseux": Value::Array(b.puiseux.iter().map(|(mu, a)| json!({
                "mu": rational_string(mu),
                "a": [fmt_f64(a.re), fmt_f64(a.im)],
            })).collect()),
            "p": b.p,
            "multiplicity": b.multiplicity,
            "logMarker": b.log_marker,
        })).collect()),
        "stokesRays": Value::Array(leaf.stokes.rays.iter().map(|r| json!({
            "angle": fmt_f64(r.angle),
            "pair": [r.pair.0, r.pair.1],
            "levelMu": r.level_mu,
        })).collect()),
    })
}

fn exceptional_value(r: &ExceptionalRay) -> Value {
    json!({
        "angle": fmt_f64(r.angle),
        "kind": match r.kind {
            crate::asymptotics::RayKind::Critical => "critical",
            crate::asymptotics::RayKind::LiftedCritical => "liftedCritical",
            crate::asymptotics::RayKind::Stokes => "stokes",
        },
        "coincident": r.coincident,
    })
}

fn candidates_value(cands: &[(Sector, Vec<Candidate>)]) -> Value {
    Value::Array(
        cands
            .iter()
            .map(|(s, items)| {
                json!({
                    "sector": sector_value(s),
                    "items": Value::Array(items.iter().map(|c| json!({
                        "rho": rational_string(&c.rho),
                        "a": [fmt_f64(c.a.re), fmt_f64(c.a.im)],
                        "leaf": c.leaf,
                        "branch": c.branch,
                    })).collect()),
                })
            })
            .collect(),
    )
}

pub fn verification_value(v: &VerificationReport) -> Value {
    json!({
        "rhoHat": fmt_f64(v.rho_hat),
        "rhoMatched": v.rho_matched,
        "maxError": fmt_f64(v.max_error),
        "branchCoherent": v.branch_coherent,
        "pass": v.pass,
        "meanFilteredFraction": fmt_f64(v.mean_filtered_fraction),
        "excludedZones": Value::Array(v.excluded_zones.iter().map(|z| json!({
            "sector": sector_value(&z.sector),
            "reason": z.reason,
        })).collect()),
        "perTheta": Value::Array(v.per_theta.iter().map(|p| {
            let mut row = serde_json::Map::new();
            row.insert("theta".into(), Value::String(fmt_f64(p.theta)));
            if let Some(h) = p.h_hat {
                row.insert("hHat".into(), Value::String(fmt_f64(h)));
            }
            if let Some((l, b)) = p.matched {
                row.insert("matched".into(), json!([l, b]));
            }
            if let Some(h) = p.predicted {
                row.insert("predicted".into(), Value::String(fmt_f64(h)));
            }
            if let Some(e) = p.abs_error {
                row.insert("absError".into(), Value::String(fmt_f64(e)));
            }
            if let Some(reason) = &p.excluded {
                row.insert("excluded".into(), Value::String(reason.clone()));
            }
            Value::Object(row)
        }).collect()),
    })
}

/// Assemble the full pipeline report.
pub fn pipeline_report(
    analysis: &Analysis,
    verification: Option<&VerificationReport>,
    timing_ms: &[(&str, f64)],
) -> Value {
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), json!(SCHEMA));
    doc.insert(
        "equation".into(),
        json!({
            "order": analysis.eq.order(),
            "coefficients": Value::Array(
                analysis.eq.coeffs().iter().map(|c| Value::String(c.to_string())).collect()
            ),
            "monic": analysis.eq.is_monic(),
        }),
    );
    doc.insert("epsilon".into(), json!(fmt_f64(analysis.epsilon)));
    if let Some(g) = &analysis.grouped {
        doc.insert(
            "normalForm".into(),
            json!({
                "s": g.s,
                "groups": Value::Array(g.groups.iter().map(|(q, eq)| json!({
                    "q": exact_pair(q),
                    "coefficients": Value::Array(
                        eq.coeffs().iter().map(|c| Value::String(c.to_string())).collect()
                    ),
                })).collect()),
            }),
        );
    }
    doc.insert(
        "exponentGroups".into(),
        Value::Array(
            analysis
                .exponent_groups
                .iter()
                .map(|(q, coeffs)| {
                    json!({
                        "exponent": q.to_string(),
                        "coefficients": Value::Array(
                            coeffs.iter().map(|c| Value::String(c.to_string())).collect()
                        ),
                    })
                })
                .collect(),
        ),
    );
    if let Some(tree) = &analysis.tree {
        doc.insert("tree".into(), tree_value(tree));
    }
    doc.insert(
        "leaves".into(),
        Value::Array(
            analysis
                .leaves
                .iter()
                .enumerate()
                .map(|(i, l)| leaf_value(i, l))
                .collect(),
        ),
    );
    doc.insert(
        "exceptionalRays".into(),
        Value::Array(analysis.exceptional.iter().map(exceptional_value).collect()),
    );
    doc.insert("candidates".into(), candidates_value(&analysis.candidates));
    if let Some(v) = verification {
        doc.insert("verification".into(), verification_value(v));
    }
    doc.insert(
        "timingMs".into(),
        Value::Object(
            timing_ms
                .iter()
                .map(|(k, v)| (k.to_string(), Value::String(fmt_f64(*v))))
                .collect(),
        ),
    );
    Value::Object(doc)
}

/// Trace CSV: `theta,r,log_abs_f,filtered` rows for every ray sample.
pub fn traces_csv(report: &VerificationReport) -> String {
    let mut out = String::from("theta,r,log_abs_f,filtered\n");
    for t in &report.traces {
        for (s, f) in t.samples.iter().zip(&t.filtered) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(t.theta),
                fmt_f64(s.r),
                fmt_f64(s.log_abs_f),
                if *f { 1 } else { 0 }
            ));
        }
    }
    out
}

fn get_str(v: &Value) -> Result<f64, ReportError> {
    match v {
        Value::String(s) => s
            .parse::<f64>()
            .map_err(|e| ReportError::Malformed(format!("bad float '{s}': {e}"))),
        Value::Number(n) => Ok(n.as_f64().unwrap_or(f64::NAN)),
        _ => Err(ReportError::Malformed("expected number".into())),
    }
}

/// Polar SVG of measured indicator points over predicted candidate
/// curves, excluded zones shaded. Reads the JSON report document so the
/// plot command can run on stored reports. Deterministic byte output for
/// a fixed report.
pub fn polar_svg(report: &Value) -> Result<String, ReportError> {
    let verification = report
        .get("verification")
        .ok_or(ReportError::MissingSection("verification"))?;
    let per_theta = verification
        .get("perTheta")
        .and_then(|v| v.as_array())
        .ok_or(ReportError::MissingSection("verification.perTheta"))?;
    if per_theta.is_empty() {
        return Err(ReportError::Malformed("empty theta grid".into()));
    }
    let candidates = report
        .get("candidates")
        .and_then(|v| v.as_array())
        .ok_or(ReportError::MissingSection("candidates"))?;
    let rho_matched = verification
        .get("rhoMatched")
        .and_then(|v| v.as_str())
        .ok_or(ReportError::MissingSection("verification.rhoMatched"))?;
    let rho = parse_rational(rho_matched)?;

    // Collect measured values and curve range.
    let mut measured: Vec<(f64, f64)> = Vec::new();
    for row in per_theta {
        let theta = get_str(row.get("theta").ok_or(ReportError::Malformed(
            "perTheta row without theta".into(),
        ))?)?;
        if let Some(h) = row.get("hHat") {
            measured.push((theta, get_str(h)?));
        }
    }
    let mut curves: Vec<(f64, f64, f64, f64)> = Vec::new(); // (lo, hi, |a|, arg a)
    for c in candidates {
        let sector = c
            .get("sector")
            .and_then(|v| v.as_array())
            .ok_or(ReportError::Malformed("candidate without sector".into()))?;
        let lo = get_str(&sector[0])?;
        let hi = get_str(&sector[1])?;
        for item in c
            .get("items")
            .and_then(|v| v.as_array())
            .unwrap_or(&Vec::new())
        {
            if item.get("rho").and_then(|v| v.as_str()) != Some(rho_matched) {
                continue;
            }
            let a = item
                .get("a")
                .and_then(|v| v.as_array())
                .ok_or(ReportError::Malformed("candidate without a".into()))?;
            let re = get_str(&a[0])?;
            let im = get_str(&a[1])?;
            curves.push((lo, hi, (re * re + im * im).sqrt(), im.atan2(re)));
        }
    }
    let mut hmax = 0.1f64;
    for (_, h) in &measured {
        hmax = hmax.max(h.abs());
    }
    for (_, _, m, _) in &curves {
        hmax = hmax.max(*m);
    }

    let size = 840.0;
    let cx = size / 2.0;
    let cy = size / 2.0;
    let r_unit = 330.0; // |h| = hmax maps to r_unit; h = 0 sits at r_unit/2 + offset
    let radius = |h: f64| -> f64 { (h / hmax + 1.0) * 0.5 * r_unit + 30.0 };
    let point = |theta: f64, h: f64| -> (f64, f64) {
        let r = radius(h);
        (cx + r * theta.cos(), cy - r * theta.sin())
    };
    let fmt3 = |x: f64| format!("{:.3}", x);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {s} {s}\" width=\"{s}\" height=\"{s}\">\n",
        s = size
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Excluded zones first (background shading).
    if let Some(zones) = verification.get("excludedZones").and_then(|v| v.as_array()) {
        for z in zones {
            let sector = z
                .get("sector")
                .and_then(|v| v.as_array())
                .ok_or(ReportError::Malformed("zone without sector".into()))?;
            let lo = get_str(&sector[0])?;
            let hi = get_str(&sector[1])?;
            let rr = radius(hmax);
            let (x0, y0) = (cx + rr * lo.cos(), cy - rr * lo.sin());
            let (x1, y1) = (cx + rr * hi.cos(), cy - rr * hi.sin());
            let large = if hi - lo > std::f64::consts::PI { 1 } else { 0 };
            svg.push_str(&format!(
                "<path d=\"M {cx} {cy} L {} {} A {rr} {rr} 0 {large} 0 {} {} Z\" fill=\"#f5d6d6\" stroke=\"none\"/>\n",
                fmt3(x0), fmt3(y0), fmt3(x1), fmt3(y1),
                cx = fmt3(cx), cy = fmt3(cy), rr = fmt3(rr), large = large
            ));
        }
    }

    // Reference circles: h = -hmax, 0, +hmax.
    for h in [-hmax, 0.0, hmax] {
        let rr = radius(h);
        let style = if h == 0.0 {
            "stroke=\"#888\" stroke-width=\"1.5\""
        } else {
            "stroke=\"#ccc\" stroke-width=\"1\""
        };
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" {}/>\n",
            fmt3(cx),
            fmt3(cy),
            fmt3(rr),
            style
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">indicator h(theta), rho = {} ; outer circle |h| = {:.4}</text>\n",
        10, rho_matched, hmax
    ));

    // Candidate curves.
    for (lo, hi, m, phase) in &curves {
        let samples = 120;
        let mut d = String::new();
        for k in 0..=samples {
            let th = lo + (hi - lo) * k as f64 / samples as f64;
            let h = m * (rho * th + phase).cos();
            let (x, y) = point(th, h);
            d.push_str(if k == 0 { "M " } else { "L " });
            d.push_str(&format!("{} {} ", fmt3(x), fmt3(y)));
        }
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"#2b6cb0\" stroke-width=\"1.6\"/>\n",
            d.trim_end()
        ));
    }

    // Measured points.
    for (theta, h) in &measured {
        let (x, y) = point(*theta, *h);
        svg.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"#c53030\"/>\n",
            fmt3(x),
            fmt3(y)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn parse_rational(s: &str) -> Result<f64, ReportError> {
    if let Some((n, d)) = s.split_once('/') {
        let n: f64 = n
            .parse()
            .map_err(|_| ReportError::Malformed(format!("bad rational {s}")))?;
        let d: f64 = d
            .parse()
            .map_err(|_| ReportError::Malformed(format!("bad rational {s}")))?;
        Ok(n / d)
    } else {
        s.parse()
            .map_err(|_| ReportError::Malformed(format!("bad rational {s}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::LinearODE;
    use crate::pipeline::analyze;

    #[test]
    fn report_is_deterministic() {
        let eq = LinearODE::parse(
            "f''' + 3*exp(z)*f'' + (-4/3 - 2*exp(z))*f' - (exp(z) - 16/27)*f = 0",
        )
        .unwrap();
        let a = analyze(&eq, Some(0.1), 12).unwrap();
        let r1 = pipeline_report(&a, None, &[("analyze", 1.0)]);
        let a2 = analyze(&eq, Some(0.1), 12).unwrap();
        let r2 = pipeline_report(&a2, None, &[("analyze", 1.0)]);
        assert_eq!(
            serde_json::to_string(&r1).unwrap(),
            serde_json::to_string(&r2).unwrap()
        );
        // Sections present.
        assert!(r1.get("normalForm").is_some());
        assert!(r1.get("tree").is_some());
        assert_eq!(r1["leaves"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn plot_requires_verification_section() {
        let eq = LinearODE::parse("f'' - f").unwrap();
        let a = analyze(&eq, None, 12).unwrap();
        let doc = pipeline_report(&a, None, &[]);
        assert!(matches!(
            polar_svg(&doc),
            Err(ReportError::MissingSection("verification"))
        ));
    }
}
