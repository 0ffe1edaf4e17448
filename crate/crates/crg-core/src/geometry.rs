//! Exact convex hulls of frequency sets, critical rays, sector systems,
//! parabolic strips, and root-map sector lifting.
//!
//! Hull orientation decisions are made with exact rational cross products;
//! radian angles are derived floats used only for sector bookkeeping.

use crate::exact::ExactComplex;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("empty point set")]
    EmptyInput,
    #[error("duplicate points in frequency set")]
    DuplicatePoints,
    #[error("hull is a single point; divide out the common exponential and recurse")]
    DegenerateHull,
    #[error("epsilon {eps} too large; must be below {max}")]
    EpsilonTooLarge { eps: f64, max: f64 },
    #[error("lambda equals omega; margin undefined")]
    CoincidentFrequencies,
}

/// Convex hull of a finite set of exact frequency points (the conjugated
/// leading coefficients W), with outer normals per side.
///
/// Collinear sets yield a degenerate 2-vertex hull whose segment is
/// traversed both ways, giving two sides with antipodal normals; the
/// sector analysis needs both outward directions.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyHull {
    pub points: Vec<ExactComplex>,
    /// Extreme points in counterclockwise order, starting at the
    /// canonically smallest vertex.
    pub vertices: Vec<ExactComplex>,
    /// Vertex index pairs (from, to), one per side.
    pub sides: Vec<(usize, usize)>,
    /// Unnormalized exact outer normal per side.
    pub critical_normals: Vec<ExactComplex>,
}

fn cross(o: &ExactComplex, a: &ExactComplex, b: &ExactComplex) -> BigRational {
    let ax = &a.re - &o.re;
    let ay = &a.im - &o.im;
    let bx = &b.re - &o.re;
    let by = &b.im - &o.im;
    &ax * &by - &ay * &bx
}

/// Outward normal of a CCW edge: rotate the edge vector by -90 degrees.
fn outward_normal(from: &ExactComplex, to: &ExactComplex) -> ExactComplex {
    ExactComplex::new(&to.im - &from.im, &from.re - &to.re)
}

pub fn convex_hull(points: &[ExactComplex]) -> Result<FrequencyHull, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let mut sorted: Vec<ExactComplex> = points.to_vec();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(GeometryError::DuplicatePoints);
        }
    }
    if sorted.len() == 1 {
        return Ok(FrequencyHull {
            points: points.to_vec(),
            vertices: sorted,
            sides: Vec::new(),
            critical_normals: Vec::new(),
        });
    }
    // Collinear check against the first two distinct points.
    let collinear = sorted[2..]
        .iter()
        .all(|p| cross(&sorted[0], &sorted[1], p).is_zero());
    if collinear {
        let a = sorted.first().unwrap().clone();
        let b = sorted.last().unwrap().clone();
        let normals = vec![outward_normal(&a, &b), outward_normal(&b, &a)];
        return Ok(FrequencyHull {
            points: points.to_vec(),
            vertices: vec![a, b],
            sides: vec![(0, 1), (1, 0)],
            critical_normals: normals,
        });
    }
    // Monotone chain with strict turns so on-edge points are excluded.
    let mut lower: Vec<ExactComplex> = Vec::new();
    for p in &sorted {
        while lower.len() >= 2
            && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive()
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<ExactComplex> = Vec::new();
    for p in sorted.iter().rev() {
        while upper.len() >= 2
            && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive()
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let vertices = lower;
    let m = vertices.len();
    let sides: Vec<(usize, usize)> = (0..m).map(|j| (j, (j + 1) % m)).collect();
    let critical_normals = sides
        .iter()
        .map(|&(a, b)| outward_normal(&vertices[a], &vertices[b]))
        .collect();
    Ok(FrequencyHull {
        points: points.to_vec(),
        vertices,
        sides,
        critical_normals,
    })
}

impl FrequencyHull {
    /// Exact test: does the point lie weakly inside the half-plane of
    /// every side? (Always true for members of the hull's point set.)
    pub fn contains_weak(&self, p: &ExactComplex) -> bool {
        self.sides.iter().all(|&(a, b)| {
            !cross(&self.vertices[a], &self.vertices[b], p).is_negative()
        })
    }

    /// Side normal angles in [0, 2pi), one per side, order matching
    /// `sides`.
    pub fn normal_angles(&self) -> Vec<f64> {
        self.critical_normals
            .iter()
            .map(|n| {
                let c = n.to_f64();
                normalize_angle(c.im.atan2(c.re))
            })
            .collect()
    }

    pub fn is_vertex(&self, p: &ExactComplex) -> bool {
        self.vertices.iter().any(|v| v == p)
    }
}

/// Critical ray directions: outer normal angles, sorted ascending in
/// [0, 2pi). Point hulls have none.
pub fn critical_rays(hull: &FrequencyHull) -> Vec<f64> {
    let mut angles = hull.normal_angles();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Closed arc on the circle. `lo` is normalized into [0, 2pi); the arc
/// runs counterclockwise for `width` <= 2pi, so `hi() = lo + width` may
/// exceed 2pi for wrapped arcs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    lo: f64,
    width: f64,
}

impl Sector {
    pub fn new(lo: f64, hi: f64) -> Sector {
        let width = hi - lo;
        assert!(width > 0.0, "sector must have positive width");
        if width >= TAU {
            return Sector::full();
        }
        Sector {
            lo: normalize_angle(lo),
            width,
        }
    }

    pub fn full() -> Sector {
        Sector { lo: 0.0, width: TAU }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn is_full(&self) -> bool {
        self.width >= TAU - 1e-15
    }

    pub fn midpoint(&self) -> f64 {
        normalize_angle(self.lo + self.width / 2.0)
    }

    /// Closed membership with a small float guard on the boundary.
    pub fn contains(&self, theta: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let d = normalize_angle(theta - self.lo);
        d <= self.width + 1e-12 || d >= TAU - 1e-12
    }

    /// Open-interior membership with margin `delta`.
    pub fn contains_interior(&self, theta: f64, delta: f64) -> bool {
        if self.is_full() {
            return true;
        }
        let d = normalize_angle(theta - self.lo);
        d >= delta && d <= self.width - delta
    }

    /// Shrink by `eps` on both ends; `None` when nothing is left. The
    /// full circle has no boundary and shrinks to itself.
    pub fn shrink(&self, eps: f64) -> Option<Sector> {
        if self.is_full() {
            return Some(*self);
        }
        let w = self.width - 2.0 * eps;
        if w <= 1e-12 {
            None
        } else {
            Some(Sector {
                lo: normalize_angle(self.lo + eps),
                width: w,
            })
        }
    }

    /// The `m` preimage arcs of this sector under `z -> z^m`: branch `i`
    /// is `[(lo + 2 pi i)/m, (hi + 2 pi i)/m]`.
    pub fn lift(&self, m: u32) -> Vec<Sector> {
        assert!(m >= 1);
        if m == 1 {
            return vec![*self];
        }
        (0..m)
            .map(|i| {
                let shift = TAU * i as f64;
                Sector::new((self.lo + shift) / m as f64, (self.hi() + shift) / m as f64)
            })
            .collect()
    }
}

/// See [`Sector::lift`]; free-function form used by the decomposition.
pub fn lift_sectors(sector: &Sector, m: u32) -> Vec<Sector> {
    sector.lift(m)
}

/// Disjoint union of angular intervals, stored as sorted linear pieces
/// inside [0, 2pi] (wrapped arcs are split at 0).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SectorSet {
    pieces: Vec<(f64, f64)>,
}

impl SectorSet {
    pub fn empty() -> SectorSet {
        SectorSet { pieces: Vec::new() }
    }

    pub fn full() -> SectorSet {
        SectorSet {
            pieces: vec![(0.0, TAU)],
        }
    }

    pub fn from_sector(s: &Sector) -> SectorSet {
        if s.is_full() {
            return SectorSet::full();
        }
        let lo = s.lo();
        let hi = s.hi();
        let mut pieces = Vec::new();
        if hi <= TAU {
            pieces.push((lo, hi));
        } else {
            pieces.push((lo, TAU));
            pieces.push((0.0, hi - TAU));
        }
        let mut out = SectorSet { pieces };
        out.normalize();
        out
    }

    pub fn from_sectors(sectors: &[Sector]) -> SectorSet {
        let mut acc = SectorSet::empty();
        for s in sectors {
            acc = acc.union(&SectorSet::from_sector(s));
        }
        acc
    }

    fn normalize(&mut self) {
        self.pieces
            .retain(|(a, b)| b - a > 1e-13);
        self.pieces
            .sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in &self.pieces {
            match merged.last_mut() {
                Some(last) if a <= last.1 + 1e-13 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        self.pieces = merged;
    }

    pub fn union(&self, other: &SectorSet) -> SectorSet {
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        let mut out = SectorSet { pieces };
        out.normalize();
        out
    }

    pub fn intersect(&self, other: &SectorSet) -> SectorSet {
        let mut pieces = Vec::new();
        for &(a1, b1) in &self.pieces {
            for &(a2, b2) in &other.pieces {
                let lo = a1.max(a2);
                let hi = b1.min(b2);
                if hi - lo > 1e-13 {
                    pieces.push((lo, hi));
                }
            }
        }
        let mut out = SectorSet { pieces };
        out.normalize();
        out
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = normalize_angle(theta);
        self.pieces
            .iter()
            .any(|&(a, b)| t >= a - 1e-12 && t <= b + 1e-12)
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    /// Interior sample angles, one per piece (used by residual checks).
    pub fn sample_angles(&self, per_piece: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for &(a, b) in &self.pieces {
            for k in 0..per_piece {
                out.push(a + (b - a) * (k as f64 + 0.5) / per_piece as f64);
            }
        }
        out
    }
}

/// Dominance sectors S_j(eps) per hull vertex and critical strips
/// T_j(eps) per critical ray.
#[derive(Debug, Clone)]
pub struct SectorSystem {
    pub epsilon: f64,
    /// (vertex, sector): the vertex's exponential dominates strictly
    /// inside its sector.
    pub dominance_sectors: Vec<(ExactComplex, Sector)>,
    /// (critical angle, strip of half-width eps around it).
    pub critical_strips: Vec<(f64, Sector)>,
}

/// Largest admissible epsilon: half the minimum gap between consecutive
/// critical rays.
pub fn max_epsilon(hull: &FrequencyHull) -> f64 {
    let rays = critical_rays(hull);
    if rays.len() < 2 {
        return f64::INFINITY;
    }
    let mut min_gap = f64::INFINITY;
    for k in 0..rays.len() {
        let next = if k + 1 == rays.len() {
            rays[0] + TAU
        } else {
            rays[k + 1]
        };
        min_gap = min_gap.min(next - rays[k]);
    }
    min_gap / 2.0
}

/// The paper only requires "small enough" epsilon; this default keeps
/// every sector nonempty.
pub fn default_epsilon(hull: &FrequencyHull) -> f64 {
    let rays = critical_rays(hull);
    if rays.len() < 2 {
        return 0.1;
    }
    (max_epsilon(hull) / 2.0).min(0.1)
}

pub fn sector_system(hull: &FrequencyHull, epsilon: f64) -> Result<SectorSystem, GeometryError> {
    if hull.vertices.len() < 2 {
        return Err(GeometryError::DegenerateHull);
    }
    let max_eps = max_epsilon(hull);
    if epsilon <= 0.0 || epsilon >= max_eps {
        return Err(GeometryError::EpsilonTooLarge {
            eps: epsilon,
            max: max_eps,
        });
    }
    let angles = hull.normal_angles();
    let m = hull.vertices.len();
    let mut dominance_sectors = Vec::with_capacity(m);
    for j in 0..m {
        // Vertex j sits between incoming side j-1 and outgoing side j;
        // its normal cone runs CCW from eta_{j-1} to eta_j.
        let eta_in = angles[(j + m - 1) % m];
        let eta_out = angles[j];
        let mut hi = eta_out;
        if hi <= eta_in + 1e-15 {
            hi += TAU;
        }
        let cone = Sector::new(eta_in, hi);
        let shrunk = cone
            .shrink(epsilon)
            .expect("epsilon below the half-gap keeps sectors nonempty");
        dominance_sectors.push((hull.vertices[j].clone(), shrunk));
    }
    let mut critical_strips: Vec<(f64, Sector)> = angles
        .iter()
        .map(|&eta| (eta, Sector::new(eta - epsilon, eta + epsilon)))
        .collect();
    critical_strips.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(SectorSystem {
        epsilon,
        dominance_sectors,
        critical_strips,
    })
}

impl SectorSystem {
    pub fn dominance_sector_of(&self, vertex: &ExactComplex) -> Option<&Sector> {
        self.dominance_sectors
            .iter()
            .find(|(v, _)| v == vertex)
            .map(|(_, s)| s)
    }

    /// Union of all critical strips (the excluded directions).
    pub fn strips_set(&self) -> SectorSet {
        SectorSet::from_sectors(
            &self
                .critical_strips
                .iter()
                .map(|(_, s)| *s)
                .collect::<Vec<_>>(),
        )
    }
}

/// Signed dominance margin of Lemma 3.1:
/// `Re((omega - lambda) z) - |z| |omega - lambda| |sin eps|`, nonnegative
/// whenever z lies in omega's dominance sector at aperture eps.
pub fn dominance_margin(
    lambda: &ExactComplex,
    omega: &ExactComplex,
    z: num_complex::Complex64,
    epsilon: f64,
) -> Result<f64, GeometryError> {
    if lambda == omega {
        return Err(GeometryError::CoincidentFrequencies);
    }
    let d = (omega - lambda).to_f64();
    let re = (d * z).re;
    Ok(re - z.norm() * d.norm() * epsilon.sin().abs())
}

/// Rotated parabolic region `|Im(z e^{-i axis})| < |z|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolicStrip {
    pub axis: f64,
    pub aperture: f64,
}

impl ParabolicStrip {
    pub fn new(axis: f64, aperture: f64) -> ParabolicStrip {
        assert!((0.0..1.0).contains(&aperture), "aperture must be in [0,1)");
        ParabolicStrip {
            axis: normalize_angle(axis),
            aperture,
        }
    }
}

pub fn strip_contains(strip: &ParabolicStrip, z: num_complex::Complex64) -> bool {
    let rotated = z * num_complex::Complex64::from_polar(1.0, -strip.axis);
    rotated.im.abs() < z.norm().powf(strip.aperture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pt(re_n: i64, re_d: i64, im_n: i64, im_d: i64) -> ExactComplex {
        ExactComplex::from_parts(re_n, re_d, im_n, im_d)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn segment_hull_zero_one() {
        let hull = convex_hull(&[pt(0, 1, 0, 1), pt(1, 1, 0, 1)]).unwrap();
        assert_eq!(hull.vertices.len(), 2);
        assert_eq!(hull.sides.len(), 2);
        let rays = critical_rays(&hull);
        assert!(close(rays[0], FRAC_PI_2) && close(rays[1], 3.0 * FRAC_PI_2));
    }

    #[test]
    fn single_point_hull() {
        let hull = convex_hull(&[pt(2, 3, -1, 2)]).unwrap();
        assert_eq!(hull.vertices.len(), 1);
        assert!(hull.sides.is_empty());
        assert!(critical_rays(&hull).is_empty());
    }

    #[test]
    fn collinear_with_interior_point() {
        // {-i, 0, i}: vertices are the endpoints, 0 lies on the edge;
        // critical rays at 0 and pi.
        let hull = convex_hull(&[pt(0, 1, -1, 1), pt(0, 1, 0, 1), pt(0, 1, 1, 1)]).unwrap();
        assert_eq!(hull.vertices.len(), 2);
        assert!(!hull.is_vertex(&pt(0, 1, 0, 1)));
        let rays = critical_rays(&hull);
        assert!(close(rays[0], 0.0) && close(rays[1], PI));
        // Brute force: the maximizer of <w, u(theta)> switches exactly at
        // theta in {0, pi}.
        let mut switches = Vec::new();
        let pts: Vec<_> = hull.points.iter().map(|p| p.to_f64()).collect();
        let argmax = |theta: f64| -> usize {
            let u = num_complex::Complex64::from_polar(1.0, theta);
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (k, p) in pts.iter().enumerate() {
                let v = p.re * u.re + p.im * u.im;
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            best
        };
        let n = 360;
        for k in 0..n {
            let t0 = TAU * (k as f64 + 0.5) / n as f64;
            let t1 = TAU * (k as f64 + 1.5) / n as f64;
            if argmax(t0) != argmax(t1) {
                switches.push(TAU * ((k + 1) as f64) / n as f64);
            }
        }
        assert_eq!(switches.len(), 2);
        for s in switches {
            let near = rays.iter().any(|r| {
                let d = normalize_angle(s - r);
                d.min(TAU - d) <= TAU / n as f64
            });
            assert!(near);
        }
    }

    #[test]
    fn square_hull_rays() {
        let hull = convex_hull(&[
            pt(0, 1, 0, 1),
            pt(1, 1, 0, 1),
            pt(0, 1, 1, 1),
            pt(1, 1, 1, 1),
        ])
        .unwrap();
        assert_eq!(hull.vertices.len(), 4);
        let rays = critical_rays(&hull);
        let expect = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
        for (r, e) in rays.iter().zip(expect) {
            assert!(close(*r, e));
        }
    }

    #[test]
    fn hull_of_minus_i_and_zero() {
        let hull = convex_hull(&[pt(0, 1, -1, 1), pt(0, 1, 0, 1)]).unwrap();
        let rays = critical_rays(&hull);
        assert!(close(rays[0], 0.0) && close(rays[1], PI));
    }

    #[test]
    fn sector_system_for_segment() {
        let hull = convex_hull(&[pt(0, 1, 0, 1), pt(1, 1, 0, 1)]).unwrap();
        let sys = sector_system(&hull, 0.1).unwrap();
        let s0 = sys.dominance_sector_of(&pt(0, 1, 0, 1)).unwrap();
        assert!(close(s0.lo(), FRAC_PI_2 + 0.1));
        assert!(close(s0.hi(), 3.0 * FRAC_PI_2 - 0.1));
        let s1 = sys.dominance_sector_of(&pt(1, 1, 0, 1)).unwrap();
        assert!(close(s1.lo(), 3.0 * FRAC_PI_2 + 0.1));
        assert!(close(s1.width(), PI - 0.2));
        assert_eq!(sys.critical_strips.len(), 2);
    }

    #[test]
    fn sector_system_square_widths() {
        let hull = convex_hull(&[
            pt(0, 1, 0, 1),
            pt(1, 1, 0, 1),
            pt(0, 1, 1, 1),
            pt(1, 1, 1, 1),
        ])
        .unwrap();
        let sys = sector_system(&hull, 0.2).unwrap();
        for (_, s) in &sys.dominance_sectors {
            assert!(close(s.width(), FRAC_PI_2 - 0.4));
        }
    }

    #[test]
    fn sector_system_rejects_bad_inputs() {
        let hull = convex_hull(&[pt(0, 1, 0, 1)]).unwrap();
        assert_eq!(
            sector_system(&hull, 0.1).unwrap_err(),
            GeometryError::DegenerateHull
        );
        let hull = convex_hull(&[pt(0, 1, 0, 1), pt(1, 1, 0, 1)]).unwrap();
        assert!(matches!(
            sector_system(&hull, 2.0),
            Err(GeometryError::EpsilonTooLarge { .. })
        ));
    }

    #[test]
    fn margin_examples() {
        let l = pt(0, 1, 0, 1);
        let w = pt(1, 1, 0, 1);
        let eps = 0.1;
        let z = num_complex::Complex64::from_polar(10.0, FRAC_PI_2 - eps);
        let m = dominance_margin(&l, &w, z, eps).unwrap();
        assert!(m.abs() < 1e-12);
        let m = dominance_margin(&l, &w, num_complex::Complex64::new(10.0, 0.0), eps).unwrap();
        assert!((m - (10.0 - 10.0 * eps.sin())).abs() < 1e-12);
        let m = dominance_margin(&l, &w, num_complex::Complex64::new(-10.0, 0.0), eps).unwrap();
        assert!(m < 0.0);
        assert!(dominance_margin(&l, &l, z, eps).is_err());
    }

    #[test]
    fn lift_branches() {
        let eps = 0.3;
        let s = Sector::new(FRAC_PI_2 - eps, FRAC_PI_2 + eps);
        let br = s.lift(2);
        assert_eq!(br.len(), 2);
        assert!(close(br[0].lo(), FRAC_PI_2 / 2.0 - eps / 2.0));
        assert!(close(br[1].lo(), FRAC_PI_2 / 2.0 + PI - eps / 2.0));
        // Squaring maps samples of each branch back into the source.
        for b in &br {
            for k in 0..100 {
                let t = b.lo() + b.width() * (k as f64 + 0.5) / 100.0;
                assert!(s.contains(normalize_angle(2.0 * t)));
            }
        }
        // m = 1 is the identity.
        assert_eq!(s.lift(1), vec![s]);
        // Full circle splits into thirds.
        let thirds = Sector::full().lift(3);
        assert_eq!(thirds.len(), 3);
        let total: f64 = thirds.iter().map(|b| b.width()).sum();
        assert!(close(total, TAU));
    }

    #[test]
    fn parabolic_strip_membership() {
        let s = ParabolicStrip::new(0.0, 0.5);
        assert!(strip_contains(&s, num_complex::Complex64::new(100.0, 5.0)));
        assert!(!strip_contains(&s, num_complex::Complex64::new(100.0, 15.0)));
        let rot = ParabolicStrip::new(FRAC_PI_2, 0.5);
        assert!(strip_contains(&rot, num_complex::Complex64::new(5.0, 100.0)));
    }

    #[test]
    fn sector_sets_cover_circle() {
        let hull = convex_hull(&[pt(0, 1, 0, 1), pt(1, 1, 0, 1)]).unwrap();
        let sys = sector_system(&hull, 0.1).unwrap();
        let mut acc = sys.strips_set();
        for (_, s) in &sys.dominance_sectors {
            acc = acc.union(&SectorSet::from_sector(s));
        }
        assert!((acc.measure() - TAU).abs() < 1e-9);
    }

    #[test]
    fn sector_set_operations() {
        let a = SectorSet::from_sector(&Sector::new(6.0, 6.8)); // wraps
        assert_eq!(a.intervals().len(), 2);
        let b = SectorSet::from_sector(&Sector::new(0.1, 1.0));
        let i = a.intersect(&b);
        assert!((i.measure() - (6.8 - TAU - 0.1)).abs() < 1e-12);
        assert!(a.contains(6.2) && a.contains(0.3) && !a.contains(2.0));
    }
}
