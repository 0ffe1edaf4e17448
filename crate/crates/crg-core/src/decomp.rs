//! Normal-form grouping of the ODE by top-degree exponent coefficients,
//! the recursive coefficient-equation tree, and extraction of fundamental
//! (polynomial-coefficient) equations tagged with their sectors of
//! validity.

use crate::exact::ExactComplex;
use crate::exppoly::{EvalResult, ExpPoly};
use crate::geometry::{
    self, FrequencyHull, GeometryError, SectorSet, SectorSystem,
};
use crate::num::scalar::Cplx;
use crate::poly::Poly;
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("equation has no coefficients")]
    EmptyEquation,
    #[error("leading coefficient is identically zero")]
    ZeroLeadingCoefficient,
    #[error("all coefficients are polynomials; the equation is already fundamental")]
    AlreadyFundamental,
    #[error("grouping depth exceeded the exponent degree; grouping fault")]
    DepthExceeded,
    #[error("missing derivative order {0} in sample vector")]
    MissingDerivative(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Linear ODE `sum_m A_m(z) f^(m)(z) = 0` with exponential polynomial
/// coefficients; index `m` holds the coefficient of `f^(m)`.
///
/// The leading coefficient must be nonzero but need not be 1: the worked
/// systems include non-monic equations, and the numeric layer only needs
/// the leading coefficient to be nonvanishing along its integration rays.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearODE {
    coeffs: Vec<ExpPoly>,
}

impl LinearODE {
    pub fn new(coeffs: Vec<ExpPoly>) -> Result<LinearODE, DecompError> {
        let mut coeffs = coeffs;
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        if coeffs.len() < 2 {
            return Err(DecompError::EmptyEquation);
        }
        Ok(LinearODE { coeffs })
    }

    pub fn parse(text: &str) -> Result<LinearODE, crate::parser::ParseError> {
        let coeffs = crate::parser::parse_ode_coeffs(text)?;
        LinearODE::new(coeffs).map_err(|e| crate::parser::ParseError {
            pos: 0,
            msg: e.to_string(),
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[ExpPoly] {
        &self.coeffs
    }

    pub fn coeff(&self, m: usize) -> &ExpPoly {
        &self.coeffs[m]
    }

    pub fn leading(&self) -> &ExpPoly {
        self.coeffs.last().unwrap()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == &ExpPoly::one()
    }

    /// Max exponent degree over all coefficients; 0 means fundamental.
    pub fn exponent_degree(&self) -> usize {
        self.coeffs
            .iter()
            .map(|c| c.exponent_degree())
            .max()
            .unwrap_or(0)
    }

    pub fn is_fundamental(&self) -> bool {
        self.exponent_degree() == 0
    }

    /// All coefficients as plain polynomials, when fundamental.
    pub fn polynomial_coeffs(&self) -> Option<Vec<Poly>> {
        self.coeffs.iter().map(|c| c.as_poly()).collect()
    }

    /// Divide every coefficient by `exp(q)` (exact).
    pub fn div_exp(&self, q: &Poly) -> LinearODE {
        LinearODE {
            coeffs: self.coeffs.iter().map(|c| c.div_exp(q)).collect(),
        }
    }

    /// Evaluate `sum_m A_m(z) f^(m)(z)` from supplied derivative samples.
    /// Terms are combined under a shared exponential scale so coefficient
    /// overflow cannot corrupt the result.
    pub fn apply(
        &self,
        z: Complex64,
        samples: &[(usize, Complex64)],
    ) -> Result<EvalResult<f64>, DecompError> {
        let n = self.order();
        let mut f = vec![None; n + 1];
        for (k, v) in samples {
            if *k <= n {
                f[*k] = Some(*v);
            }
        }
        let mut terms = Vec::with_capacity(n + 1);
        for m in 0..=n {
            if self.coeffs[m].is_zero() {
                continue;
            }
            let fv = f[m].ok_or(DecompError::MissingDerivative(m))?;
            let a = self.coeffs[m].eval_f64(z);
            terms.push((a.value * Cplx::new(fv.re, fv.im), a.log_scale));
        }
        if terms.is_empty() {
            return Ok(EvalResult {
                value: Cplx::zero(),
                log_scale: 0.0,
            });
        }
        let max_scale = terms
            .iter()
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = Cplx::zero();
        for (v, s) in terms {
            sum = sum + v.scale((s - max_scale).exp());
        }
        Ok(EvalResult {
            value: sum,
            log_scale: max_scale,
        })
    }

    /// Relative residual `|sum_m A_m f^(m)| / max_m |A_m f^(m)|`.
    pub fn relative_residual(
        &self,
        z: Complex64,
        samples: &[(usize, Complex64)],
    ) -> Result<f64, DecompError> {
        let n = self.order();
        let mut f = vec![None; n + 1];
        for (k, v) in samples {
            if *k <= n {
                f[*k] = Some(*v);
            }
        }
        let mut log_terms = Vec::new();
        for m in 0..=n {
            if self.coeffs[m].is_zero() {
                continue;
            }
            let fv = f[m].ok_or(DecompError::MissingDerivative(m))?;
            let a = self.coeffs[m].eval_f64(z);
            let t = a.log_abs() + fv.norm().max(1e-300).ln();
            log_terms.push(t);
        }
        let max_log = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total = self.apply(z, samples)?;
        Ok((total.log_abs() - max_log).exp())
    }
}

/// The equation regrouped as `sum_q exp(q z^s) * (per-q sub-equation)`.
#[derive(Debug, Clone)]
pub struct GroupedODE {
    pub s: usize,
    pub groups: Vec<(ExactComplex, LinearODE)>,
}

impl GroupedODE {
    pub fn group_of(&self, q: &ExactComplex) -> Option<&LinearODE> {
        self.groups.iter().find(|(k, _)| k == q).map(|(_, e)| e)
    }
}

/// Group by the coefficient of `z^s` in each exponent, `s` being the
/// equation-wide max exponent degree. Rejects already-fundamental input.
pub fn group(eq: &LinearODE) -> Result<GroupedODE, DecompError> {
    let s = eq.exponent_degree();
    if s == 0 {
        return Err(DecompError::AlreadyFundamental);
    }
    group_at(eq, s)
}

fn group_at(eq: &LinearODE, s: usize) -> Result<GroupedODE, DecompError> {
    let n = eq.order();
    let mut buckets: BTreeMap<ExactComplex, Vec<ExpPoly>> = BTreeMap::new();
    for m in 0..=n {
        let norm = eq.coeff(m).normalize_at(s);
        for (q, g) in norm.groups {
            buckets
                .entry(q)
                .or_insert_with(|| vec![ExpPoly::zero(); n + 1])[m] = g;
        }
    }
    let groups = buckets
        .into_iter()
        .filter_map(|(q, coeffs)| LinearODE::new(coeffs).ok().map(|e| (q, e)))
        .collect::<Vec<_>>();
    if groups.is_empty() {
        return Err(DecompError::EmptyEquation);
    }
    Ok(GroupedODE { s, groups })
}

/// Flatten the equation into per-exponent polynomial-coefficient pieces:
/// one entry per distinct full exponent polynomial Q. This is the printed
/// multi-group normal form (each piece's coefficients are plain
/// polynomials).
pub fn group_by_exponent(eq: &LinearODE) -> Vec<(Poly, Vec<Poly>)> {
    let n = eq.order();
    let mut buckets: Vec<(Poly, Vec<Poly>)> = Vec::new();
    for m in 0..=n {
        for t in eq.coeff(m).terms() {
            match buckets
                .iter_mut()
                .find(|(q, _)| q == &t.exponent)
            {
                Some((_, coeffs)) => coeffs[m] = coeffs[m].add(&t.mantissa),
                None => {
                    let mut coeffs = vec![Poly::zero(); n + 1];
                    coeffs[m] = t.mantissa.clone();
                    buckets.push((t.exponent.clone(), coeffs));
                }
            }
        }
    }
    buckets.sort_by(|(a, _), (b, _)| a.canon_cmp(b));
    buckets
}

/// Hull plus sector data of one grouping step (performed at a node).
#[derive(Debug, Clone)]
pub struct NodeGrouping {
    /// Grouping degree at this level (`s + 1 - t`); dominance of
    /// `exp(q z^degree)` plays in the `w = z^degree` plane, so it is also
    /// the sector lift divisor.
    pub degree: usize,
    pub hull: FrequencyHull,
    /// `None` for trivial levels (single group; the common exponential is
    /// divided out and no sector split happens).
    pub sectors: Option<SectorSystem>,
}

/// One node of the recursive decomposition (Figure-2 style) tree.
#[derive(Debug, Clone)]
pub struct DecompNode {
    /// Group indices from the root (empty at the root).
    pub path: Vec<usize>,
    /// Level t; the root is 0, its group children 1, and so on.
    pub level: usize,
    /// Group key that created this node; `None` at the root.
    pub q: Option<ExactComplex>,
    /// Whether the conjugated key is a vertex of the parent hull. Only
    /// vertex chains contribute verification sectors; non-vertex groups
    /// live inside the excluded critical strips.
    pub is_vertex: bool,
    pub equation: LinearODE,
    /// Region of this node in its grouping plane `w = z^degree`.
    pub validity_w: SectorSet,
    /// The same region lifted to the z-plane (root-map preimages).
    pub validity_z: SectorSet,
    pub grouping: Option<NodeGrouping>,
    pub children: Vec<DecompNode>,
}

impl DecompNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn walk<'a>(&'a self, out: &mut Vec<&'a DecompNode>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }

    pub fn leaf_nodes(&self) -> Vec<&DecompNode> {
        let mut all = Vec::new();
        self.walk(&mut all);
        all.into_iter().filter(|n| n.is_leaf()).collect()
    }

    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.depth())
            .max()
            .map(|d| d + 1)
            .unwrap_or(0)
    }
}

/// Polynomial-coefficient equation reached at a leaf, with the
/// path-accumulated sector of validity in the z-plane.
#[derive(Debug, Clone)]
pub struct FundamentalDE {
    pub order: usize,
    pub coefficients: Vec<Poly>,
    pub path: Vec<usize>,
    pub validity: SectorSet,
}

impl FundamentalDE {
    pub fn new(coefficients: Vec<Poly>, path: Vec<usize>, validity: SectorSet) -> FundamentalDE {
        let mut coefficients = coefficients;
        while coefficients.last().map_or(false, |c| c.is_zero()) {
            coefficients.pop();
        }
        assert!(!coefficients.is_empty(), "zero equation");
        FundamentalDE {
            order: coefficients.len() - 1,
            coefficients,
            path,
            validity,
        }
    }

    pub fn from_ode(eq: &LinearODE) -> Option<FundamentalDE> {
        let coeffs = eq.polynomial_coeffs()?;
        Some(FundamentalDE::new(coeffs, Vec::new(), SectorSet::full()))
    }

    pub fn leading(&self) -> &Poly {
        self.coefficients.last().unwrap()
    }
}

/// Smallest per-level epsilon bound over the whole recursion, quartered
/// and capped at 0.1; a single global epsilon must be admissible at every
/// level's hull.
pub fn suggest_epsilon(eq: &LinearODE) -> Result<f64, DecompError> {
    fn walk(eq: &LinearODE, degree: usize, acc: &mut f64) -> Result<(), DecompError> {
        if eq.exponent_degree() == 0 || degree == 0 {
            return Ok(());
        }
        let g = group_at(eq, degree)?;
        if g.groups.len() == 1 {
            let (q, sub) = &g.groups[0];
            let sub = sub.div_exp(&Poly::monomial(q.clone(), degree));
            return walk(&sub, degree - 1, acc);
        }
        let conj: Vec<ExactComplex> = g.groups.iter().map(|(q, _)| q.conj()).collect();
        let hull = geometry::convex_hull(&conj)?;
        if hull.vertices.len() >= 2 {
            *acc = acc.min(geometry::max_epsilon(&hull) / 4.0);
        }
        for (_, sub) in &g.groups {
            walk(sub, degree - 1, acc)?;
        }
        Ok(())
    }
    let mut acc = 0.1f64;
    walk(eq, eq.exponent_degree(), &mut acc)?;
    Ok(acc)
}

/// Build the recursive grouping tree. Each level groups at one degree
/// lower than its parent (trivial single-group levels keep the ladder
/// aligned so the Theorem's `s + 1 - t` lift divisors apply verbatim).
pub fn build_tree(eq: &LinearODE, epsilon: f64) -> Result<DecompNode, DecompError> {
    if eq.leading().is_zero() {
        return Err(DecompError::ZeroLeadingCoefficient);
    }
    let s = eq.exponent_degree();
    if s == 0 {
        return Err(DecompError::AlreadyFundamental);
    }
    build_node(
        eq.clone(),
        Vec::new(),
        0,
        None,
        true,
        SectorSet::full(),
        SectorSet::full(),
        s,
        epsilon,
    )
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    eq: LinearODE,
    path: Vec<usize>,
    level: usize,
    q: Option<ExactComplex>,
    is_vertex: bool,
    validity_w: SectorSet,
    validity_z: SectorSet,
    s_root: usize,
    epsilon: f64,
) -> Result<DecompNode, DecompError> {
    let mut node = DecompNode {
        path,
        level,
        q,
        is_vertex,
        equation: eq,
        validity_w,
        validity_z,
        grouping: None,
        children: Vec::new(),
    };
    if node.equation.exponent_degree() == 0 {
        return Ok(node);
    }
    if level >= s_root {
        return Err(DecompError::DepthExceeded);
    }
    let degree = s_root - level;
    let grouped = group_at(&node.equation, degree)?;
    let divisor = degree as u32;

    if grouped.groups.len() == 1 {
        // Trivial level: divide out the common exponential and continue
        // without a sector split.
        let (q_common, sub) = grouped.groups.into_iter().next().unwrap();
        let sub = sub.div_exp(&Poly::monomial(q_common.clone(), degree));
        let conj = vec![q_common.conj()];
        let hull = geometry::convex_hull(&conj)?;
        node.grouping = Some(NodeGrouping {
            degree,
            hull,
            sectors: None,
        });
        let mut child_path = node.path.clone();
        child_path.push(0);
        let child = build_node(
            sub,
            child_path,
            level + 1,
            Some(q_common),
            true,
            SectorSet::full(),
            SectorSet::full(),
            s_root,
            epsilon,
        )?;
        node.children.push(child);
        return Ok(node);
    }

    let conj: Vec<ExactComplex> = grouped.groups.iter().map(|(q, _)| q.conj()).collect();
    let hull = geometry::convex_hull(&conj)?;
    let sectors = geometry::sector_system(&hull, epsilon)?;

    for (idx, (q_child, sub)) in grouped.groups.iter().enumerate() {
        let conj_q = q_child.conj();
        let child_is_vertex = hull.is_vertex(&conj_q);
        // Vertex groups own their dominance sector. Non-vertex groups
        // only matter where dominance degenerates: inside the critical
        // strips of the sides they sit on (all strips for interior
        // points).
        let region_w = if child_is_vertex {
            let sec = sectors
                .dominance_sector_of(&conj_q)
                .expect("vertex has a dominance sector");
            SectorSet::from_sector(sec)
        } else {
            let incident = incident_strips(&hull, &sectors, &conj_q);
            SectorSet::from_sectors(&incident)
        };
        let mut region_z = SectorSet::empty();
        for (a, b) in region_w.intervals() {
            let sec = crate::geometry::Sector::new(*a, *b);
            for lifted in sec.lift(divisor) {
                region_z = region_z.union(&SectorSet::from_sector(&lifted));
            }
        }
        let mut child_path = node.path.clone();
        child_path.push(idx);
        let child = build_node(
            sub.clone(),
            child_path,
            level + 1,
            Some(q_child.clone()),
            child_is_vertex,
            region_w,
            region_z,
            s_root,
            epsilon,
        )?;
        node.children.push(child);
    }
    node.grouping = Some(NodeGrouping {
        degree,
        hull,
        sectors: Some(sectors),
    });
    Ok(node)
}

fn incident_strips(
    hull: &FrequencyHull,
    sectors: &SectorSystem,
    p: &ExactComplex,
) -> Vec<crate::geometry::Sector> {
    let angles = hull.normal_angles();
    let mut out = Vec::new();
    let mut interior = true;
    for (side_idx, &(a, b)) in hull.sides.iter().enumerate() {
        let va = &hull.vertices[a];
        let vb = &hull.vertices[b];
        let on_side = {
            use num_traits::Zero;
            let ax = &vb.re - &va.re;
            let ay = &vb.im - &va.im;
            let bx = &p.re - &va.re;
            let by = &p.im - &va.im;
            (&ax * &by - &ay * &bx).is_zero()
        };
        if on_side {
            interior = false;
            let eta = angles[side_idx];
            if let Some((_, strip)) = sectors
                .critical_strips
                .iter()
                .find(|(e, _)| (e - eta).abs() < 1e-12)
            {
                out.push(*strip);
            }
        }
    }
    if interior {
        out = sectors.critical_strips.iter().map(|(_, s)| *s).collect();
    }
    out
}

/// Extract fundamental equations: one per tree leaf whose
/// path-accumulated sector intersection is nonempty.
pub fn leaves(root: &DecompNode) -> Vec<FundamentalDE> {
    let mut out = Vec::new();
    collect_leaves(root, &SectorSet::full(), &mut out);
    out
}

fn collect_leaves(node: &DecompNode, acc: &SectorSet, out: &mut Vec<FundamentalDE>) {
    let acc = acc.intersect(&node.validity_z);
    if node.is_leaf() {
        if acc.is_empty() {
            return;
        }
        if let Some(coeffs) = node.equation.polynomial_coeffs() {
            out.push(FundamentalDE::new(coeffs, node.path.clone(), acc));
        }
        return;
    }
    for c in &node.children {
        collect_leaves(c, &acc, out);
    }
}
