//! Finite representations of convex sets and the membership tests built on them.
//!
//! A [`VPolytope`] is the convex hull of finitely many points and a [`VCone`]
//! the positive hull of finitely many generators. [`zero_in_sum`] decides
//!
//! ```text
//! 0 ∈ co(H_1 ∪ ... ∪ H_m) + pos(C_1) + ... + pos(C_p) + pos(N)
//! ```
//!
//! with a phase-1 simplex and returns the weights grouped by source set.

mod lp;
mod minnorm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use lp::solve_dense;
pub use lp::{phase_one, LpSolution};
pub use minnorm::{distance_to_hull, min_norm_in_sum, min_norm_point};

/// Default feasibility tolerance of the membership LP.
pub const DEFAULT_LP_TOL: f64 = 1e-8;

/// Weights above this are reported as a near-degenerate certificate.
pub const WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate linear program: {0}")]
    Degenerate(String),
    #[error("operation needs a nonempty set")]
    EmptyInput,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Convex hull of finitely many points (V-representation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VPolytope {
    dim: usize,
    points: Vec<Vec<f64>>,
    tol: f64,
}

impl VPolytope {
    /// Builds the hull of `points`, dropping any point within `tol` of an
    /// earlier one.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, tol: f64) -> Result<VPolytope, GeometryError> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(GeometryError::DimensionMismatch(format!(
                "point of length {} in a polytope of dimension {dim}",
                p.len()
            )));
        }
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if !kept.iter().any(|q| dist(q, &p) <= tol) {
                kept.push(p);
            }
        }
        Ok(VPolytope { dim, points: kept, tol })
    }

    /// The empty-set marker.
    pub fn empty(dim: usize) -> VPolytope {
        VPolytope { dim, points: Vec::new(), tol: 0.0 }
    }

    pub fn singleton(p: Vec<f64>) -> VPolytope {
        VPolytope { dim: p.len(), points: vec![p], tol: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Support function `max_{v ∈ co P} <d, v>`.
    pub fn support(&self, d: &[f64]) -> f64 {
        self.points.iter().map(|p| dot(p, d)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| norm(p)).fold(0.0, f64::max)
    }

    /// Distance from `p` to the hull; infinite for the empty set.
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        distance_to_hull(p, &self.points)
    }

    /// Least-norm element of the hull.
    pub fn least_norm(&self) -> Result<Vec<f64>, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyInput);
        }
        Ok(min_norm_point(&self.points).0)
    }
}

/// Positive hull of finitely many generators; no generators means `{0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VCone {
    dim: usize,
    generators: Vec<Vec<f64>>,
}

impl VCone {
    pub fn zero(dim: usize) -> VCone {
        VCone { dim, generators: Vec::new() }
    }

    /// Geometric cone: generators are normalized to unit length, zero vectors
    /// dropped and directions deduplicated within `tol`.
    pub fn new(dim: usize, generators: Vec<Vec<f64>>, tol: f64) -> Result<VCone, GeometryError> {
        if generators.iter().any(|g| g.len() != dim) {
            return Err(GeometryError::DimensionMismatch("cone generator length".into()));
        }
        let mut kept: Vec<Vec<f64>> = Vec::new();
        for g in generators {
            let n = norm(&g);
            if n <= tol || !n.is_finite() {
                continue;
            }
            let u: Vec<f64> = g.iter().map(|v| v / n).collect();
            if !kept.iter().any(|q| dist(q, &u) <= tol) {
                kept.push(u);
            }
        }
        Ok(VCone { dim, generators: kept })
    }

    /// Cone over the points of a hull, keeping each point's scale so that the
    /// weight on a generator is a multiplier of a set element. A zero point is
    /// kept as an explicit zero generator.
    pub fn over_set(set: &VPolytope, tol: f64) -> VCone {
        let mut kept: Vec<Vec<f64>> = Vec::new();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        let mut has_zero = false;
        for p in set.points() {
            let n = norm(p);
            if n <= tol {
                if !has_zero {
                    has_zero = true;
                    kept.push(vec![0.0; set.dim()]);
                    dirs.push(vec![0.0; set.dim()]);
                }
                continue;
            }
            let u: Vec<f64> = p.iter().map(|v| v / n).collect();
            if !dirs.iter().any(|q| dist(q, &u) <= tol) {
                dirs.push(u);
                kept.push(p.clone());
            }
        }
        VCone { dim: set.dim(), generators: kept }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    /// True when the cone is `{0}`.
    pub fn is_trivial(&self) -> bool {
        self.generators.iter().all(|g| norm(g) == 0.0)
    }
}

/// Result of a [`zero_in_sum`] test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipCertificate {
    pub feasible: bool,
    /// Simplex weights, grouped by hull.
    pub mu: Vec<Vec<f64>>,
    /// Cone weights, grouped by cone.
    pub nu: Vec<Vec<f64>>,
    /// Weights on the ground-set normal generators.
    pub kappa: Vec<f64>,
    /// Per-hull totals of `mu`.
    pub alpha: Vec<f64>,
    /// Per-cone totals of `nu`.
    pub beta: Vec<f64>,
    /// Norm of the reconstructed sum.
    pub residual: f64,
    /// Phase-1 objective; positive on infeasible systems.
    pub margin: f64,
    /// Some weight exceeded [`WEIGHT_CAP`].
    pub near_degenerate: bool,
}

fn check_dims(dim: usize, hulls: &[VPolytope], cones: &[VCone], ground: &VCone) -> Result<(), GeometryError> {
    let bad = hulls.iter().map(|h| h.dim()).chain(cones.iter().map(|c| c.dim())).any(|d| d != dim);
    if bad || ground.dim() != dim {
        return Err(GeometryError::DimensionMismatch(format!("sets must all live in R^{dim}")));
    }
    Ok(())
}

/// Tests `0 ∈ co(∪ hulls) + Σ pos(cones) + pos(ground)`.
///
/// With no hulls the call is a pure cone test normalized by `Σ nu = 1`
/// (ground weights stay free), which is the form the constraint
/// qualification needs.
pub fn zero_in_sum(
    hulls: &[VPolytope],
    cones: &[VCone],
    ground: &VCone,
    lp_tol: f64,
) -> Result<MembershipCertificate, GeometryError> {
    let dim = ground.dim();
    check_dims(dim, hulls, cones, ground)?;

    let mut columns: Vec<&[f64]> = Vec::new();
    let mut norm_row: Vec<f64> = Vec::new();
    let pure_cone = hulls.is_empty();
    for h in hulls {
        for p in h.points() {
            columns.push(p);
            norm_row.push(1.0);
        }
    }
    for c in cones {
        for g in c.generators() {
            columns.push(g);
            norm_row.push(if pure_cone { 1.0 } else { 0.0 });
        }
    }
    for g in ground.generators() {
        columns.push(g);
        norm_row.push(0.0);
    }
    let mut rows: Vec<Vec<f64>> = (0..dim).map(|k| columns.iter().map(|c| c[k]).collect()).collect();
    rows.push(norm_row);
    let mut rhs = vec![0.0; dim];
    rhs.push(1.0);

    let sol = phase_one(&rows, &rhs, lp_tol)?;

    // regroup
    let mut it = sol.x.iter().copied();
    let mu: Vec<Vec<f64>> = hulls.iter().map(|h| it.by_ref().take(h.len()).collect()).collect();
    let nu: Vec<Vec<f64>> =
        cones.iter().map(|c| it.by_ref().take(c.generators().len()).collect()).collect();
    let kappa: Vec<f64> = it.collect();

    let mut sum = vec![0.0; dim];
    for (col, w) in columns.iter().zip(&sol.x) {
        sum.iter_mut().zip(col.iter()).for_each(|(s, c)| *s += w * c);
    }
    let residual = norm(&sum);
    let alpha: Vec<f64> = mu.iter().map(|m| m.iter().sum()).collect();
    let beta: Vec<f64> = nu.iter().map(|m| m.iter().sum()).collect();
    let near_degenerate = sol.x.iter().any(|w| *w > WEIGHT_CAP);
    // a certificate that does not reconstruct 0 is not a certificate
    let feasible = sol.feasible && residual <= lp_tol;
    Ok(MembershipCertificate {
        feasible,
        mu,
        nu,
        kappa,
        alpha,
        beta,
        residual,
        margin: if feasible { sol.infeasibility } else { sol.infeasibility.max(residual) },
        near_degenerate,
    })
}

/// Looks for `u != 0` with `u ∈ Σ pos(a)` and `-u ∈ Σ pos(b)`. Returns a
/// witness `u` when the cones meet nontrivially.
pub fn opposite_cones_meet(
    a: &[&VCone],
    b: &[&VCone],
    lp_tol: f64,
) -> Result<Option<Vec<f64>>, GeometryError> {
    let dim = match a.first().or(b.first()) {
        Some(c) => c.dim(),
        None => return Ok(None),
    };
    if a.iter().chain(b).any(|c| c.dim() != dim) {
        return Err(GeometryError::DimensionMismatch("cones of different dimension".into()));
    }
    let ga: Vec<&Vec<f64>> = a.iter().flat_map(|c| c.generators()).collect();
    let gb: Vec<&Vec<f64>> = b.iter().flat_map(|c| c.generators()).collect();
    if ga.is_empty() || gb.is_empty() {
        return Ok(None);
    }
    let ncols = ga.len() + gb.len() + 1;
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut rows: Vec<Vec<f64>> = (0..dim)
                .map(|r| ga.iter().chain(&gb).map(|g| g[r]).chain([0.0]).collect())
                .collect();
            let mut last = vec![0.0; ncols];
            for (j, g) in ga.iter().enumerate() {
                last[j] = sign * g[k];
            }
            last[ncols - 1] = -1.0;
            rows.push(last);
            let mut rhs = vec![0.0; dim];
            rhs.push(1.0);
            let sol = phase_one(&rows, &rhs, lp_tol)?;
            if sol.feasible {
                let mut u = vec![0.0; dim];
                for (g, w) in ga.iter().zip(&sol.x) {
                    u.iter_mut().zip(g.iter()).for_each(|(s, c)| *s += w * c);
                }
                return Ok(Some(u));
            }
        }
    }
    Ok(None)
}

/// `{v + w}` over all pairs, deduplicated within the larger tolerance.
pub fn minkowski_sum(a: &VPolytope, b: &VPolytope) -> Result<VPolytope, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    let mut pts = Vec::with_capacity(a.len() * b.len());
    for p in a.points() {
        for q in b.points() {
            pts.push(p.iter().zip(q).map(|(x, y)| x + y).collect());
        }
    }
    VPolytope::new(a.dim(), pts, a.tol().max(b.tol()))
}

/// Deterministic quasi-uniform unit directions: `4^n` of them capped at 4096.
pub fn direction_grid(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..16)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 16.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let count = 4usize.checked_pow(dim as u32).unwrap_or(4096).min(4096);
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let mut out = Vec::with_capacity(count + 2 * dim);
            for i in 0..dim {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[i] = s;
                    out.push(e);
                }
            }
            while out.len() < count {
                let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = norm(&g);
                if n > 1e-12 {
                    out.push(g.into_iter().map(|v| v / n).collect());
                }
            }
            out
        }
    }
}

/// `max_{v ∈ a} dist(v, co b)`: how far `a` sticks out of `b`.
pub fn hausdorff_one_sided(a: &VPolytope, b: &VPolytope) -> Result<f64, GeometryError> {
    if a.dim() != b.dim() {
        return Err(GeometryError::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    if b.is_empty() {
        return if a.is_empty() { Ok(0.0) } else { Ok(f64::INFINITY) };
    }
    Ok(a.points().iter().map(|p| b.distance_to(p)).fold(0.0, f64::max))
}

/// Symmetric Hausdorff distance between the hulls.
pub fn hausdorff(a: &VPolytope, b: &VPolytope) -> Result<f64, GeometryError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let exact = hausdorff_one_sided(a, b)?.max(hausdorff_one_sided(b, a)?);
    let support = direction_grid(a.dim())
        .iter()
        .map(|d| (a.support(d) - b.support(d)).abs())
        .fold(0.0, f64::max);
    Ok(exact.max(support))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(pts: &[&[f64]]) -> VPolytope {
        VPolytope::new(pts[0].len(), pts.iter().map(|p| p.to_vec()).collect(), 1e-12).unwrap()
    }

    #[test]
    fn symmetric_pair_cancels() {
        let h = [poly(&[&[1.0, 0.0]]), poly(&[&[-1.0, 0.0]])];
        let c = zero_in_sum(&h, &[], &VCone::zero(2), DEFAULT_LP_TOL).unwrap();
        assert!(c.feasible);
        assert!((c.alpha[0] - 0.5).abs() < 1e-12 && (c.alpha[1] - 0.5).abs() < 1e-12);
        assert!(c.residual <= 1e-12);
    }

    #[test]
    fn example_with_zero_hulls() {
        let h = [poly(&[&[0.0]]), poly(&[&[0.0]])];
        let g = VCone::over_set(&poly(&[&[1.0]]), 1e-12);
        let c = zero_in_sum(&h, &[g], &VCone::zero(1), DEFAULT_LP_TOL).unwrap();
        assert!(c.feasible);
        assert!(c.beta[0].abs() < 1e-12);
        assert!((c.alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ground_normals_close_the_sum() {
        let h = [poly(&[&[1.0, 1.0]])];
        let g = VCone::over_set(&poly(&[&[-1.0, 0.0]]), 1e-12);
        let ground = VCone::new(2, vec![vec![0.0, -1.0]], 1e-12).unwrap();
        let c = zero_in_sum(&h, &[g], &ground, DEFAULT_LP_TOL).unwrap();
        assert!(c.feasible);
        assert!((c.beta[0] - 1.0).abs() < 1e-12 && (c.kappa[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonzero_singleton_is_infeasible() {
        let c = zero_in_sum(&[poly(&[&[1.0, 0.0]])], &[], &VCone::zero(2), DEFAULT_LP_TOL).unwrap();
        assert!(!c.feasible);
        assert!(c.margin > 0.5);
    }

    #[test]
    fn pure_cone_test_normalizes_cone_weights() {
        // g ≡ 0 gives a zero generator: CQ-style test is feasible
        let zero = VCone::over_set(&poly(&[&[0.0]]), 1e-12);
        let c = zero_in_sum(&[], &[zero], &VCone::zero(1), DEFAULT_LP_TOL).unwrap();
        assert!(c.feasible && (c.beta[0] - 1.0).abs() < 1e-12);
        // opposite constraint gradients
        let a = VCone::over_set(&poly(&[&[1.0]]), 1e-12);
        let b = VCone::over_set(&poly(&[&[-1.0]]), 1e-12);
        let c = zero_in_sum(&[], &[a.clone(), b], &VCone::zero(1), DEFAULT_LP_TOL).unwrap();
        assert!(c.feasible);
        assert!((c.beta[0] - 0.5).abs() < 1e-12 && (c.beta[1] - 0.5).abs() < 1e-12);
        let c = zero_in_sum(&[], &[a], &VCone::zero(1), DEFAULT_LP_TOL).unwrap();
        assert!(!c.feasible);
        // no cones at all: nothing to normalize
        let c = zero_in_sum(&[], &[], &VCone::zero(1), DEFAULT_LP_TOL).unwrap();
        assert!(!c.feasible);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let r = zero_in_sum(&[poly(&[&[1.0]])], &[], &VCone::zero(2), DEFAULT_LP_TOL);
        assert!(matches!(r, Err(GeometryError::DimensionMismatch(_))));
    }

    #[test]
    fn minkowski_examples() {
        let seg = poly(&[&[-1.0], &[1.0]]);
        let s = minkowski_sum(&seg, &poly(&[&[0.0]])).unwrap();
        assert_eq!(hausdorff(&s, &seg).unwrap(), 0.0);
        let s = minkowski_sum(&poly(&[&[1.0]]), &poly(&[&[-1.0]])).unwrap();
        assert_eq!(s.points(), &[vec![0.0]]);
        let sq = poly(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let s = minkowski_sum(&sq, &sq).unwrap();
        let big = poly(&[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]]);
        // support-function oracle in 32 directions
        for k in 0..32 {
            let t = std::f64::consts::TAU * k as f64 / 32.0;
            let d = [t.cos(), t.sin()];
            assert!((s.support(&d) - big.support(&d)).abs() < 1e-12);
        }
        assert!(minkowski_sum(&seg, &sq).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let a = poly(&[&[0.0], &[1.0]]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert!((hausdorff(&poly(&[&[0.0]]), &poly(&[&[-1.0], &[1.0]])).unwrap() - 1.0).abs() < 1e-12);
        assert!((hausdorff(&a, &poly(&[&[0.0], &[2.0]])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(hausdorff(&a, &VPolytope::empty(1)), Err(GeometryError::EmptyInput));
        assert_eq!(hausdorff_one_sided(&a, &poly(&[&[-1.0], &[3.0]])).unwrap(), 0.0);
    }

    #[test]
    fn cones_meeting_oppositely() {
        let plus = VCone::new(1, vec![vec![1.0]], 1e-12).unwrap();
        let minus = VCone::new(1, vec![vec![-1.0]], 1e-12).unwrap();
        assert!(opposite_cones_meet(&[&plus], &[&minus], 1e-9).unwrap().is_some());
        assert!(opposite_cones_meet(&[&plus], &[&plus], 1e-9).unwrap().is_none());
        // a line in one cone and nothing in the other
        let line = VCone::new(1, vec![vec![1.0], vec![-1.0]], 1e-12).unwrap();
        assert!(opposite_cones_meet(&[&line], &[&VCone::zero(1)], 1e-9).unwrap().is_none());
    }

    #[test]
    fn cone_normalization() {
        let c = VCone::new(2, vec![vec![2.0, 0.0], vec![5.0, 0.0], vec![0.0, 0.0]], 1e-12).unwrap();
        assert_eq!(c.generators(), &[vec![1.0, 0.0]]);
        assert!(VCone::zero(2).is_trivial());
        let s = VCone::over_set(&poly(&[&[2.0], &[3.0], &[0.0]]), 1e-12);
        assert_eq!(s.generators(), &[vec![2.0], vec![0.0]]);
    }
}
