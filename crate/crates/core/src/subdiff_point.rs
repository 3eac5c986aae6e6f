//! Subdifferentials of max-of-smooth expressions and normal cones of simple
//! ground sets, both at finite points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::geometry::{dot, norm, VCone, VPolytope};

/// Most active branches a single point may have before we give up.
pub const BRANCH_CAP: usize = 64;

/// Tolerance for `x ∈ Ω`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubdiffError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("too many active branches: {0}")]
    TooManyBranches(String),
    #[error("invalid ground set: {0}")]
    InvalidGroundSet(String),
    #[error("point is not in the ground set (violation {violation:.3e})")]
    NotInGroundSet { violation: f64 },
}

/// Active-branch hull at a point together with how it was formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSubdifferential {
    pub set: VPolytope,
    /// Number of active smooth branches that were enumerated.
    pub branches: usize,
    /// Two or more active branches had coinciding gradients, so the hull may
    /// be a proper superset of the true subdifferential.
    pub degenerate: bool,
}

/// `co{∇ branch(x) : branch active at x}`.
pub fn subdiff_at(e: &Expr, x: &[f64]) -> Result<VPolytope, SubdiffError> {
    Ok(subdiff_at_detailed(e, x)?.set)
}

pub fn subdiff_at_detailed(e: &Expr, x: &[f64]) -> Result<PointSubdifferential, SubdiffError> {
    let (grads, _) = e.active_branch_gradients(x, BRANCH_CAP).map_err(|err| match err {
        ExprError::Profile(msg) => SubdiffError::TooManyBranches(msg),
        other => SubdiffError::Expr(other),
    })?;
    if let Some(g) = grads.iter().find(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(SubdiffError::Expr(ExprError::Domain {
            node: e.root(),
            op: "gradient",
            msg: format!("non-finite gradient {g:?}"),
        }));
    }
    let branches = grads.len();
    let scale = grads.iter().map(|g| norm(g)).fold(0.0, f64::max);
    let set = VPolytope::new(e.dim(), grads, 1e-12 * (1.0 + scale))
        .expect("gradients have the expression's dimension");
    let degenerate = set.len() < branches;
    Ok(PointSubdifferential { set, branches, degenerate })
}

/// The ground set Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundSet {
    Full { dim: usize },
    /// `lower ≤ x ≤ upper`; infinite entries are allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `a x ≤ b` row by row.
    Polyhedron { a: Vec<Vec<f64>>, b: Vec<f64> },
}

fn row_tol(bi: f64, a: &[f64], x: &[f64]) -> f64 {
    // the scale term absorbs rounding in a·x far from the origin
    1e-8 * (1.0 + bi.abs()) + 4.0 * f64::EPSILON * norm(a) * norm(x)
}

impl GroundSet {
    pub fn full(dim: usize) -> GroundSet {
        GroundSet::Full { dim }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<GroundSet, SubdiffError> {
        let g = GroundSet::Box { lower, upper };
        g.validate()?;
        Ok(g)
    }

    pub fn polyhedron(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<GroundSet, SubdiffError> {
        let g = GroundSet::Polyhedron { a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SubdiffError> {
        let bad = |m: String| Err(SubdiffError::InvalidGroundSet(m));
        match self {
            GroundSet::Full { .. } => Ok(()),
            GroundSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return bad(format!("{} lower bounds but {} upper bounds", lower.len(), upper.len()));
                }
                for (i, (l, u)) in lower.iter().zip(upper).enumerate() {
                    if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                        return bad(format!("bounds of coordinate {} are inconsistent: [{l}, {u}]", i + 1));
                    }
                }
                Ok(())
            }
            GroundSet::Polyhedron { a, b } => {
                if a.len() != b.len() {
                    return bad(format!("{} rows but {} right-hand sides", a.len(), b.len()));
                }
                let n = a.first().map_or(0, |r| r.len());
                for (i, row) in a.iter().enumerate() {
                    if row.len() != n {
                        return bad(format!("row {} has length {}, expected {n}", i + 1, row.len()));
                    }
                    if row.iter().any(|v| !v.is_finite()) || !b[i].is_finite() {
                        return bad(format!("row {} is not finite", i + 1));
                    }
                    if norm(row) == 0.0 {
                        return bad(format!("row {} is zero", i + 1));
                    }
                }
                Ok(())
            }
        }
    }

    /// Dimension, or `None` for a polyhedron with no rows.
    pub fn dim(&self) -> Option<usize> {
        match self {
            GroundSet::Full { dim } => Some(*dim),
            GroundSet::Box { lower, .. } => Some(lower.len()),
            GroundSet::Polyhedron { a, .. } => a.first().map(|r| r.len()),
        }
    }

    /// Largest constraint violation at `x` (0 inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            GroundSet::Full { .. } => 0.0,
            GroundSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(xi, (l, u))| (l - xi).max(xi - u).max(0.0))
                .fold(0.0, f64::max),
            GroundSet::Polyhedron { a, b } => {
                a.iter().zip(b).map(|(r, bi)| (dot(r, x) - bi).max(0.0)).fold(0.0, f64::max)
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            GroundSet::Full { .. } => true,
            GroundSet::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(xi, (l, u))| {
                *xi >= l - MEMBERSHIP_TOL * (1.0 + l.abs()) && *xi <= u + MEMBERSHIP_TOL * (1.0 + u.abs())
            }),
            GroundSet::Polyhedron { a, b } => a.iter().zip(b).all(|(r, bi)| {
                dot(r, x) - bi <= MEMBERSHIP_TOL * (1.0 + bi.abs()) + 4.0 * f64::EPSILON * norm(r) * norm(x)
            }),
        }
    }

    /// Euclidean projection onto Ω. Polyhedra use Dykstra's alternating
    /// projections followed by an exact solve on the detected active rows.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            GroundSet::Full { .. } => x.to_vec(),
            GroundSet::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).map(|(xi, (l, u))| xi.clamp(*l, *u)).collect()
            }
            GroundSet::Polyhedron { a, b } => project_polyhedron(a, b, x),
        }
    }
}

fn project_halfspace(a: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    let s = dot(a, y) - b;
    if s <= 0.0 {
        return y.to_vec();
    }
    let aa = dot(a, a);
    y.iter().zip(a).map(|(yi, ai)| yi - s / aa * ai).collect()
}

fn project_polyhedron(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    if a.iter().zip(b).all(|(r, bi)| dot(r, x) <= *bi) {
        return x.to_vec();
    }
    let m = a.len();
    let n = x.len();
    let mut y = x.to_vec();
    let mut incr = vec![vec![0.0; n]; m];
    let scale = 1.0 + norm(x);
    for _ in 0..20_000 {
        let before = y.clone();
        for i in 0..m {
            let z: Vec<f64> = y.iter().zip(&incr[i]).map(|(a, b)| a + b).collect();
            let p = project_halfspace(&a[i], b[i], &z);
            incr[i] = z.iter().zip(&p).map(|(zi, pi)| zi - pi).collect();
            y = p;
        }
        let moved = y.iter().zip(&before).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        if moved <= 1e-15 * scale {
            break;
        }
    }
    polish_projection(a, b, x, &y).unwrap_or(y)
}

/// Exact projection onto the rows that are active at `y`, accepted only when
/// it is feasible with nonnegative multipliers.
fn polish_projection(a: &[Vec<f64>], b: &[f64], x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> =
        (0..a.len()).filter(|&i| dot(&a[i], y) >= b[i] - row_tol(b[i], &a[i], y) * 10.0).collect();
    if active.is_empty() {
        return None;
    }
    // solve (A A^T) λ = A x − b, then p = x − A^T λ
    let k = active.len();
    let mut gram: Vec<Vec<f64>> =
        active.iter().map(|&i| active.iter().map(|&j| dot(&a[i], &a[j])).collect()).collect();
    let rhs: Vec<f64> = active.iter().map(|&i| dot(&a[i], x) - b[i]).collect();
    let lambda = crate::geometry::solve_dense(&mut gram, rhs)?;
    if lambda.iter().any(|l| *l < -1e-12) {
        return None;
    }
    let mut p = x.to_vec();
    for (t, &i) in active.iter().enumerate() {
        p.iter_mut().zip(&a[i]).for_each(|(pi, ai)| *pi -= lambda[t] * ai);
    }
    let feasible = (0..a.len()).all(|i| dot(&a[i], &p) - b[i] <= row_tol(b[i], &a[i], &p));
    (feasible && k <= x.len()).then_some(p)
}

/// Normal cone to Ω at `x`, as generated by the outward normals of the active
/// faces.
pub fn normal_cone_at(omega: &GroundSet, x: &[f64]) -> Result<VCone, SubdiffError> {
    omega.validate()?;
    if let Some(d) = omega.dim() {
        if d != x.len() {
            return Err(SubdiffError::Expr(ExprError::DimensionMismatch { want: d, got: x.len() }));
        }
    }
    if !omega.contains(x) {
        return Err(SubdiffError::NotInGroundSet { violation: omega.violation(x) });
    }
    let n = x.len();
    let mut gens = Vec::new();
    match omega {
        GroundSet::Full { .. } => {}
        GroundSet::Box { lower, upper } => {
            for i in 0..n {
                let mut e = vec![0.0; n];
                if lower[i].is_finite() && (x[i] - lower[i]).abs() <= 1e-8 * (1.0 + lower[i].abs()) {
                    e[i] = -1.0;
                    gens.push(e.clone());
                }
                if upper[i].is_finite() && (x[i] - upper[i]).abs() <= 1e-8 * (1.0 + upper[i].abs()) {
                    e[i] = 1.0;
                    gens.push(e);
                }
            }
        }
        GroundSet::Polyhedron { a, b } => {
            for (r, bi) in a.iter().zip(b) {
                if (dot(r, x) - bi).abs() <= row_tol(*bi, r, x) {
                    gens.push(r.clone());
                }
            }
        }
    }
    Ok(VCone::new(n, gens, 1e-12).expect("generators have the point's dimension"))
}
