//! Subdifferentials and normal cones at infinity, estimated as outer limits
//! of point estimates sampled along rays `x = R_k d` with `R_k = R_0 ρ^k`.
//!
//! Each direction is sampled twice: along the straight ray and along a
//! perturbed ray whose point at every radius is `R_k (d + σ ξ_k)` with fresh
//! Gaussian `ξ_k`. Curved escape paths other than these can be missed; the
//! per-ray diagnostics say what was seen and nothing more.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::geometry::{self, norm, GeometryError, VCone, VPolytope};
use crate::subdiff_point::{normal_cone_at, GroundSet, SubdiffError, BRANCH_CAP};

/// Default slack for inclusion reports.
pub const DEFAULT_SLACK: f64 = 1e-6;

/// Number of trailing radius steps inspected by the divergence rule.
const GROWTH_WINDOW: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticError {
    #[error("invalid sampling plan: {0}")]
    Plan(String),
    #[error("every sampled direction left the domain ({0})")]
    AllDirectionsInvalid(String),
    #[error("Ω appears bounded: no point of it was found beyond radius {0}")]
    GroundBounded(f64),
    #[error(transparent)]
    Subdiff(#[from] SubdiffError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dimension mismatch: plan is for R^{plan} but the input lives in R^{input}")]
    Dimension { plan: usize, input: usize },
}

/// Discretization of `x → ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub directions: Vec<Vec<f64>>,
    pub radii_base: f64,
    pub radii_ratio: f64,
    /// `K`: radii are `R_0 ρ^k` for `k = 0..=K`.
    pub radii_steps: usize,
    pub seed: u64,
    /// Limit points closer than `cluster_rel_tol · (1 + max ‖u‖)` are merged.
    pub cluster_rel_tol: f64,
    /// Radii below this never count as "near infinity".
    pub escape_floor: f64,
    /// Standard deviation of the perturbation on jittered rays.
    pub jitter: f64,
}

impl SamplingPlan {
    pub const DEFAULT_SEED: u64 = 0;

    /// Default plan: `max(2n, 16)` directions, `R_0 = 10`, `ρ = 2`, `K = 20`.
    pub fn default_for(dim: usize) -> SamplingPlan {
        SamplingPlan::new(dim, (2 * dim).max(16), Self::DEFAULT_SEED)
    }

    pub fn new(dim: usize, directions: usize, seed: u64) -> SamplingPlan {
        SamplingPlan {
            directions: sphere_directions(dim, directions, seed),
            radii_base: 10.0,
            radii_ratio: 2.0,
            radii_steps: 20,
            seed,
            cluster_rel_tol: 1e-6,
            escape_floor: 1e3,
            jitter: 0.05,
        }
    }

    pub fn dim(&self) -> usize {
        self.directions.first().map_or(0, |d| d.len())
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..=self.radii_steps).map(|k| self.radii_base * self.radii_ratio.powi(k as i32)).collect()
    }

    /// Indices of the radii in the tail half that clear the escape floor.
    pub fn tail(&self) -> Vec<usize> {
        let radii = self.radii();
        (self.radii_steps.div_ceil(2)..=self.radii_steps).filter(|&k| radii[k] >= self.escape_floor).collect()
    }

    pub fn validate(&self) -> Result<(), AsymptoticError> {
        let bad = |m: String| Err(AsymptoticError::Plan(m));
        let n = self.dim();
        if n == 0 {
            return bad("no directions".into());
        }
        if self.directions.len() < 2 * n {
            return bad(format!("{} directions in R^{n}; at least {} are needed", self.directions.len(), 2 * n));
        }
        for (i, d) in self.directions.iter().enumerate() {
            if d.len() != n || (norm(d) - 1.0).abs() > 1e-12 {
                return bad(format!("direction {i} is not a unit vector of R^{n}"));
            }
        }
        if !(self.radii_ratio > 1.0) || !self.radii_ratio.is_finite() {
            return bad(format!("radii ratio must exceed 1, got {}", self.radii_ratio));
        }
        if !(self.radii_base > 0.0) || !self.radii_base.is_finite() {
            return bad(format!("radii base must be positive, got {}", self.radii_base));
        }
        if self.radii_steps < 8 {
            return bad(format!("at least 8 radius steps are needed, got {}", self.radii_steps));
        }
        if !self.radii().iter().all(|r| r.is_finite()) {
            return bad("radius schedule overflows".into());
        }
        if !(self.escape_floor >= 0.0) || !(self.cluster_rel_tol > 0.0) || !(self.jitter >= 0.0) {
            return bad("escape floor, cluster tolerance and jitter must be nonnegative".into());
        }
        if self.tail().len() < GROWTH_WINDOW + 1 {
            return bad(format!(
                "only {} radii in the tail clear the escape floor {}; at least {} are needed",
                self.tail().len(),
                self.escape_floor,
                GROWTH_WINDOW + 1
            ));
        }
        Ok(())
    }

    fn check_dim(&self, input: usize) -> Result<(), AsymptoticError> {
        self.validate()?;
        if self.dim() != input {
            return Err(AsymptoticError::Dimension { plan: self.dim(), input });
        }
        Ok(())
    }

    /// Every ray of the plan, straight ones first.
    fn rays(&self) -> Vec<Ray> {
        let mut rays = Vec::with_capacity(2 * self.directions.len());
        for jittered in [false, true] {
            for i in 0..self.directions.len() {
                rays.push(Ray { direction: i, jittered });
            }
        }
        rays
    }

    /// Sample points of one ray, one per radius.
    fn ray_points(&self, ray: Ray) -> Vec<Vec<f64>> {
        let d = &self.directions[ray.direction];
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed ^ (ray.direction as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        self.radii()
            .into_iter()
            .map(|r| {
                d.iter()
                    .map(|di| {
                        let xi: f64 = if ray.jittered { StandardNormal.sample(&mut rng) } else { 0.0 };
                        r * (di + self.jitter * xi)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Quasi-uniform unit directions: `±1` alternating in 1-D, equal angles in
/// 2-D, coordinate directions followed by seeded Gaussian draws otherwise.
pub fn sphere_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => (0..count).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::with_capacity(count);
            'axes: for i in 0..dim {
                for s in [1.0, -1.0] {
                    if out.len() == count {
                        break 'axes;
                    }
                    let mut e = vec![0.0; dim];
                    e[i] = s;
                    out.push(e);
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            while out.len() < count {
                let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let n = norm(&g);
                if n > 1e-9 {
                    out.push(g.into_iter().map(|v| v / n).collect());
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ray {
    pub direction: usize,
    pub jittered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayStatus {
    /// Bounded subgradients whose last two samples agree within the cluster tolerance.
    Converged,
    /// Bounded subgradients that were still moving at the last radius.
    Unsettled,
    /// Subgradient norms grew geometrically or overflowed.
    Divergent,
    /// No tail sample was in the domain.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayDiagnostic {
    pub ray: Ray,
    pub status: RayStatus,
    /// Largest subgradient norm at the last valid sample (infinite on overflow).
    #[serde(with = "finite_or_null")]
    pub final_norm: f64,
    pub valid_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// JSON has no infinities; store them as `null`.
mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Estimate of a set at infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSet {
    /// Estimate of `∂f(∞)` or `N_Ω(∞)`.
    pub bounded_part: VPolytope,
    /// Estimate of `∂^∞f(∞)`; always contains 0.
    pub recession_cone: VCone,
    pub lipschitz_at_infinity: bool,
    /// `(L, R)`: tail subgradient norms are at most `L` beyond radius `R`.
    pub lipschitz_constants: Option<(f64, f64)>,
    pub samples_used: usize,
    pub diagnostics: Vec<RayDiagnostic>,
}

enum Sample {
    Finite(Vec<Vec<f64>>),
    /// Gradient overflowed; sign pattern of the infinite components.
    Overflow(Vec<f64>),
    Invalid(String),
}

fn sample(e: &Expr, x: &[f64]) -> Sample {
    match e.active_branch_gradients(x, BRANCH_CAP) {
        Err(err) => Sample::Invalid(err.to_string()),
        Ok((grads, _)) => {
            if let Some(g) = grads.iter().find(|g| g.iter().any(|v| !v.is_finite())) {
                let s: Vec<f64> = g
                    .iter()
                    .map(|v| if v.is_infinite() { v.signum() } else { 0.0 })
                    .collect();
                return if norm(&s) > 0.0 {
                    Sample::Overflow(s)
                } else {
                    Sample::Invalid("gradient is NaN".into())
                };
            }
            Sample::Finite(grads)
        }
    }
}

fn max_norm(vs: &[Vec<f64>]) -> f64 {
    vs.iter().map(|v| norm(v)).fold(0.0, f64::max)
}

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let n = norm(v);
    (n > 0.0 && n.is_finite()).then(|| v.iter().map(|x| x / n).collect())
}

struct RayOutcome {
    diag: RayDiagnostic,
    /// Final vertices for bounded rays.
    limit: Vec<Vec<f64>>,
    /// Largest tail norm for bounded rays.
    tail_norm: f64,
    /// Unit directions for divergent rays.
    escape: Vec<Vec<f64>>,
    samples: usize,
}

fn classify(ray: Ray, tail: Vec<Sample>, plan: &SamplingPlan) -> RayOutcome {
    let samples = tail.len();
    let mut notes = Vec::new();
    let valid: Vec<&Sample> = tail
        .iter()
        .filter(|s| match s {
            Sample::Invalid(msg) => {
                if notes.is_empty() {
                    notes.push(msg.clone());
                }
                false
            }
            _ => true,
        })
        .collect();
    let outcome = |status, final_norm, limit, tail_norm, escape, note: Option<String>| RayOutcome {
        diag: RayDiagnostic { ray, status, final_norm, valid_samples: valid.len(), note },
        limit,
        tail_norm,
        escape,
        samples,
    };
    let Some(last) = valid.last() else {
        return outcome(RayStatus::Invalid, 0.0, vec![], 0.0, vec![], notes.pop());
    };
    let last_finite = valid.iter().rev().find_map(|s| match s {
        Sample::Finite(v) => Some(v),
        _ => None,
    });
    if let Sample::Overflow(sign) = last {
        let dir = match last_finite {
            Some(v) if max_norm(v) >= 1e3 => v.iter().filter_map(|g| unit(g)).collect(),
            _ => vec![unit(sign).expect("overflow sign is nonzero")],
        };
        return outcome(RayStatus::Divergent, f64::INFINITY, vec![], 0.0, dir, Some("gradient overflow".into()));
    }
    let finals: Vec<&Vec<Vec<f64>>> = valid
        .iter()
        .filter_map(|s| match s {
            Sample::Finite(v) => Some(v),
            _ => None,
        })
        .collect();
    let last_v = finals[finals.len() - 1];
    let norms: Vec<f64> = finals.iter().map(|v| max_norm(v)).collect();
    let growth = plan.radii_ratio.sqrt() * (1.0 - 1e-9);
    let window = &norms[norms.len().saturating_sub(GROWTH_WINDOW + 1)..];
    let divergent = window.len() == GROWTH_WINDOW + 1
        && window[0] > 0.0
        && window.windows(2).all(|w| w[1] >= growth * w[0]);
    if divergent {
        let dir = last_v.iter().filter_map(|g| unit(g)).collect();
        return outcome(RayStatus::Divergent, norms[norms.len() - 1], vec![], 0.0, dir, None);
    }
    let tail_norm = norms.iter().copied().fold(0.0, f64::max);
    let fin = norms[norms.len() - 1];
    let settled = finals.len() >= 2 && {
        let a = VPolytope::new(plan.dim(), last_v.clone(), 0.0).expect("dims");
        let b = VPolytope::new(plan.dim(), finals[finals.len() - 2].clone(), 0.0).expect("dims");
        geometry::hausdorff(&a, &b).is_ok_and(|h| h <= plan.cluster_rel_tol * (1.0 + fin))
    };
    let status = if settled { RayStatus::Converged } else { RayStatus::Unsettled };
    outcome(status, fin, last_v.clone(), tail_norm, vec![], notes.pop())
}

/// Greedy clustering after a deterministic lexicographic sort. The kept
/// representatives are raw samples.
fn cluster(mut pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        if !reps.iter().any(|r| geometry::dist(r, &p) <= tol) {
            reps.push(p);
        }
    }
    reps
}

/// `∂f(∞)` and `∂^∞f(∞)` estimates for `e`.
pub fn subdiff_at_infinity(e: &Expr, plan: &SamplingPlan) -> Result<AsymptoticSet, AsymptoticError> {
    plan.check_dim(e.dim())?;
    let tail = plan.tail();
    let outcomes: Vec<RayOutcome> = plan
        .rays()
        .into_par_iter()
        .map(|ray| {
            let pts = plan.ray_points(ray);
            let samples = tail.iter().map(|&k| sample(e, &pts[k])).collect();
            classify(ray, samples, plan)
        })
        .collect();

    if outcomes.iter().all(|o| o.diag.status == RayStatus::Invalid) {
        let why = outcomes.iter().find_map(|o| o.diag.note.clone()).unwrap_or_default();
        return Err(AsymptoticError::AllDirectionsInvalid(why));
    }
    let n = plan.dim();
    let bounded: Vec<Vec<f64>> = outcomes.iter().flat_map(|o| o.limit.iter().cloned()).collect();
    let scale = max_norm(&bounded);
    let tol = plan.cluster_rel_tol * (1.0 + scale);
    let bounded_part = VPolytope::new(n, cluster(bounded, tol), tol)?;
    let escapes: Vec<Vec<f64>> = outcomes.iter().flat_map(|o| o.escape.iter().cloned()).collect();
    let recession_cone = VCone::new(n, cluster(escapes, plan.cluster_rel_tol), plan.cluster_rel_tol)?;
    let lipschitz = recession_cone.is_trivial() && !bounded_part.is_empty();
    let lipschitz_constants = lipschitz.then(|| {
        let l = outcomes.iter().map(|o| o.tail_norm).fold(0.0, f64::max);
        (l, plan.radii()[tail[0]] * (1.0 - plan.jitter * (n as f64).sqrt()).max(0.0))
    });
    Ok(AsymptoticSet {
        bounded_part,
        recession_cone,
        lipschitz_at_infinity: lipschitz,
        lipschitz_constants,
        samples_used: outcomes.iter().map(|o| o.samples).sum(),
        diagnostics: outcomes.into_iter().map(|o| o.diag).collect(),
    })
}

/// Points of Ω reached by projecting the plan's rays, as
/// `(ray, radius index, point)`, keeping only those beyond the escape floor.
pub fn far_points(omega: &GroundSet, plan: &SamplingPlan) -> Vec<(Ray, usize, Vec<f64>)> {
    let tail = plan.tail();
    plan.rays()
        .into_par_iter()
        .map(|ray| {
            let pts = plan.ray_points(ray);
            tail.iter()
                .map(|&k| (k, omega.project(&pts[k])))
                .filter(|(_, y)| norm(y) >= plan.escape_floor && omega.contains(y))
                .map(|(k, y)| (ray, k, y))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

/// `N_Ω(∞)` estimate: normals of Ω at the outermost projected sample of every
/// ray. The union of the sampled cones is returned as its positive hull.
pub fn normal_cone_at_infinity(omega: &GroundSet, plan: &SamplingPlan) -> Result<AsymptoticSet, AsymptoticError> {
    omega.validate()?;
    let n = omega.dim().unwrap_or(plan.dim());
    plan.check_dim(n)?;
    let far = far_points(omega, plan);
    if far.is_empty() {
        return Err(AsymptoticError::GroundBounded(plan.escape_floor));
    }
    let mut outer: Vec<(Ray, usize, &Vec<f64>)> = Vec::new();
    for (ray, k, y) in &far {
        match outer.iter_mut().find(|(r, _, _)| r == ray) {
            Some(slot) if slot.1 < *k => *slot = (*ray, *k, y),
            Some(_) => {}
            None => outer.push((*ray, *k, y)),
        }
    }
    let mut gens = Vec::new();
    let mut diagnostics = Vec::new();
    for (ray, _, y) in &outer {
        let cone = normal_cone_at(omega, y)?;
        gens.extend(cone.generators().iter().cloned());
        diagnostics.push(RayDiagnostic {
            ray: *ray,
            status: RayStatus::Converged,
            final_norm: norm(y),
            valid_samples: far.iter().filter(|(r, _, _)| r == ray).count(),
            note: None,
        });
    }
    let recession_cone = VCone::new(n, cluster(gens, plan.cluster_rel_tol), plan.cluster_rel_tol)?;
    let mut pts = vec![vec![0.0; n]];
    pts.extend(recession_cone.generators().iter().cloned());
    Ok(AsymptoticSet {
        bounded_part: VPolytope::new(n, pts, plan.cluster_rel_tol)?,
        lipschitz_at_infinity: recession_cone.is_trivial(),
        lipschitz_constants: None,
        recession_cone,
        samples_used: plan.rays().len() * plan.tail().len(),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionStatus {
    Holds,
    Violated,
    /// A qualification needed to read the result failed in the estimate.
    Inconclusive,
    HypothesisUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub status: InclusionStatus,
    /// One-sided Hausdorff excess of the left side over the right side.
    #[serde(with = "finite_or_null")]
    pub max_violation: f64,
    pub slack: f64,
    pub detail: String,
}

/// Checks `∂(e1 + e2)(∞) ⊆ ∂e1(∞) + ∂e2(∞)`.
pub fn check_sum_rule(
    e1: &Expr,
    e2: &Expr,
    plan: &SamplingPlan,
    slack: f64,
) -> Result<InclusionReport, AsymptoticError> {
    let a = subdiff_at_infinity(e1, plan)?;
    let b = subdiff_at_infinity(e2, plan)?;
    let s = subdiff_at_infinity(&e1.add(e2), plan)?;
    if let Some(u) = geometry::opposite_cones_meet(&[&a.recession_cone], &[&b.recession_cone], 1e-9)? {
        return Ok(InclusionReport {
            status: InclusionStatus::Inconclusive,
            max_violation: f64::NAN,
            slack,
            detail: format!("singular estimates meet oppositely along {u:?}"),
        });
    }
    if a.bounded_part.is_empty() || b.bounded_part.is_empty() || s.bounded_part.is_empty() {
        return Ok(InclusionReport {
            status: InclusionStatus::Inconclusive,
            max_violation: f64::NAN,
            slack,
            detail: "a bounded part is empty".into(),
        });
    }
    let rhs = geometry::minkowski_sum(&a.bounded_part, &b.bounded_part)?;
    let v = geometry::hausdorff_one_sided(&s.bounded_part, &rhs)?;
    Ok(InclusionReport {
        status: if v <= slack { InclusionStatus::Holds } else { InclusionStatus::Violated },
        max_violation: v,
        slack,
        detail: format!("{} limit points on the left, {} on the right", s.bounded_part.len(), rhs.len()),
    })
}

/// Checks `∂(max e_i)(∞) ⊆ co ∪ ∂e_i(∞)` and `∂^∞(max e_i)(∞) = {0}`.
pub fn max_rule_at_infinity(
    es: &[Expr],
    plan: &SamplingPlan,
    slack: f64,
) -> Result<InclusionReport, AsymptoticError> {
    if es.is_empty() {
        return Err(AsymptoticError::Plan("max of an empty family".into()));
    }
    let mut union = Vec::new();
    for (i, e) in es.iter().enumerate() {
        let a = subdiff_at_infinity(e, plan)?;
        if !a.lipschitz_at_infinity {
            return Ok(InclusionReport {
                status: InclusionStatus::HypothesisUnmet,
                max_violation: f64::NAN,
                slack,
                detail: format!("function {} is not Lipschitz at infinity in the estimate", i + 1),
            });
        }
        union.extend(a.bounded_part.points().iter().cloned());
    }
    let hull = VPolytope::new(plan.dim(), union, 0.0)?;
    let m = subdiff_at_infinity(&Expr::max_of(es), plan)?;
    if !m.recession_cone.is_trivial() {
        return Ok(InclusionReport {
            status: InclusionStatus::Violated,
            max_violation: f64::INFINITY,
            slack,
            detail: "singular estimate of the max is not {0}".into(),
        });
    }
    let v = geometry::hausdorff_one_sided(&m.bounded_part, &hull)?;
    Ok(InclusionReport {
        status: if v <= slack { InclusionStatus::Holds } else { InclusionStatus::Violated },
        max_violation: v,
        slack,
        detail: format!("{} limit points of the max against {} hull points", m.bounded_part.len(), hull.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn est(text: &str, n: usize) -> AsymptoticSet {
        subdiff_at_infinity(&Expr::parse(text, n).unwrap(), &SamplingPlan::default_for(n)).unwrap()
    }

    fn sorted(p: &VPolytope) -> Vec<Vec<f64>> {
        cluster(p.points().to_vec(), 0.0)
    }

    #[test]
    fn plan_validation() {
        let mut p = SamplingPlan::default_for(2);
        assert!(p.validate().is_ok());
        assert_eq!(p.directions.len(), 16);
        p.radii_ratio = 1.0;
        assert!(p.validate().is_err());
        let mut p = SamplingPlan::default_for(2);
        p.radii_steps = 7;
        assert!(p.validate().is_err());
        let mut p = SamplingPlan::default_for(2);
        p.directions.truncate(3);
        assert!(p.validate().is_err());
        let mut p = SamplingPlan::default_for(2);
        p.directions[0] = vec![1.0, 1.0];
        assert!(p.validate().is_err());
        let mut p = SamplingPlan::default_for(1);
        p.escape_floor = 1e300;
        assert!(p.validate().is_err());
        assert_eq!(SamplingPlan::default_for(9).directions.len(), 18);
    }

    #[test]
    fn decaying_function_has_zero_limit() {
        let a = est("1/(abs(x1)+1)", 1);
        assert_eq!(a.bounded_part.len(), 1);
        assert!(norm(&a.bounded_part.points()[0]) < 1e-6);
        assert!(a.recession_cone.is_trivial() && a.lipschitz_at_infinity);
    }

    #[test]
    fn identity_and_abs() {
        assert_eq!(sorted(&est("x1", 1).bounded_part), vec![vec![1.0]]);
        let a = est("abs(x1)", 1);
        assert_eq!(sorted(&a.bounded_part), vec![vec![-1.0], vec![1.0]]);
        assert!(a.lipschitz_at_infinity);
        let (l, r) = a.lipschitz_constants.unwrap();
        assert_eq!(l, 1.0);
        assert!(r >= 1e3);
    }

    #[test]
    fn exponential_escapes_one_way() {
        let a = est("exp(x1)", 1);
        assert!(a.bounded_part.distance_to(&[0.0]) < 1e-6);
        assert_eq!(a.recession_cone.generators(), &[vec![1.0]]);
        assert!(!a.lipschitz_at_infinity && a.lipschitz_constants.is_none());
    }

    #[test]
    fn quadratic_recession_is_a_line() {
        let a = est("x1^2 + 1", 1);
        assert!(a.bounded_part.is_empty());
        let mut g = a.recession_cone.generators().to_vec();
        g.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(g, vec![vec![-1.0], vec![1.0]]);
    }

    #[test]
    fn invalid_directions_are_flagged_not_fatal() {
        let a = est("log(x1)", 1);
        assert!(a.diagnostics.iter().any(|d| d.status == RayStatus::Invalid));
        assert!(a.bounded_part.distance_to(&[0.0]) < 1e-6);
        let all_bad = subdiff_at_infinity(&Expr::parse("log(-x1^2)", 1).unwrap(), &SamplingPlan::default_for(1));
        assert!(matches!(all_bad, Err(AsymptoticError::AllDirectionsInvalid(_))));
    }

    #[test]
    fn deterministic_across_runs() {
        let e = Expr::parse("max(x1, x2) + 1/(x1^2 + x2^2 + 1)", 2).unwrap();
        let p = SamplingPlan::default_for(2);
        let a = serde_json::to_string(&subdiff_at_infinity(&e, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&subdiff_at_infinity(&e, &p).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normal_cones_at_infinity() {
        let p1 = SamplingPlan::default_for(1);
        let p2 = SamplingPlan::default_for(2);
        let a = normal_cone_at_infinity(&GroundSet::full(2), &p2).unwrap();
        assert!(a.recession_cone.is_trivial());
        assert_eq!(a.bounded_part.points(), &[vec![0.0, 0.0]]);
        let half = GroundSet::polyhedron(vec![vec![0.0, 1.0]], vec![0.0]).unwrap();
        let a = normal_cone_at_infinity(&half, &p2).unwrap();
        assert_eq!(a.recession_cone.generators(), &[vec![0.0, 1.0]]);
        let neg = GroundSet::boxed(vec![f64::NEG_INFINITY], vec![0.0]).unwrap();
        assert!(normal_cone_at_infinity(&neg, &p1).unwrap().recession_cone.is_trivial());
        let unit_box = GroundSet::boxed(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(normal_cone_at_infinity(&unit_box, &p1), Err(AsymptoticError::GroundBounded(_))));
    }

    #[test]
    fn sum_rule_examples() {
        let p = SamplingPlan::default_for(1);
        let x = Expr::parse("x1", 1).unwrap();
        let f1 = Expr::parse("1/(abs(x1)+1)", 1).unwrap();
        for (a, b) in [(&f1, &Expr::constant(1, 0.0)), (&x, &f1), (&x, &x.neg())] {
            let r = check_sum_rule(a, b, &p, DEFAULT_SLACK).unwrap();
            assert_eq!(r.status, InclusionStatus::Holds, "{r:?}");
            assert!(r.max_violation <= 1e-6);
        }
        // x^2 and -x^2 have opposite singular parts
        let q = Expr::parse("x1^2", 1).unwrap();
        let r = check_sum_rule(&q, &q.neg(), &p, DEFAULT_SLACK).unwrap();
        assert_eq!(r.status, InclusionStatus::Inconclusive);
    }

    #[test]
    fn max_rule_examples() {
        let p = SamplingPlan::default_for(1);
        let x = Expr::parse("x1", 1).unwrap();
        let r = max_rule_at_infinity(&[x.clone(), x.neg()], &p, DEFAULT_SLACK).unwrap();
        assert_eq!(r.status, InclusionStatus::Holds);
        let f1 = Expr::parse("1/(abs(x1)+1)", 1).unwrap();
        let r = max_rule_at_infinity(&[f1, Expr::constant(1, 0.0)], &p, DEFAULT_SLACK).unwrap();
        assert_eq!(r.status, InclusionStatus::Holds);
        let r = max_rule_at_infinity(&[x.scale(3.0)], &p, DEFAULT_SLACK).unwrap();
        assert_eq!(r.status, InclusionStatus::Holds);
        assert_eq!(r.max_violation, 0.0);
        let e = Expr::parse("exp(x1)", 1).unwrap();
        let r = max_rule_at_infinity(&[x, e], &p, DEFAULT_SLACK).unwrap();
        assert_eq!(r.status, InclusionStatus::HypothesisUnmet);
    }
}
