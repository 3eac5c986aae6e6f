//! Minimax problems `min max f_i(x)` subject to `g_j(x) ≤ 0`, `x ∈ Ω`:
//! constraint qualification at infinity, KKT certificates at infinity, and
//! the sufficient condition for a nonempty compact solution set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{self, AsymptoticError, AsymptoticSet, SamplingPlan};
use crate::descent::{self, DescentError, DescentOptions, EscapeEvidence, Trajectory, TrajectoryStatus};
use crate::expr::{Expr, ExprError};
use crate::geometry::{self, norm, GeometryError, MembershipCertificate, VCone, VPolytope, DEFAULT_LP_TOL};
use crate::subdiff_point::{GroundSet, SubdiffError};

/// Constraint values up to this count as satisfied.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KktError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Descent(#[from] DescentError),
    #[error(transparent)]
    Subdiff(#[from] SubdiffError),
}

impl From<ExprError> for KktError {
    fn from(e: ExprError) -> Self {
        KktError::Subdiff(SubdiffError::Expr(e))
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxProblem {
    pub objectives: Vec<Expr>,
    pub constraints: Vec<Expr>,
    pub ground: GroundSet,
}

impl MinimaxProblem {
    pub fn new(objectives: Vec<Expr>, constraints: Vec<Expr>, ground: GroundSet) -> Result<Self, KktError> {
        let Some(first) = objectives.first() else {
            return Err(KktError::Problem("at least one objective is required".into()));
        };
        let n = first.dim();
        if objectives.iter().chain(&constraints).any(|e| e.dim() != n) {
            return Err(KktError::Problem("all expressions must share one dimension".into()));
        }
        ground.validate()?;
        if let Some(d) = ground.dim() {
            if d != n {
                return Err(KktError::Problem(format!("ground set lives in R^{d}, expressions in R^{n}")));
            }
        }
        Ok(MinimaxProblem { objectives, constraints, ground })
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    /// `φ(x) = max_i f_i(x)`.
    pub fn phi(&self, x: &[f64]) -> Result<f64, ExprError> {
        let mut best = f64::NEG_INFINITY;
        for f in &self.objectives {
            best = best.max(f.eval(x)?);
        }
        Ok(best)
    }

    /// `φ` as a single expression.
    pub fn phi_expr(&self) -> Expr {
        if self.objectives.len() == 1 {
            self.objectives[0].clone()
        } else {
            Expr::max_of(&self.objectives)
        }
    }

    pub fn is_feasible(&self, x: &[f64]) -> Result<bool, ExprError> {
        if !self.ground.contains(x) {
            return Ok(false);
        }
        for g in &self.constraints {
            if g.eval(x)? > CONSTRAINT_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Estimates of every set at infinity the analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticData {
    pub objectives: Vec<AsymptoticSet>,
    pub constraints: Vec<AsymptoticSet>,
    /// `None` when Ω looked bounded.
    pub ground: Option<AsymptoticSet>,
}

impl AsymptoticData {
    fn ground_cone(&self, dim: usize) -> VCone {
        self.ground.as_ref().map_or_else(|| VCone::zero(dim), |g| g.recession_cone.clone())
    }

    fn constraint_cones(&self) -> Vec<VCone> {
        self.constraints.iter().map(|c| VCone::over_set(&c.bounded_part, 1e-12)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandingAssumptions {
    /// Feasible points were found beyond the escape floor.
    pub feasible_set_unbounded: bool,
    pub far_feasible_samples: usize,
    pub objectives_lipschitz: Vec<bool>,
    pub constraints_lipschitz: Vec<bool>,
    /// `None` when the descent probe could not run.
    pub bounded_below: Option<bool>,
    /// Lowest `φ` seen on feasible points by the probe.
    pub record_phi: Option<f64>,
    pub notes: Vec<String>,
}

impl StandingAssumptions {
    pub fn lipschitz(&self) -> bool {
        self.objectives_lipschitz.iter().chain(&self.constraints_lipschitz).all(|b| *b)
    }

    pub fn all_met(&self) -> bool {
        self.feasible_set_unbounded && self.lipschitz() && self.bounded_below != Some(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CqStatus {
    Holds,
    Fails,
    HypothesisUnmet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqVerdict {
    pub status: CqStatus,
    /// Violating multipliers when the CQ fails.
    pub beta: Option<Vec<f64>>,
    pub certificate: Option<MembershipCertificate>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KktVerdict {
    /// `0 ∈ Σ α_i ∂f_i(∞) + Σ β_j ∂g_j(∞) + N_Ω(∞)` with the hypotheses met.
    Certified,
    /// The inclusion fails: no minimizing sequence escapes to infinity.
    Violated,
    HypothesisUnmet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SufficiencyVerdict {
    NonemptyCompact,
    Inconclusive,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentSummary {
    pub start: Vec<f64>,
    pub status: String,
    pub final_x: Vec<f64>,
    pub final_phi: f64,
    pub max_norm: f64,
    pub iterations: usize,
}

impl DescentSummary {
    fn of(start: &[f64], t: &Trajectory) -> DescentSummary {
        let last = t.iterates.last().expect("trajectories start with x0");
        DescentSummary {
            start: start.to_vec(),
            status: t.status.label().into(),
            final_x: last.x.clone(),
            final_phi: last.phi,
            max_norm: t.iterates.iter().map(|it| norm(&it.x)).fold(0.0, f64::max),
            iterations: t.iterates.len() - 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub runs: Vec<DescentSummary>,
    pub all_converged: bool,
    /// Every iterate stayed below the escape floor.
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    pub verdict: SufficiencyVerdict,
    pub membership: Option<MembershipCertificate>,
    /// For objectives that are not Lipschitz at infinity: the singular
    /// estimate of `φ` meets `−(Σ pos ∂g_j(∞) + N_Ω(∞))` only at 0.
    pub coercivity: Option<bool>,
    pub cross_validation: Option<CrossValidation>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub assumptions: StandingAssumptions,
    pub cq: CqVerdict,
    pub verdict: KktVerdict,
    pub membership: MembershipCertificate,
    /// Normalized to the simplex when the membership is feasible.
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    /// Set when the CQ does not hold; the certificate then proves nothing.
    pub unreliable: bool,
    pub message: String,
    pub sets: AsymptoticData,
    /// Cross-reference to a descent run that escaped, if one did.
    pub escape: Option<EscapeEvidence>,
    pub probe: Option<DescentSummary>,
}

/// Runs the analyses with one plan and tolerance set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analyzer {
    pub plan: SamplingPlan,
    pub lp_tol: f64,
    pub descent: DescentOptions,
    /// Run descent from seeded starts to back a sufficiency verdict.
    pub cross_validate: bool,
    pub cross_validation_starts: usize,
}

impl Analyzer {
    pub fn new(plan: SamplingPlan) -> Analyzer {
        let descent = DescentOptions::from_plan(&plan);
        Analyzer { plan, lp_tol: DEFAULT_LP_TOL, descent, cross_validate: true, cross_validation_starts: 8 }
    }

    pub fn estimate(&self, p: &MinimaxProblem) -> Result<AsymptoticData, KktError> {
        let objectives =
            p.objectives.iter().map(|f| asymptotics::subdiff_at_infinity(f, &self.plan)).collect::<Result<_, _>>()?;
        let constraints =
            p.constraints.iter().map(|g| asymptotics::subdiff_at_infinity(g, &self.plan)).collect::<Result<_, _>>()?;
        let ground = match asymptotics::normal_cone_at_infinity(&p.ground, &self.plan) {
            Ok(a) => Some(a),
            Err(AsymptoticError::GroundBounded(_)) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(AsymptoticData { objectives, constraints, ground })
    }

    /// Start for probes: the origin moved onto Ω.
    fn origin(&self, p: &MinimaxProblem) -> Vec<f64> {
        p.ground.project(&vec![0.0; p.dim()])
    }

    pub fn assumptions(&self, p: &MinimaxProblem, data: &AsymptoticData) -> (StandingAssumptions, Option<Trajectory>) {
        let mut notes = Vec::new();
        let far: Vec<Vec<f64>> = asymptotics::far_points(&p.ground, &self.plan)
            .into_iter()
            .map(|(_, _, y)| y)
            .filter(|y| matches!(p.is_feasible(y), Ok(true)))
            .collect();
        if data.ground.is_none() {
            notes.push("Ω appears bounded".into());
        }
        let mut record: Option<f64> = None;
        for y in &far {
            if let Ok(v) = p.phi(y) {
                record = Some(record.map_or(v, |r: f64| r.min(v)));
            }
        }
        let start = self.origin(p);
        let (bounded_below, trajectory) = match descent::minimize(p, &start, &self.descent) {
            Ok(t) => {
                for it in t.iterates.iter().filter(|it| it.feasible) {
                    record = Some(record.map_or(it.phi, |r: f64| r.min(it.phi)));
                }
                let unbounded = matches!(t.status, TrajectoryStatus::UnboundedBelow { .. })
                    || record.is_some_and(|r| r < descent::UNBOUNDED_BELOW);
                (Some(!unbounded), Some(t))
            }
            Err(e) => {
                notes.push(format!("descent probe failed: {e}"));
                let unbounded = record.is_some_and(|r| r < descent::UNBOUNDED_BELOW);
                (if unbounded { Some(false) } else { None }, None)
            }
        };
        let a = StandingAssumptions {
            feasible_set_unbounded: !far.is_empty(),
            far_feasible_samples: far.len(),
            objectives_lipschitz: data.objectives.iter().map(|a| a.lipschitz_at_infinity).collect(),
            constraints_lipschitz: data.constraints.iter().map(|a| a.lipschitz_at_infinity).collect(),
            bounded_below,
            record_phi: record,
            notes,
        };
        (a, trajectory)
    }

    pub fn cq_from(&self, p: &MinimaxProblem, data: &AsymptoticData) -> Result<CqVerdict, KktError> {
        if data.ground.is_none() {
            return Ok(CqVerdict {
                status: CqStatus::HypothesisUnmet,
                beta: None,
                certificate: None,
                detail: "Ω appears bounded, so N_Ω(∞) is undefined".into(),
            });
        }
        if let Some(j) = data.constraints.iter().position(|c| !c.lipschitz_at_infinity) {
            return Ok(CqVerdict {
                status: CqStatus::HypothesisUnmet,
                beta: None,
                certificate: None,
                detail: format!("constraint {} is not Lipschitz at infinity in the estimate", j + 1),
            });
        }
        if p.constraints.is_empty() {
            return Ok(CqVerdict {
                status: CqStatus::Holds,
                beta: None,
                certificate: None,
                detail: "no constraints: the qualification holds vacuously".into(),
            });
        }
        let cert = geometry::zero_in_sum(&[], &data.constraint_cones(), &data.ground_cone(p.dim()), self.lp_tol)?;
        Ok(if cert.feasible {
            CqVerdict {
                status: CqStatus::Fails,
                beta: Some(cert.beta.clone()),
                detail: "a nonzero nonnegative combination of constraint limits and normals reaches 0".into(),
                certificate: Some(cert),
            }
        } else {
            CqVerdict {
                status: CqStatus::Holds,
                beta: None,
                detail: format!("pure cone system infeasible (margin {:.3e})", cert.margin),
                certificate: Some(cert),
            }
        })
    }

    pub fn check_cq(&self, p: &MinimaxProblem) -> Result<CqVerdict, KktError> {
        let data = self.estimate(p)?;
        self.cq_from(p, &data)
    }

    /// `0 ∈ co ∪ ∂f_i(∞) + Σ pos ∂g_j(∞) + N_Ω(∞)`.
    pub fn membership(&self, p: &MinimaxProblem, data: &AsymptoticData) -> Result<MembershipCertificate, KktError> {
        let hulls: Vec<VPolytope> = data.objectives.iter().map(|a| a.bounded_part.clone()).collect();
        Ok(geometry::zero_in_sum(&hulls, &data.constraint_cones(), &data.ground_cone(p.dim()), self.lp_tol)?)
    }

    pub fn kkt_at_infinity(&self, p: &MinimaxProblem) -> Result<KktReport, KktError> {
        let data = self.estimate(p)?;
        let (assumptions, probe) = self.assumptions(p, &data);
        self.kkt_from_parts(p, data, assumptions, probe)
    }

    pub fn kkt_from_parts(
        &self,
        p: &MinimaxProblem,
        data: AsymptoticData,
        assumptions: StandingAssumptions,
        probe: Option<Trajectory>,
    ) -> Result<KktReport, KktError> {
        let cq = self.cq_from(p, &data)?;
        let cert = self.membership(p, &data)?;
        let mut unmet = Vec::new();
        if !assumptions.feasible_set_unbounded {
            unmet.push("the feasible set looks bounded".to_string());
        }
        for (i, ok) in assumptions.objectives_lipschitz.iter().enumerate() {
            if !ok {
                unmet.push(format!("objective {} is not Lipschitz at infinity", i + 1));
            }
        }
        for (j, ok) in assumptions.constraints_lipschitz.iter().enumerate() {
            if !ok {
                unmet.push(format!("constraint {} is not Lipschitz at infinity", j + 1));
            }
        }
        if assumptions.bounded_below == Some(false) {
            unmet.push("φ is unbounded below on F".into());
        }
        if cq.status != CqStatus::Holds {
            unmet.push(format!("CQ at infinity: {:?}", cq.status).to_lowercase());
        }
        let inclusion = if cert.feasible { "holds" } else { "fails" };
        let (verdict, message) = if !unmet.is_empty() {
            (KktVerdict::HypothesisUnmet, format!("hypotheses unmet ({}); the inclusion {inclusion}", unmet.join("; ")))
        } else if cert.feasible {
            (KktVerdict::Certified, "KKT conditions at infinity hold".to_string())
        } else {
            (
                KktVerdict::Violated,
                "necessary condition violated: no minimizing sequence escapes to infinity".to_string(),
            )
        };
        let escape = probe.as_ref().and_then(|t| descent::escape_evidence(t, &self.plan).ok());
        let start = self.origin(p);
        Ok(KktReport {
            alpha: cert.feasible.then(|| cert.alpha.clone()),
            beta: cert.feasible.then(|| cert.beta.clone()),
            unreliable: cq.status != CqStatus::Holds,
            assumptions,
            cq,
            verdict,
            membership: cert,
            message,
            sets: data,
            escape,
            probe: probe.as_ref().map(|t| DescentSummary::of(&start, t)),
        })
    }

    pub fn sufficiency_check(&self, p: &MinimaxProblem) -> Result<SufficiencyReport, KktError> {
        let data = self.estimate(p)?;
        let (assumptions, _) = self.assumptions(p, &data);
        let cq = self.cq_from(p, &data)?;
        self.sufficiency_from(p, &data, &assumptions, &cq)
    }

    fn sufficiency_from(
        &self,
        p: &MinimaxProblem,
        data: &AsymptoticData,
        assumptions: &StandingAssumptions,
        cq: &CqVerdict,
    ) -> Result<SufficiencyReport, KktError> {
        let mut notes = Vec::new();
        let na = |notes: Vec<String>| SufficiencyReport {
            verdict: SufficiencyVerdict::NotApplicable,
            membership: None,
            coercivity: None,
            cross_validation: None,
            notes,
        };
        if cq.status != CqStatus::Holds {
            notes.push(format!("CQ at infinity does not hold ({:?})", cq.status));
            return Ok(na(notes));
        }
        if assumptions.bounded_below == Some(false) {
            notes.push("φ is unbounded below on F".into());
            return Ok(na(notes));
        }
        let cert = self.membership(p, data)?;
        if cert.feasible {
            notes.push("0 lies in the asymptotic sum; this test cannot decide".into());
            return Ok(SufficiencyReport {
                verdict: SufficiencyVerdict::Inconclusive,
                membership: Some(cert),
                coercivity: None,
                cross_validation: None,
                notes,
            });
        }
        let mut verdict = SufficiencyVerdict::NonemptyCompact;
        let mut coercivity = None;
        if !assumptions.objectives_lipschitz.iter().all(|b| *b) {
            let phi = asymptotics::subdiff_at_infinity(&p.phi_expr(), &self.plan)?;
            let cones = data.constraint_cones();
            let ground = data.ground_cone(p.dim());
            let mut other: Vec<&VCone> = cones.iter().collect();
            other.push(&ground);
            let meet = geometry::opposite_cones_meet(&[&phi.recession_cone], &other, self.lp_tol)?;
            coercivity = Some(meet.is_none());
            notes.push(
                "objectives are not Lipschitz at infinity; growth was read from the singular estimate of φ".into(),
            );
            if meet.is_some() {
                verdict = SufficiencyVerdict::Inconclusive;
                notes.push("singular estimate of φ meets the constraint and normal cones oppositely".into());
            }
        }
        let mut cross = None;
        if verdict == SufficiencyVerdict::NonemptyCompact && self.cross_validate {
            let cv = self.cross_validation(p)?;
            if !(cv.all_converged && cv.bounded) {
                verdict = SufficiencyVerdict::Inconclusive;
                notes.push("descent from the seeded starts did not stay bounded and converge".into());
            }
            cross = Some(cv);
        }
        if verdict == SufficiencyVerdict::NonemptyCompact {
            notes.push("solution set nonempty and compact (certified at estimate level)".into());
        }
        Ok(SufficiencyReport { verdict, membership: Some(cert), coercivity, cross_validation: cross, notes })
    }

    /// Descent from seeded starts in `[-10, 10]^n`, projected onto Ω.
    pub fn cross_validation(&self, p: &MinimaxProblem) -> Result<CrossValidation, KktError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.plan.seed ^ 0x5707_0C0D);
        let starts: Vec<Vec<f64>> = (0..self.cross_validation_starts)
            .map(|_| p.ground.project(&(0..p.dim()).map(|_| rng.random_range(-10.0..10.0)).collect::<Vec<f64>>()))
            .collect();
        let runs = starts
            .iter()
            .map(|s| descent::minimize(p, s, &self.descent).map(|t| DescentSummary::of(s, &t)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CrossValidation {
            all_converged: runs.iter().all(|r| r.status == "converged"),
            bounded: runs.iter().all(|r| r.max_norm < self.plan.escape_floor),
            runs,
        })
    }

    /// Assumptions, CQ, KKT certificate and sufficiency in one pass.
    pub fn analyze(&self, p: &MinimaxProblem) -> Result<(KktReport, SufficiencyReport), KktError> {
        let data = self.estimate(p)?;
        let (assumptions, probe) = self.assumptions(p, &data);
        let report = self.kkt_from_parts(p, data, assumptions, probe)?;
        let suff = self.sufficiency_from(p, &report.sets, &report.assumptions, &report.cq)?;
        Ok((report, suff))
    }
}

pub fn check_cq(p: &MinimaxProblem, plan: &SamplingPlan) -> Result<CqVerdict, KktError> {
    Analyzer::new(plan.clone()).check_cq(p)
}

pub fn kkt_at_infinity(p: &MinimaxProblem, plan: &SamplingPlan) -> Result<KktReport, KktError> {
    Analyzer::new(plan.clone()).kkt_at_infinity(p)
}

pub fn sufficiency_check(p: &MinimaxProblem, plan: &SamplingPlan) -> Result<SufficiencyReport, KktError> {
    Analyzer::new(plan.clone()).sufficiency_check(p)
}
