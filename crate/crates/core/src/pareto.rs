//! Vector problems `min (f_1, ..., f_m)` over `F`: weak Pareto values at
//! infinity via the shifted minimax problem `max_i (f_i − ȳ_i)`, and the
//! existence checks for weak Pareto and Pareto solution sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::SamplingPlan;
use crate::descent::{self, EscapeEvidence, TrajectoryStatus};
use crate::expr::{Expr, ExprError};
use crate::kkt::{Analyzer, CqStatus, KktError, KktReport, MinimaxProblem, SufficiencyReport, SufficiencyVerdict};
use crate::subdiff_point::GroundSet;

/// `φ̂` limits within this of 0 count as reaching the value.
pub const LIMIT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParetoError {
    #[error("a vector problem needs at least two objectives, got {0}")]
    TooFewObjectives(usize),
    #[error("candidate value has {got} entries for {want} objectives")]
    ValueLength { want: usize, got: usize },
    #[error("candidate value must be finite")]
    NonFinite,
    #[error(transparent)]
    Kkt(#[from] KktError),
}

impl From<ExprError> for ParetoError {
    fn from(e: ExprError) -> Self {
        ParetoError::Kkt(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct VectorProblem {
    pub objectives: Vec<Expr>,
    pub constraints: Vec<Expr>,
    pub ground: GroundSet,
}

impl VectorProblem {
    pub fn new(objectives: Vec<Expr>, constraints: Vec<Expr>, ground: GroundSet) -> Result<Self, ParetoError> {
        if objectives.len() < 2 {
            return Err(ParetoError::TooFewObjectives(objectives.len()));
        }
        // reuse the minimax validation
        let p = MinimaxProblem::new(objectives, constraints, ground)?;
        Ok(VectorProblem { objectives: p.objectives, constraints: p.constraints, ground: p.ground })
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    /// The scalar problem `min max f_i` over the same feasible set.
    pub fn as_minimax(&self) -> MinimaxProblem {
        MinimaxProblem {
            objectives: self.objectives.clone(),
            constraints: self.constraints.clone(),
            ground: self.ground.clone(),
        }
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, ExprError> {
        self.objectives.iter().map(|f| f.eval(x)).collect()
    }
}

/// `min max (f_i − ȳ_i)` over the same feasible set.
pub fn build_auxiliary(vp: &VectorProblem, ybar: &[f64]) -> Result<MinimaxProblem, ParetoError> {
    if ybar.len() != vp.objectives.len() {
        return Err(ParetoError::ValueLength { want: vp.objectives.len(), got: ybar.len() });
    }
    if ybar.iter().any(|v| !v.is_finite()) {
        return Err(ParetoError::NonFinite);
    }
    let objectives = vp.objectives.iter().zip(ybar).map(|(f, y)| f.shift(*y)).collect();
    Ok(MinimaxProblem { objectives, constraints: vp.constraints.clone(), ground: vp.ground.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakValueVerdict {
    /// `φ̂ ≥ 0` on every sample and a feasible sequence escapes with `φ̂ → 0`.
    Consistent,
    /// A feasible point strictly dominates the candidate.
    Refuted,
    /// Nothing contradicts the candidate, but no escape with `φ̂ → 0` was found.
    EvidenceFailed,
    /// CQ at infinity does not hold.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refutation {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueEvidence {
    /// Lowest `φ̂` seen on feasible points.
    pub auxiliary_infimum_estimate: Option<f64>,
    pub nonnegative_on_samples: bool,
    pub samples_checked: usize,
    pub descent_status: String,
    pub escape: Option<EscapeEvidence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionSetVerdict {
    NonemptyCompact,
    NonemptyBounded,
    Inconclusive,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSetReport {
    /// Weak Pareto solutions.
    pub weak: SolutionSetVerdict,
    /// Pareto solutions. Never stronger than "nonempty and bounded".
    pub pareto: SolutionSetVerdict,
    pub underlying: SufficiencyReport,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoReport {
    pub candidate_value: Vec<f64>,
    pub verdict: WeakValueVerdict,
    pub evidence: Option<WeakValueEvidence>,
    pub refutation: Option<Refutation>,
    pub kkt: Option<KktReport>,
    pub solution_set: Option<SolutionSetReport>,
    pub notes: Vec<String>,
}

/// Candidate check for a weak Pareto value at infinity.
pub fn check_weak_value_at_infinity(
    vp: &VectorProblem,
    ybar: &[f64],
    plan: &SamplingPlan,
) -> Result<ParetoReport, ParetoError> {
    check_weak_value_with(&Analyzer::new(plan.clone()), vp, ybar)
}

pub fn check_weak_value_with(a: &Analyzer, vp: &VectorProblem, ybar: &[f64]) -> Result<ParetoReport, ParetoError> {
    let aux = build_auxiliary(vp, ybar)?;
    let data = a.estimate(&aux)?;
    let cq = a.cq_from(&aux, &data)?;
    if cq.status != CqStatus::Holds {
        return Ok(ParetoReport {
            candidate_value: ybar.to_vec(),
            verdict: WeakValueVerdict::NotApplicable,
            evidence: None,
            refutation: None,
            kkt: None,
            solution_set: None,
            notes: vec![format!("CQ at infinity: {}", cq.detail)],
        });
    }
    let (assumptions, probe) = a.assumptions(&aux, &data);
    let tol = 1e-9 * (1.0 + ybar.iter().map(|v| v.abs()).fold(0.0, f64::max));

    // feasible samples: every ray point moved onto Ω, plus the descent iterates
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for d in &a.plan.directions {
        for r in a.plan.radii() {
            samples.push(aux.ground.project(&d.iter().map(|v| v * r).collect::<Vec<f64>>()));
        }
    }
    samples.push(aux.ground.project(&vec![0.0; vp.dim()]));
    if let Some(t) = &probe {
        samples.extend(t.iterates.iter().map(|it| it.x.clone()));
    }
    let mut checked = 0;
    let mut lowest: Option<f64> = None;
    let mut refutation = None;
    for x in &samples {
        if !matches!(aux.is_feasible(x), Ok(true)) {
            continue;
        }
        let Ok(v) = aux.phi(x) else { continue };
        checked += 1;
        lowest = Some(lowest.map_or(v, |l: f64| l.min(v)));
        if v < -tol && refutation.is_none() {
            let values = vp.values(x)?;
            // recheck by direct evaluation
            if values.iter().zip(ybar).all(|(f, y)| *f < y - tol) {
                refutation = Some(Refutation { x: x.clone(), values });
            }
        }
    }
    let escape = probe.as_ref().and_then(|t| descent::escape_evidence(t, &a.plan).ok());
    let descent_status = probe.as_ref().map_or("unavailable".to_string(), |t| t.status.label().to_string());
    let nonnegative = refutation.is_none() && lowest.is_some_and(|l| l >= -tol);
    let mut notes = Vec::new();
    let verdict = if refutation.is_some() {
        notes.push("a feasible point strictly dominates the candidate: not a weak Pareto value".into());
        WeakValueVerdict::Refuted
    } else {
        match (&escape, probe.as_ref().map(|t| &t.status)) {
            (Some(e), _) if nonnegative && e.phi_limit.abs() <= LIMIT_TOL => WeakValueVerdict::Consistent,
            (Some(e), _) => {
                notes.push(format!("escaping sequence reaches φ̂ ≈ {:.6e}, not 0", e.phi_limit));
                WeakValueVerdict::EvidenceFailed
            }
            (None, Some(TrajectoryStatus::Converged { phi, .. })) => {
                notes.push(format!("descent settled at a finite point with φ̂ = {phi:.6e}; no escape found"));
                WeakValueVerdict::EvidenceFailed
            }
            _ => {
                notes.push("no escaping sequence found".into());
                WeakValueVerdict::EvidenceFailed
            }
        }
    };
    let kkt = a.kkt_from_parts(&aux, data, assumptions, probe)?;
    Ok(ParetoReport {
        candidate_value: ybar.to_vec(),
        verdict,
        evidence: Some(WeakValueEvidence {
            auxiliary_infimum_estimate: lowest,
            nonnegative_on_samples: nonnegative,
            samples_checked: checked,
            descent_status,
            escape,
        }),
        refutation,
        kkt: Some(kkt),
        solution_set: None,
        notes,
    })
}

/// Both solution-set checks: the same membership test read for weak Pareto
/// solutions (nonempty and compact) and for Pareto solutions (nonempty and
/// bounded). The caller asserts that the value sets are nonempty.
pub fn solution_set_checks(
    a: &Analyzer,
    vp: &VectorProblem,
    values_nonempty: bool,
) -> Result<SolutionSetReport, ParetoError> {
    let underlying = a.sufficiency_check(&vp.as_minimax())?;
    let mut notes = Vec::new();
    if !values_nonempty {
        notes.push("the value sets were not asserted nonempty".into());
        return Ok(SolutionSetReport {
            weak: SolutionSetVerdict::NotApplicable,
            pareto: SolutionSetVerdict::NotApplicable,
            underlying,
            notes,
        });
    }
    let (weak, pareto) = match underlying.verdict {
        SufficiencyVerdict::NonemptyCompact => {
            notes.push("weak Pareto solution set nonempty and compact (certified at estimate level)".into());
            notes.push("Pareto solution set nonempty and bounded; closedness is not claimed".into());
            (SolutionSetVerdict::NonemptyCompact, SolutionSetVerdict::NonemptyBounded)
        }
        SufficiencyVerdict::Inconclusive => (SolutionSetVerdict::Inconclusive, SolutionSetVerdict::Inconclusive),
        SufficiencyVerdict::NotApplicable => (SolutionSetVerdict::NotApplicable, SolutionSetVerdict::NotApplicable),
    };
    Ok(SolutionSetReport { weak, pareto, underlying, notes })
}

pub fn weak_solution_set_check(vp: &VectorProblem, plan: &SamplingPlan) -> Result<SolutionSetVerdict, ParetoError> {
    Ok(solution_set_checks(&Analyzer::new(plan.clone()), vp, true)?.weak)
}

pub fn pareto_solution_set_check(vp: &VectorProblem, plan: &SamplingPlan) -> Result<SolutionSetVerdict, ParetoError> {
    Ok(solution_set_checks(&Analyzer::new(plan.clone()), vp, true)?.pareto)
}

/// Nondominated objective vectors among feasible ray samples: candidates for
/// `ȳ` when no value is supplied.
pub fn candidate_values(vp: &VectorProblem, plan: &SamplingPlan) -> Vec<Vec<f64>> {
    let p = vp.as_minimax();
    let mut vals: Vec<Vec<f64>> = Vec::new();
    for d in &plan.directions {
        for r in plan.radii() {
            let x = vp.ground.project(&d.iter().map(|v| v * r).collect::<Vec<f64>>());
            if matches!(p.is_feasible(&x), Ok(true)) {
                if let Ok(v) = vp.values(&x) {
                    vals.push(v);
                }
            }
        }
    }
    let dominated = |a: &Vec<f64>, b: &Vec<f64>| b.iter().zip(a).all(|(x, y)| x <= y) && b != a;
    let mut out: Vec<Vec<f64>> = vals.iter().filter(|a| !vals.iter().any(|b| dominated(a, b))).cloned().collect();
    out.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    out.dedup();
    out
}
