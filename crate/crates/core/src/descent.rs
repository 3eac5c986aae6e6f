//! Minimizing sequences for `φ = max f_i` over `F`, escape detection, and
//! Ekeland-type witnesses of approximate stationarity.
//!
//! The search direction is minus the least-norm element of an ε-enlarged
//! subdifferential: every objective within ε of the max contributes its
//! active-branch gradients, and constraints enter through the exact penalty
//! `c · Σ max(g_j, 0)`. Steps are normalized and sized by backtracking with
//! doubling on success. Ω is handled by projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::SamplingPlan;
use crate::expr::ExprError;
use crate::geometry::{self, dist, norm};
use crate::kkt::MinimaxProblem;
use crate::subdiff_point::{normal_cone_at, subdiff_at, SubdiffError};

/// `φ` below this is treated as unbounded below.
pub const UNBOUNDED_BELOW: f64 = -1e12;

/// Escape needs a witness at least this stationary.
pub const ESCAPE_WITNESS_TOL: f64 = 1e-3;

/// Number of trailing iterates inspected by the escape rule.
pub const ESCAPE_TAIL: usize = 10;

const PENALTY_START: f64 = 10.0;
const PENALTY_CAP: f64 = 1e9;
const INFEASIBLE_STREAK: usize = 25;
const STEP_MAX: f64 = 1e12;
const ARMIJO: f64 = 1e-4;
const MINKOWSKI_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescentError {
    #[error(transparent)]
    Subdiff(#[from] SubdiffError),
    #[error("starting point: {0}")]
    Start(String),
    #[error("penalty weight exceeded {PENALTY_CAP:e} without reaching feasibility")]
    PenaltyOverflow,
    #[error("trajectory did not escape (status: {0})")]
    NotEscaped(String),
    #[error("Ekeland conclusions could not be certified: {detail} at {x:?}")]
    EkelandUncertified { x: Vec<f64>, detail: String },
    #[error("too many subgradient combinations ({0})")]
    Combinatorial(usize),
}

impl From<ExprError> for DescentError {
    fn from(e: ExprError) -> Self {
        DescentError::Subdiff(SubdiffError::Expr(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub budget: usize,
    pub escape_floor: f64,
    pub seed: u64,
    /// Sample size of the Ekeland check (iii).
    pub witness_samples: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions { budget: 2000, escape_floor: 1e3, seed: 0, witness_samples: 200 }
    }
}

impl DescentOptions {
    pub fn from_plan(plan: &SamplingPlan) -> Self {
        DescentOptions { escape_floor: plan.escape_floor, seed: plan.seed, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub k: usize,
    pub x: Vec<f64>,
    pub phi: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryStatus {
    Converged { x: Vec<f64>, phi: f64 },
    Escaped { direction: Vec<f64>, phi_limit: f64 },
    /// `stalled` is set when the line search could make no further progress
    /// at a point that does not look stationary.
    BudgetExhausted { stalled: bool },
    UnboundedBelow { phi: f64 },
}

impl TrajectoryStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryStatus::Converged { .. } => "converged",
            TrajectoryStatus::Escaped { .. } => "escaped",
            TrajectoryStatus::BudgetExhausted { .. } => "budget-exhausted",
            TrajectoryStatus::UnboundedBelow { .. } => "unbounded-below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkelandChecks {
    /// `φ(x1) ≤ φ(x0)`.
    pub descent: bool,
    /// `‖x1 − x0‖ ≤ λ`.
    pub proximity: bool,
    /// `φ(x1) ≤ φ(x) + (ε/λ)‖x − x1‖` on every sample.
    pub perturbed_minimality: bool,
    pub samples_checked: usize,
    /// Smallest slack of (iii) over the samples.
    pub worst_slack: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EkelandWitness {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
    pub eps: f64,
    pub lambda: f64,
    /// Least-norm element of `∂φ(x1)`, plus normals of `F` when `x1` lies on
    /// its boundary.
    pub u: Vec<f64>,
    pub u_norm: f64,
    pub checks: EkelandChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub iterates: Vec<Iterate>,
    pub status: TrajectoryStatus,
    pub ekeland_witnesses: Vec<EkelandWitness>,
    /// The start was moved onto Ω.
    pub projected_start: bool,
    pub penalty: f64,
    pub notes: Vec<String>,
}

/// The penalized objective `ψ = φ + c Σ max(g_j, 0) [+ a ‖x − x_a‖]`.
struct Model<'a> {
    p: &'a MinimaxProblem,
    penalty: f64,
    anchor: Option<(Vec<f64>, f64)>,
}

fn feas_tol(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

impl Model<'_> {
    fn value(&self, x: &[f64]) -> Result<f64, DescentError> {
        let mut v = self.p.phi(x)?;
        for g in &self.p.constraints {
            v += self.penalty * g.eval(x)?.max(0.0);
        }
        if let Some((a, w)) = &self.anchor {
            v += w * dist(x, a);
        }
        Ok(v)
    }

    /// Vertices of the ε-enlarged subdifferential of `ψ` without the anchor.
    fn vertices(&self, x: &[f64], eps: f64) -> Result<Vec<Vec<f64>>, DescentError> {
        let vals: Vec<f64> = self.p.objectives.iter().map(|f| f.eval(x)).collect::<Result<_, _>>()?;
        let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for (f, v) in self.p.objectives.iter().zip(&vals) {
            if *v >= top - eps - feas_tol(top) {
                pts.extend(subdiff_at(f, x)?.points().iter().cloned());
            }
        }
        for g in &self.p.constraints {
            let gv = g.eval(x)?;
            if gv < -eps {
                continue;
            }
            let grads: Vec<Vec<f64>> = subdiff_at(g, x)?
                .points()
                .iter()
                .map(|v| v.iter().map(|c| c * self.penalty).collect())
                .collect();
            let mut add = grads;
            if gv <= eps {
                add.push(vec![0.0; x.len()]);
            }
            let mut next = Vec::with_capacity(pts.len() * add.len());
            for p in &pts {
                for a in &add {
                    next.push(p.iter().zip(a).map(|(s, t)| s + t).collect::<Vec<f64>>());
                }
            }
            if next.len() > MINKOWSKI_CAP {
                return Err(DescentError::Combinatorial(next.len()));
            }
            pts = next;
        }
        Ok(pts)
    }

    /// Least-norm element of the vertex hull plus the anchor term plus the
    /// normal cone of Ω at `x`.
    fn least_norm(&self, x: &[f64], pts: &[Vec<f64>]) -> Vec<f64> {
        let normals = normal_cone_at(&self.p.ground, x).map(|c| c.generators().to_vec()).unwrap_or_default();
        let p = geometry::min_norm_in_sum(pts, &normals);
        let Some((a, w)) = &self.anchor else { return p };
        let r = dist(x, a);
        if r <= 1e-15 * (1.0 + norm(a)) {
            // subdifferential of the anchor is the ball of radius w
            let pn = norm(&p);
            return if pn <= *w { vec![0.0; x.len()] } else { p.iter().map(|v| v * (1.0 - w / pn)).collect() };
        }
        let shift: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| w * (xi - ai) / r).collect();
        let moved: Vec<Vec<f64>> =
            pts.iter().map(|q| q.iter().zip(&shift).map(|(s, t)| s + t).collect()).collect();
        geometry::min_norm_in_sum(&moved, &normals)
    }
}

enum Outcome {
    Moved { plateau: bool },
    Stationary,
    Stalled,
}

/// One local descent run over a fixed model. Keeps its step and ε state.
struct Walker {
    x: Vec<f64>,
    val: f64,
    step: f64,
    eps: f64,
    eps0: f64,
    sample_radius: f64,
    last_dir: Option<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl Walker {
    fn new(model: &Model, x: Vec<f64>, seed: u64) -> Result<Walker, DescentError> {
        let val = model.value(&x)?;
        if !val.is_finite() {
            return Err(DescentError::Start(format!("objective is {val} at the start")));
        }
        let eps0 = 1e-3 * (1.0 + val.abs());
        Ok(Walker {
            x,
            val,
            step: 1.0,
            eps: eps0,
            eps0,
            sample_radius: 0.0,
            last_dir: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn eps_min(&self) -> f64 {
        1e-9 * (1.0 + self.val.abs())
    }

    fn step_min(&self) -> f64 {
        1e-15 * (1.0 + norm(&self.x))
    }

    fn reset(&mut self, model: &Model) -> Result<(), DescentError> {
        self.val = model.value(&self.x)?;
        self.eps0 = 1e-3 * (1.0 + self.val.abs());
        self.eps = self.eps0;
        self.sample_radius = 0.0;
        Ok(())
    }

    fn bundle(&mut self, model: &Model) -> Result<Vec<Vec<f64>>, DescentError> {
        let mut pts = model.vertices(&self.x, self.eps)?;
        if self.sample_radius > 0.0 {
            let n = self.x.len();
            for _ in 0..=n {
                let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut self.rng)).collect();
                let gn = norm(&g).max(1e-300);
                let r = self.sample_radius * self.rng.random::<f64>().powf(1.0 / n as f64);
                let y: Vec<f64> = self.x.iter().zip(&g).map(|(xi, gi)| xi + r * gi / gn).collect();
                if let Ok(v) = model.vertices(&y, 0.0) {
                    pts.extend(v);
                }
            }
        }
        Ok(pts)
    }

    /// Backtracking search along `d`; `slope` is the predicted decrease rate.
    fn search(&mut self, model: &Model, d: &[f64], slope: f64, strict: bool) -> Result<bool, DescentError> {
        let mut t = (2.0 * self.step).min(STEP_MAX);
        while t >= self.step_min() {
            let trial: Vec<f64> = self.x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
            let y = model.p.ground.project(&trial);
            let moved = dist(&y, &self.x);
            if moved > 0.0 {
                if let Ok(v) = model.value(&y) {
                    let ok = if strict { v <= self.val - ARMIJO * slope * moved && v < self.val } else { v <= self.val };
                    if ok && v.is_finite() {
                        self.x = y;
                        self.val = v;
                        self.step = t;
                        return Ok(true);
                    }
                }
            }
            t *= 0.5;
        }
        Ok(false)
    }

    fn advance(&mut self, model: &Model) -> Result<Outcome, DescentError> {
        let pts = self.bundle(model)?;
        let u = model.least_norm(&self.x, &pts);
        let un = norm(&u);
        let stat_tol = 1e-12 * (1.0 + pts.iter().map(|p| norm(p)).fold(0.0, f64::max));
        if un <= stat_tol {
            if self.eps > self.eps_min() {
                self.eps = (self.eps * 0.1).max(self.eps_min());
                return self.advance(model);
            }
            return self.stationary(model);
        }
        let d: Vec<f64> = u.iter().map(|v| -v / un).collect();
        if self.search(model, &d, un, true)? {
            self.eps = (self.eps * 10.0).min(self.eps0);
            self.sample_radius = 0.0;
            self.last_dir = Some(d);
            return Ok(Outcome::Moved { plateau: false });
        }
        if self.eps > self.eps_min() {
            self.eps = (self.eps * 0.1).max(self.eps_min());
            return Ok(Outcome::Moved { plateau: true });
        }
        // nearby kinks the ε-activity test cannot see: sample gradients around x
        let floor = 1e-14 * (1.0 + norm(&self.x));
        if self.sample_radius == 0.0 {
            self.sample_radius = 1e-6 * (1.0 + norm(&self.x));
            return Ok(Outcome::Moved { plateau: true });
        }
        if self.sample_radius > floor {
            self.sample_radius *= 0.1;
            return Ok(Outcome::Moved { plateau: true });
        }
        match self.stationary(model)? {
            Outcome::Stationary => Ok(Outcome::Stalled),
            other => Ok(other),
        }
    }

    /// At a stationary-looking point: keep going over a flat stretch, then try
    /// the negated vertices of a kink before giving up.
    fn stationary(&mut self, model: &Model) -> Result<Outcome, DescentError> {
        if let Some(d) = self.last_dir.clone() {
            let before = self.val;
            let flat_ok = model.anchor.is_none();
            if self.search(model, &d, 0.0, !flat_ok)? {
                return Ok(Outcome::Moved { plateau: self.val == before });
            }
        }
        let tight = model.vertices(&self.x, 0.0)?;
        if tight.len() >= 2 {
            for v in &tight {
                let vn = norm(v);
                if vn == 0.0 {
                    continue;
                }
                let d: Vec<f64> = v.iter().map(|c| -c / vn).collect();
                let keep = self.step;
                self.step = self.step.max(1e-6 * (1.0 + norm(&self.x)));
                if self.search(model, &d, 0.0, true)? {
                    self.last_dir = Some(d);
                    return Ok(Outcome::Moved { plateau: false });
                }
                self.step = keep;
            }
        }
        Ok(Outcome::Stationary)
    }
}

/// Local minimizer of `model` from `x0` within `budget` moves.
fn local_min(model: &Model, x0: Vec<f64>, budget: usize, seed: u64) -> Result<(Vec<f64>, f64, bool), DescentError> {
    let mut w = Walker::new(model, x0, seed)?;
    for _ in 0..budget {
        match w.advance(model)? {
            Outcome::Moved { .. } => {}
            Outcome::Stationary | Outcome::Stalled => return Ok((w.x, w.val, true)),
        }
    }
    Ok((w.x, w.val, false))
}

fn iterate(p: &MinimaxProblem, k: usize, x: &[f64]) -> Result<Iterate, DescentError> {
    Ok(Iterate { k, x: x.to_vec(), phi: p.phi(x)?, feasible: p.is_feasible(x)? })
}

/// Descent on `φ` over `F` from `x0`.
pub fn minimize(p: &MinimaxProblem, x0: &[f64], opts: &DescentOptions) -> Result<Trajectory, DescentError> {
    if x0.len() != p.dim() {
        return Err(DescentError::Start(format!("x0 has {} coordinates, expected {}", x0.len(), p.dim())));
    }
    let mut notes = Vec::new();
    let start = p.ground.project(x0);
    let projected_start = dist(&start, x0) > 0.0;
    if projected_start {
        notes.push(format!("start {x0:?} projected onto the ground set at {start:?}"));
    }
    let phi0 = p.phi(&start)?;
    let tol_flat = 1e-8 * (1.0 + phi0.abs());
    let mut penalty = PENALTY_START;
    let mut model = Model { p, penalty, anchor: None };
    let mut w = Walker::new(&model, start.clone(), opts.seed)?;
    let mut iterates = vec![iterate(p, 0, &start)?];
    let mut infeasible_streak = 0usize;
    let mut stalled = false;

    let mut status = None;
    let mut witnesses = Vec::new();
    let mut spent = 0usize;
    while spent < opts.budget {
        spent += 1;
        let outcome = w.advance(&model)?;
        let mut at_rest = false;
        match outcome {
            Outcome::Moved { plateau } => {
                if plateau && dist(&w.x, &iterates.last().unwrap().x) == 0.0 {
                    continue;
                }
            }
            Outcome::Stationary => at_rest = true,
            Outcome::Stalled => {
                at_rest = true;
                stalled = true;
            }
        }
        if !at_rest {
            let it = iterate(p, iterates.len(), &w.x)?;
            infeasible_streak = if it.feasible { 0 } else { infeasible_streak + 1 };
            iterates.push(it);
        }
        let last = iterates.last().unwrap().clone();
        if w.val < UNBOUNDED_BELOW || last.phi < UNBOUNDED_BELOW {
            status = Some(TrajectoryStatus::UnboundedBelow { phi: last.phi });
            break;
        }
        let needs_penalty = (at_rest && !last.feasible) || infeasible_streak >= INFEASIBLE_STREAK;
        if needs_penalty {
            penalty *= 2.0;
            if penalty > PENALTY_CAP {
                return Err(DescentError::PenaltyOverflow);
            }
            model = Model { p, penalty, anchor: None };
            w.reset(&model)?;
            infeasible_streak = 0;
            stalled = false;
            continue;
        }
        if at_rest {
            if stalled {
                notes.push(format!("line search stalled at iterate {}", last.k));
                status = Some(TrajectoryStatus::BudgetExhausted { stalled: true });
            } else {
                status = Some(TrajectoryStatus::Converged { x: last.x.clone(), phi: last.phi });
            }
            break;
        }
        if let Some(found) = escape_check(p, &iterates, opts, tol_flat)? {
            witnesses = found;
            let dir = {
                let n = norm(&last.x);
                last.x.iter().map(|v| v / n).collect()
            };
            status = Some(TrajectoryStatus::Escaped { direction: dir, phi_limit: last.phi });
            break;
        }
    }
    let status = status.unwrap_or(TrajectoryStatus::BudgetExhausted { stalled: false });
    Ok(Trajectory { iterates, status, ekeland_witnesses: witnesses, projected_start, penalty, notes })
}

/// The escape rule on the trailing iterates. Returns the witnesses when it
/// fires.
fn escape_check(
    p: &MinimaxProblem,
    iterates: &[Iterate],
    opts: &DescentOptions,
    tol_flat: f64,
) -> Result<Option<Vec<EkelandWitness>>, DescentError> {
    if iterates.len() < ESCAPE_TAIL {
        return Ok(None);
    }
    let tail = &iterates[iterates.len() - ESCAPE_TAIL..];
    let norms: Vec<f64> = tail.iter().map(|it| norm(&it.x)).collect();
    if norms[0] < opts.escape_floor || norms.windows(2).any(|w| w[1] < w[0]) {
        return Ok(None);
    }
    if !tail.iter().all(|it| it.feasible) {
        return Ok(None);
    }
    let drop = tail[0].phi - tail[ESCAPE_TAIL - 1].phi;
    if drop < -1e-12 || drop >= tol_flat {
        return Ok(None);
    }
    // the remaining gap to the infimum is estimated by the tail decrease
    let floor_phi = tail[ESCAPE_TAIL - 1].phi;
    let mut witnesses = Vec::new();
    for it in &tail[ESCAPE_TAIL - 3..] {
        let eps = (it.phi - floor_phi).max(0.0) + tol_flat;
        match ekeland_witness(p, &it.x, eps, opts) {
            Ok(wit) => witnesses.push(wit),
            Err(DescentError::EkelandUncertified { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    if witnesses.iter().any(|w| w.u_norm <= ESCAPE_WITNESS_TOL) {
        Ok(Some(witnesses))
    } else {
        Ok(None)
    }
}

/// Ekeland point for `φ` on `F` near `x0` with `λ = √eps`, checked
/// numerically. Violations of (iii) restart the search from the violating
/// sample, which strictly lowers the perturbed objective.
pub fn ekeland_witness(
    p: &MinimaxProblem,
    x0: &[f64],
    eps: f64,
    opts: &DescentOptions,
) -> Result<EkelandWitness, DescentError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(DescentError::Start(format!("eps must be positive, got {eps}")));
    }
    if !p.is_feasible(x0)? {
        return Err(DescentError::Start(format!("{x0:?} is not feasible")));
    }
    let lambda = eps.sqrt();
    let slope = eps / lambda;
    let phi0 = p.phi(x0)?;
    let tol = 1e-10 * (1.0 + phi0.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xE4E1_A4D0);
    let mut penalty = PENALTY_START;
    let mut start = x0.to_vec();
    let mut rounds = 0;
    let mut last_violation: Option<(Vec<f64>, String)> = None;
    while rounds < 20 {
        rounds += 1;
        let model = Model { p, penalty, anchor: Some((x0.to_vec(), slope)) };
        let (x1, _, _) = local_min(&model, start.clone(), 500, opts.seed.wrapping_add(rounds as u64))?;
        if !p.is_feasible(&x1)? {
            penalty *= 10.0;
            if penalty > PENALTY_CAP {
                return Err(DescentError::PenaltyOverflow);
            }
            continue;
        }
        let phi1 = p.phi(&x1)?;
        let descent = phi1 <= phi0 + tol;
        let proximity = dist(&x1, x0) <= lambda * (1.0 + 1e-9) + tol;
        if !descent || !proximity {
            last_violation = Some((x1.clone(), format!("descent {descent}, proximity {proximity}")));
            start = x0.to_vec();
            penalty *= 10.0;
            continue;
        }
        // check (iii) on feasible samples in the ball of radius 10λ
        let n = x1.len();
        let mut checked = 0usize;
        let mut worst = f64::INFINITY;
        let mut violator = None;
        let mut attempts = 0;
        let mut candidates = vec![x0.to_vec()];
        while checked < opts.witness_samples && attempts < 20 * opts.witness_samples {
            attempts += 1;
            let x = match candidates.pop() {
                Some(c) => c,
                None => {
                    let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let gn = norm(&g).max(1e-300);
                    let r = 10.0 * lambda * rng.random::<f64>().powf(1.0 / n as f64);
                    let y: Vec<f64> = x1.iter().zip(&g).map(|(a, b)| a + r * b / gn).collect();
                    p.ground.project(&y)
                }
            };
            if !matches!(p.is_feasible(&x), Ok(true)) {
                continue;
            }
            let Ok(v) = p.phi(&x) else { continue };
            checked += 1;
            let s = v + slope * dist(&x, &x1) - phi1;
            worst = worst.min(s);
            if s < -tol && violator.is_none() {
                violator = Some(x);
            }
        }
        if let Some(v) = violator {
            last_violation = Some((v.clone(), format!("(iii) fails by {:.3e}", -worst)));
            start = v;
            continue;
        }
        let u = stationarity_element(p, &x1)?;
        let u_norm = norm(&u);
        return Ok(EkelandWitness {
            x0: x0.to_vec(),
            x1,
            eps,
            lambda,
            u,
            u_norm,
            checks: EkelandChecks {
                descent,
                proximity,
                perturbed_minimality: true,
                samples_checked: checked,
                worst_slack: worst,
                rounds,
            },
        });
    }
    let (x, detail) = last_violation.unwrap_or((x0.to_vec(), "no feasible local minimizer".into()));
    Err(DescentError::EkelandUncertified { x, detail })
}

/// Least-norm element of `∂φ(x) + N_F(x)`, where `N_F(x)` is generated by the
/// normals of Ω and the gradients of the active constraints.
fn stationarity_element(p: &MinimaxProblem, x: &[f64]) -> Result<Vec<f64>, DescentError> {
    let vals: Vec<f64> = p.objectives.iter().map(|f| f.eval(x)).collect::<Result<_, _>>()?;
    let top = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pts = Vec::new();
    for (f, v) in p.objectives.iter().zip(&vals) {
        if *v >= top - feas_tol(top) {
            pts.extend(subdiff_at(f, x)?.points().iter().cloned());
        }
    }
    let mut gens: Vec<Vec<f64>> = normal_cone_at(&p.ground, x)?.generators().to_vec();
    for g in &p.constraints {
        if g.eval(x)?.abs() <= feas_tol(0.0) {
            gens.extend(subdiff_at(g, x)?.points().iter().cloned());
        }
    }
    Ok(geometry::min_norm_in_sum(&pts, &gens))
}

/// Escape record packaged for the KKT report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeEvidence {
    pub tail: Vec<Iterate>,
    pub direction: Vec<f64>,
    pub phi_limit: f64,
    pub witnesses: Vec<EkelandWitness>,
    /// Witness norms in trajectory order.
    pub witness_norms: Vec<f64>,
    pub escape_floor: f64,
}

pub fn escape_evidence(t: &Trajectory, plan: &SamplingPlan) -> Result<EscapeEvidence, DescentError> {
    let TrajectoryStatus::Escaped { direction, phi_limit } = &t.status else {
        return Err(DescentError::NotEscaped(t.status.label().into()));
    };
    let tail = t.iterates[t.iterates.len().saturating_sub(ESCAPE_TAIL)..].to_vec();
    Ok(EscapeEvidence {
        tail,
        direction: direction.clone(),
        phi_limit: *phi_limit,
        witness_norms: t.ekeland_witnesses.iter().map(|w| w.u_norm).collect(),
        witnesses: t.ekeland_witnesses.clone(),
        escape_floor: plan.escape_floor,
    })
}

/// CSV with columns `k, x_1..x_n, phi`.
pub fn trajectory_csv(t: &Trajectory) -> String {
    let n = t.iterates.first().map_or(0, |it| it.x.len());
    let mut out = String::from("k");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    out.push_str(",phi\n");
    for it in &t.iterates {
        out.push_str(&it.k.to_string());
        for v in &it.x {
            out.push_str(&format!(",{v:?}"));
        }
        out.push_str(&format!(",{:?}\n", it.phi));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::subdiff_point::GroundSet;

    fn problem(objs: &[&str], cons: &[&str], n: usize) -> MinimaxProblem {
        let p = |s: &&str| Expr::parse(s, n).unwrap();
        MinimaxProblem::new(objs.iter().map(p).collect(), cons.iter().map(p).collect(), GroundSet::full(n))
            .unwrap()
    }

    fn check_monotone(t: &Trajectory) {
        for w in t.iterates.windows(2) {
            if w[0].feasible && w[1].feasible {
                assert!(w[1].phi <= w[0].phi + 1e-12, "{:?} -> {:?}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn quadratic_converges() {
        let t = minimize(&problem(&["x1^2"], &[], 1), &[3.0], &DescentOptions::default()).unwrap();
        let TrajectoryStatus::Converged { x, phi } = &t.status else { panic!("{:?}", t.status) };
        assert!(x[0].abs() < 1e-4 && *phi < 1e-8);
        check_monotone(&t);
    }

    #[test]
    fn kinked_max_converges_to_the_kink() {
        let t = minimize(&problem(&["x1^2", "(x1-1)^2"], &[], 1), &[-4.0], &DescentOptions::default()).unwrap();
        let TrajectoryStatus::Converged { x, .. } = &t.status else { panic!("{:?}", t.status) };
        assert!((x[0] - 0.5).abs() < 1e-6, "{x:?}");
        check_monotone(&t);
    }

    #[test]
    fn exponential_escapes() {
        let t = minimize(&problem(&["exp(x1)"], &[], 1), &[0.0], &DescentOptions::default()).unwrap();
        let TrajectoryStatus::Escaped { direction, phi_limit } = &t.status else { panic!("{:?}", t.status) };
        assert_eq!(direction, &vec![-1.0]);
        assert!(phi_limit.abs() < 1e-6);
        assert!(t.ekeland_witnesses.iter().any(|w| w.u_norm <= 1e-3));
        check_monotone(&t);
        let ev = escape_evidence(&t, &SamplingPlan::default_for(1)).unwrap();
        assert_eq!(ev.tail.len(), ESCAPE_TAIL);
    }

    #[test]
    fn constrained_escape() {
        let p = problem(&["1/(abs(x1)+1)", "0"], &["x1"], 1);
        let t = minimize(&p, &[-1.0], &DescentOptions::default()).unwrap();
        let TrajectoryStatus::Escaped { phi_limit, .. } = &t.status else { panic!("{:?}", t.status) };
        assert!(*phi_limit < 1e-6);
        // from the kink at 0 the vertex probe finds the way out
        let t = minimize(&p, &[0.0], &DescentOptions::default()).unwrap();
        assert_eq!(t.status.label(), "escaped", "{:?}", t.notes);
    }

    #[test]
    fn converged_trajectory_has_no_escape_evidence() {
        let t = minimize(&problem(&["x1^2"], &[], 1), &[3.0], &DescentOptions::default()).unwrap();
        assert!(matches!(escape_evidence(&t, &SamplingPlan::default_for(1)), Err(DescentError::NotEscaped(_))));
    }

    #[test]
    fn linear_is_unbounded_below() {
        let t = minimize(&problem(&["x1"], &[], 1), &[0.0], &DescentOptions::default()).unwrap();
        assert_eq!(t.status.label(), "unbounded-below");
    }

    #[test]
    fn projection_of_start() {
        let ground = GroundSet::polyhedron(vec![vec![1.0, 1.0]], vec![-2.0]).unwrap();
        let p = MinimaxProblem::new(vec![Expr::parse("(x1-3)^2 + (x2-3)^2", 2).unwrap()], vec![], ground).unwrap();
        let t = minimize(&p, &[0.0, 0.0], &DescentOptions::default()).unwrap();
        assert!(t.projected_start);
        let TrajectoryStatus::Converged { x, .. } = &t.status else { panic!("{:?}", t.status) };
        assert!((x[0] + 1.0).abs() < 1e-4 && (x[1] + 1.0).abs() < 1e-4, "{x:?}");
    }

    #[test]
    fn penalty_drives_feasibility() {
        // min x^2 subject to 1 - x <= 0
        let t = minimize(&problem(&["x1^2"], &["1 - x1"], 1), &[-3.0], &DescentOptions::default()).unwrap();
        let TrajectoryStatus::Converged { x, .. } = &t.status else { panic!("{:?}", t.status) };
        assert!((x[0] - 1.0).abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn ekeland_examples() {
        let opts = DescentOptions::default();
        let w = ekeland_witness(&problem(&["x1^2"], &[], 1), &[0.1], 0.01, &opts).unwrap();
        assert!(w.checks.descent && w.checks.proximity && w.checks.perturbed_minimality);
        assert!(w.u_norm <= w.lambda + 1e-8);
        let e = problem(&["exp(x1)"], &[], 1);
        let eps = (-5.0f64).exp();
        let w = ekeland_witness(&e, &[-5.0], eps, &opts).unwrap();
        assert!(w.x1[0] <= -5.0 + 1e-12);
        assert!(w.u_norm <= eps.sqrt());
        // a huge eps admits x1 = x0
        let w = ekeland_witness(&problem(&["x1^2"], &[], 1), &[0.1], 1.0 + 0.01, &opts).unwrap();
        assert!(w.checks.proximity);
    }

    #[test]
    fn csv_layout() {
        let t = minimize(&problem(&["x1^2 + x2^2"], &[], 2), &[1.0, 1.0], &DescentOptions::default()).unwrap();
        let csv = trajectory_csv(&t);
        assert!(csv.starts_with("k,x_1,x_2,phi\n0,1.0,1.0,2.0\n"));
    }
}
