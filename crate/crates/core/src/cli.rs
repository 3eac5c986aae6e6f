//! Command-line front end: problem documents in, JSON reports (or a CSV
//! trajectory) out.
//!
//! Exit codes: 0 analysis completed, 2 hypothesis unmet, 3 input error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{sphere_directions, SamplingPlan};
use crate::descent::{self, DescentError, DescentOptions, Trajectory};
use crate::expr::Expr;
use crate::geometry::DEFAULT_LP_TOL;
use crate::kkt::{Analyzer, CqStatus, KktReport, MinimaxProblem, SufficiencyReport};
use crate::pareto::{self, ParetoReport, VectorProblem};
use crate::subdiff_point::GroundSet;

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unsupported document version {0:?} (expected {SCHEMA_VERSION:?})")]
    Version(String),
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("invalid flags: {0}")]
    Flags(String),
}

/// Problem document. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub version: String,
    pub dimension: usize,
    pub objectives: Vec<String>,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub ground: GroundDocument,
    #[serde(default)]
    pub plan: PlanOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Ground set as written in a document; `null` box bounds mean ±∞.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundDocument {
    #[default]
    Full,
    Box { lower: Vec<Option<f64>>, upper: Vec<Option<f64>> },
    Polyhedron { a: Vec<Vec<f64>>, b: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanOverrides {
    /// Number of directions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii_base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escape_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

impl ProblemDocument {
    pub fn from_json(text: &str) -> Result<ProblemDocument, CliError> {
        let doc: ProblemDocument = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        if doc.version != SCHEMA_VERSION {
            return Err(CliError::Version(doc.version));
        }
        if doc.dimension == 0 {
            return Err(CliError::Schema("dimension must be at least 1".into()));
        }
        if doc.objectives.is_empty() {
            return Err(CliError::Schema("at least one objective is required".into()));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<ProblemDocument, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn ground_set(&self) -> Result<GroundSet, CliError> {
        let n = self.dimension;
        let g = match &self.ground {
            GroundDocument::Full => Ok(GroundSet::full(n)),
            GroundDocument::Box { lower, upper } => GroundSet::boxed(
                lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            ),
            GroundDocument::Polyhedron { a, b } => GroundSet::polyhedron(a.clone(), b.clone()),
        }
        .map_err(|e| CliError::Problem(e.to_string()))?;
        if g.dim().is_some_and(|d| d != n) {
            return Err(CliError::Problem(format!("ground set has dimension {:?}, document says {n}", g.dim())));
        }
        Ok(g)
    }

    fn parse_all(&self, srcs: &[String], what: &str) -> Result<Vec<Expr>, CliError> {
        srcs.iter()
            .enumerate()
            .map(|(i, s)| Expr::parse(s, self.dimension).map_err(|e| CliError::Problem(format!("{what} {}: {e}", i + 1))))
            .collect()
    }

    pub fn minimax(&self) -> Result<MinimaxProblem, CliError> {
        let objectives = self.parse_all(&self.objectives, "objective")?;
        let constraints = self.parse_all(&self.constraints, "constraint")?;
        MinimaxProblem::new(objectives, constraints, self.ground_set()?).map_err(|e| CliError::Problem(e.to_string()))
    }

    pub fn vector(&self) -> Result<VectorProblem, CliError> {
        let objectives = self.parse_all(&self.objectives, "objective")?;
        let constraints = self.parse_all(&self.constraints, "constraint")?;
        VectorProblem::new(objectives, constraints, self.ground_set()?).map_err(|e| CliError::Problem(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "infinity-kkt", version, about = "Optimality conditions at infinity for nonsmooth minimax and vector problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Standing assumptions, CQ, KKT at infinity and the sufficiency test.
    Analyze(AnalyzeArgs),
    /// Run the descent method and dump the trajectory.
    Descent(DescentArgs),
    /// Weak Pareto value check for a candidate `ȳ`, plus solution-set checks.
    Pareto(ParetoArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of sampling directions.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long)]
    pub radii_base: Option<f64>,
    #[arg(long)]
    pub radii_ratio: Option<f64>,
    #[arg(long)]
    pub radii_steps: Option<usize>,
    #[arg(long)]
    pub lp_tol: Option<f64>,
    #[arg(long)]
    pub escape_floor: Option<f64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    pub path: PathBuf,
    /// Skip the multi-start descent that backs the sufficiency verdict.
    #[arg(long)]
    pub no_cross_validation: bool,
    #[command(flatten)]
    pub flags: CommonFlags,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum TrajectoryFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct DescentArgs {
    pub path: PathBuf,
    /// Start point, comma separated; the origin when absent.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub format: TrajectoryFormat,
    #[command(flatten)]
    pub flags: CommonFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ParetoArgs {
    pub path: PathBuf,
    /// Candidate value, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub ybar: Vec<f64>,
    /// Assert that the (weak) Pareto value sets are nonempty; enables the
    /// solution-set checks.
    #[arg(long)]
    pub values_nonempty: bool,
    #[command(flatten)]
    pub flags: CommonFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> ToolInfo {
        ToolInfo { name: TOOL_NAME.into(), version: TOOL_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub tool: ToolInfo,
    pub problem: ProblemDocument,
    pub plan: SamplingPlan,
    pub lp_tol: f64,
    pub kkt: KktReport,
    pub sufficiency: SufficiencyReport,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentReport {
    pub tool: ToolInfo,
    pub problem: ProblemDocument,
    pub plan: SamplingPlan,
    pub x0: Vec<f64>,
    pub budget: usize,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoCliReport {
    pub tool: ToolInfo,
    pub problem: ProblemDocument,
    pub plan: SamplingPlan,
    pub lp_tol: f64,
    pub pareto: ParetoReport,
    pub exit_code: i32,
}

/// Resolved output of a command: exit code, the bytes to write and a one
/// line summary for stderr.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
    pub summary: String,
}

/// Module defaults, then document overrides, then flags.
pub fn resolve_plan(doc: &ProblemDocument, flags: &CommonFlags) -> Result<(SamplingPlan, f64), CliError> {
    let n = doc.dimension;
    let seed = flags.seed.or(doc.seed).unwrap_or(SamplingPlan::DEFAULT_SEED);
    let mut plan = SamplingPlan::new(n, (2 * n).max(16), seed);
    let o = &doc.plan;
    let count = flags.directions.or(o.directions).unwrap_or(plan.directions.len());
    plan.directions = sphere_directions(n, count, seed);
    plan.radii_base = flags.radii_base.or(o.radii_base).unwrap_or(plan.radii_base);
    plan.radii_ratio = flags.radii_ratio.or(o.radii_ratio).unwrap_or(plan.radii_ratio);
    plan.radii_steps = flags.radii_steps.or(o.radii_steps).unwrap_or(plan.radii_steps);
    plan.escape_floor = flags.escape_floor.or(o.escape_floor).unwrap_or(plan.escape_floor);
    plan.cluster_rel_tol = o.cluster_rel_tol.unwrap_or(plan.cluster_rel_tol);
    plan.jitter = o.jitter.unwrap_or(plan.jitter);
    plan.validate().map_err(|e| CliError::Flags(e.to_string()))?;
    let lp_tol = flags.lp_tol.unwrap_or(DEFAULT_LP_TOL);
    if !(lp_tol > 0.0 && lp_tol.is_finite()) {
        return Err(CliError::Flags(format!("lp tolerance must be positive, got {lp_tol}")));
    }
    Ok((plan, lp_tol))
}

fn analyzer(plan: &SamplingPlan, lp_tol: f64) -> Analyzer {
    let mut a = Analyzer::new(plan.clone());
    a.lp_tol = lp_tol;
    a
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Outcome, CliError> {
    let doc = ProblemDocument::load(&args.path)?;
    let p = doc.minimax()?;
    let (plan, lp_tol) = resolve_plan(&doc, &args.flags)?;
    let mut a = analyzer(&plan, lp_tol);
    a.cross_validate = !args.no_cross_validation;
    let (kkt, sufficiency) = a.analyze(&p).map_err(|e| CliError::Problem(e.to_string()))?;
    let code = if kkt.assumptions.all_met() { EXIT_OK } else { EXIT_HYPOTHESIS };
    let summary = format!(
        "cq: {:?}; kkt: {:?}; sufficiency: {:?}; {}",
        kkt.cq.status, kkt.verdict, sufficiency.verdict, kkt.message
    );
    let report = AnalyzeReport { tool: ToolInfo::current(), problem: doc, plan, lp_tol, kkt, sufficiency, exit_code: code };
    Ok(Outcome { code, body: to_json(&report), summary })
}

pub fn cmd_descent(args: &DescentArgs) -> Result<Outcome, CliError> {
    let doc = ProblemDocument::load(&args.path)?;
    let p = doc.minimax()?;
    let (plan, _) = resolve_plan(&doc, &args.flags)?;
    let x0 = args.x0.clone().unwrap_or_else(|| vec![0.0; doc.dimension]);
    if x0.len() != doc.dimension {
        return Err(CliError::Flags(format!("x0 has {} entries, dimension is {}", x0.len(), doc.dimension)));
    }
    let mut opts = DescentOptions::from_plan(&plan);
    if let Some(b) = args.budget {
        opts.budget = b;
    }
    let t = match descent::minimize(&p, &x0, &opts) {
        Ok(t) => t,
        Err(e @ (DescentError::Start(_) | DescentError::Subdiff(_))) => return Err(CliError::Problem(e.to_string())),
        Err(e) => {
            return Ok(Outcome { code: EXIT_HYPOTHESIS, body: String::new(), summary: format!("descent failed: {e}") })
        }
    };
    let mut summary = format!("status: {}; iterations: {}", t.status.label(), t.iterates.len().saturating_sub(1));
    if t.projected_start {
        summary.push_str("; start projected onto the ground set");
    }
    let body = match args.format {
        TrajectoryFormat::Csv => descent::trajectory_csv(&t),
        TrajectoryFormat::Json => to_json(&DescentReport {
            tool: ToolInfo::current(),
            problem: doc,
            plan,
            x0,
            budget: opts.budget,
            trajectory: t,
        }),
    };
    Ok(Outcome { code: EXIT_OK, body, summary })
}

pub fn cmd_pareto(args: &ParetoArgs) -> Result<Outcome, CliError> {
    let doc = ProblemDocument::load(&args.path)?;
    let vp = doc.vector()?;
    let (plan, lp_tol) = resolve_plan(&doc, &args.flags)?;
    let a = analyzer(&plan, lp_tol);
    let mut report = pareto::check_weak_value_with(&a, &vp, &args.ybar).map_err(|e| CliError::Problem(e.to_string()))?;
    let cq_holds = report.kkt.as_ref().is_some_and(|k| k.cq.status == CqStatus::Holds);
    let code = if cq_holds { EXIT_OK } else { EXIT_HYPOTHESIS };
    if cq_holds {
        report.solution_set = Some(
            pareto::solution_set_checks(&a, &vp, args.values_nonempty).map_err(|e| CliError::Problem(e.to_string()))?,
        );
    }
    let mut summary = format!("weak value: {:?}", report.verdict);
    if let Some(s) = &report.solution_set {
        summary.push_str(&format!("; weak solutions: {:?}; Pareto solutions: {:?}", s.weak, s.pareto));
    }
    let r = ParetoCliReport { tool: ToolInfo::current(), problem: doc, plan, lp_tol, pareto: report, exit_code: code };
    Ok(Outcome { code, body: to_json(&r), summary })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, body: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.into(), source };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn run(cli: Cli) -> i32 {
    let (res, out) = match &cli.command {
        Command::Analyze(a) => (cmd_analyze(a), a.flags.out.clone()),
        Command::Descent(a) => (cmd_descent(a), a.flags.out.clone()),
        Command::Pareto(a) => (cmd_pareto(a), a.flags.out.clone()),
    };
    let outcome = match res {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    if !outcome.body.is_empty() {
        match &out {
            Some(p) => {
                if let Err(e) = write_atomic(p, &outcome.body) {
                    eprintln!("error: {e}");
                    return EXIT_INPUT;
                }
            }
            None => print!("{}", outcome.body),
        }
    }
    eprintln!("{}", outcome.summary);
    outcome.code
}

/// Parses arguments and runs; usage errors exit with 3 (help and version
/// with 0).
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}
