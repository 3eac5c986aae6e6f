//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::time::Instant;

use infinity_kkt::asymptotics::{max_rule_at_infinity, subdiff_at_infinity, InclusionStatus, SamplingPlan};
use infinity_kkt::descent::{ekeland_witness, escape_evidence, minimize, DescentOptions, TrajectoryStatus};
use infinity_kkt::expr::Expr;
use infinity_kkt::geometry::{distance_to_hull, hausdorff, zero_in_sum, VCone, VPolytope, DEFAULT_LP_TOL};
use infinity_kkt::kkt::{Analyzer, CqStatus, MinimaxProblem, SufficiencyVerdict};
use infinity_kkt::pareto::{check_weak_value_at_infinity, solution_set_checks, SolutionSetVerdict, VectorProblem, WeakValueVerdict};
use infinity_kkt::subdiff_point::GroundSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HAUSDORFF_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-8;
const MAX_RULE_SLACK: f64 = 1e-3;
const WITNESS_TOL: f64 = 1e-3;
const ZERO_TOL: f64 = 1e-6;
const EKELAND_SAMPLES: usize = 200;
const MINIMIZER_TOL: f64 = 1e-3;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn parse(srcs: &[&str], n: usize) -> Vec<Expr> {
    srcs.iter().map(|s| Expr::parse(s, n).unwrap()).collect()
}

fn worked_example() -> MinimaxProblem {
    MinimaxProblem::new(parse(&["1/(abs(x1)+1)", "0"], 1), parse(&["x1"], 1), GroundSet::full(1)).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_worked_example() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let (report, _) = pool
        .install(|| Analyzer::new(SamplingPlan::default_for(1)).analyze(&worked_example()))
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();

    let point = |v: f64| VPolytope::singleton(vec![v]);
    let mut worst: f64 = 0.0;
    for (s, want) in report.sets.objectives.iter().zip([0.0, 0.0]).chain([(&report.sets.constraints[0], 1.0)]) {
        ensure(s.recession_cone.is_trivial(), || "non-trivial singular part".into())?;
        worst = worst.max(hausdorff(&s.bounded_part, &point(want)).map_err(|e| e.to_string())?);
    }
    let normal = match &report.sets.ground {
        Some(g) => hausdorff(&g.bounded_part, &point(0.0)).map_err(|e| e.to_string())?,
        None => 0.0,
    };
    worst = worst.max(normal);
    ensure(worst <= HAUSDORFF_TOL, || format!("Hausdorff error {worst:.3e}"))?;
    ensure(report.cq.status == CqStatus::Holds, || format!("CQ {:?}", report.cq.status))?;
    let m = &report.membership;
    ensure(m.feasible, || "membership infeasible".into())?;
    let beta = m.beta[0];
    ensure(beta.abs() <= RESIDUAL_TOL, || format!("β = {beta:e}"))?;
    ensure(m.residual <= RESIDUAL_TOL, || format!("residual {:e}", m.residual))?;
    ensure(elapsed < 5.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("Hausdorff {worst:.1e}, β = {beta:.1e}, residual {:.1e}, {elapsed:.3} s on one thread", m.residual))
}

fn random_part(rng: &mut ChaCha8Rng, n: usize) -> (String, Vec<f64>) {
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b: f64 = rng.random_range(-1.0..1.0);
    let c: f64 = rng.random_range(-3.0..3.0);
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let lin: Vec<String> = a.iter().enumerate().map(|(k, v)| format!("({v:?})*x{}", k + 1)).collect();
    let den: Vec<String> = s.iter().enumerate().map(|(k, v)| format!("(x{} - ({v:?}))^2", k + 1)).collect();
    (format!("{} + ({b:?}) + ({c:?})/(1 + {})", lin.join(" + "), den.join(" + ")), a)
}

fn criterion_max_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for inst in 0..50 {
        let n = 1 + inst % 2;
        let count = rng.random_range(2..=4);
        let (srcs, slopes): (Vec<String>, Vec<Vec<f64>>) = (0..count).map(|_| random_part(&mut rng, n)).unzip();
        let fs: Vec<Expr> = srcs.iter().map(|s| Expr::parse(s, n).unwrap()).collect();
        let plan = SamplingPlan::new(n, (2 * n).max(16), inst as u64);
        let rule = max_rule_at_infinity(&fs, &plan, MAX_RULE_SLACK).map_err(|e| e.to_string())?;
        // closed form: each part tends to its affine slope
        let est = subdiff_at_infinity(&Expr::max_of(&fs), &plan).map_err(|e| e.to_string())?;
        let gap = est
            .bounded_part
            .points()
            .iter()
            .map(|p| distance_to_hull(p, &slopes))
            .fold(0.0, f64::max);
        worst = worst.max(gap);
        if rule.status == InclusionStatus::Holds && !est.bounded_part.is_empty() && gap <= MAX_RULE_SLACK && est.recession_cone.is_trivial() {
            passed += 1;
        } else {
            failures.push(format!("#{inst} {:?} gap {gap:.2e}", rule.status));
        }
    }
    ensure(passed == 50, || format!("{passed}/50 pass; {}", failures.join(", ")))?;
    Ok(format!("50/50 pass, worst gap to the slope hull {worst:.1e}"))
}

fn criterion_fermat() -> Outcome {
    let plan = SamplingPlan::default_for(1);
    let opts = DescentOptions::from_plan(&plan);
    let exp = MinimaxProblem::new(parse(&["exp(x1)"], 1), vec![], GroundSet::full(1)).unwrap();
    let mut lines = Vec::new();
    for (name, p) in [("exp", exp), ("worked example on x <= 0", worked_example())] {
        let t = minimize(&p, &[0.0], &opts).map_err(|e| e.to_string())?;
        ensure(matches!(t.status, TrajectoryStatus::Escaped { .. }), || format!("{name}: {}", t.status.label()))?;
        let ev = escape_evidence(&t, &plan).map_err(|e| e.to_string())?;
        ensure(!ev.witnesses.is_empty(), || format!("{name}: no witnesses"))?;
        let u = ev.witness_norms.iter().copied().fold(0.0, f64::max);
        ensure(u <= WITNESS_TOL, || format!("{name}: ‖u‖ = {u:e}"))?;
        let set = subdiff_at_infinity(&p.phi_expr(), &plan).map_err(|e| e.to_string())?;
        let d = set.bounded_part.distance_to(&[0.0]);
        ensure(d <= ZERO_TOL, || format!("{name}: dist(0, ∂φ(∞)) = {d:e}"))?;
        lines.push(format!("{name}: max ‖u‖ {u:.1e}, dist {d:.1e}"));
    }
    Ok(lines.join("; "))
}

/// Columns of a membership instance: hull points carry the simplex row.
struct Instance {
    dim: usize,
    hulls: Vec<Vec<Vec<f64>>>,
    cones: Vec<Vec<Vec<f64>>>,
}

const GRID: f64 = 32.0;
const CONE_MAX: f64 = 8.0;

/// Smallest residual over grid weights. Supports are limited to `dim + 1`
/// columns, which is enough for any basic solution.
fn grid_oracle(inst: &Instance) -> f64 {
    let mut cols: Vec<(&[f64], bool)> = Vec::new();
    inst.hulls.iter().flatten().for_each(|v| cols.push((v, true)));
    inst.cones.iter().flatten().for_each(|w| cols.push((w, false)));
    let k = inst.dim + 1;
    let mut best = f64::INFINITY;
    let mut subset = Vec::new();
    fn subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut dyn FnMut(&[usize])) {
        if !cur.is_empty() {
            out(cur);
        }
        if cur.len() == k {
            return;
        }
        for i in start..n {
            cur.push(i);
            subsets(n, k, i + 1, cur, out);
            cur.pop();
        }
    }
    subsets(cols.len(), k, 0, &mut subset, &mut |s: &[usize]| {
        let hull: Vec<usize> = s.iter().copied().filter(|&i| cols[i].1).collect();
        let cone: Vec<usize> = s.iter().copied().filter(|&i| !cols[i].1).collect();
        if hull.is_empty() {
            return;
        }
        let steps = GRID as usize;
        let cone_steps = (CONE_MAX * GRID) as usize;
        let mut hw = vec![0usize; hull.len()];
        let mut cw = vec![0usize; cone.len()];
        // enumerate compositions of `steps` into hull.len() parts
        loop {
            let used: usize = hw[..hull.len() - 1].iter().sum();
            if used <= steps {
                hw[hull.len() - 1] = steps - used;
                cw.iter_mut().for_each(|c| *c = 0);
                loop {
                    let mut r = vec![0.0; inst.dim];
                    for (&i, &w) in hull.iter().zip(&hw) {
                        r.iter_mut().zip(cols[i].0).for_each(|(a, b)| *a += w as f64 / GRID * b);
                    }
                    for (&i, &w) in cone.iter().zip(&cw) {
                        r.iter_mut().zip(cols[i].0).for_each(|(a, b)| *a += w as f64 / GRID * b);
                    }
                    best = best.min(r.iter().map(|v| v * v).sum::<f64>().sqrt());
                    let Some(p) = cw.iter().position(|&c| c < cone_steps) else { break };
                    cw[p] += 1;
                    cw[..p].iter_mut().for_each(|c| *c = 0);
                }
            }
            if hull.len() == 1 {
                break;
            }
            let Some(p) = hw[..hull.len() - 1].iter().position(|&c| c < steps) else { break };
            hw[p] += 1;
            hw[..p].iter_mut().for_each(|c| *c = 0);
        }
    });
    best
}

fn random_instance(rng: &mut ChaCha8Rng, feasible: bool) -> Instance {
    let dim = rng.random_range(1..=2);
    let nh = rng.random_range(1..=2);
    let nc = rng.random_range(0..=3 - nh);
    let size = |rng: &mut ChaCha8Rng| rng.random_range(1..=3);
    let point = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
    let mut hulls: Vec<Vec<Vec<f64>>> = (0..nh).map(|_| (0..size(rng)).map(|_| point(rng)).collect()).collect();
    let mut cones: Vec<Vec<Vec<f64>>> = (0..nc).map(|_| (0..size(rng)).map(|_| point(rng)).collect()).collect();
    if feasible {
        // plant a grid solution on at most dim + 1 columns; the last hull
        // point absorbs the rest
        let mut slots: Vec<(bool, usize, usize)> = Vec::new();
        for (k, h) in hulls.iter().enumerate() {
            let skip = if k == nh - 1 { 1 } else { 0 };
            slots.extend((0..h.len() - skip).map(|j| (true, k, j)));
        }
        for (k, c) in cones.iter().enumerate() {
            slots.extend((0..c.len()).map(|j| (false, k, j)));
        }
        let mut total = vec![0.0; dim];
        let mut left = GRID as usize;
        for _ in 0..dim {
            if slots.is_empty() || !rng.random_bool(0.7) {
                continue;
            }
            let (is_hull, k, j) = slots.swap_remove(rng.random_range(0..slots.len()));
            let (w, v) = if is_hull {
                if left <= 1 {
                    continue;
                }
                let w = rng.random_range(1..left);
                left -= w;
                (w, &hulls[k][j])
            } else {
                (rng.random_range(1..=(CONE_MAX * GRID) as usize), &cones[k][j])
            };
            total.iter_mut().zip(v).for_each(|(t, x)| *t += w as f64 / GRID * x);
        }
        let mu = left as f64 / GRID;
        *hulls[nh - 1].last_mut().unwrap() = total.iter().map(|t| -t / mu).collect();
    } else {
        // separate by a direction s with margin: s·v ≥ 1 on hulls, s·w ≥ 0 on cones
        let s: Vec<f64> = {
            let v = point(rng);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            v.iter().map(|x| x / n).collect()
        };
        let push = |p: &mut Vec<f64>, floor: f64| {
            let d: f64 = p.iter().zip(&s).map(|(a, b)| a * b).sum();
            if d < floor {
                p.iter_mut().zip(&s).for_each(|(a, b)| *a += (floor - d) * b);
            }
        };
        hulls.iter_mut().flatten().for_each(|p| push(p, 1.0));
        cones.iter_mut().flatten().for_each(|p| push(p, 0.0));
    }
    Instance { dim, hulls, cones }
}

fn criterion_lp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    let mut worst_residual: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..100 {
        let inst = random_instance(&mut rng, i % 2 == 0);
        let oracle = grid_oracle(&inst) <= 1e-9;
        let tol = DEFAULT_LP_TOL;
        let hulls: Vec<VPolytope> =
            inst.hulls.iter().map(|h| VPolytope::new(inst.dim, h.clone(), 0.0).unwrap()).collect();
        let cones: Vec<VCone> = inst.cones.iter().map(|c| VCone::new(inst.dim, c.clone(), 0.0).unwrap()).collect();
        let cert = zero_in_sum(&hulls, &cones, &VCone::zero(inst.dim), tol).map_err(|e| e.to_string())?;
        if cert.feasible {
            // rebuild from the returned weights
            let mut r = vec![0.0; inst.dim];
            for (h, mu) in hulls.iter().zip(&cert.mu) {
                for (p, w) in h.points().iter().zip(mu) {
                    r.iter_mut().zip(p).for_each(|(a, b)| *a += w * b);
                }
            }
            for (c, nu) in cones.iter().zip(&cert.nu) {
                for (g, w) in c.generators().iter().zip(nu) {
                    r.iter_mut().zip(g).for_each(|(a, b)| *a += w * b);
                }
            }
            let total: f64 = cert.mu.iter().flatten().sum();
            let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_residual = worst_residual.max(res).max((total - 1.0).abs());
        }
        if cert.feasible == oracle {
            agree += 1;
        } else {
            failures.push(format!("#{i}: lp {} oracle {oracle}", cert.feasible));
        }
    }
    ensure(agree == 100, || format!("{agree}/100 agree; {}", failures.join(", ")))?;
    ensure(worst_residual <= RESIDUAL_TOL, || format!("reconstruction residual {worst_residual:e}"))?;
    Ok(format!("100/100 agree, worst reconstruction residual {worst_residual:.1e}"))
}

fn criterion_ekeland() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opts = DescentOptions::default();
    let mut verified = 0;
    let mut reported = 0;
    let mut silent = Vec::new();
    for i in 0..20 {
        let n = 1 + i % 2;
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a: f64 = rng.random_range(0.5..3.0);
        let b: f64 = rng.random_range(0.0..1.0);
        let sq: Vec<String> = c.iter().enumerate().map(|(k, v)| format!("(x{} - ({v:?}))^2", k + 1)).collect();
        let (src, inf) = match i % 4 {
            3 => ("exp(x1)".to_string(), 0.0),
            _ => (format!("{a:?}*({}) + {b:?}*abs(x1 - ({:?}))", sq.join(" + "), c[0]), 0.0),
        };
        let phi = Expr::parse(&src, n).unwrap();
        let p = MinimaxProblem::new(vec![phi.clone()], vec![], GroundSet::full(n)).unwrap();
        let eps: f64 = [1e-1, 1e-2, 1e-3][i % 3];
        // a start with φ(x0) ≤ inf + ε
        let x0: Vec<f64> = if i % 4 == 3 {
            let mut x = vec![eps.ln() - rng.random_range(0.0..2.0)];
            x.resize(n, 0.0);
            x
        } else {
            let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut t = 1.0;
            loop {
                let x: Vec<f64> = c.iter().zip(&dir).map(|(ci, d)| ci + t * d).collect();
                if phi.eval(&x).unwrap() <= inf + eps {
                    break x;
                }
                t *= 0.5;
            }
        };
        match ekeland_witness(&p, &x0, eps, &opts) {
            Err(_) => reported += 1,
            Ok(w) => {
                let lambda = eps.sqrt();
                let f1 = phi.eval(&w.x1).unwrap();
                let dist = |y: &[f64], z: &[f64]| y.iter().zip(z).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                let slack = 1e-9 * (1.0 + f1.abs());
                let mut ok = w.checks.descent && w.checks.proximity && w.checks.perturbed_minimality;
                ok &= f1 <= phi.eval(&x0).unwrap() + slack;
                ok &= dist(&w.x1, &x0) <= lambda + 1e-9;
                // (iii) on independent samples in the ball of radius 10λ
                for _ in 0..EKELAND_SAMPLES {
                    let x: Vec<f64> = w.x1.iter().map(|v| v + rng.random_range(-1.0..1.0) * 10.0 * lambda / (n as f64).sqrt()).collect();
                    ok &= f1 <= phi.eval(&x).unwrap() + eps / lambda * dist(&x, &w.x1) + slack;
                }
                ok &= w.u_norm <= lambda + DEFAULT_LP_TOL;
                if ok {
                    verified += 1;
                } else {
                    silent.push(format!("#{i} {src} x0 {x0:?} ε {eps}"));
                }
            }
        }
    }
    ensure(silent.is_empty(), || format!("silent failures: {}", silent.join("; ")))?;
    ensure(reported == 0, || format!("{reported} instances reported uncertified"))?;
    Ok(format!("{verified}/20 witnesses pass (i)-(iii) on {EKELAND_SAMPLES} samples, 0 silent failures"))
}

fn criterion_sufficiency() -> Outcome {
    let p = MinimaxProblem::new(parse(&["x1^2", "(x1-1)^2"], 1), vec![], GroundSet::full(1)).unwrap();
    let r = Analyzer::new(SamplingPlan::default_for(1)).sufficiency_check(&p).map_err(|e| e.to_string())?;
    ensure(r.membership.as_ref().is_some_and(|m| !m.feasible), || "membership test feasible".into())?;
    ensure(r.verdict == SufficiencyVerdict::NonemptyCompact, || format!("{:?}", r.verdict))?;
    let cv = r.cross_validation.ok_or("no cross-validation")?;
    ensure(cv.runs.len() == 8, || format!("{} starts", cv.runs.len()))?;
    let mut worst: f64 = 0.0;
    for run in &cv.runs {
        ensure(run.status == "converged", || format!("start {:?}: {}", run.start, run.status))?;
        worst = worst.max((run.final_x[0] - 0.5).abs());
        let bound = run.start[0].abs().max(1.0) + 1.0;
        ensure(run.max_norm <= bound, || format!("iterates reached {} from {:?}", run.max_norm, run.start))?;
    }
    ensure(worst <= MINIMIZER_TOL, || format!("minimizer error {worst:e}"))?;
    Ok(format!("membership infeasible, 8/8 starts converge, |x - 0.5| <= {worst:.1e}"))
}

fn criterion_pareto() -> Outcome {
    let plan = SamplingPlan::default_for(1);
    let vp = VectorProblem::new(parse(&["1/(abs(x1)+1)", "0"], 1), parse(&["x1"], 1), GroundSet::full(1)).unwrap();
    let r = check_weak_value_at_infinity(&vp, &[0.0, 0.0], &plan).map_err(|e| e.to_string())?;
    ensure(r.verdict == WeakValueVerdict::Consistent, || format!("ȳ = (0,0): {:?} {:?}", r.verdict, r.notes))?;
    let ev = r.evidence.as_ref().ok_or("no evidence")?;
    ensure(ev.nonnegative_on_samples && ev.escape.is_some(), || "evidence incomplete".into())?;

    let wells = VectorProblem::new(parse(&["x1^2", "(x1-1)^2"], 1), vec![], GroundSet::full(1)).unwrap();
    let s = solution_set_checks(&Analyzer::new(plan), &wells, true).map_err(|e| e.to_string())?;
    ensure(s.weak == SolutionSetVerdict::NonemptyCompact, || format!("weak: {:?}", s.weak))?;
    ensure(s.pareto == SolutionSetVerdict::NonemptyBounded, || format!("Pareto: {:?}", s.pareto))?;
    let text = serde_json::to_string(&s).map_err(|e| e.to_string())?.to_lowercase();
    let claims_closed = s.notes.iter().any(|n| {
        let n = n.to_lowercase();
        n.contains("pareto solution set") && !n.contains("weak pareto") && (n.contains("compact") || (n.contains("closed") && !n.contains("not claimed")))
    });
    ensure(!claims_closed && text.contains("closedness is not claimed"), || "report asserts closedness".into())?;
    Ok(format!("ȳ = (0,0) consistent ({} samples); weak {:?}, Pareto {:?}", ev.samples_checked, s.weak, s.pareto))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("worked example end-to-end", criterion_worked_example),
        ("max rule at infinity", criterion_max_rule),
        ("Fermat rule at infinity", criterion_fermat),
        ("LP membership oracle", criterion_lp_oracle),
        ("Ekeland conclusions", criterion_ekeland),
        ("sufficiency cross-validation", criterion_sufficiency),
        ("Pareto layer", criterion_pareto),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
