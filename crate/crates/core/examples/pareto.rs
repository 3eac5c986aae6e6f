//! Weak Pareto values at infinity and solution-set checks for a vector problem.

use infinity_kkt::asymptotics::SamplingPlan;
use infinity_kkt::expr::Expr;
use infinity_kkt::kkt::Analyzer;
use infinity_kkt::pareto::{candidate_values, check_weak_value_at_infinity, solution_set_checks, VectorProblem};
use infinity_kkt::subdiff_point::GroundSet;

fn parse(srcs: &[&str]) -> Result<Vec<Expr>, infinity_kkt::expr::ExprError> {
    srcs.iter().map(|s| Expr::parse(s, 1)).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = SamplingPlan::default_for(1);
    let vp = VectorProblem::new(parse(&["1/(abs(x1)+1)", "0"])?, parse(&["x1"])?, GroundSet::full(1))?;
    for ybar in [[0.0, 0.0], [-1.0, 0.0], [0.9, 0.5]] {
        let r = check_weak_value_at_infinity(&vp, &ybar, &plan)?;
        println!("ȳ = {ybar:?}: {:?}", r.verdict);
        if let Some(w) = &r.refutation {
            println!("  dominated by f({:?}) = {:?}", w.x, w.values);
        }
    }

    let wells = VectorProblem::new(parse(&["x1^2", "(x1-1)^2"])?, vec![], GroundSet::full(1))?;
    let s = solution_set_checks(&Analyzer::new(plan.clone()), &wells, true)?;
    println!("weak solutions: {:?}, Pareto solutions: {:?}", s.weak, s.pareto);
    for n in &s.notes {
        println!("  {n}");
    }
    println!("nondominated sampled values: {}", candidate_values(&wells, &plan).len());
    Ok(())
}
