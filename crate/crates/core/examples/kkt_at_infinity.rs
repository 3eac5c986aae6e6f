//! The full pipeline on a problem whose infimum is only approached at
//! infinity: min max(1/(|x|+1), 0) subject to x <= 0.

use infinity_kkt::asymptotics::SamplingPlan;
use infinity_kkt::expr::Expr;
use infinity_kkt::kkt::{Analyzer, MinimaxProblem};
use infinity_kkt::subdiff_point::GroundSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = MinimaxProblem::new(
        vec![Expr::parse("1/(abs(x1)+1)", 1)?, Expr::parse("0", 1)?],
        vec![Expr::parse("x1", 1)?],
        GroundSet::full(1),
    )?;
    let a = Analyzer::new(SamplingPlan::default_for(1));
    let (report, sufficiency) = a.analyze(&p)?;

    for (i, s) in report.sets.objectives.iter().enumerate() {
        println!("∂f{}(∞) = {:?}", i + 1, s.bounded_part.points());
    }
    println!("∂g(∞) = {:?}", report.sets.constraints[0].bounded_part.points());
    println!("CQ: {:?} ({})", report.cq.status, report.cq.detail);
    println!("verdict: {:?}: {}", report.verdict, report.message);
    println!("α = {:?}, β = {:?}, residual {:.2e}", report.alpha, report.beta, report.membership.residual);
    if let Some(e) = &report.escape {
        println!("escape along {:?}, φ → {:.3e}", e.direction, e.phi_limit);
    }
    println!("sufficiency: {:?}", sufficiency.verdict);
    Ok(())
}
