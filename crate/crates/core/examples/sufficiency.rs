//! Existence of a compact solution set, backed by multi-start descent.

use infinity_kkt::asymptotics::SamplingPlan;
use infinity_kkt::expr::Expr;
use infinity_kkt::kkt::{Analyzer, MinimaxProblem};
use infinity_kkt::subdiff_point::GroundSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = Analyzer::new(SamplingPlan::default_for(1));
    for objs in [vec!["x1^2", "(x1-1)^2"], vec!["1/(x1^2+1)"], vec!["abs(x1) + 2*atan(x1)"]] {
        let p = MinimaxProblem::new(
            objs.iter().map(|s| Expr::parse(s, 1)).collect::<Result<_, _>>()?,
            vec![],
            GroundSet::full(1),
        )?;
        let r = a.sufficiency_check(&p)?;
        println!("max{objs:?}: {:?}", r.verdict);
        if let Some(cv) = &r.cross_validation {
            let ends: Vec<String> = cv.runs.iter().map(|d| format!("{:.4}", d.final_x[0])).collect();
            println!("  descent end points {}", ends.join(" "));
        }
        for n in &r.notes {
            println!("  {n}");
        }
    }
    Ok(())
}
