//! Sum and max rules at infinity checked on sampled estimates.

use infinity_kkt::asymptotics::{check_sum_rule, max_rule_at_infinity, SamplingPlan, DEFAULT_SLACK};
use infinity_kkt::expr::Expr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = SamplingPlan::default_for(2);
    let f1 = Expr::parse("x1 + 1/(x2^2 + 1)", 2)?;
    let f2 = Expr::parse("abs(x2) - 0.5*x1", 2)?;
    let sum = check_sum_rule(&f1, &f2, &plan, DEFAULT_SLACK)?;
    println!("sum rule: {:?} (max violation {:.3e}) {}", sum.status, sum.max_violation, sum.detail);

    let fs = [
        Expr::parse("x1 - x2", 2)?,
        Expr::parse("2*x2 + x1/(x1^2 + 1)", 2)?,
        Expr::parse("-x1 + 0.5", 2)?,
    ];
    let max = max_rule_at_infinity(&fs, &plan, 1e-3)?;
    println!("max rule: {:?} (max violation {:.3e}) {}", max.status, max.max_violation, max.detail);
    Ok(())
}
