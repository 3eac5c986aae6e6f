//! A minimizing sequence that escapes to infinity, with the approximate
//! stationarity witnesses collected along its tail.

use infinity_kkt::asymptotics::SamplingPlan;
use infinity_kkt::descent::{ekeland_witness, escape_evidence, minimize, DescentOptions};
use infinity_kkt::expr::Expr;
use infinity_kkt::kkt::MinimaxProblem;
use infinity_kkt::subdiff_point::GroundSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = SamplingPlan::default_for(1);
    let opts = DescentOptions::from_plan(&plan);
    let p = MinimaxProblem::new(vec![Expr::parse("exp(x1)", 1)?], vec![], GroundSet::full(1))?;

    let t = minimize(&p, &[0.0], &opts)?;
    println!("status: {} after {} iterations", t.status.label(), t.iterates.len() - 1);
    let e = escape_evidence(&t, &plan)?;
    println!("direction {:?}, φ → {:.3e}", e.direction, e.phi_limit);
    for (w, n) in e.witnesses.iter().zip(&e.witness_norms) {
        println!("  x1 = {:.3e}  ‖u‖ = {n:.3e}", w.x1[0]);
    }

    let w = ekeland_witness(&p, &[-3.0], 0.01, &opts)?;
    println!(
        "witness from -3 with ε = 0.01: x1 = {:.6}, ‖u‖ = {:.3e}, checks {:?}",
        w.x1[0], w.u_norm, w.checks
    );
    Ok(())
}
