//! Outer-limit estimates of subdifferentials and normal cones at infinity.

use infinity_kkt::asymptotics::{normal_cone_at_infinity, subdiff_at_infinity, SamplingPlan};
use infinity_kkt::expr::Expr;
use infinity_kkt::subdiff_point::GroundSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let plan = SamplingPlan::default_for(1);
    for src in ["1/(abs(x1)+1)", "x1", "abs(x1) + atan(x1)", "exp(x1)", "x1^2"] {
        let f = Expr::parse(src, 1)?;
        let s = subdiff_at_infinity(&f, &plan)?;
        println!("{src}:");
        println!("  bounded part {:?}", s.bounded_part.points());
        println!("  recession cone {:?}", s.recession_cone.generators());
        println!("  Lipschitz at infinity: {} {:?}", s.lipschitz_at_infinity, s.lipschitz_constants);
    }

    let plan = SamplingPlan::default_for(2);
    let omega = GroundSet::polyhedron(vec![vec![1.0, 1.0]], vec![-2.0])?;
    let n = normal_cone_at_infinity(&omega, &plan)?;
    println!("N_Ω(∞) for x1 + x2 <= -2: {:?}", n.bounded_part.points());
    Ok(())
}
