//! Subdifferentials at a point and normal cones of a box.

use infinity_kkt::expr::Expr;
use infinity_kkt::subdiff_point::{normal_cone_at, subdiff_at, subdiff_at_detailed, GroundSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let abs = Expr::parse("abs(x1)", 1)?;
    println!("∂|x|(0) vertices: {:?}", subdiff_at(&abs, &[0.0])?.points());

    let f = Expr::parse("max(x1, x2, -x1 - x2)", 2)?;
    let d = subdiff_at_detailed(&f, &[0.0, 0.0])?;
    println!("∂f(0) has {} vertices from {} branches:", d.set.len(), d.branches);
    for p in d.set.points() {
        println!("  {p:?}");
    }

    let omega = GroundSet::boxed(vec![0.0, 0.0], vec![1.0, f64::INFINITY])?;
    for x in [[0.5, 3.0], [0.0, 0.0], [1.0, 5.0]] {
        let n = normal_cone_at(&omega, &x)?;
        println!("N_Ω({x:?}) generators: {:?}", n.generators());
    }
    Ok(())
}
