//! Parse an expression, evaluate it, and list the gradients of its active
//! smooth branches at a kink.

use infinity_kkt::expr::Expr;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let f = Expr::parse("max(x1^2 + x2, abs(x1 - 1), exp(-x2))", 2)?;
    println!("f = {f}");

    for x in [[0.0, 0.0], [2.0, 1.0], [1.0, 0.0]] {
        let (grads, profile) = f.active_branch_gradients(&x, 64)?;
        println!("f({x:?}) = {:.6}", f.eval(&x)?);
        println!("  active selections: {:?}", profile.selections);
        for g in grads {
            println!("  branch gradient {g:?}");
        }
    }

    // builders give the same structure as parsing
    let x1 = Expr::variable(1, 0);
    let g = Expr::max_of(&[x1.clone(), x1.neg()]).shift(1.0);
    println!("g = {g}, g(-3) = {}", g.eval(&[-3.0])?);

    match Expr::parse("x1 + * 2", 1) {
        Err(e) => println!("syntax error reported: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
