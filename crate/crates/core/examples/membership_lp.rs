//! Is 0 in `Σ α_i co(A_i) + Σ β_j pos(B_j) + N` for some simplex vector α
//! and β ≥ 0? The LP returns weights that rebuild 0, or reports infeasibility.

use infinity_kkt::geometry::{zero_in_sum, VCone, VPolytope, DEFAULT_LP_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = DEFAULT_LP_TOL;
    let a = VPolytope::new(2, vec![vec![1.0, 1.0], vec![2.0, -1.0]], tol)?;
    let b = VPolytope::new(2, vec![vec![-3.0, 0.0], vec![-1.0, 2.0]], tol)?;
    let cone = VCone::new(2, vec![vec![0.0, -1.0]], tol)?;

    let cert = zero_in_sum(&[a.clone(), b.clone()], &[cone], &VCone::zero(2), tol)?;
    println!("feasible: {}  residual {:.2e}", cert.feasible, cert.residual);
    println!("hull weights {:?} (α = {:?})", cert.mu, cert.alpha);
    println!("cone weights {:?}", cert.nu);

    let far = VPolytope::new(2, vec![vec![5.0, 5.0], vec![6.0, 4.0]], tol)?;
    let cert = zero_in_sum(&[a, far], &[], &VCone::zero(2), tol)?;
    println!("shifted instance feasible: {}", cert.feasible);
    Ok(())
}
