//! Dense phase-1 simplex for `A x = b, x >= 0` with Bland's anti-cycling rule.

use super::GeometryError;

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub feasible: bool,
    pub x: Vec<f64>,
    /// Phase-1 objective at termination (sum of artificial variables).
    pub infeasibility: f64,
    pub pivots: usize,
}

/// Decides feasibility of `A x = b, x >= 0`. `rows` is `m x n`.
pub fn phase_one(rows: &[Vec<f64>], b: &[f64], tol: f64) -> Result<LpSolution, GeometryError> {
    let m = rows.len();
    assert_eq!(m, b.len());
    let n = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != n) {
        return Err(GeometryError::DimensionMismatch("ragged constraint matrix".into()));
    }
    // orient rows so the right-hand side is nonnegative
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut rhs = b.to_vec();
    for i in 0..m {
        if rhs[i] < 0.0 {
            rhs[i] = -rhs[i];
            a[i].iter_mut().for_each(|v| *v = -*v);
        }
    }
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = rhs[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    // reduced costs of min sum(artificials)
    let mut cost = vec![0.0; width];
    for j in 0..n {
        cost[j] = -(0..m).map(|i| t[i][j]).sum::<f64>();
    }
    cost[width - 1] = -rhs.iter().sum::<f64>();

    let mut pivots = 0;
    while let Some(enter) = (0..n).find(|&j| cost[j] < -PIVOT_TOL) {
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > PIVOT_TOL {
                let ratio = t[i][width - 1] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[l])
                    }
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        // unbounded direction cannot occur: the phase-1 objective is bounded below
        let Some(r) = leave else { break };
        pivot(&mut t, &mut cost, r, enter);
        basis[r] = enter;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(GeometryError::Degenerate(format!(
                "phase-1 simplex exceeded {MAX_PIVOTS} pivots ({m} rows, {n} columns)"
            )));
        }
    }

    let mut x = vec![0.0; n];
    let mut art = vec![0.0; m];
    for i in 0..m {
        let val = t[i][width - 1];
        if basis[i] < n {
            x[basis[i]] = val;
        } else {
            art[basis[i] - n] = val;
        }
    }
    // refine the basic solution by a direct solve against the original columns
    if let Some(xb) = solve_basis(&a, &rhs, &basis, n) {
        let mut xr = vec![0.0; n];
        let mut ar = vec![0.0; m];
        for (i, &j) in basis.iter().enumerate() {
            if j < n {
                xr[j] = xb[i];
            } else {
                ar[j - n] = xb[i];
            }
        }
        if xr.iter().chain(&ar).all(|v| *v >= -1e-9) {
            x = xr.into_iter().map(|v| v.max(0.0)).collect();
            art = ar.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    let infeasibility: f64 = art.iter().map(|v| v.abs()).sum();
    Ok(LpSolution { feasible: infeasibility <= tol, x, infeasibility, pivots })
}

fn pivot(t: &mut [Vec<f64>], cost: &mut [f64], r: usize, c: usize) {
    let p = t[r][c];
    t[r].iter_mut().for_each(|v| *v /= p);
    let row = t[r].clone();
    for (i, ti) in t.iter_mut().enumerate() {
        if i != r {
            let f = ti[c];
            if f != 0.0 {
                ti.iter_mut().zip(&row).for_each(|(v, rv)| *v -= f * rv);
            }
        }
    }
    let f = cost[c];
    if f != 0.0 {
        cost.iter_mut().zip(&row).for_each(|(v, rv)| *v -= f * rv);
    }
}

fn solve_basis(a: &[Vec<f64>], rhs: &[f64], basis: &[usize], n: usize) -> Option<Vec<f64>> {
    let m = rhs.len();
    let mut mat: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            basis
                .iter()
                .map(|&j| if j < n { a[i][j] } else if j - n == i { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    solve_dense(&mut mat, rhs.to_vec())
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub(crate) fn solve_dense(mat: &mut [Vec<f64>], mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let m = rhs.len();
    let scale = mat.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))?;
        if mat[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for i in col + 1..m {
            let f = mat[i][col] / mat[col][col];
            if f != 0.0 {
                for k in col..m {
                    mat[i][k] -= f * mat[col][k];
                }
                rhs[i] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|k| mat[i][k] * x[k]).sum();
        x[i] = (rhs[i] - s) / mat[i][i];
    }
    Some(x)
}
