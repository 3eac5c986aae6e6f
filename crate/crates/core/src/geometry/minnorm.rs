//! Wolfe's algorithm for the minimum-norm point of a convex hull.

use super::lp::solve_dense;
use super::{dot, norm};

const MAX_MAJOR: usize = 500;
const WEIGHT_TOL: f64 = 1e-14;

/// Returns the point of `co(points)` closest to the origin together with
/// convex weights over `points`. `points` must be nonempty.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!points.is_empty(), "min-norm point of an empty set");
    let dim = points[0].len();
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0f64, f64::max).max(1e-300);

    let start = (0..points.len())
        .min_by(|&i, &j| dot(&points[i], &points[i]).total_cmp(&dot(&points[j], &points[j])))
        .unwrap();
    let mut set = vec![start];
    let mut w = vec![1.0];
    let mut x = points[start].clone();

    for _ in 0..MAX_MAJOR {
        let xx = dot(&x, &x);
        if xx == 0.0 {
            break;
        }
        let (j, xp) = (0..points.len())
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xp <= 1e-12 * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        w.push(0.0);
        loop {
            let Some(v) = affine_minimizer(points, &set) else {
                // affinely dependent set; drop the newcomer and stop
                set.pop();
                w.pop();
                return finish(points, &set, &w, dim);
            };
            if v.iter().all(|&vi| vi > WEIGHT_TOL) {
                w = v;
                break;
            }
            let mut theta = 1.0f64;
            for (wi, vi) in w.iter().zip(&v) {
                if *vi <= WEIGHT_TOL {
                    let denom = wi - vi;
                    if denom > 0.0 {
                        theta = theta.min(wi / denom);
                    }
                }
            }
            for (wi, vi) in w.iter_mut().zip(&v) {
                *wi += theta * (vi - *wi);
            }
            let mut k = 0;
            while k < set.len() {
                if w[k] <= WEIGHT_TOL {
                    set.remove(k);
                    w.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|wi| *wi /= total);
        }
        x = combine(points, &set, &w, dim);
    }
    finish(points, &set, &w, dim)
}

fn finish(points: &[Vec<f64>], set: &[usize], w: &[f64], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut weights = vec![0.0; points.len()];
    for (&i, &wi) in set.iter().zip(w) {
        weights[i] += wi;
    }
    (combine(points, set, w, dim), weights)
}

fn combine(points: &[Vec<f64>], set: &[usize], w: &[f64], dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&i, &wi) in set.iter().zip(w) {
        x.iter_mut().zip(&points[i]).for_each(|(xk, pk)| *xk += wi * pk);
    }
    x
}

/// Minimizes `|sum v_i p_i|` subject to `sum v_i = 1` over the indexed points.
fn affine_minimizer(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let k = set.len();
    let mut mat = vec![vec![0.0; k + 1]; k + 1];
    for a in 0..k {
        for b in 0..k {
            mat[a][b] = dot(&points[set[a]], &points[set[b]]);
        }
        mat[a][k] = 1.0;
        mat[k][a] = 1.0;
    }
    let mut rhs = vec![0.0; k + 1];
    rhs[k] = 1.0;
    let sol = solve_dense(&mut mat, rhs)?;
    Some(sol[..k].to_vec())
}

/// Euclidean distance from `p` to `co(points)`.
pub fn distance_to_hull(p: &[f64], points: &[Vec<f64>]) -> f64 {
    let shifted: Vec<Vec<f64>> =
        points.iter().map(|q| q.iter().zip(p).map(|(a, b)| a - b).collect()).collect();
    norm(&min_norm_point(&shifted).0)
}

/// Least-norm element of `co(points) + pos(generators)`, via nonnegative
/// least squares with the simplex row weighted heavily.
pub fn min_norm_in_sum(points: &[Vec<f64>], generators: &[Vec<f64>]) -> Vec<f64> {
    if generators.is_empty() {
        return min_norm_point(points).0;
    }
    let dim = points[0].len();
    let scale = points.iter().chain(generators).map(|p| norm(p)).fold(1.0, f64::max);
    let big = 1e4 * scale;
    let cols: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().copied().chain([big]).collect())
        .chain(generators.iter().map(|g| g.iter().copied().chain([0.0]).collect()))
        .collect();
    let mut b = vec![0.0; dim];
    b.push(big);
    let mut w = nnls(&cols, &b);
    // the weighted row leaves O(1/big²) error; re-solve exactly on the support
    let support: Vec<usize> = (0..cols.len()).filter(|&k| w[k] > 0.0).collect();
    if support.iter().any(|&k| k < points.len()) {
        let orig = |k: usize| if k < points.len() { &points[k] } else { &generators[k - points.len()] };
        let s = support.len();
        let mut kkt = vec![vec![0.0; s + 1]; s + 1];
        for a in 0..s {
            for c in 0..s {
                kkt[a][c] = dot(orig(support[a]), orig(support[c]));
            }
            if support[a] < points.len() {
                kkt[a][s] = 1.0;
                kkt[s][a] = 1.0;
            }
        }
        let mut rhs = vec![0.0; s + 1];
        rhs[s] = 1.0;
        if let Some(z) = solve_dense(&mut kkt, rhs) {
            if z[..s].iter().all(|v| *v >= -1e-12) {
                w = vec![0.0; cols.len()];
                for (a, &k) in support.iter().enumerate() {
                    w[k] = z[a].max(0.0);
                }
            }
        }
    }
    let mut x = vec![0.0; dim];
    let total: f64 = w[..points.len()].iter().sum();
    for (c, wi) in cols.iter().zip(&w).take(points.len()) {
        x.iter_mut().zip(c).for_each(|(xk, ck)| *xk += wi / total * ck);
    }
    for (c, wi) in cols.iter().zip(&w).skip(points.len()) {
        x.iter_mut().zip(c).for_each(|(xk, ck)| *xk += wi * ck);
    }
    x
}

/// Lawson-Hanson active-set NNLS: `min ‖Σ w_j c_j − b‖`, `w ≥ 0`.
fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = cols.len();
    let mut w = vec![0.0; n];
    let mut passive = vec![false; n];
    let resid = |w: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (c, wi) in cols.iter().zip(w) {
            r.iter_mut().zip(c).for_each(|(rk, ck)| *rk -= wi * ck);
        }
        r
    };
    let scale = b.iter().map(|v| v.abs()).fold(1.0, f64::max);
    for _ in 0..3 * n + 10 {
        let r = resid(&w);
        let grad: Vec<f64> = cols.iter().map(|c| dot(c, &r)).collect();
        let Some(j) = (0..n)
            .filter(|&j| !passive[j] && grad[j] > 1e-12 * scale * scale)
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]))
        else {
            break;
        };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let Some(z) = passive_solve(cols, b, &idx) else {
                passive[j] = false;
                return w;
            };
            if z.iter().all(|v| *v > 0.0) {
                for (&k, zk) in idx.iter().zip(&z) {
                    w[k] = *zk;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (&k, zk) in idx.iter().zip(&z) {
                if *zk <= 0.0 {
                    alpha = alpha.min(w[k] / (w[k] - zk));
                }
            }
            for (&k, zk) in idx.iter().zip(&z) {
                w[k] += alpha * (zk - w[k]);
                if w[k] <= 1e-15 {
                    w[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    w
}

fn passive_solve(cols: &[Vec<f64>], b: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let mut gram: Vec<Vec<f64>> =
        idx.iter().map(|&i| idx.iter().map(|&j| dot(&cols[i], &cols[j])).collect()).collect();
    let rhs: Vec<f64> = idx.iter().map(|&i| dot(&cols[i], b)).collect();
    solve_dense(&mut gram, rhs)
}
