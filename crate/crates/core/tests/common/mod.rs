//! Reference computations shared by the integration tests. Each one is
//! written from the definition, without reusing library code paths.

#![allow(dead_code)]

use nalgebra::DMatrix;

/// `½‖x − v‖² + t1‖x‖₁ + t2‖x‖₂`
pub fn prox_objective(x: &[f64], v: &[f64], t1: f64, t2: f64) -> f64 {
    let quad: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b).powi(2)).sum();
    let l1: f64 = x.iter().map(|a| a.abs()).sum();
    let l2 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    quad + t1 * l1 + t2 * l2
}

/// Minimizer of `½(x − v)² + ½(x − z)² + t|x|` by bisection on its
/// subdifferential, which is monotone in `x`.
fn scalar_prox_bisect(v: f64, z: f64, t: f64) -> f64 {
    // largest x whose subdifferential lies entirely below zero
    let below = |x: f64| {
        let smooth = 2.0 * x - v - z;
        if x > 0.0 {
            smooth + t < 0.0
        } else if x < 0.0 {
            smooth - t < 0.0
        } else {
            smooth + t < 0.0
        }
    };
    let span = v.abs() + z.abs() + t + 1.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1e-300) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Numerical minimizer of [`prox_objective`] by Douglas–Rachford splitting
/// between the separable part (solved coordinate-wise by bisection) and the
/// Euclidean-norm part.
pub fn prox_oracle(v: &[f64], t1: f64, t2: f64) -> Vec<f64> {
    let k = v.len();
    let prox_sep = |z: &[f64]| -> Vec<f64> { (0..k).map(|i| scalar_prox_bisect(v[i], z[i], t1)).collect() };
    let prox_norm = |w: &[f64]| -> Vec<f64> {
        let n = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n <= t2 {
            vec![0.0; k]
        } else {
            w.iter().map(|a| a * (1.0 - t2 / n)).collect()
        }
    };
    let mut z = v.to_vec();
    for _ in 0..200_000 {
        let x = prox_sep(&z);
        let reflected: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 2.0 * a - b).collect();
        let y = prox_norm(&reflected);
        let mut change = 0.0f64;
        for i in 0..k {
            let step = y[i] - x[i];
            z[i] += step;
            change = change.max(step.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    prox_sep(&z)
}

/// Kendall's tau-b by enumerating every pair.
pub fn tau_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut s, mut ties_x, mut ties_y) = (0i64, 0u64, 0u64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap() as i64;
            let dy = y[i].partial_cmp(&y[j]).unwrap() as i64;
            s += dx * dy;
            ties_x += (dx == 0) as u64;
            ties_y += (dy == 0) as u64;
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    if ties_x == n0 || ties_y == n0 {
        return 0.0;
    }
    s as f64 / (((n0 - ties_x) * (n0 - ties_y)) as f64).sqrt()
}

/// Off-diagonal support of a matrix, upper triangle, row-major.
pub fn support(m: &DMatrix<f64>) -> Vec<bool> {
    let p = m.nrows();
    (0..p)
        .flat_map(|i| ((i + 1)..p).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)] != 0.0)
        .collect()
}

pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    m.clone().cholesky().is_some()
}
