//! Independent reference routines for oracle tests. Nothing here calls the
//! library's solvers.

#![allow(dead_code)]

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Weighted normal equations `(XᵀWX) β = XᵀWy` for row-major `x`.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for ((row, &yi), &wi) in x.iter().zip(y).zip(w) {
        for j in 0..p {
            b[j] += wi * row[j] * yi;
            for k in 0..p {
                a[j][k] += wi * row[j] * row[k];
            }
        }
    }
    gauss_solve(a, b)
}

/// Largest residual after least-squares projection of every column of
/// `target` onto the span of the columns of `basis` (both row-major).
pub fn projection_residual(basis: &[Vec<f64>], target: &[Vec<f64>]) -> f64 {
    let ones = vec![1.0; basis.len()];
    let mut worst: f64 = 0.0;
    for j in 0..target[0].len() {
        let y: Vec<f64> = target.iter().map(|r| r[j]).collect();
        let beta = normal_equations(basis, &y, &ones);
        for (row, yi) in basis.iter().zip(&y) {
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            worst = worst.max((fit - yi).abs());
        }
    }
    worst
}

/// Type-7 sample quantile.
pub fn quantile7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Deterministic pseudo-random numbers in [0, 1) from a 64-bit LCG.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next().max(1e-300);
        let u2 = self.next();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Newton-Raphson on the Bernoulli log-likelihood, solved by Gaussian elimination.
pub fn newton_logistic(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut beta = vec![0.0; p];
    for _ in 0..100 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (row, &yi) in x.iter().zip(y) {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = 1.0 / (1.0 + (-eta).exp());
            for j in 0..p {
                grad[j] += row[j] * (yi - mu);
                for k in 0..p {
                    hess[j][k] += row[j] * row[k] * mu * (1.0 - mu);
                }
            }
        }
        let step = gauss_solve(hess, grad);
        for (b, s) in beta.iter_mut().zip(&step) {
            *b += s;
        }
        if step.iter().all(|s| s.abs() < 1e-14) {
            break;
        }
    }
    beta
}

/// Natural cubic spline basis in truncated-power form: 1, x and
/// `d_k - d_{K-1}` with `d_k = ((x-ξ_k)₊³ - (x-ξ_K)₊³)/(ξ_K - ξ_k)`.
pub fn truncated_power_natural(knots: &[f64], x: f64) -> Vec<f64> {
    let k = knots.len();
    let cube = |v: f64| v.max(0.0).powi(3);
    let d = |j: usize| (cube(x - knots[j]) - cube(x - knots[k - 1])) / (knots[k - 1] - knots[j]);
    let mut row = vec![1.0, x];
    for j in 0..k - 2 {
        row.push(d(j) - d(k - 2));
    }
    row
}

/// Mean, variance and degrees of freedom of the posterior predictive at `x0`
/// for a normal linear model under the prior p(β, σ²) ∝ 1/σ²: a t law with
/// ν = n - p, location x₀ᵀβ̂ and squared scale s²(1 + x₀ᵀ(XᵀX)⁻¹x₀).
pub fn conjugate_predictive(x: &[Vec<f64>], y: &[f64], x0: &[f64]) -> (f64, f64, f64) {
    let p = x0.len();
    let beta = normal_equations(x, y, &vec![1.0; x.len()]);
    let nu = (x.len() - p) as f64;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, yi)| (yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>()).powi(2))
        .sum();
    let mut xtx = vec![vec![0.0; p]; p];
    for r in x {
        for a in 0..p {
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    let v = gauss_solve(xtx, x0.to_vec());
    let h: f64 = x0.iter().zip(&v).map(|(a, b)| a * b).sum();
    let mean: f64 = x0.iter().zip(&beta).map(|(a, b)| a * b).sum();
    (mean, rss / nu * (1.0 + h) * nu / (nu - 2.0), nu)
}
