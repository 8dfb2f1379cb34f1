//! Small numerical kernels shared by the Poisson and continuity solves.

/// Bernoulli function B(x) = x / (eˣ − 1), with B(0) = 1.
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-10 {
        1.0 - 0.5 * x
    } else if x > 740.0 {
        0.0
    } else {
        x / x.exp_m1()
    }
}

/// dB/dx.
pub fn bernoulli_derivative(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        -0.5 + x / 6.0 - x * x * x / 180.0
    } else if x > 740.0 {
        0.0
    } else {
        let b = bernoulli(x);
        b * (1.0 - b) / x - b
    }
}

/// Solves a tridiagonal system in place with the Thomas algorithm.
///
/// `lower[i]` multiplies x[i-1] in row i (lower[0] unused), `upper[i]`
/// multiplies x[i+1] (last entry unused). Intended for diagonally dominant
/// systems, so no pivoting.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    c[0] = upper[0] / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / beta;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}
