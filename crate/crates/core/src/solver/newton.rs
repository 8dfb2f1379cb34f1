//! Fully coupled Newton iteration on (ψ, φn, φp), used when the Gummel loop
//! stalls under high injection.

use nalgebra::{Matrix3, Vector3};

use super::numerics::{bernoulli, bernoulli_derivative};
use super::state::Problem;

pub(crate) struct Variables<'a> {
    pub psi: &'a mut [f64],
    pub phin: &'a mut [f64],
    pub phip: &'a mut [f64],
}

fn exp_guarded(x: f64) -> f64 {
    x.clamp(-650.0, 650.0).exp()
}

/// Runs damped coupled Newton steps until the largest update is below
/// `tol` (scaled). Returns the update history, or `None` if the block
/// factorization broke down.
pub(crate) fn coupled_newton(
    pr: &Problem,
    v: Variables<'_>,
    gen: Option<&[f64]>,
    clamp: f64,
    tol: f64,
    max_iter: usize,
) -> Option<(bool, Vec<f64>)> {
    let m = v.psi.len();
    let last = m - 1;
    let mat = &pr.material;
    let d2 = pr.debye * pr.debye;
    let dn = mat.diffusivity_n() / d2;
    let dp = mat.diffusivity_p() / d2;
    let (tn, tp) = (mat.tau_n, mat.tau_p);

    let mut lower = vec![Matrix3::<f64>::zeros(); m];
    let mut diag = vec![Matrix3::<f64>::identity(); m];
    let mut upper = vec![Matrix3::<f64>::zeros(); m];
    let mut rhs = vec![Vector3::<f64>::zeros(); m];
    let mut n = vec![0.0; m];
    let mut p = vec![0.0; m];
    let mut history = Vec::new();

    for _ in 0..max_iter {
        for i in 0..m {
            n[i] = exp_guarded(v.psi[i] - v.phin[i]);
            p[i] = exp_guarded(v.phip[i] - v.psi[i]);
        }
        // Edge fluxes and their derivatives w.r.t. (ψ, φ) at both ends.
        let edge = |i: usize| {
            let d = v.psi[i + 1] - v.psi[i];
            let (bp, bm) = (bernoulli(d), bernoulli(-d));
            let (dbp, dbm) = (bernoulli_derivative(d), bernoulli_derivative(-d));
            let h = pr.h[i];
            let (n0, n1, p0, p1) = (n[i], n[i + 1], p[i], p[i + 1]);
            let jn = dn / h * (bp * n1 - bm * n0);
            let jp = dp / h * (bp * p0 - bm * p1);
            // [d/dψ_i, d/dφ_i, d/dψ_{i+1}, d/dφ_{i+1}]
            let djn = [
                dn / h * (-dbp * n1 - dbm * n0 - bm * n0),
                dn / h * (bm * n0),
                dn / h * (dbp * n1 + bp * n1 + dbm * n0),
                dn / h * (-bp * n1),
            ];
            let djp = [
                dp / h * (-dbp * p0 - bp * p0 - dbm * p1),
                dp / h * (bp * p0),
                dp / h * (dbp * p0 + dbm * p1 + bm * p1),
                dp / h * (-bm * p1),
            ];
            (jn, jp, djn, djp)
        };

        let mut prev = edge(0);
        for i in 1..last {
            let next = edge(i);
            let (c, hl, hr) = (pr.vol[i], pr.h[i - 1], pr.h[i]);
            let (ni, pi) = (n[i], p[i]);
            let den = tp * (ni + 1.0) + tn * (pi + 1.0);
            let u = (ni * pi - 1.0) / den;
            let du_dn = (pi * den - (ni * pi - 1.0) * tp) / (den * den);
            let du_dp = (ni * den - (ni * pi - 1.0) * tn) / (den * den);
            let g = gen.map_or(0.0, |g| g[i]);
            // U as a function of (ψ, φn, φp) at node i
            let du = [du_dn * ni - du_dp * pi, -du_dn * ni, du_dp * pi];

            let lap = ((v.psi[i + 1] - v.psi[i]) / hr - (v.psi[i] - v.psi[i - 1]) / hl) / c;
            let f = Vector3::new(
                lap - ni + pi + pr.nd[i],
                (next.0 - prev.0) / c - u + g,
                (next.1 - prev.1) / c + u - g,
            );

            let mut a = Matrix3::zeros();
            let mut d = Matrix3::zeros();
            let mut b = Matrix3::zeros();
            // Poisson row
            a[(0, 0)] = 1.0 / (hl * c);
            b[(0, 0)] = 1.0 / (hr * c);
            d[(0, 0)] = -a[(0, 0)] - b[(0, 0)] - ni - pi;
            d[(0, 1)] = ni;
            d[(0, 2)] = pi;
            // electron row: (Jn_right - Jn_left)/c - U
            let (jl, jr) = (prev.2, next.2);
            a[(1, 0)] = -jl[0] / c;
            a[(1, 1)] = -jl[1] / c;
            d[(1, 0)] = (jr[0] - jl[2]) / c - du[0];
            d[(1, 1)] = (jr[1] - jl[3]) / c - du[1];
            d[(1, 2)] = -du[2];
            b[(1, 0)] = jr[2] / c;
            b[(1, 1)] = jr[3] / c;
            // hole row: (Jp_right - Jp_left)/c + U
            let (kl, kr) = (prev.3, next.3);
            a[(2, 0)] = -kl[0] / c;
            a[(2, 2)] = -kl[1] / c;
            d[(2, 0)] = (kr[0] - kl[2]) / c + du[0];
            d[(2, 1)] = du[1];
            d[(2, 2)] = (kr[1] - kl[3]) / c + du[2];
            b[(2, 0)] = kr[2] / c;
            b[(2, 2)] = kr[3] / c;

            // row equilibration
            for r in 0..3 {
                let s = d[(r, r)].abs().max(1e-300);
                for k in 0..3 {
                    a[(r, k)] /= s;
                    d[(r, k)] /= s;
                    b[(r, k)] /= s;
                }
                rhs[i][r] = -f[r] / s;
            }
            lower[i] = a;
            diag[i] = d;
            upper[i] = b;
            prev = next;
        }
        for i in [0, last] {
            lower[i] = Matrix3::zeros();
            upper[i] = Matrix3::zeros();
            diag[i] = Matrix3::identity();
            rhs[i] = Vector3::zeros();
        }

        // block Thomas
        let mut dinv = vec![Matrix3::<f64>::zeros(); m];
        dinv[0] = diag[0].try_inverse()?;
        for i in 1..m {
            let w = lower[i] * dinv[i - 1];
            let di = diag[i] - w * upper[i - 1];
            rhs[i] = rhs[i] - w * rhs[i - 1];
            dinv[i] = di.try_inverse()?;
        }
        let mut x = vec![Vector3::<f64>::zeros(); m];
        x[last] = dinv[last] * rhs[last];
        for i in (0..last).rev() {
            x[i] = dinv[i] * (rhs[i] - upper[i] * x[i + 1]);
        }

        let mut update: f64 = 0.0;
        for (i, &dx) in x.iter().enumerate().take(last).skip(1) {
            if !(dx[0].is_finite() && dx[1].is_finite() && dx[2].is_finite()) {
                return None;
            }
            // shared damping keeps the three components consistent
            let big = dx.amax();
            let t = if big > clamp { clamp / big } else { 1.0 };
            v.psi[i] += t * dx[0];
            v.phin[i] += t * dx[1];
            v.phip[i] += t * dx[2];
            update = update.max(t * big);
        }
        history.push(update);
        if update < tol {
            return Some((true, history));
        }
    }
    Some((false, history))
}
