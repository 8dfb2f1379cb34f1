use std::sync::Arc;

use super::newton::{coupled_newton, Variables};
use super::numerics::{bernoulli, solve_tridiagonal};
use super::observables::terminal_currents;
use super::state::{BiasPoint, Problem, Simulation, SolverOptions, SolverState, SolverWarning};
use super::material::MaterialParams;
use super::mesh::Mesh1D;
use crate::device::DopingProfile;
use crate::error::{Error, Result};

/// Exponent guard against overflow in transient Newton iterates.
const EXP_LIMIT: f64 = 650.0;

fn exp_guarded(x: f64) -> f64 {
    x.clamp(-EXP_LIMIT, EXP_LIMIT).exp()
}

/// Scaled working copy of a solution.
#[derive(Clone)]
struct Work {
    psi: Vec<f64>,
    phin: Vec<f64>,
    phip: Vec<f64>,
    n: Vec<f64>,
    p: Vec<f64>,
}

impl Work {
    fn from_state(s: &SolverState) -> Self {
        let pr = &s.problem;
        Self {
            psi: s.psi.iter().map(|v| v / pr.vt).collect(),
            phin: s.phi_n.iter().map(|v| v / pr.vt).collect(),
            phip: s.phi_p.iter().map(|v| v / pr.vt).collect(),
            n: s.n.iter().map(|v| v / pr.ni).collect(),
            p: s.p.iter().map(|v| v / pr.ni).collect(),
        }
    }

    fn into_state(
        self,
        problem: &Arc<Problem>,
        bias: f64,
        generation: Option<Vec<f64>>,
        iterations: usize,
    ) -> SolverState {
        let (vt, ni) = (problem.vt, problem.ni);
        let residual_norm = poisson_residual_scaled(problem, &self.psi, &self.n, &self.p) * vt;
        SolverState {
            problem: Arc::clone(problem),
            psi: self.psi.iter().map(|v| v * vt).collect(),
            n: self.n.iter().map(|v| v * ni).collect(),
            p: self.p.iter().map(|v| v * ni).collect(),
            phi_n: self.phin.iter().map(|v| v * vt).collect(),
            phi_p: self.phip.iter().map(|v| v * vt).collect(),
            bias,
            generation,
            converged: true,
            residual_norm,
            iterations,
            warnings: Vec::new(),
        }
    }

    fn carriers_from_quasi_fermi(&mut self) {
        for i in 0..self.psi.len() {
            self.n[i] = exp_guarded(self.psi[i] - self.phin[i]);
            self.p[i] = exp_guarded(self.phip[i] - self.psi[i]);
        }
    }

    fn apply_contacts(&mut self, pr: &Problem, vb: f64) {
        let last = self.psi.len() - 1;
        for (i, v) in [(0, vb), (last, 0.0)] {
            self.psi[i] = pr.psi_neutral[i] + v;
            self.phin[i] = v;
            self.phip[i] = v;
            self.n[i] = pr.psi_neutral[i].exp();
            self.p[i] = (-pr.psi_neutral[i]).exp();
        }
    }
}

/// max_i |F_i| / |∂F_i/∂ψ_i| of the scaled Poisson equation.
pub(crate) fn poisson_residual_scaled(pr: &Problem, psi: &[f64], n: &[f64], p: &[f64]) -> f64 {
    let last = psi.len() - 1;
    (1..last)
        .map(|i| {
            let (hl, hr) = (pr.h[i - 1], pr.h[i]);
            let lap = ((psi[i + 1] - psi[i]) / hr - (psi[i] - psi[i - 1]) / hl) / pr.vol[i];
            let f = lap - (n[i] - p[i] - pr.nd[i]);
            let d = (1.0 / hl + 1.0 / hr) / pr.vol[i] + n[i] + p[i];
            f.abs() / d
        })
        .fold(0.0, f64::max)
}

/// Damped Newton on the nonlinear Poisson equation with quasi-Fermi
/// potentials held fixed. Returns the number of Newton steps and the last
/// max update (scaled).
fn poisson_newton(pr: &Problem, w: &mut Work, clamp: f64, tol: f64, max_iter: usize) -> (usize, f64) {
    let m = w.psi.len();
    let last = m - 1;
    let mut lower = vec![0.0; m];
    let mut diag = vec![1.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut update = f64::INFINITY;
    for it in 1..=max_iter {
        lower[0] = 0.0;
        upper[0] = 0.0;
        diag[0] = 1.0;
        rhs[0] = 0.0;
        lower[last] = 0.0;
        upper[last] = 0.0;
        diag[last] = 1.0;
        rhs[last] = 0.0;
        for i in 1..last {
            let (hl, hr, c) = (pr.h[i - 1], pr.h[i], pr.vol[i]);
            let n = exp_guarded(w.psi[i] - w.phin[i]);
            let p = exp_guarded(w.phip[i] - w.psi[i]);
            let lap = ((w.psi[i + 1] - w.psi[i]) / hr - (w.psi[i] - w.psi[i - 1]) / hl) / c;
            lower[i] = 1.0 / (hl * c);
            upper[i] = 1.0 / (hr * c);
            diag[i] = -lower[i] - upper[i] - (n + p);
            rhs[i] = -(lap - (n - p - pr.nd[i]));
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        update = 0.0;
        for (psi, r) in w.psi[1..last].iter_mut().zip(&rhs[1..last]) {
            let d = r.clamp(-clamp, clamp);
            *psi += d;
            update = update.max(d.abs());
        }
        if update < tol {
            return (it, update);
        }
    }
    (max_iter, update)
}

/// Solves the electron continuity equation for n given ψ, with SRH
/// linearized around the current carrier densities.
fn solve_electrons(pr: &Problem, w: &mut Work, gen: Option<&[f64]>) {
    let m = w.psi.len();
    let last = m - 1;
    let mat = &pr.material;
    let dn = mat.diffusivity_n() / (pr.debye * pr.debye);
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; m], vec![1.0; m], vec![0.0; m], vec![0.0; m]);
    rhs[0] = w.n[0];
    rhs[last] = w.n[last];
    for i in 1..last {
        let (hl, hr, c) = (pr.h[i - 1], pr.h[i], pr.vol[i]);
        let dl = w.psi[i] - w.psi[i - 1];
        let dr = w.psi[i + 1] - w.psi[i];
        let den = mat.tau_p * (w.n[i] + 1.0) + mat.tau_n * (w.p[i] + 1.0);
        lower[i] = -dn * bernoulli(-dl) / (hl * c);
        upper[i] = -dn * bernoulli(dr) / (hr * c);
        diag[i] = dn * (bernoulli(-dr) / hr + bernoulli(dl) / hl) / c + w.p[i] / den;
        rhs[i] = 1.0 / den + gen.map_or(0.0, |g| g[i]);
    }
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
    w.n = rhs;
}

fn solve_holes(pr: &Problem, w: &mut Work, gen: Option<&[f64]>) {
    let m = w.psi.len();
    let last = m - 1;
    let mat = &pr.material;
    let dp = mat.diffusivity_p() / (pr.debye * pr.debye);
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; m], vec![1.0; m], vec![0.0; m], vec![0.0; m]);
    rhs[0] = w.p[0];
    rhs[last] = w.p[last];
    for i in 1..last {
        let (hl, hr, c) = (pr.h[i - 1], pr.h[i], pr.vol[i]);
        let dl = w.psi[i] - w.psi[i - 1];
        let dr = w.psi[i + 1] - w.psi[i];
        let den = mat.tau_p * (w.n[i] + 1.0) + mat.tau_n * (w.p[i] + 1.0);
        lower[i] = -dp * bernoulli(dl) / (hl * c);
        upper[i] = -dp * bernoulli(-dr) / (hr * c);
        diag[i] = dp * (bernoulli(dr) / hr + bernoulli(-dl) / hl) / c + w.n[i] / den;
        rhs[i] = 1.0 / den + gen.map_or(0.0, |g| g[i]);
    }
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
    w.p = rhs;
}

/// Gummel iteration at fixed bias, starting from `w`.
fn gummel(
    pr: &Problem,
    w: &mut Work,
    bias: f64,
    gen: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<usize> {
    let vt = pr.vt;
    let vb = bias / vt;
    let tol = opts.absolute_tolerance / vt;
    let clamp = opts.potential_update_clamp / vt;
    let gen_scaled: Option<Vec<f64>> = gen.map(|g| g.iter().map(|v| v / pr.ni).collect());
    w.apply_contacts(pr, vb);
    let mut history = Vec::new();
    let last = w.psi.len() - 1;
    for it in 1..=opts.max_outer_iterations {
        let psi_old = w.psi.clone();
        poisson_newton(pr, w, clamp, 0.1 * tol, opts.max_newton_iterations);
        let dpsi = w
            .psi
            .iter()
            .zip(&psi_old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w.carriers_from_quasi_fermi();
        solve_electrons(pr, w, gen_scaled.as_deref());
        solve_holes(pr, w, gen_scaled.as_deref());
        let mut dphi: f64 = 0.0;
        let mut finite = true;
        for i in 1..last {
            let phin = w.psi[i] - w.n[i].ln();
            let phip = w.psi[i] + w.p[i].ln();
            if !(phin.is_finite() && phip.is_finite()) {
                finite = false;
                break;
            }
            dphi = dphi.max((phin - w.phin[i]).abs()).max((phip - w.phip[i]).abs());
            w.phin[i] = phin;
            w.phip[i] = phip;
        }
        let update = dpsi.max(dphi) * vt;
        history.push(update);
        if !finite || !update.is_finite() {
            return Err(Error::NonConvergence {
                bias,
                iterations: it,
                last_update: f64::NAN,
                history,
            });
        }
        if dpsi < tol && dphi < tol {
            return Ok(it);
        }
        if it % opts.gummel_stall_iterations == 0 {
            let backup = w.clone();
            let outcome = coupled_newton(
                pr,
                Variables {
                    psi: &mut w.psi,
                    phin: &mut w.phin,
                    phip: &mut w.phip,
                },
                gen_scaled.as_deref(),
                clamp,
                tol,
                opts.max_newton_iterations,
            );
            match outcome {
                Some((true, h)) => {
                    history.extend(h.iter().map(|u| u * vt));
                    w.carriers_from_quasi_fermi();
                    return Ok(it + h.len());
                }
                _ => *w = backup,
            }
        }
    }
    Err(Error::NonConvergence {
        bias,
        iterations: opts.max_outer_iterations,
        last_update: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

fn generation_for<'a>(pr: &Problem, opts: &'a SolverOptions) -> Result<Option<&'a [f64]>> {
    match &opts.generation_profile {
        Some(g) if g.len() != pr.len() => Err(Error::InvalidInput(format!(
            "generation profile has {} entries for a {}-node mesh",
            g.len(),
            pr.len()
        ))),
        Some(g) => Ok(Some(g.as_slice())),
        None => Ok(None),
    }
}

/// Thermal-equilibrium solution on a prepared problem.
pub fn solve_equilibrium_problem(problem: &Arc<Problem>, options: &SolverOptions) -> Result<SolverState> {
    options.validate()?;
    let pr = problem.as_ref();
    let m = pr.len();
    let mut w = Work {
        psi: pr.psi_neutral.clone(),
        phin: vec![0.0; m],
        phip: vec![0.0; m],
        n: vec![0.0; m],
        p: vec![0.0; m],
    };
    w.apply_contacts(pr, 0.0);
    let tol = options.absolute_tolerance / pr.vt;
    let clamp = options.potential_update_clamp / pr.vt;
    let max_iter = options.max_newton_iterations.max(options.max_outer_iterations);
    let mut history = Vec::new();
    let mut iterations = 0;
    // Newton in chunks so a residual history is available on failure.
    loop {
        let (it, update) = poisson_newton(pr, &mut w, clamp, tol, 1);
        iterations += it;
        history.push(update * pr.vt);
        if update < tol {
            break;
        }
        if iterations >= max_iter || !update.is_finite() {
            return Err(Error::NonConvergence {
                bias: 0.0,
                iterations,
                last_update: update * pr.vt,
                history,
            });
        }
    }
    w.carriers_from_quasi_fermi();
    Ok(w.into_state(problem, 0.0, None, iterations))
}

/// Equilibrium solve from a doping profile, material and mesh.
pub fn solve_equilibrium(
    profile: &DopingProfile,
    material: &MaterialParams,
    mesh: &Mesh1D,
    options: &SolverOptions,
) -> Result<SolverState> {
    let problem = Problem::new(profile, material, mesh.clone(), 1.0)?;
    solve_equilibrium_problem(&problem, options)
}

/// Re-solves at the state's own bias with the generation profile in
/// `options` (which may differ from the one the state was solved with).
pub fn resolve(state: &SolverState, options: &SolverOptions) -> Result<SolverState> {
    options.validate()?;
    let pr = state.problem.as_ref();
    let gen = generation_for(pr, options)?;
    let mut w = Work::from_state(state);
    let it = gummel(pr, &mut w, state.bias, gen, options)?;
    let mut out = w.into_state(&state.problem, state.bias, gen.map(<[f64]>::to_vec), it);
    out.warnings = state.warnings.clone();
    Ok(out)
}

/// Advances `state` to `target` bias by continuation.
pub fn step_bias(state: &SolverState, target: f64, options: &SolverOptions) -> Result<SolverState> {
    if target == state.bias {
        return Ok(state.clone());
    }
    options.validate()?;
    if !target.is_finite() {
        return Err(Error::InvalidInput(format!("bias must be finite, got {target}")));
    }
    let problem = &state.problem;
    let pr = problem.as_ref();
    let gen = generation_for(pr, options)?;
    let vt = pr.vt;

    let mut current = (state.bias, Work::from_state(state));
    let mut previous: Option<(f64, Work)> = None;
    let mut step = options.bias_step_max;
    let mut history = Vec::new();
    let mut iterations = 0;
    while current.0 != target {
        let remaining = target - current.0;
        let next = if remaining.abs() <= step {
            target
        } else {
            current.0 + step.copysign(remaining)
        };
        let dv = next - current.0;
        let mut guess = current.1.clone();
        match &previous {
            Some((vb_prev, prev)) => {
                let t = dv / (current.0 - vb_prev);
                for i in 0..guess.psi.len() {
                    guess.psi[i] += t * (current.1.psi[i] - prev.psi[i]);
                    guess.phin[i] += t * (current.1.phin[i] - prev.phin[i]);
                    guess.phip[i] += t * (current.1.phip[i] - prev.phip[i]);
                }
            }
            None => {
                let dvs = dv / vt;
                for i in 0..guess.psi.len() {
                    let s = pr.bias_weight[i] * dvs;
                    guess.psi[i] += s;
                    guess.phin[i] += s;
                    guess.phip[i] += s;
                }
            }
        }
        guess.carriers_from_quasi_fermi();
        match gummel(pr, &mut guess, next, gen, options) {
            Ok(it) => {
                iterations += it;
                history.push(next);
                previous = Some(std::mem::replace(&mut current, (next, guess)));
                step = (step * 1.5).min(options.bias_step_max);
            }
            Err(e) => {
                history.extend(e.residual_history().iter().rev().take(1));
                step *= 0.5;
                if step < options.bias_step_min {
                    return Err(Error::StepCollapse {
                        reached: current.0,
                        target,
                        min_step: options.bias_step_min,
                        history: e.residual_history().to_vec(),
                    });
                }
                // the extrapolation may have caused the failure
                previous = None;
            }
        }
    }
    let mut out = current
        .1
        .into_state(problem, target, gen.map(<[f64]>::to_vec), iterations);
    out.warnings = state.warnings.clone();
    if target > options.forward_safety_limit {
        out.warnings.push(SolverWarning::ForwardBiasBeyondLimit {
            bias: target,
            limit: options.forward_safety_limit,
        });
    }
    Ok(out)
}

/// Outcome of a bias sweep; `failure` is set if the sweep stopped early, in
/// which case `points` holds the converged prefix.
#[derive(Debug)]
pub struct BiasSweep {
    pub points: Vec<BiasPoint>,
    pub failure: Option<Error>,
}

impl BiasSweep {
    pub fn into_result(self) -> Result<Vec<BiasPoint>> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok(self.points),
        }
    }
}

pub fn bias_point(state: SolverState) -> BiasPoint {
    let (left, right) = terminal_currents(&state);
    BiasPoint {
        voltage: state.bias,
        terminal_current: left,
        current_left: left,
        current_right: right,
        state,
    }
}

fn check_sweep_voltages(voltages: &[f64]) -> Result<()> {
    let first = *voltages
        .first()
        .ok_or_else(|| Error::InvalidInput("empty voltage list".into()))?;
    if first != 0.0 {
        return Err(Error::InvalidInput(format!(
            "bias sweeps start at 0 V, got {first} V"
        )));
    }
    let up = voltages.windows(2).all(|w| w[1] >= w[0]);
    let down = voltages.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) || voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "sweep voltages must be finite and monotone".into(),
        ));
    }
    Ok(())
}

/// Equilibrium followed by chained continuation through `voltages`.
pub fn solve_bias_sweep(sim: &Simulation, voltages: &[f64]) -> BiasSweep {
    let mut points = Vec::with_capacity(voltages.len());
    if let Err(e) = check_sweep_voltages(voltages) {
        return BiasSweep {
            points,
            failure: Some(e),
        };
    }
    let mut state = match solve_equilibrium_problem(&sim.problem, &sim.options) {
        Ok(s) => s,
        Err(e) => {
            return BiasSweep {
                points,
                failure: Some(e),
            }
        }
    };
    for &v in voltages {
        match step_bias(&state, v, &sim.options) {
            Ok(s) => {
                state = s;
                points.push(bias_point(state.clone()));
            }
            Err(e) => {
                return BiasSweep {
                    points,
                    failure: Some(e),
                }
            }
        }
    }
    BiasSweep {
        points,
        failure: None,
    }
}
