use std::sync::OnceLock;

use approx::assert_relative_eq;

use gdiode::config::RunConfig;
use gdiode::constants::Q;
use gdiode::device::DopingProfile;
use gdiode::solver::*;
use gdiode::Error;

fn sim(profile: &DopingProfile, material: &MaterialParams) -> Simulation {
    Simulation::from_profile(profile, material, SolverOptions::default(), 1e-6).unwrap()
}

fn equilibrium(s: &Simulation) -> SolverState {
    solve_equilibrium_problem(&s.problem, &s.options).unwrap()
}

fn built_in(mat: &MaterialParams, na: f64, nd: f64) -> f64 {
    mat.thermal_voltage() * (na * nd / mat.intrinsic_density.powi(2)).ln()
}

/// Depletion-approximation width [µm].
fn oracle_width(mat: &MaterialParams, na: f64, nd: f64, v: f64) -> f64 {
    (2.0 * mat.permittivity() * (built_in(mat, na, nd) - v) * (na + nd) / (Q * na * nd)).sqrt() * 1e4
}

/// 10¹⁹ donors on the right, `na` acceptors on the left.
fn one_sided(na: f64, lp: f64) -> Simulation {
    let prof = DopingProfile::abrupt(0.0, lp + 2.0, lp, -na, 1e19, 0.005).unwrap();
    sim(&prof, &MaterialParams::default())
}

/// Default lateral device swept 0..−210 V.
fn device_sweep() -> &'static (Simulation, Vec<BiasPoint>) {
    static S: OnceLock<(Simulation, Vec<BiasPoint>)> = OnceLock::new();
    S.get_or_init(|| {
        let cfg = RunConfig::default();
        let s = cfg.simulation().unwrap();
        let pts = solve_bias_sweep(&s, &cfg.sweep_voltages()).into_result().unwrap();
        (s, pts)
    })
}

#[test]
fn intrinsic_material_is_flat_and_neutral() {
    let mat = MaterialParams::default();
    let s = sim(&DopingProfile::uniform(0.0, 10.0, 0.0).unwrap(), &mat);
    let eq = equilibrium(&s);
    let ni = mat.intrinsic_density;
    assert!(eq.psi.iter().all(|v| v.abs() < 1e-9));
    assert!(eq.n.iter().chain(&eq.p).all(|c| (c / ni - 1.0).abs() < 1e-9));
    assert!(space_charge(&eq).iter().all(|r| *r == 0.0 || r.abs() < 1e-9 * Q * ni));
    assert!(electric_field(&eq).iter().all(|e| e.abs() < 1e-6));
}

#[test]
fn uniform_n_type_sits_at_the_neutral_potential() {
    let mat = MaterialParams::default();
    let s = sim(&DopingProfile::uniform(0.0, 10.0, 1e16).unwrap(), &mat);
    let eq = equilibrium(&s);
    let expected = mat.thermal_voltage() * (1e16 / mat.intrinsic_density).ln();
    for v in &eq.psi {
        assert_relative_eq!(*v, expected, max_relative = 1e-6);
    }
    assert!(electric_field(&eq).iter().all(|e| e.abs() < 1e-3));
}

#[test]
fn built_in_potential_of_one_sided_junction() {
    let mat = MaterialParams::default();
    let eq = equilibrium(&one_sided(1e14, 12.0));
    let oracle = built_in(&mat, 1e14, 1e19);
    assert!((oracle - 0.75).abs() < 0.03, "oracle {oracle}");
    assert_relative_eq!(potential_drop(&eq), oracle, max_relative = 0.02);
}

#[test]
fn equilibrium_mass_action_and_flat_fermi_level() {
    let eq = equilibrium(&one_sided(1e15, 4.0));
    let ni2 = eq.material().intrinsic_density.powi(2);
    assert!(eq.n.iter().zip(&eq.p).all(|(n, p)| (n * p / ni2 - 1.0).abs() < 1e-6));
    let bands = band_diagram(&eq);
    let e0 = bands.efn[0];
    assert!(bands.efn.iter().chain(&bands.efp).all(|e| (e - e0).abs() < 1e-9));
}

#[test]
fn band_gap_is_exact_and_contacts_split_by_the_bias() {
    let s = one_sided(1e15, 4.0);
    let eq = equilibrium(&s);
    let gap = eq.material().bandgap;
    for v in [-5.0, 0.3] {
        let st = step_bias(&eq, v, &s.options).unwrap();
        let b = band_diagram(&st);
        assert!(b.ec.iter().zip(&b.ev).all(|(c, e)| (c - e - gap).abs() < 1e-12));
        let last = b.efn.len() - 1;
        // energies in eV: the p contact's hole level drops by V
        let split = b.efn[last] - b.efp[0];
        assert!((split - v).abs() < 1e-3, "bias {v}: split {split}");
    }
}

#[test]
fn step_to_the_current_bias_is_the_identity() {
    let s = one_sided(1e15, 4.0);
    let eq = equilibrium(&s);
    let same = step_bias(&eq, 0.0, &s.options).unwrap();
    assert_eq!(same.psi, eq.psi);
    assert_eq!(same.n, eq.n);
}

#[test]
fn depletion_widths_follow_the_abrupt_junction_formula() {
    let mat = MaterialParams::default();
    let s = one_sided(1e14, 60.0);
    let eq = equilibrium(&s);
    let st = step_bias(&eq, -100.0, &s.options).unwrap();
    let w = depletion_width(&st);
    assert!((w - 36.0).abs() / 36.0 < 0.1, "W = {w}");
    assert_relative_eq!(w, oracle_width(&mat, 1e14, 1e19, -100.0), max_relative = 0.1);

    let eq15 = equilibrium(&one_sided(1e15, 4.0));
    let w15 = depletion_width(&eq15);
    assert!((w15 - 1.0).abs() < 0.15, "W = {w15}");
}

#[test]
fn symmetric_junction_is_symmetric() {
    let prof = DopingProfile::abrupt(0.0, 2.0, 1.0, -1e17, 1e17, 0.001).unwrap();
    let eq = equilibrium(&sim(&prof, &MaterialParams::default()));
    let r = depletion_edges(&eq, 0.1).unwrap();
    assert!(((r.x_n - 1.0) - (1.0 - r.x_p)).abs() < 2e-3, "{r:?}");
    let e = electric_field(&eq);
    let mids = eq.mesh().edge_midpoints();
    let k = (0..e.len()).max_by(|a, b| e[*a].abs().total_cmp(&e[*b].abs())).unwrap();
    assert!((mids[k] - 1.0).abs() < 2e-3, "peak field at {}", mids[k]);
}

#[test]
fn peak_field_of_reverse_biased_one_sided_junction() {
    let mat = MaterialParams::default();
    let s = one_sided(1e14, 60.0);
    let st = step_bias(&equilibrium(&s), -100.0, &s.options).unwrap();
    // The depletion approximation has no mobile charge, so compare on edges
    // of the depleted acceptor side; the nanometre electron spill-over layer
    // at the metallurgical junction adds a spike the formula does not model.
    let d = st.doping();
    let depleted = |i: usize| d[i] < 0.0 && st.n[i] + st.p[i] < 0.1 * d[i].abs();
    let e = electric_field(&st);
    let peak = (0..e.len())
        .filter(|&i| depleted(i) && depleted(i + 1))
        .map(|i| e[i].abs())
        .fold(0.0, f64::max);
    let w_cm = oracle_width(&mat, 1e14, 1e19, -100.0) * 1e-4;
    let oracle = 2.0 * (built_in(&mat, 1e14, 1e19) + 100.0) / w_cm;
    assert_relative_eq!(peak, oracle, max_relative = 0.1);
}

#[test]
fn depleted_gap_exposes_the_acceptors() {
    let (_, pts) = device_sweep();
    let st = &pts.iter().find(|p| p.voltage == -200.0).unwrap().state;
    let r = depletion_edges(st, 0.1).unwrap();
    let rho = space_charge(st);
    let d = st.doping();
    let x = st.positions();
    let na = d[x.partition_point(|v| *v < 0.5 * (r.lower() + r.upper()))];
    assert!(na < 0.0);
    let inner: Vec<usize> = (0..x.len())
        .filter(|&i| x[i] > r.lower() + 5.0 && x[i] < r.upper() - 5.0 && (d[i] / na - 1.0).abs() < 1e-3)
        .collect();
    assert!(inner.len() > 20);
    for i in inner {
        assert_relative_eq!(rho[i], Q * na, max_relative = 0.05);
    }
}

#[test]
fn depletion_reaches_farther_into_the_gap_with_bias() {
    let (_, pts) = device_sweep();
    let edges: Vec<DepletionRegion> = pts[1..].iter().map(|p| depletion_edges(&p.state, 0.1).unwrap()).collect();
    assert!(edges.windows(2).all(|w| w[1].x_p <= w[0].x_p));
    let widths: Vec<f64> = pts.iter().map(|p| depletion_width(&p.state)).collect();
    assert!(widths.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn default_sweep_has_22_ordered_points() {
    let (s, pts) = device_sweep();
    assert_eq!(pts.len(), 22);
    assert!(pts[0].terminal_current.abs() < 1e-15);
    assert!(pts.windows(2).all(|w| w[1].terminal_current <= w[0].terminal_current));
    assert!(pts.iter().all(|p| current_mismatch(&p.state) < 1e-3));
    let n = s.mesh().len();
    assert!((1_000..100_000).contains(&n), "{n} nodes");
}

#[test]
fn single_point_sweep_is_equilibrium() {
    let s = one_sided(1e15, 4.0);
    let pts = solve_bias_sweep(&s, &[0.0]).into_result().unwrap();
    assert_eq!(pts.len(), 1);
    assert!(pts[0].terminal_current.abs() < 1e-18);
}

#[test]
fn sweeps_are_bit_reproducible() {
    let s = one_sided(1e15, 8.0);
    let v = [0.0, -5.0, -10.0];
    let a = solve_bias_sweep(&s, &v).into_result().unwrap();
    let b = solve_bias_sweep(&s, &v).into_result().unwrap();
    for (p, q) in a.iter().zip(&b) {
        assert_eq!(p.state.psi, q.state.psi);
        assert_eq!(p.terminal_current.to_bits(), q.terminal_current.to_bits());
    }
}

#[test]
fn reverse_current_is_generation_limited() {
    let mat = MaterialParams::default();
    let prof = DopingProfile::abrupt(0.0, 12.0, 10.0, -1e15, 1e19, 0.005).unwrap();
    let current = |tau: f64| {
        let m = mat.clone().with_lifetime(tau);
        let s = Simulation::from_profile(&prof, &m, SolverOptions::default(), 1e-6).unwrap();
        let pts = solve_bias_sweep(&s, &[0.0, -10.0]).into_result().unwrap();
        let w_cm = depletion_width(&pts[1].state) * 1e-4;
        let estimate = Q * m.intrinsic_density * w_cm * 1e-6 / (m.tau_n + m.tau_p);
        (pts[1].terminal_current.abs(), estimate)
    };
    let (slow, est_slow) = current(1e-6);
    let (fast, est_fast) = current(1e-8);
    assert!(fast > slow);
    for (i, e) in [(slow, est_slow), (fast, est_fast)] {
        assert!(i < 2.0 * e && i > 0.1 * e, "I = {i:e}, estimate {e:e}");
    }
}

#[test]
fn forward_current_exceeds_reverse() {
    let s = one_sided(1e15, 4.0);
    let fwd = solve_bias_sweep(&s, &[0.0, 0.5]).into_result().unwrap();
    let rev = solve_bias_sweep(&s, &[0.0, -0.5]).into_result().unwrap();
    assert!(fwd[1].terminal_current > 0.0 && rev[1].terminal_current < 0.0);
    assert!(fwd[1].terminal_current > 1e3 * rev[1].terminal_current.abs());
}

#[test]
fn non_convergence_reports_its_residual_history() {
    let options = SolverOptions {
        max_outer_iterations: 2,
        bias_step_max: 50.0,
        bias_step_min: 20.0,
        ..SolverOptions::default()
    };
    let s = one_sided(1e15, 4.0);
    let s = Simulation { problem: s.problem, options };
    let eq = solve_equilibrium_problem(&s.problem, &SolverOptions::default()).unwrap();
    let err = step_bias(&eq, -40.0, &s.options).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { .. } | Error::StepCollapse { .. }), "{err}");
    assert!(!err.residual_history().is_empty());
}

#[test]
fn photocurrent_collection() {
    let (s, pts) = device_sweep();
    let dark = &pts.iter().find(|p| p.voltage == -200.0).unwrap().state;
    let r = depletion_edges(dark, 0.1).unwrap();
    let photo = PhotoOptions::default();
    let inside = ConfocalSpot::new(0.5 * (r.lower() + r.upper()), 1.0, 1e-4).unwrap();
    let qg = Q * photo.pair_rate(&inside);
    let i = photocurrent(dark, &inside, &photo, &s.options).unwrap();
    assert_relative_eq!(i.abs(), qg, max_relative = 0.1);

    let mat = dark.material();
    let l_um = (mat.diffusivity_n().max(mat.diffusivity_p()) * mat.tau_n.max(mat.tau_p)).sqrt() * 1e4;
    let far = ConfocalSpot::new(r.lower() - 50.0 * l_um.max(1.0), 1.0, 1e-4).unwrap();
    let i_far = photocurrent(dark, &far, &photo, &s.options).unwrap();
    assert!(i_far.abs() < 0.05 * qg, "far spot {i_far:e} vs qG {qg:e}");

    let off = ConfocalSpot::new(inside.position, 1.0, 0.0).unwrap();
    assert_eq!(photocurrent(dark, &off, &photo, &s.options).unwrap(), 0.0);
}

#[test]
fn generation_profile_conserves_the_pair_rate() {
    let (s, pts) = device_sweep();
    let st = &pts[0].state;
    let photo = PhotoOptions::default();
    let spot = ConfocalSpot::new(550.0, 1.0, 1e-4).unwrap();
    let g = generation_profile(st, &spot, &photo);
    let x = st.positions();
    let total: f64 = (0..x.len())
        .map(|i| {
            let a = if i == 0 { x[0] } else { 0.5 * (x[i - 1] + x[i]) };
            let b = if i + 1 == x.len() { x[i] } else { 0.5 * (x[i] + x[i + 1]) };
            g[i] * (b - a) * 1e-4 * s.problem.area_cm2()
        })
        .sum();
    assert_relative_eq!(total, photo.pair_rate(&spot), max_relative = 1e-9);
}

#[test]
fn mesh_refinement_changes_little() {
    let base = one_sided(1e15, 6.0);
    let mut fine = SolverOptions::default();
    fine.mesh.max_spacing_um *= 0.5;
    fine.mesh.debye_fraction *= 0.5;
    let prof = DopingProfile::abrupt(0.0, 8.0, 6.0, -1e15, 1e19, 0.005).unwrap();
    let refined = Simulation::from_profile(&prof, &MaterialParams::default(), fine, 1e-6).unwrap();
    assert!(refined.mesh().len() > base.mesh().len());
    let a = solve_bias_sweep(&base, &[0.0, -5.0]).into_result().unwrap();
    let b = solve_bias_sweep(&refined, &[0.0, -5.0]).into_result().unwrap();
    assert_relative_eq!(depletion_width(&a[1].state), depletion_width(&b[1].state), max_relative = 0.01);
    assert_relative_eq!(a[1].terminal_current, b[1].terminal_current, max_relative = 0.02);
}

#[test]
fn csv_exports_have_headers() {
    let s = one_sided(1e15, 4.0);
    let eq = equilibrium(&s);
    let csv = state_csv(&eq);
    assert_eq!(csv.lines().count(), eq.psi.len() + 1);
    let iv = iv_csv(&[0.0, -1.0], &[0.0, -1e-12]);
    assert_eq!(iv.lines().count(), 3);
}
