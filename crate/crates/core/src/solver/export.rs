use std::fmt::Write as _;

use super::observables::{band_diagram, electric_field, space_charge};
use super::state::{BiasPoint, SolverState};

/// Nine significant digits.
pub fn fmt9(v: f64) -> String {
    format!("{v:.8e}")
}

/// Per-node CSV of one solution. The field lives on edges and is
/// interpolated to nodes (one-sided at the ends).
pub fn state_csv(state: &SolverState) -> String {
    let e = electric_field(state);
    let rho = space_charge(state);
    let bands = band_diagram(state);
    let x = state.positions();
    let m = x.len();
    let mut out = String::from("x_um,psi_V,n_cm3,p_cm3,E_Vcm,rho_Ccm3,Ec_eV,Ev_eV,Efn_eV,Efp_eV\n");
    for i in 0..m {
        let ei = if i == 0 {
            e[0]
        } else if i == m - 1 {
            e[m - 2]
        } else {
            0.5 * (e[i - 1] + e[i])
        };
        let row = [
            x[i],
            state.psi[i],
            state.n[i],
            state.p[i],
            ei,
            rho[i],
            bands.ec[i],
            bands.ev[i],
            bands.efn[i],
            bands.efp[i],
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt9(*v)).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

pub fn iv_csv(voltages: &[f64], currents: &[f64]) -> String {
    let mut out = String::from("V_volts,I_amps\n");
    for (v, i) in voltages.iter().zip(currents) {
        writeln!(out, "{},{}", fmt9(*v), fmt9(*i)).unwrap();
    }
    out
}

pub fn sweep_iv_csv(points: &[BiasPoint]) -> String {
    let v: Vec<f64> = points.iter().map(|p| p.voltage).collect();
    let i: Vec<f64> = points.iter().map(|p| p.terminal_current).collect();
    iv_csv(&v, &i)
}
