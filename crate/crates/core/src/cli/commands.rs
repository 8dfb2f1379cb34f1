//! The experiments behind each subcommand.

use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use gdiode::config::RunConfig;
use gdiode::experiment::{
    calibrate_stark, center_shifts, confocal_scan, correlate_maps, fit_series, forward_bias_experiment,
    iv_sweep, modulation_front, modulation_ratio, series_from_states, solve_sweep_states,
    threshold_from_shifts, ModulationPoint, ScanMaps, SpectrumSeries, StarkCalibration, SweepStates,
    VirtualDevice, ZplFit,
};
use gdiode::device::Interval;
use gdiode::solver::{fmt9, solve_bias_sweep};
use gdiode::Result;

use super::output::{CalibrationRecord, Output, ThermalRecord};
use super::plot::{heatmap, line_plot, Axes, Line};

/// Everything a subcommand needs, plus the timing and calibration records
/// that end up in the manifest.
pub struct Session {
    pub config: RunConfig,
    pub quiet: bool,
    pub timings: std::collections::BTreeMap<String, f64>,
    pub calibration: CalibrationRecord,
}

impl Session {
    pub fn new(config: RunConfig, quiet: bool) -> Self {
        let thermal = &config.optics.thermal;
        let calibration = CalibrationRecord {
            differential_dipole_scale: config.ensemble.differential_dipole_scale,
            stark: None,
            thermal: ThermalRecord {
                thermal_resistance_k_per_w: thermal.thermal_resistance,
                base_temperature_k: thermal.base_temperature,
                forward_power_scale: None,
            },
        };
        Self {
            config,
            quiet,
            timings: Default::default(),
            calibration,
        }
    }

    pub fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self);
        self.timings.insert(name.to_string(), t.elapsed().as_secs_f64());
        out
    }

    fn needs_calibration(&self) -> bool {
        let cfg = &self.config;
        cfg.experiment.auto_calibrate && cfg.optics.stark_enabled && cfg.ensemble.differential_dipole_scale == 0.0
    }

    fn stark(&mut self, device: &VirtualDevice, states: &SweepStates) -> Result<StarkCalibration> {
        let probe = self.config.probe_position();
        let target = self.config.experiment.stark_target_rate;
        self.log(format!("calibrating Stark scale to {target} GHz/V at {probe} µm"));
        let cal = self.timed("calibrate_stark", |_| calibrate_stark(device, states, probe, target))?;
        self.log(format!("  differential_dipole_scale = {:.6e} GHz/(V/cm)", cal.scale));
        self.calibration.differential_dipole_scale = cal.scale;
        self.calibration.stark = Some(cal.clone());
        Ok(cal)
    }

    /// Device and reverse sweep, calibrating the Stark scale first when the
    /// configuration leaves it at zero.
    fn reverse_device(&mut self) -> Result<(VirtualDevice, SweepStates)> {
        let cfg = self.config.clone();
        let device = self.timed("build_device", |_| cfg.build_device())?;
        let volts = cfg.sweep_voltages();
        self.log(format!("solving {} bias points to {} V", volts.len(), volts[volts.len() - 1]));
        let states = self.timed("reverse_sweep", |_| solve_sweep_states(&device, &volts, 1.0))?;
        if self.needs_calibration() {
            let cal = self.stark(&device, &states)?;
            return Ok((device.with_dipole_scale(cal.scale)?, states));
        }
        Ok((device, states))
    }
}

struct SeriesReport {
    series: SpectrumSeries,
    fits: Vec<ZplFit>,
    shifts: Vec<f64>,
    modulation: Vec<ModulationPoint>,
}

fn analyse(device: &VirtualDevice, states: &SweepStates, position: f64) -> Result<SeriesReport> {
    let series = series_from_states(device, states, &device.spot(position))?;
    let floor = device.models.detection_floor;
    let fits = fit_series(&series, floor)?;
    let shifts = center_shifts(&series, &fits)?;
    let modulation = modulation_ratio(&series, &fits, floor)?;
    Ok(SeriesReport {
        series,
        fits,
        shifts,
        modulation,
    })
}

fn volt_tag(v: f64) -> String {
    let r = v.round() as i64;
    if (v - r as f64).abs() < 1e-9 {
        if r < 0 {
            format!("m{}", -r)
        } else {
            r.to_string()
        }
    } else {
        format!("{v}").replace('-', "m").replace('.', "p")
    }
}

fn spectra_csv(series: &SpectrumSeries) -> String {
    let mut out = String::from("frequency_THz");
    for v in &series.bias_list {
        write!(out, ",I_{}V", volt_tag(*v)).unwrap();
    }
    out.push('\n');
    for (j, f) in series.frequency_grid.iter().enumerate() {
        out.push_str(&fmt9(*f));
        for row in &series.intensity {
            write!(out, ",{}", fmt9(row[j])).unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct FitRecord<'a> {
    bias_v: f64,
    shift_ghz: f64,
    modulation_ratio: f64,
    raw_ratio: f64,
    below_floor: bool,
    integrated: f64,
    #[serde(flatten)]
    fit: &'a ZplFit,
}

fn fit_records<'a>(r: &'a SeriesReport) -> Vec<FitRecord<'a>> {
    r.fits
        .iter()
        .enumerate()
        .map(|(k, fit)| FitRecord {
            bias_v: r.series.bias_list[k],
            shift_ghz: r.shifts[k],
            modulation_ratio: r.modulation[k].ratio,
            raw_ratio: r.modulation[k].raw_ratio,
            below_floor: r.modulation[k].below_floor,
            integrated: r.series.integrated[k],
            fit,
        })
        .collect()
}

fn xy(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

fn spectra_plot(out: &mut Output, name: &str, title: &str, series: &SpectrumSeries) -> Result<()> {
    let lines: Vec<Line> = series
        .bias_list
        .iter()
        .zip(&series.intensity)
        .map(|(v, row)| Line::new(format!("{v} V"), xy(&series.offsets, row)))
        .collect();
    let axes = Axes {
        title,
        x_label: "detuning [GHz]",
        y_label: "PL [norm.]",
        log_y: false,
    };
    out.write_svg(name, || line_plot(&axes, &lines))
}

pub fn iv(session: &mut Session, out: &mut Output) -> Result<()> {
    let cfg = session.config.clone();
    session.log(format!("IV sweep over {} points", cfg.experiment.iv_voltages.len()));
    let curve = session.timed("iv", |_| {
        let sim = cfg.simulation()?;
        iv_sweep(&sim, &cfg.experiment.iv_voltages)
    })?;
    out.write("iv.csv", curve.csv().as_bytes())?;
    let axes = Axes {
        title: "Current-voltage",
        x_label: "bias [V]",
        y_label: "|I| [A]",
        log_y: true,
    };
    let line = Line::new("|I|", xy(&curve.voltages, &curve.currents));
    out.write_svg("iv.svg", || line_plot(&axes, &[line]))
}

pub fn sweep(session: &mut Session, out: &mut Output, position: Option<f64>) -> Result<()> {
    let (device, states) = session.reverse_device()?;
    let position = position.unwrap_or_else(|| session.config.probe_position());
    session.log(format!("spectra and fits at {position} µm"));
    let report = session.timed("sweep_fits", |_| analyse(&device, &states, position))?;
    let criterion = session.config.experiment.threshold_criterion;
    let threshold = threshold_from_shifts(&report.series.bias_list, &report.shifts, criterion);
    let base = device.models.thermal.base_temperature;

    let mut csv = String::from(
        "bias_V,shift_GHz,fwhm_GHz,amplitude,modulation,raw_ratio,integrated,exciton_ratio,temperature_K,current_A\n",
    );
    let e0 = device.models.exciton.exciton_response(states.temperatures[0], base).intensity;
    for k in 0..report.series.bias_list.len() {
        let f = &report.fits[k];
        let exc = device.models.exciton.exciton_response(states.temperatures[k], base).intensity / e0;
        let row = [
            report.series.bias_list[k],
            report.shifts[k],
            f.fwhm,
            f.amplitude,
            report.modulation[k].ratio,
            report.modulation[k].raw_ratio,
            report.series.integrated[k],
            exc,
            states.temperatures[k],
            states.points[k].terminal_current,
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt9(*v)).collect();
        writeln!(csv, "{}", cells.join(",")).unwrap();
    }
    out.write("sweep.csv", csv.as_bytes())?;
    out.write("spectra.csv", spectra_csv(&report.series).as_bytes())?;
    #[derive(Serialize)]
    struct SweepFits<'a> {
        position_um: f64,
        threshold_v: Option<f64>,
        threshold_criterion_ghz: f64,
        records: Vec<FitRecord<'a>>,
    }
    out.write_json(
        "fits.json",
        &SweepFits {
            position_um: position,
            threshold_v: threshold,
            threshold_criterion_ghz: criterion,
            records: fit_records(&report),
        },
    )?;
    match threshold {
        Some(t) => session.log(format!("  threshold {t:.1} V, shift at end {:.2} GHz", report.shifts[report.shifts.len() - 1])),
        None => session.log("  no threshold reached"),
    }

    if out.svg_enabled() {
        spectra_plot(out, "spectra.svg", "PL spectra versus reverse bias", &report.series)?;
        let v = &report.series.bias_list;
        let ratio: Vec<f64> = report.modulation.iter().map(|m| m.ratio).collect();
        let shift_axes = Axes {
            title: "Fitted center shift",
            x_label: "bias [V]",
            y_label: "shift [GHz]",
            log_y: false,
        };
        out.write_svg("shift.svg", || line_plot(&shift_axes, &[Line::new("shift", xy(v, &report.shifts))]))?;
        let mod_axes = Axes {
            title: "Modulation ratio",
            x_label: "bias [V]",
            y_label: "amplitude / zero-bias",
            log_y: false,
        };
        let exc: Vec<f64> = states
            .temperatures
            .iter()
            .map(|t| device.models.exciton.exciton_response(*t, base).intensity / e0)
            .collect();
        out.write_svg("modulation.svg", || {
            line_plot(&mod_axes, &[Line::new("G center", xy(v, &ratio)), Line::new("exciton", xy(v, &exc))])
        })?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanSummary {
    bias_v: f64,
    grid_x: usize,
    grid_y: usize,
    correlation: Option<f64>,
    n_third_suppression: Option<f64>,
    p_third_suppression: Option<f64>,
    front_50_um: Option<f64>,
    photocurrent_max_a: f64,
    failed_pixels: usize,
    transverse_axis: &'static str,
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().filter(|v| v.is_finite()).fold(0.0, |a, b| a.max(b.abs()))
}

pub fn scan(session: &mut Session, out: &mut Output, bias: f64) -> Result<()> {
    let device = if session.needs_calibration() {
        let (d, _) = session.reverse_device()?;
        d
    } else {
        let cfg = session.config.clone();
        session.timed("build_device", |_| cfg.build_device())?
    };
    let grid = session.config.experiment.scan.clone();
    session.log(format!("confocal scan at {bias} V"));
    let maps: ScanMaps = session.timed("scan", |_| confocal_scan(&device, bias, &grid))?;
    let window = device.ensemble.aperture;
    let third = window.width() / 3.0;
    let front = if bias == 0.0 {
        None
    } else {
        let pts = solve_bias_sweep(&device.simulation, &[0.0, bias]).into_result()?;
        let domain = device.simulation.mesh().nodes();
        let span = Interval::new(domain[0], domain[domain.len() - 1]);
        modulation_front(&pts[1].state, &device.equilibrium, &device, span, 0.05, 0.5)
    };
    let summary = ScanSummary {
        bias_v: bias,
        grid_x: maps.x.len(),
        grid_y: maps.y.len(),
        correlation: correlate_maps(&maps),
        n_third_suppression: maps.mean_suppression(Interval::new(window.end - third, window.end)),
        p_third_suppression: maps.mean_suppression(Interval::new(window.start, window.start + third)),
        front_50_um: front,
        photocurrent_max_a: max_abs(&maps.photocurrent),
        failed_pixels: maps.failures.iter().filter(|f| f.is_some()).count(),
        transverse_axis: "1D lateral solution replicated across the aperture height",
    };
    let tag = volt_tag(bias);
    out.write(&format!("scan_{tag}V.csv"), maps.csv().as_bytes())?;
    out.write_json(&format!("scan_{tag}V.json"), &summary)?;
    if let Some(r) = summary.correlation {
        session.log(format!("  PL/photocurrent correlation {r:.3}"));
    }
    if summary.failed_pixels > 0 {
        session.log(format!("  {} photocurrent pixels failed", summary.failed_pixels));
    }
    if out.svg_enabled() {
        let (x, y) = (&maps.x, &maps.y);
        let pl_title = format!("PL modulation at {bias} V");
        out.write_svg(&format!("scan_{tag}V_pl.svg"), || heatmap(&pl_title, x, y, &maps.pl_modulation))?;
        let pc_title = format!("Photocurrent [A] at {bias} V");
        out.write_svg(&format!("scan_{tag}V_photocurrent.svg"), || heatmap(&pc_title, x, y, &maps.photocurrent))?;
    }
    if summary.failed_pixels > 0 {
        let first = maps.failures.iter().flatten().next().cloned().unwrap_or_default();
        return Err(gdiode::Error::InvalidInput(format!(
            "{} photocurrent pixels did not converge; first: {first}",
            summary.failed_pixels
        )));
    }
    Ok(())
}

pub fn threshold_map(session: &mut Session, out: &mut Output) -> Result<()> {
    let (device, states) = session.reverse_device()?;
    let window = device.ensemble.aperture;
    let step = session.config.experiment.threshold_map_step;
    let criterion = session.config.experiment.threshold_criterion;
    let n = (window.width() / step + 1e-9).floor() as usize;
    let positions: Vec<f64> = (0..=n).map(|k| window.start + k as f64 * step).collect();
    session.log(format!("threshold map over {} probe positions", positions.len()));
    let reports = session.timed("threshold_map", |_| {
        positions.iter().map(|p| analyse(&device, &states, *p)).collect::<Result<Vec<_>>>()
    })?;
    let mut csv = String::from("position_um,threshold_V,max_abs_shift_GHz,final_modulation\n");
    let mut thresholds = Vec::new();
    let mut max_shift = Vec::new();
    for (p, r) in positions.iter().zip(&reports) {
        let t = threshold_from_shifts(&r.series.bias_list, &r.shifts, criterion);
        let peak = r.shifts.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let last = r.modulation[r.modulation.len() - 1].ratio;
        let t_cell = t.map(fmt9).unwrap_or_default();
        writeln!(csv, "{},{},{},{}", fmt9(*p), t_cell, fmt9(peak), fmt9(last)).unwrap();
        thresholds.push(t.unwrap_or(f64::NAN));
        max_shift.push(peak);
    }
    out.write("threshold_map.csv", csv.as_bytes())?;
    if out.svg_enabled() {
        let axes = Axes {
            title: "Stark threshold versus position",
            x_label: "position [µm]",
            y_label: "threshold |V|",
            log_y: false,
        };
        out.write_svg("threshold_map.svg", || line_plot(&axes, &[Line::new("threshold", xy(&positions, &thresholds))]))?;
        let axes = Axes {
            title: "Largest fitted shift versus position",
            x_label: "position [µm]",
            y_label: "|shift| [GHz]",
            log_y: false,
        };
        out.write_svg("max_shift.svg", || line_plot(&axes, &[Line::new("max |shift|", xy(&positions, &max_shift))]))?;
    }
    Ok(())
}

pub fn forward(session: &mut Session, out: &mut Output, position: Option<f64>) -> Result<()> {
    let device = if session.needs_calibration() {
        session.reverse_device()?.0
    } else {
        let cfg = session.config.clone();
        session.timed("build_device", |_| cfg.build_device())?
    };
    let cfg = session.config.clone();
    let position = position.unwrap_or_else(|| cfg.probe_position());
    session.log(format!("forward sweep at {position} µm"));
    let fw = session.timed("forward", |_| {
        forward_bias_experiment(&device, position, &cfg.experiment.forward_voltages, &cfg.experiment.power_calibration)
    })?;
    session.calibration.thermal.forward_power_scale = Some(fw.power_scale);
    for v in &fw.truncated {
        session.log(format!("  warning: {v} V exceeds the forward safety limit and was skipped"));
    }
    let c0 = fw.fits[0].center;
    let mut csv = String::from(
        "bias_V,current_A,power_W,temperature_K,shift_GHz,fwhm_GHz,gcenter_integrated,gcenter_amplitude,exciton_ratio\n",
    );
    for k in 0..fw.series.bias_list.len() {
        let f = &fw.fits[k];
        let row = [
            fw.series.bias_list[k],
            fw.currents[k],
            fw.powers[k],
            fw.temperatures[k],
            (f.center - c0) * 1e3,
            f.fwhm,
            fw.series.integrated[k],
            f.amplitude,
            fw.exciton_ratio[k],
        ];
        let cells: Vec<String> = row.iter().map(|v| fmt9(*v)).collect();
        writeln!(csv, "{}", cells.join(",")).unwrap();
    }
    out.write("forward.csv", csv.as_bytes())?;
    out.write("forward_spectra.csv", spectra_csv(&fw.series).as_bytes())?;
    if out.svg_enabled() {
        spectra_plot(out, "forward_spectra.svg", "PL spectra versus forward bias", &fw.series)?;
        let v = &fw.series.bias_list;
        let axes = Axes {
            title: "Thermal quenching",
            x_label: "bias [V]",
            y_label: "intensity / zero-bias",
            log_y: false,
        };
        out.write_svg("forward_quench.svg", || {
            line_plot(
                &axes,
                &[Line::new("G center", xy(v, &fw.series.integrated)), Line::new("exciton", xy(v, &fw.exciton_ratio))],
            )
        })?;
    }
    Ok(())
}

pub fn calibrate(session: &mut Session, out: &mut Output) -> Result<()> {
    let cfg = session.config.clone();
    let device = session.timed("build_device", |_| cfg.build_device())?;
    let volts = cfg.sweep_voltages();
    let states = session.timed("reverse_sweep", |_| solve_sweep_states(&device, &volts, 1.0))?;
    let cal = session.stark(&device, &states)?;
    let pc = &cfg.experiment.power_calibration;
    let thermal = &cfg.optics.thermal;
    #[derive(Serialize)]
    struct ThermalCalibration {
        reference_voltage_v: f64,
        reference_power_w: Option<f64>,
        reference_current_a: f64,
        power_scale: f64,
        thermal_resistance_k_per_w: f64,
        temperature_at_reference_k: f64,
    }
    let thermal_cal = session.timed("calibrate_thermal", |_| {
        let pts = solve_bias_sweep(&device.simulation, &[0.0, pc.reference_voltage]).into_result()?;
        let i = pts[1].terminal_current;
        let raw = (i * pc.reference_voltage).abs();
        let scale = pc.reference_power.map_or(1.0, |p| if raw > 0.0 { p / raw } else { f64::NAN });
        Ok(ThermalCalibration {
            reference_voltage_v: pc.reference_voltage,
            reference_power_w: pc.reference_power,
            reference_current_a: i,
            power_scale: scale,
            thermal_resistance_k_per_w: thermal.thermal_resistance,
            temperature_at_reference_k: thermal.junction_temperature(scale * raw)?,
        })
    })?;
    session.calibration.thermal.forward_power_scale = Some(thermal_cal.power_scale);
    session.log(format!(
        "  forward power scale {:.4e}, junction at {:.1} K",
        thermal_cal.power_scale, thermal_cal.temperature_at_reference_k
    ));
    #[derive(Serialize)]
    struct Calibration<'a> {
        stark: &'a StarkCalibration,
        thermal: ThermalCalibration,
    }
    out.write_json(
        "calibration.json",
        &Calibration {
            stark: &cal,
            thermal: thermal_cal,
        },
    )?;
    let mut points = String::from("bias_V,current_A\n");
    for p in &states.points {
        writeln!(points, "{},{}", fmt9(p.voltage), fmt9(p.terminal_current)).unwrap();
    }
    out.write("calibration_sweep.csv", points.as_bytes())
}
