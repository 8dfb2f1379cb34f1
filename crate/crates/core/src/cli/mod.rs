//! Command-line front end.

mod commands;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use gdiode::config::RunConfig;
use gdiode::Error;

use commands::Session;
use output::{Output, RunManifest};

const DEFAULTS: &str = "\
Defaults (override any of them in the --config TOML file; `gdiode config` prints them all):
  device       103 µm gap, 500 µm doped apertures, 50 µm hydrogen window, 10 Ω·cm boron substrate,
               300 K electrical model, effective ionization fraction 0.0765
  solver       SRH lifetimes 0.5 ns, Gummel with coupled-Newton fallback, 1 µV tolerance
  ensemble     20000 emitters in the hydrogen window, seed 42, dipole angles 20°/100° mixture
  optics       1 µm confocal waist, 100 µW at 532 nm, 2048-point grid over ±300 GHz,
               detection floor 0.2 of the zero-bias peak, R_th 122 K/W, base temperature 6 K
  experiment   probe 10 µm from the n-side window edge, 1.4 GHz/V Stark calibration target,
               0..−210 V in 10 V steps, 2 GHz threshold criterion, 450 mW at +50 V forward";

#[derive(Debug, Parser)]
#[command(name = "gdiode", version, about = "Lateral SOI diode with an embedded G-center ensemble", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Emitter-ensemble seed (overrides ensemble.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "GDIODE_OUT_DIR", default_value = "gdiode-out")]
    out_dir: PathBuf,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Terminal current versus bias (experiment.iv_voltages, default −200..+20 V in 5 V steps).
    Iv,
    /// Spectra, Lorentzian fits, Stark shift and modulation ratio over the reverse sweep.
    #[command(after_help = "The Stark scale is calibrated first whenever ensemble.differential_dipole_scale is 0 and experiment.auto_calibrate is true (the default).")]
    Sweep {
        /// Probe position [µm]; default 10 µm from the n-side window edge.
        #[arg(long, allow_hyphen_values = true)]
        position: Option<f64>,
    },
    /// Confocal PL-modulation and photocurrent maps at one bias.
    #[command(after_help = "Grid: window ± 5 µm laterally, 1 µm step, 50 µm aperture height. The transverse axis replicates the 1D lateral solution.")]
    Scan {
        /// Applied bias [V], e.g. --bias -200.
        #[arg(long, allow_hyphen_values = true)]
        bias: f64,
    },
    /// Stark threshold voltage across the emitter window.
    ThresholdMap,
    /// Forward sweep with Joule heating of the G-center and exciton lines.
    #[command(after_help = "Default 0..+60 V in 5 V steps; power scaled so that +50 V dissipates 450 mW; biases above solver.forward_safety_limit (60 V) are skipped with a warning.")]
    Forward {
        /// Probe position [µm].
        #[arg(long, allow_hyphen_values = true)]
        position: Option<f64>,
    },
    /// Calibrate the Stark scale and the forward power scale.
    Calibrate,
    /// Print the effective configuration as TOML.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Iv => "iv",
            Command::Sweep { .. } => "sweep",
            Command::Scan { .. } => "scan",
            Command::ThresholdMap => "threshold-map",
            Command::Forward { .. } => "forward",
            Command::Calibrate => "calibrate",
            Command::Config => "config",
        }
    }
}

fn load_config(cli: &Cli) -> gdiode::Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn residual_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,update_V\n");
    for (i, h) in history.iter().enumerate() {
        s.push_str(&format!("{},{}\n", i + 1, gdiode::solver::fmt9(*h)));
    }
    s
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    if let Command::Config = cli.command {
        return match config.to_toml() {
            Ok(t) => {
                print!("{t}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        };
    }
    let mut out = match Output::create(&cli.out_dir, cli.svg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
            return ExitCode::FAILURE;
        }
    };
    let mut session = Session::new(config.clone(), cli.quiet);
    let start = Instant::now();
    let result = match &cli.command {
        Command::Iv => commands::iv(&mut session, &mut out),
        Command::Sweep { position } => commands::sweep(&mut session, &mut out, *position),
        Command::Scan { bias } => commands::scan(&mut session, &mut out, *bias),
        Command::ThresholdMap => commands::threshold_map(&mut session, &mut out),
        Command::Forward { position } => commands::forward(&mut session, &mut out, *position),
        Command::Calibrate => commands::calibrate(&mut session, &mut out),
        Command::Config => unreachable!(),
    };
    session.timings.insert("total".into(), start.elapsed().as_secs_f64());
    let error = result.as_ref().err().map(|e| e.to_string());
    if let Err(e) = &result {
        eprintln!("error: {e}");
        let history = e.residual_history();
        if !history.is_empty() {
            match out.write("residuals.csv", residual_csv(history).as_bytes()) {
                Ok(()) => eprintln!("residual history written to {}", cli.out_dir.join("residuals.csv").display()),
                Err(w) => eprintln!("could not write residual dump: {w}"),
            }
        }
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name().to_string(),
        seed: config.seed(),
        config: &config,
        calibration: &session.calibration,
        wall_time_s: &session.timings,
        status: if result.is_ok() { "ok" } else { "failed" },
        error,
        notes: vec!["2D maps replicate the 1D lateral solution along the transverse axis"],
        files: out.files(),
    };
    if let Err(e) = out.finish(&manifest) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::FAILURE;
    }
    match result {
        Ok(()) => {
            session.log(format!("wrote {} files to {}", out.files().len() + 1, cli.out_dir.display()));
            ExitCode::SUCCESS
        }
        Err(Error::Config { .. }) => ExitCode::from(2),
        Err(_) => ExitCode::FAILURE,
    }
}
