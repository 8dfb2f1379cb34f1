//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use gdiode::config::RunConfig;
use gdiode::experiment::StarkCalibration;
use gdiode::Result;

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThermalRecord {
    pub thermal_resistance_k_per_w: f64,
    pub base_temperature_k: f64,
    /// Factor mapping simulated |I·V| onto the device's dissipated power.
    pub forward_power_scale: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRecord {
    pub differential_dipole_scale: f64,
    pub stark: Option<StarkCalibration>,
    pub thermal: ThermalRecord,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub calibration: &'a CalibrationRecord,
    pub wall_time_s: &'a BTreeMap<String, f64>,
    pub status: &'static str,
    pub error: Option<String>,
    /// Maps replicate the 1D lateral solution along the transverse axis.
    pub notes: Vec<&'static str>,
    pub files: &'a [FileRecord],
}

pub struct Output {
    dir: PathBuf,
    svg: bool,
    files: Vec<FileRecord>,
}

impl Output {
    pub fn create(dir: &Path, svg: bool) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            svg,
            files: Vec::new(),
        })
    }

    pub fn svg_enabled(&self) -> bool {
        self.svg
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name.to_string(),
            bytes: contents.len(),
            sha256: hex::encode(Sha256::digest(contents)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| gdiode::Error::Parse {
            what: name.into(),
            message: e.to_string(),
        })?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes an SVG if plots were requested; plot failures are reported but
    /// never fail the run.
    pub fn write_svg(&mut self, name: &str, render: impl FnOnce() -> std::result::Result<String, Box<dyn std::error::Error>>) -> Result<()> {
        if !self.svg {
            return Ok(());
        }
        match render() {
            Ok(svg) => self.write(name, svg.as_bytes()),
            Err(e) => {
                eprintln!("warning: could not render {name}: {e}");
                Ok(())
            }
        }
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn finish(&self, manifest: &RunManifest<'_>) -> Result<()> {
        let text = serde_json::to_string_pretty(manifest).map_err(|e| gdiode::Error::Parse {
            what: "manifest".into(),
            message: e.to_string(),
        })?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}
