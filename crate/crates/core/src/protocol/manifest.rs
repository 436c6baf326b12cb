use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{CalibrationResult, ModelPoint};
use crate::error::{Error, Result};

use super::config::ExperimentConfig;

/// Protocol commands that write a manifest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    FirstClick,
    Trajectories,
    Calibrate,
    Tomogram,
    Sweep,
    OracleCheck,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::FirstClick => "first-click",
            CommandKind::Trajectories => "trajectories",
            CommandKind::Calibrate => "calibrate",
            CommandKind::Tomogram => "tomogram",
            CommandKind::Sweep => "sweep",
            CommandKind::OracleCheck => "oracle-check",
        }
    }

    pub fn manifest_file(self) -> String {
        format!("{}.manifest.json", self.name())
    }
}

/// Where the calibration used by a tomogram came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum CalibrationSource {
    /// Fitted by a `calibrate` run; its manifest checksum is kept.
    Manifest {
        path: PathBuf,
        sha256: String,
        result: CalibrationResult,
    },
    /// Fixed `mu` from the configuration.
    Override { mu: f64, model: ModelPoint },
}

impl CalibrationSource {
    pub fn model(&self) -> ModelPoint {
        match self {
            CalibrationSource::Manifest { result, .. } => result.model(),
            CalibrationSource::Override { model, .. } => *model,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: CommandKind,
    pub config: ExperimentConfig,
    /// Command-specific derived values (dimension, nu, sigma, ...).
    pub resolved: serde_json::Value,
    pub seeds: Vec<u64>,
    pub calibration: Option<CalibrationSource>,
    pub outputs: Vec<OutputRecord>,
    pub flags: Vec<Flag>,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn passed(&self) -> bool {
        self.flags.iter().all(|f| f.passed)
    }

    pub fn output(&self, file: &str) -> Option<&OutputRecord> {
        self.outputs.iter().find(|o| o.file == file)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Collects outputs, flags and timings while a command runs.
#[derive(Debug)]
pub struct Recorder {
    dir: PathBuf,
    started: Instant,
    outputs: Vec<OutputRecord>,
    flags: Vec<Flag>,
    timings: Vec<Timing>,
}

impl Recorder {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            outputs: Vec::new(),
            flags: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Records the checksum of a file already written to the output directory.
    pub fn register(&mut self, file: &str) -> Result<()> {
        let bytes = fs::read(self.path(file))?;
        self.outputs.push(OutputRecord {
            file: file.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(file), text)?;
        self.register(file)
    }

    pub fn flag(&mut self, name: impl Into<String>, passed: bool) {
        self.flags.push(Flag {
            name: name.into(),
            passed,
        });
    }

    /// Marks the end of a stage; its duration is measured from the previous mark.
    pub fn lap(&mut self, stage: &str) {
        let total = self.started.elapsed().as_secs_f64();
        let before: f64 = self.timings.iter().map(|t| t.seconds).sum();
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: total - before,
        });
    }

    pub fn finish(
        self,
        command: CommandKind,
        config: &ExperimentConfig,
        resolved: serde_json::Value,
        seeds: Vec<u64>,
        calibration: Option<CalibrationSource>,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            config: config.clone(),
            resolved,
            seeds,
            calibration,
            outputs: self.outputs,
            flags: self.flags,
            timings: self.timings,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(command.manifest_file()), text)?;
        Ok(manifest)
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a CSV file with a header row into the recorder's directory.
pub fn write_csv(
    rec: &mut Recorder,
    file: &str,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(rec.path(file))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(Error::from)?;
    drop(w);
    rec.register(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn real_format_has_17_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(-4.0), "-4.0000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }
}
