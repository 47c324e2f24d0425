//! Run configuration: defaults, an optional `key = value` file, then flags.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub depth: usize,
    pub samples: u64,
    pub tol: f64,
    pub output_format: OutputFormat,
    pub output_path: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            depth: 12,
            samples: 100_000,
            tol: 1e-12,
            output_format: OutputFormat::Json,
            output_path: None,
            threads: None,
        }
    }
}

/// Flag values; `None` means "not given on the command line".
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    pub samples: Option<u64>,
    pub tol: Option<f64>,
    pub output_format: Option<OutputFormat>,
    pub output_path: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(config_file: Option<&Path>, flags: Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_file(&text)?;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.depth {
            cfg.depth = v;
        }
        if let Some(v) = flags.samples {
            cfg.samples = v;
        }
        if let Some(v) = flags.tol {
            cfg.tol = v;
        }
        if let Some(v) = flags.output_format {
            cfg.output_format = v;
        }
        if flags.output_path.is_some() {
            cfg.output_path = flags.output_path;
        }
        if flags.threads.is_some() {
            cfg.threads = flags.threads;
        }
        if !cfg.tol.is_finite() || cfg.tol <= 0.0 || cfg.threads == Some(0) {
            return Err(CliError::Usage(
                "tol must be positive and finite and threads at least 1".into(),
            ));
        }
        Ok(cfg)
    }

    /// Lines of `key = value`; blank lines and `#` comments are skipped.
    fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| CliError::Usage(format!("config line {}: {what}", lineno + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => self.seed = value.parse().map_err(|_| bad("seed must be an integer"))?,
                "depth" => self.depth = value.parse().map_err(|_| bad("depth must be an integer"))?,
                "samples" => self.samples = parse_count(value).ok_or_else(|| bad("samples must be an integer"))?,
                "tol" => self.tol = value.parse().map_err(|_| bad("tol must be a number"))?,
                "output_format" | "format" => {
                    self.output_format = match value {
                        "json" => OutputFormat::Json,
                        "csv" => OutputFormat::Csv,
                        _ => return Err(bad("output_format must be json or csv")),
                    }
                }
                "output_path" | "output" => self.output_path = Some(PathBuf::from(value)),
                "threads" => self.threads = Some(value.parse().map_err(|_| bad("threads must be an integer"))?),
                _ => return Err(bad(&format!("unknown key {key:?}"))),
            }
        }
        Ok(())
    }
}

/// Integers, also in exponent notation such as `1e5`.
pub fn parse_count(text: &str) -> Option<u64> {
    text.parse::<u64>().ok().or_else(|| {
        let v: f64 = text.parse().ok()?;
        (v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64).then_some(v as u64)
    })
}
