//! Experiment harness around `sieve-core`: TOML configuration with
//! validation, parallel experiment runners, CSV tables, SVG plots, binary
//! field dumps and a hashed manifest per run.

pub mod config;
pub mod experiments;
pub mod field_io;
pub mod output;
pub mod svg;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{Diagnostic, Diagnostics, ExperimentConfig, Kind, Validated};
pub use output::Artifacts;
use table::Table;

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for I/O failures.
pub const EXIT_IO: i32 = 1;
/// Exit status for configuration and parameter errors.
pub const EXIT_INVALID: i32 = 2;
/// Exit status when a solver or quadrature does not converge.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid configuration\n{0}")]
    Config(Diagnostics),
    #[error("{context}: {source}")]
    Compute {
        context: String,
        #[source]
        source: sieve_core::Error,
    },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => EXIT_INVALID,
            LabError::Compute { source, .. } => match source {
                sieve_core::Error::NotConverged { .. } | sieve_core::Error::Quadrature { .. } => EXIT_NOT_CONVERGED,
                _ => EXIT_INVALID,
            },
            LabError::Io { .. } => EXIT_IO,
        }
    }

    fn io(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.to_string();
        move |source| LabError::Io { context, source }
    }
}

/// Configs shipped with the crate, by name.
pub const FIXTURES: [(&str, &str); 6] = [
    ("discrepancy-parabola", include_str!("../fixtures/discrepancy-parabola.toml")),
    ("capacity-ball", include_str!("../fixtures/capacity-ball.toml")),
    ("mean-cap-disk", include_str!("../fixtures/mean-cap-disk.toml")),
    ("corrector-line", include_str!("../fixtures/corrector-line.toml")),
    ("homogenize-parabola", include_str!("../fixtures/homogenize-parabola.toml")),
    ("sweep-parabola", include_str!("../fixtures/sweep-parabola.toml")),
];

/// Reads a config from a path, or from a bundled fixture written as
/// `fixture:<name>`.
pub fn read_config_text(source: &Path) -> Result<String, LabError> {
    let s = source.to_string_lossy();
    if let Some(name) = s.strip_prefix("fixture:") {
        return FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, t)| t.to_string()).ok_or_else(|| {
            let mut d = Diagnostics::default();
            d.errors.push(Diagnostic { key: "config".into(), message: format!("no bundled fixture named `{name}`") });
            LabError::Config(d)
        });
    }
    std::fs::read_to_string(source).map_err(LabError::io(format!("reading {}", source.display())))
}

/// Parses and validates. Warnings travel with the validated config.
pub fn load(source: &Path) -> Result<Validated, LabError> {
    let text = read_config_text(source)?;
    let config = ExperimentConfig::parse(&text).map_err(LabError::Config)?;
    config.validate().map_err(LabError::Config)
}

/// Full diagnostics (errors and warnings) without running.
pub fn diagnose(source: &Path) -> Result<Diagnostics, LabError> {
    let text = read_config_text(source)?;
    Ok(match ExperimentConfig::parse(&text) {
        Err(d) => d,
        Ok(c) => match c.validate() {
            Ok(v) => Diagnostics { errors: Vec::new(), warnings: v.warnings },
            Err(d) => d,
        },
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Output root; the config's `output`, else the working directory.
    pub out: Option<PathBuf>,
    /// Worker threads; rayon's default when absent.
    pub threads: Option<usize>,
    /// Replaces the config seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Table,
    pub artifacts: Artifacts,
}

/// Runs the experiment on a dedicated pool of `threads` workers.
pub fn compute(validated: &Validated, threads: Option<usize>) -> Result<Artifacts, LabError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| LabError::Io {
        context: "starting worker threads".into(),
        source: std::io::Error::other(e.to_string()),
    })?;
    pool.install(|| experiments::run(validated))
}

/// Validates, computes and writes `<out>/<kind>-<timestamp>/`.
pub fn run(source: &Path, options: &RunOptions) -> Result<RunOutcome, LabError> {
    let mut validated = load(source)?;
    if let Some(seed) = options.seed {
        validated.config.seed = seed;
    }
    let artifacts = compute(&validated, options.threads)?;
    let root = options.out.clone().or_else(|| validated.config.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let dir = output::run_directory(&root, validated.config.kind.name(), &stamp)
        .map_err(LabError::io(format!("creating a run directory in {}", root.display())))?;
    let manifest =
        output::write_artifacts(&dir, &artifacts).map_err(LabError::io(format!("writing into {}", dir.display())))?;
    Ok(RunOutcome { dir, manifest, artifacts })
}
