//! Check records, output files, the run manifest and error records.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

/// Exit status of a run.
pub const EXIT_PASS: u8 = 0;
pub const EXIT_NUMERIC: u8 = 1;
pub const EXIT_MALFORMED: u8 = 2;

/// A failure that ends a run.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn malformed(message: impl Into<String>) -> Self {
        Self { kind: "malformed_input", message: message.into(), code: EXIT_MALFORMED }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { kind: "io", message: message.into(), code: EXIT_NUMERIC }
    }

    /// The machine-readable record written to stderr.
    pub fn record(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message }, "exit_code": self.code })
    }
}

impl From<shgordon::Error> for CliError {
    fn from(e: shgordon::Error) -> Self {
        use shgordon::Error as E;
        let kind = match &e {
            E::MalformedInput(_) => "malformed_input",
            E::Precondition(_) => "precondition",
            E::Divergence(_) => "divergence",
            E::Integration(_) => "integration",
            E::IterationFailure(_) => "iteration_failure",
            E::RealityLoss(_) => "reality_loss",
            E::CurveRecovery(_) => "curve_recovery",
            E::Path(_) => "path",
            E::Degenerate(_) => "degenerate",
            E::BoundaryOfModuli(_) => "boundary_of_moduli",
            E::Structure(_) => "structure",
            E::Numerical(_) => "numerical",
        };
        let code = if e.is_malformed() { EXIT_MALFORMED } else { EXIT_NUMERIC };
        Self { kind, message: e.to_string(), code }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// One JSON-lines check record.
#[derive(Clone, Debug, Serialize)]
pub struct Record {
    pub check: String,
    pub inputs_hash: String,
    pub lhs: Value,
    pub rhs: Value,
    pub residual: Option<f64>,
    pub pass: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Collects the records and files of one run.
pub struct Run {
    pub out: PathBuf,
    pub hash: String,
    pub records: Vec<Record>,
    pub files: Vec<String>,
}

impl Run {
    pub fn new(out: &Path, cfg: &RunConfig) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
        // an error record from an earlier run in the same directory is stale
        let _ = std::fs::remove_file(out.join("error.json"));
        Ok(Self { out: out.to_path_buf(), hash: cfg.hash(), records: Vec::new(), files: Vec::new() })
    }

    /// Adds a record; `extra` must be a JSON object or null.
    pub fn record(&mut self, check: &str, lhs: Value, rhs: Value, residual: Option<f64>, pass: bool, extra: Value) {
        let extra = match extra {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        self.records.push(Record { check: check.into(), inputs_hash: self.hash.clone(), lhs, rhs, residual, pass, extra });
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    /// JSON lines of all records.
    pub fn jsonl(&self) -> String {
        self.records.iter().map(|r| serde_json::to_string(r).expect("record serializes") + "\n").collect()
    }
}

/// Writes `manifest.json`. Wall time is the only field that varies between
/// identical runs; the outputs it lists do not contain it.
pub fn write_manifest(
    out: &Path,
    command: &str,
    cfg: &RunConfig,
    files: &[String],
    exit_code: u8,
    wall_time: f64,
) -> CliResult<()> {
    let m = json!({
        "command": command,
        "config_hash": cfg.hash(),
        "config": cfg,
        "versions": { "shgordon": shgordon::VERSION, "shgordon-cli": env!("CARGO_PKG_VERSION") },
        "outputs": files,
        "exit_code": exit_code,
        "wall_time_seconds": wall_time,
    });
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    std::fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// `[re, im]` as JSON.
pub fn cjson(z: shgordon::C64) -> Value {
    json!([z.re, z.im])
}
