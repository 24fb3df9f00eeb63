//! Run configuration: a flat TOML table, `--set key=value` overrides and
//! command flags, merged in that order and validated once.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every knob a command can read. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Cauchy data
    pub grid: usize,
    pub period: f64,
    /// CSV with columns `x, u, uy`.
    pub input: Option<String>,
    pub vacuum: bool,
    /// Explicit generator: means and `[m, cos, sin]` modes.
    pub mean_u: f64,
    pub mean_uy: f64,
    pub fourier_u: Vec<[f64; 3]>,
    pub fourier_uy: Vec<[f64; 3]>,
    /// Random generator, used when neither `input`, `vacuum` nor modes are set.
    pub seed: u64,
    pub modes: usize,
    pub amp: f64,

    // numerics
    pub jet_order: usize,
    pub tol: f64,
    /// Overrides the pass threshold of the command's checks.
    pub check_tol: Option<f64>,
    pub workers: usize,

    // monodromy and expansion
    pub lambda: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub order: usize,

    // Pinkall-Sterling
    pub levels: usize,

    // Killing-field seed
    pub genus: usize,
    pub seed_u0: f64,
    pub seed_ux0: f64,
    pub seed_uy0: f64,
    pub seed_b0: [f64; 2],
    /// Flow length; the period when absent.
    pub span: Option<f64>,
    pub steps: usize,

    // spectral curve
    pub root_tol: f64,
    pub circle_samples: usize,
    pub panels: usize,
    pub closing_tol: f64,

    // Whitham
    /// Coefficients `[re, im]` of `c(λ)`, lowest degree first; a real
    /// multiple of the first basis direction when absent.
    pub c: Option<Vec<[f64; 2]>>,
    pub t_end: f64,

    // gradients and involution
    pub n_max: Option<usize>,
    pub dirs: usize,
    pub fd_step: f64,

    // pairing
    /// Coefficients `[re, im]` of the cocycle; `0.8 i` times the first
    /// basis cocycle when absent.
    pub cocycle: Option<Vec<[f64; 2]>>,
    pub pairing_points: usize,
    pub whitham_step: f64,

    // surface
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub t0: f64,
    pub t1: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            period: 2.0 * PI,
            input: None,
            vacuum: false,
            mean_u: 0.0,
            mean_uy: 0.0,
            fourier_u: Vec::new(),
            fourier_uy: Vec::new(),
            seed: 1,
            modes: 3,
            amp: 0.2,
            jet_order: 12,
            tol: 1e-10,
            check_tol: None,
            workers: 1,
            lambda: Vec::new(),
            lambda_min: 0.04,
            lambda_max: 0.25,
            lambda_count: 10,
            order: 5,
            levels: 3,
            genus: 1,
            seed_u0: 0.2,
            seed_ux0: 0.0,
            seed_uy0: 0.3,
            seed_b0: [0.3, -0.2],
            span: None,
            steps: 64,
            root_tol: 1e-7,
            circle_samples: 64,
            panels: 8,
            closing_tol: 1e-5,
            c: None,
            t_end: 0.5,
            n_max: None,
            dirs: 5,
            fd_step: 2e-3,
            cocycle: None,
            pairing_points: 64,
            whitham_step: 1e-4,
            nx: 16,
            ny: 16,
            hx: 0.05,
            hy: 0.05,
            t0: 0.0,
            t1: 1.0,
        }
    }
}

/// Parses `value` as a TOML value, falling back to a bare string.
pub fn parse_value(value: &str) -> toml::Value {
    match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

/// Merges the config file, `--set` overrides and flag overrides.
pub fn resolve(file: Option<&Path>, sets: &[String], flags: Vec<(&str, toml::Value)>) -> Result<RunConfig, String> {
    let mut table = match file {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read config {}: {e}", p.display()))?
            .parse::<toml::Table>()
            .map_err(|e| format!("config {}: {e}", p.display()))?,
        None => toml::Table::new(),
    };
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects key=value, got {s:?}"))?;
        table.insert(k.trim().to_string(), parse_value(v.trim()));
    }
    for (k, v) in flags {
        table.insert(k.to_string(), v);
    }
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
    cfg.validate()?;
    Ok(cfg)
}

fn check(ok: bool, msg: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

impl RunConfig {
    /// Range checks for every knob.
    pub fn validate(&self) -> Result<(), String> {
        check((4..=1 << 16).contains(&self.grid) && self.grid.is_power_of_two(), "grid must be a power of two in 4..=65536")?;
        check(positive(self.period), "period must be positive")?;
        check(self.amp.is_finite() && (0.0..=0.5).contains(&self.amp), "amp must be in [0, 0.5]")?;
        check(self.modes <= self.grid / 8, "modes must be at most grid / 8")?;
        for m in self.fourier_u.iter().chain(&self.fourier_uy) {
            check(m[0] >= 1.0 && m[0].fract() == 0.0, "Fourier mode numbers must be positive integers")?;
            check(m[0] <= (self.grid / 2) as f64, "Fourier mode number above the Nyquist mode")?;
        }
        check((1..=32).contains(&self.jet_order), "jet_order must be in 1..=32")?;
        check(positive(self.tol) && self.tol <= 1e-2, "tol must be in (0, 1e-2]")?;
        if let Some(t) = self.check_tol {
            check(positive(t), "check_tol must be positive")?;
        }
        check((1..=256).contains(&self.workers), "workers must be in 1..=256")?;
        check(self.lambda.iter().all(|l| positive(*l)), "lambda values must be positive")?;
        check(
            positive(self.lambda_min) && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite(),
            "need 0 < lambda_min <= lambda_max",
        )?;
        check(self.lambda_count >= 1, "lambda_count must be at least 1")?;
        check(self.order <= 12, "order must be at most 12")?;
        check(self.levels <= shgordon::diffpoly::PS_MAX_LEVEL, "levels above the supported maximum")?;
        check((1..=2).contains(&self.genus), "genus must be 1 or 2")?;
        if let Some(s) = self.span {
            check(s.is_finite(), "span must be finite")?;
        }
        check(self.steps >= 1, "steps must be at least 1")?;
        check(positive(self.root_tol), "root_tol must be positive")?;
        check(self.circle_samples >= 4, "circle_samples must be at least 4")?;
        check((1..=256).contains(&self.panels), "panels must be in 1..=256")?;
        check(positive(self.closing_tol), "closing_tol must be positive")?;
        if let Some(c) = &self.c {
            check(c.len() <= self.genus + 2, "c has degree above genus + 1")?;
        }
        check(self.t_end.is_finite(), "t_end must be finite")?;
        if let Some(n) = self.n_max {
            check((1..=shgordon::symplectic::MAX_HAMILTONIAN).contains(&n), "n_max out of range")?;
        }
        check((1..=64).contains(&self.dirs), "dirs must be in 1..=64")?;
        check(positive(self.fd_step), "fd_step must be positive")?;
        if let Some(f) = &self.cocycle {
            check(f.len() == self.genus, "cocycle needs genus coefficients")?;
        }
        check(self.pairing_points >= 4, "pairing_points must be at least 4")?;
        check(positive(self.whitham_step), "whitham_step must be positive")?;
        check(self.nx >= 1 && self.ny >= 1, "nx and ny must be at least 1")?;
        check(self.hx.is_finite() && self.hy.is_finite(), "hx and hy must be finite")?;
        check(self.t0.is_finite() && self.t1.is_finite(), "t0 and t1 must be finite")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
