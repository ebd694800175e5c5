use std::io::Write;
use std::path::Path;

use serde::Serialize;
use udw_core::channels::{
    crosstalk_channel_mc, crosstalk_overlap, crosstalk_overlap_quadrature, maximally_entangled_input,
    transfer_channel_exact, transfer_channel_fock, transfer_channel_noisy, ChannelParams, NoiseDistribution,
};
use udw_core::info_sweeps::{overlap_curves, run_sweep, SweepGrid, SweepResult};
use udw_core::UdwError;

use crate::config::{ConfigError, Format, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Verify,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verify => 1,
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<UdwError> for CliError {
    fn from(e: UdwError) -> Self {
        match e {
            UdwError::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Writes to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn grid(cfg: &RunConfig) -> SweepGrid {
    SweepGrid {
        gamma_phi: cfg.gamma_phi.clone(),
        b: cfg.b.clone(),
        mode_amp: cfg.mode_amp,
        variant: cfg.variant,
    }
}

fn report_failures(result: &SweepResult) -> Result<(), CliError> {
    let failed = result.failed_rows();
    if failed == 0 {
        return Ok(());
    }
    for r in result.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "point b={} gamma_phi={} failed: {}",
            r.b,
            r.gamma_phi,
            r.error.as_deref().unwrap_or_default()
        );
    }
    Err(CliError::Numeric(format!("{failed} of {} points failed", result.rows.len())))
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let result = run_sweep(&grid(cfg), &cfg.sweep_options())?;
    let text = match cfg.format {
        Format::Csv => result.sweep_csv(),
        Format::Json => to_json(&result)?,
    };
    // failed points are still written, marked NaN / null
    emit(cfg, &text)?;
    report_failures(&result)
}

pub fn overlaps(cfg: &RunConfig) -> Result<(), CliError> {
    let result = overlap_curves(&grid(cfg))?;
    let text = match cfg.format {
        Format::Csv => result.overlaps_csv(),
        Format::Json => to_json(&result)?,
    };
    emit(cfg, &text)
}

pub const VERIFY_SEED: u64 = 20_240_601;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Largest deviation, or `None` when the check could not run.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl Check {
    fn from_result(name: &'static str, tolerance: f64, r: Result<(f64, String), UdwError>) -> Self {
        match r {
            Ok((value, note)) => Check {
                name,
                value: Some(value),
                tolerance,
                passed: value <= tolerance,
                note,
            },
            Err(e) => Check {
                name,
                value: None,
                tolerance,
                passed: false,
                note: e.to_string(),
            },
        }
    }

    fn line(&self) -> String {
        let value = self.value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"));
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {:<24} {value:>10} (tol {:.0e})  {}", self.name, self.tolerance, self.note)
    }
}

fn max_abs(m: &udw_core::fock_linalg::CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn exact_vs_fock(cfg: &RunConfig) -> Result<(f64, String), UdwError> {
    let input = maximally_entangled_input();
    let mut worst: f64 = 0.0;
    for &u in &[0.25, 1.0, 4.0] {
        for &amp in &[0.5, 1.0, 2.0] {
            let p = ChannelParams::constrained(u / (amp * amp), amp)?
                .with_cutoff(cfg.cutoff())
                .with_gate_order(cfg.gate_order);
            let exact = transfer_channel_exact(&p, &input)?;
            let fock = transfer_channel_fock(&p, &input)?;
            worst = worst.max(max_abs(&(exact.matrix() - fock.matrix())));
        }
    }
    Ok((worst, "max |Δρ| over γ_φ|α|² in {0.25, 1, 4}, |α| in {0.5, 1, 2}".into()))
}

fn closed_form_vs_quadrature(cfg: &RunConfig) -> Result<(f64, String), UdwError> {
    let mut worst: f64 = 0.0;
    for &u in &[0.01, 0.1, 1.0, 4.0, 12.0] {
        for &b in &[0.0, 0.25, 1.0, 4.0, 10.0] {
            let dist = NoiseDistribution::crosstalk(u, b)?;
            let q = crosstalk_overlap_quadrature(u, b, 1.0, &dist, cfg.quad_nodes)?;
            worst = worst.max((q - crosstalk_overlap(u, b, 1.0)).abs());
        }
    }
    Ok((worst, format!("max overlap deviation, {} nodes", cfg.quad_nodes)))
}

fn effective_vs_mc(cfg: &RunConfig) -> Result<(f64, String), UdwError> {
    let p = ChannelParams::constrained(1.0, 1.0)?.with_ct_b(1.0).with_cutoff(cfg.cutoff());
    let input = maximally_entangled_input();
    let effective = transfer_channel_noisy(&p, &input)?;
    let seed = cfg.seed.unwrap_or(VERIFY_SEED);
    let mc = crosstalk_channel_mc(&p, &input, cfg.samples, seed)?;
    let z = mc.max_z_score(effective.matrix(), 1e-12);
    Ok((z, format!("max |Δρ|/stderr at γ_φ = 1, b = 1, {} samples, seed {seed}", cfg.samples)))
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let checks = [
        Check::from_result("exact-vs-fock", 1e-6, exact_vs_fock(cfg)),
        Check::from_result("closed-form-vs-quadrature", 1e-8, closed_form_vs_quadrature(cfg)),
        Check::from_result("effective-vs-monte-carlo", 3.0, effective_vs_mc(cfg)),
    ];
    let text = match cfg.format {
        Format::Csv => checks.iter().map(|c| c.line() + "\n").collect::<String>(),
        Format::Json => to_json(&checks)?,
    };
    emit(cfg, &text)?;
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(CliError::Verify)
    }
}
