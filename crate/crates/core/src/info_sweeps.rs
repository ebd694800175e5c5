//! Coherent information and parameter sweeps over the channel family.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    crosstalk_channel_mc, crosstalk_overlap, maximally_entangled_input, transfer_channel_exact,
    transfer_channel_noisy, transfer_channel_with_env_exact, ChannelParams, GateOrder,
};
use crate::coherent_algebra::{dephased_overlap, OverlapParams};
use crate::error::{Result, UdwError};
use crate::fock_linalg::{
    vn_entropy, CutoffPolicy, DensityMatrix, ENTROPY_CLAMP, HERMITIAN_TOL, PSD_TOL, TRACE_TOL,
};

/// S(B) - S(RB) in bits for a state on R ⊗ B.
pub fn coherent_information(rho_rb: &DensityMatrix) -> Result<f64> {
    if rho_rb.dims() != [2, 2] {
        return Err(UdwError::Dimension(format!(
            "coherent information needs a two-qubit state, got dims {:?}",
            rho_rb.dims()
        )));
    }
    rho_rb.validate()?;
    let rho_b = rho_rb.partial_trace(&[1])?;
    Ok(vn_entropy(&rho_b) - vn_entropy(rho_rb))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "env")]
    Env,
    #[serde(rename = "noisy")]
    NoisyEffective,
    #[serde(rename = "noisy-mc")]
    NoisyMc,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Env => "env",
            Variant::NoisyEffective => "noisy",
            Variant::NoisyMc => "noisy-mc",
        }
    }

    /// Whether the cross-talk multiplier matters for this variant.
    pub fn uses_b(self) -> bool {
        matches!(self, Variant::NoisyEffective | Variant::NoisyMc)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = UdwError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "env" => Ok(Variant::Env),
            "noisy" | "noisy-effective" => Ok(Variant::NoisyEffective),
            "noisy-mc" => Ok(Variant::NoisyMc),
            other => Err(UdwError::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

pub const DEFAULT_COUPLING_MIN: f64 = 1e-3;
pub const DEFAULT_COUPLING_MAX: f64 = 12.0;
pub const DEFAULT_STEPS: usize = 40;
pub const DEFAULT_B_VALUES: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0];

/// `steps` points spaced evenly in log between `min` and `max` inclusive.
pub fn log_spaced(min: f64, max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && min.is_finite() && max.is_finite()) || steps == 0 {
        return Err(UdwError::InvalidParameter(format!(
            "log grid needs 0 < min <= max and at least one step (got {min}, {max}, {steps})"
        )));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    let last = (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| match k {
            0 => min,
            k if k == steps - 1 => max,
            k => (lo + (hi - lo) * k as f64 / last).exp(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub gamma_phi: Vec<f64>,
    pub b: Vec<f64>,
    pub mode_amp: f64,
    pub variant: Variant,
}

impl SweepGrid {
    /// 40 log-spaced γ_φ|α|² in [1e-3, 12] and the default b values.
    pub fn default_for(variant: Variant, mode_amp: f64) -> Result<Self> {
        let a2 = mode_amp * mode_amp;
        let gamma_phi = log_spaced(DEFAULT_COUPLING_MIN, DEFAULT_COUPLING_MAX, DEFAULT_STEPS)?
            .into_iter()
            .map(|u| u / a2)
            .collect();
        let grid = Self {
            gamma_phi,
            b: DEFAULT_B_VALUES.to_vec(),
            mode_amp,
            variant,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma_phi.is_empty() || self.b.is_empty() {
            return Err(UdwError::InvalidParameter("sweep axes must be non-empty".into()));
        }
        let all = self.gamma_phi.iter().chain(&self.b).chain(std::iter::once(&self.mode_amp));
        for &v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(UdwError::InvalidParameter(format!(
                    "sweep values must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The b axis actually evaluated: variants without cross-talk use b = 0.
    pub fn effective_b(&self) -> Vec<f64> {
        if self.variant.uses_b() {
            self.b.clone()
        } else {
            vec![0.0]
        }
    }
}

/// Everything a sweep needs besides the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Fixed γ_Π for every point; `None` solves the Γ constraint per point.
    pub gamma_pi: Option<f64>,
    pub env_gamma: f64,
    pub cutoff: CutoffPolicy,
    pub gate_order: GateOrder,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            gamma_pi: None,
            env_gamma: 0.0,
            cutoff: CutoffPolicy::default(),
            gate_order: GateOrder::AFirst,
            samples: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    pub b: f64,
    pub gamma_phi: f64,
    pub mode_amp: f64,
    pub overlap: f64,
    /// `None` when the point failed; see `error`.
    pub coherent_info_bits: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub variant: Option<Variant>,
    pub input_state: String,
    /// `None` when Γ_eff = π/4 is enforced at every point.
    pub gamma_pi: Option<f64>,
    pub seed: u64,
    pub samples: Option<usize>,
    pub env_gamma: f64,
    pub gate_order: GateOrder,
    pub cutoff_start: usize,
    pub cutoff_max: usize,
    pub hermitian_tol: f64,
    pub trace_tol: f64,
    pub psd_tol: f64,
    pub entropy_clamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metadata: SweepMetadata,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// `variant,b,gamma_phi,mode_amp,overlap,coherent_info_bits`; failed
    /// points carry `NaN` in the last column.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("variant,b,gamma_phi,mode_amp,overlap,coherent_info_bits\n");
        for r in &self.rows {
            let ic = r.coherent_info_bits.unwrap_or(f64::NAN);
            let _ = writeln!(out, "{},{},{},{},{},{}", r.variant, r.b, r.gamma_phi, r.mode_amp, r.overlap, ic);
        }
        out
    }

    /// `b,gamma_phi,mode_amp,overlap`.
    pub fn overlaps_csv(&self) -> String {
        let mut out = String::from("b,gamma_phi,mode_amp,overlap\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.b, r.gamma_phi, r.mode_amp, r.overlap);
        }
        out
    }
}

fn metadata(variant: Option<Variant>, opts: &SweepOptions) -> SweepMetadata {
    SweepMetadata {
        variant,
        input_state: "maximally entangled R-A pair".into(),
        gamma_pi: opts.gamma_pi,
        seed: opts.seed,
        samples: (variant == Some(Variant::NoisyMc)).then_some(opts.samples),
        env_gamma: opts.env_gamma,
        gate_order: opts.gate_order,
        cutoff_start: opts.cutoff.start,
        cutoff_max: opts.cutoff.max,
        hermitian_tol: HERMITIAN_TOL,
        trace_tol: TRACE_TOL,
        psd_tol: PSD_TOL,
        entropy_clamp: ENTROPY_CLAMP,
    }
}

/// Channel output for one grid point of `variant`.
pub fn evaluate_point(variant: Variant, gamma_phi: f64, b: f64, mode_amp: f64, opts: &SweepOptions) -> Result<DensityMatrix> {
    let p = match opts.gamma_pi {
        None => ChannelParams::constrained(gamma_phi, mode_amp)?,
        Some(gamma_pi) => ChannelParams::unconstrained(gamma_phi, gamma_pi, mode_amp)?,
    };
    let p = p
        .with_cutoff(opts.cutoff)
        .with_gate_order(opts.gate_order);
    let input = maximally_entangled_input();
    match variant {
        Variant::Baseline => transfer_channel_exact(&p, &input),
        Variant::Env => transfer_channel_with_env_exact(&p.with_env_gamma(opts.env_gamma), &input),
        Variant::NoisyEffective => transfer_channel_noisy(&p.with_ct_b(b), &input),
        Variant::NoisyMc => Ok(crosstalk_channel_mc(&p.with_ct_b(b), &input, opts.samples, opts.seed)?.mean),
    }
}

fn point_overlap(variant: Variant, gamma_phi: f64, b: f64, mode_amp: f64) -> f64 {
    if variant.uses_b() {
        crosstalk_overlap(gamma_phi, b, mode_amp)
    } else {
        dephased_overlap(OverlapParams { gamma: gamma_phi, mode_amp })
    }
}

fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|x, y| {
        x.variant
            .cmp(&y.variant)
            .then(x.b.total_cmp(&y.b))
            .then(x.gamma_phi.total_cmp(&y.gamma_phi))
    });
}

/// One row per (b, γ_φ); failed points become error rows.
pub fn run_sweep(grid: &SweepGrid, opts: &SweepOptions) -> Result<SweepResult> {
    grid.validate()?;
    if grid.variant == Variant::NoisyMc && opts.samples == 0 {
        return Err(UdwError::InvalidParameter("noisy-mc sweeps need at least one sample".into()));
    }
    let points: Vec<(f64, f64)> = grid
        .effective_b()
        .into_iter()
        .flat_map(|b| grid.gamma_phi.iter().map(move |&g| (b, g)))
        .collect();
    let mut rows: Vec<SweepRow> = points
        .par_iter()
        .map(|&(b, g)| {
            let outcome = evaluate_point(grid.variant, g, b, grid.mode_amp, opts)
                .and_then(|rho| coherent_information(&rho));
            let (ic, error) = match outcome {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRow {
                variant: grid.variant,
                b,
                gamma_phi: g,
                mode_amp: grid.mode_amp,
                overlap: point_overlap(grid.variant, g, b, grid.mode_amp),
                coherent_info_bits: ic,
                error,
            }
        })
        .collect();
    sort_rows(&mut rows);
    Ok(SweepResult {
        metadata: metadata(Some(grid.variant), opts),
        rows,
    })
}

/// Cross-talk overlap for every (b, γ_φ) of the grid; b = 0 rows are the
/// plain dephased overlap.
pub fn overlap_curves(grid: &SweepGrid) -> Result<SweepResult> {
    grid.validate()?;
    let mut rows: Vec<SweepRow> = grid
        .b
        .iter()
        .flat_map(|&b| {
            grid.gamma_phi.iter().map(move |&g| SweepRow {
                variant: Variant::NoisyEffective,
                b,
                gamma_phi: g,
                mode_amp: grid.mode_amp,
                overlap: crosstalk_overlap(g, b, grid.mode_amp),
                coherent_info_bits: None,
                error: None,
            })
        })
        .collect();
    sort_rows(&mut rows);
    Ok(SweepResult {
        metadata: metadata(None, &SweepOptions::default()),
        rows,
    })
}
