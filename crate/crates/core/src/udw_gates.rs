//! UDW detector gates as controlled displacements.
//!
//! With delta switching a detector gate is `Σ P ⊗ D`: qubit projectors paired
//! with field displacements. The φ-coupling displaces along the imaginary
//! axis, the Π-coupling along the real axis; crossing the two leaves the
//! phase `x·z·Γ_eff/2` on each branch.
//!
//! Qubit A encodes with `Σ P_x P_z ⊗ e^{ixΠ} e^{izφ}` (φ first). Qubit B
//! decodes with the mirrored gate `Σ P_z P_x ⊗ e^{izφ} e^{ixΠ}` (Π first). A
//! cross-talk detector couples through φ only.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coherent_algebra::{compose_all, DisplacementTerm};
use crate::error::{Result, UdwError};
use crate::fock_linalg::{c64, kron, CMatrix, FockSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Qubit {
    /// Sender; encodes onto the field.
    A,
    /// Receiver; decodes off the field.
    B,
    /// Unwanted third detector.
    CT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub gamma_phi: f64,
    pub gamma_pi: f64,
    pub mode_amp: f64,
    pub which_qubit: Qubit,
}

impl GateParams {
    pub fn new(gamma_phi: f64, gamma_pi: f64, mode_amp: f64, which_qubit: Qubit) -> Result<Self> {
        let p = Self {
            gamma_phi,
            gamma_pi,
            mode_amp,
            which_qubit,
        };
        p.validate()?;
        Ok(p)
    }

    /// Gate whose Π strength satisfies Γ_eff = π/4.
    pub fn constrained(gamma_phi: f64, mode_amp: f64, which_qubit: Qubit) -> Result<Self> {
        let gamma_pi = solve_gamma_pi(gamma_phi, mode_amp)?;
        Self::new(gamma_phi, gamma_pi, mode_amp, which_qubit)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_phi", self.gamma_phi),
            ("gamma_pi", self.gamma_pi),
            ("mode_amp", self.mode_amp),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(UdwError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Largest displacement modulus a single application of the gate reaches.
    pub fn max_amplitude(&self) -> f64 {
        let phi = self.gamma_phi.sqrt() * self.mode_amp;
        match self.which_qubit {
            Qubit::CT => phi,
            _ => phi + self.gamma_pi.sqrt() * self.mode_amp,
        }
    }
}

/// i·z·√γ_φ·|α|, phase 0.
pub fn phi_displacement(p: &GateParams, z: Sign) -> DisplacementTerm {
    DisplacementTerm::new(c64(0.0, z.value() * p.gamma_phi.sqrt() * p.mode_amp))
}

/// -x·√γ_Π·|α|, phase 0.
pub fn pi_displacement(p: &GateParams, x: Sign) -> DisplacementTerm {
    DisplacementTerm::new(c64(-x.value() * p.gamma_pi.sqrt() * p.mode_amp, 0.0))
}

/// Relative branch phase in radians, reduced to [0, 2π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPhase {
    pub value: f64,
}

impl GammaPhase {
    pub fn new(raw: f64) -> Self {
        Self {
            value: raw.rem_euclid(2.0 * PI),
        }
    }

    /// Circular distance to `target` (radians).
    pub fn distance_to(&self, target: f64) -> f64 {
        let d = (self.value - target).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }
}

/// Γ_eff = 2·√(γ_φ γ_Π)·|α|² mod 2π.
pub fn gamma_phase(p: &GateParams) -> GammaPhase {
    GammaPhase::new(2.0 * (p.gamma_phi * p.gamma_pi).sqrt() * p.mode_amp * p.mode_amp)
}

/// Principal γ_Π with Γ_eff = π/4: (π/4)² / (4 γ_φ |α|⁴).
pub fn solve_gamma_pi(gamma_phi: f64, mode_amp: f64) -> Result<f64> {
    if !(gamma_phi.is_finite() && gamma_phi > 0.0 && mode_amp.is_finite() && mode_amp > 0.0) {
        return Err(UdwError::InvalidParameter(format!(
            "Γ constraint needs positive gamma_phi and mode_amp (got {gamma_phi}, {mode_amp})"
        )));
    }
    Ok(FRAC_PI_4 * FRAC_PI_4 / (4.0 * gamma_phi * mode_amp.powi(4)))
}

/// Projector onto the σ_z eigenstate with eigenvalue `s`.
pub fn projector_z(s: Sign) -> CMatrix {
    match s {
        Sign::Plus => CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]),
        Sign::Minus => CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]),
    }
}

/// Projector onto the σ_x eigenstate with eigenvalue `s`.
pub fn projector_x(s: Sign) -> CMatrix {
    let h = 0.5 * s.value();
    CMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(h, 0.0), c64(h, 0.0), c64(0.5, 0.0)])
}

/// One term of a gate: projector labels and the field displacement string
/// in operator order (leftmost acts last).
#[derive(Debug, Clone, PartialEq)]
pub struct GateBranch {
    pub z: Sign,
    pub x: Option<Sign>,
    pub displacements: Vec<DisplacementTerm>,
    qubit: Qubit,
}

impl GateBranch {
    /// The qubit factor of this branch: P_x P_z (encode), P_z P_x (decode) or P_z.
    pub fn qubit_operator(&self) -> CMatrix {
        let pz = projector_z(self.z);
        match (self.qubit, self.x) {
            (Qubit::A, Some(x)) => projector_x(x) * pz,
            (Qubit::B, Some(x)) => pz * projector_x(x),
            _ => pz,
        }
    }

    /// The field factor as a single phased displacement.
    pub fn field_term(&self) -> DisplacementTerm {
        compose_all(&self.displacements)
    }
}

pub fn gate_branches(p: &GateParams) -> Vec<GateBranch> {
    let mut out = Vec::with_capacity(4);
    for z in Sign::BOTH {
        match p.which_qubit {
            Qubit::CT => out.push(GateBranch {
                z,
                x: None,
                displacements: vec![phi_displacement(p, z)],
                qubit: Qubit::CT,
            }),
            qubit => {
                for x in Sign::BOTH {
                    let phi = phi_displacement(p, z);
                    let pi = pi_displacement(p, x);
                    let displacements = match qubit {
                        Qubit::A => vec![pi, phi],
                        _ => vec![phi, pi],
                    };
                    out.push(GateBranch {
                        z,
                        x: Some(x),
                        displacements,
                        qubit,
                    });
                }
            }
        }
    }
    out
}

fn controlled(
    space: &FockSpace,
    projector: fn(Sign) -> CMatrix,
    amplitude: impl Fn(Sign) -> Complex64,
) -> Result<CMatrix> {
    let n = space.cutoff();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    for s in Sign::BOTH {
        out += kron(&projector(s), &space.displacement(amplitude(s))?);
    }
    Ok(out)
}

/// The gate on qubit ⊗ Fock(N), built as a product of the two controlled
/// displacements it is made of.
pub fn gate_matrix(p: &GateParams, cutoff: usize) -> Result<CMatrix> {
    let space = FockSpace::shared(cutoff)?;
    gate_matrix_in(p, &space)
}

pub fn gate_matrix_in(p: &GateParams, space: &FockSpace) -> Result<CMatrix> {
    p.validate()?;
    let phi_gate = controlled(space, projector_z, |z| phi_displacement(p, z).amplitude)?;
    if p.which_qubit == Qubit::CT {
        return Ok(phi_gate);
    }
    let pi_gate = controlled(space, projector_x, |x| pi_displacement(p, x).amplitude)?;
    Ok(match p.which_qubit {
        Qubit::A => pi_gate * phi_gate,
        _ => phi_gate * pi_gate,
    })
}

/// Σ_branches (qubit operator) ⊗ (displacement product), term by term.
pub fn branch_sum_matrix(p: &GateParams, cutoff: usize) -> Result<CMatrix> {
    let space = FockSpace::shared(cutoff)?;
    let n = space.cutoff();
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    for branch in gate_branches(p) {
        let mut field = CMatrix::identity(n, n);
        for t in &branch.displacements {
            field *= space.displacement(t.amplitude)? * Complex64::from_polar(1.0, t.phase);
        }
        out += kron(&branch.qubit_operator(), &field);
    }
    Ok(out)
}
