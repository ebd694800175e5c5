//! Exact single-mode displacement algebra.
//!
//! A product of displacement operators collapses to one displacement times a
//! scalar phase, `D(β)D(α) = e^{i Im(β ᾱ)} D(α + β)`, so vacuum expectation
//! values of arbitrary displacement strings are closed-form scalars with no
//! truncation error.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdwError};

/// `e^{i·phase} D(amplitude)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementTerm {
    pub amplitude: Complex64,
    pub phase: f64,
}

impl DisplacementTerm {
    pub fn new(amplitude: Complex64) -> Self {
        Self {
            amplitude,
            phase: 0.0,
        }
    }

    pub fn with_phase(amplitude: Complex64, phase: f64) -> Self {
        Self { amplitude, phase }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    /// The adjoint `e^{-i·phase} D(-amplitude)`.
    pub fn inverse(&self) -> Self {
        Self {
            amplitude: -self.amplitude,
            phase: -self.phase,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.amplitude.re.is_finite() && self.amplitude.im.is_finite() && self.phase.is_finite()
    }
}

/// Operator product `left · right` (right acts first).
pub fn compose(left: DisplacementTerm, right: DisplacementTerm) -> DisplacementTerm {
    DisplacementTerm {
        amplitude: left.amplitude + right.amplitude,
        phase: left.phase + right.phase + (left.amplitude * right.amplitude.conj()).im,
    }
}

/// Collapses an operator-ordered string (leftmost acts last) to one term.
pub fn compose_all<'a, I>(terms: I) -> DisplacementTerm
where
    I: IntoIterator<Item = &'a DisplacementTerm>,
{
    terms
        .into_iter()
        .fold(DisplacementTerm::identity(), |acc, t| compose(acc, *t))
}

/// Adjoint of an operator string: reversed order, each factor inverted.
pub fn adjoint_string(terms: &[DisplacementTerm]) -> Vec<DisplacementTerm> {
    terms.iter().rev().map(DisplacementTerm::inverse).collect()
}

/// ⟨0| D(t₀) D(t₁) … D(tₙ) |0⟩ for an operator-ordered string.
pub fn vacuum_expectation(terms: &[DisplacementTerm]) -> Complex64 {
    let total = compose_all(terms);
    Complex64::from_polar((-total.amplitude.norm_sqr() / 2.0).exp(), total.phase)
}

/// ⟨β|α⟩ for coherent states.
pub fn overlap(beta: Complex64, alpha: Complex64) -> Complex64 {
    (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + beta.conj() * alpha).exp()
}

/// Constant dephasing value and mode amplitude of one field observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapParams {
    pub gamma: f64,
    pub mode_amp: f64,
}

impl OverlapParams {
    pub fn new(gamma: f64, mode_amp: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0 && mode_amp.is_finite() && mode_amp >= 0.0) {
            return Err(UdwError::InvalidParameter(format!(
                "overlap parameters must be finite and non-negative (gamma {gamma}, |alpha| {mode_amp})"
            )));
        }
        Ok(Self { gamma, mode_amp })
    }
}

/// |⟨+√γ α | -√γ α⟩| = e^{-2γ|α|²}.
pub fn dephased_overlap(p: OverlapParams) -> f64 {
    (-2.0 * p.gamma * p.mode_amp * p.mode_amp).exp()
}
