//! End-to-end qubit → field → qubit channels.
//!
//! Qubit A (entangled with a reference R) encodes onto the field vacuum, qubit
//! B starts in |+y⟩ and decodes. The exact path sums over the 16 gate-branch
//! pairs with closed-form vacuum expectations; the Fock path builds the whole
//! R ⊗ A ⊗ F ⊗ B state and applies the gate matrices directly.

use std::f64::consts::{E, FRAC_PI_4, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent_algebra::{
    adjoint_string, dephased_overlap, vacuum_expectation, DisplacementTerm, OverlapParams,
};
use crate::error::{Result, UdwError};
use crate::fock_linalg::{
    apply_local, c64, hermitize, identity, kron, partial_trace_pure, CMatrix, CVector, CutoffPolicy,
    DensityMatrix, FockSpace,
};
use crate::quadrature::gaussian_expectation;
use crate::udw_gates::{
    gamma_phase, gate_branches, gate_matrix_in, projector_x, projector_z, solve_gamma_pi, GateParams,
    Qubit, Sign,
};

/// Environment factors below this are dropped from the phase mixture.
const ENV_FACTOR_FLOOR: f64 = 1e-20;
/// Largest phase mixture the environment paths will build.
const MAX_ENV_PHASES: usize = 1 << 22;
const STRICT_GAMMA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateOrder {
    #[default]
    AFirst,
    BFirst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub gate_a: GateParams,
    pub gate_b: GateParams,
    pub mode_amp: f64,
    /// Environment dephasing variance γ_E.
    pub env_gamma: f64,
    /// Cross-talk multiplier b.
    pub ct_b: f64,
    pub cutoff: CutoffPolicy,
    pub gate_order: GateOrder,
    /// Require Γ_eff = π/4 on both gates.
    pub strict_gamma: bool,
}

impl ChannelParams {
    /// Both gates at coupling `gamma_phi` with γ_Π solved from the Γ constraint.
    pub fn constrained(gamma_phi: f64, mode_amp: f64) -> Result<Self> {
        let gate_a = GateParams::constrained(gamma_phi, mode_amp, Qubit::A)?;
        let gate_b = GateParams {
            which_qubit: Qubit::B,
            ..gate_a
        };
        let p = Self {
            gate_a,
            gate_b,
            mode_amp,
            env_gamma: 0.0,
            ct_b: 0.0,
            cutoff: CutoffPolicy::default(),
            gate_order: GateOrder::AFirst,
            strict_gamma: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Arbitrary couplings, no Γ constraint.
    pub fn unconstrained(gamma_phi: f64, gamma_pi: f64, mode_amp: f64) -> Result<Self> {
        let gate_a = GateParams::new(gamma_phi, gamma_pi, mode_amp, Qubit::A)?;
        let p = Self {
            gate_a,
            gate_b: GateParams {
                which_qubit: Qubit::B,
                ..gate_a
            },
            mode_amp,
            env_gamma: 0.0,
            ct_b: 0.0,
            cutoff: CutoffPolicy::default(),
            gate_order: GateOrder::AFirst,
            strict_gamma: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_env_gamma(mut self, env_gamma: f64) -> Self {
        self.env_gamma = env_gamma;
        self
    }

    pub fn with_ct_b(mut self, b: f64) -> Self {
        self.ct_b = b;
        self
    }

    pub fn with_cutoff(mut self, cutoff: CutoffPolicy) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_gate_order(mut self, order: GateOrder) -> Self {
        self.gate_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.gate_a.validate()?;
        self.gate_b.validate()?;
        if self.gate_a.which_qubit != Qubit::A || self.gate_b.which_qubit != Qubit::B {
            return Err(UdwError::InvalidParameter(
                "gate_a must act on qubit A and gate_b on qubit B".into(),
            ));
        }
        for (name, v) in [
            ("mode_amp", self.mode_amp),
            ("env_gamma", self.env_gamma),
            ("ct_b", self.ct_b),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(UdwError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.gate_a.mode_amp != self.mode_amp || self.gate_b.mode_amp != self.mode_amp {
            return Err(UdwError::InvalidParameter(
                "gates and channel disagree on the mode amplitude".into(),
            ));
        }
        if self.strict_gamma {
            for gate in [&self.gate_a, &self.gate_b] {
                let miss = gamma_phase(gate).distance_to(FRAC_PI_4);
                if miss > STRICT_GAMMA_TOL {
                    return Err(UdwError::InvalidParameter(format!(
                        "Γ_eff of gate {:?} is {} (off π/4 by {miss:.3e})",
                        gate.which_qubit,
                        gamma_phase(gate).value
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bound on the field displacement after both gates.
    pub fn max_field_amplitude(&self) -> f64 {
        self.gate_a.max_amplitude() + self.gate_b.max_amplitude()
    }

    fn ordered_gates(&self) -> (&GateParams, &GateParams) {
        match self.gate_order {
            GateOrder::AFirst => (&self.gate_a, &self.gate_b),
            GateOrder::BFirst => (&self.gate_b, &self.gate_a),
        }
    }
}

/// (|00⟩ + |11⟩)/√2 on R ⊗ A.
pub fn maximally_entangled_input() -> DensityMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v = CVector::from_vec(vec![c64(h, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(h, 0.0)]);
    DensityMatrix::from_pure(&v, vec![2, 2]).expect("Bell state is valid")
}

/// (|0⟩ + i|1⟩)/√2.
pub fn plus_y() -> CVector {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_vec(vec![c64(h, 0.0), c64(0.0, h)])
}

fn check_input(input: &DensityMatrix) -> Result<()> {
    if input.dims() != [2, 2] {
        return Err(UdwError::Dimension(format!(
            "channel input must live on R ⊗ A with dims [2, 2], got {:?}",
            input.dims()
        )));
    }
    input.validate()
}

fn finish(matrix: CMatrix) -> Result<DensityMatrix> {
    DensityMatrix::new(hermitize(&matrix), vec![2, 2])
}

struct BranchPair {
    /// I_R ⊗ K_A ⊗ K_B
    kraus: CMatrix,
    /// Displacements of the gate applied first, then of the second gate.
    first: Vec<DisplacementTerm>,
    second: Vec<DisplacementTerm>,
}

impl BranchPair {
    /// Field operator string (operator order) with the first gate's
    /// amplitudes multiplied by `rotation`.
    fn field_string(&self, rotation: Complex64) -> Vec<DisplacementTerm> {
        self.second
            .iter()
            .copied()
            .chain(
                self.first
                    .iter()
                    .map(|t| DisplacementTerm::with_phase(t.amplitude * rotation, t.phase)),
            )
            .collect()
    }
}

fn branch_pairs(p: &ChannelParams) -> Vec<BranchPair> {
    let id = identity(2);
    let mut out = Vec::with_capacity(16);
    for ba in gate_branches(&p.gate_a) {
        for bb in gate_branches(&p.gate_b) {
            let kraus = kron(&id, &kron(&ba.qubit_operator(), &bb.qubit_operator()));
            let (first, second) = match p.gate_order {
                GateOrder::AFirst => (ba.displacements.clone(), bb.displacements.clone()),
                GateOrder::BFirst => (bb.displacements.clone(), ba.displacements.clone()),
            };
            out.push(BranchPair {
                kraus,
                first,
                second,
            });
        }
    }
    out
}

/// Σ_ij c_ij K_i ρ₀ K_j†, traced down to (R, B).
fn assemble<F>(p: &ChannelParams, input: &DensityMatrix, coeff: F) -> Result<DensityMatrix>
where
    F: Fn(&BranchPair, &BranchPair) -> Complex64,
{
    let pairs = branch_pairs(p);
    let y = plus_y();
    let rho0 = kron(input.matrix(), &(&y * y.adjoint()));
    let left: Vec<CMatrix> = pairs.iter().map(|b| &b.kraus * &rho0).collect();
    let right: Vec<CMatrix> = pairs.iter().map(|b| b.kraus.adjoint()).collect();
    let mut rho = CMatrix::zeros(8, 8);
    for (i, bi) in pairs.iter().enumerate() {
        for (j, bj) in pairs.iter().enumerate() {
            let c = coeff(bi, bj);
            if c != Complex64::default() {
                rho += &left[i] * &right[j] * c;
            }
        }
    }
    let full = DensityMatrix::new(hermitize(&rho), vec![2, 2, 2])?;
    finish(full.partial_trace(&[0, 2])?.into_matrix())
}

/// Baseline channel through the displacement algebra; no truncation.
/// `env_gamma` and `ct_b` are ignored here.
pub fn transfer_channel_exact(p: &ChannelParams, input: &DensityMatrix) -> Result<DensityMatrix> {
    p.validate()?;
    check_input(input)?;
    assemble(p, input, |bi, bj| {
        let one = c64(1.0, 0.0);
        let mut s = adjoint_string(&bj.field_string(one));
        s.extend(bi.field_string(one));
        vacuum_expectation(&s)
    })
}

/// Characteristic factor of the environment phase: exp(-γ_E d²/2).
pub fn env_factor(gamma_e: f64, d: f64) -> f64 {
    (-0.5 * gamma_e * d * d).exp()
}

/// Smallest d with env_factor below the floor.
fn env_band(gamma_e: f64) -> usize {
    ((-2.0 * ENV_FACTOR_FLOOR.ln() / gamma_e).sqrt()).ceil() as usize
}

/// Phases φ_j = 2πj/M and weights w_j with Σ_j w_j e^{-iφ_j d} = env_factor(d)
/// for |d| < M - band.
pub fn env_phase_mixture(gamma_e: f64, band: usize, phases: usize) -> Result<Vec<(f64, f64)>> {
    if phases > MAX_ENV_PHASES {
        return Err(UdwError::InvalidParameter(format!(
            "environment dephasing γ_E = {gamma_e} needs {phases} mixture phases"
        )));
    }
    let m = phases as f64;
    let factors: Vec<f64> = (1..=band).map(|d| env_factor(gamma_e, d as f64)).collect();
    Ok((0..phases)
        .map(|j| {
            let phi = 2.0 * PI * j as f64 / m;
            let mut w = 1.0;
            for (k, f) in factors.iter().enumerate() {
                w += 2.0 * f * (phi * (k + 1) as f64).cos();
            }
            (phi, w / m)
        })
        .collect())
}

/// Literal bosonic dephasing of a single-mode state: entry (n, m) times
/// exp(-γ_E (n-m)²/2).
pub fn env_dephase(rho_fock: &DensityMatrix, gamma_e: f64) -> Result<DensityMatrix> {
    if rho_fock.dims().len() != 1 {
        return Err(UdwError::Dimension(format!(
            "env_dephase expects a single-mode state, got dims {:?}",
            rho_fock.dims()
        )));
    }
    env_dephase_subsystem(rho_fock, 0, gamma_e)
}

/// As [`env_dephase`], acting on subsystem `mode` of a joint state.
pub fn env_dephase_subsystem(rho: &DensityMatrix, mode: usize, gamma_e: f64) -> Result<DensityMatrix> {
    if !(gamma_e.is_finite() && gamma_e >= 0.0) {
        return Err(UdwError::InvalidParameter(format!("γ_E must be non-negative, got {gamma_e}")));
    }
    let dims = rho.dims();
    if mode >= dims.len() {
        return Err(UdwError::Dimension(format!("no subsystem {mode} in {dims:?}")));
    }
    let stride: usize = dims[mode + 1..].iter().product();
    let level = |i: usize| ((i / stride) % dims[mode]) as f64;
    let m = rho.matrix();
    let out = CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * env_factor(gamma_e, level(i) - level(j))
    });
    DensityMatrix::new(out, dims.to_vec())
}

/// Baseline channel with the environment dephasing between the gates,
/// evaluated exactly: the environment rotates the first gate's displacement
/// by e^{-iφ}, and the phase average is done with [`env_phase_mixture`].
pub fn transfer_channel_with_env_exact(p: &ChannelParams, input: &DensityMatrix) -> Result<DensityMatrix> {
    p.validate()?;
    check_input(input)?;
    if p.env_gamma == 0.0 {
        return transfer_channel_exact(p, input);
    }
    let (first, second) = p.ordered_gates();
    // Fourier coefficients of a branch-pair factor decay past ~e·|p|·|q| orders
    let coupling = 16.0 * first.max_amplitude() * second.max_amplitude();
    let band = env_band(p.env_gamma);
    let phases = band + (E * coupling).ceil() as usize + 64;
    let mixture = env_phase_mixture(p.env_gamma, band, phases)?;
    let rotations: Vec<(Complex64, f64)> = mixture
        .iter()
        .map(|&(phi, w)| (Complex64::from_polar(1.0, -phi), w))
        .collect();
    assemble(p, input, |bi, bj| {
        let terms: Vec<Complex64> = rotations
            .par_iter()
            .map(|&(rot, w)| {
                let mut s = adjoint_string(&bj.field_string(rot));
                s.extend(bi.field_string(rot));
                vacuum_expectation(&s) * w
            })
            .collect();
        pairwise_sum(&terms)
    })
}

fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    match values.len() {
        0 => Complex64::default(),
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Spectral decomposition of the input as (weight, pure state) pairs.
fn input_ensemble(input: &DensityMatrix) -> Vec<(f64, CVector)> {
    let eig = SymmetricEigen::new(input.matrix().clone());
    (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > 1e-15)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
        .collect()
}

/// Multiplies every amplitude by e^{-iφ n}, n the level of subsystem `mode`.
fn rotate_mode(state: &CVector, dims: &[usize], mode: usize, phi: f64) -> CVector {
    let stride: usize = dims[mode + 1..].iter().product();
    CVector::from_fn(state.len(), |i, _| {
        let n = ((i / stride) % dims[mode]) as f64;
        state[i] * Complex64::from_polar(1.0, -phi * n)
    })
}

fn fock_pipeline(p: &ChannelParams, input: &DensityMatrix, env_gamma: f64) -> Result<DensityMatrix> {
    p.validate()?;
    check_input(input)?;
    let n = p.cutoff.resolve(p.max_field_amplitude())?;
    let space = FockSpace::shared(n)?;
    let (first, second) = p.ordered_gates();
    let u_first = gate_matrix_in(first, &space)?;
    let u_second = gate_matrix_in(second, &space)?;
    // R, A, F, B; gate matrices are qubit ⊗ field
    let dims = [2, 2, n, 2];
    let targets = |g: &GateParams| if g.which_qubit == Qubit::A { [1, 2] } else { [3, 2] };

    let mut vacuum = CVector::zeros(n);
    vacuum[0] = c64(1.0, 0.0);
    let tail = vacuum.kronecker(&plus_y());

    let mixture = if env_gamma > 0.0 {
        let band = env_band(env_gamma).min(n - 1);
        env_phase_mixture(env_gamma, band, n + band)?
    } else {
        vec![(0.0, 1.0)]
    };

    let mut rho = CMatrix::zeros(4, 4);
    for (weight, v) in input_ensemble(input) {
        let psi = v.kronecker(&tail);
        let psi = apply_local(&psi, &dims, &targets(first), &u_first)?;
        let parts: Vec<CMatrix> = mixture
            .par_iter()
            .map(|&(phi, w)| -> Result<CMatrix> {
                let rotated = if phi == 0.0 { psi.clone() } else { rotate_mode(&psi, &dims, 2, phi) };
                let out = apply_local(&rotated, &dims, &targets(second), &u_second)?;
                Ok(partial_trace_pure(&out, &dims, &[0, 3])? * c64(w, 0.0))
            })
            .collect::<Result<_>>()?;
        for part in parts {
            rho += part * c64(weight, 0.0);
        }
    }
    DensityMatrix::renormalized(rho, vec![2, 2])
}

/// Brute-force oracle for [`transfer_channel_exact`] on R ⊗ A ⊗ Fock(N) ⊗ B.
pub fn transfer_channel_fock(p: &ChannelParams, input: &DensityMatrix) -> Result<DensityMatrix> {
    fock_pipeline(p, input, 0.0)
}

/// Fock pipeline with [`env_dephase`] applied to the field between the gates.
///
/// The Hadamard-factor map is realised on the pure-state branches as a finite
/// mixture of phase rotations with the same action on the truncated space.
pub fn transfer_channel_with_env(p: &ChannelParams, input: &DensityMatrix) -> Result<DensityMatrix> {
    fock_pipeline(p, input, p.env_gamma)
}

/// Gaussian density p(φ) of the cross-talk phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDistribution {
    pub variance: f64,
}

impl NoiseDistribution {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(UdwError::InvalidParameter(format!(
                "noise variance must be finite and non-negative, got {variance}"
            )));
        }
        Ok(Self { variance })
    }

    /// Variance b²γ_φ.
    pub fn crosstalk(gamma_phi: f64, b: f64) -> Result<Self> {
        Self::new(b * b * gamma_phi)
    }

    pub fn density(&self, phi: f64) -> f64 {
        (-phi * phi / (2.0 * self.variance)).exp() / (2.0 * PI * self.variance).sqrt()
    }
}

/// exp(-2γ|α|²/(1+c)) / √(1+c), c = 4|α|²b²γ.
pub fn crosstalk_overlap(gamma_phi: f64, b: f64, mode_amp: f64) -> f64 {
    let a2 = mode_amp * mode_amp;
    let c = 4.0 * a2 * b * b * gamma_phi;
    if c == 0.0 {
        return dephased_overlap(OverlapParams { gamma: gamma_phi, mode_amp });
    }
    (-2.0 * gamma_phi * a2 / (1.0 + c)).exp() / (1.0 + c).sqrt()
}

/// ∫ p(φ) exp(-2(φ + √γ)²|α|²) dφ for opposite branch signs.
///
/// Gauss–Hermite is weighted on whichever Gaussian factor is narrower, so a
/// broad noise density does not starve the sharp integrand of nodes.
pub fn crosstalk_overlap_quadrature(
    gamma_phi: f64,
    b: f64,
    mode_amp: f64,
    dist: &NoiseDistribution,
    nodes: usize,
) -> Result<f64> {
    for (name, v) in [("gamma_phi", gamma_phi), ("b", b), ("mode_amp", mode_amp)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(UdwError::InvalidParameter(format!("{name} must be non-negative, got {v}")));
        }
    }
    if mode_amp == 0.0 {
        return Ok(1.0);
    }
    let a2 = mode_amp * mode_amp;
    let shift = gamma_phi.sqrt();
    // the integrand is a Gaussian in φ with variance s² and centre -√γ
    let s2 = 1.0 / (4.0 * a2);
    let g = |phi: f64| (-2.0 * (phi + shift).powi(2) * a2).exp();
    if dist.variance <= s2 {
        gaussian_expectation(0.0, dist.variance, nodes, g)
    } else {
        let e = gaussian_expectation(-shift, s2, nodes, |phi| dist.density(phi))?;
        Ok((2.0 * PI * s2).sqrt() * e)
    }
}

/// Field-branch factor between cross-talk signs s and s′: 1 when they agree.
pub fn crosstalk_branch_overlap(
    s: Sign,
    s_prime: Sign,
    gamma_phi: f64,
    b: f64,
    mode_amp: f64,
    nodes: usize,
) -> Result<f64> {
    if s == s_prime {
        return Ok(1.0);
    }
    let dist = NoiseDistribution::crosstalk(gamma_phi, b)?;
    crosstalk_overlap_quadrature(gamma_phi, b, mode_amp, &dist, nodes)
}

/// K(σ) = √((2π)³)·σ.
pub fn smearing_constant(sigma: f64) -> f64 {
    (2.0 * PI).powf(1.5) * sigma
}

/// γ = λ²/K(σ).
pub fn lambda_to_gamma(lambda: f64, sigma: f64) -> f64 {
    lambda * lambda / smearing_constant(sigma)
}

pub fn gamma_to_lambda(gamma: f64, sigma: f64) -> f64 {
    (gamma * smearing_constant(sigma)).sqrt()
}

/// Noiseless γ whose overlap e^{-2γ|α|²} equals the cross-talk overlap:
/// γ/(1+c) + ln(1+c)/(4|α|²), c = 4|α|²b²γ.
pub fn effective_gamma(gamma_phi: f64, b: f64, mode_amp: f64) -> f64 {
    let a2 = mode_amp * mode_amp;
    let c = 4.0 * a2 * b * b * gamma_phi;
    if c == 0.0 {
        return gamma_phi;
    }
    gamma_phi / (1.0 + c) + c.ln_1p() / (4.0 * a2)
}

/// λ_{φ,b} with λ_{φ,b}² = λ²/(1+c) + K/(4|α|²)·ln(1+c), c = 4|α|²b²λ²/K.
pub fn effective_coupling(lambda_phi: f64, b: f64, mode_amp: f64, sigma: f64) -> Result<f64> {
    if !(lambda_phi.is_finite() && lambda_phi > 0.0 && sigma.is_finite() && sigma > 0.0) {
        return Err(UdwError::InvalidParameter(format!(
            "λ_φ and σ must be positive (got {lambda_phi}, {sigma})"
        )));
    }
    if !(b.is_finite() && b >= 0.0 && mode_amp.is_finite() && mode_amp >= 0.0) {
        return Err(UdwError::InvalidParameter(format!(
            "b and |α| must be non-negative (got {b}, {mode_amp})"
        )));
    }
    let k = smearing_constant(sigma);
    let a2 = mode_amp * mode_amp;
    let c = 4.0 * a2 * b * b * lambda_phi * lambda_phi / k;
    if c == 0.0 {
        return Ok(lambda_phi);
    }
    Ok((lambda_phi * lambda_phi / (1.0 + c) + k / (4.0 * a2) * c.ln_1p()).sqrt())
}

/// The baseline parameters with each gate's γ_φ replaced by its effective
/// value and the Π strength adjusted to keep Γ_eff.
pub fn noisy_params(p: &ChannelParams) -> Result<ChannelParams> {
    p.validate()?;
    if p.ct_b == 0.0 {
        return Ok(*p);
    }
    let adjust = |gate: &GateParams| -> Result<GateParams> {
        if gate.gamma_phi == 0.0 {
            return Ok(*gate);
        }
        let gb = effective_gamma(gate.gamma_phi, p.ct_b, p.mode_amp);
        let gamma_pi = if p.strict_gamma {
            solve_gamma_pi(gb, p.mode_amp)?
        } else {
            gate.gamma_pi * gate.gamma_phi / gb
        };
        GateParams::new(gb, gamma_pi, p.mode_amp, gate.which_qubit)
    };
    Ok(ChannelParams {
        gate_a: adjust(&p.gate_a)?,
        gate_b: adjust(&p.gate_b)?,
        ..*p
    })
}

/// Baseline exact channel at the effective coupling for `p.ct_b`.
pub fn transfer_channel_noisy(p: &ChannelParams, input: &DensityMatrix) -> Result<DensityMatrix> {
    transfer_channel_exact(&noisy_params(p)?, input)
}

/// Eight field vectors, one per computational configuration of (R, A, B),
/// indexed r·4 + a·2 + b.
struct FieldRegister {
    fields: Vec<CVector>,
}

impl FieldRegister {
    fn new(ra: &CVector, cutoff: usize) -> Self {
        let y = plus_y();
        let fields = (0..8)
            .map(|c| {
                let mut f = CVector::zeros(cutoff);
                f[0] = ra[c >> 1] * y[c & 1];
                f
            })
            .collect();
        Self { fields }
    }

    /// Σ_s P_s ⊗ D(amp(s)) on the given qubit.
    fn controlled<P, A>(&mut self, space: &FockSpace, qubit: Qubit, projector: P, amp: A)
    where
        P: Fn(Sign) -> CMatrix,
        A: Fn(Sign) -> Complex64,
    {
        let bit = if qubit == Qubit::A { 1 } else { 0 };
        let n = space.cutoff();
        let mut out = vec![CVector::zeros(n); 8];
        for s in Sign::BOTH {
            let proj = projector(s);
            let delta = amp(s);
            let displaced: Vec<CVector> = self
                .fields
                .iter()
                .map(|f| space.apply_displacement(delta, f))
                .collect();
            for (c, slot) in out.iter_mut().enumerate() {
                let q = (c >> bit) & 1;
                for q2 in 0..2 {
                    let coef = proj[(q, q2)];
                    if coef != Complex64::default() {
                        let c2 = (c & !(1 << bit)) | (q2 << bit);
                        *slot += &displaced[c2] * coef;
                    }
                }
            }
        }
        self.fields = out;
    }

    /// One detector gate with φ-kick modulus `phi` (may be negative) and
    /// Π-kick modulus `pi`.
    fn gate(&mut self, space: &FockSpace, qubit: Qubit, phi: f64, pi: f64) {
        let phi_kick = |z: Sign| c64(0.0, z.value() * phi);
        let pi_kick = |x: Sign| c64(-x.value() * pi, 0.0);
        match qubit {
            Qubit::A => {
                self.controlled(space, qubit, projector_z, phi_kick);
                self.controlled(space, qubit, projector_x, pi_kick);
            }
            _ => {
                self.controlled(space, qubit, projector_x, pi_kick);
                self.controlled(space, qubit, projector_z, phi_kick);
            }
        }
    }

    fn reduced_rb(&self) -> CMatrix {
        CMatrix::from_fn(4, 4, |i, j| {
            let (r, b) = (i >> 1, i & 1);
            let (r2, b2) = (j >> 1, j & 1);
            (0..2)
                .map(|a| self.fields[(r2 << 2) | (a << 1) | b2].dotc(&self.fields[(r << 2) | (a << 1) | b]))
                .sum()
        })
    }
}

fn gate_kicks(gate: &GateParams) -> (f64, f64) {
    (gate.gamma_phi.sqrt() * gate.mode_amp, gate.gamma_pi.sqrt() * gate.mode_amp)
}

/// One Monte Carlo sample: qubit A's φ-kick scaled from √γ_φ to √γ_φ + φ.
fn mc_sample(p: &ChannelParams, ensemble: &[(f64, CVector)], phi: f64) -> Result<CMatrix> {
    let (_, pi_a) = gate_kicks(&p.gate_a);
    let phi_a = (p.gate_a.gamma_phi.sqrt() + phi) * p.mode_amp;
    let (phi_b, pi_b) = gate_kicks(&p.gate_b);
    let reach = phi_a.abs() + pi_a + phi_b + pi_b;
    let n = p.cutoff.resolve(reach)?;
    let space = FockSpace::shared(n)?;
    let mut rho = CMatrix::zeros(4, 4);
    for (w, v) in ensemble {
        let mut reg = FieldRegister::new(v, n);
        match p.gate_order {
            GateOrder::AFirst => {
                reg.gate(&space, Qubit::A, phi_a, pi_a);
                reg.gate(&space, Qubit::B, phi_b, pi_b);
            }
            GateOrder::BFirst => {
                reg.gate(&space, Qubit::B, phi_b, pi_b);
                reg.gate(&space, Qubit::A, phi_a, pi_a);
            }
        }
        rho += reg.reduced_rb() * c64(*w, 0.0);
    }
    Ok(rho)
}

#[derive(Debug, Clone)]
pub struct MonteCarloEstimate {
    pub mean: DensityMatrix,
    /// Standard error of the real parts of the mean.
    pub std_error_re: DMatrix<f64>,
    /// Standard error of the imaginary parts of the mean.
    pub std_error_im: DMatrix<f64>,
    pub samples: usize,
}

impl MonteCarloEstimate {
    /// Largest |reference - mean| in units of the standard error, per real
    /// and imaginary part; `floor` guards entries with zero spread.
    pub fn max_z_score(&self, reference: &CMatrix, floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let m = self.mean.matrix();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let d = reference[(i, j)] - m[(i, j)];
                worst = worst.max(d.re.abs() / self.std_error_re[(i, j)].max(floor));
                worst = worst.max(d.im.abs() / self.std_error_im[(i, j)].max(floor));
            }
        }
        worst
    }
}

fn pairwise_matrix_sum<T>(values: &[DMatrix<T>]) -> DMatrix<T>
where
    T: nalgebra::Scalar,
    DMatrix<T>: std::ops::Add<Output = DMatrix<T>>,
{
    match values.len() {
        1 => values[0].clone(),
        n => pairwise_matrix_sum(&values[..n / 2]) + pairwise_matrix_sum(&values[n / 2..]),
    }
}

/// Monte Carlo mixture over the cross-talk phase φ ~ N(0, b²γ_φ) in the Fock
/// picture. Sample i draws from ChaCha8 stream i of `seed`, and samples are
/// summed pairwise in index order, so the result does not depend on the
/// thread count.
pub fn crosstalk_channel_mc(
    p: &ChannelParams,
    input: &DensityMatrix,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    p.validate()?;
    check_input(input)?;
    if samples == 0 {
        return Err(UdwError::InvalidParameter("Monte Carlo needs at least one sample".into()));
    }
    let variance = NoiseDistribution::crosstalk(p.gate_a.gamma_phi, p.ct_b)?.variance;
    let normal = Normal::new(0.0, variance.sqrt())
        .map_err(|e| UdwError::InvalidParameter(format!("noise distribution: {e}")))?;
    let ensemble = input_ensemble(input);
    let draws: Vec<CMatrix> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let phi = if variance == 0.0 {
                0.0
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                normal.sample(&mut rng)
            };
            mc_sample(p, &ensemble, phi)
        })
        .collect::<Result<_>>()?;

    let n = samples as f64;
    let mean = pairwise_matrix_sum(&draws) / c64(n, 0.0);
    // two-pass variance so identical samples give exactly zero spread
    let spread = |part: fn(Complex64) -> f64| {
        let dev: Vec<DMatrix<f64>> = draws
            .iter()
            .map(|d| DMatrix::from_fn(4, 4, |i, j| (part(d[(i, j)]) - part(mean[(i, j)])).powi(2)))
            .collect();
        let total = pairwise_matrix_sum(&dev);
        total.map(|s| if samples < 2 { 0.0 } else { (s / (n - 1.0) / n).sqrt() })
    };
    let std_error_re = spread(|z| z.re);
    let std_error_im = spread(|z| z.im);
    Ok(MonteCarloEstimate {
        mean: finish(mean)?,
        std_error_re,
        std_error_im,
        samples,
    })
}
