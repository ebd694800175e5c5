//! Dense complex linear algebra over qubit and truncated single-mode Fock spaces.
//!
//! Subsystem ordering follows the usual tensor convention: the leftmost factor
//! is the most significant index. Truncated displacements are built from the
//! eigendecomposition of the real symmetric quadrature `a + a†`, so every
//! displacement matrix is exactly unitary on the retained block.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, UdwError};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Max elementwise |ρ - ρ†| accepted for a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Accepted |Tr ρ - 1|.
pub const TRACE_TOL: f64 = 1e-8;
/// Most negative eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-9;
/// Eigenvalues below this are treated as zero inside the entropy.
pub const ENTROPY_CLAMP: f64 = 1e-12;
/// Norm a coherent state may lose to truncation.
pub const TRUNCATION_TAIL: f64 = 1e-10;

pub const DEFAULT_CUTOFF: usize = 64;
pub const MAX_CUTOFF: usize = 512;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Tensor product, leftmost factor most significant.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest elementwise modulus of `m`.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// (m + m†)/2
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let eig = SymmetricEigen::new(hermitize(m));
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

/// Table of flat indices: `table[k][t]` is the flat index whose digits on
/// `first` (in the order given) enumerate to `k` and whose remaining digits
/// (ascending position order) enumerate to `t`.
fn index_table(dims: &[usize], first: &[usize]) -> Vec<Vec<usize>> {
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !first.contains(i)).collect();

    let offsets = |positions: &[usize]| -> Vec<usize> {
        let total: usize = positions.iter().map(|&p| dims[p]).product();
        (0..total)
            .map(|mut flat| {
                let mut offset = 0;
                for &p in positions.iter().rev() {
                    offset += (flat % dims[p]) * strides[p];
                    flat /= dims[p];
                }
                offset
            })
            .collect()
    };
    let first_off = offsets(first);
    let rest_off = offsets(&rest);
    first_off
        .iter()
        .map(|&f| rest_off.iter().map(|&r| f + r).collect())
        .collect()
}

fn check_positions(dims: &[usize], positions: &[usize]) -> Result<()> {
    if positions.is_empty() {
        return Err(UdwError::Dimension("no subsystems selected".into()));
    }
    for (i, &p) in positions.iter().enumerate() {
        if p >= dims.len() {
            return Err(UdwError::Dimension(format!(
                "subsystem {p} out of range for {} subsystems",
                dims.len()
            )));
        }
        if positions[..i].contains(&p) {
            return Err(UdwError::Dimension(format!("subsystem {p} selected twice")));
        }
    }
    Ok(())
}

/// Applies `op` to the subsystems `targets` of the pure state `state`.
///
/// The operator's own index ordering follows `targets` (first target most
/// significant), so a gate written as qubit ⊗ field can act on a state laid out
/// as field-then-qubit without permuting the gate.
pub fn apply_local(
    state: &CVector,
    dims: &[usize],
    targets: &[usize],
    op: &CMatrix,
) -> Result<CVector> {
    check_positions(dims, targets)?;
    let total: usize = dims.iter().product();
    let local: usize = targets.iter().map(|&t| dims[t]).product();
    if state.len() != total || op.nrows() != local || op.ncols() != local {
        return Err(UdwError::Dimension(format!(
            "operator {}x{} on targets {targets:?} of dims {dims:?} (state length {})",
            op.nrows(),
            op.ncols(),
            state.len()
        )));
    }
    let table = index_table(dims, targets);
    let rest = total / local;
    let mut out = CVector::zeros(total);
    let mut buf = vec![Complex64::default(); local];
    for t in 0..rest {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = state[table[k][t]];
        }
        for i in 0..local {
            let mut acc = Complex64::default();
            for (j, v) in buf.iter().enumerate() {
                acc += op[(i, j)] * v;
            }
            out[table[i][t]] = acc;
        }
    }
    Ok(out)
}

/// Reduced state of the pure vector `state` on the subsystems `keep`
/// (ascending order), returned as a raw matrix.
pub fn partial_trace_pure(state: &CVector, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    check_positions(dims, keep)?;
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    let table = index_table(dims, &keep);
    let kept = table.len();
    let traced = table[0].len();
    let m = CMatrix::from_fn(kept, traced, |k, t| state[table[k][t]]);
    Ok(&m * m.adjoint())
}

/// Density matrix with subsystem bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::unchecked(matrix, dims)?;
        rho.validate()?;
        Ok(rho)
    }

    fn unchecked(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(UdwError::Dimension(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dims.is_empty() || dims.contains(&0) {
            return Err(UdwError::Dimension(format!("bad subsystem dims {dims:?}")));
        }
        let prod: usize = dims.iter().product();
        if prod != matrix.nrows() {
            return Err(UdwError::Dimension(format!(
                "dims {dims:?} multiply to {prod}, matrix is {}",
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(UdwError::InvalidState("non-finite entry".into()));
        }
        Ok(Self { matrix, dims })
    }

    /// Accepts a state whose trace drifted through truncation: the drift is
    /// removed by renormalisation when it is within [`TRACE_TOL`], otherwise
    /// it is reported as leakage.
    pub fn renormalized(matrix: CMatrix, dims: Vec<usize>) -> Result<Self> {
        let rho = Self::unchecked(hermitize(&matrix), dims)?;
        let tr = rho.trace();
        let leakage = (tr - 1.0).abs();
        if leakage > TRACE_TOL {
            return Err(UdwError::Leakage { leakage });
        }
        let matrix = rho.matrix * c64(1.0 / tr, 0.0);
        Self::new(matrix, rho.dims)
    }

    pub fn from_pure(state: &CVector, dims: Vec<usize>) -> Result<Self> {
        let norm = state.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(UdwError::InvalidState("zero or non-finite state vector".into()));
        }
        let psi = state / c64(norm, 0.0);
        Self::new(&psi * psi.adjoint(), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        Self::new(identity(d) * c64(1.0 / d as f64, 0.0), dims)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermitian_deviation();
        if herm > HERMITIAN_TOL {
            return Err(UdwError::InvalidState(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL || self.matrix.trace().im.abs() > TRACE_TOL {
            return Err(UdwError::InvalidState(format!("trace {tr} != 1")));
        }
        let min = self.eigenvalues()[0];
        if min < -PSD_TOL {
            return Err(UdwError::InvalidState(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix {
            matrix: kron(&self.matrix, &other.matrix),
            dims,
        }
    }

    /// Reduced state on `keep`; kept subsystems stay in their original order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        check_positions(&self.dims, keep)?;
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        let table = index_table(&self.dims, &keep);
        let kept = table.len();
        let traced = table[0].len();
        let reduced = CMatrix::from_fn(kept, kept, |i, j| {
            (0..traced)
                .map(|t| self.matrix[(table[i][t], table[j][t])])
                .sum()
        });
        let dims = keep.iter().map(|&p| self.dims[p]).collect();
        Ok(DensityMatrix {
            matrix: reduced,
            dims,
        })
    }
}

/// Von Neumann entropy in bits.
pub fn vn_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

pub(crate) fn entropy_of_spectrum(eigenvalues: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .map(|&p| p.clamp(0.0, 1.0))
        .filter(|&p| p > ENTROPY_CLAMP)
        .map(|p| -p * p.log2())
        .sum()
}

/// P(n ≥ cutoff) for a Poisson law of mean `mean`: the norm a coherent state
/// with |δ|² = mean loses when the Fock space is cut at `cutoff` levels.
pub fn truncation_tail(mean: f64, cutoff: usize) -> f64 {
    if mean <= 0.0 {
        return if cutoff == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    let mut ln_term = -mean;
    if (cutoff as f64) > mean {
        for n in 1..=cutoff {
            ln_term += ln_mean - (n as f64).ln();
        }
        let mut tail = 0.0;
        let mut n = cutoff;
        loop {
            let term = ln_term.exp();
            tail += term;
            if term <= tail * 1e-17 || term == 0.0 {
                break;
            }
            n += 1;
            ln_term += ln_mean - (n as f64).ln();
        }
        tail
    } else {
        let mut captured = 0.0;
        for n in 0..cutoff {
            if n > 0 {
                ln_term += ln_mean - (n as f64).ln();
            }
            captured += ln_term.exp();
        }
        (1.0 - captured).max(0.0)
    }
}

/// How the Fock cutoff may grow when an amplitude does not fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutoffPolicy {
    pub start: usize,
    pub max: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            start: DEFAULT_CUTOFF,
            max: MAX_CUTOFF,
        }
    }
}

impl CutoffPolicy {
    /// A single cutoff with no escalation.
    pub fn fixed(cutoff: usize) -> Self {
        Self {
            start: cutoff,
            max: cutoff,
        }
    }

    /// Smallest admissible cutoff reachable by doubling from `start`.
    pub fn resolve(&self, amplitude: f64) -> Result<usize> {
        if self.start < 2 {
            return Err(UdwError::InvalidParameter(format!(
                "Fock cutoff must be at least 2, got {}",
                self.start
            )));
        }
        let mean = amplitude * amplitude;
        let mut cutoff = self.start;
        loop {
            let tail = truncation_tail(mean, cutoff);
            if tail <= TRUNCATION_TAIL {
                return Ok(cutoff);
            }
            if cutoff >= self.max {
                return Err(UdwError::Truncation {
                    amplitude,
                    cutoff,
                    tail,
                    suggested: suggest_cutoff(mean),
                });
            }
            cutoff = (cutoff * 2).min(self.max.max(cutoff + 1));
        }
    }
}

fn suggest_cutoff(mean: f64) -> usize {
    let mut cutoff = 2usize;
    while truncation_tail(mean, cutoff) > TRUNCATION_TAIL {
        cutoff *= 2;
    }
    cutoff
}

/// Single bosonic mode truncated to levels |0⟩…|N-1⟩.
#[derive(Debug, Clone)]
pub struct FockSpace {
    cutoff: usize,
    quad_values: DVector<f64>,
    quad_vectors: DMatrix<f64>,
}

impl FockSpace {
    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(UdwError::InvalidParameter(format!(
                "Fock cutoff must be at least 2, got {cutoff}"
            )));
        }
        let quadrature = DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(quadrature);
        Ok(Self {
            cutoff,
            quad_values: eig.eigenvalues,
            quad_vectors: eig.eigenvectors,
        })
    }

    /// Process-wide cached instance for `cutoff`.
    pub fn shared(cutoff: usize) -> Result<Arc<FockSpace>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<FockSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(space) = cache.lock().expect("fock cache poisoned").get(&cutoff) {
            return Ok(Arc::clone(space));
        }
        let space = Arc::new(FockSpace::new(cutoff)?);
        cache
            .lock()
            .expect("fock cache poisoned")
            .insert(cutoff, Arc::clone(&space));
        Ok(space)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn ladder(&self) -> CMatrix {
        CMatrix::from_fn(self.cutoff, self.cutoff, |i, j| {
            if j == i + 1 {
                c64((j as f64).sqrt(), 0.0)
            } else {
                Complex64::default()
            }
        })
    }

    pub fn check_amplitude(&self, delta: Complex64) -> Result<()> {
        let mean = delta.norm_sqr();
        let tail = truncation_tail(mean, self.cutoff);
        if tail > TRUNCATION_TAIL {
            return Err(UdwError::Truncation {
                amplitude: delta.norm(),
                cutoff: self.cutoff,
                tail,
                suggested: suggest_cutoff(mean),
            });
        }
        Ok(())
    }

    /// Phase gauge `T = diag(e^{i n ψ})` with ψ = arg δ - π/2, so that
    /// `δa† - δ̄a = T (i|δ|(a + a†)) T†`.
    fn gauge(&self, delta: Complex64) -> CVector {
        let psi = delta.arg() - std::f64::consts::FRAC_PI_2;
        CVector::from_fn(self.cutoff, |n, _| Complex64::from_polar(1.0, n as f64 * psi))
    }

    /// exp(δa† - δ̄a) on the truncated space, without the truncation check.
    pub fn displacement_unchecked(&self, delta: Complex64) -> CMatrix {
        let n = self.cutoff;
        if delta == Complex64::default() {
            return identity(n);
        }
        let r = delta.norm();
        let gauge = self.gauge(delta);
        let phases: Vec<Complex64> = self
            .quad_values
            .iter()
            .map(|&l| Complex64::from_polar(1.0, r * l))
            .collect();
        let v = &self.quad_vectors;
        // (V e^{irΛ} Vᵀ)_{mk}, then the gauge on both sides
        let mut core = CMatrix::zeros(n, n);
        for k in 0..n {
            for m in 0..n {
                let mut acc = Complex64::default();
                for (j, ph) in phases.iter().enumerate() {
                    acc += ph * (v[(m, j)] * v[(k, j)]);
                }
                core[(m, k)] = acc * gauge[m] * gauge[k].conj();
            }
        }
        core
    }

    pub fn displacement(&self, delta: Complex64) -> Result<CMatrix> {
        self.check_amplitude(delta)?;
        Ok(self.displacement_unchecked(delta))
    }

    /// D(δ)·v in O(N²) using the stored eigenbasis.
    pub fn apply_displacement(&self, delta: Complex64, v: &CVector) -> CVector {
        if delta == Complex64::default() {
            return v.clone();
        }
        let r = delta.norm();
        let gauge = self.gauge(delta);
        let w: CVector = v.component_mul(&gauge.map(|g| g.conj()));
        let basis = &self.quad_vectors;
        let mut coeffs = CVector::zeros(self.cutoff);
        for j in 0..self.cutoff {
            let mut acc = Complex64::default();
            for m in 0..self.cutoff {
                acc += w[m] * basis[(m, j)];
            }
            coeffs[j] = acc * Complex64::from_polar(1.0, r * self.quad_values[j]);
        }
        let mut out = CVector::zeros(self.cutoff);
        for m in 0..self.cutoff {
            let mut acc = Complex64::default();
            for j in 0..self.cutoff {
                acc += coeffs[j] * basis[(m, j)];
            }
            out[m] = acc * gauge[m];
        }
        out
    }

    /// Truncated, renormalised coherent state |δ⟩.
    pub fn coherent_state(&self, delta: Complex64) -> Result<CVector> {
        self.check_amplitude(delta)?;
        let raw = raw_coherent_coefficients(delta, self.cutoff);
        let norm = raw.norm();
        Ok(raw / c64(norm, 0.0))
    }
}

/// e^{-|δ|²/2} δⁿ/√(n!) for n < cutoff, not renormalised.
pub fn raw_coherent_coefficients(delta: Complex64, cutoff: usize) -> CVector {
    let mut out = CVector::zeros(cutoff);
    let mut c = c64((-delta.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..cutoff {
        if n > 0 {
            c = c * delta / (n as f64).sqrt();
        }
        out[n] = c;
    }
    out
}

/// Annihilation operator with a[m-1, m] = √m.
pub fn ladder(cutoff: usize) -> Result<CMatrix> {
    Ok(FockSpace::new(cutoff)?.ladder())
}

pub fn displacement_matrix(delta: Complex64, cutoff: usize) -> Result<CMatrix> {
    FockSpace::shared(cutoff)?.displacement(delta)
}

pub fn coherent_state_vector(delta: Complex64, cutoff: usize) -> Result<CVector> {
    FockSpace::shared(cutoff)?.coherent_state(delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, k: usize) -> CVector {
        let mut v = CVector::zeros(n);
        v[k] = c64(1.0, 0.0);
        v
    }

    fn diag(entries: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            entries.len(),
            entries.iter().map(|&x| c64(x, 0.0)),
        ))
    }

    fn bell() -> CVector {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![c64(s, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(s, 0.0)])
    }

    fn lcg_matrix(seed: u64, n: usize) -> CMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c64(next(), next()))
    }

    #[test]
    fn kron_identity_and_basis() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let k = kron(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]));
        assert_eq!(k, diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_trace_is_multiplicative() {
        let a = lcg_matrix(1, 3);
        let b = lcg_matrix(2, 3);
        // direct index multiplication oracle
        let mut expected = Complex64::default();
        for i in 0..3 {
            for j in 0..3 {
                expected += a[(i, i)] * b[(j, j)];
            }
        }
        let got = kron(&a, &b).trace();
        assert!((got - expected).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let rho_r = DensityMatrix::new(diag(&[0.3, 0.7]), vec![2]).unwrap();
        let rho_b = DensityMatrix::new(diag(&[0.9, 0.1]), vec![2]).unwrap();
        let joint = rho_r.tensor(&rho_b);
        let reduced = joint.partial_trace(&[1]).unwrap();
        assert!(max_abs(&(reduced.matrix() - rho_b.matrix())) < 1e-15);

        let bell = DensityMatrix::from_pure(&bell(), vec![2, 2]).unwrap();
        let first = bell.partial_trace(&[0]).unwrap();
        assert!(max_abs(&(first.matrix() - identity(2) * c64(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_positions() {
        let bell = DensityMatrix::from_pure(&bell(), vec![2, 2]).unwrap();
        assert!(matches!(bell.partial_trace(&[2]), Err(UdwError::Dimension(_))));
        assert!(matches!(bell.partial_trace(&[]), Err(UdwError::Dimension(_))));
    }

    #[test]
    fn partial_trace_matches_index_summation() {
        let dims = [2usize, 3, 2];
        let raw = lcg_matrix(7, 12).column(0).into_owned();
        let psi = &raw / c64(raw.norm(), 0.0);
        let rho = DensityMatrix::from_pure(&psi, dims.to_vec()).unwrap();
        // keep the middle factor: explicit sum over (i, k)
        let mut oracle = CMatrix::zeros(3, 3);
        for j in 0..3 {
            for jp in 0..3 {
                for i in 0..2 {
                    for k in 0..2 {
                        oracle[(j, jp)] += psi[i * 6 + j * 2 + k] * psi[i * 6 + jp * 2 + k].conj();
                    }
                }
            }
        }
        let reduced = rho.partial_trace(&[1]).unwrap();
        assert!(max_abs(&(reduced.matrix() - &oracle)) <= 1e-12);
        let pure_route = partial_trace_pure(&psi, &dims, &[1]).unwrap();
        assert!(max_abs(&(pure_route - &oracle)) <= 1e-12);
    }

    #[test]
    fn entropy_examples() {
        let mixed = DensityMatrix::maximally_mixed(vec![2]).unwrap();
        assert!((vn_entropy(&mixed) - 1.0).abs() < 1e-12);
        let pure = DensityMatrix::from_pure(&bell(), vec![2, 2]).unwrap();
        assert!(vn_entropy(&pure).abs() < 1e-12);
        let rho = DensityMatrix::new(diag(&[0.25, 0.75]), vec![2]).unwrap();
        let by_hand = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((vn_entropy(&rho) - by_hand).abs() < 1e-12);
        assert!((by_hand - 0.811_278_124_459_132_8).abs() < 1e-12);
    }

    #[test]
    fn density_validation_errors() {
        assert!(DensityMatrix::new(diag(&[0.5, 0.6]), vec![2]).is_err());
        assert!(DensityMatrix::new(diag(&[1.2, -0.2]), vec![2]).is_err());
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = c64(0.1, 0.0);
        assert!(DensityMatrix::new(m, vec![2]).is_err());
        assert!(DensityMatrix::new(diag(&[0.5, 0.5]), vec![3]).is_err());
    }

    #[test]
    fn renormalization_bounds_leakage() {
        let ok = DensityMatrix::renormalized(diag(&[0.5, 0.5 - 5e-9]), vec![2]).unwrap();
        assert!((ok.trace() - 1.0).abs() < 1e-15);
        assert!(matches!(
            DensityMatrix::renormalized(diag(&[0.5, 0.49]), vec![2]),
            Err(UdwError::Leakage { .. })
        ));
    }

    #[test]
    fn ladder_examples() {
        assert!(ladder(1).is_err());
        let a = ladder(2).unwrap();
        assert_eq!(&a * basis(2, 1), basis(2, 0));

        let n = 8;
        let a = ladder(n).unwrap();
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((comm[(i, j)] - c64(want, 0.0)).norm() < 1e-14);
            }
        }
        let number = a.adjoint() * &a;
        for k in 0..n {
            assert!((number[(k, k)] - c64(k as f64, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn displacement_basics() {
        let d0 = displacement_matrix(c64(0.0, 0.0), 16).unwrap();
        assert_eq!(d0, identity(16));

        let delta = c64(1.0, 0.5);
        let d = displacement_matrix(delta, 64).unwrap();
        let coh = coherent_state_vector(delta, 64).unwrap();
        for k in 0..64 {
            assert!((d[(k, 0)] - coh[k]).norm() <= 1e-10, "level {k}");
        }
        let unitarity = d.adjoint() * &d - identity(64);
        assert!(max_abs(&unitarity) <= 1e-8);
        let inverse = &d * displacement_matrix(-delta, 64).unwrap() - identity(64);
        assert!(max_abs(&inverse) <= 1e-8);
    }

    #[test]
    fn displacement_matches_series_exponential() {
        // Taylor series of the generator, independent of the eigenbasis route
        let n = 24;
        let delta = c64(-0.4, 0.7);
        let a = ladder(n).unwrap();
        let gen = a.adjoint() * delta - &a * delta.conj();
        let mut term = identity(n);
        let mut sum = identity(n);
        for k in 1..60 {
            term = &term * &gen * c64(1.0 / k as f64, 0.0);
            sum += &term;
        }
        let d = displacement_matrix(delta, n).unwrap();
        assert!(max_abs(&(d - sum)) < 1e-12);
    }

    #[test]
    fn apply_displacement_matches_matrix() {
        let space = FockSpace::new(32).unwrap();
        let v = lcg_matrix(3, 32).column(1).into_owned();
        let delta = c64(0.3, -1.1);
        let dense = space.displacement(delta).unwrap() * &v;
        let fast = space.apply_displacement(delta, &v);
        assert!((dense - fast).norm() < 1e-12);
    }

    #[test]
    fn coherent_state_properties() {
        let vac = coherent_state_vector(c64(0.0, 0.0), 8).unwrap();
        assert_eq!(vac, basis(8, 0));

        let delta = c64(1.5, -0.8);
        let raw = raw_coherent_coefficients(delta, 64);
        assert!(raw.norm_squared() >= 1.0 - 1e-10);
        let coh = coherent_state_vector(delta, 64).unwrap();
        let mean_n: f64 = coh.iter().enumerate().map(|(n, c)| n as f64 * c.norm_sqr()).sum();
        assert!((mean_n - delta.norm_sqr()).abs() <= 1e-8);
    }

    #[test]
    fn truncation_is_reported_with_suggestion() {
        match displacement_matrix(c64(6.0, 0.0), 16) {
            Err(UdwError::Truncation {
                cutoff, suggested, ..
            }) => {
                assert_eq!(cutoff, 16);
                assert!(suggested > 36);
                assert!(displacement_matrix(c64(6.0, 0.0), suggested).is_ok());
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncation_tail_matches_direct_sum() {
        for &(mean, cutoff) in &[(0.5f64, 4usize), (4.0, 10), (16.0, 20), (30.0, 64)] {
            let direct: f64 = (0..cutoff)
                .map(|n| {
                    let mut t = (-mean).exp();
                    for k in 1..=n {
                        t *= mean / k as f64;
                    }
                    t
                })
                .sum();
            assert!((truncation_tail(mean, cutoff) - (1.0 - direct)).abs() < 1e-13);
        }
        assert_eq!(truncation_tail(0.0, 2), 0.0);
    }

    #[test]
    fn cutoff_policy_escalates_and_fails() {
        let policy = CutoffPolicy::default();
        assert_eq!(policy.resolve(1.0).unwrap(), 64);
        assert_eq!(policy.resolve(7.0).unwrap(), 128);
        assert!(matches!(policy.resolve(30.0), Err(UdwError::Truncation { .. })));
        assert!(CutoffPolicy::fixed(4).resolve(3.0).is_err());
    }

    #[test]
    fn apply_local_respects_target_order() {
        // swap-free action of a qubit⊗field operator on a field⊗qubit layout
        let op = kron(&diag(&[1.0, -1.0]), &diag(&[1.0, 2.0, 3.0]));
        let dims = [3usize, 2];
        let state = CVector::from_fn(6, |i, _| c64(i as f64 + 1.0, 0.0));
        let out = apply_local(&state, &dims, &[1, 0], &op).unwrap();
        // entry (f, q) gets sign(q) * (f + 1)
        for f in 0..3 {
            for q in 0..2 {
                let sign = if q == 0 { 1.0 } else { -1.0 };
                let want = state[f * 2 + q] * sign * (f as f64 + 1.0);
                assert!((out[f * 2 + q] - want).norm() < 1e-15);
            }
        }
    }
}
