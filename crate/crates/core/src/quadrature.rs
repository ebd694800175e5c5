//! Gauss–Hermite quadrature for Gaussian expectations.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem of the
//! probabilists' Hermite Jacobi matrix, normalised so that the weights sum to
//! one and `Σ wᵢ f(xᵢ) ≈ E[f(X)]` for X ~ N(0, 1).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, UdwError};

pub const DEFAULT_NODES: usize = 64;
/// Largest |Q(n) - Q(2n)| accepted as converged.
pub const QUADRATURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(UdwError::InvalidParameter("quadrature needs at least one node".into()));
        }
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                (j as f64).sqrt()
            } else if i == j + 1 {
                (i as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // symmetrise: the rule is exactly even
        for k in 0..n / 2 {
            let x = 0.5 * (pairs[n - 1 - k].0 - pairs[k].0);
            let w = 0.5 * (pairs[n - 1 - k].1 + pairs[k].1);
            pairs[k] = (-x, w);
            pairs[n - 1 - k] = (x, w);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn shared(n: usize) -> Result<Arc<GaussHermite>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&n) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(GaussHermite::new(n)?);
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .insert(n, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(X)] for X ~ N(mean, sd²).
    pub fn expectation<F: Fn(f64) -> f64>(&self, mean: f64, sd: f64, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mean + sd * x))
            .sum()
    }

    pub fn expectation_complex<F: Fn(f64) -> Complex64>(&self, mean: f64, sd: f64, f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(mean + sd * x) * w)
            .sum()
    }
}

/// E[f(X)], X ~ N(mean, variance), with an n-versus-2n convergence check.
pub fn gaussian_expectation<F: Fn(f64) -> f64>(mean: f64, variance: f64, nodes: usize, f: F) -> Result<f64> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(UdwError::InvalidParameter(format!("variance must be non-negative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(f(mean));
    }
    let sd = variance.sqrt();
    let coarse = GaussHermite::shared(nodes)?.expectation(mean, sd, &f);
    let fine = GaussHermite::shared(2 * nodes)?.expectation(mean, sd, &f);
    check(nodes, (coarse - fine).abs())?;
    Ok(fine)
}

/// E[exp(-i d X)] for X ~ N(0, variance), by quadrature.
pub fn characteristic_quadrature(variance: f64, d: f64, nodes: usize) -> Result<Complex64> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(UdwError::InvalidParameter(format!("variance must be non-negative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let sd = variance.sqrt();
    let f = |x: f64| Complex64::from_polar(1.0, -d * x);
    let coarse = GaussHermite::shared(nodes)?.expectation_complex(0.0, sd, f);
    let fine = GaussHermite::shared(2 * nodes)?.expectation_complex(0.0, sd, f);
    check(nodes, (coarse - fine).norm())?;
    Ok(fine)
}

fn check(nodes: usize, difference: f64) -> Result<()> {
    if difference.is_nan() || difference > QUADRATURE_TOL {
        return Err(UdwError::Quadrature {
            nodes,
            refined: 2 * nodes,
            difference,
            tolerance: QUADRATURE_TOL,
        });
    }
    Ok(())
}
