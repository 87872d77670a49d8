//! Seeded random ensembles for the invariant batteries: Gaussian Hermitian
//! matrices, Wishart density operators and Haar-uniform pure states, drawn
//! through a fixed-stream generator so a quoted seed reproduces every trial
//! bit for bit on any platform.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, Result};
use crate::linalg::{self, CMat};
use crate::state::DensityOperator;

/// Deterministic generator for a quoted seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian: independent N(0, ½) parts, E|z|² = 1.
pub fn gaussian_complex<R: Rng>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(CoreError::InvalidArgument("ensemble dimension must be ≥ 1".into()));
    }
    Ok(())
}

/// GUE-style Hermitian matrix (G + G†)/2 with i.i.d. standard complex
/// Gaussian entries of G.  Entries are O(1); the operator norm grows like
/// √dim.
pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> Result<CMat> {
    check_dim(dim)?;
    let mut g = CMat::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = gaussian_complex(rng);
        }
    }
    Ok(CMat::from_fn(dim, dim, |i, j| (g[(i, j)] + g[(j, i)].conj()) * 0.5))
}

/// Haar-uniform unit vector (normalized complex Gaussian direction).
pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> Result<Vec<c64>> {
    check_dim(dim)?;
    loop {
        let v: Vec<c64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return Ok(v.into_iter().map(|z| z / norm).collect());
        }
    }
}

/// Trace-one Wishart state Σᵣ gᵣgᵣ†/tr: a random pure projector at rank 1,
/// progressively better mixed as the rank grows.
pub fn random_density<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> Result<DensityOperator> {
    check_dim(dim)?;
    if rank == 0 {
        return Err(CoreError::InvalidArgument("Wishart rank must be ≥ 1".into()));
    }
    let mut w = CMat::zeros(dim, dim);
    for _ in 0..rank {
        let g: Vec<c64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        w = &w + &linalg::outer(&g);
    }
    let tr = linalg::trace(&w).re;
    if !(tr > 1e-12) {
        return Err(CoreError::BadDensityOperator(format!(
            "degenerate Wishart draw with trace {tr:.3e}"
        )));
    }
    let scale = 1.0 / tr;
    DensityOperator::from_matrix(CMat::from_fn(dim, dim, |i, j| w[(i, j)] * scale))
}
