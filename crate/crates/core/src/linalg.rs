//! Dense complex linear algebra helpers on top of faer: Hermitian spectral
//! calculus, singular values, and a Taylor matrix exponential kept around as
//! an independent cross-check for the spectral propagator.

use faer::{c64, Mat, Side};

use crate::error::{CoreError, Result};

pub type CMat = Mat<c64>;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending,
/// `vecs` column j ↔ `vals[j]`.
pub struct HermEig {
    pub vals: Vec<f64>,
    pub vecs: CMat,
}

pub fn eigh(a: &CMat) -> Result<HermEig> {
    let ed = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| CoreError::Linalg(format!("hermitian eigendecomposition failed: {e:?}")))?;
    let n = a.nrows();
    let vals = (0..n).map(|i| ed.S()[i].re).collect();
    Ok(HermEig { vals, vecs: ed.U().to_owned() })
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| CoreError::Linalg(format!("hermitian eigenvalues failed: {e:?}")))
}

/// Singular values, nonincreasing.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| CoreError::Linalg(format!("singular value decomposition failed: {e:?}")))
}

/// Operator (spectral) norm = largest singular value.
pub fn op_norm(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Trace norm = sum of singular values.
pub fn trace_norm(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

pub fn trace(a: &CMat) -> c64 {
    let n = a.nrows().min(a.ncols());
    (0..n).map(|i| a[(i, i)]).fold(c64::new(0.0, 0.0), |s, z| s + z)
}

pub fn frob_norm(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += a[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Largest entrywise deviation from self-adjointness, |A − A†|_max.
pub fn herm_residual(a: &CMat) -> f64 {
    let mut r = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j {
            r = r.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    r
}

/// Apply a real function to a Hermitian matrix through its spectrum:
/// U·diag(f(λ))·U†.
pub fn herm_fn(a: &CMat, f: impl Fn(f64) -> f64) -> Result<CMat> {
    herm_fn_c(a, |x| c64::new(f(x), 0.0))
}

/// Apply a complex function to a Hermitian matrix through its spectrum
/// (e.g. λ ↦ e^{−isλ} for unitary propagators).
pub fn herm_fn_c(a: &CMat, f: impl Fn(f64) -> c64) -> Result<CMat> {
    let HermEig { vals, vecs } = eigh(a)?;
    let n = vals.len();
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        let fj = f(vals[j]);
        for i in 0..n {
            scaled[(i, j)] = vecs[(i, j)] * fj;
        }
    }
    Ok(&scaled * vecs.adjoint())
}

/// Matrix exponential by scaling-and-squaring Taylor summation. Slower than
/// the spectral route but independent of the eigensolver; used as an oracle.
pub fn expm_taylor(a: &CMat) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm = frob_norm(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let mut scaled = CMat::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] = a[(i, j)] * scale;
        }
    }
    let mut result = CMat::identity(n, n);
    let mut term = CMat::identity(n, n);
    for k in 1..200 {
        term = &term * &scaled;
        let inv_k = 1.0 / k as f64;
        for j in 0..n {
            for i in 0..n {
                term[(i, j)] *= inv_k;
            }
        }
        result = &result + &term;
        if frob_norm(&term) < 1e-18 * frob_norm(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Outer product c·c† as a matrix.
pub fn outer(c: &[c64]) -> CMat {
    let n = c.len();
    CMat::from_fn(n, n, |i, j| c[i] * c[j].conj())
}

/// A†·v for a column slice (convenience for Rayleigh quotients).
pub fn mat_vec(a: &CMat, v: &[c64]) -> Vec<c64> {
    let n = a.nrows();
    assert_eq!(a.ncols(), v.len());
    let mut out = vec![c64::new(0.0, 0.0); n];
    for (j, &vj) in v.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * vj;
        }
    }
    out
}

pub fn inner(u: &[c64], v: &[c64]) -> c64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).fold(c64::new(0.0, 0.0), |s, z| s + z)
}
