//! Quantum states and overlap measures: density operators with cached
//! spectra, fidelity Φ(θ,σ) = ‖√θ√σ‖_tr, Schatten norms, the operator-norm
//! overlap Γ_q with its classical counterpart Γ_cl, and Husimi-mass probes
//! of phase-space localization across an ℏ-family.

use std::sync::OnceLock;

use faer::c64;

use crate::error::{CoreError, Result};
use crate::fit::log_log_fit;
use crate::geom::SpherePoint;
use crate::linalg::{self, CMat, HermEig};
use crate::observable::Observable;
use crate::space::QuantumSpace;

/// Eigenvalues this far below zero are clamped; anything worse is rejected.
const PSD_TOLERANCE: f64 = 1e-10;

/// A density operator: Hermitian, positive semidefinite, trace one.
/// The eigendecomposition is computed on first spectral use and cached.
pub struct DensityOperator {
    mat: CMat,
    eig: OnceLock<Result<HermEig>>,
}

impl DensityOperator {
    /// Wrap a matrix, checking Hermiticity (≤ 1e-12 max entry deviation) and
    /// unit trace (≤ 1e-9). Positivity is verified lazily with the spectrum.
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(CoreError::BadDensityOperator(format!(
                "matrix is {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = linalg::herm_residual(&mat);
        if herm > 1e-12 * scale_of(&mat) {
            return Err(CoreError::BadDensityOperator(format!(
                "Hermiticity residual {herm:.3e}"
            )));
        }
        let tr = linalg::trace(&mat);
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(CoreError::BadDensityOperator(format!(
                "trace {} + {}i ≠ 1",
                tr.re, tr.im
            )));
        }
        Ok(DensityOperator { mat, eig: OnceLock::new() })
    }

    /// Rank-one state from a (not necessarily normalized) vector.
    pub fn pure(coeffs: &[c64]) -> Result<Self> {
        let n2: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(CoreError::BadDensityOperator("zero or non-finite vector".into()));
        }
        let d = coeffs.len();
        let mat = CMat::from_fn(d, d, |i, j| coeffs[i] * coeffs[j].conj() / n2);
        DensityOperator::from_matrix(mat)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Cached spectrum; fails if an eigenvalue sits below −1e-10.
    pub fn eigen(&self) -> Result<&HermEig> {
        let stored = self.eig.get_or_init(|| {
            let e = linalg::eigh(&self.mat)?;
            if e.vals.first().copied().unwrap_or(0.0) < -PSD_TOLERANCE {
                return Err(CoreError::BadDensityOperator(format!(
                    "negative eigenvalue {:.3e}",
                    e.vals[0]
                )));
            }
            Ok(e)
        });
        match stored {
            Ok(e) => Ok(e),
            Err(err) => Err(err.clone()),
        }
    }

    /// Matrix square root with negative eigenvalues clamped to zero.
    pub fn sqrt(&self) -> Result<CMat> {
        let e = self.eigen()?;
        let n = e.vals.len();
        let mut scaled = CMat::zeros(n, n);
        for j in 0..n {
            let s = e.vals[j].max(0.0).sqrt();
            for i in 0..n {
                scaled[(i, j)] = e.vecs[(i, j)] * s;
            }
        }
        Ok(&scaled * e.vecs.adjoint())
    }

    pub fn op_norm(&self) -> Result<f64> {
        let e = self.eigen()?;
        Ok(e.vals.last().copied().unwrap_or(0.0).max(0.0))
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(&self.mat * &self.mat)).re
    }
}

fn scale_of(a: &CMat) -> f64 {
    let mut s = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s = s.max(a[(i, j)].norm());
        }
    }
    s.max(1e-300)
}

/// Fidelity Φ(θ, σ) = ‖√θ·√σ‖_tr ∈ [0, 1]. The absolute noise floor is of
/// order dim·ε·‖√θ√σ‖, so values ≲ 1e-12 mean "orthogonal".
pub fn fidelity(theta: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if theta.dim() != sigma.dim() {
        return Err(CoreError::InvalidArgument(format!(
            "dimension mismatch {} vs {}",
            theta.dim(),
            sigma.dim()
        )));
    }
    let prod = &theta.sqrt()? * &sigma.sqrt()?;
    let phi: f64 = linalg::singular_values(&prod)?.iter().sum();
    Ok(phi.min(1.0))
}

/// Schatten norms of an arbitrary matrix, via singular values.
#[derive(Clone, Copy, Debug)]
pub struct SchattenNorms {
    pub op_norm: f64,
    pub trace_norm: f64,
    pub hilbert_schmidt: f64,
}

pub fn schatten(a: &CMat) -> Result<SchattenNorms> {
    let sv = linalg::singular_values(a)?;
    let op_norm = sv.first().copied().unwrap_or(0.0);
    let trace_norm = sv.iter().sum();
    let hilbert_schmidt = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(SchattenNorms { op_norm, trace_norm, hilbert_schmidt })
}

/// Γ_q(θ, σ) = ‖θσ‖_op/(‖θ‖_op‖σ‖_op) for positive Hermitian operators
/// (not necessarily trace-one).
pub fn gamma_q(theta: &CMat, sigma: &CMat) -> Result<f64> {
    for (name, a) in [("first", theta), ("second", sigma)] {
        let res = linalg::herm_residual(a);
        if res > 1e-8 * scale_of(a) {
            return Err(CoreError::HypothesisViolated(format!(
                "{name} operator is not Hermitian (residual {res:.3e})"
            )));
        }
    }
    let nt = linalg::eigvalsh(theta)?;
    let ns = linalg::eigvalsh(sigma)?;
    let top_t = nt.last().copied().unwrap_or(0.0);
    let top_s = ns.last().copied().unwrap_or(0.0);
    if top_t <= 0.0 || top_s <= 0.0 {
        return Err(CoreError::UndefinedOverlap(
            "Γ_q needs nonzero positive operators".into(),
        ));
    }
    for (name, lows, top) in [("first", &nt, top_t), ("second", &ns, top_s)] {
        if lows[0] < -1e-8 * top {
            return Err(CoreError::HypothesisViolated(format!(
                "{name} operator has negative eigenvalue {:.3e}",
                lows[0]
            )));
        }
    }
    let num = linalg::op_norm(&(theta * sigma))?;
    Ok((num / (top_t * top_s)).min(1.0))
}

/// Γ_cl(g, h) = ‖g·h‖/(‖g‖·‖h‖), uniform norms estimated on a probe grid.
pub fn gamma_cl(
    g: &Observable,
    h: &Observable,
    t: f64,
    grid: &[SpherePoint],
) -> Result<f64> {
    let mut sup_g = 0.0f64;
    let mut sup_h = 0.0f64;
    let mut sup_gh = 0.0f64;
    for p in grid {
        let a = g.value(p, t).abs();
        let b = h.value(p, t).abs();
        sup_g = sup_g.max(a);
        sup_h = sup_h.max(b);
        sup_gh = sup_gh.max(a * b);
    }
    if sup_g == 0.0 || sup_h == 0.0 {
        return Err(CoreError::UndefinedOverlap(
            "Γ_cl needs functions that are nonzero on the probe grid".into(),
        ));
    }
    Ok((sup_gh / (sup_g * sup_h)).min(1.0))
}

/// Husimi masses of a region across an ℏ-family, with the fitted decay
/// order of mass vs ℏ.
pub struct MicroProbe {
    /// (ℏ, mass) pairs, ascending in ℏ.
    pub masses: Vec<(f64, f64)>,
    /// Least-squares slope of log mass vs log ℏ.
    pub decay_order: f64,
    pub r_squared: f64,
    /// Number of masses that sat at or below the fit floor.
    pub clamped: usize,
    /// decay_order ≥ the requested threshold.
    pub rapid: bool,
}

/// Probe ν_ℏ(U) = tr(T(ind_U)·θ_ℏ) across a family of states living in
/// their own spaces. Needs ≥ 4 distinct ℏ spanning at least one decade.
pub fn microsupport_probe(
    family: &[(&QuantumSpace, &DensityOperator)],
    region: &Observable,
    rapid_threshold: f64,
) -> Result<MicroProbe> {
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(family.len());
    for (space, theta) in family {
        if space.dim != theta.dim() {
            return Err(CoreError::InvalidArgument(
                "state dimension does not match its space".into(),
            ));
        }
        let mass = crate::toeplitz::husimi_mass(space, theta.matrix(), |p| region.value(p, 0.0));
        if !(-1e-9..=1.0 + 1e-9).contains(&mass) {
            return Err(CoreError::BadDensityOperator(format!(
                "Husimi mass {mass} outside [0, 1]"
            )));
        }
        pairs.push((space.hbar, mass));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    if pairs.len() < 4 {
        return Err(CoreError::InvalidArgument(format!(
            "microsupport probe needs ≥ 4 distinct ℏ, got {}",
            pairs.len()
        )));
    }
    let span = pairs.last().unwrap().0 / pairs.first().unwrap().0;
    if span < 10.0 {
        return Err(CoreError::InvalidArgument(format!(
            "ℏ family spans only a factor {span:.2}, need ≥ 10"
        )));
    }
    let hs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ms: Vec<f64> = pairs.iter().map(|p| p.1.max(0.0)).collect();
    let fit = log_log_fit(&hs, &ms, 1e-14)?;
    Ok(MicroProbe {
        masses: pairs,
        decay_order: fit.exponent,
        r_squared: fit.r_squared,
        clamped: fit.clamped,
        rapid: fit.exponent >= rapid_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis_state(dim: usize, m: usize) -> DensityOperator {
        let mut v = vec![c64::new(0.0, 0.0); dim];
        v[m] = c64::new(1.0, 0.0);
        DensityOperator::pure(&v).unwrap()
    }

    #[test]
    fn self_fidelity_is_one() {
        let theta = basis_state(5, 2);
        assert!((fidelity(&theta, &theta).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pure_state_fidelity_is_overlap_modulus() {
        let xi = DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(0.0, 0.0)]).unwrap();
        let eta = DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(1.0, 0.0)]).unwrap();
        let phi = fidelity(&xi, &eta).unwrap();
        assert!((phi - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        // orthogonal pure states overlap at the noise floor
        let other = basis_state(2, 1);
        assert!(fidelity(&xi, &other).unwrap() < 1e-12);
    }

    #[test]
    fn mixed_fidelity_oracle_two_level() {
        // θ = diag(a, 1−a), σ = diag(b, 1−b) commute:
        // Φ = √(ab) + √((1−a)(1−b))
        let mk = |a: f64| {
            let mut m = CMat::zeros(2, 2);
            m[(0, 0)] = c64::new(a, 0.0);
            m[(1, 1)] = c64::new(1.0 - a, 0.0);
            DensityOperator::from_matrix(m).unwrap()
        };
        let (a, b) = (0.3f64, 0.8f64);
        let want = (a * b).sqrt() + ((1.0 - a) * (1.0 - b)).sqrt();
        let got = fidelity(&mk(a), &mk(b)).unwrap();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn schatten_norms_on_identity_and_projector() {
        let id = CMat::identity(4, 4);
        let s = schatten(&id).unwrap();
        assert!((s.op_norm - 1.0).abs() < 1e-12);
        assert!((s.trace_norm - 4.0).abs() < 1e-12);
        assert!((s.hilbert_schmidt - 2.0).abs() < 1e-12);
        let p = basis_state(4, 1);
        let sp = schatten(p.matrix()).unwrap();
        assert!((sp.op_norm - 1.0).abs() < 1e-12);
        assert!((sp.trace_norm - 1.0).abs() < 1e-12);
        assert!((sp.hilbert_schmidt - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_q_with_maximally_mixed_is_one() {
        let d = 6usize;
        let theta = basis_state(d, 3);
        let mixed = CMat::from_fn(d, d, |i, j| {
            if i == j { c64::new(1.0 / d as f64, 0.0) } else { c64::new(0.0, 0.0) }
        });
        let g = gamma_q(theta.matrix(), &mixed).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_q_pure_states_give_overlap() {
        let xi = DensityOperator::pure(&[c64::new(0.6, 0.0), c64::new(0.8, 0.0)]).unwrap();
        let eta = DensityOperator::pure(&[c64::new(1.0, 0.0), c64::new(0.0, 0.0)]).unwrap();
        let g = gamma_q(xi.matrix(), eta.matrix()).unwrap();
        assert!((g - 0.6).abs() < 1e-12);
    }

    #[test]
    fn gamma_q_disjoint_supports_vanish() {
        let mut a = CMat::zeros(4, 4);
        a[(0, 0)] = c64::new(0.7, 0.0);
        a[(1, 1)] = c64::new(0.3, 0.0);
        let mut b = CMat::zeros(4, 4);
        b[(2, 2)] = c64::new(0.5, 0.0);
        b[(3, 3)] = c64::new(0.5, 0.0);
        assert!(gamma_q(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn gamma_q_rejects_zero_and_nonpositive() {
        let z = CMat::zeros(3, 3);
        let id = CMat::identity(3, 3);
        assert!(matches!(gamma_q(&z, &id), Err(CoreError::UndefinedOverlap(_))));
        let mut neg = CMat::identity(3, 3);
        neg[(0, 0)] = c64::new(-1.0, 0.0);
        assert!(matches!(gamma_q(&neg, &id), Err(CoreError::HypothesisViolated(_))));
    }

    #[test]
    fn gamma_cl_basics() {
        let grid = crate::geom::fibonacci_grid(600);
        let g = Observable::autonomous(|p| (1.0 - p.z()).max(0.0));
        let same = gamma_cl(&g, &g, 0.0, &grid).unwrap();
        assert!((same - 1.0).abs() < 1e-12);
        let north = SpherePoint::north();
        let south = SpherePoint::south();
        let bump_n = Observable::cap_plateau(north, 0.3, 0.6, 1.0);
        let bump_s = Observable::cap_plateau(south, 0.3, 0.6, 1.0);
        let disj = gamma_cl(&bump_n, &bump_s, 0.0, &grid).unwrap();
        assert_eq!(disj, 0.0);
        let zero = Observable::autonomous(|_| 0.0);
        assert!(gamma_cl(&zero, &g, 0.0, &grid).is_err());
    }

    #[test]
    fn density_operator_validation() {
        // non-Hermitian rejected
        let mut bad = CMat::identity(2, 2);
        bad[(0, 1)] = c64::new(0.2, 0.0);
        assert!(DensityOperator::from_matrix(bad).is_err());
        // wrong trace rejected
        let two = CMat::identity(2, 2);
        assert!(DensityOperator::from_matrix(two).is_err());
        // negative spectrum rejected lazily
        let mut neg = CMat::zeros(2, 2);
        neg[(0, 0)] = c64::new(1.5, 0.0);
        neg[(1, 1)] = c64::new(-0.5, 0.0);
        let op = DensityOperator::from_matrix(neg).unwrap();
        assert!(op.eigen().is_err());
        assert!(op.sqrt().is_err());
    }
}
