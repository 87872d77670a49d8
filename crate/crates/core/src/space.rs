//! The quantum spaces attached to the sphere.
//!
//! For level k the space is spanned by the k+1 monomial sections; in the
//! orthonormal spin basis {s_m} the m-th basis section has the gauge-fixed
//! amplitude
//!
//!   v_m(θ, φ) = √((k+1)/(2π)·C(k,m)) · sin^m(θ/2) cos^{k−m}(θ/2) · e^{imφ}
//!
//! with θ the polar angle from the north pole. The semiclassical parameter
//! is ℏ = 1/k and the Rawnsley function Σ_m |v_m|² ≡ (k+1)/(2π) is constant,
//! so (2πℏ)·R = 1 + ℏ exactly. The gauge phase e^{imφ} is singular at the
//! south pole (θ = π); constructions needing phases there are refused.

use faer::c64;

use crate::error::{CoreError, Result};
use crate::geom::SpherePoint;
use crate::quad::ProductQuadrature;

pub const MIN_LEVEL: usize = 2;
pub const MAX_LEVEL: usize = 1024;

/// A fixed quantization level: basis data plus the product quadrature that
/// integrates all Gram integrands exactly.
pub struct QuantumSpace {
    pub k: usize,
    /// k + 1.
    pub dim: usize,
    /// ℏ = 1/k.
    pub hbar: f64,
    pub quad: ProductQuadrature,
    ln_binom: Vec<f64>,
    /// radial[m][i] = |v_m| at the i-th z-quadrature node.
    radial: Vec<Vec<f64>>,
}

/// Build the level-k space with quadrature oversampling `oversample`
/// (1.5 keeps the rule exact for the degree-k Gram integrands with margin).
pub fn build_space(k: usize, oversample: f64) -> Result<QuantumSpace> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&k) {
        return Err(CoreError::InvalidArgument(format!(
            "level k = {k} outside supported range [{MIN_LEVEL}, {MAX_LEVEL}]"
        )));
    }
    if !(1.0..=8.0).contains(&oversample) {
        return Err(CoreError::InvalidArgument(format!(
            "quadrature oversampling {oversample} outside [1, 8]"
        )));
    }
    let n_cos = (oversample * (k + 2) as f64).ceil() as usize;
    let mut n_phi = (oversample * (2 * k + 4) as f64).ceil() as usize;
    if n_phi % 2 == 1 {
        n_phi += 1;
    }
    let quad = ProductQuadrature::new(n_cos, n_phi);

    let mut ln_binom = vec![0.0f64; k + 1];
    for m in 1..=k {
        ln_binom[m] = ln_binom[m - 1] + (((k - m + 1) as f64) / m as f64).ln();
    }

    let ln_pref = ((k + 1) as f64 / std::f64::consts::TAU).ln();
    let mut radial = Vec::with_capacity(k + 1);
    for m in 0..=k {
        let mut row = vec![0.0f64; n_cos];
        for (i, &z) in quad.cos_nodes.iter().enumerate() {
            row[i] = amplitude_from_logs(k, m, z, ln_pref + ln_binom[m]);
        }
        radial.push(row);
    }

    Ok(QuantumSpace { k, dim: k + 1, hbar: 1.0 / k as f64, quad, ln_binom, radial })
}

/// |v_m| at height z, from ln((k+1)/(2π)·C(k,m)) precomputed.
fn amplitude_from_logs(k: usize, m: usize, z: f64, ln_norm2: f64) -> f64 {
    let s2 = ((1.0 - z) / 2.0).max(0.0); // sin²(θ/2)
    let c2 = ((1.0 + z) / 2.0).max(0.0); // cos²(θ/2)
    if (m > 0 && s2 == 0.0) || (m < k && c2 == 0.0) {
        return 0.0;
    }
    let mut ln_a = 0.5 * ln_norm2;
    if m > 0 {
        ln_a += 0.5 * m as f64 * s2.ln();
    }
    if m < k {
        ln_a += 0.5 * (k - m) as f64 * c2.ln();
    }
    ln_a.exp()
}

/// The coherent state e_x in the spin basis, unnormalized: its m-th
/// coefficient is conj(v_m(x)), so ⟨e_x, s⟩ = s(x) for every section s
/// (inner products are linear in the second slot throughout this crate).
#[derive(Clone, Debug)]
pub struct CoherentData {
    /// Coefficients of e_x; ‖kernel_vector‖² = R.
    pub kernel_vector: Vec<c64>,
    /// The measured squared norm; equals (k+1)/(2π) up to roundoff since the
    /// Rawnsley function is constant on the sphere.
    pub rawnsley: f64,
}

impl CoherentData {
    /// Unit-norm coherent state ξ_x.
    pub fn normalized(&self) -> Vec<c64> {
        let inv = 1.0 / self.rawnsley.sqrt();
        self.kernel_vector.iter().map(|z| z * inv).collect()
    }

    /// Rank-one projector P_x = e_x e_x†/R as a matrix.
    pub fn projector(&self) -> crate::linalg::CMat {
        let n = self.kernel_vector.len();
        let inv = 1.0 / self.rawnsley;
        crate::linalg::CMat::from_fn(n, n, |i, j| {
            self.kernel_vector[i] * self.kernel_vector[j].conj() * inv
        })
    }
}

impl QuantumSpace {
    pub fn build(k: usize) -> Result<QuantumSpace> {
        build_space(k, 1.5)
    }

    pub fn ln_binom(&self, m: usize) -> f64 {
        self.ln_binom[m]
    }

    /// Constant Rawnsley function R = (k+1)/(2π).
    pub fn rawnsley(&self) -> f64 {
        (self.k + 1) as f64 / std::f64::consts::TAU
    }

    /// Radial amplitudes |v_m| along the z-quadrature nodes.
    pub fn radial_row(&self, m: usize) -> &[f64] {
        &self.radial[m]
    }

    /// |v_m| at an arbitrary height.
    pub fn basis_amplitude(&self, m: usize, height: f64) -> f64 {
        let ln_pref = ((self.k + 1) as f64 / std::f64::consts::TAU).ln();
        amplitude_from_logs(self.k, m, height, ln_pref + self.ln_binom[m])
    }

    /// v_m(p) including the gauge phase e^{imφ}.
    pub fn basis_value(&self, m: usize, p: &SpherePoint) -> c64 {
        let a = self.basis_amplitude(m, p.z());
        let phase = m as f64 * p.longitude();
        c64::new(a * phase.cos(), a * phase.sin())
    }

    /// Distance to the gauge-singular point (the south pole).
    pub fn gauge_margin(&self, p: &SpherePoint) -> f64 {
        p.geodesic_angle(&SpherePoint::south())
    }

    /// The coherent state e_x, coefficients conj(v_m(x)).
    pub fn coherent(&self, x: &SpherePoint) -> Result<CoherentData> {
        let margin = self.gauge_margin(x);
        if margin < 1e-9 {
            return Err(CoreError::PoleGauge { dist: margin });
        }
        let phi = x.longitude();
        let mut kernel_vector = Vec::with_capacity(self.dim);
        let mut norm2 = 0.0f64;
        for m in 0..self.dim {
            let a = self.basis_amplitude(m, x.z());
            let ph = -(m as f64) * phi;
            let z = c64::new(a * ph.cos(), a * ph.sin());
            norm2 += z.norm_sqr();
            kernel_vector.push(z);
        }
        Ok(CoherentData { kernel_vector, rawnsley: norm2 })
    }

    /// |⟨e_x, e_y⟩| for the unnormalized coherent states: equals
    /// R·cos^k(Θ/2) with Θ the geodesic angle, hence R at x = y.
    pub fn kernel_overlap(&self, x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
        let cx = self.coherent(x)?;
        let cy = self.coherent(y)?;
        Ok(crate::linalg::inner(&cx.kernel_vector, &cy.kernel_vector).norm())
    }

    /// The closed-form modulus cos^k(Θ/2) of the *normalized* overlap.
    pub fn overlap_modulus_law(&self, x: &SpherePoint, y: &SpherePoint) -> f64 {
        let half = 0.5 * x.geodesic_angle(y);
        half.cos().powi(self.k as i32)
    }
}
