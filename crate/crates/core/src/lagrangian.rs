//! States concentrating on latitude circles and the longitude profiles
//! that dislocate them.
//!
//! A latitude circle {cos²(Θ/2) = t₀} is cut out by rational weights
//! (t₀, t₁), t₀ + t₁ = 1; at every level k divisible by the weight
//! denominator k₀ the normalized monomial section with southern exponent
//! k·t₁ concentrates on it.  Such a state is not displaceable — the circle
//! meets every rotate of itself — yet a Hamiltonian of size ℏ built from a
//! longitude profile f₀ with ∮ e^{if₀}dθ = 0 already drives the overlap
//! ⟨exp(iT(f₀·χ))Ψ, Ψ⟩ down to O(ℏ).  This module constructs the profile
//! (bisection on the plateau height), the correction profile that cancels
//! a prescribed next-order coefficient, the states themselves, and the
//! overlap experiment.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::sync::Arc;

use faer::c64;
use rayon::prelude::*;

use crate::dynamics::{propagate, QuantumHamiltonianPath};
use crate::error::{CoreError, Result};
use crate::geom::{fibonacci_grid, SpherePoint};
use crate::linalg::{self, CMat};
use crate::observable::{plateau, Observable};
use crate::quad::gauss_legendre;
use crate::space::{build_space, QuantumSpace};
use crate::toeplitz::toeplitz_observable;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Wrap an angle into [0, 2π).
fn wrap_tau(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wrap an angle into (−π, π].
fn wrap_pm(theta: f64) -> f64 {
    let r = wrap_tau(theta);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Parity of a circle function with respect to θ ↦ −θ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
    None,
}

/// A smooth 2π-periodic real function on the circle together with its
/// declared parity.  Evaluators must accept any real argument; the
/// constructor checks f(0) = f(2π) within 1e-12 and the declared parity
/// on a probe grid within 1e-10.
#[derive(Clone)]
pub struct ProfileFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    parity: Parity,
}

impl fmt::Debug for ProfileFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProfileFunction")
            .field("parity", &self.parity)
            .field("value_at_1", &self.value(1.0))
            .finish()
    }
}

impl ProfileFunction {
    pub fn new(
        parity: Parity,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let f = ProfileFunction { eval: Arc::new(eval), parity };
        f.check()?;
        Ok(f)
    }

    fn check(&self) -> Result<()> {
        let jump = (self.value(0.0) - self.value(TAU)).abs();
        if !(jump <= 1e-12) {
            return Err(CoreError::InvalidArgument(format!(
                "profile is not 2π-periodic: |f(0) − f(2π)| = {jump:.3e}"
            )));
        }
        let worst = (0..64)
            .map(|j| {
                let theta = (j as f64 + 0.37) * TAU / 64.0;
                match self.parity {
                    Parity::Odd => (self.value(-theta) + self.value(theta)).abs(),
                    Parity::Even => (self.value(-theta) - self.value(theta)).abs(),
                    Parity::None => 0.0,
                }
            })
            .fold(0.0f64, f64::max);
        if !(worst <= 1e-10) {
            return Err(CoreError::InvalidArgument(format!(
                "declared parity {:?} violated by {worst:.3e} on the probe grid",
                self.parity
            )));
        }
        Ok(())
    }

    pub fn value(&self, theta: f64) -> f64 {
        (self.eval)(theta)
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// The constant profile (even).
    pub fn constant(c: f64) -> Self {
        ProfileFunction { eval: Arc::new(move |_| c), parity: Parity::Even }
    }

    pub fn zero() -> Self {
        ProfileFunction::constant(0.0)
    }

    /// a·f + b·g; the parity tag survives only when both operands share it.
    pub fn combine(a: f64, f: &Self, b: f64, g: &Self) -> Self {
        let (fe, ge) = (f.eval.clone(), g.eval.clone());
        let parity = if f.parity == g.parity { f.parity } else { Parity::None };
        ProfileFunction {
            eval: Arc::new(move |theta| a * fe(theta) + b * ge(theta)),
            parity,
        }
    }
}

/// ∮ f dθ by the uniform n-point rule; for smooth periodic integrands the
/// error decays faster than any power of 1/n.
pub fn circle_integral(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = TAU / n as f64;
    (0..n).map(|j| f(j as f64 * h)).sum::<f64>() * h
}

/// ∫₀^π f du by composite Gauss–Legendre (16 panels × 12 nodes).
fn integral_0_pi(f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(12);
    let panels = 16usize;
    let w = PI / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (a, b) = (p as f64 * w, (p + 1) as f64 * w);
        for (x, wt) in nodes.iter().zip(&weights) {
            let u = 0.5 * (a + b) + 0.5 * (b - a) * x;
            total += wt * f(u) * 0.5 * (b - a);
        }
    }
    total
}

/// A latitude circle {cos²(Θ/2) = t₀} with rational weights kept exactly:
/// t₀ = ℓ₀/k₀ in lowest terms, so k₀ is the smallest level whose multiples
/// carry a monomial section with exponents (k·t₀, k·t₁).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatitudeCircle {
    ell0: u64,
    k0: u64,
}

impl LatitudeCircle {
    /// Weights t₀ = num/den, t₁ = 1 − t₀; both must be strictly positive.
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || num >= den {
            return Err(CoreError::InvalidArgument(format!(
                "weights ({num}/{den}, 1 − {num}/{den}) must both be positive"
            )));
        }
        let g = gcd(num, den);
        Ok(LatitudeCircle { ell0: num / g, k0: den / g })
    }

    pub fn t(&self) -> (f64, f64) {
        let t0 = self.ell0 as f64 / self.k0 as f64;
        (t0, 1.0 - t0)
    }

    /// Smallest positive level with integral exponents.
    pub fn k0(&self) -> usize {
        self.k0 as usize
    }

    /// (ℓ₀, ℓ₁) = k₀·(t₀, t₁); their sum is k₀ exactly.
    pub fn exponents(&self) -> (usize, usize) {
        (self.ell0 as usize, (self.k0 - self.ell0) as usize)
    }

    /// Height of the circle: cos Θ = 2t₀ − 1.
    pub fn height(&self) -> f64 {
        (2.0 * self.ell0 as f64 - self.k0 as f64) / self.k0 as f64
    }
}

/// The reference hill on [0, π]: π on [π/5, 4π/5], 0 outside (π/10, 9π/10),
/// monotone in between.
fn hill(u: f64) -> f64 {
    PI * plateau(u, 0.0, PI / 5.0, 4.0 * PI / 5.0, PI)
}

/// I_s = ∫₀^π cos(s·hill) du — the bisection objective.  Computed as half
/// the circle integral of the even extension: the uniform rule on the full
/// period converges much faster than panel quadrature against the flat
/// ramp joints.
fn hill_cos_integral(s: f64) -> f64 {
    0.5 * circle_integral(8192, |theta| (s * hill(wrap_pm(theta).abs())).cos())
}

/// A dislocating longitude profile: f₀ odd with ∮ e^{if₀}δ dθ = 0, found by
/// scaling the reference hill until the cosine integral vanishes.
#[derive(Clone, Debug)]
pub struct DislocatorProfile {
    pub f0: ProfileFunction,
    /// The hill scale: f₀ = ±s*·hill on each half-circle, s* ∈ (1/2, 1).
    pub s_star: f64,
}

/// Construct the dislocating profile for a nowhere-vanishing density δ.
///
/// The density is renormalized to total mass 2π and absorbed into a circle
/// reparametrization y with y' ∝ δ, reducing the problem to the uniform
/// case: there, I_{1/2} > 0 > I_1 brackets a scale s* with
/// ∫₀^π cos(s*·hill) = 0, and the odd extension f₀ = s*·sign(u)·hill(|u|)
/// (in the reparametrized coordinate) satisfies ∮ e^{if₀}δ dθ = 0 — the
/// sine part vanishes by parity, the cosine part by the choice of s*.
/// Bisection stops once |I_{s*}| ≤ tol.  A uniform δ short-circuits to the
/// identity reparametrization; otherwise y is interpolated on a fine grid
/// (cubic Hermite with the analytic slope δ).
pub fn dislocator_profile(delta: &ProfileFunction, tol: f64) -> Result<DislocatorProfile> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CoreError::InvalidArgument(format!(
            "bisection tolerance {tol} must be positive"
        )));
    }
    let n = 4096usize;
    let mut min_d = f64::INFINITY;
    let mut max_d = f64::NEG_INFINITY;
    for j in 0..n {
        let d = delta.value(j as f64 * TAU / n as f64);
        min_d = min_d.min(d);
        max_d = max_d.max(d);
    }
    if !(min_d > 0.0) {
        return Err(CoreError::HypothesisViolated(format!(
            "density must be nowhere vanishing; min on the probe grid = {min_d:.3e}"
        )));
    }
    let mass = circle_integral(2 * n, |theta| delta.value(theta));
    let rho = TAU / mass;

    // Reparametrization y(θ) = ∫₀^θ ρδ, as data for the profile closure:
    // None means the identity (uniform density).
    let reparam: Option<(Vec<f64>, Vec<f64>)> = if (max_d - min_d) <= 1e-12 * max_d.abs() {
        None
    } else {
        let (gx, gw) = gauss_legendre(4);
        let h = TAU / n as f64;
        let mut y = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        y.push(0.0);
        for j in 0..n {
            let a = j as f64 * h;
            for (x, wt) in gx.iter().zip(&gw) {
                acc += wt * rho * delta.value(a + 0.5 * h * (1.0 + x)) * 0.5 * h;
            }
            y.push(acc);
        }
        let scale = TAU / *y.last().unwrap();
        for v in &mut y {
            *v *= scale;
        }
        let slopes: Vec<f64> =
            (0..=n).map(|j| scale * rho * delta.value(j as f64 * h)).collect();
        Some((y, slopes))
    };

    let (mut lo, mut hi) = (0.5f64, 1.0f64);
    let (i_lo, i_hi) = (hill_cos_integral(lo), hill_cos_integral(hi));
    if !(i_lo > 0.0 && i_hi < 0.0) {
        return Err(CoreError::HypothesisViolated(format!(
            "bisection bracket failed: I(1/2) = {i_lo:.3e}, I(1) = {i_hi:.3e}"
        )));
    }
    let mut s_star = 0.75;
    let mut bracketed = false;
    for _ in 0..200 {
        s_star = 0.5 * (lo + hi);
        let mid = hill_cos_integral(s_star);
        if mid.abs() <= tol {
            bracketed = true;
            break;
        }
        if mid > 0.0 {
            lo = s_star;
        } else {
            hi = s_star;
        }
    }
    if !bracketed {
        return Err(CoreError::IntegrationQuality(format!(
            "bisection stalled at s = {s_star} without reaching |I| ≤ {tol:.1e}"
        )));
    }

    let s = s_star;
    let eval = move |theta: f64| -> f64 {
        let raw = wrap_tau(theta);
        let u = match &reparam {
            None => raw,
            Some((y, slopes)) => {
                let h = TAU / n as f64;
                let j = ((raw / h) as usize).min(n - 1);
                let t = (raw - j as f64 * h) / h;
                let (y0, y1) = (y[j], y[j + 1]);
                let (d0, d1) = (slopes[j] * h, slopes[j + 1] * h);
                // cubic Hermite on the panel
                let t2 = t * t;
                let t3 = t2 * t;
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * d0
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * d1
            }
        };
        let v = if u > PI { u - TAU } else { u };
        s * v.signum() * hill(v.abs())
    };
    let probe = ProfileFunction { eval: Arc::new(eval), parity: Parity::Odd };
    let f0 = if probe.check().is_ok() {
        probe
    } else {
        ProfileFunction { parity: Parity::None, ..probe }
    };
    Ok(DislocatorProfile { f0, s_star })
}

/// A profile g with ∮ e^{if₀}·g dθ = z against the dislocating profile of
/// scale s*.  The even part pairs with cos f₀ (constant cos(s*π) on its
/// support), the odd part with sin f₀; both live inside the hill plateau,
/// so the pairing reduces to exact one-dimensional masses.
pub fn correction_profile(z: c64, s_star: f64) -> Result<ProfileFunction> {
    if !(s_star > 0.5 && s_star < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "hill scale {s_star} outside (1/2, 1)"
        )));
    }
    let bump = |u: f64| plateau(u, PI / 5.0, 2.0 * PI / 5.0, 3.0 * PI / 5.0, 4.0 * PI / 5.0);
    let mass = integral_0_pi(bump);
    let c_even = z.re / (2.0 * (s_star * PI).cos() * mass);
    let c_odd = z.im / (2.0 * (s_star * PI).sin() * mass);
    let parity = if z.im == 0.0 {
        Parity::Even
    } else if z.re == 0.0 {
        Parity::Odd
    } else {
        Parity::None
    };
    ProfileFunction::new(parity, move |theta| {
        let v = wrap_pm(theta);
        (c_even + c_odd * v.signum()) * bump(v.abs())
    })
}

/// The normalized monomial section concentrating on a latitude circle: at
/// level k = m·k₀ it is the basis vector with m·ℓ₁ southern factors, whose
/// amplitude peaks where cos²(Θ/2) = t₀, i.e. at height 2t₀ − 1.
pub fn lagrangian_state(space: &QuantumSpace, circle: &LatitudeCircle) -> Result<Vec<c64>> {
    let k0 = circle.k0();
    if space.k % k0 != 0 {
        return Err(CoreError::InvalidArgument(format!(
            "level {} is not divisible by the weight denominator {k0}",
            space.k
        )));
    }
    let m = space.k / k0;
    let idx = m * circle.exponents().1;
    let mut v = vec![c64::new(0.0, 0.0); space.dim];
    v[idx] = c64::new(1.0, 0.0);
    Ok(v)
}

/// Latitude window around a circle: 1 on [level − inner, level + inner],
/// 0 outside (level − outer, level + outer), vanishing before the poles.
#[derive(Clone, Copy, Debug)]
pub struct LatitudeCutoff {
    pub level: f64,
    pub inner: f64,
    pub outer: f64,
}

impl LatitudeCutoff {
    pub fn around(circle: &LatitudeCircle, inner: f64, outer: f64) -> Result<Self> {
        let level = circle.height();
        if !(0.0 < inner && inner < outer) {
            return Err(CoreError::InvalidArgument(format!(
                "window radii 0 < {inner} < {outer} required"
            )));
        }
        if level.abs() + outer > 0.98 {
            return Err(CoreError::InvalidArgument(format!(
                "window [{:.3}, {:.3}] reaches a pole",
                level - outer,
                level + outer
            )));
        }
        Ok(LatitudeCutoff { level, inner, outer })
    }

    /// Window radii at fixed fractions (0.55, 0.92) of the pole gap.
    pub fn default_for(circle: &LatitudeCircle) -> Result<Self> {
        let gap = 1.0 - circle.height().abs();
        LatitudeCutoff::around(circle, 0.55 * gap, 0.92 * gap)
    }

    pub fn value(&self, height: f64) -> f64 {
        plateau(
            height,
            self.level - self.outer,
            self.level - self.inner,
            self.level + self.inner,
            self.level + self.outer,
        )
    }
}

/// F(x) = χ(height)·f(longitude): the smooth sphere extension of a circle
/// profile.  The cutoff vanishes near both poles, where the longitude is
/// singular, so the product is smooth.
pub fn longitude_hamiltonian(f: &ProfileFunction, chi: &LatitudeCutoff) -> Observable {
    let f = f.clone();
    let chi = *chi;
    Observable::autonomous(move |p| chi.value(p.z()) * f.value(p.longitude()))
}

/// ⟨exp(iT(F))ψ, ψ⟩/‖ψ‖² through the time-one Schrödinger flow of −ℏT(F).
fn unitary_overlap(space: &QuantumSpace, psi: &[c64], t_mat: &CMat) -> Result<c64> {
    let norm2 = linalg::inner(psi, psi).re;
    if !(norm2 > 0.0) {
        return Err(CoreError::InvalidArgument("state has zero norm".into()));
    }
    let h_mat = CMat::from_fn(t_mat.nrows(), t_mat.ncols(), |i, j| {
        t_mat[(i, j)] * (-space.hbar)
    });
    let path = QuantumHamiltonianPath::autonomous(h_mat, space.hbar)?;
    let prop = propagate(&path, 0.0, 1.0, 1)?;
    let moved = prop.apply(psi);
    Ok(linalg::inner(psi, &moved) / norm2)
}

/// Overlap ⟨exp(iT(F))Ψ, Ψ⟩ for F = χ·f₀.  With a dislocating f₀ and Ψ
/// concentrating inside the window, the leading term ∮ e^{if₀}dθ/2π drops
/// out and the overlap is O(ℏ).
pub fn lagrangian_overlap(
    space: &QuantumSpace,
    psi: &[c64],
    f0: &ProfileFunction,
    chi: &LatitudeCutoff,
) -> Result<c64> {
    if psi.len() != space.dim {
        return Err(CoreError::InvalidArgument(format!(
            "state dimension {} ≠ space dimension {}",
            psi.len(),
            space.dim
        )));
    }
    let obs = longitude_hamiltonian(f0, chi);
    let t_mat = toeplitz_observable(space, &obs, 0.0);
    unitary_overlap(space, psi, &t_mat)
}

/// One row of an overlap sweep across levels k = m·k₀.
#[derive(Clone, Copy, Debug)]
pub struct LagrangianRow {
    pub m: usize,
    pub k: usize,
    pub hbar: f64,
    pub overlap: c64,
    /// Energy of the driving path: ℏ·‖T(F)‖_op over unit time.
    pub ell_q: f64,
    /// sup |F| on a sampling grid, for the energy comparison.
    pub sup_f: f64,
}

/// Sweep the overlap experiment over m ∈ ms, with the profile allowed to
/// depend on ℏ (the corrected runs use f₀ + ℏ·f₁).
pub fn overlap_sweep(
    circle: &LatitudeCircle,
    ms: &[usize],
    oversample: f64,
    chi: &LatitudeCutoff,
    profile_for: impl Fn(f64) -> ProfileFunction + Sync,
) -> Result<Vec<LagrangianRow>> {
    if ms.is_empty() {
        return Err(CoreError::InvalidArgument("empty sweep".into()));
    }
    let grid = fibonacci_grid(4000);
    let mut rows = ms
        .par_iter()
        .map(|&m| {
            let k = m * circle.k0();
            let space = build_space(k, oversample)?;
            let psi = lagrangian_state(&space, circle)?;
            let prof = profile_for(space.hbar);
            let obs = longitude_hamiltonian(&prof, chi);
            let t_mat = toeplitz_observable(&space, &obs, 0.0);
            let overlap = unitary_overlap(&space, &psi, &t_mat)?;
            let ell_q = space.hbar * linalg::op_norm(&t_mat)?;
            let sup_f = grid
                .iter()
                .map(|p| obs.value(p, 0.0).abs())
                .fold(0.0f64, f64::max);
            Ok(LagrangianRow { m, k, hbar: space.hbar, overlap, ell_q, sup_f })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.k);
    Ok(rows)
}

/// Extrapolate the ℏ-coefficient z = lim overlap/ℏ from (ℏ, overlap)
/// samples by Neville's scheme at ℏ = 0 (Richardson in ℏ).
pub fn hbar_coefficient(points: &[(f64, c64)]) -> Result<c64> {
    if points.len() < 2 {
        return Err(CoreError::InvalidArgument(format!(
            "Richardson extrapolation needs ≥ 2 points, got {}",
            points.len()
        )));
    }
    for (h, _) in points {
        if !(*h > 0.0) {
            return Err(CoreError::InvalidArgument(format!("ℏ = {h} must be positive")));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            if xs[i] == xs[j] {
                return Err(CoreError::InvalidArgument(format!(
                    "duplicate ℏ = {} in extrapolation data",
                    xs[i]
                )));
            }
        }
    }
    let mut p: Vec<c64> = points.iter().map(|(h, v)| v / *h).collect();
    let n = p.len();
    for width in 1..n {
        for i in 0..n - width {
            let (xi, xj) = (xs[i], xs[i + width]);
            p[i] = (p[i] * xj - p[i + 1] * xi) / (xj - xi);
        }
    }
    Ok(p[0])
}

/// Leading coefficients of an overlap family whose expansion proceeds in
/// half powers: overlap ≈ leading·ℏ + half·ℏ^{3/2} + linear·ℏ².
#[derive(Clone, Copy, Debug)]
pub struct OverlapExpansion {
    pub leading: c64,
    pub half: c64,
    pub linear: c64,
}

/// Fit overlap/ℏ = leading + half·√ℏ + linear·ℏ by least squares (exact
/// interpolation at three points).  The measured sweeps carry a genuine
/// half-power rung, which a polynomial-only extrapolation would smear into
/// the leading coefficient.
pub fn expansion_coefficients(points: &[(f64, c64)]) -> Result<OverlapExpansion> {
    if points.len() < 3 {
        return Err(CoreError::InvalidArgument(format!(
            "half-power fit needs ≥ 3 points, got {}",
            points.len()
        )));
    }
    for (h, _) in points {
        if !(*h > 0.0) {
            return Err(CoreError::InvalidArgument(format!("ℏ = {h} must be positive")));
        }
    }
    // normal equations in the basis {1, √ℏ, ℏ} against v = overlap/ℏ
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [c64::new(0.0, 0.0); 3];
    for (h, ov) in points {
        let x = h.sqrt();
        let basis = [1.0, x, x * x];
        let v = ov / *h;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += v * basis[i];
        }
    }
    let det3 = |a: &[[f64; 3]; 3]| -> f64 {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det3(&m);
    if d.abs() < 1e-14 {
        return Err(CoreError::Linalg(
            "half-power fit is singular (duplicate ℏ values?)".into(),
        ));
    }
    let mut out = [c64::new(0.0, 0.0); 3];
    for part in 0..2 {
        let comp = |z: c64| if part == 0 { z.re } else { z.im };
        let mut sol = [0.0f64; 3];
        for col in 0..3 {
            let mut mc = m;
            for row in 0..3 {
                mc[row][col] = comp(rhs[row]);
            }
            sol[col] = det3(&mc) / d;
        }
        for (o, s) in out.iter_mut().zip(sol) {
            if part == 0 {
                o.re = s;
            } else {
                o.im = s;
            }
        }
    }
    Ok(OverlapExpansion { leading: out[0], half: out[1], linear: out[2] })
}

/// Relative spread of the Husimi density along a latitude: max/min − 1 over
/// `samples` longitudes.  Rotation-invariant states give numerical zero,
/// which is what licenses a uniform density in the profile construction.
pub fn longitude_uniformity(
    space: &QuantumSpace,
    psi: &[c64],
    height: f64,
    samples: usize,
) -> Result<f64> {
    if samples < 2 {
        return Err(CoreError::InvalidArgument("need ≥ 2 longitude samples".into()));
    }
    let norm2 = linalg::inner(psi, psi).re;
    if !(norm2 > 0.0) {
        return Err(CoreError::InvalidArgument("state has zero norm".into()));
    }
    let theta = CMat::from_fn(psi.len(), psi.len(), |i, j| {
        psi[i] * psi[j].conj() / norm2
    });
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for j in 0..samples {
        let p = SpherePoint::from_height_longitude(height, j as f64 * TAU / samples as f64)?;
        let v = crate::toeplitz::husimi_density(space, &theta, &p)?;
        min_v = min_v.min(v);
        max_v = max_v.max(v);
    }
    if !(min_v > 0.0) {
        return Err(CoreError::UndefinedOverlap(format!(
            "Husimi density vanishes on the latitude (min = {min_v:.3e})"
        )));
    }
    Ok(max_v / min_v - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::log_log_fit;
    use crate::state::{microsupport_probe, DensityOperator};

    /// ∮ e^{if}·g dθ by composite Simpson (independent of the uniform rule
    /// used in the construction).
    fn simpson_pairing(f: &ProfileFunction, g: impl Fn(f64) -> f64) -> c64 {
        let n = 8192usize; // even
        let h = TAU / n as f64;
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..=n {
            let theta = -PI + j as f64 * h;
            let w = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let val = f.value(theta);
            acc += c64::new(val.cos(), val.sin()) * (w * g(theta));
        }
        acc * (h / 3.0)
    }

    #[test]
    fn weights_reduce_and_split_the_level() {
        let c = LatitudeCircle::new(2, 4).unwrap();
        assert_eq!(c.k0(), 2);
        assert_eq!(c.exponents(), (1, 1));
        assert_eq!(c.t(), (0.5, 0.5));
        assert_eq!(c.height(), 0.0);

        let c = LatitudeCircle::new(3, 9).unwrap();
        assert_eq!(c.k0(), 3);
        assert_eq!(c.exponents(), (1, 2));
        assert!((c.height() - (-1.0 / 3.0)).abs() < 1e-15);

        assert!(LatitudeCircle::new(0, 5).is_err());
        assert!(LatitudeCircle::new(5, 5).is_err());
        assert!(LatitudeCircle::new(7, 5).is_err());
    }

    #[test]
    fn profile_constructor_enforces_periodicity_and_parity() {
        assert!(ProfileFunction::new(Parity::None, |theta| theta).is_err());
        assert!(ProfileFunction::new(Parity::Odd, |theta| theta.sin()).is_ok());
        assert!(ProfileFunction::new(Parity::Even, |theta| theta.sin()).is_err());
        assert!(ProfileFunction::new(Parity::Even, |theta| theta.cos()).is_ok());
        let combo = ProfileFunction::combine(
            2.0,
            &ProfileFunction::new(Parity::Odd, |theta: f64| theta.sin()).unwrap(),
            -1.0,
            &ProfileFunction::new(Parity::Odd, |theta: f64| (3.0 * theta).sin()).unwrap(),
        );
        assert_eq!(combo.parity(), Parity::Odd);
        assert!((combo.value(0.3) - (2.0 * 0.3f64.sin() - 0.9f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn hill_scale_bracket_has_the_stated_signs() {
        assert!(hill_cos_integral(0.5) > 0.0);
        assert!(hill_cos_integral(1.0) < 0.0);
    }

    #[test]
    fn dislocator_kills_the_circle_average() {
        let d = dislocator_profile(&ProfileFunction::constant(1.0), 1e-10).unwrap();
        assert!(d.s_star > 0.5 && d.s_star < 1.0);
        assert_eq!(d.f0.parity(), Parity::Odd);
        // odd ⇒ the sine part cancels to round-off
        let pairing = simpson_pairing(&d.f0, |_| 1.0);
        assert!(pairing.im.abs() < 1e-12, "sine part {:.3e}", pairing.im);
        assert!(pairing.norm() < 1e-8, "|∮e^{{if₀}}| = {:.3e}", pairing.norm());
    }

    #[test]
    fn dislocator_handles_a_non_uniform_density() {
        let delta =
            ProfileFunction::new(Parity::Even, |theta: f64| 1.0 + 0.4 * theta.cos()).unwrap();
        let d = dislocator_profile(&delta, 1e-10).unwrap();
        let pairing = simpson_pairing(&d.f0, |theta| (1.0 + 0.4 * theta.cos()) * (TAU / mass_of(&delta)));
        assert!(pairing.norm() < 1e-6, "|∮e^{{if₀}}δ̂| = {:.3e}", pairing.norm());

        let vanishing =
            ProfileFunction::new(Parity::Even, |theta: f64| 1.0 + theta.cos()).unwrap();
        assert!(matches!(
            dislocator_profile(&vanishing, 1e-10),
            Err(CoreError::HypothesisViolated(_))
        ));
    }

    fn mass_of(delta: &ProfileFunction) -> f64 {
        circle_integral(8192, |theta| delta.value(theta))
    }

    #[test]
    fn correction_pairs_to_the_requested_coefficient() {
        let d = dislocator_profile(&ProfileFunction::constant(1.0), 1e-12).unwrap();

        let g0 = correction_profile(c64::new(0.0, 0.0), d.s_star).unwrap();
        for j in 0..32 {
            assert_eq!(g0.value(j as f64 * TAU / 32.0), 0.0);
        }

        for z in [c64::new(1.0, 0.0), c64::new(0.0, 1.0), c64::new(-0.7, 0.4)] {
            let g = correction_profile(z, d.s_star).unwrap();
            let got = simpson_pairing(&d.f0, |theta| g.value(theta));
            assert!(
                (got - z).norm() < 1e-8,
                "pairing {got:?} missed the target {z:?}"
            );
        }

        // linearity: the map z ↦ g is real-linear pointwise
        let (z1, z2) = (c64::new(0.3, -0.2), c64::new(-1.1, 0.5));
        let (g1, g2) = (
            correction_profile(z1, d.s_star).unwrap(),
            correction_profile(z2, d.s_star).unwrap(),
        );
        let g12 = correction_profile(z1 + z2, d.s_star).unwrap();
        for j in 0..64 {
            let theta = j as f64 * TAU / 64.0;
            assert!(
                (g12.value(theta) - g1.value(theta) - g2.value(theta)).abs() < 1e-12
            );
        }

        assert!(correction_profile(c64::new(1.0, 0.0), 0.5).is_err());
        assert!(correction_profile(c64::new(1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn monomial_state_sits_on_its_latitude() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let space = QuantumSpace::build(2).unwrap();
        let psi = lagrangian_state(&space, &circle).unwrap();
        assert_eq!(psi.len(), 3);
        assert_eq!(psi[1], c64::new(1.0, 0.0));
        assert!((linalg::inner(&psi, &psi).re - 1.0).abs() < 1e-15);

        // Husimi peak at the equator, falling off toward both poles
        let theta = linalg::outer(&psi);
        let at = |z: f64| {
            crate::toeplitz::husimi_density(
                &space,
                &theta,
                &SpherePoint::from_height_longitude(z, 0.3).unwrap(),
            )
            .unwrap()
        };
        assert!(at(0.0) > at(0.7) && at(0.0) > at(-0.7));

        // asymmetric circle: mean height tracks 2t₀ − 1 semiclassically
        let circle = LatitudeCircle::new(1, 4).unwrap();
        let space = QuantumSpace::build(64).unwrap();
        let psi = lagrangian_state(&space, &circle).unwrap();
        let t_h = crate::toeplitz::toeplitz_fn(&space, |p| p.z());
        let moved = linalg::mat_vec(&t_h, &psi);
        let mean = linalg::inner(&psi, &moved).re;
        assert!(
            (mean - circle.height()).abs() < 2.0 / 64.0,
            "mean height {mean} vs {}",
            circle.height()
        );

        assert!(lagrangian_state(&QuantumSpace::build(3).unwrap(), &circle).is_err());
    }

    #[test]
    fn husimi_is_longitude_uniform_on_the_circle() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let space = QuantumSpace::build(32).unwrap();
        let psi = lagrangian_state(&space, &circle).unwrap();
        let spread = longitude_uniformity(&space, &psi, circle.height(), 48).unwrap();
        assert!(spread < 1e-8, "longitude spread {spread:.3e}");
    }

    #[test]
    fn microsupport_concentrates_on_the_circle() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let mut spaces = Vec::new();
        for m in [4usize, 8, 16, 32, 48] {
            spaces.push(QuantumSpace::build(2 * m).unwrap());
        }
        let states: Vec<DensityOperator> = spaces
            .iter()
            .map(|s| DensityOperator::pure(&lagrangian_state(s, &circle).unwrap()).unwrap())
            .collect();
        let family: Vec<_> = spaces.iter().zip(&states).collect();
        // polar cap whose support stays clear of the equator, close enough
        // that the masses remain above the fit floor across the sweep
        let region = Observable::cap_plateau(SpherePoint::north(), 0.9, 1.2, 1.0);
        let probe = microsupport_probe(
            &family.iter().map(|(s, d)| (*s, *d)).collect::<Vec<_>>(),
            &region,
            4.0,
        )
        .unwrap();
        assert!(
            probe.rapid,
            "mass decay order {:.2} (r² = {:.3})",
            probe.decay_order, probe.r_squared
        );
    }

    #[test]
    fn cutoff_windows_respect_the_poles() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        assert_eq!(chi.value(0.0), 1.0);
        assert_eq!(chi.value(0.95), 0.0);
        assert!(LatitudeCutoff::around(&circle, 0.5, 0.99).is_err());
        assert!(LatitudeCutoff::around(&circle, 0.5, 0.3).is_err());

        // off-center circle gets a window clear of the south pole
        let low = LatitudeCircle::new(1, 4).unwrap();
        let chi = LatitudeCutoff::default_for(&low).unwrap();
        assert_eq!(chi.value(low.height()), 1.0);
        assert_eq!(chi.value(-1.0), 0.0);
        assert_eq!(chi.value(1.0), 0.0);
    }

    #[test]
    fn propagator_matches_the_spectral_exponential() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let space = QuantumSpace::build(24).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        let d = dislocator_profile(&ProfileFunction::constant(1.0), 1e-10).unwrap();
        let obs = longitude_hamiltonian(&d.f0, &chi);
        let t_mat = toeplitz_observable(&space, &obs, 0.0);

        let h_mat = CMat::from_fn(t_mat.nrows(), t_mat.ncols(), |i, j| {
            t_mat[(i, j)] * (-space.hbar)
        });
        let path = QuantumHamiltonianPath::autonomous(h_mat, space.hbar).unwrap();
        let prop = propagate(&path, 0.0, 1.0, 1).unwrap();
        let direct = linalg::herm_fn_c(&t_mat, |x| c64::from_polar(1.0, x)).unwrap();
        let diff = linalg::op_norm(&(&prop.unitary - &direct)).unwrap();
        assert!(diff < 1e-10, "exp(iT(F)) mismatch {diff:.3e}");
    }

    #[test]
    fn zero_profile_leaves_the_overlap_at_one() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let space = QuantumSpace::build(16).unwrap();
        let psi = lagrangian_state(&space, &circle).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        let ov = lagrangian_overlap(&space, &psi, &ProfileFunction::zero(), &chi).unwrap();
        assert!((ov - c64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn constant_profile_turns_into_a_phase() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        let c = 0.7f64;
        let prof = ProfileFunction::constant(c);
        let mut defects = Vec::new();
        for k in [32usize, 64, 128] {
            let space = QuantumSpace::build(k).unwrap();
            let psi = lagrangian_state(&space, &circle).unwrap();
            let ov = lagrangian_overlap(&space, &psi, &prof, &chi).unwrap();
            defects.push((ov - c64::from_polar(1.0, c)).norm());
        }
        assert!(defects[2] < 1e-6, "phase defect {:.3e} at k = 128", defects[2]);
        assert!(defects[0] > defects[1] && defects[1] > defects[2]);
    }

    #[test]
    fn dislocating_profile_sends_the_overlap_to_order_hbar() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        let d = dislocator_profile(&ProfileFunction::constant(1.0), 1e-10).unwrap();
        let rows =
            overlap_sweep(&circle, &[8, 16, 32, 64], 1.5, &chi, |_| d.f0.clone()).unwrap();
        let hs: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
        let mods: Vec<f64> = rows.iter().map(|r| r.overlap.norm()).collect();
        let fit = log_log_fit(&hs, &mods, 1e-14).unwrap();
        assert!(
            fit.exponent > 0.75 && fit.exponent < 1.4,
            "overlap slope {:.3} (r² = {:.3}, moduli {mods:?})",
            fit.exponent,
            fit.r_squared
        );

        // driving energy is the speed-limit order ℏ·max|F|
        for r in &rows {
            assert!(
                r.ell_q >= 0.5 * r.hbar * r.sup_f && r.ell_q <= 2.0 * r.hbar * r.sup_f,
                "ℓ_q = {} vs ℏ·sup|F| = {} at k = {}",
                r.ell_q,
                r.hbar * r.sup_f,
                r.k
            );
        }
    }

    #[test]
    fn correction_cancels_the_measured_coefficients() {
        let circle = LatitudeCircle::new(1, 2).unwrap();
        let chi = LatitudeCutoff::default_for(&circle).unwrap();
        let d = dislocator_profile(&ProfileFunction::constant(1.0), 1e-10).unwrap();
        let ms = [8usize, 16, 32, 48, 64, 96];
        let base = overlap_sweep(&circle, &ms, 1.5, &chi, |_| d.f0.clone()).unwrap();

        let tail: Vec<(f64, c64)> =
            base.iter().rev().take(4).map(|r| (r.hbar, r.overlap)).collect();
        let exp = expansion_coefficients(&tail).unwrap();
        assert!(exp.leading.norm() > 1e-3, "nothing to cancel ({exp:?})");
        assert!(
            exp.leading.im.abs() < 1e-6 * exp.leading.norm(),
            "ℏ-coefficient unexpectedly complex: {:?}",
            exp.leading
        );

        // cancel both measured sub-leading rungs: the pairing of a profile g
        // enters the overlap as i·∮g·e^{if₀}dθ/2π, so the targets carry 2πi
        let two_pi_i = c64::new(0.0, TAU);
        let f1 = correction_profile(exp.leading * two_pi_i, d.s_star).unwrap();
        let f_half = correction_profile(exp.half * two_pi_i, d.s_star).unwrap();
        let corrected = overlap_sweep(&circle, &ms, 1.5, &chi, |h| {
            let with_linear = ProfileFunction::combine(1.0, &d.f0, h, &f1);
            ProfileFunction::combine(1.0, &with_linear, h * h.sqrt(), &f_half)
        })
        .unwrap();

        // cancellation collapses the magnitudes outright at the far end
        let last = ms.len() - 1;
        assert!(
            corrected[last].overlap.norm() < 0.05 * base[last].overlap.norm(),
            "weak cancellation: {:.3e} vs {:.3e}",
            corrected[last].overlap.norm(),
            base[last].overlap.norm()
        );

        // the corrected decay order, measured where the ladder is
        // perturbative (at the head the added terms are not small against
        // f₀, so the first points are dropped until the fit is a power law)
        let fit_of = |rows: &[LagrangianRow]| {
            let hs: Vec<f64> = rows.iter().map(|r| r.hbar).collect();
            let mods: Vec<f64> = rows.iter().map(|r| r.overlap.norm()).collect();
            log_log_fit(&hs, &mods, 1e-14).unwrap()
        };
        let s0 = fit_of(&base);
        assert!(s0.r_squared > 0.98, "base sweep is not a power law: {:?}", s0.r_squared);
        let mut start = 0;
        let corrected_fit = loop {
            let f = fit_of(&corrected[start..]);
            if f.r_squared >= 0.98 || start >= ms.len() / 2 {
                break f;
            }
            start += 1;
        };
        assert!(
            corrected_fit.exponent >= s0.exponent + 0.7,
            "correction raised the slope only from {:.3} to {:.3} (tail from m = {})",
            s0.exponent,
            corrected_fit.exponent,
            ms[start]
        );
    }

    #[test]
    fn richardson_recovers_a_polynomial_coefficient() {
        let z = c64::new(0.4, -1.1);
        let pts: Vec<(f64, c64)> = [0.05, 0.025, 0.0125]
            .iter()
            .map(|&h| {
                let v = z * h + c64::new(0.3, 0.2) * (h * h) + c64::new(-0.1, 0.05) * (h * h * h);
                (h, v)
            })
            .collect();
        let got = hbar_coefficient(&pts).unwrap();
        assert!((got - z).norm() < 1e-10, "extrapolated {got:?}");
        assert!(hbar_coefficient(&pts[..1]).is_err());
        assert!(hbar_coefficient(&[(0.1, z), (0.1, z)]).is_err());
    }

    #[test]
    fn half_power_fit_recovers_planted_coefficients() {
        let z = c64::new(1.6, -0.2);
        let c = c64::new(-2.5, 0.4);
        let d = c64::new(-4.1, 1.3);
        let pts: Vec<(f64, c64)> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]
            .iter()
            .map(|&h| (h, z * h + c * h.powf(1.5) + d * h * h))
            .collect();
        let got = expansion_coefficients(&pts).unwrap();
        assert!((got.leading - z).norm() < 1e-9, "leading {:?}", got.leading);
        assert!((got.half - c).norm() < 1e-9, "half {:?}", got.half);
        assert!((got.linear - d).norm() < 1e-9, "linear {:?}", got.linear);
        assert!(expansion_coefficients(&pts[..2]).is_err());
        let dup = [(0.1, z), (0.1, z), (0.1, z)];
        assert!(expansion_coefficients(&dup).is_err());
        let neg = [(0.1, z), (-0.1, z), (0.2, z)];
        assert!(expansion_coefficients(&neg).is_err());
    }
}
