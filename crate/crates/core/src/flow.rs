//! Hamiltonian flows on the sphere.
//!
//! With the area convention ∫dμ = 2π the Hamiltonian vector field of f is
//! X_f = 2·x×∇f and the bracket is {f, g} = 2·x·(∇g×∇f); in particular the
//! flow of c·x₃ is the rotation about e₃ with angular velocity −2c. The
//! overall sign is not a free choice: it is pinned by the quantization,
//! which satisfies [T(x₁), T(x₂)] = −(2i/(k+2))·T(x₃) exactly in the
//! monomial basis, so the correspondence −(i/ℏ)[T(f), T(g)] → T({f, g})
//! forces {x₁, x₂} = −2x₃ (asserted by a canary test alongside T).

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::geom::{cross, dot, Cap, EquatorialChart, SpherePoint};
use crate::observable::Observable;

/// Step for the 4th-order tangent finite-difference gradient.
const GRAD_STEP: f64 = 1e-4;

/// Gradient of f(·, t) at p, tangent to the sphere. Uses the analytic
/// gradient when the observable carries one (projected to the tangent
/// plane), otherwise a 4th-order central difference in the exponential
/// chart.
pub fn tangent_gradient(f: &Observable, p: &SpherePoint, t: f64) -> [f64; 3] {
    if let Some(g) = f.analytic_gradient(p, t) {
        let x = p.coords();
        let n = dot(g, x);
        return [g[0] - n * x[0], g[1] - n * x[1], g[2] - n * x[2]];
    }
    let (t1, t2) = p.tangent_frame();
    let h = GRAD_STEP;
    let mut grad = [0.0; 3];
    for (dir, out) in [(t1, 0usize), (t2, 1usize)] {
        let eval = |s: f64| {
            let q = p.exp_map([dir[0] * s, dir[1] * s, dir[2] * s]);
            f.value(&q, t)
        };
        let d = (-eval(2.0 * h) + 8.0 * eval(h) - 8.0 * eval(-h) + eval(-2.0 * h)) / (12.0 * h);
        if out == 0 {
            grad = [d * t1[0], d * t1[1], d * t1[2]];
        } else {
            grad = [grad[0] + d * t2[0], grad[1] + d * t2[1], grad[2] + d * t2[2]];
        }
    }
    grad
}

/// X_f(p, t) = 2·p×∇f.
pub fn hamiltonian_field(f: &Observable, p: &SpherePoint, t: f64) -> [f64; 3] {
    let g = tangent_gradient(f, p, t);
    let c = cross(p.coords(), g);
    [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]]
}

/// {f, g}(p, t) = 2·p·(∇g×∇f). Normal gradient components cancel exactly.
pub fn poisson_bracket(f: &Observable, g: &Observable, p: &SpherePoint, t: f64) -> f64 {
    let gf = tangent_gradient(f, p, t);
    let gg = tangent_gradient(g, p, t);
    2.0 * dot(p.coords(), cross(gg, gf))
}

fn rk4_step(
    field: &dyn Fn([f64; 3], f64) -> [f64; 3],
    x: [f64; 3],
    t: f64,
    dt: f64,
) -> [f64; 3] {
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    let k1 = field(x, t);
    let k2 = field(add(x, k1, dt / 2.0), t + dt / 2.0);
    let k3 = field(add(x, k2, dt / 2.0), t + dt / 2.0);
    let k4 = field(add(x, k3, dt), t + dt);
    [
        x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        x[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

fn integrate_one(f: &Observable, p: &SpherePoint, t0: f64, t1: f64, steps: usize) -> (SpherePoint, f64) {
    let field = |x: [f64; 3], t: f64| {
        let q = SpherePoint::project(x).expect("flow stayed near the sphere");
        hamiltonian_field(f, &q, t)
    };
    let dt = (t1 - t0) / steps as f64;
    let mut x = p.coords();
    let mut drift = 0.0f64;
    for i in 0..steps {
        x = rk4_step(&field, x, t0 + i as f64 * dt, dt);
        let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        drift = drift.max((n - 1.0).abs());
        x = [x[0] / n, x[1] / n, x[2] / n];
    }
    (SpherePoint::project(x).expect("flow stayed near the sphere"), drift)
}

/// Outcome of a batch flow integration.
pub struct FlowResult {
    pub endpoints: Vec<SpherePoint>,
    pub steps: usize,
    /// Largest |‖x‖−1| observed before per-step renormalisation; a cheap
    /// integration-quality indicator (RK4 leaves the sphere at O(dt⁵)).
    pub max_sphere_drift: f64,
}

/// Integrate the flow of f from t0 to t1 for each point (RK4, per-step
/// renormalisation). Points are processed independently, so the result is
/// deterministic regardless of thread count.
pub fn evolve_points(
    f: &Observable,
    points: &[SpherePoint],
    t0: f64,
    t1: f64,
    steps: usize,
) -> FlowResult {
    assert!(steps > 0);
    let results: Vec<(SpherePoint, f64)> = points
        .par_iter()
        .map(|p| integrate_one(f, p, t0, t1, steps))
        .collect();
    let max_sphere_drift = results.iter().fold(0.0f64, |m, r| m.max(r.1));
    FlowResult { endpoints: results.into_iter().map(|r| r.0).collect(), steps, max_sphere_drift }
}

/// Endpoint φ_{t0→t1}(p), taking the closed-form rotation when the
/// observable carries one.
pub fn flow_endpoint(f: &Observable, p: &SpherePoint, t0: f64, t1: f64, steps: usize) -> SpherePoint {
    if let Some(flow) = &f.flow {
        let angle = flow.angle_at(t1) - flow.angle_at(t0);
        return p.rotate(flow.axis(), angle);
    }
    integrate_one(f, p, t0, t1, steps).0
}

/// φ_t⁻¹(p): solve the flow ODE from time t back to time 0 starting at p.
/// Works for time-dependent generators.
pub fn inverse_flow_point(f: &Observable, p: &SpherePoint, t: f64, steps: usize) -> SpherePoint {
    if let Some(flow) = &f.flow {
        return p.rotate(flow.axis(), -flow.angle_at(t));
    }
    integrate_one(f, p, t, 0.0, steps).0
}

/// For an *autonomous* generator, φ_t⁻¹ = φ_{−t}, so the inverse images of a
/// single point at several times all lie on one backward trajectory. Returns
/// φ_{times[i]}⁻¹(p) for an increasing, non-negative `times` grid using one
/// integration pass.
pub fn inverse_flow_samples_autonomous(
    f: &Observable,
    p: &SpherePoint,
    times: &[f64],
    steps_per_unit_time: usize,
) -> Vec<SpherePoint> {
    if let Some(flow) = &f.flow {
        return times
            .iter()
            .map(|&t| p.rotate(flow.axis(), -flow.angle_at(t)))
            .collect();
    }
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let field = |x: [f64; 3], _s: f64| {
        let q = SpherePoint::project(x).expect("flow stayed near the sphere");
        let v = hamiltonian_field(f, &q, 0.0);
        [-v[0], -v[1], -v[2]]
    };
    let mut out = Vec::with_capacity(times.len());
    let mut x = p.coords();
    let mut s = 0.0f64;
    for &t in times {
        if t > s {
            let steps = ((t - s) * steps_per_unit_time as f64).ceil().max(1.0) as usize;
            let dt = (t - s) / steps as f64;
            for _ in 0..steps {
                x = rk4_step(&field, x, s, dt);
                let n = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                x = [x[0] / n, x[1] / n, x[2] / n];
            }
            s = t;
        }
        out.push(SpherePoint::project(x).expect("flow stayed near the sphere"));
    }
    out
}

/// Inverse images φ_{times[i]}⁻¹(p) for an increasing non-negative time grid,
/// dispatching to the cheapest exact method available: closed-form rotations,
/// a single shared backward trajectory when the generator is autonomous, or
/// one backward integration per time otherwise.
pub fn inverse_images(
    f: &Observable,
    p: &SpherePoint,
    times: &[f64],
    steps_per_unit_time: usize,
) -> Vec<SpherePoint> {
    if f.flow.is_some() || f.autonomous {
        return inverse_flow_samples_autonomous(f, p, times, steps_per_unit_time);
    }
    times
        .iter()
        .map(|&t| {
            let steps = ((t * steps_per_unit_time as f64).ceil() as usize).max(1);
            inverse_flow_point(f, p, t, steps)
        })
        .collect()
}

/// Classical path length ℓ_cl = ∫ sup|f_t| dt over [t0, t1], with the sup
/// estimated on the supplied sphere grid and the time integral by composite
/// Simpson (`time_intervals` must be even).
pub fn classical_path_length(
    f: &Observable,
    t0: f64,
    t1: f64,
    time_intervals: usize,
    grid: &[SpherePoint],
) -> f64 {
    assert!(time_intervals >= 2 && time_intervals % 2 == 0);
    assert!(!grid.is_empty());
    let sup = |t: f64| grid.iter().map(|p| f.value(p, t).abs()).fold(0.0f64, f64::max);
    let dt = (t1 - t0) / time_intervals as f64;
    let mut acc = sup(t0) + sup(t1);
    for i in 1..time_intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * sup(t0 + i as f64 * dt);
    }
    acc * dt / 3.0
}

/// Geodesic-circle samples of a cap: `rings` concentric circles plus the
/// center, densest at the boundary (where displacement clearance is
/// attained for non-folding maps).
pub fn cap_samples(cap: &Cap, boundary_points: usize, rings: usize) -> Vec<SpherePoint> {
    let (t1, t2) = cap.center.tangent_frame();
    let mut pts = vec![cap.center];
    for r in 1..=rings {
        let rho = cap.radius * r as f64 / rings as f64;
        let n = (boundary_points as f64 * r as f64 / rings as f64).ceil() as usize;
        for j in 0..n {
            let psi = std::f64::consts::TAU * j as f64 / n as f64;
            let (c, s) = (psi.cos(), psi.sin());
            let v = [
                rho * (c * t1[0] + s * t2[0]),
                rho * (c * t1[1] + s * t2[1]),
                rho * (c * t1[2] + s * t2[2]),
            ];
            pts.push(cap.center.exp_map(v));
        }
    }
    pts
}

/// Sampled displacement clearance of a cap under the time-[0, t1] flow of f:
/// min over flowed cap samples of (distance to cap center − cap radius).
/// Positive ⟹ the flowed support is disjoint from the original, with at
/// least that geodesic gap.
pub fn displacement_clearance(f: &Observable, support: &Cap, t1: f64, steps: usize) -> f64 {
    let pts = cap_samples(support, 96, 6);
    let flowed = evolve_points(f, &pts, 0.0, t1, steps);
    flowed
        .endpoints
        .iter()
        .map(|q| support.center.geodesic_angle(q) - support.radius)
        .fold(f64::INFINITY, f64::min)
}

/// Classical phase-space data that the quantization map accepts.
#[derive(Clone)]
pub enum ClassicalState {
    /// A density u ≥ 0 against dμ (normalised at quantization time), with an
    /// optional support hint used for displacement bookkeeping.
    Density {
        u: Arc<dyn Fn(&SpherePoint) -> f64 + Send + Sync>,
        support: Option<Cap>,
    },
    /// A weighted atomic measure Σ wᵢ δ_{xᵢ}, wᵢ > 0.
    Atoms { points: Vec<SpherePoint>, weights: Vec<f64> },
}

impl ClassicalState {
    pub fn density(
        u: impl Fn(&SpherePoint) -> f64 + Send + Sync + 'static,
        support: Option<Cap>,
    ) -> Self {
        ClassicalState::Density { u: Arc::new(u), support }
    }

    pub fn atoms_uniform(points: Vec<SpherePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(CoreError::BadClassicalState("empty atom list".into()));
        }
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Ok(ClassicalState::Atoms { points, weights })
    }

    pub fn atoms(points: Vec<SpherePoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(CoreError::BadClassicalState(
                "atom list empty or weight length mismatch".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(CoreError::BadClassicalState("atom weights must be positive".into()));
        }
        Ok(ClassicalState::Atoms { points, weights })
    }

    /// Push forward under the chart dilation u ↦ s·u (Darboux coordinates).
    /// Atoms map pointwise; densities are composed with the inverse dilation,
    /// which preserves supports (mass normalisation happens at quantization).
    pub fn rescale_in_chart(&self, chart: &EquatorialChart, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(CoreError::InvalidArgument(format!("chart scale {s} outside (0, 1]")));
        }
        match self {
            ClassicalState::Atoms { points, weights } => {
                let mut mapped = Vec::with_capacity(points.len());
                for p in points {
                    let u = chart.from_sphere(p);
                    if (u[0] * u[0] + u[1] * u[1]).sqrt() > chart.radius() {
                        return Err(CoreError::ChartOverflow(format!(
                            "atom at chart radius {:.3} exceeds chart radius {:.3}",
                            (u[0] * u[0] + u[1] * u[1]).sqrt(),
                            chart.radius()
                        )));
                    }
                    mapped.push(chart.to_sphere([s * u[0], s * u[1]])?);
                }
                Ok(ClassicalState::Atoms { points: mapped, weights: weights.clone() })
            }
            ClassicalState::Density { u, support } => {
                let chart = *chart;
                let u = u.clone();
                let r = chart.radius();
                let v = move |p: &SpherePoint| {
                    let w = chart.from_sphere(p);
                    let scaled = [w[0] / s, w[1] / s];
                    if (scaled[0] * scaled[0] + scaled[1] * scaled[1]).sqrt() > r {
                        0.0
                    } else {
                        chart.to_sphere(scaled).map(|q| u(&q)).unwrap_or(0.0)
                    }
                };
                let support = match support {
                    Some(cap) => {
                        let c = chart.from_sphere(&cap.center);
                        let center = chart.to_sphere([s * c[0], s * c[1]])?;
                        // chart dilations contract; 1.3·s·(old radius) is a
                        // safe cap bound given the chart's metric distortion
                        Some(Cap { center, radius: (1.3 * s * cap.radius).min(std::f64::consts::PI) })
                    }
                    None => None,
                };
                Ok(ClassicalState::Density { u: Arc::new(v), support })
            }
        }
    }

    pub fn support_hint(&self) -> Option<Cap> {
        match self {
            ClassicalState::Density { support, .. } => *support,
            ClassicalState::Atoms { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::fibonacci_grid;

    fn height(c: f64) -> Observable {
        Observable::linear([0.0, 0.0, 1.0], c)
    }

    /// Numerical flow of c·x₃ must match the closed-form rotation about e₃
    /// with angular velocity −2c.
    #[test]
    fn rotation_flow_oracle() {
        let f = Observable::autonomous(|p| 0.4 * p.z()); // no analytic flow attached
        let p = SpherePoint::from_height_longitude(0.2, 0.3).unwrap();
        let num = integrate_one(&f, &p, 0.0, 1.7, 400).0;
        let exact = p.rotate([0.0, 0.0, 1.0], -0.8 * 1.7);
        assert!(num.geodesic_angle(&exact) < 1e-9);
    }

    #[test]
    fn bracket_of_coordinates() {
        // {x₁, x₂} = −2x₃ with this orientation
        let f = Observable::linear([1.0, 0.0, 0.0], 1.0);
        let g = Observable::linear([0.0, 1.0, 0.0], 1.0);
        let p = SpherePoint::from_height_longitude(0.37, -1.1).unwrap();
        let pb = poisson_bracket(&f, &g, &p, 0.0);
        assert!((pb + 2.0 * p.z()).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_gradient_matches_analytic() {
        let exact = height(0.9);
        let fd = Observable::autonomous(|p| 0.9 * p.z());
        for p in fibonacci_grid(37) {
            let ge = tangent_gradient(&exact, &p, 0.0);
            let gf = tangent_gradient(&fd, &p, 0.0);
            for i in 0..3 {
                assert!((ge[i] - gf[i]).abs() < 1e-9, "{ge:?} vs {gf:?}");
            }
        }
    }

    #[test]
    fn cap_gradient_matches_finite_difference() {
        let center = SpherePoint::from_height_longitude(0.5, 1.2).unwrap();
        let cap = Observable::cap_plateau(center, 0.3, 0.8, 1.4);
        let c2 = cap.clone();
        let bare = Observable::time_dependent(move |p, t| c2.value(p, t));
        for p in fibonacci_grid(200) {
            let ga = tangent_gradient(&cap, &p, 0.0);
            let gn = tangent_gradient(&bare, &p, 0.0);
            for i in 0..3 {
                assert!((ga[i] - gn[i]).abs() < 1e-6, "at {:?}: {ga:?} vs {gn:?}", p.coords());
            }
        }
    }

    #[test]
    fn separable_rotation_profile_integrates_amplitude() {
        // a(t)·c·x₃ rotates by −2c·∫₀ᵗ a, and the attached profile must agree
        // with brute-force integration of the time-dependent field.
        let c = 0.7;
        let f = Observable::separable(height(c), |t: f64| (std::f64::consts::PI * t).sin());
        let p = SpherePoint::from_height_longitude(0.3, -0.4).unwrap();
        for t in [0.3, 0.75, 1.0] {
            let closed = flow_endpoint(&f, &p, 0.0, t, 1);
            let angle = -2.0 * c * (1.0 - (std::f64::consts::PI * t).cos()) / std::f64::consts::PI;
            let exact = p.rotate([0.0, 0.0, 1.0], angle);
            assert!(closed.geodesic_angle(&exact) < 1e-10);
            let num = integrate_one(&f, &p, 0.0, t, 400).0;
            assert!(num.geodesic_angle(&exact) < 1e-8);
        }
    }

    #[test]
    fn inverse_flow_round_trip() {
        let f = Observable::autonomous(|p| p.z() * p.z() + 0.3 * p.x());
        let p = SpherePoint::from_height_longitude(-0.4, 2.0).unwrap();
        let q = integrate_one(&f, &p, 0.0, 0.9, 300).0;
        let back = inverse_flow_point(&f, &q, 0.9, 300);
        assert!(back.geodesic_angle(&p) < 1e-8);
    }

    #[test]
    fn backward_samples_match_pointwise_inverse() {
        let f = Observable::autonomous(|p| p.z() * p.z() + 0.3 * p.x());
        let p = SpherePoint::from_height_longitude(0.1, 0.7).unwrap();
        let times = [0.0, 0.25, 0.6, 1.0];
        let traj = inverse_flow_samples_autonomous(&f, &p, &times, 400);
        for (i, &t) in times.iter().enumerate() {
            let direct = inverse_flow_point(&f, &p, t, 400);
            assert!(traj[i].geodesic_angle(&direct) < 1e-8);
        }
    }

    #[test]
    fn path_length_of_height_function() {
        // sup|c·x₃| = c, so the length over [0, T] is cT.
        let f = height(0.75);
        let grid = fibonacci_grid(800);
        let len = classical_path_length(&f, 0.0, 2.0, 8, &grid);
        assert!((len - 1.5).abs() < 0.01, "{len}");
    }

    #[test]
    fn rotation_displaces_equatorial_cap() {
        let cap = Cap {
            center: SpherePoint::from_height_longitude(0.0, 0.0).unwrap(),
            radius: 0.3,
        };
        // rotate by angle −π ≡ π about e₃ over unit time: |2c| = π
        let f = height(std::f64::consts::PI / 2.0);
        let clear = displacement_clearance(&f, &cap, 1.0, 200);
        assert!((clear - (std::f64::consts::PI - 0.6)).abs() < 0.02, "{clear}");
    }

    #[test]
    fn atoms_rescale_contracts_toward_center() {
        let chart = EquatorialChart::new(0.0, 0.6).unwrap();
        let p = chart.to_sphere([0.4, -0.2]).unwrap();
        let st = ClassicalState::atoms_uniform(vec![p]).unwrap();
        let scaled = st.rescale_in_chart(&chart, 0.5).unwrap();
        match scaled {
            ClassicalState::Atoms { points, .. } => {
                let u = chart.from_sphere(&points[0]);
                assert!((u[0] - 0.2).abs() < 1e-12 && (u[1] + 0.1).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }
}
