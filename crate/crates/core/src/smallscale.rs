//! Coherent-state grids on a Darboux chart and rescaled dislocation sweeps.
//!
//! A mesh-`s` lattice of coherent states under a smooth envelope behaves like
//! the classical measure |φ|²dμ whenever the effective parameter s⁻²ℏ is
//! small: operator pairings reproduce chart integrals, and a half-mesh
//! translation of the lattice kills the self-overlap at a rate governed by
//! s⁻²ℏ rather than ℏ alone. Contracting a fixed displacing Hamiltonian and
//! a fixed classical state by `s` trades path energy (∝ s²) against the same
//! effective parameter, which is the small-scale dislocation/displacement
//! trade-off the sweep tables below measure.

use faer::c64;
use rayon::prelude::*;

use crate::dynamics::{
    propagate, run_dislocation, DislocationReport, NormConfig, QuantumHamiltonianPath,
};
use crate::error::{CoreError, Result};
use crate::flow::{displacement_clearance, flow_endpoint, ClassicalState};
use crate::geom::{Cap, EquatorialChart, SpherePoint, SQRT2};
use crate::linalg;
use crate::observable::{smooth_step, ChartHamiltonian, Observable};
use crate::quad::gauss_legendre;
use crate::space::{build_space, QuantumSpace};
use crate::state::DensityOperator;
use crate::toeplitz::{quantize_state, toeplitz_observable};

/// Meshes below this are rejected: the lattice would outnumber any dimension
/// we can afford and the chart quadratures would stop resolving it.
pub const MIN_MESH: f64 = 1e-4;

/// Gauss–Legendre panels per axis for envelope normalization.
const NORMALIZE_NODES: usize = 420;
/// A deliberately different rule for pairing targets, so the target is an
/// independent check on the normalization quadrature rather than its mirror.
const TARGET_NODES: usize = 481;

/// Tensor Gauss–Legendre integral over the chart square [−r, r]², which
/// equals the μ-integral of any function supported in the radius-r disk
/// (the chart is area preserving). The integrand receives both the chart
/// point and its image on the sphere.
pub fn chart_integral(
    chart: &EquatorialChart,
    r: f64,
    nodes: usize,
    f: impl Fn([f64; 2], &SpherePoint) -> f64 + Sync,
) -> f64 {
    let (xs, ws) = gauss_legendre(nodes);
    (0..nodes)
        .into_par_iter()
        .map(|i| {
            let u0 = r * xs[i];
            let mut acc = 0.0;
            for j in 0..nodes {
                let u = [u0, r * xs[j]];
                let p = chart.to_sphere(u).expect("chart square stays inside the band");
                acc += ws[j] * f(u, &p);
            }
            ws[i] * acc
        })
        .sum::<f64>()
        * r
        * r
}

/// A smooth L²-normalized bump in chart coordinates, remembered together
/// with its support radius and its value at the chart center (the latter is
/// the single-node norm oracle).
#[derive(Clone)]
pub struct ChartEnvelope {
    pub observable: Observable,
    /// Chart-coordinate support radius.
    pub radius: f64,
    /// φ at the chart center.
    pub center_value: f64,
}

/// Radial plateau envelope: 1 on |u| ≤ r_inner, smooth ramp to 0 at r_outer,
/// scaled so that ∫|φ|²dμ = 1.
pub fn plateau_envelope(
    chart: &EquatorialChart,
    r_inner: f64,
    r_outer: f64,
) -> Result<ChartEnvelope> {
    if !(0.0 < r_inner && r_inner < r_outer && r_outer <= chart.radius()) {
        return Err(CoreError::InvalidArgument(format!(
            "plateau radii ({r_inner}, {r_outer}) must be increasing and fit the chart radius {}",
            chart.radius()
        )));
    }
    let width = r_outer - r_inner;
    let raw = move |u: [f64; 2]| {
        let r = (u[0] * u[0] + u[1] * u[1]).sqrt();
        smooth_step((r_outer - r) / width)
    };
    let mass = chart_integral(chart, r_outer, NORMALIZE_NODES, |u, _| {
        let v = raw(u);
        v * v
    });
    if !(mass > 0.0) {
        return Err(CoreError::InvalidArgument("plateau envelope has no mass".into()));
    }
    let scale = 1.0 / mass.sqrt();
    let chart_copy = *chart;
    let observable = Observable::time_dependent(move |p: &SpherePoint, _t: f64| {
        let u = chart_copy.from_sphere(p);
        if u[0] * u[0] + u[1] * u[1] >= r_outer * r_outer {
            0.0
        } else {
            scale * raw(u)
        }
    })
    .with_support(Cap { center: chart.center(), radius: SQRT2 * r_outer * 1.05 });
    Ok(ChartEnvelope { observable, radius: r_outer, center_value: scale })
}

/// A mesh-s lattice in a Darboux chart with a normalized envelope: the node
/// set is s·Z² (anchored at the chart center) intersected with the chart
/// disk. Anchoring loses no generality here — shifting the anchor perturbs
/// every lattice Riemann sum of a smooth compactly supported function only
/// at O(s^∞), far below the effects measured.
#[derive(Clone)]
pub struct GridSpec {
    pub chart: EquatorialChart,
    pub mesh: f64,
    pub envelope: ChartEnvelope,
    nodes: Vec<([f64; 2], SpherePoint)>,
}

impl std::fmt::Debug for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSpec")
            .field("chart", &self.chart)
            .field("mesh", &self.mesh)
            .field("envelope_radius", &self.envelope.radius)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

impl GridSpec {
    pub fn new(chart: EquatorialChart, mesh: f64, envelope: ChartEnvelope) -> Result<Self> {
        if !(mesh >= MIN_MESH && mesh <= 1.0) {
            return Err(CoreError::InvalidArgument(format!(
                "mesh {mesh} outside [{MIN_MESH}, 1]"
            )));
        }
        if envelope.radius > chart.radius() {
            return Err(CoreError::ChartOverflow(format!(
                "envelope radius {} exceeds chart radius {}",
                envelope.radius,
                chart.radius()
            )));
        }
        // the envelope must genuinely vanish at its declared support boundary
        for i in 0..48 {
            let ang = std::f64::consts::TAU * i as f64 / 48.0;
            let u = [0.999 * envelope.radius * ang.cos(), 0.999 * envelope.radius * ang.sin()];
            let p = chart.to_sphere(u)?;
            if envelope.observable.value(&p, 0.0).abs() > 1e-9 {
                return Err(CoreError::ChartOverflow(
                    "envelope does not vanish at its declared support boundary".into(),
                ));
            }
        }
        let mass = chart_integral(&chart, envelope.radius, NORMALIZE_NODES, |_, p| {
            let v = envelope.observable.value(p, 0.0);
            v * v
        });
        if (mass - 1.0).abs() > 1e-8 {
            return Err(CoreError::InvalidArgument(format!(
                "envelope is not L²-normalized: ∫|φ|²dμ = {mass:.12}"
            )));
        }
        let m = (chart.radius() / mesh).floor() as i64;
        let mut nodes = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                let u = [mesh * i as f64, mesh * j as f64];
                if (u[0] * u[0] + u[1] * u[1]).sqrt() <= chart.radius() {
                    nodes.push((u, chart.to_sphere(u)?));
                }
            }
        }
        Ok(GridSpec { chart, mesh, envelope, nodes })
    }

    /// Lattice nodes in chart coordinates, row-major in (i, j).
    pub fn nodes(&self) -> &[([f64; 2], SpherePoint)] {
        &self.nodes
    }

    /// s⁻²ℏ, the effective small parameter of every grid estimate.
    pub fn effective_parameter(&self, space: &QuantumSpace) -> f64 {
        space.hbar / (self.mesh * self.mesh)
    }
}

/// The grid superposition Ψ = s·Σ_x φ(x)·ξ_{x,ℏ} over the lattice nodes
/// (unit coherent states, mesh-area weights) and its norm.
pub struct GridState {
    /// Coefficients in the monomial basis, unnormalized.
    pub vector: Vec<c64>,
    pub norm: f64,
}

pub fn grid_superposition(space: &QuantumSpace, spec: &GridSpec) -> Result<GridState> {
    if spec.nodes.is_empty() {
        return Err(CoreError::InvalidArgument("grid has no lattice nodes".into()));
    }
    let mut vector = vec![c64::new(0.0, 0.0); space.dim];
    let mut carried = false;
    for (_, p) in &spec.nodes {
        let w = spec.envelope.observable.value(p, 0.0);
        if w == 0.0 {
            continue;
        }
        carried = true;
        let coh = space.coherent(p)?;
        let scale = spec.mesh * w / coh.rawnsley.sqrt();
        for (acc, z) in vector.iter_mut().zip(&coh.kernel_vector) {
            *acc += z * scale;
        }
    }
    if !carried {
        return Err(CoreError::InvalidArgument(
            "envelope vanishes on every lattice node; the superposition is empty".into(),
        ));
    }
    let norm = vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(GridState { vector, norm })
}

/// Pairing of the grid state against an operator symbol, with the classical
/// chart integral it should reproduce.
#[derive(Clone, Copy, Debug)]
pub struct PairingCheck {
    /// ⟨T(g)Ψ, Ψ⟩ / ‖Ψ‖².
    pub value: f64,
    /// ∫ g·|φ|² dμ from the independent fine chart quadrature.
    pub target: f64,
    pub residual: f64,
}

pub fn grid_pairing_check(
    space: &QuantumSpace,
    spec: &GridSpec,
    g: &Observable,
) -> Result<PairingCheck> {
    let psi = grid_superposition(space, spec)?;
    let t = toeplitz_observable(space, g, 0.0);
    let tv = linalg::mat_vec(&t, &psi.vector);
    let value = linalg::inner(&psi.vector, &tv).re / (psi.norm * psi.norm);
    let target = chart_integral(&spec.chart, spec.envelope.radius, TARGET_NODES, |_, p| {
        let v = spec.envelope.observable.value(p, 0.0);
        g.value(p, 0.0) * v * v
    });
    Ok(PairingCheck { value, target, residual: (value - target).abs() })
}

/// Result of propagating the grid state for time s under a chart-translation
/// Hamiltonian (half-mesh displacement for the normal form x₁/2).
#[derive(Clone, Copy, Debug)]
pub struct TranslationCheck {
    /// ⟨Ψ, U(s)Ψ⟩ / ‖Ψ‖².
    pub overlap: c64,
    pub overlap_modulus: f64,
    /// Chart-coordinate displacement of the envelope over time s.
    pub shift: f64,
    /// s⁻²ℏ, the decay variable.
    pub effective_parameter: f64,
}

/// The normal-form generator whose time-s flow shifts the lattice by half a
/// mesh: f̄ = x₁/2 on the chart, globally the height function x₃/(2√2).
pub fn translation_generator(chart: EquatorialChart) -> ChartHamiltonian {
    ChartHamiltonian::linear(chart, 0.5)
}

/// Propagate the grid state for time equal to its mesh under `f` and pair
/// with the original. The flowed envelope support must stay inside the
/// chart, otherwise the run aborts with a chart-overflow error.
pub fn translation_dislocation(
    space: &QuantumSpace,
    spec: &GridSpec,
    f: &ChartHamiltonian,
    steps: usize,
) -> Result<TranslationCheck> {
    let s = spec.mesh;
    let f_obs = f.observable();
    let shift = match f.linear_speed() {
        Some(v) => (v * s).abs(),
        None => {
            // measure the worst chart displacement of the support boundary
            let mut worst = 0.0f64;
            for i in 0..48 {
                let ang = std::f64::consts::TAU * i as f64 / 48.0;
                let u = [spec.envelope.radius * ang.cos(), spec.envelope.radius * ang.sin()];
                let p = spec.chart.to_sphere(u)?;
                let q = flow_endpoint(&f_obs, &p, 0.0, s, steps.max(64));
                let w = spec.chart.from_sphere(&q);
                let d = ((w[0] - u[0]).powi(2) + (w[1] - u[1]).powi(2)).sqrt();
                worst = worst.max(d);
            }
            worst
        }
    };
    if spec.envelope.radius + shift > spec.chart.radius() {
        return Err(CoreError::ChartOverflow(format!(
            "time-{s:.4} flow moves the envelope support (radius {:.4} + shift {shift:.4}) \
             outside the chart radius {:.4}",
            spec.envelope.radius,
            spec.chart.radius()
        )));
    }
    let psi = grid_superposition(space, spec)?;
    let path = QuantumHamiltonianPath::from_observable(space, &f_obs)?;
    let prop = propagate(&path, 0.0, s, steps)?;
    let moved = prop.apply(&psi.vector);
    let overlap = linalg::inner(&psi.vector, &moved) / c64::new(psi.norm * psi.norm, 0.0);
    Ok(TranslationCheck {
        overlap,
        overlap_modulus: overlap.norm(),
        shift,
        effective_parameter: spec.effective_parameter(space),
    })
}

/// One cell of a grid-translation sweep.
#[derive(Clone, Copy, Debug)]
pub struct TranslationRow {
    pub k: usize,
    pub hbar: f64,
    pub s: f64,
    pub effective_parameter: f64,
    pub overlap_modulus: f64,
}

/// Run the half-mesh translation across levels, with the mesh chosen from ℏ
/// by `s_rule` (the envelope and chart stay fixed). Rows come back sorted
/// by k; cells run in parallel.
pub fn translation_sweep(
    ks: &[usize],
    oversample: f64,
    chart: EquatorialChart,
    envelope: &ChartEnvelope,
    s_rule: impl Fn(f64) -> f64 + Sync,
    steps: usize,
) -> Result<Vec<TranslationRow>> {
    let generator = translation_generator(chart);
    let mut rows = ks
        .par_iter()
        .map(|&k| {
            let space = build_space(k, oversample)?;
            let s = s_rule(space.hbar);
            let spec = GridSpec::new(chart, s, envelope.clone())?;
            let check = translation_dislocation(&space, &spec, &generator, steps)?;
            Ok(TranslationRow {
                k,
                hbar: space.hbar,
                s,
                effective_parameter: check.effective_parameter,
                overlap_modulus: check.overlap_modulus,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.k);
    Ok(rows)
}

/// One row of a rescaled dislocation experiment: the level, the scale, the
/// effective parameter, and the measured dislocation data.
#[derive(Clone, Copy, Debug)]
pub struct RescaledRow {
    pub k: usize,
    pub hbar: f64,
    pub s: f64,
    pub effective_parameter: f64,
    pub fidelity: f64,
    pub ell_q: f64,
    /// Whether the time-one flow of the rescaled Hamiltonian still displaces
    /// the rescaled support (sampled clearance > 0).
    pub displaced: bool,
}

fn enclosing_cap(state: &ClassicalState) -> Result<Cap> {
    if let Some(cap) = state.support_hint() {
        return Ok(cap);
    }
    match state {
        ClassicalState::Atoms { points, .. } => {
            let mut m = [0.0f64; 3];
            for p in points {
                let c = p.coords();
                m[0] += c[0];
                m[1] += c[1];
                m[2] += c[2];
            }
            let center = SpherePoint::project(m).map_err(|_| {
                CoreError::BadClassicalState(
                    "atom set has no well-defined enclosing cap (balanced antipodes)".into(),
                )
            })?;
            let radius =
                points.iter().map(|p| center.geodesic_angle(p)).fold(0.0f64, f64::max);
            Ok(Cap { center, radius: radius.max(1e-3) })
        }
        ClassicalState::Density { .. } => Err(CoreError::BadClassicalState(
            "density state needs a support hint for displacement checks".into(),
        )),
    }
}

/// Contract a displacing chart Hamiltonian and a classical state by s = s_rule(ℏ)
/// at each level, quantize, and run the time-one dislocation. Requires the
/// unscaled time-one flow to displace the unscaled support (the s = 1
/// clearance must be positive); each row then re-checks displacement at its
/// own scale. Rows come back sorted by k.
pub fn rescaled_experiment(
    ks: &[usize],
    oversample: f64,
    fbar: &ChartHamiltonian,
    taubar: &ClassicalState,
    s_rule: impl Fn(f64) -> f64 + Sync,
    steps: usize,
    cfg: &NormConfig,
) -> Result<Vec<RescaledRow>> {
    let support = enclosing_cap(taubar)?;
    let clearance = displacement_clearance(&fbar.observable(), &support, 1.0, 400);
    if clearance <= 0.0 {
        return Err(CoreError::HypothesisViolated(format!(
            "time-one flow fails to displace the state support (clearance {clearance:.3e})"
        )));
    }
    let mut rows = ks
        .par_iter()
        .map(|&k| {
            let space = build_space(k, oversample)?;
            let s = s_rule(space.hbar);
            if !(s > 0.0 && s <= 1.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "s_rule produced scale {s} outside (0, 1] at k = {k}"
                )));
            }
            let report = rescaled_cell(&space, fbar, taubar, s, steps, cfg)?;
            Ok(RescaledRow {
                k,
                hbar: space.hbar,
                s,
                effective_parameter: space.hbar / (s * s),
                fidelity: report.0.fidelity_a,
                ell_q: report.0.ell_q,
                displaced: report.1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.k);
    Ok(rows)
}

/// One (k, s) cell: rescale, quantize, dislocate. Shared by the sweep and by
/// consistency tests against the unit-scale run.
pub fn rescaled_cell(
    space: &QuantumSpace,
    fbar: &ChartHamiltonian,
    taubar: &ClassicalState,
    s: f64,
    steps: usize,
    cfg: &NormConfig,
) -> Result<(DislocationReport, bool)> {
    let f_s = fbar.rescale(s)?;
    let tau_s = taubar.rescale_in_chart(&fbar.chart, s)?;
    let theta = DensityOperator::from_matrix(quantize_state(space, &tau_s)?)?;
    let f_obs = f_s.observable();
    let report = run_dislocation(space, &theta, &f_obs, steps, cfg, None)?;
    let displaced = match enclosing_cap(&tau_s) {
        Ok(cap) => displacement_clearance(&f_obs, &cap, 1.0, steps.max(200)) > 0.0,
        Err(_) => false,
    };
    Ok((report, displaced))
}

/// Direct lattice tail Σ_{x ∈ s·(Z²∖{0})} e^{−λ|x|²}, summed to machine
/// exhaustion. Depends on (s, λ) only through μ = s²λ.
pub fn gaussian_lattice_tail(s: f64, lambda: f64) -> f64 {
    let mu = s * s * lambda;
    assert!(mu > 0.0, "lattice tail needs s²λ > 0");
    // e^{−745} underflows; radius beyond √(745/μ) contributes nothing
    let radius = (745.0 / mu).sqrt().ceil() as i64 + 1;
    let mut acc = 0.0;
    for i in -radius..=radius {
        for j in -radius..=radius {
            if i == 0 && j == 0 {
                continue;
            }
            acc += (-mu * (i * i + j * j) as f64).exp();
        }
    }
    acc
}

/// Validated window of the lattice-tail envelope in μ = s²λ.
pub const TAIL_ENVELOPE_RANGE: (f64, f64) = (0.5, 50.0);

/// Constant of the envelope C·μ⁻¹·e^{−μ}, calibrated as 1.04× the largest
/// measured tail/envelope ratio over [`TAIL_ENVELOPE_RANGE`]. The μ⁻¹ form
/// forces C to grow like 4μ past the window (the four nearest lattice points
/// alone contribute 4e^{−μ}), so no single constant works globally; the
/// envelope is asserted on its validated window only.
pub const TAIL_ENVELOPE_CONSTANT: f64 = 208.0;

/// The envelope C·(s²λ)⁻¹·e^{−s²λ} the lattice tail stays below on the
/// validated window.
pub fn gaussian_tail_envelope(s: f64, lambda: f64) -> f64 {
    let mu = s * s * lambda;
    TAIL_ENVELOPE_CONSTANT * mu.powi(-1) * (-mu).exp()
}
