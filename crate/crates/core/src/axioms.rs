//! Residual measurements behind the quantization estimates: the positive
//! lower bound, the commutator and product defects, the Berezin-transform
//! defect, the trace sandwich, and the empirically extracted subleading
//! product coefficient.  Every function returns the raw measured number;
//! slope fitting and thresholds live with the callers.

use faer::c64;

use crate::error::Result;
use crate::flow::poisson_bracket;
use crate::geom::SpherePoint;
use crate::linalg::{self, CMat};
use crate::observable::Observable;
use crate::quad::ProductQuadrature;
use crate::space::QuantumSpace;
use crate::toeplitz::{berezin_symbol, berezin_transform_at, toeplitz_observable};

/// A named (f, g) battery pair.  f is a nonnegative bump (so the lower-bound
/// residual has signal exactly where positivity is at stake), g a smooth
/// band-limited companion; both carry analytic gradients.
pub struct AxiomPair {
    pub name: &'static str,
    pub f: Observable,
    pub g: Observable,
}

/// The fixed five-pair battery shared by the estimate sweeps and the
/// constant calibration.
pub fn standard_battery() -> Vec<AxiomPair> {
    let tilted = SpherePoint::project([1.0, 1.0, 1.0]);
    let offset = SpherePoint::project([0.0, 1.0, 0.3]);
    vec![
        AxiomPair {
            name: "polar-bump-height",
            f: Observable::cap_plateau(SpherePoint::north(), 0.5, 0.9, 1.0),
            g: Observable::linear([0.0, 0.0, 1.0], 1.0),
        },
        AxiomPair {
            name: "equator-bump-axis",
            f: Observable::cap_plateau(SpherePoint::project([1.0, 0.0, 0.0]), 0.45, 0.8, 1.0),
            g: Observable::linear([1.0, 0.0, 0.0], 1.0),
        },
        AxiomPair {
            name: "tilted-bump-shear",
            f: Observable::cap_plateau(tilted, 0.4, 0.85, 0.7),
            g: Observable::autonomous(|p| p.x() * p.y())
                .with_gradient(|p, _| [p.y(), p.x(), 0.0]),
        },
        AxiomPair {
            name: "south-bump-square",
            f: Observable::cap_plateau(SpherePoint::south(), 0.35, 0.75, 1.2),
            g: Observable::autonomous(|p| p.z() * p.z())
                .with_gradient(|p, _| [0.0, 0.0, 2.0 * p.z()]),
        },
        AxiomPair {
            name: "offset-bump-mix",
            f: Observable::cap_plateau(offset, 0.5, 1.0, 0.9),
            g: Observable::autonomous(|p| 0.5 * p.x() + p.y() * p.z())
                .with_gradient(|p, _| [0.5, p.z(), p.y()]),
        },
    ]
}

/// Positivity defect of the quantization of a nonnegative symbol:
/// max(0, −λ_min(T(f))).  O(ℏ)·|f|₂ for smooth f ≥ 0 touching zero.
pub fn garding_residual(space: &QuantumSpace, f: &Observable) -> Result<f64> {
    let t = toeplitz_observable(space, f, 0.0);
    let vals = linalg::eigvalsh(&t)?;
    Ok((-vals.first().copied().unwrap_or(0.0)).max(0.0))
}

/// Commutator defect ‖(−i/ℏ)[T(f), T(g)] − T({f,g})‖_op, which is O(ℏ).
pub fn commutator_residual(space: &QuantumSpace, f: &Observable, g: &Observable) -> Result<f64> {
    let tf = toeplitz_observable(space, f, 0.0);
    let tg = toeplitz_observable(space, g, 0.0);
    let tb = crate::toeplitz::toeplitz_fn(space, |p| poisson_bracket(f, g, p, 0.0));
    let comm = &(&tf * &tg) - &(&tg * &tf);
    let scale = c64::new(0.0, -1.0 / space.hbar);
    let lhs = CMat::from_fn(space.dim, space.dim, |i, j| comm[(i, j)] * scale);
    linalg::op_norm(&(&lhs - &tb))
}

/// Product defect ‖T(f)T(g) − T(fg)‖_op, which is O(ℏ).
pub fn product_residual(space: &QuantumSpace, f: &Observable, g: &Observable) -> Result<f64> {
    let tf = toeplitz_observable(space, f, 0.0);
    let tg = toeplitz_observable(space, g, 0.0);
    let tfg = crate::toeplitz::toeplitz_fn(space, |p| f.value(p, 0.0) * g.value(p, 0.0));
    linalg::op_norm(&(&(&tf * &tg) - &tfg))
}

/// Berezin-transform defect max over probes of |B(f)(x) − f(x)|, O(ℏ).
pub fn berezin_residual(
    space: &QuantumSpace,
    f: &Observable,
    probes: &[SpherePoint],
) -> Result<f64> {
    let t = toeplitz_observable(space, f, 0.0);
    let mut worst = 0.0f64;
    for x in probes {
        let b = berezin_transform_at(space, &t, x)?;
        worst = worst.max((b - f.value(x, 0.0)).abs());
    }
    Ok(worst)
}

/// Trace data for one symbol at one level.
#[derive(Clone, Copy, Debug)]
pub struct TraceChecks {
    /// ‖f‖_{L¹} = ∫|f| dμ by the supplied oracle quadrature.
    pub l1: f64,
    /// (2πℏ)·‖T(f)‖_tr.
    pub scaled_trace_norm: f64,
    /// (‖f‖₁ − (2πℏ)‖T(f)‖_tr)/ℏ — the lower sandwich constant at this level.
    pub lower_gap_rate: f64,
    /// ((2πℏ)‖T(f)‖_tr − ‖f‖₁)/(‖f‖₁·ℏ) — the upper sandwich constant.
    pub upper_gap_rate: f64,
    /// Relative defect of tr T(f) against the exact (k+1)/(2π)·∫f dμ.
    pub trace_residual: f64,
}

/// Measure the trace sandwich and the trace correspondence for one symbol.
/// The oracle rule should be finer than the space's own quadrature.
pub fn trace_checks(
    space: &QuantumSpace,
    f: &Observable,
    oracle: &ProductQuadrature,
) -> Result<TraceChecks> {
    let t = toeplitz_observable(space, f, 0.0);
    let l1 = oracle.integrate(|p| f.value(p, 0.0).abs());
    let integral = oracle.integrate(|p| f.value(p, 0.0));
    let hbar = space.hbar;
    let scaled_trace_norm = std::f64::consts::TAU * hbar * linalg::trace_norm(&t)?;
    let exact_trace = (space.k as f64 + 1.0) / std::f64::consts::TAU * integral;
    let trace_residual =
        (linalg::trace(&t).re - exact_trace).abs() / exact_trace.abs().max(1.0);
    Ok(TraceChecks {
        l1,
        scaled_trace_norm,
        lower_gap_rate: (l1 - scaled_trace_norm) / hbar,
        upper_gap_rate: (scaled_trace_norm - l1) / (l1 * hbar),
        trace_residual,
    })
}

/// Covariant symbol of the product defect T(f)T(g) − T(fg) at x.  Dividing
/// by ℏ and extrapolating ℏ → 0 recovers the subleading product
/// coefficient at x.
pub fn product_defect_symbol(
    space: &QuantumSpace,
    f: &Observable,
    g: &Observable,
    x: &SpherePoint,
) -> Result<c64> {
    let tf = toeplitz_observable(space, f, 0.0);
    let tg = toeplitz_observable(space, g, 0.0);
    let tfg = crate::toeplitz::toeplitz_fn(space, |p| f.value(p, 0.0) * g.value(p, 0.0));
    berezin_symbol(space, &(&(&tf * &tg) - &tfg), x)
}

/// Richardson-extrapolated subleading product coefficient at x across a
/// family of levels (finest last): the ℏ-coefficient of the product defect
/// symbol.
pub fn subleading_product_coefficient(
    spaces: &[&QuantumSpace],
    f: &Observable,
    g: &Observable,
    x: &SpherePoint,
) -> Result<c64> {
    let mut pts = Vec::with_capacity(spaces.len());
    for sp in spaces {
        pts.push((sp.hbar, product_defect_symbol(sp, f, g, x)?));
    }
    crate::lagrangian::hbar_coefficient(&pts)
}
