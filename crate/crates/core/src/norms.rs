//! Empirical C^k norms on the sphere.
//!
//! Derivatives are taken in normal coordinates: for each base point p the
//! function u ↦ f(exp_p(u₁t₁ + u₂t₂)) is differentiated at 0 with central
//! stencils at two steps (h and h/2) plus one Richardson extrapolation, and
//! the order-m derivative strength is the Frobenius norm of the symmetric
//! m-tensor (binomial multiplicities). Conventions used throughout:
//!
//!   |f|_k        = Σ_{m ≤ k} sup_p |D^m f(p)|        (C^k norm)
//!   |f,g|_N      = Σ_{j ≤ N} |f|_j·|g|_{N−j}
//!   |f,g|_{1,3}  = |f|₁|g|₃ + |f|₂|g|₂ + |f|₃|g|₁
//!
//! All semiclassical constants in this crate are calibrated against these
//! same conventions, so only internal consistency matters.

use rayon::prelude::*;

use crate::geom::{Cap, SpherePoint};
use crate::observable::Observable;

/// Highest derivative order the stencils support.
pub const MAX_ORDER: usize = 4;

/// Default finite-difference step: balances O(h²)-per-run truncation
/// (Richardson leaves O(h⁴)) against roundoff in 4th differences
/// (ε·|f|/h⁴ ≈ 1e-4·|f| at h/2 = 2.5e-3). Scale it down proportionally when
/// measuring functions rescaled to small supports.
pub const DEFAULT_STEP: f64 = 5e-3;

/// Offsets (in units of h) of the 7×7 evaluation grid; it contains the
/// 5-node central stencils for both the h run ({−2,−1,0,1,2}·h) and the
/// h/2 run ({−1,−½,0,½,1}·h).
pub const STENCIL_OFFSETS: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

/// Node indices into `STENCIL_OFFSETS` for the two runs.
const RUN_H: [usize; 5] = [0, 1, 3, 5, 6];
const RUN_H2: [usize; 5] = [1, 2, 3, 4, 5];

/// Central difference coefficients on nodes {−2,−1,0,1,2} (units of the
/// step), for derivative orders 0–4; each is 2nd-order accurate.
const STENCIL_COEFFS: [[f64; 5]; 5] = [
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, -0.5, 0.0, 0.5, 0.0],
    [0.0, 1.0, -2.0, 1.0, 0.0],
    [-0.5, 1.0, 0.0, -1.0, 0.5],
    [1.0, -4.0, 6.0, -4.0, 1.0],
];

const BINOM: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

/// The 49 sample points around p (row-major over STENCIL_OFFSETS × itself).
pub fn stencil_points(p: &SpherePoint, h: f64) -> Vec<SpherePoint> {
    let (t1, t2) = p.tangent_frame();
    let mut pts = Vec::with_capacity(49);
    for &oi in &STENCIL_OFFSETS {
        for &oj in &STENCIL_OFFSETS {
            let v = [
                h * (oi * t1[0] + oj * t2[0]),
                h * (oi * t1[1] + oj * t2[1]),
                h * (oi * t1[2] + oj * t2[2]),
            ];
            pts.push(p.exp_map(v));
        }
    }
    pts
}

fn run_derivative(values: &[f64; 49], run: &[usize; 5], s: f64, a: usize, b: usize) -> f64 {
    let ca = &STENCIL_COEFFS[a];
    let cb = &STENCIL_COEFFS[b];
    let mut acc = 0.0;
    for (i, &ri) in run.iter().enumerate() {
        if ca[i] == 0.0 {
            continue;
        }
        for (j, &rj) in run.iter().enumerate() {
            if cb[j] != 0.0 {
                acc += ca[i] * cb[j] * values[ri * 7 + rj];
            }
        }
    }
    acc / s.powi((a + b) as i32)
}

/// Per-point derivative strengths from one 49-value stencil evaluation.
/// Returns `(richardson, run_h, run_h2)`, each holding the Frobenius norm of
/// the order-m tensor for m = 0..=order.
pub fn point_derivative_norms(
    values: &[f64; 49],
    h: f64,
    order: usize,
) -> ([f64; MAX_ORDER + 1], [f64; MAX_ORDER + 1], [f64; MAX_ORDER + 1]) {
    assert!(order <= MAX_ORDER);
    let mut rich = [0.0; MAX_ORDER + 1];
    let mut coarse = [0.0; MAX_ORDER + 1];
    let mut fine = [0.0; MAX_ORDER + 1];
    for m in 0..=order {
        let (mut sr, mut sc, mut sf) = (0.0, 0.0, 0.0);
        for a in 0..=m {
            let b = m - a;
            let dh = run_derivative(values, &RUN_H, h, a, b);
            let dh2 = run_derivative(values, &RUN_H2, h / 2.0, a, b);
            let dr = (4.0 * dh2 - dh) / 3.0;
            let w = BINOM[m][a];
            sr += w * dr * dr;
            sc += w * dh * dh;
            sf += w * dh2 * dh2;
        }
        rich[m] = sr.sqrt();
        coarse[m] = sc.sqrt();
        fine[m] = sf.sqrt();
    }
    (rich, coarse, fine)
}

/// Supremum derivative strengths of a function over a sphere grid.
#[derive(Clone, Debug)]
pub struct DerivativeProfile {
    /// sup_p |D^m f(p)| for m = 0..=order (Richardson-extrapolated).
    pub order_sups: Vec<f64>,
    /// Set when the h and h/2 stencil runs disagree by more than 10% on a
    /// significant order: the function varies too fast for the step used.
    pub resolution_warning: bool,
}

impl DerivativeProfile {
    /// C^k norm: Σ_{m ≤ k} sup|D^m f|.
    pub fn ck_norm(&self, k: usize) -> f64 {
        assert!(k < self.order_sups.len());
        self.order_sups[..=k].iter().sum()
    }

    pub fn order(&self) -> usize {
        self.order_sups.len() - 1
    }
}

/// Measure sup-derivative strengths of `f(·, t)` over `grid` with step `h`.
pub fn derivative_profile(
    f: &Observable,
    t: f64,
    order: usize,
    grid: &[SpherePoint],
    h: f64,
) -> DerivativeProfile {
    assert!(order <= MAX_ORDER && !grid.is_empty() && h > 0.0);
    let per_point: Vec<_> = grid
        .par_iter()
        .map(|p| {
            let pts = stencil_points(p, h);
            let mut values = [0.0f64; 49];
            for (v, q) in values.iter_mut().zip(&pts) {
                *v = f.value(q, t);
            }
            point_derivative_norms(&values, h, order)
        })
        .collect();
    profile_from_point_norms(&per_point, order)
}

/// Same as `derivative_profile` but for values supplied by the caller:
/// `values[i]` is the 49-entry stencil evaluation around `grid[i]` (as laid
/// out by `stencil_points`). Used when evaluations are expensive and cached,
/// e.g. pull-backs through numerically inverted flows.
pub fn derivative_profile_from_values(
    values: &[[f64; 49]],
    order: usize,
    h: f64,
) -> DerivativeProfile {
    let per_point: Vec<_> = values
        .par_iter()
        .map(|v| point_derivative_norms(v, h, order))
        .collect();
    profile_from_point_norms(&per_point, order)
}

fn profile_from_point_norms(
    per_point: &[([f64; MAX_ORDER + 1], [f64; MAX_ORDER + 1], [f64; MAX_ORDER + 1])],
    order: usize,
) -> DerivativeProfile {
    let mut rich = vec![0.0f64; order + 1];
    let mut coarse = vec![0.0f64; order + 1];
    let mut fine = vec![0.0f64; order + 1];
    for (r, c, f) in per_point {
        for m in 0..=order {
            rich[m] = rich[m].max(r[m]);
            coarse[m] = coarse[m].max(c[m]);
            fine[m] = fine[m].max(f[m]);
        }
    }
    let floor = 1e-8 * rich[0].max(1.0);
    let mut warning = false;
    for m in 1..=order {
        let hi = coarse[m].max(fine[m]);
        if hi > floor && (coarse[m] - fine[m]).abs() > 0.1 * hi {
            warning = true;
        }
    }
    DerivativeProfile { order_sups: rich, resolution_warning: warning }
}

/// |f,g|_N = Σ_{j=0}^N |f|_j·|g|_{N−j} from precomputed profiles.
pub fn combined_norm(pf: &DerivativeProfile, pg: &DerivativeProfile, n: usize) -> f64 {
    assert!(n <= pf.order() && n <= pg.order());
    (0..=n).map(|j| pf.ck_norm(j) * pg.ck_norm(n - j)).sum()
}

/// |f,g|_{1,3} = |f|₁|g|₃ + |f|₂|g|₂ + |f|₃|g|₁.
pub fn combined_norm_13(pf: &DerivativeProfile, pg: &DerivativeProfile) -> f64 {
    pf.ck_norm(1) * pg.ck_norm(3) + pf.ck_norm(2) * pg.ck_norm(2) + pf.ck_norm(3) * pg.ck_norm(1)
}

/// Evaluation grid for norm measurements: a global quasi-uniform cover plus
/// concentrated samples on the supplied supports (thin ramps dominate high
/// derivatives and need local coverage).
pub fn norm_grid(global_points: usize, supports: &[Cap]) -> Vec<SpherePoint> {
    let mut grid = crate::geom::fibonacci_grid(global_points);
    for cap in supports {
        grid.extend(crate::flow::cap_samples(cap, 72, 12));
    }
    grid
}
