//! Classical observables: time-dependent functions on the sphere with
//! optional analytic gradients and closed-form flows.

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::geom::{Cap, EquatorialChart, SpherePoint, SQRT2};

/// C^∞ step: 0 for t ≤ 0, 1 for t ≥ 1, built from e^{-1/t}.
pub fn smooth_step(t: f64) -> f64 {
    fn g(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-1.0 / t).exp()
        }
    }
    let a = g(t);
    let b = g(1.0 - t);
    if a == 0.0 {
        0.0
    } else if b == 0.0 {
        1.0
    } else {
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`]; identically 0 outside (0, 1).
pub fn smooth_step_deriv(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    let da = a / (t * t);
    let db = -b / ((1.0 - t) * (1.0 - t));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// C^∞ plateau on [a, b]: 0 outside (a, b), 1 on [ia, ib], monotone ramps in
/// between. Requires a < ia ≤ ib < b.
pub fn plateau(t: f64, a: f64, ia: f64, ib: f64, b: f64) -> f64 {
    debug_assert!(a < ia && ia <= ib && ib < b);
    smooth_step((t - a) / (ia - a)) * smooth_step((b - t) / (b - ib))
}

/// Closed-form flow attached to an observable (used to bypass numerical
/// integration where the Hamiltonian flow is a rigid rotation).
#[derive(Clone)]
pub enum FlowMap {
    /// Flow of f = c·⟨axis, x⟩: rotation about `axis` with angular velocity
    /// `rate` = −2c (sign fixed by the commutator canary, see `flow`).
    Rotation { axis: [f64; 3], rate: f64 },
    /// Rotation about `axis` by the accumulated angle `angle(t)` (with
    /// angle(0) = 0); the flow of a(t)·c·⟨axis, x⟩.
    RotationProfile { axis: [f64; 3], angle: Arc<dyn Fn(f64) -> f64 + Send + Sync> },
}

impl FlowMap {
    pub fn at(&self, t: f64, p: &SpherePoint) -> SpherePoint {
        match self {
            FlowMap::Rotation { axis, rate } => p.rotate(*axis, rate * t),
            FlowMap::RotationProfile { axis, angle } => p.rotate(*axis, angle(t)),
        }
    }

    /// Accumulated rotation angle at time t.
    pub fn angle_at(&self, t: f64) -> f64 {
        match self {
            FlowMap::Rotation { rate, .. } => rate * t,
            FlowMap::RotationProfile { angle, .. } => angle(t),
        }
    }

    pub fn axis(&self) -> [f64; 3] {
        match self {
            FlowMap::Rotation { axis, .. } | FlowMap::RotationProfile { axis, .. } => *axis,
        }
    }
}

type ValueFn = dyn Fn(&SpherePoint, f64) -> f64 + Send + Sync;
type GradFn = dyn Fn(&SpherePoint, f64) -> [f64; 3] + Send + Sync;

/// A time-dependent Hamiltonian/observable on the sphere.
///
/// `value(p, t)` is always available; `gradient` (ambient gradient, any
/// normal component is harmless) and `flow` are optional accelerations.
/// `autonomous` lets flow code reuse a single backward trajectory for
/// inverse images at several times.
#[derive(Clone)]
pub struct Observable {
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradFn>>,
    pub flow: Option<FlowMap>,
    pub support: Option<Cap>,
    pub autonomous: bool,
}

impl Observable {
    pub fn time_dependent(f: impl Fn(&SpherePoint, f64) -> f64 + Send + Sync + 'static) -> Self {
        Observable {
            value: Arc::new(f),
            gradient: None,
            flow: None,
            support: None,
            autonomous: false,
        }
    }

    pub fn autonomous(f: impl Fn(&SpherePoint) -> f64 + Send + Sync + 'static) -> Self {
        let mut o = Observable::time_dependent(move |p, _t| f(p));
        o.autonomous = true;
        o
    }

    pub fn with_gradient(
        mut self,
        g: impl Fn(&SpherePoint, f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }

    pub fn with_support(mut self, cap: Cap) -> Self {
        self.support = Some(cap);
        self
    }

    pub fn value(&self, p: &SpherePoint, t: f64) -> f64 {
        (self.value)(p, t)
    }

    pub fn analytic_gradient(&self, p: &SpherePoint, t: f64) -> Option<[f64; 3]> {
        self.gradient.as_ref().map(|g| g(p, t))
    }

    pub fn constant(c: f64) -> Self {
        let mut o = Observable::autonomous(move |_| c);
        o.flow = Some(FlowMap::Rotation { axis: [0.0, 0.0, 1.0], rate: 0.0 });
        o
    }

    /// f(x) = c·⟨axis, x⟩ for a unit axis; carries its exact flow (rotation
    /// about `axis` with angular velocity −2c).
    pub fn linear(axis: [f64; 3], c: f64) -> Self {
        let ax = crate::geom::normalize(axis);
        let mut o = Observable::autonomous(move |p| c * crate::geom::dot(ax, p.coords()))
            .with_gradient(move |_, _| [c * ax[0], c * ax[1], c * ax[2]]);
        o.flow = Some(FlowMap::Rotation { axis: ax, rate: -2.0 * c });
        o
    }

    /// Smooth cap bump: amplitude on the geodesic disk of radius `r_inner`
    /// around `center`, 0 outside radius `r_outer`. Carries its analytic
    /// gradient (the ramp is a radial profile in geodesic distance).
    pub fn cap_plateau(center: SpherePoint, r_inner: f64, r_outer: f64, amplitude: f64) -> Self {
        assert!(0.0 < r_inner && r_inner < r_outer && r_outer < std::f64::consts::PI);
        let width = r_outer - r_inner;
        Observable::autonomous(move |p| {
            let d = center.geodesic_angle(p);
            if d >= r_outer {
                0.0
            } else if d <= r_inner {
                amplitude
            } else {
                amplitude * smooth_step((r_outer - d) / width)
            }
        })
        .with_gradient(move |p, _| {
            let d = center.geodesic_angle(p);
            if d <= r_inner || d >= r_outer {
                return [0.0; 3];
            }
            // ∇_p arccos(c·p) = −c/√(1−(c·p)²) up to a normal component,
            // which tangent projection removes
            let cp = center.dot(p);
            let denom = (1.0 - cp * cp).sqrt().max(1e-12);
            let radial = -amplitude * smooth_step_deriv((r_outer - d) / width) / width;
            let s = -radial / denom;
            let c = center.coords();
            [s * c[0], s * c[1], s * c[2]]
        })
        .with_support(Cap { center, radius: r_outer })
    }

    /// Time-separable path a(t)·f with autonomous f. A rotation flow on the
    /// base survives as a rotation with reparametrized angle
    /// rate·∫₀ᵗ a(s) ds (512-interval Simpson per evaluation).
    pub fn separable(base: Observable, amp: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let inner = base.value.clone();
        let grad = base.gradient.clone();
        let amp = Arc::new(amp);
        let amp2 = amp.clone();
        let flow = match &base.flow {
            Some(FlowMap::Rotation { axis, rate }) => {
                let (axis, rate, amp) = (*axis, *rate, amp.clone());
                Some(FlowMap::RotationProfile {
                    axis,
                    angle: Arc::new(move |t: f64| {
                        let n = 512;
                        let h = t / n as f64;
                        let mut acc = amp(0.0) + amp(t);
                        for i in 1..n {
                            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                            acc += w * amp(i as f64 * h);
                        }
                        rate * acc * h / 3.0
                    }),
                })
            }
            _ => None,
        };
        Observable {
            value: Arc::new(move |p: &SpherePoint, t: f64| amp(t) * inner(p, 0.0)),
            gradient: grad.map(|g| {
                Arc::new(move |p: &SpherePoint, t: f64| {
                    let v = g(p, 0.0);
                    [amp2(t) * v[0], amp2(t) * v[1], amp2(t) * v[2]]
                }) as Arc<GradFn>
            }),
            flow,
            support: base.support,
            autonomous: false,
        }
    }
}

/// A Hamiltonian expressed in Darboux chart coordinates, supporting the
/// exact rescaling f_s(x) = s²·f̄(x/s).
#[derive(Clone)]
pub struct ChartHamiltonian {
    pub chart: EquatorialChart,
    kind: ChartKind,
}

#[derive(Clone)]
enum ChartKind {
    /// f̄ = a·x1 (globally the height function a·x3/√2); its flow translates
    /// x2 at speed −a uniformly on the chart band (ω = dx2∧dx1 in these
    /// coordinates, so x1 is the momentum conjugate to x2).
    Linear { a: f64 },
    General {
        f: Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>,
        support_radius: f64,
        autonomous: bool,
    },
}

impl ChartHamiltonian {
    /// The normal-form translation generator f̄ = a·x1.
    pub fn linear(chart: EquatorialChart, a: f64) -> Self {
        ChartHamiltonian { chart, kind: ChartKind::Linear { a } }
    }

    /// A general chart Hamiltonian; `f` must vanish for |u| ≥ support_radius
    /// (checked on a boundary ring).
    pub fn general(
        chart: EquatorialChart,
        f: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static,
        support_radius: f64,
    ) -> Result<Self> {
        ChartHamiltonian::general_inner(chart, Arc::new(f), support_radius, false)
    }

    /// A time-independent general chart Hamiltonian. Marking autonomy lets
    /// the quantum side propagate with a single exponential instead of
    /// re-quantizing the symbol along the path.
    pub fn general_static(
        chart: EquatorialChart,
        f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        support_radius: f64,
    ) -> Result<Self> {
        ChartHamiltonian::general_inner(chart, Arc::new(move |u, _t| f(u)), support_radius, true)
    }

    fn general_inner(
        chart: EquatorialChart,
        f: Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>,
        support_radius: f64,
        autonomous: bool,
    ) -> Result<Self> {
        if support_radius > chart.radius() {
            return Err(CoreError::ChartOverflow(format!(
                "support radius {support_radius} exceeds chart radius {}",
                chart.radius()
            )));
        }
        // the support must genuinely fit: sample a ring just inside the boundary
        for i in 0..64 {
            let ang = std::f64::consts::TAU * i as f64 / 64.0;
            let u = [0.999 * support_radius * ang.cos(), 0.999 * support_radius * ang.sin()];
            for t in [0.0, 0.5, 1.0] {
                if f(u, t).abs() > 1e-9 {
                    return Err(CoreError::ChartOverflow(
                        "chart Hamiltonian does not vanish at its declared support boundary".into(),
                    ));
                }
            }
        }
        Ok(ChartHamiltonian {
            chart,
            kind: ChartKind::General { f, support_radius, autonomous },
        })
    }

    /// f_s(x) = s²·f̄(x/s). Linear generators rescale exactly to s·a·x1;
    /// general ones contract their support (s ≤ 1 keeps it inside the chart).
    pub fn rescale(&self, s: f64) -> Result<Self> {
        if !(s > 1e-6 && s <= 1.0) {
            return Err(CoreError::InvalidArgument(format!("scale {s} outside (1e-6, 1]")));
        }
        let kind = match &self.kind {
            ChartKind::Linear { a } => ChartKind::Linear { a: s * a },
            ChartKind::General { f, support_radius, autonomous } => {
                let f = f.clone();
                let s2 = s * s;
                ChartKind::General {
                    f: Arc::new(move |u: [f64; 2], t: f64| s2 * f([u[0] / s, u[1] / s], t)),
                    support_radius: s * support_radius,
                    autonomous: *autonomous,
                }
            }
        };
        Ok(ChartHamiltonian { chart: self.chart, kind })
    }

    /// View as a global observable on the sphere.
    pub fn observable(&self) -> Observable {
        match &self.kind {
            ChartKind::Linear { a } => Observable::linear([0.0, 0.0, 1.0], a / SQRT2),
            ChartKind::General { f, support_radius, autonomous } => {
                let chart = self.chart;
                let f = f.clone();
                let sr = *support_radius;
                let center = chart.center();
                let mut o = Observable::time_dependent(move |p: &SpherePoint, t: f64| {
                    let u = chart.from_sphere(p);
                    if u[0] * u[0] + u[1] * u[1] >= sr * sr {
                        0.0
                    } else {
                        f(u, t)
                    }
                })
                .with_support(Cap { center, radius: SQRT2 * sr * 1.05 });
                o.autonomous = *autonomous;
                o
            }
        }
    }

    pub fn value_chart(&self, u: [f64; 2], t: f64) -> f64 {
        match &self.kind {
            ChartKind::Linear { a } => a * u[0],
            ChartKind::General { f, support_radius, .. } => {
                if u[0] * u[0] + u[1] * u[1] >= support_radius * support_radius {
                    0.0
                } else {
                    f(u, t)
                }
            }
        }
    }

    /// Signed translation speed of x2 for the linear normal form (−a).
    pub fn linear_speed(&self) -> Option<f64> {
        match self.kind {
            ChartKind::Linear { a } => Some(-a),
            _ => None,
        }
    }
}
