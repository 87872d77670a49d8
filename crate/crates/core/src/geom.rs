//! Points, rotations, charts and probe grids on the unit sphere.
//!
//! Phase space is S² ⊂ R³ carrying the symplectic form ω = ½·(round area
//! form), so the total symplectic volume is ∫ dμ = 2π. Geodesic distances
//! are round-metric arc lengths of the *unit* sphere throughout.

use crate::error::{CoreError, Result};

/// Total symplectic volume ∫_M dμ = 2π.
pub const TOTAL_VOLUME: f64 = std::f64::consts::TAU;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// A point of the unit sphere. Constructors keep the norm within 1e-12 of 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint([f64; 3]);

impl SpherePoint {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(CoreError::OffSphere((n - 1.0).abs()));
        }
        // Renormalize anyway so downstream arithmetic starts from the best float.
        Ok(SpherePoint([v[0] / n, v[1] / n, v[2] / n]))
    }

    /// Normalizes an arbitrary nonzero vector onto the sphere.
    pub fn project(v: [f64; 3]) -> Result<Self> {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n < 1e-300 {
            return Err(CoreError::OffSphere(1.0));
        }
        Ok(SpherePoint([v[0] / n, v[1] / n, v[2] / n]))
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn north() -> Self {
        SpherePoint([0.0, 0.0, 1.0])
    }

    pub fn south() -> Self {
        SpherePoint([0.0, 0.0, -1.0])
    }

    /// Point at latitude-height z and longitude phi.
    pub fn from_height_longitude(z: f64, phi: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&z) {
            return Err(CoreError::InvalidArgument(format!("height {z} outside [-1,1]")));
        }
        let r = (1.0 - z * z).max(0.0).sqrt();
        Ok(SpherePoint([r * phi.cos(), r * phi.sin(), z]))
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(self.0, other.0)
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint([-self.0[0], -self.0[1], -self.0[2]])
    }

    /// Geodesic distance = central angle, computed stably near 0 and π.
    pub fn geodesic_angle(&self, other: &SpherePoint) -> f64 {
        let c = cross(self.0, other.0);
        let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        s.atan2(self.dot(other))
    }

    /// Longitude in (-π, π].
    pub fn longitude(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }

    /// Rodrigues rotation about a unit axis.
    pub fn rotate(&self, axis: [f64; 3], angle: f64) -> SpherePoint {
        let (s, c) = angle.sin_cos();
        let k = axis;
        let v = self.0;
        let kv = cross(k, v);
        let kdv = dot(k, v);
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = v[i] * c + kv[i] * s + k[i] * kdv * (1.0 - c);
        }
        SpherePoint::project(out).expect("rotation preserves the sphere")
    }

    /// An orthonormal tangent frame (t1, t2) with t1 × t2 = p.
    pub fn tangent_frame(&self) -> ([f64; 3], [f64; 3]) {
        let p = self.0;
        // seed with the coordinate axis most transverse to p
        let a = if p[0].abs() <= p[1].abs() && p[0].abs() <= p[2].abs() {
            [1.0, 0.0, 0.0]
        } else if p[1].abs() <= p[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let t1 = normalize(cross(a, p));
        let t2 = cross(p, t1);
        (t1, t2)
    }

    /// Exponential map: geodesic from this point with initial tangent w (not
    /// necessarily unit). |w| is the arc length travelled.
    pub fn exp_map(&self, w: [f64; 3]) -> SpherePoint {
        let rho = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if rho < 1e-300 {
            return *self;
        }
        let (s, c) = rho.sin_cos();
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = c * self.0[i] + s * w[i] / rho;
        }
        SpherePoint::project(out).expect("exp map stays on the sphere")
    }
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Quasi-uniform probe grid: golden-angle (Fibonacci) spiral with n points.
pub fn fibonacci_grid(n: usize) -> Vec<SpherePoint> {
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let phi = std::f64::consts::TAU * (i as f64 / golden).fract();
        pts.push(SpherePoint::project([r * phi.cos(), r * phi.sin(), z]).unwrap());
    }
    pts
}

/// A closed geodesic cap, used for support hints and region probes.
#[derive(Clone, Copy, Debug)]
pub struct Cap {
    pub center: SpherePoint,
    pub radius: f64,
}

impl Cap {
    pub fn contains(&self, p: &SpherePoint) -> bool {
        self.center.geodesic_angle(p) <= self.radius
    }
}

/// Darboux chart around an equator point.
///
/// Coordinates (x1, x2) map to height z = √2·x1 and longitude
/// φ = φ0 + √2·x2; the pullback of ω is exactly dx1 ∧ dx2 (the cylindrical
/// projection is area preserving), so chart Lebesgue measure equals μ and
/// dilations x ↦ s·x scale symplectic area by s². The domain is the closed
/// disk |x| ≤ radius, which stays away from both poles by construction.
#[derive(Clone, Copy, Debug)]
pub struct EquatorialChart {
    center_longitude: f64,
    radius: f64,
}

/// Largest admissible chart radius: keeps |z| = √2·r ≤ 0.985 (pole clearance)
/// and √2·r < π (no longitude wrap).
pub const MAX_CHART_RADIUS: f64 = 0.6964;

impl EquatorialChart {
    pub fn new(center_longitude: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= MAX_CHART_RADIUS) {
            return Err(CoreError::ChartOverflow(format!(
                "chart radius {radius} outside (0, {MAX_CHART_RADIUS}]"
            )));
        }
        Ok(EquatorialChart { center_longitude, radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> SpherePoint {
        SpherePoint::from_height_longitude(0.0, self.center_longitude).unwrap()
    }

    /// Chart map. Valid on the whole band |√2·x1| < 1, which strictly
    /// contains the disk domain; evaluation outside the band is an error.
    pub fn to_sphere(&self, u: [f64; 2]) -> Result<SpherePoint> {
        let z = SQRT2 * u[0];
        if z.abs() >= 1.0 {
            return Err(CoreError::ChartOverflow(format!(
                "chart point ({}, {}) leaves the coordinate band",
                u[0], u[1]
            )));
        }
        let phi = self.center_longitude + SQRT2 * u[1];
        SpherePoint::from_height_longitude(z, phi)
    }

    /// Inverse chart map; longitude is wrapped to (-π, π] around the center.
    pub fn from_sphere(&self, p: &SpherePoint) -> [f64; 2] {
        let z = p.z();
        let mut dphi = p.longitude() - self.center_longitude;
        while dphi > std::f64::consts::PI {
            dphi -= std::f64::consts::TAU;
        }
        while dphi <= -std::f64::consts::PI {
            dphi += std::f64::consts::TAU;
        }
        [z / SQRT2, dphi / SQRT2]
    }

    pub fn contains(&self, u: [f64; 2]) -> bool {
        (u[0] * u[0] + u[1] * u[1]).sqrt() <= self.radius
    }
}
