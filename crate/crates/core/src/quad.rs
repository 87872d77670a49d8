//! Product quadrature on the sphere for the measure μ with ∫dμ = 2π
//! (half the round area): Gauss–Legendre in z = cos θ times a uniform
//! longitude grid. Exact for integrands that are polynomial of degree
//! ≤ 2n−1 in z and trigonometric of frequency < n_phi in φ — which covers
//! the spin-basis Gram integrands exactly.

use crate::geom::SpherePoint;

/// Gauss–Legendre nodes (ascending) and weights on [−1, 1], by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // initial guess for the i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            // P'_n(x) = n·(x·P_n − P_{n−1})/(x²−1)
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

/// GL(z) × uniform(φ) product rule integrating against μ (total mass 2π).
#[derive(Clone, Debug)]
pub struct ProductQuadrature {
    /// z = cos θ nodes, ascending.
    pub cos_nodes: Vec<f64>,
    /// Gauss–Legendre weights for the z nodes (sum to 2).
    pub cos_weights: Vec<f64>,
    pub n_phi: usize,
}

impl ProductQuadrature {
    pub fn new(n_cos: usize, n_phi: usize) -> Self {
        assert!(n_cos >= 1 && n_phi >= 1);
        let (cos_nodes, cos_weights) = gauss_legendre(n_cos);
        ProductQuadrature { cos_nodes, cos_weights, n_phi }
    }

    pub fn n_cos(&self) -> usize {
        self.cos_nodes.len()
    }

    /// Weight of node (i, j): for dμ = ½·d(cosθ)·dφ the product weight is
    /// ½·w_i·(2π/n_phi), independent of j.
    pub fn node_weight(&self, i: usize) -> f64 {
        0.5 * self.cos_weights[i] * std::f64::consts::TAU / self.n_phi as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        std::f64::consts::TAU * j as f64 / self.n_phi as f64
    }

    pub fn node(&self, i: usize, j: usize) -> SpherePoint {
        SpherePoint::from_height_longitude(self.cos_nodes[i], self.phi(j))
            .expect("GL nodes lie strictly inside (−1, 1)")
    }

    /// ∫ f dμ over the whole sphere.
    pub fn integrate(&self, f: impl Fn(&SpherePoint) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_cos() {
            let wi = self.node_weight(i);
            let mut row = 0.0;
            for j in 0..self.n_phi {
                row += f(&self.node(i, j));
            }
            acc += wi * row;
        }
        acc
    }

    pub fn total_weight(&self) -> f64 {
        let s: f64 = self.cos_weights.iter().sum();
        0.5 * s * std::f64::consts::TAU
    }
}
