//! Fixed integration rules: Gauss-Legendre on intervals, the uniform rule on
//! the circle, and the uniform periodic grid on the velocity box.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Domain;

/// Gauss-Legendre nodes and weights on `[a, b]`.
///
/// Nodes come from Newton iteration on the three-term recurrence, started
/// from the Chebyshev-like guess `cos(pi (i + 3/4) / (n + 1/2))`. The rule is
/// exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Quadrature("Gauss-Legendre needs n >= 1".into()));
    }
    if !(a < b) {
        return Err(Error::Quadrature(format!("empty interval [{a}, {b}]")));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = (n + 1) / 2;
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_and_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    let mid = 0.5 * (a + b);
    let half_len = 0.5 * (b - a);
    for (xi, wi) in x.iter_mut().zip(w.iter_mut()) {
        *xi = mid + half_len * *xi;
        *wi *= half_len;
    }
    Ok((x, w))
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Equispaced angles `2 pi j / n` with the common weight `2 pi / n`.
pub fn uniform_circle(n_theta: usize) -> Result<(Vec<f64>, f64)> {
    if n_theta < 4 {
        return Err(Error::Quadrature(format!(
            "circle rule needs at least 4 angles, got {n_theta}"
        )));
    }
    let h = 2.0 * PI / n_theta as f64;
    Ok(((0..n_theta).map(|j| j as f64 * h).collect(), h))
}

/// Quadrature sizes. `None` fields fall back to resolution-aware defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSizes {
    pub n_r: Option<usize>,
    pub n_theta: Option<usize>,
    pub n_z: Option<usize>,
    #[serde(rename = "grid_M")]
    pub grid_m: Option<usize>,
}

impl QuadratureSizes {
    /// Fill unset fields for a lattice of half-width `N` and gPC order `K`.
    ///
    /// Baselines are `n_r = n_theta = 32`, `n_z = 2K + 2`, `M = 4(2N + 1)`.
    /// The angular and radial counts grow with the largest phase the weight
    /// integrands reach, so high `N` does not silently under-resolve.
    pub fn resolve(&self, domain: &Domain, gpc_order: usize) -> ResolvedSizes {
        let kappa = PI / domain.half_width;
        let n = domain.modes as f64;
        let sqrt_d = (domain.dim as f64).sqrt();
        let theta_phase = PI * kappa * domain.radius * sqrt_d * n / 2.0;
        let radial_phase = kappa * domain.radius * 3.0 * sqrt_d * n / 2.0;
        ResolvedSizes {
            n_r: self
                .n_r
                .unwrap_or_else(|| 32.max((radial_phase / 4.0).ceil() as usize + 24)),
            n_theta: self
                .n_theta
                .unwrap_or_else(|| 32.max((theta_phase / 4.0).ceil() as usize + 24)),
            n_z: self.n_z.unwrap_or(2 * gpc_order + 2),
            grid_m: self.grid_m.unwrap_or(4 * (2 * domain.modes + 1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResolvedSizes {
    pub n_r: usize,
    pub n_theta: usize,
    pub n_z: usize,
    pub grid_m: usize,
}

/// All rules needed by one solver configuration.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub sizes: ResolvedSizes,
    /// Radial nodes on `[0, R]`.
    pub radial_nodes: Vec<f64>,
    /// Radial weights with the polar Jacobian `r^(d-1)` folded in.
    pub radial_weights: Vec<f64>,
    /// Uniform angles for the direction of `q`.
    pub angular_nodes: Vec<f64>,
    pub angular_weight: f64,
    /// Gauss-Legendre angles on `[-pi/2, pi/2]` measured from `q`, covering
    /// the support of the symmetrized angular kernel.
    pub polar_nodes: Vec<f64>,
    pub polar_weights: Vec<f64>,
    /// Gauss-Legendre nodes on `[-1, 1]` with the uniform density 1/2 folded in.
    pub z_nodes: Vec<f64>,
    pub z_weights: Vec<f64>,
    /// Points per dimension of the uniform grid on `[-L, L]^d`.
    pub grid_m: usize,
}

impl QuadratureRule {
    pub fn new(domain: &Domain, sizes: ResolvedSizes) -> Result<Self> {
        if sizes.grid_m < 2 * (2 * domain.modes + 1) {
            return Err(Error::Quadrature(format!(
                "grid size M = {} below anti-aliasing bound 2(2N+1) = {}",
                sizes.grid_m,
                2 * (2 * domain.modes + 1)
            )));
        }
        let (radial_nodes, mut radial_weights) = gauss_legendre(sizes.n_r, 0.0, domain.radius)?;
        for (w, r) in radial_weights.iter_mut().zip(&radial_nodes) {
            *w *= r.powi(domain.dim as i32 - 1);
        }
        let (angular_nodes, angular_weight) = uniform_circle(sizes.n_theta)?;
        let (polar_nodes, polar_weights) = gauss_legendre(sizes.n_theta, -PI / 2.0, PI / 2.0)?;
        let (z_nodes, mut z_weights) = gauss_legendre(sizes.n_z.max(1), -1.0, 1.0)?;
        z_weights.iter_mut().for_each(|w| *w *= 0.5);
        Ok(Self {
            sizes,
            radial_nodes,
            radial_weights,
            angular_nodes,
            angular_weight,
            polar_nodes,
            polar_weights,
            z_nodes,
            z_weights,
            grid_m: sizes.grid_m,
        })
    }

    /// Rule with default sizes for `domain` and gPC order `gpc_order`.
    pub fn for_domain(domain: &Domain, gpc_order: usize) -> Result<Self> {
        Self::new(domain, QuadratureSizes::default().resolve(domain, gpc_order))
    }

    /// Same rule with the radial and angular counts doubled.
    pub fn refined(&self, domain: &Domain) -> Result<Self> {
        let mut sizes = self.sizes;
        sizes.n_r *= 2;
        sizes.n_theta *= 2;
        Self::new(domain, sizes)
    }
}

/// Uniform periodic grid on `[-L, L]` with `m` points, starting at `-L`.
pub fn periodic_grid(half_width: f64, m: usize) -> Vec<f64> {
    let h = 2.0 * half_width / m as f64;
    (0..m).map(|j| -half_width + j as f64 * h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn midpoint_rule() {
        let (x, w) = gauss_legendre(1, -1.0, 1.0).unwrap();
        assert_eq!(x, vec![0.0]);
        assert_abs_diff_eq!(w[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_legendre(2, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(x[0], -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-15);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert_abs_diff_eq!(int, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_to_degree_nine() {
        let (x, w) = gauss_legendre(5, 0.0, 1.0).unwrap();
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_abs_diff_eq!(int, 1.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn high_order_weights_positive_and_sum() {
        for n in [7, 32, 64, 129] {
            let (x, w) = gauss_legendre(n, -2.0, 3.0).unwrap();
            assert!(w.iter().all(|&w| w > 0.0));
            assert_abs_diff_eq!(w.iter().sum::<f64>(), 5.0, epsilon = 1e-12);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre(3, 1.0, 1.0).is_err());
        assert!(uniform_circle(3).is_err());
    }

    #[test]
    fn circle_rule() {
        let (a, w) = uniform_circle(4).unwrap();
        assert_abs_diff_eq!(w * a.len() as f64, 2.0 * PI, epsilon = 1e-15);
        let (a, w) = uniform_circle(16).unwrap();
        let c2: f64 = a.iter().map(|t| w * t.cos().powi(2)).sum();
        assert_abs_diff_eq!(c2, PI, epsilon = 1e-14);
        let (a, w) = uniform_circle(8).unwrap();
        let c1: f64 = a.iter().map(|t| w * t.cos()).sum();
        assert_abs_diff_eq!(c1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rule_measures() {
        let domain = Domain::new(2, 3.0, 2.0, 4).unwrap();
        let rule = QuadratureRule::for_domain(&domain, 3).unwrap();
        let radial: f64 = rule.radial_weights.iter().sum();
        assert_abs_diff_eq!(radial, 2.0, epsilon = 1e-13); // R^2 / 2
        let z: f64 = rule.z_weights.iter().sum();
        assert_abs_diff_eq!(z, 1.0, epsilon = 1e-14);
        assert_eq!(rule.z_nodes.len(), 8);
        assert_eq!(rule.grid_m, 36);
        let polar: f64 = rule.polar_weights.iter().sum();
        assert_abs_diff_eq!(polar, PI, epsilon = 1e-13);
    }

    #[test]
    fn grid_below_alias_bound_rejected() {
        let domain = Domain::new(2, 3.0, 2.0, 4).unwrap();
        let sizes = QuadratureSizes {
            grid_m: Some(17),
            ..Default::default()
        }
        .resolve(&domain, 0);
        assert!(QuadratureRule::new(&domain, sizes).is_err());
    }
}
