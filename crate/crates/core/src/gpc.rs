//! Legendre chaos in the random variable `z ~ U(-1, 1)`: basis, Galerkin
//! tensor, coupled collision right-hand side, reconstruction and moments.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{Domain, RandomFactor};
use crate::quadrature::QuadratureRule;
use crate::spectral::field::{project_initial, SpectralField};
use crate::spectral::{symmetric_bilinear_rhs, WeightTable};

/// `Psi^k(z) = sqrt(2k + 1) P_k(z)`.
pub fn legendre_psi(k: usize, z: f64) -> f64 {
    psi_all(k, z)[k]
}

/// `[Psi^0(z), ..., Psi^order(z)]`.
pub fn psi_all(order: usize, z: f64) -> Vec<f64> {
    psi_derivatives(order, 0, z)
}

/// `d^j/dz^j Psi^k(z)` for `k = 0..=order`, from
/// `(k+1) P_{k+1}^(j) = (2k+1) (z P_k^(j) + j P_k^(j-1)) - k P_{k-1}^(j)`.
pub fn psi_derivatives(order: usize, j: usize, z: f64) -> Vec<f64> {
    // rows: derivative order 0..=j, columns: degree 0..=order
    let mut prev = vec![0.0; order + 1];
    for d in 0..=j {
        let mut cur = vec![0.0; order + 1];
        cur[0] = if d == 0 { 1.0 } else { 0.0 };
        if order >= 1 {
            cur[1] = match d {
                0 => z,
                1 => 1.0,
                _ => 0.0,
            };
        }
        for k in 1..order {
            let kf = k as f64;
            cur[k + 1] = ((2.0 * kf + 1.0) * (z * cur[k] + d as f64 * prev[k]) - kf * cur[k - 1])
                / (kf + 1.0);
        }
        prev = cur;
    }
    prev.iter()
        .enumerate()
        .map(|(k, p)| (2.0 * k as f64 + 1.0).sqrt() * p)
        .collect()
}

/// `S[k][i][j] = int lambda(z) Psi^k Psi^i Psi^j dz / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct STensor {
    pub order: usize,
    pub entries: Vec<f64>,
}

impl STensor {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.order + 1;
        self.entries[(k * n + i) * n + j]
    }
}

pub fn build_s_tensor(lambda: &RandomFactor, order: usize, quad: &QuadratureRule) -> Result<STensor> {
    if let Some(deg) = lambda.degree() {
        let need = (3 * order + deg + 1).div_ceil(2);
        if quad.z_nodes.len() < need {
            return Err(Error::Quadrature(format!(
                "n_z = {} cannot integrate degree {} exactly; need {need}",
                quad.z_nodes.len(),
                3 * order + deg
            )));
        }
    }
    let n = order + 1;
    let mut entries = vec![0.0; n * n * n];
    for (&z, &w) in quad.z_nodes.iter().zip(&quad.z_weights) {
        let psi = psi_all(order, z);
        let wl = w * lambda.eval(z);
        for k in 0..n {
            for i in 0..n {
                let a = wl * psi[k] * psi[i];
                for j in 0..n {
                    entries[(k * n + i) * n + j] += a * psi[j];
                }
            }
        }
    }
    Ok(STensor { order, entries })
}

/// gPC coefficients `F^0, ..., F^K`, each a field on the same lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcField {
    pub modes: Vec<SpectralField>,
}

impl GpcField {
    pub fn new(modes: Vec<SpectralField>) -> Result<Self> {
        let first = modes
            .first()
            .ok_or_else(|| Error::Usage("gPC field needs at least one mode".into()))?;
        for m in &modes[1..] {
            first.check_compatible(m)?;
        }
        Ok(Self { modes })
    }

    pub fn zeros(domain: Domain, order: usize) -> Self {
        Self {
            modes: vec![SpectralField::zeros(domain, true); order + 1],
        }
    }

    /// `z`-independent data: `F^0 = f`, higher modes zero.
    pub fn deterministic(f: SpectralField, order: usize) -> Self {
        let mut g = Self::zeros(f.domain, order);
        g.modes[0] = f;
        g
    }

    pub fn order(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn domain(&self) -> Domain {
        self.modes[0].domain
    }

    pub fn add_scaled(&mut self, a: f64, other: &GpcField) {
        for (m, o) in self.modes.iter_mut().zip(&other.modes) {
            m.add_scaled(a, o);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.modes.iter().all(SpectralField::is_finite)
    }

    /// `L^2` norm in `(v, z)`.
    pub fn l2(&self) -> f64 {
        self.modes.iter().map(|m| m.l2().powi(2)).sum::<f64>().sqrt()
    }

    /// Mass of every gPC coefficient.
    pub fn mode_masses(&self) -> Vec<f64> {
        self.modes.iter().map(SpectralField::mass).collect()
    }
}

/// Galerkin projection of `f0(v, z)` onto `Psi^0..Psi^order` with the `z` rule
/// of `quad`.
pub fn project_gpc<F>(f0: F, order: usize, domain: &Domain, quad: &QuadratureRule) -> Result<GpcField>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    let mut out = GpcField::zeros(*domain, order);
    for (&z, &w) in quad.z_nodes.iter().zip(&quad.z_weights) {
        let f = project_initial(&f0, z, domain, quad)?;
        let psi = psi_all(order, z);
        for (k, m) in out.modes.iter_mut().enumerate() {
            m.add_scaled(w * psi[k], &f);
        }
    }
    Ok(out)
}

/// `out^k = sum_{i,j} S[k][i][j] Q(F^i, F^j)`.
///
/// Each unordered pair is evaluated once as `Q(F^i, F^j) + Q(F^j, F^i)`;
/// contributions are summed in a fixed pair order.
pub fn gpc_collision_rhs(table: &WeightTable, s: &STensor, f: &GpcField) -> Result<GpcField> {
    if s.order != f.order() {
        return Err(Error::Usage(format!(
            "tensor order {} does not match field order {}",
            s.order,
            f.order()
        )));
    }
    let n = s.order + 1;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let zero_mode: Vec<bool> = f
        .modes
        .iter()
        .map(|m| m.coeffs.iter().all(|c| *c == Complex64::new(0.0, 0.0)))
        .collect();
    let products: Vec<Option<SpectralField>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            if zero_mode[i] || zero_mode[j] {
                return Ok(None);
            }
            let scale = if i == j { 0.5 } else { 1.0 };
            symmetric_bilinear_rhs(table, &f.modes[i], &f.modes[j], scale).map(Some)
        })
        .collect::<Result<_>>()?;
    let mut out = GpcField::zeros(f.domain(), s.order);
    for (k, o) in out.modes.iter_mut().enumerate() {
        for (&(i, j), prod) in pairs.iter().zip(&products) {
            if let Some(p) = prod {
                let c = s.get(k, i, j);
                if c != 0.0 {
                    o.add_scaled(c, p);
                }
            }
        }
    }
    Ok(out)
}

/// `sum_k Psi^k(z) F^k`.
pub fn reconstruct(f: &GpcField, z: f64) -> SpectralField {
    reconstruct_derivative(f, 0, z)
}

/// `d^j/dz^j` of the reconstruction at `z`.
pub fn reconstruct_derivative(f: &GpcField, j: usize, z: f64) -> SpectralField {
    let psi = psi_derivatives(f.order(), j, z);
    let mut out = SpectralField::zeros(f.domain(), f.modes.iter().all(|m| m.real_valued));
    for (m, p) in f.modes.iter().zip(psi) {
        if p != 0.0 {
            out.add_scaled(p, m);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GpcStatistics {
    pub mean: SpectralField,
    /// Pointwise variance on the `grid_m^d` grid, lexicographic order.
    pub variance: Vec<f64>,
    pub grid_m: usize,
}

pub fn statistics(f: &GpcField, grid_m: usize) -> GpcStatistics {
    let n = grid_m.pow(f.domain().dim as u32);
    let mut variance = vec![0.0; n];
    for m in &f.modes[1..] {
        for (v, x) in variance.iter_mut().zip(m.grid_values(grid_m)) {
            *v += x.norm_sqr();
        }
    }
    GpcStatistics {
        mean: f.modes[0].clone(),
        variance,
        grid_m,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use crate::quadrature::{gauss_legendre, QuadratureSizes};
    use crate::spectral::{collision_rhs, precompute_weights, random_hermitian};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn rule(domain: &Domain, n_z: usize) -> QuadratureRule {
        let sizes = QuadratureSizes {
            n_z: Some(n_z),
            ..Default::default()
        }
        .resolve(domain, 0);
        QuadratureRule::new(domain, sizes).unwrap()
    }

    fn small_domain() -> Domain {
        Domain::from_support(2, 1.0, None, 3).unwrap()
    }

    #[test]
    fn psi_values() {
        assert_eq!(legendre_psi(0, 0.37), 1.0);
        assert_abs_diff_eq!(legendre_psi(1, 0.5), 3f64.sqrt() * 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(legendre_psi(2, 0.5), 5f64.sqrt() * (-0.125), epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_to_round_off() {
        let (z, w) = gauss_legendre(10, -1.0, 1.0).unwrap();
        for i in 0..=8 {
            for j in 0..=8 {
                let s: f64 = z
                    .iter()
                    .zip(&w)
                    .map(|(&z, &w)| 0.5 * w * legendre_psi(i, z) * legendre_psi(j, z))
                    .sum();
                assert_abs_diff_eq!(s, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-5;
        for j in 1..=3 {
            let z = 0.31;
            let a = psi_derivatives(6, j, z);
            let lo = psi_derivatives(6, j - 1, z - h);
            let hi = psi_derivatives(6, j - 1, z + h);
            for k in 0..=6 {
                let fd = (hi[k] - lo[k]) / (2.0 * h);
                assert!((a[k] - fd).abs() < 1e-5 * (1.0 + a[k].abs()), "j={j} k={k}");
            }
        }
        // Psi^1 = sqrt 3 z has derivative sqrt 3 and nothing beyond
        assert_abs_diff_eq!(psi_derivatives(2, 1, 0.2)[1], 3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(psi_derivatives(2, 2, 0.2)[1], 0.0);
    }

    #[test]
    fn tensor_examples() {
        let d = small_domain();
        let s = build_s_tensor(&RandomFactor::Constant, 3, &rule(&d, 8)).unwrap();
        for i in 0..=3 {
            for j in 0..=3 {
                assert_abs_diff_eq!(s.get(0, i, j), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        let eps = 0.3;
        let s = build_s_tensor(&RandomFactor::Affine { eps }, 2, &rule(&d, 6)).unwrap();
        assert_abs_diff_eq!(s.get(0, 0, 1), eps / 3f64.sqrt(), epsilon = 1e-15);
        let sq = RandomFactor::Custom(Arc::new(|z: f64| z * z));
        let s = build_s_tensor(&sq, 2, &rule(&d, 6)).unwrap();
        assert_abs_diff_eq!(s.get(0, 0, 0), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn tensor_fully_symmetric() {
        let d = small_domain();
        let s = build_s_tensor(&RandomFactor::Affine { eps: 0.7 }, 5, &rule(&d, 12)).unwrap();
        for k in 0..=5 {
            for i in 0..=5 {
                for j in 0..=5 {
                    let v = s.get(k, i, j);
                    for w in [s.get(k, j, i), s.get(i, k, j), s.get(i, j, k), s.get(j, k, i), s.get(j, i, k)] {
                        assert!((v - w).abs() <= 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn under_resolved_tensor_rejected() {
        let d = small_domain();
        assert!(build_s_tensor(&RandomFactor::Affine { eps: 0.5 }, 4, &rule(&d, 3)).is_err());
    }

    fn setup() -> (WeightTable, QuadratureRule) {
        let d = small_domain();
        let spec = KernelSpec::maxwell(2, d.radius);
        let quad = rule(&d, 10);
        (precompute_weights(&spec, &d, &quad).unwrap(), quad)
    }

    #[test]
    fn order_zero_reduces_to_deterministic() {
        let (t, quad) = setup();
        let s = build_s_tensor(&RandomFactor::Constant, 0, &quad).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_hermitian(t.domain, &mut rng, 0.5);
        let g = gpc_collision_rhs(&t, &s, &GpcField::deterministic(f.clone(), 0)).unwrap();
        let q = collision_rhs(&t, &f).unwrap();
        for (a, b) in g.modes[0].coeffs.iter().zip(&q.coeffs) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn deterministic_data_stays_in_mode_zero() {
        let (t, quad) = setup();
        let s = build_s_tensor(&RandomFactor::Constant, 3, &quad).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_hermitian(t.domain, &mut rng, 0.5);
        let g = gpc_collision_rhs(&t, &s, &GpcField::deterministic(f.clone(), 3)).unwrap();
        let q = collision_rhs(&t, &f).unwrap();
        for (a, b) in g.modes[0].coeffs.iter().zip(&q.coeffs) {
            assert!((a - b).norm() < 1e-14);
        }
        for m in &g.modes[1..] {
            assert!(m.l2() < 1e-14);
        }
    }

    #[test]
    fn every_mode_conserves_mass() {
        let (t, quad) = setup();
        let s = build_s_tensor(&RandomFactor::Affine { eps: 0.4 }, 3, &quad).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = GpcField::new((0..4).map(|_| random_hermitian(t.domain, &mut rng, 0.5)).collect()).unwrap();
        let g = gpc_collision_rhs(&t, &s, &f).unwrap();
        for m in &g.modes {
            assert!(m.mass().abs() <= 1e-12 * f.l2().powi(2));
        }
        let wrong = build_s_tensor(&RandomFactor::Constant, 2, &quad).unwrap();
        assert!(matches!(gpc_collision_rhs(&t, &wrong, &f), Err(Error::Usage(_))));
    }

    #[test]
    fn reconstruct_examples_and_round_trip() {
        let (t, quad) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f0 = random_hermitian(t.domain, &mut rng, 0.5);
        let single = GpcField::deterministic(f0.clone(), 0);
        assert_eq!(reconstruct(&single, 0.3), f0);
        let mut lin = GpcField::deterministic(f0.clone(), 1);
        lin.modes[1] = f0.scaled(2.0);
        assert_eq!(reconstruct(&lin, 0.0).coeffs, f0.coeffs);

        let f = GpcField::new((0..4).map(|_| random_hermitian(t.domain, &mut rng, 0.5)).collect()).unwrap();
        for k in 0..4 {
            let mut back = SpectralField::zeros(t.domain, true);
            for (&z, &w) in quad.z_nodes.iter().zip(&quad.z_weights) {
                back.add_scaled(w * legendre_psi(k, z), &reconstruct(&f, z));
            }
            back.add_scaled(-1.0, &f.modes[k]);
            assert!(back.l2() < 1e-12);
        }
        let r = reconstruct(&f, 0.77);
        assert!(r.hermitian_defect() < 1e-12);
    }

    #[test]
    fn variance_matches_sample_variance() {
        let (t, _) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = GpcField::new((0..4).map(|_| random_hermitian(t.domain, &mut rng, 0.5)).collect()).unwrap();
        let m = 16;
        let stats = statistics(&f, m);
        let (z, w) = gauss_legendre(16, -1.0, 1.0).unwrap();
        let mean = stats.mean.grid_values(m);
        let mut sample = vec![0.0; m * m];
        for (&z, &w) in z.iter().zip(&w) {
            for ((s, x), mu) in sample.iter_mut().zip(reconstruct(&f, z).grid_values(m)).zip(&mean) {
                *s += 0.5 * w * (x - mu).norm_sqr();
            }
        }
        for (a, b) in stats.variance.iter().zip(&sample) {
            assert!((a - b).abs() < 1e-12 * (1.0 + b));
        }
        let det = statistics(&GpcField::deterministic(f.modes[0].clone(), 0), m);
        assert!(det.variance.iter().all(|&v| v == 0.0));
    }
}
