//! Reference computations independent of the weight table: direct
//! physical-space quadrature of the truncated collision operator, and the
//! two-dimensional BKW solution for Maxwell molecules.

use std::borrow::Borrow;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{b0_sym, eval_phi, Domain, KernelSpec};
use crate::quadrature::QuadratureRule;
use crate::spectral::field::SpectralField;
use num_complex::Complex64;

/// Largest accepted BKW residual.
pub const BKW_TOLERANCE: f64 = 1e-4;

/// Largest BKW mass allowed outside the velocity support.
pub const BKW_TAIL_TOLERANCE: f64 = 1e-12;

/// Finite-difference step in time used by [`verify_bkw`].
pub const BKW_FD_STEP: f64 = 1e-4;

/// Wrap `x` into `[-L, L)`.
#[inline]
fn wrap(x: f64, half_width: f64) -> f64 {
    let period = 2.0 * half_width;
    x - period * ((x + half_width) / period).floor()
}

/// Direct quadrature of `Q^R(g, f)` at each point, with post-collisional
/// velocities `v' = v - (q - |q| sigma)/2`, `v'_* = v - (q + |q| sigma)/2`
/// and periodic wrapping of every argument into the box.
pub fn direct_qr_bilinear<G, F>(
    g: G,
    f: F,
    spec: &KernelSpec,
    z: f64,
    points: &[Vec<f64>],
    domain: &Domain,
    quad: &QuadratureRule,
) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> f64 + Sync,
    F: Fn(&[f64]) -> f64 + Sync,
{
    if domain.dim != 2 {
        return Err(Error::Unsupported(format!("direct quadrature for d = {}", domain.dim)));
    }
    let lam = spec.random_factor.eval(z);
    let radial: Vec<(f64, f64)> = quad
        .radial_nodes
        .iter()
        .zip(&quad.radial_weights)
        .filter(|(&r, _)| r <= spec.radius)
        .map(|(&r, &w)| Ok((r, w * eval_phi(spec, r)? * quad.angular_weight)))
        .collect::<Result<_>>()?;
    let polar: Vec<(f64, f64, f64)> = quad
        .polar_nodes
        .iter()
        .zip(&quad.polar_weights)
        .map(|(&t, &w)| (t.cos(), t.sin(), w * b0_sym(&spec.angular, t.cos())))
        .collect();
    let phis: Vec<(f64, f64)> = quad.angular_nodes.iter().map(|a| (a.cos(), a.sin())).collect();
    let hw = domain.half_width;

    Ok(points
        .par_iter()
        .map(|v| {
            let fv = f(&[wrap(v[0], hw), wrap(v[1], hw)]);
            let mut total = 0.0;
            for &(r, wr) in &radial {
                for &(cp, sp) in &phis {
                    let q = [r * cp, r * sp];
                    let loss = g(&[wrap(v[0] - q[0], hw), wrap(v[1] - q[1], hw)]) * fv;
                    let mut acc = 0.0;
                    for &(ct, st, wb) in &polar {
                        // sigma is q-hat rotated by theta
                        let rs = [r * (cp * ct - sp * st), r * (sp * ct + cp * st)];
                        let vs = [
                            wrap(v[0] - 0.5 * (q[0] + rs[0]), hw),
                            wrap(v[1] - 0.5 * (q[1] + rs[1]), hw),
                        ];
                        let vp = [
                            wrap(v[0] - 0.5 * (q[0] - rs[0]), hw),
                            wrap(v[1] - 0.5 * (q[1] - rs[1]), hw),
                        ];
                        acc += wb * (g(&vs) * f(&vp) - loss);
                    }
                    total += wr * acc;
                }
            }
            lam * total
        })
        .collect())
}

/// `Q^R(f, f)` at each point.
pub fn direct_qr<F>(
    f: F,
    spec: &KernelSpec,
    z: f64,
    points: &[Vec<f64>],
    domain: &Domain,
    quad: &QuadratureRule,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    direct_qr_bilinear(&f, &f, spec, z, points, domain, quad)
}

/// Real-valued pointwise evaluator for a spectral field.
pub fn field_function<B>(field: B) -> impl Fn(&[f64]) -> f64 + Send + Sync
where
    B: Borrow<SpectralField> + Send + Sync,
{
    move |v: &[f64]| {
        let field = field.borrow();
        thread_local! {
            static SCRATCH: std::cell::RefCell<Option<crate::spectral::field::EvalScratch>> =
                const { std::cell::RefCell::new(None) };
        }
        SCRATCH.with(|cell| {
            let mut slot = cell.borrow_mut();
            let scratch = match slot.as_mut() {
                Some(s) if s.fits(&field.domain) => s,
                _ => slot.insert(crate::spectral::field::EvalScratch::new(&field.domain)),
            };
            scratch.eval(field, v).re
        })
    }
}

/// Parameters of the BKW family
/// `f(t, v) = rho / (2 pi K^2 T) exp(-w^2 / 2K) (2K - 1 + (1 - K) w^2 / 2K)`,
/// `w = v / sqrt(T)`, `K(t) = 1 - (1 - k0) exp(-Lambda rho t / 8)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BkwParams {
    pub mass: f64,
    pub temperature: f64,
    /// `K(0)`, in `[1/2, 1)` for a nonnegative profile.
    pub k0: f64,
    /// `Lambda`, the integral of the symmetrized angular kernel over the circle.
    pub cross_section: f64,
}

impl Default for BkwParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            temperature: 1.0,
            k0: 0.6,
            cross_section: 1.0,
        }
    }
}

impl BkwParams {
    /// Parameters matching a Maxwell kernel `b0 = c` (so `Lambda = 2 pi c`).
    pub fn for_kernel(spec: &KernelSpec, k0: f64) -> Result<Self> {
        if !spec.is_maxwell() {
            return Err(Error::Unsupported("BKW needs a constant Maxwell kernel".into()));
        }
        let lambda = crate::kernel::sphere_integral(&spec.angular, 2, 16)?;
        Ok(Self {
            k0,
            cross_section: lambda,
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k0 >= 0.5 && self.k0 < 1.0) {
            return Err(Error::Reference(format!("BKW needs 1/2 <= K(0) < 1, got {}", self.k0)));
        }
        if !(self.mass > 0.0 && self.temperature > 0.0 && self.cross_section > 0.0) {
            return Err(Error::Reference("BKW mass, temperature and cross-section must be positive".into()));
        }
        Ok(())
    }

    /// Internal width `K(t)`.
    pub fn k(&self, t: f64) -> f64 {
        1.0 - (1.0 - self.k0) * (-self.cross_section * self.mass * t / 8.0).exp()
    }
}

/// BKW profile at time `t` and velocity `v` (d = 2).
pub fn bkw(t: f64, v: &[f64], p: &BkwParams) -> f64 {
    let k = p.k(t);
    let w2 = (v[0] * v[0] + v[1] * v[1]) / p.temperature;
    p.mass / (2.0 * PI * k * k * p.temperature)
        * (-w2 / (2.0 * k)).exp()
        * (2.0 * k - 1.0 + (1.0 - k) * w2 / (2.0 * k))
}

/// Fourier transform `int f(t, v) exp(-i xi.v) dv` of the BKW profile.
pub fn bkw_fourier(t: f64, xi: &[f64], p: &BkwParams) -> f64 {
    let k = p.k(t);
    let s = p.temperature * (xi[0] * xi[0] + xi[1] * xi[1]);
    p.mass * (-k * s / 2.0).exp() * (1.0 - (1.0 - k) * s / 2.0)
}

/// Galerkin coefficients of the BKW profile on `domain`, from the closed-form
/// transform. The tail outside the box is neglected.
pub fn bkw_coefficients(t: f64, p: &BkwParams, domain: &Domain) -> SpectralField {
    let lat = crate::spectral::lattice::Lattice::of(domain);
    let kappa = domain.wavenumber();
    let vol = domain.volume();
    let coeffs = lat
        .iter()
        .map(|n| {
            let xi = [kappa * n[0] as f64, kappa * n[1] as f64];
            Complex64::new(bkw_fourier(t, &xi, p) / vol, 0.0)
        })
        .collect();
    SpectralField {
        domain: *domain,
        coeffs,
        real_valued: true,
    }
}

/// Sample velocities for residual checks: a polar grid of radius 3.
pub fn bkw_sample_points() -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0, 0.0]];
    for i in 1..=4 {
        let r = 0.75 * i as f64;
        for j in 0..3 {
            let a = 0.3 + j as f64 * 2.0 * PI / 3.0;
            pts.push(vec![r * a.cos(), r * a.sin()]);
        }
    }
    pts
}

/// `max |d_t f - Q^R(f, f)|` over `times` and [`bkw_sample_points`], with a
/// central difference of step [`BKW_FD_STEP`] in time.
pub fn verify_bkw(
    p: &BkwParams,
    spec: &KernelSpec,
    domain: &Domain,
    times: &[f64],
    quad: &QuadratureRule,
) -> Result<f64> {
    p.validate()?;
    let points = bkw_sample_points();
    let h = BKW_FD_STEP;
    let mut worst = 0.0f64;
    for &t in times {
        let q = direct_qr(|v: &[f64]| bkw(t, v, p), spec, 0.0, &points, domain, quad)?;
        for (v, qv) in points.iter().zip(q) {
            let dt = (bkw(t + h, v, p) - bkw(t - h, v, p)) / (2.0 * h);
            worst = worst.max((dt - qv).abs());
        }
    }
    Ok(worst)
}

/// Mass of the BKW solution outside the ball of radius `s`.
pub fn bkw_tail_mass(t: f64, s: f64, p: &BkwParams) -> f64 {
    let k = p.k(t);
    let u = s * s / (2.0 * k * p.temperature);
    p.mass * (-u).exp() * (k + (1.0 - k) * u) / k
}

/// [`verify_bkw`] with the acceptance threshold applied. Also rejects
/// parameters whose mass outside `B_{R/2}` exceeds [`BKW_TAIL_TOLERANCE`] at
/// any of `times`, since the truncated problem then differs from the
/// whole-space one.
pub fn accept_bkw(
    p: &BkwParams,
    spec: &KernelSpec,
    domain: &Domain,
    times: &[f64],
    quad: &QuadratureRule,
) -> Result<f64> {
    p.validate()?;
    let support = 0.5 * domain.radius;
    for &t in times {
        let tail = bkw_tail_mass(t, support, p);
        if tail > BKW_TAIL_TOLERANCE {
            return Err(Error::Reference(format!(
                "BKW mass {tail:e} outside radius {support} at t={t}"
            )));
        }
    }
    let residual = verify_bkw(p, spec, domain, times, quad)?;
    if residual > BKW_TOLERANCE {
        return Err(Error::Reference(format!(
            "BKW residual {residual:e} above {BKW_TOLERANCE:e}"
        )));
    }
    Ok(residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::periodic_grid;
    use approx::assert_abs_diff_eq;

    fn grid_integral(f: impl Fn(&[f64]) -> f64, l: f64, m: usize) -> f64 {
        let xs = periodic_grid(l, m);
        let h = 2.0 * l / m as f64;
        let mut s = 0.0;
        for &x in &xs {
            for &y in &xs {
                s += f(&[x, y]);
            }
        }
        s * h * h
    }

    #[test]
    fn bkw_mass_energy_positivity() {
        let p = BkwParams::default();
        let l = 14.0;
        for t in [0.0, 0.5, 2.0, 10.0] {
            let mass = grid_integral(|v| bkw(t, v, &p), l, 200);
            let energy = grid_integral(|v| (v[0] * v[0] + v[1] * v[1]) * bkw(t, v, &p), l, 200);
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(energy, 2.0, epsilon = 1e-10);
            for x in periodic_grid(l, 60) {
                assert!(bkw(t, &[x, 0.3 * x], &p) >= 0.0);
            }
        }
    }

    #[test]
    fn bkw_fourier_matches_quadrature() {
        let p = BkwParams {
            mass: 1.3,
            temperature: 0.8,
            ..Default::default()
        };
        let xi = [0.7, -0.4];
        let direct = grid_integral(|v| bkw(0.3, v, &p) * (xi[0] * v[0] + xi[1] * v[1]).cos(), 14.0, 200);
        assert_abs_diff_eq!(direct, bkw_fourier(0.3, &xi, &p), epsilon = 1e-11);
    }

    #[test]
    fn tail_mass_matches_quadrature() {
        let p = BkwParams {
            k0: 0.7,
            temperature: 0.6,
            ..Default::default()
        };
        let s = 2.0;
        let (rs, rw) = crate::quadrature::gauss_legendre(60, 0.0, s).unwrap();
        let inner: f64 = rs
            .iter()
            .zip(&rw)
            .map(|(&r, &w)| w * 2.0 * std::f64::consts::PI * r * bkw(0.4, &[r, 0.0], &p))
            .sum();
        assert_abs_diff_eq!(1.0 - inner, bkw_tail_mass(0.4, s, &p), epsilon = 1e-13);
        assert_abs_diff_eq!(bkw_tail_mass(0.4, 0.0, &p), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn wrap_into_box() {
        assert_abs_diff_eq!(wrap(3.5, 2.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap(-2.5, 2.0), 1.5, epsilon = 1e-15);
        assert_eq!(wrap(1.0, 2.0), 1.0);
    }

    #[test]
    fn constant_is_stationary() {
        let domain = Domain::new(2, 3.0, 1.0, 2).unwrap();
        let spec = KernelSpec::maxwell(2, 1.0);
        let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
        let pts = vec![vec![0.1, 0.2], vec![-2.9, 1.0]];
        let out = direct_qr(|_| 0.7, &spec, 0.0, &pts, &domain, &quad).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }
}
