//! Collision-kernel models and the truncation geometry.
//!
//! A kernel factors as `B(|q|, cos theta, z) = Phi(|q|) b0sym(cos theta) lambda(z)`.
//! The angular part is always used in its symmetrized form, which is supported
//! on `cos theta >= 0`. The random factor multiplies the whole operator, which
//! is what lets the gPC triple-product tensor absorb all `z`-dependence.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Truncation geometry: velocity box `[-L, L]^d`, collision ball `B_R`, and
/// the lattice half-width `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dim: usize,
    /// `L`
    pub half_width: f64,
    /// `R`
    pub radius: f64,
    /// `N`
    pub modes: usize,
}

/// `(3 + sqrt 2) / 2`, the smallest admissible `L / S` when `R = 2S`.
pub const SUPPORT_WIDTH_FACTOR: f64 = 2.207_106_781_186_547_5;

impl Domain {
    pub fn new(dim: usize, half_width: f64, radius: f64, modes: usize) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::Unsupported(format!("velocity dimension {dim}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Geometry(format!("need R > 0, got R = {radius}")));
        }
        if !(half_width >= radius) {
            return Err(Error::Geometry(format!(
                "need L >= R, got L = {half_width}, R = {radius}"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            radius,
            modes,
        })
    }

    /// Geometry for data supported in `B_S`: `R = 2S` and
    /// `L = (3 + sqrt 2)/2 * S` unless a wider `L` is given.
    pub fn from_support(
        dim: usize,
        support: f64,
        half_width: Option<f64>,
        modes: usize,
    ) -> Result<Self> {
        if !(support > 0.0) {
            return Err(Error::Geometry(format!("need S > 0, got {support}")));
        }
        let min_l = SUPPORT_WIDTH_FACTOR * support;
        let half_width = half_width.unwrap_or(min_l);
        if half_width < min_l * (1.0 - 1e-14) {
            return Err(Error::Geometry(format!(
                "need L >= (3+sqrt2)/2 S = {min_l}, got L = {half_width}"
            )));
        }
        Self::new(dim, half_width, 2.0 * support, modes)
    }

    pub fn with_modes(&self, modes: usize) -> Self {
        Self { modes, ..*self }
    }

    /// Fundamental wavenumber `pi / L`.
    pub fn wavenumber(&self) -> f64 {
        PI / self.half_width
    }

    /// `(2L)^d`
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Number of lattice modes, `(2N + 1)^d`.
    pub fn lattice_len(&self) -> usize {
        (2 * self.modes + 1).pow(self.dim as u32)
    }
}

/// Surface measure of the unit sphere `S^(d-1)`.
pub fn sphere_measure(dim: usize) -> f64 {
    match dim {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KineticForm {
    /// `|q|^gamma`, `0 <= gamma <= 1`.
    HardPower { gamma: f64 },
    /// `(1 + |q|)^gamma`, `-d < gamma < 0`.
    ModifiedSoft { gamma: f64 },
}

impl KineticForm {
    pub fn is_constant(&self) -> bool {
        matches!(self, KineticForm::HardPower { gamma } if *gamma == 0.0)
    }
}

/// Unsymmetrized angular base `b0(cos theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AngularBase {
    Constant(f64),
    /// Piecewise-linear table of `(cos theta, b0)` pairs covering `[-1, 1]`.
    Tabulated(Vec<(f64, f64)>),
}

impl AngularBase {
    /// `1 / |S^(d-1)|`, so the base integrates to one over the sphere.
    pub fn normalized(dim: usize) -> Self {
        AngularBase::Constant(1.0 / sphere_measure(dim))
    }

    pub fn eval(&self, c: f64) -> f64 {
        match self {
            AngularBase::Constant(v) => *v,
            AngularBase::Tabulated(table) => {
                let pos = table.partition_point(|&(x, _)| x < c);
                if pos == 0 {
                    return table[0].1;
                }
                if pos == table.len() {
                    return table[table.len() - 1].1;
                }
                let (x0, y0) = table[pos - 1];
                let (x1, y1) = table[pos];
                if x1 == x0 {
                    y1
                } else {
                    y0 + (y1 - y0) * (c - x0) / (x1 - x0)
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            AngularBase::Constant(v) if v.is_finite() && *v >= 0.0 => Ok(()),
            AngularBase::Constant(v) => Err(Error::AssumptionViolation(format!(
                "angular base must be finite and nonnegative, got {v}"
            ))),
            AngularBase::Tabulated(table) => {
                if table.len() < 2 {
                    return Err(Error::AssumptionViolation(
                        "tabulated angular base needs at least two points".into(),
                    ));
                }
                if !table.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(Error::AssumptionViolation(
                        "tabulated angular base must have increasing cos(theta)".into(),
                    ));
                }
                if table[0].0 > -1.0 || table[table.len() - 1].0 < 1.0 {
                    return Err(Error::AssumptionViolation(
                        "tabulated angular base must cover [-1, 1]".into(),
                    ));
                }
                if table.iter().any(|&(_, v)| !(v.is_finite() && v >= 0.0)) {
                    return Err(Error::AssumptionViolation(
                        "tabulated angular base must be finite and nonnegative".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `lambda(z)` multiplying the angular kernel.
#[derive(Clone)]
pub enum RandomFactor {
    Constant,
    /// `1 + eps z`
    Affine { eps: f64 },
    Custom(ScalarFn),
}

impl fmt::Debug for RandomFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandomFactor::Constant => write!(f, "Constant"),
            RandomFactor::Affine { eps } => write!(f, "Affine {{ eps: {eps} }}"),
            RandomFactor::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Finite-difference step for derivatives of a custom `lambda`.
const FD_STEP: f64 = 1e-4;

impl RandomFactor {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            RandomFactor::Constant => 1.0,
            RandomFactor::Affine { eps } => 1.0 + eps * z,
            RandomFactor::Custom(g) => g(z),
        }
    }

    /// `d^k lambda / dz^k`, exact for the closed forms and by central
    /// differences for `Custom`.
    pub fn derivative(&self, k: usize, z: f64) -> f64 {
        if k == 0 {
            return self.eval(z);
        }
        match self {
            RandomFactor::Constant => 0.0,
            RandomFactor::Affine { eps } => {
                if k == 1 {
                    *eps
                } else {
                    0.0
                }
            }
            RandomFactor::Custom(g) => {
                // Rounding error grows like eps / h^k, so orders above two
                // use a larger step.
                let h = FD_STEP.max(f64::EPSILON.powf(1.0 / (k as f64 + 2.0)));
                let mut acc = 0.0;
                let mut binom = 1.0;
                for j in 0..=k {
                    let offset = (k as f64 / 2.0 - j as f64) * h;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binom * g(z + offset);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                acc / h.powi(k as i32)
            }
        }
    }

    /// Polynomial degree when known, used to size the `z` quadrature.
    pub fn degree(&self) -> Option<usize> {
        match self {
            RandomFactor::Constant => Some(0),
            RandomFactor::Affine { .. } => Some(1),
            RandomFactor::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kinetic: KineticForm,
    pub angular: AngularBase,
    pub random_factor: RandomFactor,
    /// Must be true for solver use.
    pub symmetrized: bool,
    /// Collision truncation radius `R`.
    pub radius: f64,
}

impl KernelSpec {
    /// Maxwell molecules, `Phi = 1`, `b0 = 1 / |S^(d-1)|`, no randomness.
    pub fn maxwell(dim: usize, radius: f64) -> Self {
        Self {
            kinetic: KineticForm::HardPower { gamma: 0.0 },
            angular: AngularBase::normalized(dim),
            random_factor: RandomFactor::Constant,
            symmetrized: true,
            radius,
        }
    }

    pub fn with_random_factor(mut self, random_factor: RandomFactor) -> Self {
        self.random_factor = random_factor;
        self
    }

    pub fn is_maxwell(&self) -> bool {
        self.kinetic.is_constant() && matches!(self.angular, AngularBase::Constant(_))
    }

    /// Static parameter checks that do not need sampling.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.kinetic {
            KineticForm::HardPower { gamma } if !(0.0..=1.0).contains(&gamma) => {
                return Err(Error::AssumptionViolation(format!(
                    "hard power gamma must lie in [0, 1], got {gamma}"
                )))
            }
            KineticForm::ModifiedSoft { gamma } if !(gamma < 0.0 && gamma > -(dim as f64)) => {
                return Err(Error::AssumptionViolation(format!(
                    "modified soft gamma must lie in (-{dim}, 0), got {gamma}"
                )))
            }
            _ => {}
        }
        if !(self.radius > 0.0) {
            return Err(Error::AssumptionViolation(format!(
                "truncation radius must be positive, got {}",
                self.radius
            )));
        }
        self.angular.validate()
    }

    fn require_symmetrized(&self) -> Result<()> {
        if self.symmetrized {
            Ok(())
        } else {
            Err(Error::Usage(
                "angular kernel must be symmetrized before solver use".into(),
            ))
        }
    }
}

/// Kinetic part `Phi(|q|)`.
pub fn eval_phi(spec: &KernelSpec, q_mag: f64) -> Result<f64> {
    if !(q_mag >= 0.0) {
        return Err(Error::Domain(format!("|q| must be nonnegative, got {q_mag}")));
    }
    Ok(match spec.kinetic {
        KineticForm::HardPower { gamma } => {
            if gamma == 0.0 {
                1.0
            } else {
                q_mag.powf(gamma)
            }
        }
        KineticForm::ModifiedSoft { gamma } => (1.0 + q_mag).powf(gamma),
    })
}

/// `[b0(c) + b0(-c)] 1{c >= 0}`, the symmetrized angular base at `lambda = 1`.
pub fn b0_sym(angular: &AngularBase, cos_theta: f64) -> f64 {
    if cos_theta < 0.0 {
        0.0
    } else {
        angular.eval(cos_theta) + angular.eval(-cos_theta)
    }
}

/// Symmetrized angular kernel `lambda(z) [b0(c) + b0(-c)] 1{c >= 0}`.
pub fn eval_b_sym(spec: &KernelSpec, cos_theta: f64, z: f64) -> Result<f64> {
    spec.require_symmetrized()?;
    if !(-1.0..=1.0).contains(&cos_theta) {
        return Err(Error::Domain(format!("cos(theta) = {cos_theta} outside [-1, 1]")));
    }
    if !(-1.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [-1, 1]")));
    }
    Ok(spec.random_factor.eval(z) * b0_sym(&spec.angular, cos_theta))
}

/// Integral of `b0sym` over the sphere at `lambda = 1`.
pub fn sphere_integral(angular: &AngularBase, dim: usize, n: usize) -> Result<f64> {
    match dim {
        2 => {
            // sigma = rotation of q-hat by theta, support |theta| <= pi/2
            let (x, w) = gauss_legendre(n, -PI / 2.0, PI / 2.0)?;
            Ok(x.iter().zip(&w).map(|(t, w)| w * b0_sym(angular, t.cos())).sum())
        }
        3 => {
            let (x, w) = gauss_legendre(n, 0.0, 1.0)?;
            Ok(2.0 * PI * x.iter().zip(&w).map(|(c, w)| w * b0_sym(angular, *c)).sum::<f64>())
        }
        _ => Err(Error::Unsupported(format!("velocity dimension {dim}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// `sup_z` of the sphere integral of `b(., z)`.
    pub cutoff_integral: f64,
    /// Sampled `sup |d^k b / dz^k|` over `k <= r`.
    pub c_b: f64,
    /// `min` of sampled `b` on its support.
    pub positive: bool,
    pub min_b: f64,
}

/// Checks Grad's cutoff, positivity of `b` on its support and the uniform
/// bound on `z`-derivatives up to order `r`, sampling `n_samples` values of
/// `cos theta` and `z` each.
pub fn check_assumptions(
    spec: &KernelSpec,
    dim: usize,
    r: usize,
    n_samples: usize,
) -> Result<AssumptionReport> {
    spec.validate(dim)?;
    spec.require_symmetrized()?;
    let n_samples = n_samples.max(2);
    let base_integral = sphere_integral(&spec.angular, dim, n_samples.max(8))?;
    let zs: Vec<f64> = (0..n_samples)
        .map(|i| -1.0 + 2.0 * i as f64 / (n_samples - 1) as f64)
        .collect();
    // symmetrized support is cos(theta) in [0, 1]
    let cs: Vec<f64> = (0..n_samples)
        .map(|i| i as f64 / (n_samples - 1) as f64)
        .collect();
    let sup_b0 = cs
        .iter()
        .map(|&c| b0_sym(&spec.angular, c))
        .fold(0.0f64, f64::max);
    let min_b0 = cs
        .iter()
        .map(|&c| b0_sym(&spec.angular, c))
        .fold(f64::INFINITY, f64::min);

    let mut cutoff_integral = 0.0f64;
    let mut c_b = 0.0f64;
    let mut min_lambda = f64::INFINITY;
    for &z in &zs {
        let lam = spec.random_factor.eval(z);
        min_lambda = min_lambda.min(lam);
        cutoff_integral = cutoff_integral.max((lam * base_integral).abs());
        for k in 0..=r {
            let dk = spec.random_factor.derivative(k, z).abs();
            c_b = c_b.max(dk * sup_b0);
        }
    }
    if !cutoff_integral.is_finite() || !c_b.is_finite() {
        return Err(Error::AssumptionViolation(format!(
            "non-finite kernel bound (cutoff integral {cutoff_integral}, C_b {c_b})"
        )));
    }
    let min_b = min_lambda * min_b0;
    let positive = min_b > 0.0;
    if !positive {
        return Err(Error::AssumptionViolation(format!(
            "b must be positive on its support; sampled minimum {min_b} (min lambda {min_lambda})"
        )));
    }
    Ok(AssumptionReport {
        cutoff_integral,
        c_b,
        positive,
        min_b,
    })
}

/// Change-of-variables factor of the gain term: the Jacobian of
/// `v -> v'` is at least `2^-d` when `b` lives on `cos theta >= 0`.
pub fn gain_geometry_factor(dim: usize) -> f64 {
    2f64.powi(dim as i32)
}

/// Constant `C` in `||Q^R(g, f)||_p <= C ||g||_1 ||f||_p`: the gain term
/// contributes `gain_geometry_factor^{1/p} B Phi_sup`, the loss term
/// `B Phi_sup`, with `B = sup_z` of the sphere integral of `b(., z)`.
pub fn bilinear_bound(spec: &KernelSpec, dim: usize, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Usage(format!("norm exponent p = {p} must be at least 1")));
    }
    let b = check_assumptions(spec, dim, 0, 257)?.cutoff_integral;
    let phi = phi_sup(spec);
    Ok((gain_geometry_factor(dim).powf(1.0 / p) + 1.0) * b * phi)
}

/// `sup_{|q| <= R} Phi(|q|)`.
pub fn phi_sup(spec: &KernelSpec) -> f64 {
    match spec.kinetic {
        KineticForm::HardPower { gamma } => {
            if gamma == 0.0 {
                1.0
            } else {
                spec.radius.powf(gamma)
            }
        }
        KineticForm::ModifiedSoft { .. } => 1.0,
    }
}
