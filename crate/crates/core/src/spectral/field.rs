use num_complex::Complex64;
use rand::Rng;

use super::lattice::Lattice;
use crate::error::{Error, Result};
use crate::kernel::Domain;
use crate::quadrature::{periodic_grid, QuadratureRule};

/// Fourier coefficients of `f_N(v) = sum_n f_n exp(i pi n.v / L)` on the box
/// lattice of a [`Domain`].
///
/// Coefficients follow the normalized inner product
/// `<f, g> = (2L)^-d int f conj(g) dv`; the volume factor `(2L)^d` enters only
/// when converting to physical norms (see [`SpectralField::l2`]).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub domain: Domain,
    pub coeffs: Vec<Complex64>,
    /// Set when the field represents a real function, i.e. its coefficients
    /// are Hermitian-symmetric.
    pub real_valued: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub h1: f64,
    pub neg_l2: f64,
    pub neg_l1: f64,
}

impl SpectralField {
    pub fn zeros(domain: Domain, real_valued: bool) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); domain.lattice_len()],
            domain,
            real_valued,
        }
    }

    pub fn constant(domain: Domain, value: f64) -> Self {
        let mut f = Self::zeros(domain, true);
        let zero = f.lattice().zero_index();
        f.coeffs[zero] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_coeffs(domain: Domain, coeffs: Vec<Complex64>, real_valued: bool) -> Result<Self> {
        if coeffs.len() != domain.lattice_len() {
            return Err(Error::Usage(format!(
                "{} coefficients for a lattice of {}",
                coeffs.len(),
                domain.lattice_len()
            )));
        }
        Ok(Self {
            domain,
            coeffs,
            real_valued,
        })
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::of(&self.domain)
    }

    pub fn coeff(&self, n: &[i64]) -> Complex64 {
        self.lattice()
            .index(n)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    pub fn set_coeff(&mut self, n: &[i64], value: Complex64) {
        let idx = self.lattice().index(n).expect("mode outside lattice");
        self.coeffs[idx] = value;
    }

    /// `int_{D_L} f dv`, the real part of `(2L)^d f_0`.
    pub fn mass(&self) -> f64 {
        self.domain.volume() * self.coeffs[self.lattice().zero_index()].re
    }

    pub fn check_compatible(&self, other: &SpectralField) -> Result<()> {
        if self.domain != other.domain {
            return Err(Error::Usage(format!(
                "fields live on different domains: {:?} vs {:?}",
                self.domain, other.domain
            )));
        }
        Ok(())
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.domain, other.domain);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
        self.real_valued &= other.real_valued;
    }

    pub fn scale(&mut self, a: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `max_n |f_{-n} - conj(f_n)|` relative to `max_n |f_n|`.
    pub fn hermitian_defect(&self) -> f64 {
        let lat = self.lattice();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        (0..lat.len())
            .map(|i| (self.coeffs[lat.negated(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0f64, f64::max)
            / scale
    }

    /// Galerkin projection onto a smaller lattice, or zero-padding onto a
    /// larger one.
    pub fn resample(&self, modes: usize) -> Self {
        let domain = self.domain.with_modes(modes);
        let mut out = Self::zeros(domain, self.real_valued);
        let src = self.lattice();
        let dst = out.lattice();
        for (i, c) in self.coeffs.iter().enumerate() {
            if let Some(j) = dst.index(&src.multi_index(i)) {
                out.coeffs[j] = *c;
            }
        }
        out
    }

    /// Truncated Fourier sum at each point.
    pub fn evaluate(&self, points: &[Vec<f64>]) -> Vec<Complex64> {
        let mut scratch = EvalScratch::new(&self.domain);
        points.iter().map(|p| scratch.eval(self, p)).collect()
    }

    /// Field values on the uniform periodic grid with `m` points per axis,
    /// first axis slowest.
    pub fn grid_values(&self, m: usize) -> Vec<Complex64> {
        let side = self.lattice().side();
        let d = self.domain.dim;
        let kappa = self.domain.wavenumber();
        let n = self.domain.modes as i64;
        let xs = periodic_grid(self.domain.half_width, m);
        // synthesis matrix, m x side
        let synth: Vec<Complex64> = xs
            .iter()
            .flat_map(|&x| (-n..=n).map(move |k| Complex64::cis(kappa * k as f64 * x)))
            .collect();
        let mut data = self.coeffs.clone();
        let mut shape = vec![side; d];
        for axis in 0..d {
            data = contract_axis(&data, &shape, axis, &synth, m, side);
            shape[axis] = m;
        }
        data
    }

    /// L2 norm over `D_L` from Parseval: `(2L)^(d/2) (sum |f_n|^2)^(1/2)`.
    pub fn l2(&self) -> f64 {
        (self.domain.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `H^k` norm: `(sum_{|nu| <= k} ||d^nu f||_2^2)^(1/2)`, computed from the
    /// coefficients with weights `prod_i (pi n_i / L)^(2 nu_i)`.
    pub fn hk(&self, k: usize) -> f64 {
        let lat = self.lattice();
        let kappa = self.domain.wavenumber();
        let exps = derivative_multi_indices(self.domain.dim, k);
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let n = lat.multi_index(i);
            let weight: f64 = exps
                .iter()
                .map(|nu| {
                    nu.iter()
                        .zip(&n)
                        .map(|(&e, &ni)| (kappa * ni as f64).powi(2 * e as i32))
                        .product::<f64>()
                })
                .sum();
            acc += weight * c.norm_sqr();
        }
        (self.domain.volume() * acc).sqrt()
    }

    pub fn h1(&self) -> f64 {
        self.hk(1)
    }

    /// L1, L2, H1 and negative-part norms. Pointwise quantities are evaluated
    /// on a uniform grid with at least `4(2N+1)` points per axis.
    pub fn norms(&self, grid_m: usize) -> Norms {
        let m = grid_m.max(4 * (2 * self.domain.modes + 1));
        let values = self.grid_values(m);
        let cell = (2.0 * self.domain.half_width / m as f64).powi(self.domain.dim as i32);
        let mut l1 = 0.0;
        let mut neg1 = 0.0;
        let mut neg2 = 0.0;
        for v in &values {
            let re = v.re;
            l1 += v.norm();
            if re < 0.0 {
                neg1 -= re;
                neg2 += re * re;
            }
        }
        Norms {
            l1: l1 * cell,
            l2: self.l2(),
            h1: self.h1(),
            neg_l2: (neg2 * cell).sqrt(),
            neg_l1: neg1 * cell,
        }
    }

    /// Coefficients from samples on the uniform `m`-point grid:
    /// `f_n = m^-d sum_j f(v_j) exp(-i pi n.v_j / L)`.
    pub fn from_grid_samples(domain: Domain, m: usize, samples: &[f64]) -> Result<Self> {
        let d = domain.dim;
        if samples.len() != m.pow(d as u32) {
            return Err(Error::Usage(format!(
                "{} samples for a {m}^{d} grid",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::Input(format!("non-finite sample {bad}")));
        }
        let side = 2 * domain.modes + 1;
        let kappa = domain.wavenumber();
        let n = domain.modes as i64;
        let xs = periodic_grid(domain.half_width, m);
        // analysis matrix, side x m
        let analysis: Vec<Complex64> = (-n..=n)
            .flat_map(|k| {
                xs.iter()
                    .map(move |&x| Complex64::cis(-kappa * k as f64 * x) / m as f64)
            })
            .collect();
        let mut data: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        let mut shape = vec![m; d];
        for axis in 0..d {
            data = contract_axis(&data, &shape, axis, &analysis, side, m);
            shape[axis] = side;
        }
        Ok(Self {
            domain,
            coeffs: data,
            real_valued: true,
        })
    }
}

/// `(2L)^-d`-normalized projection of a real function onto the lattice, by
/// the uniform grid rule of `quad`.
pub fn project_initial<F>(f0: F, z: f64, domain: &Domain, quad: &QuadratureRule) -> Result<SpectralField>
where
    F: Fn(&[f64], f64) -> f64,
{
    let m = quad.grid_m;
    let samples = grid_samples(domain, m, |v| f0(v, z));
    SpectralField::from_grid_samples(*domain, m, &samples)
}

/// Samples of `f` on the uniform `m`-point grid over `[-L, L]^d`.
pub fn grid_samples<F: Fn(&[f64]) -> f64>(domain: &Domain, m: usize, f: F) -> Vec<f64> {
    let xs = periodic_grid(domain.half_width, m);
    let d = domain.dim;
    let total = m.pow(d as u32);
    let mut v = vec![0.0; d];
    (0..total)
        .map(|mut idx| {
            for slot in v.iter_mut().rev() {
                *slot = xs[idx % m];
                idx /= m;
            }
            f(&v)
        })
        .collect()
}

/// Uniform grid points in storage order.
pub fn grid_points(domain: &Domain, m: usize) -> Vec<Vec<f64>> {
    let xs = periodic_grid(domain.half_width, m);
    let d = domain.dim;
    (0..m.pow(d as u32))
        .map(|mut idx| {
            let mut v = vec![0.0; d];
            for slot in v.iter_mut().rev() {
                *slot = xs[idx % m];
                idx /= m;
            }
            v
        })
        .collect()
}

/// Apply `matrix` (`out_len x in_len`, row-major) along `axis`.
fn contract_axis(
    data: &[Complex64],
    shape: &[usize],
    axis: usize,
    matrix: &[Complex64],
    out_len: usize,
    in_len: usize,
) -> Vec<Complex64> {
    debug_assert_eq!(shape[axis], in_len);
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * out_len * inner];
    for o in 0..outer {
        for r in 0..out_len {
            let row = &matrix[r * in_len..(r + 1) * in_len];
            let dst = &mut out[(o * out_len + r) * inner..(o * out_len + r + 1) * inner];
            for (j, &a) in row.iter().enumerate() {
                let src = &data[(o * in_len + j) * inner..(o * in_len + j + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }
    out
}

/// Multi-indices `nu` with `|nu| <= k` in `dim` dimensions.
pub(crate) fn derivative_multi_indices(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::new();
        for prefix in &out {
            let used: usize = prefix.iter().sum();
            for e in 0..=(k - used) {
                let mut p = prefix.clone();
                p.push(e);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Reusable buffers for pointwise evaluation of fields on one domain.
pub(crate) struct EvalScratch {
    dim: usize,
    modes: usize,
    kappa: f64,
    /// per-axis `exp(i kappa n x_i)`, `n = -N..=N`
    phases: Vec<Complex64>,
    partial: Vec<Complex64>,
}

impl EvalScratch {
    pub(crate) fn new(domain: &Domain) -> Self {
        let side = 2 * domain.modes + 1;
        Self {
            dim: domain.dim,
            modes: domain.modes,
            kappa: domain.wavenumber(),
            phases: vec![Complex64::new(0.0, 0.0); side * domain.dim],
            partial: vec![Complex64::new(0.0, 0.0); side.pow(domain.dim.saturating_sub(1) as u32)],
        }
    }

    pub(crate) fn fits(&self, domain: &Domain) -> bool {
        self.dim == domain.dim && self.modes == domain.modes && self.kappa == domain.wavenumber()
    }

    pub(crate) fn eval(&mut self, field: &SpectralField, point: &[f64]) -> Complex64 {
        let side = 2 * self.modes + 1;
        let n = self.modes;
        for (axis, &x) in point.iter().enumerate().take(self.dim) {
            let row = &mut self.phases[axis * side..(axis + 1) * side];
            let base = Complex64::cis(self.kappa * x);
            row[n] = Complex64::new(1.0, 0.0);
            let mut p = Complex64::new(1.0, 0.0);
            for k in 1..=n {
                p *= base;
                row[n + k] = p;
                row[n - k] = p.conj();
            }
        }
        // contract the last axis first
        let last = &self.phases[(self.dim - 1) * side..self.dim * side];
        let rows = field.coeffs.len() / side;
        for r in 0..rows {
            let chunk = &field.coeffs[r * side..(r + 1) * side];
            self.partial[r] = chunk.iter().zip(last).map(|(c, e)| c * e).sum();
        }
        let mut len = rows;
        for axis in (0..self.dim - 1).rev() {
            let ph = &self.phases[axis * side..(axis + 1) * side];
            let rows = len / side;
            for r in 0..rows {
                let s: Complex64 = (0..side).map(|j| self.partial[r * side + j] * ph[j]).sum();
                self.partial[r] = s;
            }
            len = rows;
        }
        self.partial[0]
    }
}

/// Random real field with coefficients decaying like `exp(-decay |n|^2)`.
pub fn random_hermitian<R: Rng + ?Sized>(domain: Domain, rng: &mut R, decay: f64) -> SpectralField {
    let mut f = SpectralField::zeros(domain, true);
    let lat = f.lattice();
    for i in 0..lat.len() {
        let j = lat.negated(i);
        if j < i {
            continue;
        }
        let n = lat.multi_index(i);
        let n2: f64 = n.iter().map(|&c| (c * c) as f64).sum();
        let amp = (-decay * n2).exp();
        let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        if i == j {
            f.coeffs[i] = Complex64::new(c.re, 0.0);
        } else {
            f.coeffs[i] = c;
            f.coeffs[j] = c.conj();
        }
    }
    f
}
