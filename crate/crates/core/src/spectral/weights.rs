//! Collision weights `G(l, m)` of the direct Fourier-Galerkin sum.
//!
//! With `s = l + m` and `kappa = pi / L`, the weight is
//!
//! ```text
//! G(l, m) = int_{B_R} exp(-i kappa m.q)
//!           int_{S^1} Phi(|q|) b(sigma.q^) (exp(i kappa s.(q - |q| sigma) / 2) - 1) dsigma dq.
//! ```
//!
//! Writing `sigma` as `q^` rotated by `theta` and integrating the direction of
//! `q` in closed form gives, for `d = 2`,
//!
//! ```text
//! G(l, m) = 2 pi int_{-pi/2}^{pi/2} b(cos theta)
//!           [h(kappa |l - m - rot(-theta) s| / 2) - h(kappa |m|)] dtheta,
//! h(a)    = int_0^R r Phi(r) J0(a r) dr,
//! ```
//!
//! and `h(a) = R J1(a R) / a` for Maxwell molecules. Only the `theta` rule
//! (and the radial rule for non-constant `Phi`) remains numerical. The
//! bracket vanishes identically when `s = 0`, so `G(l, -l) = 0` holds to the
//! last bit, and the table is real with `G(-l, -m) = G(l, m)`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::lattice::Lattice;
use crate::error::{Error, Result};
use crate::kernel::{b0_sym, eval_phi, AngularBase, Domain, KernelSpec, KineticForm};
use crate::quadrature::{QuadratureRule, ResolvedSizes};

const MAGIC: &[u8; 4] = b"FGBW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub domain: Domain,
    /// `G(l, m)` at `entries[index(l) * P + index(m)]`, `P = (2N+1)^d`.
    pub entries: Vec<Complex64>,
    pub kernel_hash: [u8; 32],
    pub n_r: usize,
    pub n_theta: usize,
    /// Largest change of a sampled entry when the angular and radial rules
    /// are doubled.
    pub quad_tol: f64,
}

impl WeightTable {
    pub fn lattice(&self) -> Lattice {
        Lattice::of(&self.domain)
    }

    pub fn get(&self, l: &[i64], m: &[i64]) -> Option<Complex64> {
        let lat = self.lattice();
        Some(self.entries[lat.index(l)? * lat.len() + lat.index(m)?])
    }

    /// `max_l |G(l, -l)|`
    pub fn mass_residual(&self) -> f64 {
        let lat = self.lattice();
        let p = lat.len();
        (0..p)
            .map(|i| self.entries[i * p + lat.negated(i)].norm())
            .fold(0.0, f64::max)
    }

    /// `max |conj(G(l, m)) - G(-l, -m)|`
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.entries.len();
        (0..n)
            .map(|k| (self.entries[k].conj() - self.entries[n - 1 - k]).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.kernel_hash)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.domain.dim as u32).to_le_bytes())?;
        w.write_all(&(self.domain.modes as u32).to_le_bytes())?;
        w.write_all(&self.domain.half_width.to_le_bytes())?;
        w.write_all(&self.domain.radius.to_le_bytes())?;
        w.write_all(&self.kernel_hash)?;
        w.write_all(&(self.n_r as u32).to_le_bytes())?;
        w.write_all(&(self.n_theta as u32).to_le_bytes())?;
        w.write_all(&self.quad_tol.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
        for c in &self.entries {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a cache file. With `expected_hash`, a table built for another
    /// kernel, geometry or quadrature is rejected.
    pub fn load(path: &Path, expected_hash: Option<&[u8; 32]>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Cache(format!("{} is not a weight cache", path.display())));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let modes = read_u32(&mut r)? as usize;
        let half_width = read_f64(&mut r)?;
        let radius = read_f64(&mut r)?;
        let mut kernel_hash = [0u8; 32];
        r.read_exact(&mut kernel_hash)?;
        if let Some(expected) = expected_hash {
            if expected != &kernel_hash {
                return Err(Error::Cache(format!(
                    "hash mismatch: cache {} vs requested {}",
                    hex(&kernel_hash),
                    hex(expected)
                )));
            }
        }
        let n_r = read_u32(&mut r)? as usize;
        let n_theta = read_u32(&mut r)? as usize;
        let quad_tol = read_f64(&mut r)?;
        let count = read_u64(&mut r)? as usize;
        let domain = Domain::new(dim, half_width, radius, modes)?;
        let p = domain.lattice_len();
        if count != p * p {
            return Err(Error::Cache(format!("{count} entries, expected {}", p * p)));
        }
        let mut entries = Vec::with_capacity(count);
        let mut buf = vec![0u8; 16 * 4096];
        let mut left = count;
        while left > 0 {
            let take = left.min(4096);
            r.read_exact(&mut buf[..16 * take])?;
            for chunk in buf[..16 * take].chunks_exact(16) {
                let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
                let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
                entries.push(Complex64::new(re, im));
            }
            left -= take;
        }
        Ok(Self {
            domain,
            entries,
            kernel_hash,
            n_r,
            n_theta,
            quad_tol,
        })
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of everything that determines the `lambda = 1` table.
pub fn weight_hash(spec: &KernelSpec, domain: &Domain, sizes: &ResolvedSizes) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"fgboltz-weights-v1");
    h.update((domain.dim as u64).to_le_bytes());
    h.update(domain.half_width.to_le_bytes());
    h.update(domain.radius.to_le_bytes());
    h.update((domain.modes as u64).to_le_bytes());
    match spec.kinetic {
        KineticForm::HardPower { gamma } => {
            h.update(b"hard");
            h.update(gamma.to_le_bytes());
        }
        KineticForm::ModifiedSoft { gamma } => {
            h.update(b"soft");
            h.update(gamma.to_le_bytes());
        }
    }
    match &spec.angular {
        AngularBase::Constant(v) => {
            h.update(b"const");
            h.update(v.to_le_bytes());
        }
        AngularBase::Tabulated(t) => {
            h.update(b"table");
            for (c, v) in t {
                h.update(c.to_le_bytes());
                h.update(v.to_le_bytes());
            }
        }
    }
    h.update((sizes.n_r as u64).to_le_bytes());
    h.update((sizes.n_theta as u64).to_le_bytes());
    let out = h.finalize();
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&out);
    digest
}

#[derive(Debug, Clone, Copy)]
pub struct WeightOptions {
    /// Absolute tolerance on refinement changes, relative to `max(1, max |G|)`.
    pub tol: f64,
    /// Roughly how many entries to recompute on the refined rule; 0 skips
    /// the check.
    pub refinement_samples: usize,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            refinement_samples: 2000,
        }
    }
}

/// Radial transform `h(a) = int_0^R r Phi(r) J0(a r) dr`.
enum Radial {
    /// `Phi = c`: `c R J1(aR) / a`
    Constant { phi: f64, radius: f64 },
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

impl Radial {
    fn new(spec: &KernelSpec, domain: &Domain, quad: &QuadratureRule) -> Result<Self> {
        if spec.kinetic.is_constant() {
            return Ok(Radial::Constant {
                phi: 1.0,
                radius: domain.radius,
            });
        }
        let weights = quad
            .radial_nodes
            .iter()
            .zip(&quad.radial_weights)
            .map(|(&r, &w)| Ok(w * eval_phi(spec, r)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Radial::Quadrature {
            nodes: quad.radial_nodes.clone(),
            weights,
        })
    }

    #[inline]
    fn eval(&self, a: f64) -> f64 {
        match self {
            Radial::Constant { phi, radius } => {
                if a == 0.0 {
                    phi * radius * radius * 0.5
                } else {
                    phi * radius * libm::j1(a * radius) / a
                }
            }
            Radial::Quadrature { nodes, weights } => nodes
                .iter()
                .zip(weights)
                .map(|(&r, &w)| w * libm::j0(a * r))
                .sum(),
        }
    }
}

struct Evaluator {
    kappa: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    /// `2 pi w_j b0sym(cos theta_j)`
    bw: Vec<f64>,
    radial: Radial,
}

impl Evaluator {
    fn new(spec: &KernelSpec, domain: &Domain, quad: &QuadratureRule) -> Result<Self> {
        let bw = quad
            .polar_nodes
            .iter()
            .zip(&quad.polar_weights)
            .map(|(&t, &w)| 2.0 * PI * w * b0_sym(&spec.angular, t.cos()))
            .collect();
        Ok(Self {
            kappa: domain.wavenumber(),
            cos: quad.polar_nodes.iter().map(|t| t.cos()).collect(),
            sin: quad.polar_nodes.iter().map(|t| t.sin()).collect(),
            bw,
            radial: Radial::new(spec, domain, quad)?,
        })
    }

    fn weight(&self, l: [f64; 2], m: [f64; 2]) -> f64 {
        let s = [l[0] + m[0], l[1] + m[1]];
        let u = [l[0] - m[0], l[1] - m[1]];
        let loss = self.radial.eval(self.kappa * (m[0] * m[0] + m[1] * m[1]).sqrt());
        let mut acc = 0.0;
        for j in 0..self.bw.len() {
            let (c, sn) = (self.cos[j], self.sin[j]);
            // u - rot(-theta) s
            let w0 = u[0] - (c * s[0] + sn * s[1]);
            let w1 = u[1] - (-sn * s[0] + c * s[1]);
            let a = self.kappa * ((w0 * w0 + w1 * w1).sqrt() * 0.5);
            acc += self.bw[j] * (self.radial.eval(a) - loss);
        }
        acc
    }
}

/// Build `G(l, m)` for every pair of the lattice at `lambda = 1`.
pub fn precompute_weights(
    spec: &KernelSpec,
    domain: &Domain,
    quad: &QuadratureRule,
) -> Result<WeightTable> {
    precompute_weights_with(spec, domain, quad, &WeightOptions::default())
}

pub fn precompute_weights_with(
    spec: &KernelSpec,
    domain: &Domain,
    quad: &QuadratureRule,
    options: &WeightOptions,
) -> Result<WeightTable> {
    if !spec.symmetrized {
        return Err(Error::Usage("weights need the symmetrized angular kernel".into()));
    }
    if domain.dim != 2 {
        return Err(Error::Unsupported(format!(
            "weight precomputation for d = {}",
            domain.dim
        )));
    }
    if spec.radius != domain.radius {
        return Err(Error::Usage(format!(
            "kernel radius {} differs from domain radius {}",
            spec.radius, domain.radius
        )));
    }
    spec.validate(domain.dim)?;

    let lat = Lattice::of(domain);
    let p = lat.len();
    let total = p * p;
    let modes: Vec<[f64; 2]> = lat
        .iter()
        .map(|n| [n[0] as f64, n[1] as f64])
        .collect();
    let eval = Evaluator::new(spec, domain, quad)?;

    // Pairs k and total-1-k are (l, m) and (-l, -m); compute the lower half
    // and mirror it.
    let half = total.div_ceil(2);
    let lower: Vec<f64> = (0..half)
        .into_par_iter()
        .with_min_len(1024)
        .map(|k| eval.weight(modes[k / p], modes[k % p]))
        .collect();
    let mut entries = vec![Complex64::new(0.0, 0.0); total];
    for (k, &g) in lower.iter().enumerate() {
        entries[k] = Complex64::new(g, 0.0);
        entries[total - 1 - k] = Complex64::new(g, 0.0);
    }

    let sizes = quad.sizes;
    let mut table = WeightTable {
        domain: *domain,
        entries,
        kernel_hash: weight_hash(spec, domain, &sizes),
        n_r: sizes.n_r,
        n_theta: sizes.n_theta,
        quad_tol: 0.0,
    };

    if options.refinement_samples > 0 {
        let fine = Evaluator::new(spec, domain, &quad.refined(domain)?)?;
        let stride = (half / options.refinement_samples).max(1);
        let tol = options.tol * table.max_abs().max(1.0);
        let mut worst = (0.0f64, 0usize);
        for k in (0..half).step_by(stride) {
            let change = (fine.weight(modes[k / p], modes[k % p]) - lower[k]).abs();
            if change > worst.0 {
                worst = (change, k);
            }
        }
        table.quad_tol = worst.0;
        if worst.0 > tol {
            let k = worst.1;
            return Err(Error::Precision {
                l: lat.multi_index(k / p),
                m: lat.multi_index(k % p),
                change: worst.0,
                tol,
            });
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_table(n: usize) -> WeightTable {
        let domain = Domain::from_support(2, 1.0, None, n).unwrap();
        let spec = KernelSpec::maxwell(2, domain.radius);
        let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
        precompute_weights(&spec, &domain, &quad).unwrap()
    }

    #[test]
    fn mass_identity_is_exact() {
        let t = small_table(4);
        assert_eq!(t.mass_residual(), 0.0);
        assert_eq!(t.conjugate_symmetry_defect(), 0.0);
        assert!(t.max_abs() > 0.1);
        assert!(t.quad_tol < 1e-10);
    }

    #[test]
    fn zero_pair_vanishes() {
        let t = small_table(2);
        assert_eq!(t.get(&[0, 0], &[0, 0]).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn cache_round_trip_and_hash_rejection() {
        let t = small_table(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        t.save(&path).unwrap();
        let back = WeightTable::load(&path, Some(&t.kernel_hash)).unwrap();
        assert_eq!(back, t);
        let mut other = t.kernel_hash;
        other[0] ^= 1;
        assert!(matches!(
            WeightTable::load(&path, Some(&other)),
            Err(Error::Cache(_))
        ));
    }

    #[test]
    fn radius_mismatch_rejected() {
        let domain = Domain::from_support(2, 1.0, None, 2).unwrap();
        let spec = KernelSpec::maxwell(2, 1.0);
        let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
        assert!(matches!(
            precompute_weights(&spec, &domain, &quad),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn coarse_rule_fails_refinement() {
        let domain = Domain::from_support(2, 1.0, None, 8).unwrap();
        let spec = KernelSpec::maxwell(2, domain.radius);
        let sizes = crate::quadrature::QuadratureSizes {
            n_theta: Some(4),
            ..Default::default()
        }
        .resolve(&domain, 0);
        let quad = QuadratureRule::new(&domain, sizes).unwrap();
        assert!(matches!(
            precompute_weights(&spec, &domain, &quad),
            Err(Error::Precision { .. })
        ));
    }
}
