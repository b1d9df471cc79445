use std::f64::consts::PI;

use fgboltz::oracle::{bkw_coefficients, direct_qr, direct_qr_bilinear, field_function, verify_bkw, BkwParams};
use fgboltz::quadrature::{gauss_legendre, QuadratureSizes};
use fgboltz::spectral::{bilinear_rhs, grid_points, random_hermitian, SpectralField};
use fgboltz::{collision_rhs, precompute_weights, Domain, KernelSpec, QuadratureRule};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// First-form weight integral with the `q` direction done numerically:
/// radial Gauss-Legendre x uniform `q`-angle x Gauss-Legendre `sigma`-angle.
fn brute_force_weights(domain: &Domain, b0: f64, n: usize) -> Vec<Complex64> {
    let kappa = domain.wavenumber();
    let big = domain.modes as i64;
    let side = 2 * big + 1;
    let s_side = 4 * big + 1;
    let (rs, rw) = gauss_legendre(n, 0.0, domain.radius).unwrap();
    let (ts, tw) = gauss_legendre(n, -PI / 2.0, PI / 2.0).unwrap();
    let dphi = 2.0 * PI / n as f64;
    // inner[s][q] = sum_theta w b (exp(i kappa s.(q - r sigma)/2) - 1)
    let nq = n * n;
    let mut inner = vec![Complex64::new(0.0, 0.0); (s_side * s_side) as usize * nq];
    let mut qpts = Vec::with_capacity(nq);
    for (ri, &r) in rs.iter().enumerate() {
        for pj in 0..n {
            let phi = pj as f64 * dphi;
            qpts.push((r * phi.cos(), r * phi.sin(), rw[ri] * r * dphi));
        }
    }
    for (qi, &(q0, q1, _)) in qpts.iter().enumerate() {
        let r = (q0 * q0 + q1 * q1).sqrt();
        let phi = q1.atan2(q0);
        for (&t, &w) in ts.iter().zip(&tw) {
            let sig = [(phi + t).cos(), (phi + t).sin()];
            let e0 = Complex64::cis(0.5 * kappa * (q0 - r * sig[0]));
            let e1 = Complex64::cis(0.5 * kappa * (q1 - r * sig[1]));
            let p0: Vec<Complex64> = (-2 * big..=2 * big).map(|k| e0.powi(k as i32)).collect();
            let p1: Vec<Complex64> = (-2 * big..=2 * big).map(|k| e1.powi(k as i32)).collect();
            let wb = w * 2.0 * b0;
            for a in 0..s_side as usize {
                for b in 0..s_side as usize {
                    inner[(a * s_side as usize + b) * nq + qi] += wb * (p0[a] * p1[b] - 1.0);
                }
            }
        }
    }
    let p = (side * side) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); p * p];
    for i in 0..p {
        let l = [i as i64 / side - big, i as i64 % side - big];
        for j in 0..p {
            let m = [j as i64 / side - big, j as i64 % side - big];
            let s = ((l[0] + m[0] + 2 * big) * s_side + l[1] + m[1] + 2 * big) as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for (qi, &(q0, q1, w)) in qpts.iter().enumerate() {
                acc += w * Complex64::cis(-kappa * (m[0] as f64 * q0 + m[1] as f64 * q1)) * inner[s * nq + qi];
            }
            out[i * p + j] = acc;
        }
    }
    out
}

#[test]
fn weights_match_brute_force_integral() {
    let domain = Domain::from_support(2, 1.0, None, 4).unwrap();
    let spec = KernelSpec::maxwell(2, domain.radius);
    let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
    let table = precompute_weights(&spec, &domain, &quad).unwrap();
    let brute = brute_force_weights(&domain, 1.0 / (2.0 * PI), 4 * quad.sizes.n_theta);
    let worst = table
        .entries
        .iter()
        .zip(&brute)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    eprintln!("brute-force max deviation {worst:e}");
    assert!(worst < 1e-8, "max deviation {worst:e}");
}

fn oracle_setup(n: usize) -> (Domain, KernelSpec, QuadratureRule) {
    let domain = Domain::new(2, PI, 1.0, n).unwrap();
    let spec = KernelSpec::maxwell(2, 1.0);
    let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
    (domain, spec, quad)
}

fn project_oracle(domain: &Domain, values: &[f64], m: usize) -> SpectralField {
    SpectralField::from_grid_samples(*domain, m, values).unwrap()
}

fn rel_l2(a: &SpectralField, b: &SpectralField) -> f64 {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    d.l2() / b.l2()
}

#[test]
fn bilinear_convention_matches_direct_quadrature() {
    let (domain, spec, quad) = oracle_setup(4);
    let table = precompute_weights(&spec, &domain, &quad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_hermitian(domain, &mut rng, 0.3);
    let f = random_hermitian(domain, &mut rng, 0.3);
    let m = 14;
    let pts = grid_points(&domain, m);
    let oracle = direct_qr_bilinear(field_function(&g), field_function(&f), &spec, 0.0, &pts, &domain, &quad).unwrap();
    let projected = project_oracle(&domain, &oracle, m);
    let spectral = bilinear_rhs(&table, &g, &f, 1.0).unwrap();
    let err = rel_l2(&spectral, &projected);
    eprintln!("bilinear relative error {err:e}");
    assert!(err < 1e-6, "relative error {err:e}");
    let swapped = bilinear_rhs(&table, &f, &g, 1.0).unwrap();
    assert!(rel_l2(&swapped, &projected) > 1e-3);
}

#[test]
fn symmetric_rhs_matches_direct_quadrature() {
    let (domain, spec, quad) = oracle_setup(6);
    let table = precompute_weights(&spec, &domain, &quad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_hermitian(domain, &mut rng, 0.2);
    let m = 20;
    let oracle = direct_qr(field_function(&f), &spec, 0.0, &grid_points(&domain, m), &domain, &quad).unwrap();
    let err = rel_l2(&collision_rhs(&table, &f).unwrap(), &project_oracle(&domain, &oracle, m));
    eprintln!("N=6 relative error {err:e}");
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn direct_quadrature_is_conservative() {
    let (domain, spec, quad) = oracle_setup(3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_hermitian(domain, &mut rng, 0.3);
    let m = 16;
    let vals = direct_qr(field_function(&f), &spec, 0.0, &grid_points(&domain, m), &domain, &quad).unwrap();
    let h = 2.0 * domain.half_width / m as f64;
    let total: f64 = vals.iter().sum::<f64>() * h * h;
    assert!(total.abs() <= 1e-10 * f.l2().powi(2), "integral {total:e}");
}

fn bkw_domain(n: usize) -> (Domain, KernelSpec) {
    let domain = Domain::from_support(2, 6.0, None, n).unwrap();
    (domain, KernelSpec::maxwell(2, domain.radius))
}

#[test]
fn bkw_residual_accepts_correct_normalization() {
    let (domain, spec) = bkw_domain(24);
    let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
    let p = BkwParams::for_kernel(&spec, 0.6).unwrap();
    let early = verify_bkw(&p, &spec, &domain, &[0.0], &quad).unwrap();
    let all = verify_bkw(&p, &spec, &domain, &[0.0, 0.25, 0.5], &quad).unwrap();
    eprintln!("bkw residual {all:e}, t=0 {early:e}");
    assert!(all <= 1e-4, "residual {all:e}");
    let late = verify_bkw(&p, &spec, &domain, &[40.0], &quad).unwrap();
    assert!(late < early, "late {late:e} early {early:e}");
}

#[test]
fn bkw_residual_detects_wrong_cross_section() {
    let (domain, spec) = bkw_domain(24);
    let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
    let mut p = BkwParams::for_kernel(&spec, 0.6).unwrap();
    p.cross_section *= 2.0;
    let r = verify_bkw(&p, &spec, &domain, &[0.0], &quad).unwrap();
    assert!(r > 1e-3, "residual {r:e}");
}

#[test]
fn bkw_projection_matches_grid_projection() {
    let (domain, _) = bkw_domain(16);
    let p = BkwParams::default();
    let quad = QuadratureRule::new(
        &domain,
        QuadratureSizes::default().resolve(&domain, 0),
    )
    .unwrap();
    let grid = fgboltz::spectral::project_initial(|v, _| fgboltz::oracle::bkw(0.2, v, &p), 0.0, &domain, &quad).unwrap();
    let exact = bkw_coefficients(0.2, &p, &domain);
    assert!(rel_l2(&grid, &exact) < 1e-12);
}
