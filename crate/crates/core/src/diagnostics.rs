//! Norm records, mixed `(v, z)` norms, initial-data conditions, and the
//! negative-part and convergence studies.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpc::{reconstruct_derivative, GpcField};
use crate::kernel::{Domain, KernelSpec};
use crate::oracle::{accept_bkw, bkw_coefficients, BkwParams};
use crate::quadrature::{QuadratureRule, QuadratureSizes};
use crate::solver::{run, SolverConfig};
use crate::spectral::field::{grid_samples, project_initial, SpectralField};
use crate::spectral::{precompute_weights, WeightTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    /// Relative to the initial mass; for gPC states the largest drift over
    /// all coefficients, relative to the mean mass.
    pub mass_drift: f64,
    pub l1: f64,
    pub l2: f64,
    pub h1: f64,
    pub neg_l2: f64,
    /// Mass of each gPC coefficient (one entry for deterministic states).
    pub mode_mass: Vec<f64>,
}

fn relative(delta: f64, base: f64) -> f64 {
    if base != 0.0 {
        delta.abs() / base.abs()
    } else {
        delta.abs()
    }
}

pub fn record_field(t: f64, f: &SpectralField, initial_mass: f64, grid_m: usize) -> DiagnosticsRecord {
    let n = f.norms(grid_m);
    let mass = f.mass();
    DiagnosticsRecord {
        t,
        mass,
        mass_drift: relative(mass - initial_mass, initial_mass),
        l1: n.l1,
        l2: n.l2,
        h1: n.h1,
        neg_l2: n.neg_l2,
        mode_mass: vec![mass],
    }
}

/// Norms of the mean `F^0` plus per-coefficient masses.
pub fn record_gpc(t: f64, f: &GpcField, initial_masses: &[f64], grid_m: usize) -> DiagnosticsRecord {
    let mut rec = record_field(t, &f.modes[0], initial_masses[0], grid_m);
    rec.mode_mass = f.mode_masses();
    rec.mass_drift = rec
        .mode_mass
        .iter()
        .zip(initial_masses)
        .map(|(m, m0)| relative(m - m0, initial_masses[0]))
        .fold(0.0, f64::max);
    rec
}

/// `n` Chebyshev-Lobatto points `cos(pi j / (n-1))` on `[-1, 1]`.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|j| -(PI * j as f64 / (n - 1) as f64).cos()).collect()
}

/// Default `z` grid for sup norms.
pub fn default_z_grid() -> Vec<f64> {
    chebyshev_grid(33)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTriple {
    pub l1: f64,
    pub l2: f64,
    pub h1: f64,
}

impl NormTriple {
    fn of(f: &SpectralField, grid_m: usize) -> Self {
        let n = f.norms(grid_m);
        Self {
            l1: n.l1,
            l2: n.l2,
            h1: n.h1,
        }
    }

    fn max(self, o: Self) -> Self {
        Self {
            l1: self.l1.max(o.l1),
            l2: self.l2.max(o.l2),
            h1: self.h1.max(o.h1),
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            l1: self.l1 + o.l1,
            l2: self.l2 + o.l2,
            h1: self.h1 + o.h1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l1.is_finite() && self.l2.is_finite() && self.h1.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedNormReport {
    pub r: usize,
    /// `sup_z ||d_z^l f(., z)||` for `l = 0..=r`.
    pub orders: Vec<NormTriple>,
    /// `sum_l sup_z ||d_z^l f||`.
    pub total: NormTriple,
    /// `sup_z sum_l ||d_z^l f(., z)||`.
    pub seminorm_sup: NormTriple,
}

fn assemble(r: usize, per_z: Vec<Vec<NormTriple>>) -> MixedNormReport {
    let mut orders = vec![NormTriple::default(); r + 1];
    let mut seminorm_sup = NormTriple::default();
    for row in &per_z {
        let mut sum = NormTriple::default();
        for (o, v) in orders.iter_mut().zip(row) {
            *o = o.max(*v);
            sum = sum.add(*v);
        }
        seminorm_sup = seminorm_sup.max(sum);
    }
    let total = orders.iter().fold(NormTriple::default(), |a, b| a.add(*b));
    MixedNormReport {
        r,
        orders,
        total,
        seminorm_sup,
    }
}

/// Mixed norms of a gPC state; `z`-derivatives are exact derivatives of the
/// Legendre expansion. Requires `r < K` (or `r = 0`).
pub fn mixed_norms_gpc(f: &GpcField, r: usize, z_grid: &[f64], grid_m: usize) -> Result<MixedNormReport> {
    let k = f.order();
    if r > 0 && r >= k {
        return Err(Error::Capability(format!(
            "z-derivative order {r} not resolvable with gPC order {k}"
        )));
    }
    let per_z = z_grid
        .par_iter()
        .map(|&z| {
            (0..=r)
                .map(|l| NormTriple::of(&reconstruct_derivative(f, l, z), grid_m))
                .collect()
        })
        .collect();
    Ok(assemble(r, per_z))
}

/// Barycentric weights `1 / prod_{j != i} (x_i - x_j)`.
fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            1.0 / (0..x.len())
                .filter(|&j| j != i)
                .map(|j| x[i] - x[j])
                .product::<f64>()
        })
        .collect()
}

/// Differentiation matrix of the interpolant through `x`.
fn differentiation_matrix(x: &[f64], w: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = (w[j] / w[i]) / (x[i] - x[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

/// Lagrange basis values at `z` in barycentric form.
fn lagrange_at(x: &[f64], w: &[f64], z: f64) -> Vec<f64> {
    if let Some(i) = x.iter().position(|&xi| xi == z) {
        let mut out = vec![0.0; x.len()];
        out[i] = 1.0;
        return out;
    }
    let terms: Vec<f64> = x.iter().zip(w).map(|(&xi, &wi)| wi / (z - xi)).collect();
    let denom: f64 = terms.iter().sum();
    terms.iter().map(|t| t / denom).collect()
}

/// Mixed norms of a collocation ensemble through its polynomial interpolant;
/// derivatives come from the barycentric differentiation matrix. Requires
/// `r` below the number of nodes.
pub fn mixed_norms_collocation(
    nodes: &[f64],
    fields: &[SpectralField],
    r: usize,
    z_grid: &[f64],
    grid_m: usize,
) -> Result<MixedNormReport> {
    if nodes.len() != fields.len() || nodes.is_empty() {
        return Err(Error::Usage(format!(
            "{} nodes but {} fields",
            nodes.len(),
            fields.len()
        )));
    }
    if r >= nodes.len() {
        return Err(Error::Capability(format!(
            "z-derivative order {r} not resolvable with {} collocation nodes",
            nodes.len()
        )));
    }
    let w = barycentric_weights(nodes);
    let d = differentiation_matrix(nodes, &w);
    // derivs[l][i] = (D^l f)_i
    let mut derivs: Vec<Vec<SpectralField>> = vec![fields.to_vec()];
    for l in 1..=r {
        let prev = &derivs[l - 1];
        let next = (0..nodes.len())
            .map(|i| {
                let mut acc = SpectralField::zeros(fields[0].domain, fields[0].real_valued);
                for (j, p) in prev.iter().enumerate() {
                    acc.add_scaled(d[i][j], p);
                }
                acc
            })
            .collect();
        derivs.push(next);
    }
    let per_z = z_grid
        .par_iter()
        .map(|&z| {
            let basis = lagrange_at(nodes, &w, z);
            derivs
                .iter()
                .map(|vals| {
                    let mut acc = SpectralField::zeros(fields[0].domain, fields[0].real_valued);
                    for (b, v) in basis.iter().zip(vals) {
                        acc.add_scaled(*b, v);
                    }
                    NormTriple::of(&acc, grid_m)
                })
                .collect()
        })
        .collect();
    Ok(assemble(r, per_z))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionRow {
    pub n: usize,
    /// `mass(P_N f0) - mass(f0)`
    pub mass_error: f64,
    /// `||P_N f0||_2 / ||f0||_2`
    pub l2_ratio: f64,
    /// `||P_N f0||_1 / ||f0||_1`
    pub l1_ratio: f64,
    /// `||(P_N f0)^-||_2`
    pub neg_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionReport {
    pub rows: Vec<InitialConditionRow>,
    /// Smallest listed `N` from which on the `L^1` ratio stays at most 2.
    pub n0: Option<usize>,
    pub mass_ok: bool,
    pub l2_ok: bool,
    pub l1_ok: bool,
    /// Negative parts trend to zero: each step grows by at most 10 % and the
    /// last value is below the first (or all vanish).
    pub neg_decreasing: bool,
}

impl InitialConditionReport {
    pub fn passed(&self) -> bool {
        self.mass_ok && self.l2_ok && self.l1_ok && self.neg_decreasing
    }
}

/// Tolerances for the projection conditions.
const MASS_TOL: f64 = 1e-12;
const ROUND_OFF: f64 = 1e-12;
const L1_CONSTANT: f64 = 2.0;
const PAIR_SLACK: f64 = 1.1;

/// Project `f0` at each `N` and check mass, `L^2` contraction, the `L^1`
/// bound and the decay of the negative part. Projections and the norms of
/// `f0` share one grid at least twice as fine as any default projection grid.
pub fn check_initial_conditions<F>(f0: F, domain: &Domain, n_list: &[usize]) -> Result<InitialConditionReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let m_ref = (8 * (2 * n_max + 1)).max(128);
    let samples = grid_samples(domain, m_ref, &f0);
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("initial data has non-finite samples".into()));
    }
    let cell = (2.0 * domain.half_width / m_ref as f64).powi(domain.dim as i32);
    let mass = samples.iter().sum::<f64>() * cell;
    let l1 = samples.iter().map(|v| v.abs()).sum::<f64>() * cell;
    let l2 = (samples.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();

    let rows = n_list
        .par_iter()
        .map(|&n| {
            let d = domain.with_modes(n);
            let p = SpectralField::from_grid_samples(d, m_ref, &samples)?;
            let norms = p.norms(4 * (2 * n + 1));
            Ok(InitialConditionRow {
                n,
                mass_error: p.mass() - mass,
                l2_ratio: norms.l2 / l2,
                l1_ratio: norms.l1 / l1,
                neg_l2: norms.neg_l2,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mass_ok = rows.iter().all(|r| r.mass_error.abs() <= MASS_TOL * mass.abs().max(1.0));
    let l2_ok = rows.iter().all(|r| r.l2_ratio <= 1.0 + ROUND_OFF);
    let n0 = (0..rows.len())
        .find(|&i| rows[i..].iter().all(|r| r.l1_ratio <= L1_CONSTANT))
        .map(|i| rows[i].n);
    let negs: Vec<f64> = rows.iter().map(|r| r.neg_l2).collect();
    let neg_decreasing = nonincreasing_within(&negs, PAIR_SLACK)
        && (negs.iter().all(|&v| v == 0.0) || negs.last() < negs.first());
    Ok(InitialConditionReport {
        rows,
        n0,
        mass_ok,
        l2_ok,
        l1_ok: n0.is_some(),
        neg_decreasing,
    })
}

/// Every adjacent pair satisfies `v[i+1] <= slack * v[i]`.
pub fn nonincreasing_within(v: &[f64], slack: f64) -> bool {
    v.windows(2).all(|w| w[1] <= slack * w[0])
}

/// Least-squares fit `y = a + b / n`.
pub fn fit_inverse_n(n: &[usize], y: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = n.iter().map(|&n| 1.0 / n as f64).collect();
    linear_fit(&x, y)
}

/// Least-squares line `y = a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Exponential envelope `exp(a + b t)` fitted to positive samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub a: f64,
    pub b: f64,
    /// `max_i y_i / exp(a + b t_i)`
    pub max_ratio: f64,
}

pub fn fit_envelope(t: &[f64], y: &[f64]) -> Envelope {
    let logs: Vec<f64> = y.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let (a, b) = linear_fit(t, &logs);
    let max_ratio = t
        .iter()
        .zip(y)
        .map(|(&t, &y)| y / (a + b * t).exp())
        .fold(0.0, f64::max);
    Envelope { a, b, max_ratio }
}

/// `p_i = log(e_i / e_{i+1}) / log(N_{i+1} / N_i)`.
pub fn local_orders(n: &[usize], e: &[f64]) -> Vec<f64> {
    n.windows(2)
        .zip(e.windows(2))
        .map(|(n, e)| (e[0] / e[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .collect()
}

/// Shared settings for the `N`-refinement studies.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub kernel: KernelSpec,
    pub solver: SolverConfig,
    pub quad: QuadratureSizes,
}

impl StudyConfig {
    pub fn weights(&self, domain: &Domain) -> Result<WeightTable> {
        let quad = QuadratureRule::new(domain, self.quad.resolve(domain, 0))?;
        precompute_weights(&self.kernel, domain, &quad)
    }

    fn rule(&self, domain: &Domain) -> Result<QuadratureRule> {
        QuadratureRule::new(domain, self.quad.resolve(domain, 0))
    }
}

/// Per-run summary shared by the studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub n: usize,
    pub mass_drift: f64,
    pub l1_initial: f64,
    pub l1_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativePartRow {
    pub n: usize,
    pub t: f64,
    pub neg_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativePartReport {
    pub rows: Vec<NegativePartRow>,
    pub n_list: Vec<usize>,
    pub initial: Vec<f64>,
    pub terminal: Vec<f64>,
    /// `terminal[i+1] <= 1.1 terminal[i]`
    pub pairwise_ok: bool,
    /// Fit `terminal = a + b / N`.
    pub fit_a: f64,
    pub fit_b: f64,
    /// `b > 0` and `b / N_min >= |a|`
    pub b_dominates: bool,
    pub initial_decreasing: bool,
    pub runs: Vec<RunSummary>,
}

impl NegativePartReport {
    pub fn passed(&self) -> bool {
        self.pairwise_ok && self.b_dominates && self.initial_decreasing
    }
}

/// Evolve the projection of `f0` at each `N` and track `||f_N^-||_2`.
pub fn negative_part_study(
    f0: &(dyn Fn(&[f64]) -> f64 + Sync),
    base: &Domain,
    n_list: &[usize],
    cfg: &StudyConfig,
) -> Result<NegativePartReport> {
    let runs = n_list
        .par_iter()
        .map(|&n| {
            let d = base.with_modes(n);
            let table = cfg.weights(&d)?;
            let init = project_initial(|v, _| f0(v), 0.0, &d, &cfg.rule(&d)?)?;
            Ok(run(&init, &table, &cfg.solver)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut initial = Vec::new();
    let mut terminal = Vec::new();
    let mut summaries = Vec::new();
    for (&n, traj) in n_list.iter().zip(&runs) {
        for rec in &traj.diagnostics {
            rows.push(NegativePartRow { n, t: rec.t, neg_l2: rec.neg_l2 });
        }
        initial.push(traj.diagnostics[0].neg_l2);
        let grid = cfg.solver.norm_grid.unwrap_or(4 * (2 * n + 1));
        terminal.push(traj.final_state.norms(grid).neg_l2);
        summaries.push(RunSummary {
            n,
            mass_drift: traj.max_mass_drift(),
            l1_initial: traj.diagnostics[0].l1,
            l1_max: traj.max_l1(),
        });
    }
    let (fit_a, fit_b) = fit_inverse_n(n_list, &terminal);
    let n_min = n_list.iter().copied().min().unwrap_or(1) as f64;
    Ok(NegativePartReport {
        rows,
        n_list: n_list.to_vec(),
        pairwise_ok: nonincreasing_within(&terminal, PAIR_SLACK),
        b_dominates: fit_b > 0.0 && fit_b / n_min >= fit_a.abs(),
        initial_decreasing: nonincreasing_within(&initial, PAIR_SLACK)
            && (initial.iter().all(|&v| v == 0.0) || initial.last() < initial.first()),
        initial,
        terminal,
        fit_a,
        fit_b,
        runs: summaries,
    })
}

/// Reference solution of a convergence study.
pub enum Reference<'a> {
    /// Exact BKW profile, accepted only after its residual check.
    Bkw(BkwParams),
    /// A run at `modes` from the projection of `initial`.
    HighN {
        modes: usize,
        initial: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub t: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub orders: Vec<f64>,
    pub decreasing: bool,
    pub order_increasing: bool,
    pub bkw_residual: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.decreasing && self.order_increasing
    }
}

/// `e_N = ||P_N f_ref(T) - f_N(T)||_2` over `n_list`.
pub fn convergence_study(
    reference: &Reference<'_>,
    base: &Domain,
    n_list: &[usize],
    cfg: &StudyConfig,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() {
        return Err(Error::Usage("empty N list".into()));
    }
    let t_final = cfg.solver.t_final;
    let n_max = *n_list.iter().max().unwrap();
    let mut bkw_residual = None;
    let high_ref = match reference {
        Reference::Bkw(p) => {
            let d = base.with_modes(n_max);
            let quad = cfg.rule(&d)?;
            bkw_residual = Some(accept_bkw(p, &cfg.kernel, &d, &[0.0, 0.5 * t_final, t_final], &quad)?);
            None
        }
        Reference::HighN { modes, initial } => {
            if *modes < n_max {
                return Err(Error::Reference(format!(
                    "reference N = {modes} below largest studied N = {n_max}"
                )));
            }
            let d = base.with_modes(*modes);
            let table = cfg.weights(&d)?;
            let init = project_initial(|v, _| initial(v), 0.0, &d, &cfg.rule(&d)?)?;
            Some(run(&init, &table, &cfg.solver)?.final_state)
        }
    };

    let results = n_list
        .par_iter()
        .map(|&n| {
            let d = base.with_modes(n);
            let (init, target) = match reference {
                Reference::Bkw(p) => (bkw_coefficients(0.0, p, &d), bkw_coefficients(t_final, p, &d)),
                Reference::HighN { initial, .. } => (
                    project_initial(|v, _| initial(v), 0.0, &d, &cfg.rule(&d)?)?,
                    high_ref.as_ref().unwrap().resample(n),
                ),
            };
            let table = cfg.weights(&d)?;
            let traj = run(&init, &table, &cfg.solver)?;
            let mut diff = target;
            diff.add_scaled(-1.0, &traj.final_state);
            Ok((
                diff.l2(),
                RunSummary {
                    n,
                    mass_drift: traj.max_mass_drift(),
                    l1_initial: traj.diagnostics[0].l1,
                    l1_max: traj.max_l1(),
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let errors: Vec<f64> = results.iter().map(|r| r.0).collect();
    let orders = local_orders(n_list, &errors);
    Ok(ConvergenceReport {
        rows: n_list
            .iter()
            .zip(&errors)
            .map(|(&n, &error)| ConvergenceRow { n, t: t_final, error })
            .collect(),
        decreasing: errors.windows(2).all(|w| w[1] < w[0]),
        order_increasing: orders.windows(2).all(|w| w[1] > w[0]),
        orders,
        bkw_residual,
        runs: results.into_iter().map(|r| r.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpc::{reconstruct, GpcField};
    use crate::kernel::AngularBase;
    use crate::quadrature::gauss_legendre;
    use crate::spectral::random_hermitian;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn domain(n: usize) -> Domain {
        Domain::from_support(2, 1.0, None, n).unwrap()
    }

    #[test]
    fn chebyshev_points() {
        let z = chebyshev_grid(33);
        assert_eq!(z.len(), 33);
        assert_abs_diff_eq!(z[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[32], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(z[16], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn deterministic_mixed_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_hermitian(domain(3), &mut rng, 0.4);
        let g = GpcField::deterministic(f.clone(), 3);
        let rep = mixed_norms_gpc(&g, 2, &default_z_grid(), 28).unwrap();
        assert_eq!(rep.orders[1], NormTriple::default());
        assert_eq!(rep.orders[2], NormTriple::default());
        let plain = f.norms(28);
        assert_abs_diff_eq!(rep.total.l2, plain.l2, epsilon = 1e-14);
        assert_abs_diff_eq!(rep.total.l1, plain.l1, epsilon = 1e-14);
    }

    #[test]
    fn linear_in_z_mixed_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_hermitian(domain(3), &mut rng, 0.4);
        let mut g = GpcField::zeros(f.domain, 3);
        g.modes[1] = f.clone();
        let rep = mixed_norms_gpc(&g, 2, &default_z_grid(), 28).unwrap();
        assert_abs_diff_eq!(rep.orders[1].l2, 3f64.sqrt() * f.l2(), epsilon = 1e-13);
        assert_eq!(rep.orders[2].l2, 0.0);
    }

    #[test]
    fn totals_sum_orders_and_grow_with_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GpcField::new((0..5).map(|_| random_hermitian(domain(2), &mut rng, 0.4)).collect()).unwrap();
        let z = chebyshev_grid(9);
        let mut prev = 0.0;
        for r in 0..=3 {
            let rep = mixed_norms_gpc(&g, r, &z, 20).unwrap();
            let sum: f64 = rep.orders.iter().map(|o| o.l2).sum();
            assert_abs_diff_eq!(rep.total.l2, sum, epsilon = 1e-12);
            assert!(rep.total.l2 >= prev);
            assert!(rep.seminorm_sup.l2 <= rep.total.l2 * (1.0 + 1e-14));
            prev = rep.total.l2;
        }
    }

    #[test]
    fn mixed_norm_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mk = |rng: &mut ChaCha8Rng| {
            GpcField::new((0..4).map(|_| random_hermitian(domain(2), rng, 0.4)).collect()).unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let mut s = a.clone();
        s.add_scaled(1.0, &b);
        let z = chebyshev_grid(9);
        let ra = mixed_norms_gpc(&a, 2, &z, 20).unwrap();
        let rb = mixed_norms_gpc(&b, 2, &z, 20).unwrap();
        let rs = mixed_norms_gpc(&s, 2, &z, 20).unwrap();
        assert!(rs.total.l1 <= ra.total.l1 + rb.total.l1 + 1e-12);
        assert!(rs.total.l2 <= ra.total.l2 + rb.total.l2 + 1e-12);
        assert!(rs.total.h1 <= ra.total.h1 + rb.total.h1 + 1e-12);
    }

    #[test]
    fn capability_limits() {
        let g = GpcField::zeros(domain(2), 2);
        assert!(matches!(
            mixed_norms_gpc(&g, 3, &default_z_grid(), 20),
            Err(Error::Capability(_))
        ));
        let f = SpectralField::constant(domain(2), 1.0);
        assert!(matches!(
            mixed_norms_collocation(&[0.0, 0.5], &[f.clone(), f], 2, &default_z_grid(), 20),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn gpc_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GpcField::new((0..5).map(|_| random_hermitian(domain(2), &mut rng, 0.4)).collect()).unwrap();
        let h = 1e-4;
        let z = 0.23;
        let exact = reconstruct_derivative(&g, 1, z);
        let mut fd = reconstruct(&g, z + h);
        fd.add_scaled(-1.0, &reconstruct(&g, z - h));
        fd.scale(0.5 / h);
        fd.add_scaled(-1.0, &exact);
        assert!(fd.l2() < 1e-6 * exact.l2());
    }

    #[test]
    fn collocation_derivatives_exact_for_polynomials() {
        // degree-3 polynomial in z sampled at 5 Gauss nodes
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = GpcField::new((0..4).map(|_| random_hermitian(domain(2), &mut rng, 0.4)).collect()).unwrap();
        let (nodes, _) = gauss_legendre(5, -1.0, 1.0).unwrap();
        let fields: Vec<_> = nodes.iter().map(|&z| reconstruct(&g, z)).collect();
        let z = chebyshev_grid(7);
        let a = mixed_norms_collocation(&nodes, &fields, 2, &z, 20).unwrap();
        let b = mixed_norms_gpc(&g, 2, &z, 20).unwrap();
        for l in 0..=2 {
            assert!((a.orders[l].l2 - b.orders[l].l2).abs() < 1e-10 * b.orders[l].l2.max(1.0));
            assert!((a.orders[l].h1 - b.orders[l].h1).abs() < 1e-10 * b.orders[l].h1.max(1.0));
        }
    }

    #[test]
    fn band_limited_initial_data_is_exact() {
        let d = domain(4);
        let k = d.wavenumber();
        let f0 = move |v: &[f64]| 1.0 + 0.3 * (k * v[0]).cos() * (2.0 * k * v[1]).cos();
        let rep = check_initial_conditions(f0, &d, &[2, 3, 4]).unwrap();
        assert!(rep.passed(), "{rep:?}");
        for r in &rep.rows {
            assert!(r.mass_error.abs() < 1e-12);
            assert_abs_diff_eq!(r.l2_ratio, 1.0, epsilon = 1e-12);
            assert_eq!(r.neg_l2, 0.0);
        }
        assert_eq!(rep.n0, Some(2));
    }

    #[test]
    fn error_by_coefficients_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let big = random_hermitian(domain(6), &mut rng, 0.2);
        let small = random_hermitian(domain(4), &mut rng, 0.2);
        let mut diff = big.resample(4);
        diff.add_scaled(-1.0, &small);
        let by_coeffs = {
            // zero-padded difference on the larger lattice
            let mut d = big.clone();
            d.add_scaled(-1.0, &small.resample(6));
            d.l2()
        };
        let m = 40;
        let vals: Vec<Complex64> = {
            let mut d = big.clone();
            d.add_scaled(-1.0, &small.resample(6));
            d.grid_values(m)
        };
        let cell = (2.0 * big.domain.half_width / m as f64).powi(2);
        let by_grid = (vals.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt();
        assert_abs_diff_eq!(by_coeffs, by_grid, epsilon = 1e-10 * by_grid);
        assert!(diff.l2() <= by_coeffs);
    }

    #[test]
    fn kernel_off_gives_zero_error() {
        let base = domain(4);
        let k = base.wavenumber();
        let f0 = move |v: &[f64]| 1.0 + 0.2 * (k * v[0]).cos();
        let mut kernel = KernelSpec::maxwell(2, base.radius);
        kernel.angular = AngularBase::Constant(0.0);
        let cfg = StudyConfig {
            kernel,
            solver: SolverConfig::rk4(0.1, 0.5),
            quad: QuadratureSizes::default(),
        };
        let rep = convergence_study(&Reference::HighN { modes: 4, initial: &f0 }, &base, &[2, 3, 4], &cfg).unwrap();
        for r in &rep.rows {
            assert!(r.error < 1e-13, "{r:?}");
        }
    }

    #[test]
    fn fits_and_orders() {
        let (a, b) = fit_inverse_n(&[2, 4, 8], &[1.5, 1.0, 0.75]);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 2.0, epsilon = 1e-14);
        let p = local_orders(&[2, 4, 8], &[1.0, 0.25, 1.0 / 64.0]);
        assert_abs_diff_eq!(p[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 4.0, epsilon = 1e-14);
        let t = [0.0, 1.0, 2.0];
        let env = fit_envelope(&t, &[1.0, 2f64.exp(), 4f64.exp()]);
        assert_abs_diff_eq!(env.b, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(env.max_ratio, 1.0, epsilon = 1e-12);
    }
}
