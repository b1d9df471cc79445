//! Explicit time stepping for the deterministic, gPC-Galerkin and
//! collocation systems.

use std::fmt::Debug;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{record_field, record_gpc, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::gpc::{gpc_collision_rhs, GpcField, STensor};
use crate::kernel::RandomFactor;
use crate::spectral::{bilinear_rhs, SpectralField, WeightTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub record_every: usize,
    /// Grid for `L^1` and negative-part diagnostics; `4(2N+1)` when unset.
    #[serde(default)]
    pub norm_grid: Option<usize>,
}

impl SolverConfig {
    pub fn rk4(dt: f64, t_final: f64) -> Self {
        Self {
            dt,
            t_final,
            integrator: Integrator::Rk4,
            record_every: 1,
            norm_grid: None,
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt.is_finite() && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "need dt > 0 and t_final > 0, got dt = {}, t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.dt > self.t_final {
            return Err(Error::Config(format!(
                "dt = {} exceeds t_final = {}",
                self.dt, self.t_final
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; `dt` is shrunk so they land exactly on `t_final`.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    /// Heuristic step `0.01 / (C ||f0||_1)` for a bilinear-bound constant `C`.
    pub fn default_dt(bound_constant: f64, l1: f64) -> f64 {
        0.01 / (bound_constant * l1)
    }

    /// `dt C ||f0||_1 <= 0.5`.
    pub fn stability_advisory(&self, bound_constant: f64, l1: f64) -> bool {
        self.dt * bound_constant * l1 <= 0.5
    }

    fn norm_grid(&self, modes: usize) -> usize {
        self.norm_grid.unwrap_or(4 * (2 * modes + 1))
    }
}

/// State vector of an explicit integrator.
pub trait SolverState: Clone + Send + Sync + Debug {
    fn add_scaled(&mut self, a: f64, other: &Self);
    fn is_finite(&self) -> bool;
    fn l2(&self) -> f64;
    fn modes(&self) -> usize;
    fn record(&self, t: f64, initial: &Self, grid_m: usize) -> DiagnosticsRecord;
}

impl SolverState for SpectralField {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        SpectralField::add_scaled(self, a, other)
    }
    fn is_finite(&self) -> bool {
        SpectralField::is_finite(self)
    }
    fn l2(&self) -> f64 {
        SpectralField::l2(self)
    }
    fn modes(&self) -> usize {
        self.domain.modes
    }
    fn record(&self, t: f64, initial: &Self, grid_m: usize) -> DiagnosticsRecord {
        record_field(t, self, initial.mass(), grid_m)
    }
}

impl SolverState for GpcField {
    fn add_scaled(&mut self, a: f64, other: &Self) {
        GpcField::add_scaled(self, a, other)
    }
    fn is_finite(&self) -> bool {
        GpcField::is_finite(self)
    }
    fn l2(&self) -> f64 {
        GpcField::l2(self)
    }
    fn modes(&self) -> usize {
        self.domain().modes
    }
    fn record(&self, t: f64, initial: &Self, grid_m: usize) -> DiagnosticsRecord {
        record_gpc(t, self, &initial.mode_masses(), grid_m)
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub final_state: S,
    pub final_time: f64,
    pub dt: f64,
    pub steps: usize,
}

impl<S> Trajectory<S> {
    /// Largest relative mass drift over the records.
    pub fn max_mass_drift(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.mass_drift).fold(0.0, f64::max)
    }

    pub fn max_l1(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.l1).fold(0.0, f64::max)
    }
}

/// A run stopped early, with the trajectory up to the last finite state.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct Interrupted<S: Debug> {
    pub error: Error,
    pub partial: Trajectory<S>,
}

impl<S: Debug> From<Box<Interrupted<S>>> for Error {
    fn from(i: Box<Interrupted<S>>) -> Self {
        i.error
    }
}

pub type RunResult<S> = std::result::Result<Trajectory<S>, Box<Interrupted<S>>>;

/// One explicit step of `y' = rhs(y)`.
pub fn step<S, F>(y: &S, rhs: &F, dt: f64, integrator: Integrator) -> Result<S>
where
    S: SolverState,
    F: Fn(&S) -> Result<S>,
{
    match integrator {
        Integrator::Euler => {
            let k = rhs(y)?;
            let mut out = y.clone();
            out.add_scaled(dt, &k);
            Ok(out)
        }
        Integrator::Rk4 => {
            let k1 = rhs(y)?;
            let mut tmp = y.clone();
            tmp.add_scaled(0.5 * dt, &k1);
            let k2 = rhs(&tmp)?;
            tmp = y.clone();
            tmp.add_scaled(0.5 * dt, &k2);
            let k3 = rhs(&tmp)?;
            tmp = y.clone();
            tmp.add_scaled(dt, &k3);
            let k4 = rhs(&tmp)?;
            let mut out = y.clone();
            out.add_scaled(dt / 6.0, &k1);
            out.add_scaled(dt / 3.0, &k2);
            out.add_scaled(dt / 3.0, &k3);
            out.add_scaled(dt / 6.0, &k4);
            Ok(out)
        }
    }
}

/// Integrate `y' = rhs(y)` from `y0` to `cfg.t_final`.
pub fn integrate<S, F>(y0: &S, rhs: F, cfg: &SolverConfig) -> RunResult<S>
where
    S: SolverState,
    F: Fn(&S) -> Result<S>,
{
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let grid_m = cfg.norm_grid(y0.modes());
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![y0.clone()],
        diagnostics: vec![y0.record(0.0, y0, grid_m)],
        final_state: y0.clone(),
        final_time: 0.0,
        dt,
        steps,
    };
    if let Err(error) = cfg.validate() {
        return Err(Box::new(Interrupted { error, partial: traj }));
    }
    let mut y = y0.clone();
    for n in 1..=steps {
        let t = n as f64 * dt;
        let next = match step(&y, &rhs, dt, cfg.integrator) {
            Ok(next) => next,
            Err(error) => return Err(Box::new(Interrupted { error, partial: traj })),
        };
        if !next.is_finite() {
            let error = Error::BlowUp { t, l2: next.l2() };
            return Err(Box::new(Interrupted { error, partial: traj }));
        }
        y = next;
        traj.final_state = y.clone();
        traj.final_time = t;
        if n % cfg.record_every == 0 {
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.diagnostics.push(y.record(t, y0, grid_m));
        }
    }
    Ok(traj)
}

/// One step of the deterministic system. A non-finite result is reported as
/// a blow-up at time `dt` relative to the start of the step.
pub fn step_deterministic(
    f: &SpectralField,
    table: &WeightTable,
    dt: f64,
    integrator: Integrator,
) -> Result<SpectralField> {
    let out = step(f, &|y: &SpectralField| bilinear_rhs(table, y, y, 1.0), dt, integrator)?;
    if !out.is_finite() {
        return Err(Error::BlowUp { t: dt, l2: out.l2() });
    }
    Ok(out)
}

pub fn run(f0: &SpectralField, table: &WeightTable, cfg: &SolverConfig) -> RunResult<SpectralField> {
    run_scaled(f0, table, 1.0, cfg)
}

/// Deterministic run with the collision operator multiplied by `scale`,
/// i.e. the per-node system of a separable kernel with `lambda(z) = scale`.
pub fn run_scaled(
    f0: &SpectralField,
    table: &WeightTable,
    scale: f64,
    cfg: &SolverConfig,
) -> RunResult<SpectralField> {
    integrate(f0, |y: &SpectralField| bilinear_rhs(table, y, y, scale), cfg)
}

pub fn run_gpc(f0: &GpcField, table: &WeightTable, s: &STensor, cfg: &SolverConfig) -> RunResult<GpcField> {
    integrate(f0, |y: &GpcField| gpc_collision_rhs(table, s, y), cfg)
}

/// Independent runs at each collocation node, sharing the `lambda = 1` table.
pub fn run_collocation<F>(
    f0: F,
    z_nodes: &[f64],
    table: &WeightTable,
    lambda: &RandomFactor,
    cfg: &SolverConfig,
) -> Vec<RunResult<SpectralField>>
where
    F: Fn(f64) -> Result<SpectralField> + Sync,
{
    z_nodes
        .par_iter()
        .map(|&z| {
            let init = match f0(z) {
                Ok(f) => f,
                Err(error) => {
                    let empty = SpectralField::zeros(table.domain, true);
                    return Err(Box::new(Interrupted {
                        error,
                        partial: Trajectory {
                            times: vec![],
                            states: vec![],
                            diagnostics: vec![],
                            final_state: empty,
                            final_time: 0.0,
                            dt: cfg.effective_dt(),
                            steps: 0,
                        },
                    }));
                }
            };
            run_scaled(&init, table, lambda.eval(z), cfg)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Domain, KernelSpec};
    use crate::quadrature::QuadratureRule;
    use crate::spectral::{collision_rhs, precompute_weights, random_hermitian};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(n: usize) -> WeightTable {
        let domain = Domain::from_support(2, 1.0, None, n).unwrap();
        let spec = KernelSpec::maxwell(2, domain.radius);
        let quad = QuadratureRule::for_domain(&domain, 0).unwrap();
        precompute_weights(&spec, &domain, &quad).unwrap()
    }

    fn smooth_field(t: &WeightTable, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = random_hermitian(t.domain, &mut rng, 0.6).scaled(0.05);
        let z = f.lattice().zero_index();
        f.coeffs[z] = Complex64::new(1.0 / t.domain.volume(), 0.0);
        f
    }

    #[test]
    fn step_counts_and_records() {
        let cfg = SolverConfig::rk4(0.3, 1.0).with_record_every(2);
        assert_eq!(cfg.steps(), 4);
        assert!((cfg.effective_dt() - 0.25).abs() < 1e-15);
        assert_eq!(SolverConfig::rk4(0.1, 1.0).steps(), 10);
        let t = table(2);
        let f = SpectralField::constant(t.domain, 0.2);
        let traj = run(&f, &t, &cfg).unwrap();
        assert_eq!(traj.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(traj.states.len(), 4 / 2 + 1);
    }

    #[test]
    fn equilibrium_is_unchanged() {
        let t = table(3);
        let f = SpectralField::constant(t.domain, 0.2);
        let g = step_deterministic(&f, &t, 0.1, Integrator::Rk4).unwrap();
        assert_eq!(f, g);
        let traj = run(&f, &t, &SolverConfig::rk4(0.1, 1.0)).unwrap();
        let mut d = traj.final_state.clone();
        d.add_scaled(-1.0, &f);
        assert!(d.l2() <= 1e-13);
    }

    #[test]
    fn euler_is_the_definition() {
        let t = table(2);
        let f = smooth_field(&t, 1);
        let dt = 0.05;
        let mut expected = f.clone();
        expected.add_scaled(dt, &collision_rhs(&t, &f).unwrap());
        let got = step_deterministic(&f, &t, dt, Integrator::Euler).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn rk4_step_consistent_with_derivative() {
        let t = table(4);
        let f = smooth_field(&t, 2);
        let q = collision_rhs(&t, &f).unwrap();
        let mut prev = f64::INFINITY;
        for dt in [1e-2, 5e-3] {
            let mut d = step_deterministic(&f, &t, dt, Integrator::Rk4).unwrap();
            d.add_scaled(-1.0, &f);
            d.add_scaled(-dt, &q);
            let rel = d.l2() / (dt * dt);
            assert!(rel < prev * 1.05);
            prev = rel;
        }
    }

    #[test]
    fn mass_and_reality_preserved() {
        let t = table(4);
        let f = smooth_field(&t, 3);
        let traj = run(&f, &t, &SolverConfig::rk4(0.05, 1.0)).unwrap();
        assert!(traj.max_mass_drift() <= 1e-12 * traj.steps as f64);
        assert!(traj.final_state.real_valued);
        assert!(traj.final_state.hermitian_defect() < 1e-12);
    }

    #[test]
    fn blow_up_keeps_partial_trajectory() {
        let t = table(2);
        let mut f = smooth_field(&t, 4).scaled(1e200);
        f.coeffs[0] = Complex64::new(1e300, 0.0);
        let err = run(&f, &t, &SolverConfig::rk4(0.5, 2.0)).unwrap_err();
        assert!(matches!(err.error, Error::BlowUp { .. }));
        assert_eq!(err.partial.times, vec![0.0]);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(SolverConfig::rk4(2.0, 1.0).validate().is_err());
        assert!(SolverConfig::rk4(0.1, 1.0).with_record_every(0).validate().is_err());
    }

    #[test]
    fn collocation_scaling_is_time_rescaling() {
        let t = table(3);
        let f = smooth_field(&t, 5);
        let lambda = RandomFactor::Affine { eps: 0.5 };
        // lambda(-1) = 0.5
        let cfg = SolverConfig::rk4(0.01, 1.0);
        let runs = run_collocation(|_| Ok(f.clone()), &[-1.0, 1.0], &t, &lambda, &cfg);
        let slow = runs[0].as_ref().unwrap();
        let half = run(&f, &t, &SolverConfig::rk4(0.005, 0.5)).unwrap();
        let mut d = slow.final_state.clone();
        d.add_scaled(-1.0, &half.final_state);
        assert!(d.l2() < 1e-12 * f.l2().max(1.0));

        let same = run_collocation(|_| Ok(f.clone()), &[0.2, 0.2], &t, &RandomFactor::Constant, &cfg);
        assert_eq!(
            same[0].as_ref().unwrap().final_state,
            same[1].as_ref().unwrap().final_state
        );
    }
}
