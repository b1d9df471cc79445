//! Run configuration: one JSON file, fully validated before any compute.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fgboltz::gpc::{project_gpc, GpcField};
use fgboltz::kernel::sphere_measure;
use fgboltz::oracle::{bkw, bkw_coefficients, field_function, BkwParams};
use fgboltz::solver::{Integrator, SolverConfig};
use fgboltz::spectral::project_initial;
use fgboltz::{
    AngularBase, Complex64, Domain, KernelSpec, KineticForm, QuadratureRule, QuadratureSizes, RandomFactor,
    SpectralField,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub solver: SolverSection,
    pub uq: Option<UqConfig>,
    pub quad: QuadratureSizes,
    pub initial: InitialCondition,
    pub convergence: ConvergenceConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

/// Either `S` (then `R = 2S` and `L` defaults to its minimum) or both `L`
/// and `R`. With none of the three, `S` = [`DEFAULT_SUPPORT`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub d: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

pub const DEFAULT_SUPPORT: f64 = 7.3;

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 16,
            s: None,
            l: None,
            r: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kinetic {
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Angular {
    Constant,
    Tabulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LambdaConfig {
    Constant,
    /// `1 + eps z`
    Affine { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub kinetic: Kinetic,
    pub gamma: f64,
    pub angular: Angular,
    /// Value of a constant `b0`; `1 / |S^(d-1)|` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b0: Option<f64>,
    /// `(cos theta, b0)` pairs for a tabulated base.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<(f64, f64)>>,
    pub lambda: LambdaConfig,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kinetic: Kinetic::Hard,
            gamma: 0.0,
            angular: Angular::Constant,
            b0: None,
            table: None,
            lambda: LambdaConfig::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Derived from the bilinear bound and `||f0||_1` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_final: f64,
    pub integrator: Integrator,
    pub record_every: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: Some(0.01),
            t_final: 0.5,
            integrator: Integrator::Rk4,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UqMode {
    Galerkin,
    Collocation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UqConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub mode: UqMode,
    /// Collocation nodes; `K + 1` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// Largest Galerkin/collocation gap accepted by `uq`.
    pub tolerance: f64,
}

impl Default for UqConfig {
    fn default() -> Self {
        Self {
            k: 4,
            mode: UqMode::Galerkin,
            nodes: None,
            tolerance: 1e-6,
        }
    }
}

impl UqConfig {
    pub fn node_count(&self) -> usize {
        self.nodes.unwrap_or(self.k + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicMode {
    pub n: Vec<i64>,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCondition {
    /// BKW profile at `t = 0`.
    Bkw {
        #[serde(default = "default_k0")]
        k0: f64,
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "one")]
        temperature: f64,
    },
    /// Gaussian with per-axis temperatures `T_i (1 + temperature_eps z)`.
    Gaussian {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "unit_temperature")]
        temperature: Vec<f64>,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default)]
        temperature_eps: f64,
    },
    /// `mass / (2L)^d + sum a cos(kappa n . v)`.
    Harmonic {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default)]
        modes: Vec<HarmonicMode>,
    },
    /// Coefficient table written by `run` (`final_coeffs.csv`).
    Table { path: PathBuf },
}

fn default_k0() -> f64 {
    0.9
}

fn one() -> f64 {
    1.0
}

fn unit_temperature() -> Vec<f64> {
    vec![1.0]
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Bkw {
            k0: default_k0(),
            mass: 1.0,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Bkw,
    HighN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub reference: ReferenceKind,
    /// Reference resolution for `high_n`; the largest listed `N` when unset.
    #[serde(rename = "N_ref", skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 12, 16, 24],
            reference: ReferenceKind::Bkw,
            n_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Order of `z`-derivatives in the kernel and mixed-norm checks.
    pub r: usize,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub bilinear_pairs: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            r: 0,
            n_list: (4..=24).collect(),
            bilinear_pairs: 50,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Weight cache; `<dir>/weights.fgbw` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            cache: None,
        }
    }
}

impl OutputConfig {
    pub fn cache_path(&self) -> PathBuf {
        self.cache.clone().unwrap_or_else(|| self.dir.join("weights.fgbw"))
    }
}

/// `f0(v, z)`
pub type InitialFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every check that does not need a solve.
    pub fn validate(&self) -> CliResult<()> {
        let domain = self.domain()?;
        let kernel = self.kernel()?;
        kernel.validate(domain.dim)?;
        self.solver_config(1.0)?.validate()?;
        if let Some(uq) = &self.uq {
            if uq.node_count() == 0 {
                return Err(CliError::Usage("uq.nodes must be positive".into()));
            }
            if !(uq.tolerance > 0.0) {
                return Err(CliError::Usage(format!("uq.tolerance must be positive, got {}", uq.tolerance)));
            }
        }
        if self.convergence.n_list.is_empty() {
            return Err(CliError::Usage("convergence.N_list is empty".into()));
        }
        if self.verify.n_list.is_empty() {
            return Err(CliError::Usage("verify.N_list is empty".into()));
        }
        self.validate_initial(&domain)
    }

    fn validate_initial(&self, domain: &Domain) -> CliResult<()> {
        let d = domain.dim;
        match &self.initial {
            InitialCondition::Bkw { .. } => {
                self.bkw_params()?;
            }
            InitialCondition::Gaussian {
                mass,
                temperature,
                center,
                temperature_eps,
            } => {
                if !(temperature.len() == 1 || temperature.len() == d) {
                    return Err(CliError::Usage(format!(
                        "initial.temperature needs 1 or {d} entries, got {}",
                        temperature.len()
                    )));
                }
                if temperature.iter().any(|t| !(*t > 0.0)) || !mass.is_finite() {
                    return Err(CliError::Usage("Gaussian temperatures must be positive".into()));
                }
                if !(center.is_empty() || center.len() == d) {
                    return Err(CliError::Usage(format!("initial.center needs {d} entries")));
                }
                if !(temperature_eps.abs() < 1.0) {
                    return Err(CliError::Usage(format!(
                        "initial.temperature_eps must satisfy |eps| < 1, got {temperature_eps}"
                    )));
                }
            }
            InitialCondition::Harmonic { modes, .. } => {
                for m in modes {
                    if m.n.len() != d {
                        return Err(CliError::Usage(format!("harmonic mode {:?} needs {d} indices", m.n)));
                    }
                }
            }
            InitialCondition::Table { path } => {
                if !path.exists() {
                    return Err(CliError::Usage(format!("coefficient table {} not found", path.display())));
                }
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> CliResult<Domain> {
        self.domain_at(self.domain.n)
    }

    pub fn domain_at(&self, n: usize) -> CliResult<Domain> {
        let c = &self.domain;
        let domain = match (c.s, c.l, c.r) {
            (Some(s), l, r) => {
                if let Some(r) = r {
                    if (r - 2.0 * s).abs() > 1e-12 * r.abs().max(1.0) {
                        return Err(CliError::Usage(format!("R = {r} must equal 2S = {} when S is given", 2.0 * s)));
                    }
                }
                Domain::from_support(c.d, s, l, n)?
            }
            (None, Some(l), Some(r)) => Domain::new(c.d, l, r, n)?,
            (None, None, None) => Domain::from_support(c.d, DEFAULT_SUPPORT, None, n)?,
            _ => return Err(CliError::Usage("domain needs S, or both L and R".into())),
        };
        Ok(domain)
    }

    pub fn kernel(&self) -> CliResult<KernelSpec> {
        let c = &self.kernel;
        let d = self.domain.d;
        let kinetic = match c.kinetic {
            Kinetic::Hard => KineticForm::HardPower { gamma: c.gamma },
            Kinetic::Soft => KineticForm::ModifiedSoft { gamma: c.gamma },
        };
        let angular = match c.angular {
            Angular::Constant => AngularBase::Constant(c.b0.unwrap_or(1.0 / sphere_measure(d))),
            Angular::Tabulated => AngularBase::Tabulated(
                c.table
                    .clone()
                    .ok_or_else(|| CliError::Usage("tabulated angular kernel needs kernel.table".into()))?,
            ),
        };
        let random_factor = match c.lambda {
            LambdaConfig::Constant => RandomFactor::Constant,
            LambdaConfig::Affine { eps } => RandomFactor::Affine { eps },
        };
        Ok(KernelSpec {
            kinetic,
            angular,
            random_factor,
            symmetrized: true,
            radius: self.domain()?.radius,
        })
    }

    /// The kernel at `lambda = 1`, which owns the weight table.
    pub fn base_kernel(&self) -> CliResult<KernelSpec> {
        Ok(self.kernel()?.with_random_factor(RandomFactor::Constant))
    }

    /// Solver settings; `dt` falls back to the bilinear-bound heuristic.
    pub fn solver_config(&self, default_dt: f64) -> CliResult<SolverConfig> {
        let s = &self.solver;
        Ok(SolverConfig {
            dt: s.dt.unwrap_or(default_dt),
            t_final: s.t_final,
            integrator: s.integrator,
            record_every: s.record_every,
            norm_grid: None,
        })
    }

    pub fn quadrature(&self, domain: &Domain, gpc_order: usize) -> CliResult<QuadratureRule> {
        Ok(QuadratureRule::new(domain, self.quad.resolve(domain, gpc_order))?)
    }

    /// BKW parameters when the initial data is BKW and the kernel admits it.
    pub fn bkw_params(&self) -> CliResult<Option<BkwParams>> {
        match self.initial {
            InitialCondition::Bkw { k0, mass, temperature } => {
                let mut p = BkwParams::for_kernel(&self.base_kernel()?, k0)?;
                p.mass = mass;
                p.temperature = temperature;
                p.validate()?;
                Ok(Some(p))
            }
            _ => Ok(None),
        }
    }

    /// Pointwise initial data.
    pub fn initial_fn(&self) -> CliResult<InitialFn> {
        let d = self.domain.d;
        Ok(match &self.initial {
            InitialCondition::Bkw { .. } => {
                let p = self.bkw_params()?.expect("BKW initial data");
                Arc::new(move |v, _| bkw(0.0, v, &p))
            }
            InitialCondition::Gaussian {
                mass,
                temperature,
                center,
                temperature_eps,
            } => {
                let t: Vec<f64> = if temperature.len() == 1 {
                    vec![temperature[0]; d]
                } else {
                    temperature.clone()
                };
                let c = if center.is_empty() { vec![0.0; d] } else { center.clone() };
                let (mass, eps) = (*mass, *temperature_eps);
                Arc::new(move |v, z| {
                    let scale = 1.0 + eps * z;
                    let mut expo = 0.0;
                    let mut norm = mass;
                    for i in 0..d {
                        let ti = t[i] * scale;
                        expo -= (v[i] - c[i]).powi(2) / (2.0 * ti);
                        norm /= (2.0 * PI * ti).sqrt();
                    }
                    norm * expo.exp()
                })
            }
            InitialCondition::Harmonic { .. } | InitialCondition::Table { .. } => {
                let eval = field_function(self.initial_field_exact(&self.domain()?)?);
                Arc::new(move |v, _| eval(v))
            }
        })
    }

    /// Coefficients known in closed form, or `None` when a grid projection
    /// is needed.
    fn closed_form(&self, domain: &Domain) -> CliResult<Option<SpectralField>> {
        match &self.initial {
            InitialCondition::Bkw { .. } => Ok(self.bkw_params()?.map(|p| bkw_coefficients(0.0, &p, domain))),
            InitialCondition::Harmonic { .. } | InitialCondition::Table { .. } => {
                self.initial_field_exact(domain).map(Some)
            }
            InitialCondition::Gaussian { .. } => Ok(None),
        }
    }

    fn initial_field_exact(&self, domain: &Domain) -> CliResult<SpectralField> {
        match &self.initial {
            InitialCondition::Harmonic { mass, modes } => {
                let mut f = SpectralField::constant(*domain, mass / domain.volume());
                for m in modes {
                    let neg: Vec<i64> = m.n.iter().map(|x| -x).collect();
                    if f.lattice().contains(&m.n) {
                        let half = Complex64::new(0.5 * m.amplitude, 0.0);
                        f.set_coeff(&m.n, f.coeff(&m.n) + half);
                        f.set_coeff(&neg, f.coeff(&neg) + half);
                    }
                }
                Ok(f)
            }
            InitialCondition::Table { path } => crate::output::read_coefficients(path, domain),
            _ => Err(CliError::Usage("initial condition has no exact coefficients".into())),
        }
    }

    /// `P_N f0(., z)`.
    pub fn initial_field(&self, domain: &Domain, z: f64) -> CliResult<SpectralField> {
        if let Some(f) = self.closed_form(domain)? {
            return Ok(f);
        }
        let f0 = self.initial_fn()?;
        let quad = self.quadrature(domain, 0)?;
        Ok(project_initial(|v, z| f0(v, z), z, domain, &quad)?)
    }

    /// Galerkin projection of the initial data onto `Psi^0..Psi^K`.
    pub fn initial_gpc(&self, domain: &Domain, quad: &QuadratureRule, order: usize) -> CliResult<GpcField> {
        if let Some(f) = self.closed_form(domain)? {
            return Ok(GpcField::deterministic(f, order));
        }
        let f0 = self.initial_fn()?;
        Ok(project_gpc(|v, z| f0(v, z), order, domain, quad)?)
    }

    /// Whether the initial data depends on `z`.
    pub fn initial_is_random(&self) -> bool {
        matches!(self.initial, InitialCondition::Gaussian { temperature_eps, .. } if temperature_eps != 0.0)
    }
}
