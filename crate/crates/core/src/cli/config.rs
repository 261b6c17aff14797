//! Configuration files for the command-line tool.
//!
//! All configs are JSON. Complex numbers are `[re, im]` pairs, matrices are
//! lists of rows. Energies may use any unit as long as `beta` is in the
//! inverse unit; only the products `βE` and `βw` enter the results.

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::hamiltonian::SpectralHamiltonian;
use crate::instrument::{
    build_crooks, build_error_free, build_ji_erroneous, build_jii, build_mixed_projective, build_projective, depolarizing,
    transpose_depolarizing, Channel, CrooksVariant, Instrument,
};
use crate::linalg::{DensityMatrix, HermitianOperator, UnitaryOperator};
use crate::random::{haar_unitary, seeded_rng};
use crate::serialize::{matrix_from_rows, DynamicsSpec, HamiltonianSpec, InstrumentJson, MatrixJson};
use crate::verifier::TargetCheck;
use crate::verifier::Scenario;

/// A config problem, located by its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl ConfigError {
    pub fn at(path: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self { path: path.into(), message: err.to_string() }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError { path: e.path().to_string(), message: e.inner().to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    #[default]
    InstrumentForm,
    UniversalChannel,
}

impl From<VariantSpec> for CrooksVariant {
    fn from(v: VariantSpec) -> Self {
        match v {
            VariantSpec::InstrumentForm => CrooksVariant::InstrumentForm,
            VariantSpec::UniversalChannel => CrooksVariant::UniversalChannel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Identity,
    Depolarizing { alpha: f64 },
    TransposeDepolarizing { alpha: f64 },
    Unitary(MatrixJson),
    Haar { seed: u64 },
    /// Constant output `σ`.
    Replacement(MatrixJson),
    Kraus(Vec<MatrixJson>),
}

impl ChannelSpec {
    pub fn build(&self, dim: usize) -> crate::Result<Channel> {
        match self {
            ChannelSpec::Identity => Ok(Channel::identity(dim)),
            ChannelSpec::Depolarizing { alpha } => depolarizing(*alpha, dim),
            ChannelSpec::TransposeDepolarizing { alpha } => transpose_depolarizing(*alpha, dim),
            ChannelSpec::Unitary(rows) => Ok(Channel::unitary(&UnitaryOperator::new(matrix_from_rows(rows)?)?)),
            ChannelSpec::Haar { seed } => Ok(Channel::unitary(&haar_unitary(dim, *seed)?)),
            ChannelSpec::Replacement(rows) => Ok(Channel::replacement(&DensityMatrix::new(matrix_from_rows(rows)?)?)),
            ChannelSpec::Kraus(ops) => Channel::from_kraus(ops.iter().map(matrix_from_rows).collect::<crate::Result<_>>()?),
        }
    }
}

/// Instrument by builder name and parameters, or explicit Kraus operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstrumentSpec {
    Projective,
    Jii,
    /// One channel per energy level, or a single channel for all of them.
    ErrorFree {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        channels: Vec<ChannelSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        channel: Option<ChannelSpec>,
    },
    Crooks {
        alpha: f64,
        #[serde(default)]
        variant: VariantSpec,
    },
    /// `q[m][i]`: probability of outcome `m` for basis vector `i`. The basis
    /// is a unitary's columns or, without one, Haar-random from `basis_seed`.
    JiErroneous {
        q: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<MatrixJson>,
        #[serde(default)]
        basis_seed: u64,
    },
    MixedProjective { epsilon: f64 },
    Kraus(InstrumentJson),
}

impl InstrumentSpec {
    pub fn build(&self, h: &SpectralHamiltonian) -> crate::Result<Instrument> {
        let dim = h.dim();
        match self {
            InstrumentSpec::Projective => Ok(build_projective(h)),
            InstrumentSpec::Jii => Ok(build_jii(h)),
            InstrumentSpec::ErrorFree { channels, channel } => {
                let built = match (channel, channels.is_empty()) {
                    (Some(c), true) => vec![c.build(dim)?; h.level_count()],
                    (None, false) => channels.iter().map(|c| c.build(dim)).collect::<crate::Result<_>>()?,
                    _ => {
                        return Err(crate::Error::InvalidArgument(
                            "give exactly one of `channel` or `channels`".into(),
                        ))
                    }
                };
                build_error_free(h, &built)
            }
            InstrumentSpec::Crooks { alpha, variant } => build_crooks(h, *alpha, (*variant).into()),
            InstrumentSpec::JiErroneous { q, basis, basis_seed } => {
                let rows = q.len();
                let cols = q.first().map_or(0, Vec::len);
                if q.iter().any(|r| r.len() != cols) {
                    return Err(crate::Error::InvalidStochastic("rows of q differ in length".into()));
                }
                let q = DMatrix::from_fn(rows, cols, |m, i| q[m][i]);
                let basis = match basis {
                    Some(rows) => UnitaryOperator::new(matrix_from_rows(rows)?)?,
                    None => haar_unitary(dim, *basis_seed)?,
                };
                build_ji_erroneous(h, &basis, &q)
            }
            InstrumentSpec::MixedProjective { epsilon } => build_mixed_projective(h, *epsilon),
            InstrumentSpec::Kraus(json) => json.build(),
        }
    }

    /// The same builder with its free parameter replaced, for grid scans.
    pub fn with_parameter(&self, value: f64) -> Self {
        match self {
            InstrumentSpec::Crooks { variant, .. } => InstrumentSpec::Crooks { alpha: value, variant: *variant },
            InstrumentSpec::MixedProjective { .. } => InstrumentSpec::MixedProjective { epsilon: value },
            other => other.clone(),
        }
    }
}

/// Tolerances applied by each check. `alpha` is the allowed mismatch between
/// the fitted depolarizing parameters of both measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub jarzynski: f64,
    pub backward_jarzynski: f64,
    pub crooks: f64,
    pub detailed_balance: f64,
    pub condition: f64,
    pub alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { jarzynski: 1e-10, backward_jarzynski: 1e-10, crooks: 1e-9, detailed_balance: 1e-10, condition: 1e-10, alpha: 1e-8 }
    }
}

impl Tolerances {
    /// Applies `key=value` pairs separated by commas.
    pub fn apply_overrides(&mut self, spec: &str) -> Result<(), ConfigError> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::at("--tol-overrides", format!("expected key=value, got `{item}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| ConfigError::at(format!("--tol-overrides.{}", key.trim()), e))?;
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::at(format!("--tol-overrides.{}", key.trim()), "tolerance must be finite and non-negative"));
            }
            let slot = match key.trim() {
                "jarzynski" => &mut self.jarzynski,
                "backward_jarzynski" => &mut self.backward_jarzynski,
                "crooks" => &mut self.crooks,
                "detailed_balance" => &mut self.detailed_balance,
                "condition" => &mut self.condition,
                "alpha" => &mut self.alpha,
                other => return Err(ConfigError::at("--tol-overrides", format!("unknown tolerance `{other}`"))),
            };
            *slot = value;
        }
        Ok(())
    }

    pub fn for_check(&self, check: TargetCheck) -> f64 {
        match check {
            TargetCheck::Jarzynski => self.jarzynski,
            TargetCheck::BackwardJarzynski => self.backward_jarzynski,
            TargetCheck::Crooks => self.crooks,
            TargetCheck::DetailedBalance => self.detailed_balance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Jarzynski,
    BackwardJarzynski,
    Crooks,
    DetailedBalance,
    ConditionJi,
    ConditionJii,
    CrooksCondition,
}

impl CheckName {
    pub fn target(self) -> Option<TargetCheck> {
        match self {
            CheckName::Jarzynski => Some(TargetCheck::Jarzynski),
            CheckName::BackwardJarzynski => Some(TargetCheck::BackwardJarzynski),
            CheckName::Crooks => Some(TargetCheck::Crooks),
            CheckName::DetailedBalance => Some(TargetCheck::DetailedBalance),
            _ => None,
        }
    }
}

fn default_checks() -> Vec<CheckName> {
    vec![CheckName::Jarzynski, CheckName::BackwardJarzynski, CheckName::Crooks, CheckName::DetailedBalance]
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdversarialConfig {
    pub budget: usize,
    pub restarts: usize,
    pub vary_dynamics: bool,
    pub vary_scale: bool,
}

impl Default for AdversarialConfig {
    fn default() -> Self {
        Self { budget: 500, restarts: 8, vary_dynamics: true, vary_scale: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub beta: f64,
    pub initial: HamiltonianSpec,
    #[serde(rename = "final")]
    pub final_: HamiltonianSpec,
    pub dynamics: DynamicsSpec,
    pub instr0: InstrumentSpec,
    pub instr_tau: InstrumentSpec,
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckName>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Time unit for quench dynamics; the evolution is `e^{−iτH/ħ}`.
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub adversarial: Option<AdversarialConfig>,
    /// File names inside the output directory.
    #[serde(default)]
    pub outputs: OutputNames,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputNames {
    pub report: String,
    pub summary: String,
}

impl Default for OutputNames {
    fn default() -> Self {
        Self { report: "report.json".into(), summary: "summary.csv".into() }
    }
}

impl VerifyConfig {
    pub fn scenario(&self, seed: u64) -> Result<Scenario, ConfigError> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(ConfigError::at("hbar", "must be positive"));
        }
        let h0 = self.initial.build().map_err(|e| ConfigError::at("initial", e))?;
        let h1 = self.final_.build().map_err(|e| ConfigError::at("final", e))?;
        if h0.dim() != h1.dim() {
            return Err(ConfigError::at("final", format!("dimension {} differs from initial dimension {}", h1.dim(), h0.dim())));
        }
        let dynamics = match &self.dynamics {
            DynamicsSpec::Quench { generator, tau } => DynamicsSpec::Quench { generator: generator.clone(), tau: tau / self.hbar },
            other => other.clone(),
        };
        let protocol = dynamics.build_protocol(h0.clone(), h1.clone(), seed).map_err(|e| ConfigError::at("dynamics", e))?;
        let i0 = self.instr0.build(&h0).map_err(|e| ConfigError::at("instr0", e))?;
        let i1 = self.instr_tau.build(&h1).map_err(|e| ConfigError::at("instr_tau", e))?;
        Scenario::new(protocol, i0, i1, self.beta).map_err(|e| ConfigError::at("beta", e))
    }
}

/// Values of the instrument parameter, either listed or spread evenly over
/// the instrument-form range `[−1/(D−1), 1]` of each dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterGrid {
    Values(Vec<f64>),
    InstrumentRange { points: usize },
}

impl ParameterGrid {
    pub fn values(&self, dim: usize) -> Vec<f64> {
        match self {
            ParameterGrid::Values(v) => v.clone(),
            ParameterGrid::InstrumentRange { points } => {
                let lo = -1.0 / (dim as f64 - 1.0);
                match points {
                    0 => Vec::new(),
                    1 => vec![1.0],
                    n => (0..*n).map(|i| lo + (1.0 - lo) * i as f64 / (*n - 1) as f64).collect(),
                }
            }
        }
    }
}

fn default_parameter_grid() -> ParameterGrid {
    ParameterGrid::Values(vec![0.0])
}

fn one() -> Vec<f64> {
    vec![1.0]
}

fn default_protocols() -> usize {
    1
}

/// Grid over dimension, instrument parameter, β and spectrum scale. Both
/// measurements use `instrument` with the grid parameter; Hamiltonians are
/// nondegenerate with generic level spacings and dynamics are Haar-random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub instrument: InstrumentSpec,
    pub dims: Vec<usize>,
    #[serde(default = "default_parameter_grid")]
    pub parameter: ParameterGrid,
    pub betas: Vec<f64>,
    #[serde(default = "one")]
    pub scales: Vec<f64>,
    /// Haar protocols per grid point.
    #[serde(default = "default_protocols")]
    pub protocols: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<String>,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, &d) in self.dims.iter().enumerate() {
            if !(2..=16).contains(&d) {
                return Err(ConfigError::at(format!("dims[{i}]"), "dimension must lie in 2..=16"));
            }
        }
        for (i, &b) in self.betas.iter().enumerate() {
            if !(b.is_finite() && b > 0.0) {
                return Err(ConfigError::at(format!("betas[{i}]"), "β must be positive"));
            }
        }
        for (i, &x) in self.scales.iter().enumerate() {
            if !(x.is_finite() && x > 0.0) {
                return Err(ConfigError::at(format!("scales[{i}]"), "scale must be positive"));
            }
        }
        if self.protocols == 0 {
            return Err(ConfigError::at("protocols", "need at least one protocol"));
        }
        Ok(())
    }
}

/// Pure states are given as vectors; they are normalised on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LemmaExperiment {
    /// `Tr U†AUB` over Haar and structured unitaries.
    Lemma3 {
        a: MatrixJson,
        b: MatrixJson,
        #[serde(default = "default_lemma_tol")]
        tol: f64,
        #[serde(default = "default_samples")]
        n_haar: usize,
        #[serde(default = "default_samples")]
        n_structured: usize,
    },
    /// `⟨a|U†ρU|a⟩` against `⟨b|UσU†|b⟩`.
    Lemma4 {
        rho: MatrixJson,
        sigma: MatrixJson,
        a: Vec<[f64; 2]>,
        b: Vec<[f64; 2]>,
        #[serde(default = "default_samples")]
        n_haar: usize,
    },
    /// A family member, optionally pushed off the family by `δ|c⟩⟨c|` on `ρ`
    /// (renormalised) with a Haar-random `|c⟩`.
    Lemma4Family {
        alpha: f64,
        dim: usize,
        #[serde(default)]
        perturbation: f64,
        #[serde(default = "default_samples")]
        n_haar: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Error-freeness and projector effects must agree.
    AppendixA {
        hamiltonian: HamiltonianSpec,
        instrument: InstrumentSpec,
        #[serde(default = "default_condition_tol")]
        tol: f64,
    },
}

fn default_lemma_tol() -> f64 {
    1e-12
}

fn default_condition_tol() -> f64 {
    1e-10
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_samples() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    pub experiments: Vec<LemmaExperiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<String>,
}

pub(crate) fn hermitian_at(rows: &MatrixJson, path: &str) -> Result<HermitianOperator, ConfigError> {
    matrix_from_rows(rows).and_then(HermitianOperator::new).map_err(|e| ConfigError::at(path, e))
}

pub(crate) fn density_at(rows: &MatrixJson, path: &str) -> Result<DensityMatrix, ConfigError> {
    matrix_from_rows(rows).and_then(DensityMatrix::new).map_err(|e| ConfigError::at(path, e))
}

/// Random generic Hamiltonian pair and Haar unitary for scan cell `(dim, k)`.
pub(crate) fn scan_protocol_parts(dim: usize, k: usize, seed: u64) -> (Vec<f64>, Vec<f64>, UnitaryOperator) {
    let stream_seed = seed.wrapping_mul(0x9e37_79b9).wrapping_add((dim * 1000 + k) as u64);
    let e0 = crate::hamiltonian::nondegenerate_difference_spectrum(dim, stream_seed);
    let e1 = crate::hamiltonian::nondegenerate_difference_spectrum(dim, stream_seed ^ 0xa5a5);
    let mut rng = seeded_rng(seed, (dim * 1000 + k) as u64);
    (e0, e1, crate::random::sample_haar_unitary(&mut rng, dim))
}
