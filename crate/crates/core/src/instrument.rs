//! Quantum operations, channels and energy-measurement instruments.
//!
//! Operations are stored in Kraus form, so complete positivity holds by
//! construction. Kraus sets are not unique; two operations are compared
//! through their Choi matrices (see [`QuantumOperation::equivalent_to`]).

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;
use crate::linalg::{
    self, c64, choi_of_map, identity, kraus_from_choi, max_abs_diff, trace, CMatrix,
    DensityMatrix, HermitianOperator, UnitaryOperator, PSD_TOL,
};
use crate::random::{sample_haar_unitary, uniform_in};

/// Tolerance for trace preservation, completeness of effects and the
/// trace-nonincreasing bound.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// A completely positive, trace-nonincreasing map `ρ ↦ Σ_l B_l ρ B_l†`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumOperation {
    dim: usize,
    kraus: Vec<CMatrix>,
}

impl QuantumOperation {
    /// Validates shapes and `Σ_l B_l† B_l ≤ 1` (within 1e-10).
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let op = Self::from_kraus_shapes(kraus)?;
        let max_eff = op.effect().eig().max();
        if max_eff > 1.0 + COMPLETENESS_TOL {
            return Err(Error::InvalidInstrument(format!(
                "operation is trace-increasing (largest effect eigenvalue {max_eff:.12})"
            )));
        }
        Ok(op)
    }

    fn from_kraus_shapes(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::InvalidArgument("an operation needs at least one Kraus operator".into()))?;
        let dim = linalg::require_square(first)?;
        for k in &kraus {
            if k.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch { expected: dim, actual: k.nrows().max(k.ncols()) });
            }
            linalg::require_finite(k)?;
        }
        Ok(Self { dim, kraus })
    }

    pub(crate) fn from_kraus_unchecked(kraus: Vec<CMatrix>) -> Self {
        let dim = kraus[0].nrows();
        Self { dim, kraus }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `Σ_l B_l X B_l†` for an arbitrary operator `X`.
    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k * x * k.adjoint();
        }
        out
    }

    /// Non-normalised post-measurement state.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: rho.dim() });
        }
        Ok(DensityMatrix::from_cp_image(self.apply_matrix(rho.matrix())))
    }

    /// Dual map `X ↦ Σ_l B_l† X B_l`.
    pub fn dual(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k.adjoint() * x * k;
        }
        out
    }

    /// The effect `Σ_l B_l† B_l`.
    pub fn effect(&self) -> HermitianOperator {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in &self.kraus {
            out += k.adjoint() * k;
        }
        HermitianOperator::from_hermitian_part(out)
    }

    pub fn choi(&self) -> HermitianOperator {
        linalg::choi(&self.kraus).expect("Kraus shapes validated on construction")
    }

    /// Entrywise conjugated Kraus operators: `ρ ↦ θ† φ(θ ρ θ†) θ`.
    pub fn conj(&self) -> Self {
        Self { dim: self.dim, kraus: self.kraus.iter().map(linalg::conj).collect() }
    }

    /// `self ∘ first`, with all pairwise Kraus products.
    pub fn after(&self, first: &QuantumOperation) -> Self {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| first.kraus.iter().map(move |b| a * b))
            .collect();
        Self { dim: self.dim, kraus }
    }

    /// Choi-matrix distance in max norm.
    pub fn choi_distance(&self, other: &QuantumOperation) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        max_abs_diff(self.choi().matrix(), other.choi().matrix())
    }

    pub fn equivalent_to(&self, other: &QuantumOperation, tol: f64) -> bool {
        self.choi_distance(other) <= tol
    }
}

/// Free-function form of [`QuantumOperation::apply`].
pub fn apply(op: &QuantumOperation, rho: &DensityMatrix) -> Result<DensityMatrix> {
    op.apply(rho)
}

/// Free-function form of [`QuantumOperation::effect`].
pub fn effect(op: &QuantumOperation) -> HermitianOperator {
    op.effect()
}

/// A trace-preserving operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    operation: QuantumOperation,
}

impl Channel {
    pub fn new(operation: QuantumOperation) -> Result<Self> {
        let defect = max_abs_diff(operation.effect().matrix(), &identity(operation.dim()));
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidArgument(format!(
                "channel is not trace preserving (max |Σ B†B − 1| = {defect:.3e})"
            )));
        }
        Ok(Self { operation })
    }

    pub fn from_kraus(kraus: Vec<CMatrix>) -> Result<Self> {
        Self::new(QuantumOperation::from_kraus_shapes(kraus)?)
    }

    pub fn identity(dim: usize) -> Self {
        Self { operation: QuantumOperation::from_kraus_unchecked(vec![identity(dim)]) }
    }

    pub fn unitary(u: &UnitaryOperator) -> Self {
        Self { operation: QuantumOperation::from_kraus_unchecked(vec![u.matrix().clone()]) }
    }

    /// Channel with the given Choi matrix; rejected when the Choi matrix has
    /// an eigenvalue below `-PSD_TOL` (relative).
    pub fn from_choi(j: &HermitianOperator, dim: usize) -> Result<Self> {
        Self::from_kraus(kraus_from_choi(j, dim, PSD_TOL)?)
    }

    /// `ρ ↦ Tr(ρ)·σ`.
    pub fn replacement(sigma: &DensityMatrix) -> Self {
        let dim = sigma.dim();
        let eig = sigma.as_hermitian().eig();
        let mut kraus = Vec::new();
        for (k, &s) in eig.eigenvalues.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            let ket = eig.eigenvector(k) * c64(s.sqrt(), 0.0);
            for i in 0..dim {
                kraus.push(&ket * linalg::basis_vector(dim, i).adjoint());
            }
        }
        Self { operation: QuantumOperation::from_kraus_unchecked(kraus) }
    }

    /// Random channel from a Haar-random Stinespring isometry with
    /// `n_kraus` environment levels.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_kraus: usize) -> Self {
        let n_kraus = n_kraus.max(1);
        let big = sample_haar_unitary(rng, dim * n_kraus);
        let kraus = (0..n_kraus)
            .map(|l| big.matrix().view((l * dim, 0), (dim, dim)).into_owned())
            .collect();
        Self { operation: QuantumOperation::from_kraus_unchecked(kraus) }
    }

    /// Random mixture of `n_unitaries` Haar unitaries (always unital).
    pub fn random_unital<R: Rng + ?Sized>(rng: &mut R, dim: usize, n_unitaries: usize) -> Self {
        let n = n_unitaries.max(1);
        let weights: Vec<f64> = (0..n).map(|_| uniform_in(rng, 0.05, 1.0)).collect();
        let total: f64 = weights.iter().sum();
        let kraus = weights
            .iter()
            .map(|w| sample_haar_unitary(rng, dim).into_matrix() * c64((w / total).sqrt(), 0.0))
            .collect();
        Self { operation: QuantumOperation::from_kraus_unchecked(kraus) }
    }

    pub fn dim(&self) -> usize {
        self.operation.dim
    }

    pub fn operation(&self) -> &QuantumOperation {
        &self.operation
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.operation.kraus
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        self.operation.apply(rho)
    }

    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        self.operation.apply_matrix(x)
    }

    /// `‖Φ(1) − 1‖_max`.
    pub fn unitality_defect(&self) -> f64 {
        let dim = self.dim();
        max_abs_diff(&self.operation.apply_matrix(&identity(dim)), &identity(dim))
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        self.unitality_defect() <= tol
    }

    pub fn choi(&self) -> HermitianOperator {
        self.operation.choi()
    }

    pub fn conj(&self) -> Self {
        Self { operation: self.operation.conj() }
    }
}

pub fn is_unital(channel: &Channel, tol: f64) -> bool {
    channel.is_unital(tol)
}

fn depolarizing_action(alpha: f64, dim: usize, x: &CMatrix) -> CMatrix {
    identity(dim) * (trace(x) * c64((1.0 - alpha) / dim as f64, 0.0)) + x * c64(alpha, 0.0)
}

/// `ρ ↦ (1−α) Tr(ρ)/D · 1 + α ρ`, accepted iff its Choi matrix is PSD.
pub fn depolarizing(alpha: f64, dim: usize) -> Result<Channel> {
    check_alpha(alpha, dim)?;
    Channel::from_choi(&choi_of_map(dim, |x| depolarizing_action(alpha, dim, x)), dim)
}

/// `ρ ↦ (1−α) Tr(ρ)/D · 1 + α ρᵀ` with the transpose in the computational
/// basis, accepted iff its Choi matrix is PSD.
pub fn transpose_depolarizing(alpha: f64, dim: usize) -> Result<Channel> {
    transpose_depolarizing_in_basis(alpha, &UnitaryOperator::identity(dim))
}

/// Transpose-depolarizing channel with the transpose taken in the basis given
/// by the columns of `basis` (e.g. an energy eigenbasis).
pub fn transpose_depolarizing_in_basis(alpha: f64, basis: &UnitaryOperator) -> Result<Channel> {
    let dim = basis.dim();
    check_alpha(alpha, dim)?;
    let v = basis.matrix();
    let j = choi_of_map(dim, |x| {
        let in_basis = v.adjoint() * x * v;
        let transposed = v * in_basis.transpose() * v.adjoint();
        depolarizing_action(alpha, dim, x) - x * c64(alpha, 0.0) + transposed * c64(alpha, 0.0)
    });
    Channel::from_choi(&j, dim)
}

fn check_alpha(alpha: f64, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
    }
    Ok(())
}

/// One labelled outcome of an instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: usize,
    pub operation: QuantumOperation,
}

/// Outcome-indexed family of operations whose effects sum to the identity.
/// Outcomes are kept sorted by label; the `k`-th outcome is read as the
/// `k`-th energy level of the measured Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    outcomes: Vec<Outcome>,
}

impl Instrument {
    pub fn new(mut outcomes: Vec<Outcome>) -> Result<Self> {
        let dim = outcomes
            .first()
            .ok_or_else(|| Error::InvalidInstrument("no outcomes".into()))?
            .operation
            .dim();
        if let Some(bad) = outcomes.iter().find(|o| o.operation.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, actual: bad.operation.dim() });
        }
        outcomes.sort_by_key(|o| o.label);
        if let Some(w) = outcomes.windows(2).find(|w| w[0].label == w[1].label) {
            return Err(Error::InvalidInstrument(format!("duplicate outcome label {}", w[0].label)));
        }
        let instrument = Self { dim, outcomes };
        let defect = instrument.completeness_defect();
        if defect > COMPLETENESS_TOL {
            return Err(Error::InvalidInstrument(format!(
                "effects do not sum to the identity (max deviation {defect:.3e})"
            )));
        }
        Ok(instrument)
    }

    /// Outcomes labelled `0..n` in the given order.
    pub fn from_operations(ops: Vec<QuantumOperation>) -> Result<Self> {
        Self::new(ops.into_iter().enumerate().map(|(label, operation)| Outcome { label, operation }).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcome_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn operation(&self, n: usize) -> &QuantumOperation {
        &self.outcomes[n].operation
    }

    pub fn effects(&self) -> Vec<HermitianOperator> {
        self.outcomes.iter().map(|o| o.operation.effect()).collect()
    }

    pub fn completeness_defect(&self) -> f64 {
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for o in &self.outcomes {
            sum += o.operation.effect().matrix();
        }
        max_abs_diff(&sum, &identity(self.dim))
    }

    /// Non-selective channel `Φ = Σ_n φ_n`.
    pub fn nonselective(&self) -> Channel {
        let kraus = self.outcomes.iter().flat_map(|o| o.operation.kraus.iter().cloned()).collect();
        Channel { operation: QuantumOperation::from_kraus_unchecked(kraus) }
    }

    pub fn choi_matrices(&self) -> Vec<HermitianOperator> {
        self.outcomes.iter().map(|o| o.operation.choi()).collect()
    }

    /// Outcome-wise Choi equality (Kraus lists are never compared directly).
    pub fn equivalent_to(&self, other: &Instrument, tol: f64) -> bool {
        self.dim == other.dim
            && self.outcomes.len() == other.outcomes.len()
            && self
                .outcomes
                .iter()
                .zip(&other.outcomes)
                .all(|(a, b)| a.label == b.label && a.operation.equivalent_to(&b.operation, tol))
    }

    /// Time-reversed instrument `φ̄_m(ρ) = θ† φ_m(θ ρ θ†) θ` with θ the complex
    /// conjugation: every Kraus operator is conjugated entrywise.
    pub fn time_reversed(&self) -> Self {
        Self {
            dim: self.dim,
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome { label: o.label, operation: o.operation.conj() })
                .collect(),
        }
    }

    fn require_levels(&self, h: &SpectralHamiltonian) -> Result<()> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: h.dim(), actual: self.dim });
        }
        if h.level_count() != self.outcomes.len() {
            return Err(Error::InvalidInstrument(format!(
                "{} outcomes for a Hamiltonian with {} levels",
                self.outcomes.len(),
                h.level_count()
            )));
        }
        Ok(())
    }
}

pub fn nonselective(instr: &Instrument) -> Channel {
    instr.nonselective()
}

pub fn time_reverse_instrument(instr: &Instrument) -> Instrument {
    instr.time_reversed()
}

/// Error probabilities `p(m|n) = Tr φ_m(Π_n / d_n)`; rows are assigned
/// outcomes `m`, columns the true level `n`.
pub fn error_matrix(instr: &Instrument, h: &SpectralHamiltonian) -> Result<DMatrix<f64>> {
    instr.require_levels(h)?;
    let n_levels = h.level_count();
    let effects = instr.effects();
    Ok(DMatrix::from_fn(n_levels, n_levels, |m, n| {
        let level = h.level(n);
        linalg::trace_of_product(effects[m].matrix(), level.projector().matrix()).re
            / level.degeneracy() as f64
    }))
}

/// `max_{m,n} |p(m|n) − δ_mn|`.
pub fn error_matrix_defect(instr: &Instrument, h: &SpectralHamiltonian) -> Result<f64> {
    let p = error_matrix(instr, h)?;
    let n = p.nrows();
    Ok((0..n)
        .flat_map(|m| (0..n).map(move |k| (m, k)))
        .map(|(m, k)| (p[(m, k)] - if m == k { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max))
}

/// `max_m ‖E_m − Π_m‖_max`.
pub fn effect_projector_defect(instr: &Instrument, h: &SpectralHamiltonian) -> Result<f64> {
    instr.require_levels(h)?;
    Ok(instr
        .effects()
        .iter()
        .enumerate()
        .map(|(m, e)| max_abs_diff(e.matrix(), h.projector(m).matrix()))
        .fold(0.0, f64::max))
}

/// Error-free iff the error matrix is the identity within `tol`.
pub fn is_error_free(instr: &Instrument, h: &SpectralHamiltonian, tol: f64) -> Result<bool> {
    Ok(error_matrix_defect(instr, h)? <= tol)
}

/// Projective energy measurement: outcome `n` has the single Kraus operator `Π_n`.
pub fn build_projective(h: &SpectralHamiltonian) -> Instrument {
    let ops = h
        .levels()
        .iter()
        .map(|l| QuantumOperation::from_kraus_unchecked(vec![l.projector().matrix().clone()]))
        .collect();
    Instrument::from_operations(ops).expect("spectral projectors are complete")
}

/// Projective measurement followed by an outcome-dependent channel:
/// outcome `m` has Kraus operators `{C_l Π_m}`.
pub fn build_error_free(h: &SpectralHamiltonian, channels: &[Channel]) -> Result<Instrument> {
    if channels.len() != h.level_count() {
        return Err(Error::InvalidArgument(format!(
            "{} channels for {} levels",
            channels.len(),
            h.level_count()
        )));
    }
    let ops = h
        .levels()
        .iter()
        .zip(channels)
        .map(|(level, ch)| {
            if ch.dim() != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), actual: ch.dim() });
            }
            let p = level.projector().matrix();
            Ok(QuantumOperation::from_kraus_unchecked(ch.kraus().iter().map(|c| c * p).collect()))
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::from_operations(ops)
}

/// Error-free instrument with the same channel after every outcome.
pub fn build_error_free_uniform(h: &SpectralHamiltonian, channel: &Channel) -> Result<Instrument> {
    build_error_free(h, &vec![channel.clone(); h.level_count()])
}

/// Which complete-positivity requirement a depolarizing-type instrument is
/// built under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrooksVariant {
    /// Each operation `φ_n` must be CP on its own; for nondegenerate `H` this
    /// admits `−1/(D−1) ≤ α ≤ 1`.
    InstrumentForm,
    /// Projective measurement followed by the universal depolarizing channel;
    /// requires `−1/(D²−1) ≤ α ≤ 1`.
    UniversalChannel,
}

/// `φ_n(ρ) = (1−α) Tr(Π_n ρ)/D · 1 + α Π_n ρ Π_n`.
///
/// For `α ∈ [0, 1]` the Kraus set is `{√α Π_n} ∪ {√((1−α)/D) |i⟩⟨f_j|}` with
/// `f_j` an orthonormal basis of the `n`-th eigenspace. Negative `α` is
/// realised from the eigendecomposition of each operation's Choi matrix and
/// rejected (with the offending eigenvalue) when that matrix is not PSD.
pub fn build_crooks(h: &SpectralHamiltonian, alpha: f64, variant: CrooksVariant) -> Result<Instrument> {
    let dim = h.dim();
    check_alpha(alpha, dim)?;
    if variant == CrooksVariant::UniversalChannel {
        return build_error_free_uniform(h, &depolarizing(alpha, dim)?);
    }
    let mut ops = Vec::with_capacity(h.level_count());
    for level in h.levels() {
        let p = level.projector().matrix();
        let kraus = if (0.0..=1.0).contains(&alpha) {
            let mut kraus = Vec::new();
            if alpha > 0.0 {
                kraus.push(p * c64(alpha.sqrt(), 0.0));
            }
            if alpha < 1.0 {
                let w = ((1.0 - alpha) / dim as f64).sqrt();
                for j in 0..level.degeneracy() {
                    let f = level.basis().column(j);
                    for i in 0..dim {
                        kraus.push(linalg::basis_vector(dim, i) * f.adjoint() * c64(w, 0.0));
                    }
                }
            }
            kraus
        } else {
            let j = choi_of_map(dim, |x| {
                identity(dim) * (linalg::trace_of_product(p, x) * c64((1.0 - alpha) / dim as f64, 0.0))
                    + p * x * p * c64(alpha, 0.0)
            });
            kraus_from_choi(&j, dim, PSD_TOL)?
        };
        ops.push(QuantumOperation::from_kraus_unchecked(kraus));
    }
    Instrument::from_operations(ops)
}

/// Outcome `m` has effect `(d_m/D)·1`, realised by the Kraus operator
/// `√(d_m/D)·1`.
pub fn build_jii(h: &SpectralHamiltonian) -> Instrument {
    let dim = h.dim();
    let ops = h
        .levels()
        .iter()
        .map(|l| {
            let w = (l.degeneracy() as f64 / dim as f64).sqrt();
            QuantumOperation::from_kraus_unchecked(vec![identity(dim) * c64(w, 0.0)])
        })
        .collect();
    Instrument::from_operations(ops).expect("degeneracies sum to D")
}

/// Erroneous second measurement with effects `E_m = Σ_i Q(m|i) |ψ_i⟩⟨ψ_i|`
/// and Kraus operators `√E_m`. `q` has one row per level of `h` and one
/// column per basis vector (the columns of `basis`); every column must sum to
/// one and row `m` must sum to `d_m`.
pub fn build_ji_erroneous(
    h: &SpectralHamiltonian,
    basis: &UnitaryOperator,
    q: &DMatrix<f64>,
) -> Result<Instrument> {
    const SUM_TOL: f64 = 1e-12;
    let dim = h.dim();
    if basis.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: basis.dim() });
    }
    if q.nrows() != h.level_count() || q.ncols() != dim {
        return Err(Error::InvalidStochastic(format!(
            "Q must be {}x{}, got {}x{}",
            h.level_count(),
            dim,
            q.nrows(),
            q.ncols()
        )));
    }
    if let Some((idx, v)) = q.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidStochastic(format!(
            "entry Q({}|{}) = {v} is negative or non-finite",
            idx % q.nrows(),
            idx / q.nrows()
        )));
    }
    for i in 0..dim {
        let s: f64 = q.column(i).sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidStochastic(format!("column {i} sums to {s}, expected 1")));
        }
    }
    for (m, level) in h.levels().iter().enumerate() {
        let s: f64 = q.row(m).sum();
        let d = level.degeneracy() as f64;
        if (s - d).abs() > SUM_TOL {
            return Err(Error::InvalidStochastic(format!("row {m} sums to {s}, expected d_{m} = {d}")));
        }
    }
    let v = basis.matrix();
    let ops = (0..h.level_count())
        .map(|m| {
            let roots: Vec<f64> = q.row(m).iter().map(|x| x.sqrt()).collect();
            QuantumOperation::from_kraus_unchecked(vec![v * linalg::real_diagonal(&roots) * v.adjoint()])
        })
        .collect();
    Instrument::from_operations(ops)
}

/// Projective measurement whose reported outcome is replaced, with total
/// probability `epsilon`, by a uniformly chosen wrong level. Outcome `m` has
/// Kraus operators `√(1−ε) Π_m` and `√(ε/(N−1)) Π_n` for `n ≠ m`.
pub fn build_mixed_projective(h: &SpectralHamiltonian, epsilon: f64) -> Result<Instrument> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("mixing probability {epsilon} outside [0, 1]")));
    }
    let n = h.level_count();
    if n == 1 {
        return Ok(build_projective(h));
    }
    let stay = (1.0 - epsilon).sqrt();
    let leak = (epsilon / (n - 1) as f64).sqrt();
    let ops = (0..n)
        .map(|m| {
            let kraus = (0..n)
                .filter(|&k| k == m || leak > 0.0)
                .map(|k| h.projector(k).matrix() * c64(if k == m { stay } else { leak }, 0.0))
                .collect();
            QuantumOperation::from_kraus_unchecked(kraus)
        })
        .collect();
    Instrument::from_operations(ops)
}
