//! Dense complex-matrix substrate.
//!
//! Everything here works on `nalgebra::DMatrix<Complex<f64>>`. The newtypes
//! [`HermitianOperator`], [`UnitaryOperator`] and [`DensityMatrix`] validate
//! their invariants once on construction and are immutable afterwards.
//!
//! Choi convention: for a map `phi` on `D x D` matrices,
//! `J(phi) = (phi ⊗ id)(|Ω⟩⟨Ω|)` with `|Ω⟩ = Σ_i |i⟩|i⟩ / √D`. The composite
//! index of `|a⟩ ⊗ |i⟩` is `a + D·i` (output index fastest), so that for a
//! Kraus operator `K` the Choi matrix is `vec(K) vec(K)† / D` with `vec` the
//! column-stacking vectorisation. A trace-preserving map has unit Choi trace
//! and its partial trace over the output factor is `1/D`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for Hermiticity of operator inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance on `‖U†U − 1‖_max`.
pub const UNITARY_TOL: f64 = 1e-10;
/// Default relative tolerance for positivity tests.
pub const PSD_TOL: f64 = 1e-10;

const STATE_TRACE_TOL: f64 = 1e-10;
const STATE_EIG_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> CMatrix {
    CMatrix::zeros(dim, dim)
}

pub fn real_diagonal(values: &[f64]) -> CMatrix {
    let dim = values.len();
    CMatrix::from_fn(dim, dim, |i, j| if i == j { c64(values[i], 0.0) } else { C64::default() })
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Hilbert–Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `Tr(a b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = C64::default();
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Entrywise complex conjugate (the time-reversal map in the computational basis).
pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// Rank-one operator `|v⟩⟨v|`.
pub fn ket_bra(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = c64(1.0, 0.0);
    v
}

pub fn require_square(m: &CMatrix) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(rows)
}

pub fn require_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

fn symmetrize(m: CMatrix) -> CMatrix {
    let adj = m.adjoint();
    (m + adj) * c64(0.5, 0.0)
}

/// A square matrix equal to its adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator(CMatrix);

impl HermitianOperator {
    /// Validates `‖M − M†‖_max ≤ 1e-12·‖M‖_max` and stores the exactly
    /// symmetrised matrix.
    pub fn new(m: CMatrix) -> Result<Self> {
        require_square(&m)?;
        require_finite(&m)?;
        let asymmetry = hermitian_asymmetry(&m);
        if asymmetry > HERMITIAN_TOL * max_abs(&m) {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self(symmetrize(m)))
    }

    /// For matrices that are Hermitian up to rounding by construction.
    pub(crate) fn from_hermitian_part(m: CMatrix) -> Self {
        Self(symmetrize(m))
    }

    pub fn from_real_diagonal(values: &[f64]) -> Self {
        Self(real_diagonal(values))
    }

    pub fn identity(dim: usize) -> Self {
        Self(identity(dim))
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self(identity(dim) * c64(value, 0.0))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn eig(&self) -> HermitianEigen {
        hermitian_eig(self)
    }

    /// `U M U†`.
    pub fn conjugated_by(&self, u: &UnitaryOperator) -> Self {
        Self::from_hermitian_part(u.matrix() * &self.0 * u.matrix().adjoint())
    }

    /// Entrywise conjugate, i.e. `θ M θ†` for θ the complex conjugation.
    pub fn conj(&self) -> Self {
        Self(conj(&self.0))
    }
}

/// Spectral decomposition `M = V diag(λ) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: UnitaryOperator,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let v = self.eigenvectors.matrix();
        v * real_diagonal(&self.eigenvalues) * v.adjoint()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn eigenvector(&self, index: usize) -> CVector {
        self.eigenvectors.matrix().column(index).into_owned()
    }
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eig(m: &HermitianOperator) -> HermitianEigen {
    let dim = m.dim();
    // implicit symmetric QR; only fails to converge on non-finite input,
    // which the HermitianOperator constructor rules out
    let se = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(dim, dim, |i, j| se.eigenvectors[(i, order[j])]);
    HermitianEigen { eigenvalues, eigenvectors: UnitaryOperator(vectors) }
}

/// Checked entry point for raw matrices: rejects non-Hermitian input with the
/// measured asymmetry.
pub fn hermitian_eig_checked(m: &CMatrix) -> Result<HermitianEigen> {
    Ok(hermitian_eig(&HermitianOperator::new(m.clone())?))
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &HermitianOperator) -> f64 {
    hermitian_eig(m).min()
}

/// True iff the minimum eigenvalue is at least `-tol·max(1, ‖M‖_max)`.
pub fn is_psd(m: &HermitianOperator, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol * m.max_abs().max(1.0)
}

/// Square root of a positive semidefinite matrix; eigenvalues within rounding
/// of zero are clamped.
pub fn psd_sqrt(m: &HermitianOperator) -> CMatrix {
    let eig = hermitian_eig(m);
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let v = eig.eigenvectors.matrix();
    v * real_diagonal(&roots) * v.adjoint()
}

/// A square matrix with `‖U†U − 1‖_max ≤ 1e-10`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        let dim = require_square(&m)?;
        require_finite(&m)?;
        let deviation = max_abs_diff(&(m.adjoint() * &m), &identity(dim));
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn conj(&self) -> Self {
        Self(conj(&self.0))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &UnitaryOperator) -> Self {
        Self(&self.0 * &other.0)
    }

    /// `‖U†U − 1‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        max_abs_diff(&(self.0.adjoint() * &self.0), &identity(self.dim()))
    }

    /// Hermitian generator `G` with `exp(−iG) = U` and spectrum in `(−π, π]`.
    pub fn principal_generator(&self) -> Result<HermitianOperator> {
        principal_generator(self)
    }
}

/// `exp(−iHt/ħ)` via the eigendecomposition of `H`.
pub fn evolve_unitary(h: &HermitianOperator, t: f64, hbar: f64) -> UnitaryOperator {
    let eig = hermitian_eig(h);
    let phases: Vec<C64> =
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t / hbar)).collect();
    let v = eig.eigenvectors.matrix();
    let dim = h.dim();
    let diag = CMatrix::from_fn(dim, dim, |i, j| if i == j { phases[i] } else { C64::default() });
    UnitaryOperator(v * diag * v.adjoint())
}

fn principal_generator(u: &UnitaryOperator) -> Result<HermitianOperator> {
    // U is normal, so its Hermitian and anti-Hermitian parts commute; a generic
    // real combination of them shares U's eigenbasis.
    let m = u.matrix();
    let dim = u.dim();
    let herm = (m + m.adjoint()) * c64(0.5, 0.0);
    let anti = (m - m.adjoint()) * c64(0.0, -0.5);
    for &mix in &[0.381_966_011_250_105_1, 1.324_717_957_244_746, -0.754_877_666_246_692_7] {
        let combo = HermitianOperator::from_hermitian_part(&herm + &anti * c64(mix, 0.0));
        let eig = hermitian_eig(&combo);
        let v = eig.eigenvectors.matrix();
        let diag = v.adjoint() * m * v;
        let angles: Vec<f64> = (0..dim).map(|k| -diag[(k, k)].arg()).collect();
        let generator = v * real_diagonal(&angles) * v.adjoint();
        let candidate = HermitianOperator::from_hermitian_part(generator);
        let rebuilt = evolve_unitary(&candidate, 1.0, 1.0);
        if max_abs_diff(rebuilt.matrix(), m) <= 1e-9 {
            return Ok(candidate);
        }
    }
    Err(Error::NoConvergence)
}

/// A positive semidefinite matrix with a stated trace (1 for normalised
/// states, at most 1 for post-measurement states).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_trace(m, 1.0)
    }

    /// Validates Hermiticity, positivity and `|Tr ρ − trace| ≤ 1e-10`.
    pub fn with_trace(m: CMatrix, expected_trace: f64) -> Result<Self> {
        require_square(&m)?;
        require_finite(&m)?;
        let asymmetry = hermitian_asymmetry(&m);
        if asymmetry > 1e-12 {
            return Err(Error::InvalidState(format!("not Hermitian (asymmetry {asymmetry:.3e})")));
        }
        let h = HermitianOperator::from_hermitian_part(m);
        let tr = trace(h.matrix()).re;
        if (tr - expected_trace).abs() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {tr:.12} differs from expected {expected_trace}"
            )));
        }
        let min = min_eigenvalue(&h);
        if min < -STATE_EIG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(h.into_matrix()))
    }

    /// Image of a state under a CP map; positivity and trace bounds hold by
    /// construction, so only Hermiticity is enforced.
    pub(crate) fn from_cp_image(m: CMatrix) -> Self {
        Self(symmetrize(m))
    }

    pub fn pure(v: &CVector) -> Result<Self> {
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        Ok(Self(ket_bra(&(v / c64(norm, 0.0)))))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(identity(dim) * c64(1.0 / dim as f64, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        trace(&self.0).re
    }

    pub fn purity(&self) -> f64 {
        trace_of_product(&self.0, &self.0).re
    }

    /// `ρ / Tr ρ`; `None` for a zero-trace input.
    pub fn normalized(&self) -> Option<Self> {
        let tr = self.trace();
        (tr > 0.0).then(|| Self(&self.0 * c64(1.0 / tr, 0.0)))
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator(self.0.clone())
    }
}

/// Column-stacking vectorisation `vec(K)[a + D·i] = K[a, i]`.
pub fn vec_columns(k: &CMatrix) -> CVector {
    CVector::from_iterator(k.nrows() * k.ncols(), k.iter().copied())
}

/// Inverse of [`vec_columns`] for square `dim x dim` blocks.
pub fn unvec_columns(v: &CVector, dim: usize) -> CMatrix {
    CMatrix::from_iterator(dim, dim, v.iter().copied())
}

/// Choi matrix of the CP map `ρ ↦ Σ_l K_l ρ K_l†`.
pub fn choi(kraus: &[CMatrix]) -> Result<HermitianOperator> {
    let first = kraus
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let dim = require_square(first)?;
    let mut j = zeros(dim * dim);
    for k in kraus {
        let (rows, cols) = k.shape();
        if rows != dim || cols != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: rows.max(cols) });
        }
        let v = vec_columns(k);
        j += &v * v.adjoint();
    }
    Ok(HermitianOperator::from_hermitian_part(j * c64(1.0 / dim as f64, 0.0)))
}

/// Choi matrix of an arbitrary linear map given as a closure, built from its
/// action on the matrix units `|i⟩⟨j|`.
pub fn choi_of_map<F>(dim: usize, map: F) -> HermitianOperator
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let n = dim * dim;
    let mut j = zeros(n);
    for i in 0..dim {
        for k in 0..dim {
            let mut unit = zeros(dim);
            unit[(i, k)] = c64(1.0, 0.0);
            let image = map(&unit);
            for a in 0..dim {
                for b in 0..dim {
                    j[(a + dim * i, b + dim * k)] = image[(a, b)];
                }
            }
        }
    }
    HermitianOperator::from_hermitian_part(j * c64(1.0 / dim as f64, 0.0))
}

/// Kraus operators from a Choi matrix via its eigendecomposition:
/// `K_l = √(D λ_l) unvec(v_l)`. Rejects the map if an eigenvalue falls below
/// `-tol·max(1, ‖J‖_max)`, reporting that eigenvalue.
pub fn kraus_from_choi(j: &HermitianOperator, dim: usize, tol: f64) -> Result<Vec<CMatrix>> {
    if j.dim() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, actual: j.dim() });
    }
    let eig = hermitian_eig(j);
    let floor = tol * j.max_abs().max(1.0);
    if eig.min() < -floor {
        return Err(Error::NotCompletelyPositive { eigenvalue: eig.min() });
    }
    let scale = eig.max().abs().max(f64::MIN_POSITIVE);
    let mut kraus = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate().rev() {
        if lambda <= 1e-14 * scale {
            continue;
        }
        let v = eig.eigenvector(idx);
        kraus.push(unvec_columns(&v, dim) * c64((dim as f64 * lambda).sqrt(), 0.0));
    }
    if kraus.is_empty() {
        kraus.push(zeros(dim));
    }
    Ok(kraus)
}
