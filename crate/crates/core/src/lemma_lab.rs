//! Sampled checks of the trace-constancy and state-pair lemmas, and of the
//! error-free/effect equivalence.
//!
//! "For all U" is sampled here: Haar draws plus unitaries with the structure
//! used in the proofs. Results are extrema over the samples, not proofs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{nondegenerate_difference_spectrum, SpectralHamiltonian};
use crate::instrument::{effect_projector_defect, error_matrix_defect, Instrument};
use crate::linalg::{
    c64, identity, is_psd, ket_bra, max_abs_diff, trace, trace_of_product, CMatrix, CVector, DensityMatrix,
    HermitianOperator, UnitaryOperator, C64, PSD_TOL,
};
use crate::random::{sample_haar_unitary, seeded_rng, SimRng};
use crate::verifier::{CheckReport, PointDiagnostic};

/// Summary of a scalar evaluated over a unitary ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub argmin: UnitaryOperator,
    pub argmax: UnitaryOperator,
}

impl EnsembleStats {
    fn from_values(unitaries: &[UnitaryOperator], values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let (mut imin, mut imax) = (0, 0);
        for (i, v) in values.iter().enumerate() {
            if *v < values[imin] {
                imin = i;
            }
            if *v > values[imax] {
                imax = i;
            }
        }
        Self {
            samples: n,
            min: values[imin],
            max: values[imax],
            // mean may drift outside [min, max] by rounding for constant data
            mean: mean.clamp(values[imin], values[imax]),
            std_dev: var.sqrt(),
            argmin: unitaries[imin].clone(),
            argmax: unitaries[imax].clone(),
        }
    }

    pub fn spread(&self) -> f64 {
        self.max - self.min
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "samples": self.samples,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "std_dev": self.std_dev,
            "spread": self.spread(),
            "argmin": crate::serialize::matrix_to_json(self.argmin.matrix()),
            "argmax": crate::serialize::matrix_to_json(self.argmax.matrix()),
        })
    }
}

fn evaluate<F>(unitaries: &[UnitaryOperator], f: F) -> Vec<f64>
where
    F: Fn(&UnitaryOperator) -> f64 + Sync + Send,
{
    unitaries.par_iter().map(f).collect()
}

fn log_spaced(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `U_x = Σ_k e^{i x φ_k} |f_k⟩⟨f_k|` with `f_k` the columns of `basis`.
pub fn phase_unitary(basis: &UnitaryOperator, phases: &[f64], x: f64) -> UnitaryOperator {
    let dim = basis.dim();
    let diag = CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from_polar(1.0, x * phases[i]) } else { c64(0.0, 0.0) });
    UnitaryOperator::new(basis.matrix() * diag * basis.matrix().adjoint()).expect("product of unitaries")
}

/// Identity, `n_haar` Haar unitaries and `n_structured` phase unitaries in
/// fresh random bases, with phase differences all distinct.
fn lemma3_ensemble(dim: usize, n_haar: usize, n_structured: usize, seed: u64) -> Vec<UnitaryOperator> {
    let mut rng: SimRng = seeded_rng(seed, 3);
    let mut out = vec![UnitaryOperator::identity(dim)];
    out.extend((0..n_haar).map(|_| sample_haar_unitary(&mut rng, dim)));
    let phases: Vec<f64> =
        nondegenerate_difference_spectrum(dim, seed).iter().map(|p| p * 2.0 * std::f64::consts::PI).collect();
    for x in log_spaced(n_structured, 0.1, 10.0) {
        let basis = sample_haar_unitary(&mut rng, dim);
        out.push(phase_unitary(&basis, &phases, x));
    }
    out
}

fn require_same_dim(a: &HermitianOperator, b: &HermitianOperator) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: b.dim() });
    }
    Ok(())
}

/// `Tr U†AUB` over the identity, Haar and structured unitaries.
pub fn lemma3_trace_scan(
    a: &HermitianOperator,
    b: &HermitianOperator,
    n_haar: usize,
    n_structured: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    require_same_dim(a, b)?;
    let unitaries = lemma3_ensemble(a.dim(), n_haar, n_structured, seed);
    let values = evaluate(&unitaries, |u| lemma3_value(a, b, u));
    Ok(EnsembleStats::from_values(&unitaries, &values))
}

pub fn lemma3_value(a: &HermitianOperator, b: &HermitianOperator, u: &UnitaryOperator) -> f64 {
    trace_of_product(&(u.matrix().adjoint() * a.matrix() * u.matrix()), b.matrix()).re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lemma3Verdict {
    ConstantCompatible,
    NonConstantWitnessed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Classification {
    pub verdict: Lemma3Verdict,
    /// The `U`-independent value when constant-compatible.
    pub constant: Option<f64>,
    /// Unitary whose trace value deviates most from the ensemble mean.
    pub witness: UnitaryOperator,
    pub witness_value: f64,
    pub witness_deviation: f64,
    pub scan: EnsembleStats,
}

/// Distance to the nearest multiple of the identity, `(Tr M/D)·1`.
pub fn scalar_defect(m: &HermitianOperator) -> f64 {
    let dim = m.dim();
    let mean = trace(m.matrix()).re / dim as f64;
    max_abs_diff(m.matrix(), &(identity(dim) * c64(mean, 0.0)))
}

/// Algebraic verdict (scalar or zero operand) cross-checked by a scan of
/// `n_haar` Haar and `n_structured` structured unitaries.
pub fn lemma3_classify(
    a: &HermitianOperator,
    b: &HermitianOperator,
    tol: f64,
    n_haar: usize,
    n_structured: usize,
    seed: u64,
) -> Result<Lemma3Classification> {
    require_same_dim(a, b)?;
    let dim = a.dim() as f64;
    let constant = if a.max_abs() <= tol || b.max_abs() <= tol {
        Some(0.0)
    } else if scalar_defect(a) <= tol {
        Some(trace(a.matrix()).re / dim * trace(b.matrix()).re)
    } else if scalar_defect(b) <= tol {
        Some(trace(b.matrix()).re / dim * trace(a.matrix()).re)
    } else {
        None
    };
    let scan = lemma3_trace_scan(a, b, n_haar, n_structured, seed)?;
    let (witness, witness_value) = if scan.max - scan.mean >= scan.mean - scan.min {
        (scan.argmax.clone(), scan.max)
    } else {
        (scan.argmin.clone(), scan.min)
    };
    Ok(Lemma3Classification {
        verdict: if constant.is_some() { Lemma3Verdict::ConstantCompatible } else { Lemma3Verdict::NonConstantWitnessed },
        constant,
        witness,
        witness_value,
        witness_deviation: (witness_value - scan.mean).abs(),
        scan,
    })
}

fn require_unit(v: &CVector, dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: v.len() });
    }
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("vector norm {} is not 1", v.norm())));
    }
    Ok(())
}

/// Unitary whose first column is the unit vector `v`.
fn completing_unitary(v: &CVector, rng: &mut SimRng) -> UnitaryOperator {
    let dim = v.len();
    let mut m = crate::random::ginibre(rng, dim, dim);
    m.set_column(0, v);
    let qr = m.qr();
    let q = qr.q();
    let r = qr.r();
    // undo the phase QR puts on the first column
    let phase = if r[(0, 0)].norm() > 0.0 { r[(0, 0)] / r[(0, 0)].norm() } else { c64(1.0, 0.0) };
    let mut q = q;
    for i in 0..dim {
        q[(i, 0)] *= phase;
    }
    UnitaryOperator::new(q).expect("QR factor is unitary")
}

/// Random unitary with `U|from⟩ = |to⟩`.
fn mapping_unitary(from: &CVector, to: &CVector, rng: &mut SimRng) -> UnitaryOperator {
    let vf = completing_unitary(from, rng);
    let vt = completing_unitary(to, rng);
    let dim = from.len();
    let phases: Vec<f64> = (0..dim).map(|i| if i == 0 { 0.0 } else { crate::random::uniform_in(rng, 0.0, 6.283) }).collect();
    let diag = CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from_polar(1.0, phases[i]) } else { c64(0.0, 0.0) });
    UnitaryOperator::new(vt.matrix() * diag * vf.matrix().adjoint()).expect("product of unitaries")
}

/// `|⟨a|U†ρU|a⟩ − ⟨b|UσU†|b⟩|` over `n_haar` Haar unitaries and unitaries
/// sending `|a⟩` to each eigenvector of `ρ`, `|b⟩` from each eigenvector of
/// `σ`, and `|a⟩` to `|b⟩`.
pub fn lemma4_check(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    a: &CVector,
    b: &CVector,
    n_haar: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    let dim = rho.dim();
    if sigma.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: sigma.dim() });
    }
    require_unit(a, dim)?;
    require_unit(b, dim)?;
    let mut rng: SimRng = seeded_rng(seed, 4);
    let mut unitaries = vec![UnitaryOperator::identity(dim)];
    unitaries.extend((0..n_haar).map(|_| sample_haar_unitary(&mut rng, dim)));
    let rho_eig = rho.as_hermitian().eig();
    let sigma_eig = sigma.as_hermitian().eig();
    for k in 0..dim {
        unitaries.push(mapping_unitary(a, &rho_eig.eigenvector(k), &mut rng));
        unitaries.push(mapping_unitary(&sigma_eig.eigenvector(k), b, &mut rng));
    }
    unitaries.push(mapping_unitary(a, b, &mut rng));
    let values = evaluate(&unitaries, |u| lemma4_discrepancy(rho, sigma, a, b, u));
    Ok(EnsembleStats::from_values(&unitaries, &values))
}

pub fn lemma4_discrepancy(rho: &DensityMatrix, sigma: &DensityMatrix, a: &CVector, b: &CVector, u: &UnitaryOperator) -> f64 {
    let ua = u.matrix() * a;
    let udb = u.matrix().adjoint() * b;
    let lhs = (ua.adjoint() * rho.matrix() * &ua)[(0, 0)].re;
    let rhs = (udb.adjoint() * sigma.matrix() * &udb)[(0, 0)].re;
    (lhs - rhs).abs()
}

/// The state pair `((1−α)/D·1 + α|b⟩⟨b|, (1−α)/D·1 + α|a⟩⟨a|)`.
pub fn lemma4_family(alpha: f64, a: &CVector, b: &CVector) -> (CMatrix, CMatrix) {
    let dim = a.len();
    let flat = identity(dim) * c64((1.0 - alpha) / dim as f64, 0.0);
    (&flat + ket_bra(b) * c64(alpha, 0.0), flat + ket_bra(a) * c64(alpha, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma4Fit {
    pub alpha: f64,
    /// Frobenius distance of the pair `(ρ, σ)` to the fitted family member.
    pub residual: f64,
    /// The fitted members are valid (PSD) states.
    pub in_range: bool,
}

/// Least-squares `α` for both states at once.
pub fn lemma4_fit(rho: &DensityMatrix, sigma: &DensityMatrix, a: &CVector, b: &CVector) -> Result<Lemma4Fit> {
    let dim = rho.dim();
    if sigma.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: sigma.dim() });
    }
    require_unit(a, dim)?;
    require_unit(b, dim)?;
    let flat = identity(dim) / c64(dim as f64, 0.0);
    let db = ket_bra(b) - &flat;
    let da = ket_bra(a) - &flat;
    let yr = rho.matrix() - &flat;
    let ys = sigma.matrix() - &flat;
    let inner = |x: &CMatrix, y: &CMatrix| x.zip_map(y, |p, q| (p.conj() * q).re).sum();
    let den = db.norm_squared() + da.norm_squared();
    let alpha = if den > 0.0 { (inner(&db, &yr) + inner(&da, &ys)) / den } else { 0.0 };
    let (fr, fs) = lemma4_family(alpha, a, b);
    let residual = ((rho.matrix() - &fr).norm_squared() + (sigma.matrix() - &fs).norm_squared()).sqrt();
    let in_range = is_psd(&HermitianOperator::from_hermitian_part(fr), PSD_TOL)
        && is_psd(&HermitianOperator::from_hermitian_part(fs), PSD_TOL);
    Ok(Lemma4Fit { alpha, residual, in_range })
}

/// Error-freeness and projector effects must hold or fail together.
pub fn appendix_a_effect_check(instr: &Instrument, h: &SpectralHamiltonian, tol: f64) -> Result<CheckReport> {
    let error_defect = error_matrix_defect(instr, h)?;
    let effect_defect = effect_projector_defect(instr, h)?;
    let error_free = error_defect <= tol;
    let projector_effects = effect_defect <= tol;
    let agree = error_free == projector_effects;
    Ok(CheckReport {
        check: "appendix_a_effects".into(),
        expected: 1.0,
        actual: if agree { 1.0 } else { 0.0 },
        residual: if agree { 0.0 } else { 1.0 },
        abs_residual: if agree { 0.0 } else { 1.0 },
        rel_residual: if agree { 0.0 } else { 1.0 },
        tolerance: tol,
        pass: agree,
        diagnostics: vec![
            PointDiagnostic { label: "max |p(m|n) − δ_mn|".into(), lhs: error_defect, rhs: 0.0, residual: error_defect },
            PointDiagnostic { label: "max |E_m − Π_m|".into(), lhs: effect_defect, rhs: 0.0, residual: effect_defect },
        ],
        flags: vec![format!("error_free={error_free}"), format!("projector_effects={projector_effects}")],
        witness: None,
    })
}
