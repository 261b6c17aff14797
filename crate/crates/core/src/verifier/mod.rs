//! Fluctuation-theorem checks, measurement-condition certifiers and the
//! adversarial search for violations.

mod search;

pub use search::{adversarial_search, SearchOptions, SearchResult, SearchTemplate, TargetCheck};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;
use crate::instrument::{
    depolarizing, effect_projector_defect, error_matrix_defect, Instrument, COMPLETENESS_TOL,
};
use crate::linalg::{c64, choi_of_map, identity, is_psd, max_abs_diff, trace, trace_of_product, CMatrix, PSD_TOL};
use crate::protocol::Protocol;
use crate::work_stats::{conditional_table, default_work_tol, exp_average, joint_table, work_distribution, WorkDistribution};

/// Pairs of probabilities both at or below this are treated as equal (zero).
pub const MASS_FLOOR: f64 = 1e-12;

/// Protocol plus the two measurements and the inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub protocol: Protocol,
    pub instr0: Instrument,
    pub instr_tau: Instrument,
    pub beta: f64,
}

impl Scenario {
    pub fn new(protocol: Protocol, instr0: Instrument, instr_tau: Instrument, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidBeta(beta));
        }
        for (instr, h) in [(&instr0, protocol.initial()), (&instr_tau, protocol.final_hamiltonian())] {
            if instr.dim() != h.dim() {
                return Err(Error::DimensionMismatch { expected: h.dim(), actual: instr.dim() });
            }
            if instr.outcome_count() != h.level_count() {
                return Err(Error::InvalidInstrument(format!(
                    "{} outcomes for a Hamiltonian with {} levels",
                    instr.outcome_count(),
                    h.level_count()
                )));
            }
        }
        Ok(Self { protocol, instr0, instr_tau, beta })
    }

    pub fn dim(&self) -> usize {
        self.protocol.dim()
    }

    /// Reversed protocol with `φ̄⁰ = θφᵗθ` and `φ̄ᵗ = θφ⁰θ`.
    pub fn time_reversed(&self) -> Result<Self> {
        Ok(Self {
            protocol: self.protocol.time_reversed()?,
            instr0: self.instr_tau.time_reversed(),
            instr_tau: self.instr0.time_reversed(),
            beta: self.beta,
        })
    }

    /// `e^{−βΔF} = Z(τ)/Z(0)`.
    pub fn partition_ratio(&self) -> Result<f64> {
        let ln0 = self.protocol.initial().log_partition_function(self.beta)?;
        let ln1 = self.protocol.final_hamiltonian().log_partition_function(self.beta)?;
        Ok((ln1 - ln0).exp())
    }

    pub fn work_tol(&self) -> f64 {
        default_work_tol(self.protocol.initial(), self.protocol.final_hamiltonian())
    }

    pub fn work_distribution(&self) -> Result<WorkDistribution> {
        let table = joint_table(&self.protocol, &self.instr0, &self.instr_tau, self.beta)?;
        work_distribution(&table, self.work_tol())
    }

    /// Both Hamiltonians with energies multiplied by `x`.
    pub fn scaled(&self, x: f64) -> Result<Self> {
        let p = self.protocol.with_hamiltonians(
            self.protocol.initial().scaled(x)?,
            self.protocol.final_hamiltonian().scaled(x)?,
        )?;
        Ok(Self { protocol: p, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointDiagnostic {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Outcome of one check. `residual` is the metric compared against
/// `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub expected: f64,
    pub actual: f64,
    pub residual: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<PointDiagnostic>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl CheckReport {
    fn scalar(check: &str, expected: f64, actual: f64, tolerance: f64) -> Self {
        let abs = (actual - expected).abs();
        let rel = if expected != 0.0 { abs / expected.abs() } else { abs };
        Self {
            check: check.into(),
            expected,
            actual,
            residual: rel,
            abs_residual: abs,
            rel_residual: rel,
            tolerance,
            pass: rel <= tolerance,
            diagnostics: Vec::new(),
            flags: Vec::new(),
            witness: None,
        }
    }

    /// Report whose residual is the largest per-point residual.
    fn pointwise(check: &str, diagnostics: Vec<PointDiagnostic>, tolerance: f64) -> Self {
        let worst = diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max);
        let abs = diagnostics.iter().map(|d| (d.lhs - d.rhs).abs()).fold(0.0, f64::max);
        Self {
            check: check.into(),
            expected: 0.0,
            actual: worst,
            residual: worst,
            abs_residual: abs,
            rel_residual: worst,
            tolerance,
            pass: worst <= tolerance,
            diagnostics,
            flags: Vec::new(),
            witness: None,
        }
    }

    /// Report on a defect that should vanish.
    fn defect(check: &str, diagnostics: Vec<PointDiagnostic>, tolerance: f64) -> Self {
        let worst = diagnostics.iter().map(|d| d.residual).fold(0.0, f64::max);
        Self {
            check: check.into(),
            expected: 0.0,
            actual: worst,
            residual: worst,
            abs_residual: worst,
            rel_residual: worst,
            tolerance,
            pass: worst <= tolerance,
            diagnostics,
            flags: Vec::new(),
            witness: None,
        }
    }
}

/// `|a − b| / max(|a|, |b|)`, or zero when both are at most [`MASS_FLOOR`].
pub fn relative_point_residual(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale <= MASS_FLOOR {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `⟨e^{−βw}⟩` against `Z(τ)/Z(0)`, relative residual.
pub fn check_jarzynski(s: &Scenario, tol: f64) -> Result<CheckReport> {
    let dist = s.work_distribution()?;
    Ok(CheckReport::scalar("jarzynski", s.partition_ratio()?, exp_average(&dist, s.beta), tol))
}

/// Jarzynski equality of the reversed process, whose target is `Z(0)/Z(τ)`.
pub fn check_backward_jarzynski(s: &Scenario, tol: f64) -> Result<CheckReport> {
    let rev = s.time_reversed()?;
    let dist = rev.work_distribution()?;
    Ok(CheckReport::scalar("backward_jarzynski", rev.partition_ratio()?, exp_average(&dist, s.beta), tol))
}

/// `p_Λ(w) = e^{−β(ΔF−w)} p_Λ̄(−w)` at every forward and backward support
/// point; unmatched points are compared against zero.
pub fn check_crooks(s: &Scenario, tol: f64) -> Result<CheckReport> {
    let forward = s.work_distribution()?;
    let backward = s.time_reversed()?.work_distribution()?;
    let ratio = s.partition_ratio()?;
    let wtol = forward.work_tol().max(backward.work_tol());
    let mut used = vec![false; backward.points().len()];
    let mut rows = Vec::new();
    for pt in forward.points() {
        let matched = backward
            .points()
            .iter()
            .enumerate()
            .filter(|(j, b)| !used[*j] && (b.w + pt.w).abs() <= wtol)
            .min_by(|a, b| (a.1.w + pt.w).abs().total_cmp(&(b.1.w + pt.w).abs()));
        let pb = match matched {
            Some((j, b)) => {
                used[j] = true;
                b.p
            }
            None => 0.0,
        };
        let rhs = ratio * (s.beta * pt.w).exp() * pb;
        rows.push(PointDiagnostic {
            label: format!("w={:.12}", pt.w),
            lhs: pt.p,
            rhs,
            residual: relative_point_residual(pt.p, rhs),
        });
    }
    for (b, _) in backward.points().iter().zip(&used).filter(|(_, u)| !**u) {
        let w = -b.w;
        let rhs = ratio * (s.beta * w).exp() * b.p;
        rows.push(PointDiagnostic {
            label: format!("w={w:.12} (backward only)"),
            lhs: 0.0,
            rhs,
            residual: relative_point_residual(0.0, rhs),
        });
    }
    Ok(CheckReport::pointwise("crooks", rows, tol))
}

/// `p_Λ(m,n|n) d_n(0) = p_Λ̄(n,m|m) d_m(τ)` for all `m, n`.
pub fn check_detailed_balance(s: &Scenario, tol: f64) -> Result<CheckReport> {
    let rev = s.time_reversed()?;
    let fwd = conditional_table(&s.protocol, &s.instr0, &s.instr_tau)?;
    let bwd = conditional_table(&rev.protocol, &rev.instr0, &rev.instr_tau)?;
    let d0 = s.protocol.initial().degeneracies();
    let d1 = s.protocol.final_hamiltonian().degeneracies();
    let mut rows = Vec::new();
    for (n, dn) in d0.iter().enumerate() {
        for (m, dm) in d1.iter().enumerate() {
            let lhs = fwd[n][(m, n)] * *dn as f64;
            let rhs = bwd[m][(n, m)] * *dm as f64;
            rows.push(PointDiagnostic {
                label: format!("m={m},n={n}"),
                lhs,
                rhs,
                residual: relative_point_residual(lhs, rhs),
            });
        }
    }
    Ok(CheckReport::pointwise("detailed_balance", rows, tol))
}

/// First measurement error-free and unital, second with `Tr E_m = d_m(τ)`.
pub fn check_condition_ji(
    instr0: &Instrument,
    instr_tau: &Instrument,
    h0: &SpectralHamiltonian,
    h_tau: &SpectralHamiltonian,
    tol: f64,
) -> Result<CheckReport> {
    let error_defect = error_matrix_defect(instr0, h0)?;
    let unital_defect = instr0.nonselective().unitality_defect();
    let mut rows = vec![
        PointDiagnostic {
            label: "first error-free: max |p(m|n) − δ_mn|".into(),
            lhs: error_defect,
            rhs: 0.0,
            residual: error_defect,
        },
        PointDiagnostic {
            label: "first unital: max |Φ(1) − 1|".into(),
            lhs: unital_defect,
            rhs: 0.0,
            residual: unital_defect,
        },
    ];
    if instr_tau.outcome_count() != h_tau.level_count() || instr_tau.dim() != h_tau.dim() {
        return Err(Error::InvalidInstrument("second instrument does not match its Hamiltonian".into()));
    }
    for (m, e) in instr_tau.effects().iter().enumerate() {
        let tr = trace(e.matrix()).re;
        let d = h_tau.level(m).degeneracy() as f64;
        rows.push(PointDiagnostic {
            label: format!("second Tr E_{m} = d_{m}"),
            lhs: tr,
            rhs: d,
            residual: (tr - d).abs(),
        });
    }
    Ok(CheckReport::defect("condition_ji", rows, tol))
}

/// Second-measurement effects equal `(d_m/D)·1`.
pub fn check_condition_jii(instr_tau: &Instrument, h_tau: &SpectralHamiltonian, tol: f64) -> Result<CheckReport> {
    if instr_tau.outcome_count() != h_tau.level_count() || instr_tau.dim() != h_tau.dim() {
        return Err(Error::InvalidInstrument("instrument does not match its Hamiltonian".into()));
    }
    let dim = h_tau.dim();
    let rows = instr_tau
        .effects()
        .iter()
        .enumerate()
        .map(|(m, e)| {
            let target = identity(dim) * c64(h_tau.level(m).degeneracy() as f64 / dim as f64, 0.0);
            let defect = max_abs_diff(e.matrix(), &target);
            PointDiagnostic { label: format!("max |E_{m} − (d_{m}/D)1|"), lhs: defect, rhs: 0.0, residual: defect }
        })
        .collect();
    Ok(CheckReport::defect("condition_jii", rows, tol))
}

/// Least-squares fit of an instrument to the depolarizing-measurement family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepolarizingFit {
    pub alpha: f64,
    /// `sqrt(Σ_n ‖J_n − J_n(α̂)‖_F²)` over the per-outcome Choi matrices.
    pub residual: f64,
    /// Every fitted operation `φ_n(α̂)` is CP.
    pub in_instrument_range: bool,
    /// The depolarizing channel with parameter `α̂` is CP.
    pub in_universal_range: bool,
    pub error_free: bool,
    pub flags: Vec<String>,
}

fn crooks_family_choi(h: &SpectralHamiltonian, n: usize) -> (CMatrix, CMatrix) {
    let dim = h.dim();
    let p = h.projector(n).matrix();
    let a = choi_of_map(dim, |x| identity(dim) * (trace_of_product(p, x) / c64(dim as f64, 0.0)));
    let b = choi_of_map(dim, |x| p * x * p);
    (a.into_matrix(), b.into_matrix())
}

/// Fits `φ_n(ρ) = (1−α) Tr(Π_n ρ)/D·1 + α Π_n ρ Π_n` to each outcome of
/// `instr`. The fit is performed even for instruments that are not
/// error-free; those are flagged.
pub fn fit_depolarizing_alpha(instr: &Instrument, h: &SpectralHamiltonian) -> Result<DepolarizingFit> {
    if instr.outcome_count() != h.level_count() || instr.dim() != h.dim() {
        return Err(Error::InvalidInstrument("instrument does not match its Hamiltonian".into()));
    }
    let family: Vec<(CMatrix, CMatrix)> = (0..h.level_count()).map(|n| crooks_family_choi(h, n)).collect();
    let targets: Vec<CMatrix> = instr.choi_matrices().into_iter().map(|j| j.into_matrix()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), t) in family.iter().zip(&targets) {
        let d = b - a;
        num += d.zip_map(&(t - a), |x, y| (x.conj() * y).re).sum();
        den += d.norm_squared();
    }
    let alpha = if den > 0.0 { num / den } else { 1.0 };
    let mut sq = 0.0;
    let mut in_instrument_range = true;
    for ((a, b), t) in family.iter().zip(&targets) {
        let fitted = a + (b - a) * c64(alpha, 0.0);
        sq += (t - &fitted).norm_squared();
        let herm = crate::linalg::HermitianOperator::from_hermitian_part(fitted);
        in_instrument_range &= is_psd(&herm, PSD_TOL);
    }
    let in_universal_range = depolarizing(alpha, h.dim()).is_ok();
    let error_free = error_matrix_defect(instr, h)? <= COMPLETENESS_TOL
        && effect_projector_defect(instr, h)? <= COMPLETENESS_TOL;
    let mut flags = Vec::new();
    if !error_free {
        flags.push("error-free precondition violated".to_string());
    }
    if !in_instrument_range {
        flags.push("alpha outside the instrument-form CP range".to_string());
    }
    if !in_universal_range {
        flags.push("alpha outside the universal-channel CP range".to_string());
    }
    if h.is_degenerate() {
        flags.push("restricted: degenerate spectrum, necessity only certified for universal channels".to_string());
    }
    Ok(DepolarizingFit { alpha, residual: sq.sqrt(), in_instrument_range, in_universal_range, error_free, flags })
}

/// Certifies the sufficient condition for the Crooks relation: both
/// instruments fit the depolarizing family (residual ≤ `tol`), lie in range
/// and share the same α within `alpha_tol`.
pub fn check_crooks_condition(
    instr0: &Instrument,
    h0: &SpectralHamiltonian,
    instr_tau: &Instrument,
    h_tau: &SpectralHamiltonian,
    tol: f64,
    alpha_tol: f64,
) -> Result<CheckReport> {
    let f0 = fit_depolarizing_alpha(instr0, h0)?;
    let f1 = fit_depolarizing_alpha(instr_tau, h_tau)?;
    let in_range = |f: &DepolarizingFit, h: &SpectralHamiltonian| {
        if h.is_degenerate() {
            f.in_universal_range
        } else {
            f.in_instrument_range
        }
    };
    let range_defect = |ok: bool| if ok { 0.0 } else { f64::INFINITY };
    let rows = vec![
        PointDiagnostic { label: "first fit residual".into(), lhs: f0.residual, rhs: 0.0, residual: f0.residual },
        PointDiagnostic { label: "second fit residual".into(), lhs: f1.residual, rhs: 0.0, residual: f1.residual },
        PointDiagnostic {
            label: "alpha mismatch (scaled to tolerance)".into(),
            lhs: f0.alpha,
            rhs: f1.alpha,
            residual: (f0.alpha - f1.alpha).abs() * tol / alpha_tol,
        },
        PointDiagnostic {
            label: "first alpha in CP range".into(),
            lhs: f0.alpha,
            rhs: 0.0,
            residual: range_defect(in_range(&f0, h0)),
        },
        PointDiagnostic {
            label: "second alpha in CP range".into(),
            lhs: f1.alpha,
            rhs: 0.0,
            residual: range_defect(in_range(&f1, h_tau)),
        },
    ];
    let mut report = CheckReport::defect("condition_crooks", rows, tol);
    report.flags = f0.flags.iter().chain(&f1.flags).cloned().collect();
    report.flags.dedup();
    Ok(report)
}

#[cfg(test)]
mod tests;
