//! Joint outcome probabilities of the two energy measurements and the
//! discrete work distribution built from them.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;
use crate::instrument::Instrument;
use crate::linalg::{trace_of_product, CMatrix};
use crate::protocol::Protocol;

/// Probabilities below this are treated as numerical noise when reporting.
pub const NEGATIVE_MASS_TOL: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// `1e-9 · max(energy scale of either Hamiltonian)`.
pub fn default_work_tol(h0: &SpectralHamiltonian, h_tau: &SpectralHamiltonian) -> f64 {
    1e-9 * h0.energy_scale().max(h_tau.energy_scale())
}

/// `p[(m, n)]`: probability of final outcome `m` and initial outcome `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOutcomeTable {
    probs: DMatrix<f64>,
    initial_energies: Vec<f64>,
    final_energies: Vec<f64>,
}

impl JointOutcomeTable {
    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.probs[(m, n)]
    }

    pub fn initial_energies(&self) -> &[f64] {
        &self.initial_energies
    }

    pub fn final_energies(&self) -> &[f64] {
        &self.final_energies
    }

    pub fn total(&self) -> f64 {
        self.probs.sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.probs.min()
    }
}

fn check_instruments(p: &Protocol, instr0: &Instrument, instr_tau: &Instrument) -> Result<()> {
    for (instr, h, which) in [(instr0, p.initial(), "first"), (instr_tau, p.final_hamiltonian(), "second")] {
        if instr.dim() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), actual: instr.dim() });
        }
        if instr.outcome_count() != h.level_count() {
            return Err(Error::InvalidInstrument(format!(
                "{which} instrument has {} outcomes but its Hamiltonian has {} levels",
                instr.outcome_count(),
                h.level_count()
            )));
        }
    }
    Ok(())
}

/// `Tr E_m^τ 𝒰(φ⁰_n(X))` for every `(m, n)`.
fn outcome_matrix(p: &Protocol, instr0: &Instrument, instr_tau: &Instrument, x: &CMatrix) -> DMatrix<f64> {
    let effects = instr_tau.effects();
    let mut out = DMatrix::zeros(instr_tau.outcome_count(), instr0.outcome_count());
    for n in 0..instr0.outcome_count() {
        let evolved = p.dynamics().apply_matrix(&instr0.operation(n).apply_matrix(x));
        for (m, e) in effects.iter().enumerate() {
            out[(m, n)] = trace_of_product(e.matrix(), &evolved).re;
        }
    }
    out
}

fn check_normalized(probs: &DMatrix<f64>, what: &str) -> Result<()> {
    let total = probs.sum();
    let min = probs.min();
    if (total - 1.0).abs() > NORMALIZATION_TOL || min < -NEGATIVE_MASS_TOL {
        return Err(Error::InvalidInstrument(format!(
            "{what} is not a probability table (sum {total:.15}, min entry {min:.3e})"
        )));
    }
    Ok(())
}

/// `p(m,n) = Tr φᵗ_m(U φ⁰_n(ρ_β) U†)` with `ρ_β` the Gibbs state of the
/// initial Hamiltonian.
pub fn joint_table(p: &Protocol, instr0: &Instrument, instr_tau: &Instrument, beta: f64) -> Result<JointOutcomeTable> {
    check_instruments(p, instr0, instr_tau)?;
    let rho = p.initial().gibbs_state(beta)?;
    let probs = outcome_matrix(p, instr0, instr_tau, rho.matrix());
    check_normalized(&probs, "joint outcome table")?;
    Ok(JointOutcomeTable {
        probs,
        initial_energies: p.initial().energies(),
        final_energies: p.final_hamiltonian().energies(),
    })
}

/// `p(m,n|k)` for the initial state `Π_k / d_k`; entry `k` of the result is
/// the table indexed `[(m, n)]`.
pub fn conditional_table(p: &Protocol, instr0: &Instrument, instr_tau: &Instrument) -> Result<Vec<DMatrix<f64>>> {
    check_instruments(p, instr0, instr_tau)?;
    p.initial()
        .levels()
        .iter()
        .map(|level| {
            let x = level.projector().matrix() / crate::linalg::c64(level.degeneracy() as f64, 0.0);
            let probs = outcome_matrix(p, instr0, instr_tau, &x);
            check_normalized(&probs, "conditional outcome table")?;
            Ok(probs)
        })
        .collect()
}

/// `p^{2p}(m|n) = Tr Π_m(τ) U Π_n(0) U† / d_n(0)`.
pub fn two_point_conditional(p: &Protocol) -> DMatrix<f64> {
    let h0 = p.initial();
    let h1 = p.final_hamiltonian();
    DMatrix::from_fn(h1.level_count(), h0.level_count(), |m, n| {
        let level = h0.level(n);
        let evolved = p.dynamics().apply_matrix(level.projector().matrix());
        trace_of_product(h1.projector(m).matrix(), &evolved).re / level.degeneracy() as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkPoint {
    pub w: f64,
    pub p: f64,
}

/// Point masses at the distinct work values, sorted ascending. Masses are raw
/// (possibly slightly negative through rounding); see [`WorkDistribution::clipped`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkDistribution {
    points: Vec<WorkPoint>,
    work_tol: f64,
}

impl WorkDistribution {
    pub fn points(&self) -> &[WorkPoint] {
        &self.points
    }

    pub fn work_tol(&self) -> f64 {
        self.work_tol
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|pt| pt.p).sum()
    }

    /// Mass at the support point within `work_tol` of `w`, if any.
    pub fn mass_at(&self, w: f64) -> Option<f64> {
        self.points.iter().find(|pt| (pt.w - w).abs() <= self.work_tol).map(|pt| pt.p)
    }

    /// Reporting view: points with mass above the noise floor, renormalised.
    /// Raw masses (including zero and slightly negative ones) stay in
    /// [`WorkDistribution::points`].
    pub fn clipped(&self) -> Vec<WorkPoint> {
        let clipped: Vec<WorkPoint> =
            self.points.iter().filter(|pt| pt.p > NEGATIVE_MASS_TOL).copied().collect();
        let total: f64 = clipped.iter().map(|pt| pt.p).sum();
        if total <= 0.0 {
            return clipped;
        }
        clipped.into_iter().map(|pt| WorkPoint { w: pt.w, p: pt.p / total }).collect()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            points: self.points.iter().map(|pt| WorkPoint { w: pt.w + c, p: pt.p }).collect(),
            work_tol: self.work_tol,
        }
    }

    /// Writes `w,p` rows (clipped masses).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for pt in self.clipped() {
            writer.serialize(pt).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        writer.flush().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "work_tol": self.work_tol,
            "points": self.clipped(),
            "raw_points": self.points,
        })
    }
}

/// Aggregates `p(m,n)` at `w = e_m(τ) − e_n(0)`. Values are sorted and
/// chained into one support point while consecutive gaps stay within
/// `work_tol`; the point sits at the mean of its members.
pub fn work_distribution(table: &JointOutcomeTable, work_tol: f64) -> Result<WorkDistribution> {
    if !(work_tol.is_finite() && work_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("work tolerance must be non-negative, got {work_tol}")));
    }
    let mut raw: Vec<(f64, f64)> = Vec::with_capacity(table.probs.len());
    for (m, em) in table.final_energies.iter().enumerate() {
        for (n, en) in table.initial_energies.iter().enumerate() {
            raw.push((em - en, table.probs[(m, n)]));
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut points = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let mut j = i + 1;
        while j < raw.len() && raw[j].0 - raw[j - 1].0 <= work_tol {
            j += 1;
        }
        let group = &raw[i..j];
        let w = group.iter().map(|x| x.0).sum::<f64>() / group.len() as f64;
        let p = group.iter().map(|x| x.1).sum();
        points.push(WorkPoint { w, p });
        i = j;
    }
    Ok(WorkDistribution { points, work_tol })
}

/// `Σ_k p_k e^{−β w_k}`.
pub fn exp_average(dist: &WorkDistribution, beta: f64) -> f64 {
    dist.points.iter().map(|pt| pt.p * (-beta * pt.w).exp()).sum()
}
