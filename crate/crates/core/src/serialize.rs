//! JSON forms of matrices, Hamiltonians, dynamics, instruments and
//! scenarios. Complex numbers are `[re, im]` pairs and matrices are lists of
//! rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{SpectralHamiltonian, DEFAULT_GROUP_TOL};
use crate::instrument::{Channel, Instrument, Outcome, QuantumOperation};
use crate::linalg::{c64, CMatrix, CVector, HermitianOperator, UnitaryOperator};
use crate::protocol::{quench_protocol, Dynamics, Protocol};
use crate::random::haar_unitary;
use crate::verifier::Scenario;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_rows(m: &CMatrix) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_to_json(m: &CMatrix) -> serde_json::Value {
    serde_json::to_value(matrix_to_rows(m)).expect("finite matrices serialize")
}

pub fn matrix_from_rows(rows: &MatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let cols = rows[0].len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::InvalidArgument(format!("row {i} has {} entries, expected {cols}", r.len())));
    }
    let m = CMatrix::from_fn(n, cols, |i, j| c64(rows[i][j][0], rows[i][j][1]));
    crate::linalg::require_finite(&m)?;
    Ok(m)
}

pub fn vector_from_json(v: &[[f64; 2]]) -> Result<CVector> {
    if v.is_empty() {
        return Err(Error::ZeroDimension);
    }
    Ok(CVector::from_iterator(v.len(), v.iter().map(|z| c64(z[0], z[1]))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// Hermitian matrix; eigenvalues within `group_tol` form one level.
    Matrix(MatrixJson),
    /// Strictly increasing energies with degeneracies (default 1) in the
    /// columns of `basis` (default computational).
    Spectrum {
        energies: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        degeneracies: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        basis: Option<MatrixJson>,
    },
}

impl HamiltonianSpec {
    pub fn build(&self) -> Result<SpectralHamiltonian> {
        match self {
            HamiltonianSpec::Matrix(rows) => {
                let m = HermitianOperator::new(matrix_from_rows(rows)?)?;
                Ok(SpectralHamiltonian::from_matrix(&m, DEFAULT_GROUP_TOL))
            }
            HamiltonianSpec::Spectrum { energies, degeneracies, basis } => {
                let degs = degeneracies.clone().unwrap_or_else(|| vec![1; energies.len()]);
                match basis {
                    None => SpectralHamiltonian::from_spectrum(energies, &degs),
                    Some(rows) => SpectralHamiltonian::from_spectrum_in_basis(
                        energies,
                        &degs,
                        &UnitaryOperator::new(matrix_from_rows(rows)?)?,
                    ),
                }
            }
        }
    }

    /// Spectrum form with the eigenbasis spelled out; builds back exactly.
    pub fn from_hamiltonian(h: &SpectralHamiltonian) -> Self {
        let mut basis = CMatrix::zeros(h.dim(), h.dim());
        let mut offset = 0;
        for level in h.levels() {
            basis.columns_mut(offset, level.degeneracy()).copy_from(level.basis());
            offset += level.degeneracy();
        }
        HamiltonianSpec::Spectrum {
            energies: h.energies(),
            degeneracies: Some(h.degeneracies()),
            basis: Some(matrix_to_rows(&basis)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Identity,
    Unitary(MatrixJson),
    /// `e^{−iτH}` for a Hermitian `generator` (ħ = 1).
    Quench { generator: MatrixJson, tau: f64 },
    /// Unital channel given by its Kraus operators.
    Channel(Vec<MatrixJson>),
    /// Haar-random unitary; the seed defaults to the run seed.
    Haar {
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl DynamicsSpec {
    pub fn build_protocol(&self, h0: SpectralHamiltonian, h1: SpectralHamiltonian, run_seed: u64) -> Result<Protocol> {
        let dim = h0.dim();
        match self {
            DynamicsSpec::Identity => Protocol::unitary(h0, UnitaryOperator::identity(dim), h1),
            DynamicsSpec::Unitary(rows) => Protocol::unitary(h0, UnitaryOperator::new(matrix_from_rows(rows)?)?, h1),
            DynamicsSpec::Quench { generator, tau } => {
                let g = HermitianOperator::new(matrix_from_rows(generator)?)?;
                quench_protocol(&h0, &h1, &g, *tau)
            }
            DynamicsSpec::Channel(kraus) => {
                let ops = kraus.iter().map(matrix_from_rows).collect::<Result<Vec<_>>>()?;
                Protocol::new(h0, Dynamics::Channel(Channel::from_kraus(ops)?), h1)
            }
            DynamicsSpec::Haar { seed } => Protocol::unitary(h0, haar_unitary(dim, seed.unwrap_or(run_seed))?, h1),
        }
    }

    pub fn from_dynamics(d: &Dynamics) -> Self {
        match d {
            Dynamics::Unitary(u) => DynamicsSpec::Unitary(matrix_to_rows(u.matrix())),
            Dynamics::Channel(c) => DynamicsSpec::Channel(c.kraus().iter().map(matrix_to_rows).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeJson {
    pub label: usize,
    pub kraus: Vec<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentJson {
    pub outcomes: Vec<OutcomeJson>,
}

impl InstrumentJson {
    pub fn from_instrument(instr: &Instrument) -> Self {
        Self {
            outcomes: instr
                .outcomes()
                .iter()
                .map(|o| OutcomeJson { label: o.label, kraus: o.operation.kraus().iter().map(matrix_to_rows).collect() })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<Instrument> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| {
                let kraus = o.kraus.iter().map(matrix_from_rows).collect::<Result<Vec<_>>>()?;
                Ok(Outcome { label: o.label, operation: QuantumOperation::new(kraus)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Instrument::new(outcomes)
    }
}

/// Per-outcome Choi matrices, for external tomography tools.
pub fn choi_export(instr: &Instrument) -> serde_json::Value {
    serde_json::json!({
        "convention": "J = sum_l vec(B_l) vec(B_l)^dagger / D, column-stacking vec",
        "outcomes": instr
            .outcomes()
            .iter()
            .map(|o| serde_json::json!({ "label": o.label, "choi": matrix_to_json(o.operation.choi().matrix()) }))
            .collect::<Vec<_>>(),
    })
}

/// Fully explicit scenario, as written for search witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioJson {
    pub beta: f64,
    pub initial: HamiltonianSpec,
    #[serde(rename = "final")]
    pub final_: HamiltonianSpec,
    pub dynamics: DynamicsSpec,
    pub instr0: InstrumentJson,
    pub instr_tau: InstrumentJson,
}

impl ScenarioJson {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            beta: s.beta,
            initial: HamiltonianSpec::from_hamiltonian(s.protocol.initial()),
            final_: HamiltonianSpec::from_hamiltonian(s.protocol.final_hamiltonian()),
            dynamics: DynamicsSpec::from_dynamics(s.protocol.dynamics()),
            instr0: InstrumentJson::from_instrument(&s.instr0),
            instr_tau: InstrumentJson::from_instrument(&s.instr_tau),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let p = self.dynamics.build_protocol(self.initial.build()?, self.final_.build()?, 0)?;
        Scenario::new(p, self.instr0.build()?, self.instr_tau.build()?, self.beta)
    }
}
