//! Force protocols: initial Hamiltonian, net dynamics, final Hamiltonian.
//!
//! Time-ordered driving is represented only through its net unitary.

use crate::error::{Error, Result};
use crate::hamiltonian::SpectralHamiltonian;
use crate::instrument::{Channel, COMPLETENESS_TOL};
use crate::linalg::{evolve_unitary, CMatrix, DensityMatrix, HermitianOperator, UnitaryOperator};

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Unitary(UnitaryOperator),
    /// Unital channel; admitted only for forward Jarzynski checks.
    Channel(Channel),
}

impl Dynamics {
    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Unitary(u) => u.dim(),
            Dynamics::Channel(c) => c.dim(),
        }
    }

    /// Image of an arbitrary operator.
    pub fn apply_matrix(&self, x: &CMatrix) -> CMatrix {
        match self {
            Dynamics::Unitary(u) => u.matrix() * x * u.matrix().adjoint(),
            Dynamics::Channel(c) => c.apply_matrix(x),
        }
    }

    pub fn as_unitary(&self) -> Option<&UnitaryOperator> {
        match self {
            Dynamics::Unitary(u) => Some(u),
            Dynamics::Channel(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    initial: SpectralHamiltonian,
    final_: SpectralHamiltonian,
    dynamics: Dynamics,
}

impl Protocol {
    pub fn new(initial: SpectralHamiltonian, dynamics: Dynamics, final_: SpectralHamiltonian) -> Result<Self> {
        let dim = initial.dim();
        for d in [final_.dim(), dynamics.dim()] {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: d });
            }
        }
        if let Dynamics::Channel(c) = &dynamics {
            let defect = c.unitality_defect();
            if defect > COMPLETENESS_TOL {
                return Err(Error::InvalidArgument(format!(
                    "channel dynamics must be unital (max |Φ(1) − 1| = {defect:.3e})"
                )));
            }
        }
        Ok(Self { initial, final_, dynamics })
    }

    pub fn unitary(initial: SpectralHamiltonian, u: UnitaryOperator, final_: SpectralHamiltonian) -> Result<Self> {
        Self::new(initial, Dynamics::Unitary(u), final_)
    }

    pub fn initial(&self) -> &SpectralHamiltonian {
        &self.initial
    }

    pub fn final_hamiltonian(&self) -> &SpectralHamiltonian {
        &self.final_
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    /// Same dynamics with replaced Hamiltonians.
    pub fn with_hamiltonians(&self, initial: SpectralHamiltonian, final_: SpectralHamiltonian) -> Result<Self> {
        Self::new(initial, self.dynamics.clone(), final_)
    }

    pub fn with_dynamics(&self, dynamics: Dynamics) -> Result<Self> {
        Self::new(self.initial.clone(), dynamics, self.final_.clone())
    }

    /// Reversed protocol: conjugated Hamiltonians in swapped order and
    /// dynamics `θ† U† θ = Uᵀ`.
    pub fn time_reversed(&self) -> Result<Self> {
        match &self.dynamics {
            Dynamics::Unitary(u) => Ok(Self {
                initial: self.final_.conj(),
                final_: self.initial.conj(),
                dynamics: Dynamics::Unitary(u.transpose()),
            }),
            Dynamics::Channel(_) => Err(Error::Unsupported(
                "channel dynamics has no time-reversed counterpart".into(),
            )),
        }
    }

    pub fn evolve(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: rho.dim() });
        }
        Ok(DensityMatrix::from_cp_image(self.dynamics.apply_matrix(rho.matrix())))
    }
}

/// Sudden quench `H0 → H_mid`, evolution for time `tau` (ħ = 1), sudden
/// quench `H_mid → Hτ`. The quenches themselves do not evolve the state.
pub fn quench_protocol(
    h0: &SpectralHamiltonian,
    h_tau: &SpectralHamiltonian,
    h_mid: &HermitianOperator,
    tau: f64,
) -> Result<Protocol> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be finite and non-negative, got {tau}")));
    }
    if h_mid.dim() != h0.dim() {
        return Err(Error::DimensionMismatch { expected: h0.dim(), actual: h_mid.dim() });
    }
    let u = if tau == 0.0 { UnitaryOperator::identity(h0.dim()) } else { evolve_unitary(h_mid, tau, 1.0) };
    Protocol::unitary(h0.clone(), u, h_tau.clone())
}

pub fn time_reversed(p: &Protocol) -> Result<Protocol> {
    p.time_reversed()
}

pub fn evolve(p: &Protocol, rho: &DensityMatrix) -> Result<DensityMatrix> {
    p.evolve(rho)
}
