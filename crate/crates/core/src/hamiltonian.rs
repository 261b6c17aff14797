//! Spectral Hamiltonians with degeneracy bookkeeping and thermal states.

use crate::error::{Error, Result};
use crate::linalg::{
    c64, hermitian_eig, identity, max_abs_diff, real_diagonal, trace, CMatrix, DensityMatrix,
    HermitianOperator, UnitaryOperator,
};
use crate::random::{seeded_rng, uniform_in};

/// Relative eigenvalue grouping tolerance used when none is configured.
pub const DEFAULT_GROUP_TOL: f64 = 1e-9;

/// One eigenspace: energy, an orthonormal basis of the eigenspace (columns),
/// and the projector onto it.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLevel {
    energy: f64,
    basis: CMatrix,
    projector: HermitianOperator,
}

impl EnergyLevel {
    fn new(energy: f64, basis: CMatrix) -> Self {
        let projector = HermitianOperator::from_hermitian_part(&basis * basis.adjoint());
        Self { energy, basis, projector }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn degeneracy(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> &HermitianOperator {
        &self.projector
    }

    /// `D x d` matrix whose columns span the eigenspace.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }
}

/// `H = Σ_n e_n Π_n` with strictly increasing energies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralHamiltonian {
    dim: usize,
    levels: Vec<EnergyLevel>,
}

impl SpectralHamiltonian {
    /// Diagonalises `m` and merges eigenvalues closer than
    /// `group_tol·max(1, ‖M‖_max)` (chained over neighbours) into one level.
    pub fn from_matrix(m: &HermitianOperator, group_tol: f64) -> Self {
        let dim = m.dim();
        let eig = hermitian_eig(m);
        let merge = group_tol * m.max_abs().max(1.0);
        let v = eig.eigenvectors.matrix();
        let mut levels = Vec::new();
        let mut start = 0;
        for k in 1..=dim {
            if k == dim || eig.eigenvalues[k] - eig.eigenvalues[k - 1] > merge {
                let group = &eig.eigenvalues[start..k];
                let energy = group.iter().sum::<f64>() / group.len() as f64;
                levels.push(EnergyLevel::new(energy, v.columns(start, k - start).into_owned()));
                start = k;
            }
        }
        Self { dim, levels }
    }

    /// Levels built in the computational basis: the first `d_0` basis states
    /// span level 0, the next `d_1` level 1, and so on.
    pub fn from_spectrum(energies: &[f64], degeneracies: &[usize]) -> Result<Self> {
        let dim: usize = degeneracies.iter().sum();
        Self::from_spectrum_in_basis(energies, degeneracies, &UnitaryOperator::identity(dim))
    }

    pub fn nondegenerate(energies: &[f64]) -> Result<Self> {
        Self::from_spectrum(energies, &vec![1; energies.len()])
    }

    /// Like [`from_spectrum`](Self::from_spectrum) with the columns of `basis`
    /// in place of the computational basis.
    pub fn from_spectrum_in_basis(
        energies: &[f64],
        degeneracies: &[usize],
        basis: &UnitaryOperator,
    ) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if energies.len() != degeneracies.len() {
            return Err(Error::InvalidArgument(format!(
                "{} energies but {} degeneracies",
                energies.len(),
                degeneracies.len()
            )));
        }
        if let Some(i) = degeneracies.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("degeneracy of level {i} is zero")));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("non-finite energy".into()));
        }
        if let Some(i) = energies.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "energies must be strictly increasing (levels {i} and {})",
                i + 1
            )));
        }
        let dim: usize = degeneracies.iter().sum();
        if basis.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, actual: basis.dim() });
        }
        let mut offset = 0;
        let levels = energies
            .iter()
            .zip(degeneracies)
            .map(|(&e, &d)| {
                let level = EnergyLevel::new(e, basis.matrix().columns(offset, d).into_owned());
                offset += d;
                level
            })
            .collect();
        Ok(Self { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[EnergyLevel] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, n: usize) -> &EnergyLevel {
        &self.levels[n]
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn degeneracies(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.degeneracy()).collect()
    }

    pub fn projector(&self, n: usize) -> &HermitianOperator {
        &self.levels[n].projector
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels.len() < self.dim
    }

    /// Reassembled matrix `Σ_n e_n Π_n`.
    pub fn matrix(&self) -> HermitianOperator {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for level in &self.levels {
            m += level.projector.matrix() * c64(level.energy, 0.0);
        }
        HermitianOperator::from_hermitian_part(m)
    }

    /// Same eigenspaces, new energies (must stay strictly increasing).
    pub fn with_energies(&self, energies: &[f64]) -> Result<Self> {
        if energies.len() != self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} energies, got {}",
                self.levels.len(),
                energies.len()
            )));
        }
        if energies.windows(2).any(|w| w[1] <= w[0]) || energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("energies must be finite and strictly increasing".into()));
        }
        let levels = self
            .levels
            .iter()
            .zip(energies)
            .map(|(l, &e)| EnergyLevel { energy: e, ..l.clone() })
            .collect();
        Ok(Self { dim: self.dim, levels })
    }

    /// The spectrum `x·e_n` on the same eigenspaces.
    pub fn scaled(&self, x: f64) -> Result<Self> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale factor must be positive, got {x}")));
        }
        let energies: Vec<f64> = self.levels.iter().map(|l| x * l.energy).collect();
        self.with_energies(&energies)
    }

    pub fn shifted(&self, c: f64) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|l| EnergyLevel { energy: l.energy + c, ..l.clone() })
            .collect();
        Self { dim: self.dim, levels }
    }

    /// `U H U†`.
    pub fn rotated(&self, u: &UnitaryOperator) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|l| EnergyLevel::new(l.energy, u.matrix() * &l.basis))
            .collect();
        Self { dim: self.dim, levels }
    }

    /// `θ H θ†` for θ the complex conjugation in the computational basis.
    pub fn conj(&self) -> Self {
        let levels = self
            .levels
            .iter()
            .map(|l| EnergyLevel::new(l.energy, crate::linalg::conj(&l.basis)))
            .collect();
        Self { dim: self.dim, levels }
    }

    /// Largest violation of `Π_n Π_m = δ_nm Π_n`, `Σ Π_n = 1` and `Tr Π_n = d_n`.
    pub fn invariant_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        let mut sum = CMatrix::zeros(self.dim, self.dim);
        for (n, a) in self.levels.iter().enumerate() {
            sum += a.projector.matrix();
            defect = defect.max((trace(a.projector.matrix()).re - a.degeneracy() as f64).abs());
            for (m, b) in self.levels.iter().enumerate() {
                let prod = a.projector.matrix() * b.projector.matrix();
                let target = if n == m { a.projector.matrix().clone() } else { CMatrix::zeros(self.dim, self.dim) };
                defect = defect.max(max_abs_diff(&prod, &target));
            }
        }
        defect.max(max_abs_diff(&sum, &identity(self.dim)))
    }

    /// Energy scale used for work-value merging: `max(1, max |e_n|)`.
    pub fn energy_scale(&self) -> f64 {
        self.levels.iter().map(|l| l.energy.abs()).fold(1.0, f64::max)
    }

    /// `ln Z = ln Σ_n d_n e^{−β e_n}`, evaluated with the ground energy factored out.
    pub fn log_partition_function(&self, beta: f64) -> Result<f64> {
        check_beta(beta)?;
        let e0 = self.levels[0].energy;
        let sum: f64 = self
            .levels
            .iter()
            .map(|l| l.degeneracy() as f64 * (-beta * (l.energy - e0)).exp())
            .sum();
        Ok(-beta * e0 + sum.ln())
    }

    pub fn partition_function(&self, beta: f64) -> Result<f64> {
        Ok(self.log_partition_function(beta)?.exp())
    }

    /// Canonical level populations `p_β(n) = d_n e^{−β e_n} / Z`.
    pub fn populations(&self, beta: f64) -> Result<Vec<f64>> {
        let log_z = self.log_partition_function(beta)?;
        Ok(self
            .levels
            .iter()
            .map(|l| l.degeneracy() as f64 * (-beta * l.energy - log_z).exp())
            .collect())
    }

    /// `ρ_β = Z^{-1} Σ_n e^{−β e_n} Π_n`.
    pub fn gibbs_state(&self, beta: f64) -> Result<DensityMatrix> {
        let pops = self.populations(beta)?;
        let mut rho = CMatrix::zeros(self.dim, self.dim);
        for (level, p) in self.levels.iter().zip(pops) {
            rho += level.projector.matrix() * c64(p / level.degeneracy() as f64, 0.0);
        }
        Ok(DensityMatrix::from_cp_image(rho))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

pub fn partition_function(h: &SpectralHamiltonian, beta: f64) -> Result<f64> {
    h.partition_function(beta)
}

pub fn gibbs_state(h: &SpectralHamiltonian, beta: f64) -> Result<DensityMatrix> {
    h.gibbs_state(beta)
}

pub fn spectral_from_matrix(m: &HermitianOperator, group_tol: f64) -> SpectralHamiltonian {
    SpectralHamiltonian::from_matrix(m, group_tol)
}

/// True iff all energies are distinct and all ordered differences
/// `e_n − e_m` (n ≠ m) differ pairwise by more than `tol`.
pub fn has_distinct_differences(energies: &[f64], tol: f64) -> bool {
    let n = energies.len();
    let mut diffs = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = energies[i] - energies[j];
                if d.abs() <= tol {
                    return false;
                }
                diffs.push(d);
            }
        }
    }
    for a in 0..diffs.len() {
        for b in (a + 1)..diffs.len() {
            if (diffs[a] - diffs[b]).abs() <= tol {
                return false;
            }
        }
    }
    true
}

/// True iff the work values `e_m(τ) − e_n(0)` are pairwise distinct beyond `tol`.
pub fn has_distinct_work_values(initial: &[f64], final_: &[f64], tol: f64) -> bool {
    let mut works = Vec::with_capacity(initial.len() * final_.len());
    for &ef in final_ {
        for &ei in initial {
            works.push(ef - ei);
        }
    }
    works.sort_by(f64::total_cmp);
    works.windows(2).all(|w| w[1] - w[0] > tol)
}

/// Sorted energies in `[0, 1)` whose pairwise differences are all distinct
/// (checked exhaustively at tolerance `1e-9`); deterministic per seed.
pub fn nondegenerate_difference_spectrum(n_levels: usize, seed: u64) -> Vec<f64> {
    const TOL: f64 = 1e-9;
    let mut rng = seeded_rng(seed, 0x5eed);
    loop {
        let mut candidate: Vec<f64> = (0..n_levels).map(|_| uniform_in(&mut rng, 0.0, 1.0)).collect();
        candidate.sort_by(f64::total_cmp);
        if has_distinct_differences(&candidate, TOL) {
            return candidate;
        }
    }
}

/// Convenience for tests and builders: `H = diag(values)`.
pub fn diagonal_hamiltonian(values: &[f64], group_tol: f64) -> SpectralHamiltonian {
    SpectralHamiltonian::from_matrix(&HermitianOperator::new(real_diagonal(values)).expect("diagonal"), group_tol)
}
