//! Seeded sampling of unitaries, states and Hermitian operators.
//!
//! Every consumer owns its own generator; parallel work derives one stream per
//! task from a `(seed, stream)` pair so results never depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector, DensityMatrix, HermitianOperator, UnitaryOperator, C64};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard complex Gaussian with `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    // column-major fill order is part of the reproducibility contract
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn sample_haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> UnitaryOperator {
    let z = ginibre(rng, dim, dim);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c64(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryOperator::new(q).expect("Householder QR yields a unitary factor")
}

/// Haar unitary from a seed; identical seeds give bit-identical matrices.
pub fn haar_unitary(dim: usize, seed: u64) -> Result<UnitaryOperator> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(sample_haar_unitary(&mut seeded_rng(seed, 0), dim))
}

/// Haar-random unit vector.
pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVector {
    let v = CVector::from_fn(dim, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v / c64(n, 0.0)
}

/// GUE-like Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianOperator {
    let g = ginibre(rng, dim, dim);
    HermitianOperator::new((&g + g.adjoint()) * c64(0.5, 0.0)).expect("Hermitian by construction")
}

/// Full-rank random state `G G† / Tr(G G†)` (Hilbert–Schmidt measure).
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, dim);
    let w = &g * g.adjoint();
    let tr = crate::linalg::trace(&w).re;
    DensityMatrix::new(w * c64(1.0 / tr, 0.0)).expect("Wishart matrices are states")
}

pub fn uniform_in<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
