pub mod cli;
pub mod error;
pub mod hamiltonian;
pub mod instrument;
pub mod linalg;
pub mod protocol;
pub mod lemma_lab;
pub mod random;
pub mod serialize;
pub mod verifier;
pub mod work_stats;

pub use error::{Error, Result};
