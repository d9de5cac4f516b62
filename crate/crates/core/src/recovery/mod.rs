//! Sensing matrices, sparsity bases, greedy sparse recovery and quality scoring.

mod basis;
mod omp;
mod quality;
mod sensing;
mod synth;

pub use basis::{build_basis, BasisKind, SparsityBasis};
pub use omp::{omp_reconstruct, omp_solve, Dictionary, OmpSolution, RecoveryParams};
pub use quality::{classify_prd, prd, Quality};
pub use sensing::{gen_sensing_matrix, measurements_for_cr, SensingMatrix};
pub use synth::{synth_sparse_signal, synth_sparse_signal_in, SyntheticSignal};
