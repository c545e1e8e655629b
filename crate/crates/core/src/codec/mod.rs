//! Compressive capture and ℓ1 recovery of sample streams.
//!
//! The sensing matrix keeps a random subset of raw samples, so the capture
//! side never computes a transform. Recovery solves basis pursuit over the
//! orthonormal DCT-II basis, where the rows of the measurement operator are
//! the kept rows of the inverse DCT matrix.

mod capture;
mod dct;
pub mod format;
mod pattern;
mod recover;
mod solver;

pub use capture::{capture_stream, SampledBlock};
pub use dct::{dct_forward, idct, Dct};
pub use pattern::{make_pattern, SamplingMode, SensingPattern};
pub use recover::{recover_block, recover_stream, BlockStatus, StreamRecovery};
pub use solver::{solve_basis_pursuit, CoeffVector, Solution, SolveStats, SolverConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("block {block_seq} has no kept samples and cannot be recovered")]
    BlockUnrecoverable { block_seq: usize },
    #[error(
        "solver did not converge after {} iterations (primal {:.3e}, dual {:.3e})",
        .stats.iterations, .stats.primal_residual, .stats.dual_residual
    )]
    NotConverged {
        stats: SolveStats,
        /// Last feasible iterate; usable as a degraded estimate.
        last: CoeffVector,
    },
}
