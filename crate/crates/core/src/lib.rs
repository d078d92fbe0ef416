//! Row-sampling preconditioned conjugate gradient for overdetermined least squares.
//!
//! Rows of `A` are drawn with probability proportional to their squared norm,
//! the sampled Gram matrix `A_s^T A_s` is turned into a symmetric Gauss-Seidel
//! preconditioner, and PCG runs on the full normal equation `A^T A x = A^T b`.
//!
//! ```
//! use rsls::{lsq_solve_rs, DenseMatrix, SolverConfig};
//!
//! let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
//! let (x, report) = lsq_solve_rs(&a, &[1.0, 2.0, 2.0], &SolverConfig::default()).unwrap();
//! assert!(report.converged);
//! assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] - 1.0).abs() < 1e-6);
//! ```

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod generators;
pub mod linalg;
pub mod matrix;
pub mod precond;
pub mod rng;
pub mod sampling;
pub mod solvers;

pub use error::{Error, Result};
pub use matrix::{read_matrix_market, write_matrix_market, DenseMatrix, Matrix, MatrixOps, SparseMatrix};
pub use precond::{assemble_gram, GramMatrix, IdentityPreconditioner, Preconditioner, SgsPreconditioner};
pub use sampling::{default_sample_size, sample_size, SamplePlan, SamplingDensity};
pub use solvers::{cg_normal, dense_lsq_oracle, lsq_solve_cg, lsq_solve_rs, pcg_normal, SolveReport, SolverConfig};
pub use diagnostics::{spectral_summary, ConcentrationReport, SpectralSummary};
pub use generators::{consistent_rhs, GraphModel};
