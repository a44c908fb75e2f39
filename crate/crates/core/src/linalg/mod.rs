//! Self-contained linear algebra for tridiagonal problems.

mod bordered;
mod eigen;
mod kantorovich;
mod newton;
mod tridiag;

pub use bordered::{solve_bordered, BorderedFactor, BorderedSystem, BORDERED_RESIDUAL_TOL};
pub use eigen::{eig_symmetric_tridiagonal, eigenvalues_above, kth_eigenvalue, sturm_count, symmetric_tridiagonal_eigenvalues};
pub use kantorovich::{kantorovich_check, KantorovichCertificate, DEFAULT_KANTOROVICH_SAMPLES};
pub use newton::{newton_solve, norm_inf, NewtonConfig, NewtonOutcome};
pub use tridiag::{solve_tridiagonal, TridiagonalLu, TridiagonalMatrix, THOMAS_PIVOT_FLOOR};
