//! Continuation and bifurcation analysis of localized steady states of the
//! discrete Nagumo lattice
//!
//! ```text
//! dU_n/dt = d (U_{n+1} + U_{n-1} - 2 U_n) + U_n (U_n - mu) (1 - U_n)
//! ```
//!
//! The crate builds single- and multi-pulse steady states from the uncoupled
//! limit `d = 0`, follows their solution curves in `mu` by pseudo-arclength
//! continuation, locates folds and symmetry-breaking pitchforks, counts
//! unstable eigenvalues, and cross-checks the pinning interval of fronts
//! through the stable and unstable manifolds of the planar spatial map.

pub mod continuation;
pub mod error;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod map;
pub mod pulse;
pub mod stability;

pub use error::{Error, Result};
pub use lattice::{Boundary, Center, HomogeneousState, LatticeParams, LatticeProfile};
