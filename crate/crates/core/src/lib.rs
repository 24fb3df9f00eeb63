//! Integrable structure of periodic finite-type solutions of the elliptic
//! sinh-Gordon equation `u_xx + u_yy + 2 sinh(2u) = 0`.
//!
//! The crate is layered bottom-up:
//!
//! * [`algebra`]: complex polynomials, sl(2) Laurent loops, reality
//!   conditions, the Lie-algebra Iwasawa split and the residue inner product.
//! * [`jets`]: periodic Cauchy data `(u, u_y)` and mixed `z`, `z̄` derivatives
//!   on the line `y = 0`, with the `y`-jet generated from the equation.
//! * [`diffpoly`]: symbolic differential polynomials, the formal
//!   diagonalization recursion and the Pinkall-Sterling iteration.
//! * [`laxflow`]: the connection `U_λ`, monodromy, Killing-field flows in
//!   `x` and `y`, and a Sym-Bobenko mesh export.
//! * [`spectral`]: spectral-curve data `(a, b)`, contour integrals on
//!   `ν² = λ a(λ)` and the closing conditions.
//! * [`symplectic`]: the symplectic form, Hamiltonians, gradients,
//!   isospectral vector fields and the residue pairing check.
//! * [`whitham`]: isoperiodic deformations of `(a, b)`.

pub mod algebra;
pub mod data;
pub mod diffpoly;
pub mod error;
pub mod jets;
pub mod laxflow;
pub mod ode;
pub mod spectral;
pub mod symplectic;
pub mod whitham;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
