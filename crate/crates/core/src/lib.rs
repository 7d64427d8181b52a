//! Müller density-matrix functional on finite s-type Gaussian bases.
//!
//! The crate is organised bottom-up:
//!
//! - [`basis`]: nuclear frames, even-tempered s-Gaussian bases and their
//!   one- and two-electron integrals (Hartree atomic units throughout).
//! - [`density`]: orthonormalisation, the occupation projection and the
//!   spectral representation of a one-body density matrix and its square root.
//! - [`energy`]: the Müller energy, its gradient with respect to `g = γ^{1/2}`
//!   and the checkable inequalities (exchange bound, Lieb-Thirring, free bound).
//! - [`solver`]: projected-gradient minimisation over `{0 ≤ γ ≤ 1, tr γ = N}`
//!   or `{tr γ ≤ N}`.
//! - [`thomas_fermi`]: the Thomas-Fermi atom (radial ODE) and diatomic (grid
//!   PDE) reference solvers and the binding defect Γ.
//! - [`checks`]: randomised audits of the inequalities above.
//! - [`experiments`]: dissociation scans, binding reports and the other
//!   orchestration used by the `muller` command-line tool.

pub mod basis;
pub mod checks;
pub mod density;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod solver;
pub mod thomas_fermi;

pub use error::{Error, Result};
