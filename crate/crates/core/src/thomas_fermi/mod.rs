//! Thomas-Fermi reference theory.
//!
//! The functional is
//! `E[ρ] = c_K ∫ρ^{5/3} - ∫ V ρ + D[ρ] + U`, with the attraction entering
//! with a minus sign. Its minimiser satisfies `ρ^{2/3} = (3/(5c_K)) [φ - μ]_+`
//! where `φ` is the total electrostatic potential.
//!
//! The kinetic prefactor `c_K` is a parameter; the default is
//! `(3/10)(3π²)^{2/3}`. This is the spin-summed convention; the spinless one
//! differs by `2^{2/3}`.

pub mod atom;
pub mod grid;
pub mod ode;

use std::f64::consts::PI;

pub use atom::{tf_atom, tf_universal_slope, NeutralProfile, RadialSamples, TfAtomSolution};
pub use grid::{tf_diatomic, tf_gamma, tf_gamma_estimate, TfGammaEstimate, TfGridSolution, TfGridSpec};

use crate::error::{Error, Result};

/// `(3/10)(3π²)^{2/3}`.
pub fn default_kinetic_prefactor() -> f64 {
    0.3 * (3.0 * PI * PI).powf(2.0 / 3.0)
}

/// `2^{5/3}(6π²)^{-2/3}`, the constant in `ρ^{2/3} = C [φ - μ]_+`.
pub fn equation_constant() -> f64 {
    2f64.powf(5.0 / 3.0) * (6.0 * PI * PI).powf(-2.0 / 3.0)
}

/// Checks `3/(5 c_K) = 2^{5/3}(6π²)^{-2/3}` for the default `c_K`.
pub fn check_constant_identity() -> Result<()> {
    let lhs = 3.0 / (5.0 * default_kinetic_prefactor());
    let rhs = equation_constant();
    if ((lhs - rhs) / rhs).abs() > 1e-14 {
        return Err(Error::Internal(format!(
            "Thomas-Fermi constants inconsistent: 3/(5c_K) = {lhs}, equation constant = {rhs}"
        )));
    }
    Ok(())
}

/// `κ` in `ρ = κ [φ - μ]_+^{3/2}`.
pub fn density_prefactor(c_k: f64) -> f64 {
    (3.0 / (5.0 * c_k)).powf(1.5)
}

/// Length scale `b` (bohr) with `r = b x` in the universal equation.
pub fn length_scale(z: f64, c_k: f64) -> f64 {
    (4.0 * PI * density_prefactor(c_k)).powf(-2.0 / 3.0) * z.powf(-1.0 / 3.0)
}
