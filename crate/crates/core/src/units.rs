//! Physical constants in the (nm, eV) unit system used throughout the crate.

/// Reduced Planck constant [J s].
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Free electron mass [kg].
pub const ELECTRON_MASS_SI: f64 = 9.109_383_701_5e-31;
/// Elementary charge [C], also the J -> eV conversion.
pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;

/// ħ²/(2 m0) expressed in eV nm² (≈ 0.0380998).
pub const HBAR2_OVER_2M0: f64 = HBAR_SI * HBAR_SI / (2.0 * ELECTRON_MASS_SI) / ELEMENTARY_CHARGE_SI * 1.0e18;

/// Potential-energy slope [eV/nm] seen by an electron in a 1 kV/cm field.
///
/// 1 kV/cm = 1e5 V/m = 1e-4 V/nm, times the electron charge magnitude.
pub const EV_PER_NM_PER_KV_CM: f64 = 1.0e-4;
