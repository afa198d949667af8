//! Unit conventions.
//!
//! Spectroscopic data files carry energies in wavenumbers (cm⁻¹); all
//! internal dynamics runs in angular frequency (rad/ps) with times in
//! picoseconds and rates in ps⁻¹. The single conversion constant is
//! 2πc = 0.188365… rad/ps per cm⁻¹.

/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.029_979_245_8;

/// Angular frequency (rad/ps) of 1 cm⁻¹: 2π · c[cm/ps].
pub const CM1_TO_RAD_PER_PS: f64 = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_PER_PS;

/// Convert an energy in cm⁻¹ to angular frequency in rad/ps.
#[inline]
pub fn cm1_to_angular(energy_cm1: f64) -> f64 {
    energy_cm1 * CM1_TO_RAD_PER_PS
}

/// Convert an angular frequency in rad/ps back to cm⁻¹.
#[inline]
pub fn angular_to_cm1(omega: f64) -> f64 {
    omega / CM1_TO_RAD_PER_PS
}
