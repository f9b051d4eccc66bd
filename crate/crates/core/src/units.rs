//! Physical constants (CODATA 2018, SI).

pub const G: f64 = 6.674_30e-11;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
/// Mean molecular mass of dry air, 28.97 u.
pub const M_AIR: f64 = 28.97 * 1.660_539_066_60e-27;
