//! Physical constants shared by the model and the test cases.

/// Mean earth radius in metres.
pub const EARTH_RADIUS: f64 = 6.371_22e6;

/// Earth's angular frequency in s⁻¹.
pub const EARTH_OMEGA: f64 = 7.292e-5;

/// Gravitational acceleration in m/s².
pub const GRAVITY: f64 = 9.806_16;

/// Seconds per day.
pub const DAY: f64 = 86_400.0;
