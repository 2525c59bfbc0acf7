//! Unit conventions and the angular-frequency conversion choke point.
//!
//! All user-facing energies and frequencies in this crate are *linear*
//! frequencies in GHz (that is, E/h), fluxes are in units of the flux
//! quantum, and times are in ns unless a function documents otherwise
//! (the noise module works in SI seconds and rad/s). Every factor of 2*pi
//! that converts between linear and angular frequency goes through the
//! helpers below, so unit bugs have exactly one place to hide.

/// 2*pi.
pub const TAU: f64 = std::f64::consts::TAU;

/// Angular frequency in rad/ns from a linear frequency in GHz.
#[inline]
pub fn rad_per_ns(f_ghz: f64) -> f64 {
    TAU * f_ghz
}

/// Angular frequency in rad/s from a linear frequency in Hz.
#[inline]
pub fn rad_per_s(f_hz: f64) -> f64 {
    TAU * f_hz
}

/// Dispersion slope in rad/s per flux quantum from GHz per flux quantum.
#[inline]
pub fn slope_rad_per_s(ghz_per_phi0: f64) -> f64 {
    TAU * 1.0e9 * ghz_per_phi0
}

/// Phase in rad accumulated by a linear frequency in GHz over a time in ns.
#[inline]
pub fn phase_rad(f_ghz: f64, t_ns: f64) -> f64 {
    TAU * f_ghz * t_ns
}

/// Wrap a phase into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % TAU;
    if p > std::f64::consts::PI {
        p -= TAU;
    } else if p <= -std::f64::consts::PI {
        p += TAU;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_covers_branch_cuts() {
        assert_eq!(wrap_phase(std::f64::consts::PI), std::f64::consts::PI);
        assert!((wrap_phase(std::f64::consts::PI + 0.01) + std::f64::consts::PI - 0.01).abs() < 1e-12);
        assert!((wrap_phase(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_phase(8.0 * std::f64::consts::PI + 0.08) - 0.08).abs() < 1e-12);
    }

    #[test]
    fn conversions() {
        assert!((rad_per_ns(1.0) - TAU).abs() < 1e-15);
        assert!((slope_rad_per_s(1.0) - TAU * 1e9).abs() < 1e-6);
        assert!((phase_rad(0.5, 2.0) - TAU).abs() < 1e-15);
    }
}
