use thiserror::Error;

/// Errors surfaced by the simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs outside the physical or numerical domain of an operation.
    #[error("parameter domain error: {0}")]
    ParameterDomain(String),

    /// An iterative numerical routine failed to converge or produced an
    /// inconsistent result.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Dressed-state labeling is ambiguous: the maximum overlap between a
    /// dressed eigenstate and the bare product basis fell below the
    /// threshold. The requested fluxes are inside a resonance region and
    /// adiabatic labels are meaningless there; move the operating point away
    /// from the avoided crossing.
    #[error(
        "ambiguous dressed-state labeling at flux (phi_a={flux_a}, phi_b={flux_b}): \
         max overlap {max_overlap:.3} < {threshold}; avoid the resonance region"
    )]
    LabeledState {
        flux_a: f64,
        flux_b: f64,
        max_overlap: f64,
        threshold: f64,
    },

    /// The conditional phase never brackets the target within the allowed
    /// companion-amplitude range.
    #[error(
        "CZ calibration infeasible: phi spans [{phi_min:.4}, {phi_max:.4}] rad over the \
         companion-amplitude range, target {target:.4} rad not bracketed"
    )]
    CalibrationInfeasible {
        phi_min: f64,
        phi_max: f64,
        target: f64,
    },

    /// A sample or query fell outside the valid range of its argument.
    #[error("out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
