//! Error types shared across the crate.

use thiserror::Error;

/// Top-level error for library operations.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid model parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("coordinate index {index} out of range (dim_nuc = {dim_nuc})")]
    CoordinateIndex { index: usize, dim_nuc: usize },

    #[error(
        "degenerate electronic levels at {point:?}: gap {gap:.3e} <= tolerance {tolerance:.3e}"
    )]
    Degeneracy {
        point: Vec<f64>,
        gap: f64,
        tolerance: f64,
    },

    #[error("parallel transport broke down at {point:?}: neighbor overlap {overlap:.3e} ~ 0")]
    TransportBreakdown { point: Vec<f64>, overlap: f64 },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid broadening scheme: {0}")]
    Broadening(String),

    #[error("kernel requires a single-particle (independent-band) model, got `{label}`")]
    NotSingleParticle { label: String },

    #[error(
        "boundary density {density:.3e} exceeds edge-leak threshold {threshold:.3e} at t = {time}"
    )]
    EdgeLeak {
        density: f64,
        threshold: f64,
        time: f64,
    },

    #[error("wavefunction support is empty (floor {floor:.3e})")]
    EmptySupport { floor: f64 },

    #[error("propagation setup: {0}")]
    Propagation(String),

    #[error("manifest parse error: {0}")]
    ManifestParse(String),

    #[error("manifest validation failed:\n{}", .0.join("\n"))]
    ManifestInvalid(Vec<String>),

    #[error("series file: {0}")]
    Series(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Non-fatal diagnostics attached to results instead of failing the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Broadening η below 3× the local level spacing near the probed shell.
    Gap { eta: f64, spacing: f64 },
    /// Memory kernel not decayed within the stored history window.
    HistoryTooShort { tail_fraction: f64 },
    /// Support mask grew past the stated density budget.
    Node { masked_density: f64 },
    /// Phase unwrapping crossed a near-node region.
    PhaseUnwrap { point: f64 },
    /// Averaged-force theorem checked with part of the density masked.
    MaskedDensity { masked_density: f64 },
    /// Further warnings of the same kind were dropped.
    Truncated { dropped: usize },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::Gap { eta, spacing } => write!(
                f,
                "broadening eta {eta:.3e} < 3 x local level spacing {spacing:.3e}"
            ),
            Warning::HistoryTooShort { tail_fraction } => write!(
                f,
                "memory kernel tail still {:.1}% of its peak at the history edge",
                tail_fraction * 100.0
            ),
            Warning::Node { masked_density } => {
                write!(
                    f,
                    "support mask grew to {masked_density:.3e} of the density"
                )
            }
            Warning::PhaseUnwrap { point } => {
                write!(f, "phase unwrapping crossed a near-node at x = {point}")
            }
            Warning::MaskedDensity { masked_density } => {
                write!(
                    f,
                    "averaged-force check with {masked_density:.3e} density masked"
                )
            }
            Warning::Truncated { dropped } => {
                write!(f, "{dropped} further warnings dropped")
            }
        }
    }
}
