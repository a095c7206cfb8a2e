//! The single tolerance record used across the crate.
//!
//! Every validation threshold and inequality slack lives here so that
//! property tests and the CLI have one knob to turn instead of a scatter of
//! magic numbers.

use serde::{Deserialize, Serialize};

/// Numerical tolerances; [`Tolerances::default`] is used everywhere unless a
/// caller threads an explicit record through.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Hermiticity / unitarity / trace-preservation residual (max-abs entry).
    pub herm: f64,
    /// Trace-one check for density matrices.
    pub trace: f64,
    /// Norm-one check for pure-state amplitudes.
    pub norm: f64,
    /// Eigenvalues below this floor are an error; negatives above it are
    /// treated as rounding noise and clipped to zero for entropy and square
    /// roots.
    pub eig_floor: f64,
    /// Schmidt coefficients below this cutoff do not count towards the rank.
    pub schmidt_cutoff: f64,
    /// Kraus operators with norm below this are dropped after construction.
    pub kraus_drop: f64,
    /// Additive slack when checking analytic inequalities numerically.
    pub slack: f64,
    /// Knill-Laflamme residual below which a subspace counts as certified.
    pub cert_residual: f64,
    /// Round-trip error allowed when verifying a recovery channel.
    pub recovery: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            herm: 1e-10,
            trace: 1e-10,
            norm: 1e-10,
            eig_floor: -1e-8,
            schmidt_cutoff: 1e-12,
            kraus_drop: 1e-12,
            slack: 1e-9,
            cert_residual: 1e-8,
            recovery: 1e-7,
        }
    }
}

impl Tolerances {
    /// Record with the validation thresholds (`herm`, `trace`, `norm`)
    /// replaced by `base`. This is what the `ECHAIN_TOL` environment
    /// variable maps to in the CLI.
    pub fn with_base(base: f64) -> Self {
        Tolerances {
            herm: base,
            trace: base,
            norm: base,
            ..Tolerances::default()
        }
    }
}

/// The default record as a static, for call sites that only borrow.
pub static DEFAULT: Tolerances = Tolerances {
    herm: 1e-10,
    trace: 1e-10,
    norm: 1e-10,
    eig_floor: -1e-8,
    schmidt_cutoff: 1e-12,
    kraus_drop: 1e-12,
    slack: 1e-9,
    cert_residual: 1e-8,
    recovery: 1e-7,
};
