//! Numerical toolkit for the inverse boundary-value problem of the magnetic
//! Schrödinger operator `-Δ_A + q` on a truncated cylindrical waveguide
//! `ω × [-L, L]`.
//!
//! The crate covers the full experimental chain at desk scale:
//!
//! * geometry of the cross-section, collar regions and the truncated cylinder
//!   ([`geometry`]),
//! * closed-form electromagnetic potentials with exact derivatives, Fourier
//!   transforms and decay envelopes ([`potentials`], [`expr`]),
//! * a gauge-covariant finite-difference forward solver and discrete
//!   Dirichlet-to-Neumann maps with fractional-order surrogate trace norms
//!   ([`solver`], [`forward_dn`]),
//! * complex geometric optics solutions: direction frames, singular-integral
//!   phases, amplitudes and numerically solved remainders ([`cgo`]),
//! * Fourier-domain reconstruction of the magnetic field `dA`, the potential
//!   `A` under a divergence condition, and the electric potential `q`, from
//!   full or partial boundary data ([`reconstruct`]),
//! * noise sweeps and stability-curve fits ([`experiments`]), and
//! * numerical verification of the weight-function, Carleman-estimate and
//!   interpolation inequalities the analysis relies on ([`checks`]).
//!
//! Data-parallel inner loops (DN columns, frequency samples, sweep rows,
//! corpus members) run on rayon when the default `parallel` feature is on;
//! disabling it yields a fully sequential build with identical results.

pub mod cgo;
pub mod checks;
pub mod experiments;
pub mod expr;
pub mod forward_dn;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod par;
pub mod potentials;
pub mod presets;
pub mod reconstruct;
pub mod solver;

use thiserror::Error;

/// Crate-wide error type. Variants map onto the CLI exit codes:
/// config errors exit 2, numerical failures exit 3, verification FAILs exit 4.
#[derive(Debug, Error)]
pub enum CylError {
    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("potential error: {0}")]
    Potential(String),

    #[error("eigenvalue proximity: smallest pivot {smallest:.3e} below {threshold:.3e} x largest {largest:.3e}")]
    EigenvalueProximity {
        smallest: f64,
        largest: f64,
        threshold: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("verification FAIL: {0}")]
    Verification(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CylError>;

impl CylError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CylError::Config { .. } => 2,
            CylError::Verification(_) => 4,
            _ => 3,
        }
    }

    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CylError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
