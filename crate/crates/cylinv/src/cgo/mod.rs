//! Complex geometric optics solutions: direction frames, singular-integral
//! phases, amplitudes, principal parts and numerically solved remainders.

pub mod frame;
pub mod phase;
pub mod solution;

pub use frame::{frame_for_xi, make_frame, CgoFrame};
pub use phase::{phase_bounds, CauchyPhase, PhaseBoundsReport, PhaseSource};
pub use solution::{
    cgo_norm_report, psi_cutoff, solve_remainder, transport_residual, CgoNormReport, CgoSolution,
    PrincipalPart, RemainderNormReport,
};
