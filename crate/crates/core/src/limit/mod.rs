//! Minimization of the linear and limit functionals, the closed-form cylinder
//! solutions and the gap reports built on them.

mod explicit;
mod reduced;
mod report;

pub use explicit::{
    biharmonic_residual, eta_star, explicit_residuals, ode_residual, psi_potential, ExplicitField, ExplicitResiduals,
    ExplicitSolution, RadialIntegrals, PROFILE_TOL,
};
pub use reduced::{
    axis_rotation, kernel_max_work, limit_energy, reduced_form, require_compatible, LimitMinimum, LimitOptions,
    LimitProblem,
};
pub use report::{
    closed_form, gap_report, min_limit, min_linear, nonuniqueness_check, rotated_no_gap_check, ClosedFormGap,
    DecompositionRow, GalerkinGap, GapReport, IncompressibleBounds, IncompressibleGap, LinearMinimum,
    NonuniquenessCheck, PenalizedValue, RotatedCheck, RotatedComparison, DECOMPOSITION_ANGLES,
};
