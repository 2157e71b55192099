//! Finite-dimensional displacement spaces, quadratic energy assembly and the
//! rigid-mode-deflated conjugate gradient solver.

mod assemble;
mod solve;
mod space;

pub use assemble::{assemble, AssembleOptions, StiffnessSystem, KERNEL_EIG_TOL};
pub use solve::{
    check_rigid_orthogonality, projected_residual, solve_quadratic, solve_with_guess, DirectSolver, SolveResult, SolveStatus,
    CG_TOL,
};
pub use space::{effective_order, BasisTable, GalerkinSpace, RigidMode, SpaceField, SpaceKind, GRAM_CUTOFF};
