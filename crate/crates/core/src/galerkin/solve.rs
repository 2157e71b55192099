use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::assemble::StiffnessSystem;
use crate::error::{Error, Result};
use crate::math3::Mat3;

pub const CG_TOL: f64 = 1e-12;
/// Allowed component of the load vector along a rigid mode.
pub const RIGID_LOAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Descent stopped because an alternation round no longer decreased the energy.
    Stationary,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub coefficients: Vec<f64>,
    /// Minimum value `∫Q(𝔼u) − L(Ru)` (plus penalty where applicable).
    pub value: f64,
    pub rotation: Mat3,
    /// Angle along the kernel axis, when the kernel is one-parameter.
    pub theta: Option<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

/// Minimizes `½cᵀAc − cᵀb(R)` over the complement of the rigid modes.
pub fn solve_quadratic(sys: &StiffnessSystem, r: &Mat3) -> Result<SolveResult> {
    let b = sys.load_vector(r);
    check_rigid_orthogonality(sys, &b)?;
    let (c, residual_norm, iterations) = projected_cg(sys, &b, None)?;
    Ok(SolveResult {
        value: sys.energy(&c, &b),
        coefficients: c.iter().copied().collect(),
        rotation: *r,
        theta: None,
        residual_norm,
        iterations,
        status: SolveStatus::Converged,
    })
}

/// Same as [`solve_quadratic`] with an explicit right-hand side and initial guess.
pub fn solve_with_guess(sys: &StiffnessSystem, b: &DVector<f64>, guess: &DVector<f64>) -> Result<SolveResult> {
    check_rigid_orthogonality(sys, b)?;
    let (c, residual_norm, iterations) = projected_cg(sys, b, Some(guess))?;
    Ok(SolveResult {
        value: sys.energy(&c, b),
        coefficients: c.iter().copied().collect(),
        rotation: Mat3::identity(),
        theta: None,
        residual_norm,
        iterations,
        status: SolveStatus::Converged,
    })
}

pub fn check_rigid_orthogonality(sys: &StiffnessSystem, b: &DVector<f64>) -> Result<()> {
    let scale = b.norm().max(1.0);
    for (m, label) in sys.rigid_modes.iter().zip(&sys.rigid_labels) {
        let p = m.dot(b);
        if p.abs() > RIGID_LOAD_TOL * scale {
            let condition = if label.starts_with("translation") {
                "null resultant"
            } else {
                "null momentum L(Wx) = 0"
            };
            return Err(Error::Incompatible(format!(
                "load vector has component {p:.3e} along rigid mode {label}; {condition} is violated"
            )));
        }
    }
    Ok(())
}

/// Jacobi-preconditioned CG on the rigid-mode complement; returns
/// `(solution, true projected residual, iterations)`.
pub(crate) fn projected_cg(
    sys: &StiffnessSystem,
    b: &DVector<f64>,
    guess: Option<&DVector<f64>>,
) -> Result<(DVector<f64>, f64, usize)> {
    let a = sys.matrix();
    let n = sys.dim();
    let mut rhs = b.clone();
    sys.project(&mut rhs);
    let bnorm = rhs.norm();
    let mut x = guess.cloned().unwrap_or_else(|| DVector::zeros(n));
    sys.project(&mut x);
    if bnorm == 0.0 {
        return Ok((DVector::zeros(n), 0.0, 0));
    }
    let diag: DVector<f64> = a.diagonal().map(|d| if d > 0.0 { 1.0 / d } else { 1.0 });
    let max_iter = 10 * n.max(1);
    let mut history = Vec::new();
    let mut total = 0;

    for _attempt in 0..2 {
        let mut r = &rhs - &a * &x;
        sys.project(&mut r);
        let mut z = r.component_mul(&diag);
        sys.project(&mut z);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        let mut best = r.norm();
        let mut since_best = 0;
        for _ in 0..max_iter {
            let rn = r.norm();
            history.push(rn);
            if rn <= CG_TOL * bnorm {
                let mut res = &rhs - &a * &x;
                sys.project(&mut res);
                return Ok((x, res.norm(), total));
            }
            if rn < best * 0.999 {
                best = rn;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > n.max(50) {
                    break;
                }
            }
            let ap = &a * &p;
            let pap = p.dot(&ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            x.axpy(alpha, &p, 1.0);
            r.axpy(-alpha, &ap, 1.0);
            sys.project(&mut r);
            z = r.component_mul(&diag);
            sys.project(&mut z);
            let rz_new = r.dot(&z);
            let beta = rz_new / rz;
            rz = rz_new;
            p *= beta;
            p += &z;
            total += 1;
        }
        sys.project(&mut x);
    }
    Err(Error::NotConverged { residuals: history })
}

/// Cholesky factorization of `A + κD + s Σ m mᵀ`, which is definite when the
/// rigid modes span the kernel; solutions of rigid-orthogonal right-hand sides
/// are themselves rigid-orthogonal.
pub struct DirectSolver {
    factor: Cholesky<f64, Dyn>,
}

impl DirectSolver {
    pub fn new(sys: &StiffnessSystem) -> Result<Self> {
        let mut a = sys.matrix();
        let scale = a.diagonal().amax().max(f64::MIN_POSITIVE);
        for m in &sys.rigid_modes {
            a.ger(scale, m, m, 1.0);
        }
        let factor = Cholesky::new(a)
            .ok_or_else(|| Error::Assembly("stiffness is not definite on the rigid complement".into()))?;
        Ok(Self { factor })
    }

    /// Minimizer of `½cᵀAc − cᵀPb` with `P` the rigid-complement projector.
    pub fn solve(&self, sys: &StiffnessSystem, b: &DVector<f64>) -> DVector<f64> {
        let mut rhs = b.clone();
        sys.project(&mut rhs);
        let mut c = self.factor.solve(&rhs);
        sys.project(&mut c);
        c
    }
}

/// `‖P(Ac − b)‖`.
pub fn projected_residual(sys: &StiffnessSystem, c: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let mut r = sys.matrix() * c - b;
    sys.project(&mut r);
    r.norm()
}
