//! The scaled nonlinear energy
//!
//! ```text
//! 𝒢_h(y) = h⁻² ∫ W(I + h∇u) − L(Ru) − h⁻¹ L((R − I)x),      y = R(x + hu)
//! ```
//!
//! with an optional incompressibility penalty `h⁻² κ ∫ (det(I + h∇u) − 1)²`,
//! its alternating minimization and the `h → 0` study.
//!
//! Displacements live in a Galerkin space enriched by a few given fields
//! (the limit minimizers when they are known in closed form), so the warm
//! start of the study is represented exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::{integrate_scalar, QuadratureRule};
use crate::energy::density;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::galerkin::{GalerkinSpace, SolveResult, SolveStatus, SpaceKind};
use crate::limit::{kernel_max_work, ExplicitSolution, LimitOptions, LimitProblem};
use crate::loads::{compatibility_report, KernelClass, KernelOptions, LoadEvaluator, LoadSpec};
use crate::math3::{ddot, exp_so3, g_p_derivative, g_p_unchecked, nearest_rotation, sym, AxisAngle, Mat3, Vec3};

/// Values below this are reported as divergence.
pub const DIVERGENCE_THRESHOLD: f64 = -1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearOptions {
    /// Degree of the full polynomial correction space.
    pub degree: usize,
    pub quadrature_order: usize,
    /// `κ` of the incompressibility penalty.
    pub penalty: Option<f64>,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// Alternation stops when a round decreases the energy by less than this.
    pub joint_tol: f64,
    pub max_rounds: usize,
    pub kernel: KernelOptions,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self {
            degree: 4,
            quadrature_order: 12,
            penalty: None,
            max_iterations: 5000,
            gradient_tol: 1e-8,
            armijo: 1e-4,
            shrink: 0.5,
            joint_tol: 1e-10,
            max_rounds: 200,
            kernel: KernelOptions::default(),
        }
    }
}

/// `y(x) = R(x + h u(x))` with `u` given by coefficients in a [`NonlinearModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationAnsatz {
    pub rotation: AxisAngle,
    pub coeffs: Vec<f64>,
    pub h: f64,
}

impl DeformationAnsatz {
    pub fn new(rotation: &Mat3, coeffs: Vec<f64>, h: f64) -> Result<Self> {
        check_h(h)?;
        Ok(Self { rotation: AxisAngle::from_matrix(rotation), coeffs, h })
    }
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("h must lie in (0, 1), got {h}")))
    }
}

/// Basis gradients, load blocks and the preconditioner on a fixed quadrature rule.
pub struct NonlinearModel {
    kernel: KernelClass,
    moment: Mat3,
    rule: QuadratureRule,
    /// Column `i` stacks the 9 entries (column-major) of `∇bᵢ` at every node.
    grads: DMatrix<f64>,
    /// `Bᵢ = ∫ f ⊗ bᵢ (+ ∫ g ⊗ bᵢ)`, so `L(R bᵢ) = R : Bᵢ`.
    work_blocks: Vec<Mat3>,
    /// Pseudo-inverse of `A (+ 2κD) + εM`.
    precond: DMatrix<f64>,
    /// Rows `∫ bᵢ` and `∫ skew ∇bᵢ`; the u-step keeps these moments fixed so that
    /// rigid motions of `y` are carried by `R` alone.
    gauge: DMatrix<f64>,
    /// `P⁻¹Gᵀ (G P⁻¹ Gᵀ)⁺` for the gauge rows `G`.
    gauge_correction: DMatrix<f64>,
    /// Euclidean projector onto the gauge rows.
    gauge_projector: DMatrix<f64>,
    enrichment: usize,
    space: GalerkinSpace,
}

impl NonlinearModel {
    /// The basis is `enrichment` followed by the orthonormal basis of `Full{degree}`.
    pub fn new(spec: &LoadSpec, options: &NonlinearOptions, enrichment: &[&dyn VectorField]) -> Result<Self> {
        let kernel = compatibility_report(spec, &options.kernel)?.classification;
        let loads = LoadEvaluator::new(spec, options.quadrature_order)?;
        let rule = loads.volume_rule().clone();
        let space = GalerkinSpace::build(SpaceKind::Full { degree: options.degree }, spec.domain, options.quadrature_order)?;
        let table = space.tabulate(&rule.nodes);
        let ne = enrichment.len();
        let n = ne + space.dim();
        let nodes = rule.len();

        let mut grads = DMatrix::<f64>::zeros(9 * nodes, n);
        let mut values = DMatrix::<f64>::zeros(3 * nodes, n);
        for (q, x) in rule.nodes.iter().enumerate() {
            for (i, e) in enrichment.iter().enumerate() {
                let (v, g) = (e.value(x), e.gradient(x));
                check_finite(&v, x)?;
                check_finite(&g, x)?;
                values.view_mut((3 * q, i), (3, 1)).copy_from(&v);
                for (k, gk) in g.iter().enumerate() {
                    grads[(9 * q + k, i)] = *gk;
                }
            }
            for b in 0..space.dim() {
                let v = table.values[q * space.dim() + b];
                values.view_mut((3 * q, ne + b), (3, 1)).copy_from(&v);
                for (k, gk) in table.grads[q * space.dim() + b].iter().enumerate() {
                    grads[(9 * q + k, ne + b)] = *gk;
                }
            }
        }

        let mut work_blocks = vec![Mat3::zeros(); n];
        for (q, wf) in loads.weighted_forces().iter().enumerate() {
            for (i, block) in work_blocks.iter_mut().enumerate() {
                let v = Vec3::new(values[(3 * q, i)], values[(3 * q + 1, i)], values[(3 * q + 2, i)]);
                *block += wf * v.transpose();
            }
        }
        if !loads.surface_nodes().is_empty() {
            let st = space.tabulate(loads.surface_nodes());
            for (q, (x, wg)) in loads.surface_nodes().iter().zip(loads.weighted_tractions()).enumerate() {
                for (i, e) in enrichment.iter().enumerate() {
                    work_blocks[i] += wg * e.value(x).transpose();
                }
                for b in 0..space.dim() {
                    work_blocks[ne + b] += wg * st.values[q * space.dim() + b].transpose();
                }
            }
        }

        // quadratic part of the energy at h → 0, plus a small mass term for the rigid directions
        let s2 = std::f64::consts::SQRT_2;
        let mut strain = DMatrix::<f64>::zeros(6 * nodes, n);
        let mut div = DMatrix::<f64>::zeros(nodes, n);
        let mut mass_rows = DMatrix::<f64>::zeros(3 * nodes, n);
        for q in 0..nodes {
            let sw = rule.weights[q].sqrt();
            for i in 0..n {
                let g = |r: usize, c: usize| grads[(9 * q + r + 3 * c, i)];
                strain[(6 * q, i)] = sw * g(0, 0);
                strain[(6 * q + 1, i)] = sw * g(1, 1);
                strain[(6 * q + 2, i)] = sw * g(2, 2);
                strain[(6 * q + 3, i)] = sw * 0.5 * s2 * (g(0, 1) + g(1, 0));
                strain[(6 * q + 4, i)] = sw * 0.5 * s2 * (g(0, 2) + g(2, 0));
                strain[(6 * q + 5, i)] = sw * 0.5 * s2 * (g(1, 2) + g(2, 1));
                div[(q, i)] = sw * (g(0, 0) + g(1, 1) + g(2, 2));
                for c in 0..3 {
                    mass_rows[(3 * q + c, i)] = sw * values[(3 * q + c, i)];
                }
            }
        }
        let mut hess = strain.transpose() * &strain * 8.0;
        if let Some(kappa) = options.penalty {
            hess += div.transpose() * &div * (2.0 * kappa);
        }
        let mass = mass_rows.transpose() * &mass_rows;
        let eps = 1e-2 * hess.diagonal().mean();
        let precond = pseudo_inverse(hess + mass * eps);

        let mut gauge = DMatrix::<f64>::zeros(6, n);
        for (q, w) in rule.weights.iter().enumerate() {
            for i in 0..n {
                let g = |r: usize, c: usize| grads[(9 * q + r + 3 * c, i)];
                for c in 0..3 {
                    gauge[(c, i)] += w * values[(3 * q + c, i)];
                }
                gauge[(3, i)] += w * 0.5 * (g(0, 1) - g(1, 0));
                gauge[(4, i)] += w * 0.5 * (g(0, 2) - g(2, 0));
                gauge[(5, i)] += w * 0.5 * (g(1, 2) - g(2, 1));
            }
        }
        let y = &precond * gauge.transpose();
        let gauge_correction = &y * pseudo_inverse(&gauge * &y);
        let gauge_projector = gauge.transpose() * pseudo_inverse(&gauge * gauge.transpose()) * &gauge;

        Ok(Self {
            kernel,
            moment: loads.moment_matrix(),
            rule,
            grads,
            work_blocks,
            precond,
            gauge,
            gauge_correction,
            gauge_projector,
            enrichment: ne,
            space,
        })
    }

    pub fn dim(&self) -> usize {
        self.work_blocks.len()
    }

    pub fn enrichment_len(&self) -> usize {
        self.enrichment
    }

    pub fn kernel(&self) -> &KernelClass {
        &self.kernel
    }

    pub fn space(&self) -> &GalerkinSpace {
        &self.space
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `M_u = Σ cᵢ Bᵢ`.
    fn work_matrix(&self, c: &[f64]) -> Mat3 {
        self.work_blocks.iter().zip(c).fold(Mat3::zeros(), |acc, (b, ci)| acc + b * *ci)
    }

    fn node_gradient(flat: &DVector<f64>, q: usize) -> Mat3 {
        Mat3::from_column_slice(&flat.as_slice()[9 * q..9 * q + 9])
    }

    /// Stored-energy part `Σ w [h⁻²W(I + hG) + h⁻²κ(det − 1)²]` from the stacked gradients.
    fn stored(&self, flat: &DVector<f64>, h: f64, kappa: f64) -> f64 {
        let mut total = 0.0;
        for (q, w) in self.rule.weights.iter().enumerate() {
            let g = Self::node_gradient(flat, q);
            let c = g + g.transpose() + g.transpose() * g * h;
            let mut e = c.norm_squared();
            if kappa > 0.0 {
                let d = det_defect(&g, h);
                e += kappa * d * d;
            }
            total += w * e;
        }
        total
    }

    /// `∂/∂G` of the stored-energy density times the weight, stacked like `flat`.
    fn stored_gradient(&self, flat: &DVector<f64>, h: f64, kappa: f64) -> DVector<f64> {
        let mut out = DVector::zeros(flat.len());
        for (q, w) in self.rule.weights.iter().enumerate() {
            let g = Self::node_gradient(flat, q);
            let f = Mat3::identity() + g * h;
            let mut p = f * (g + g.transpose() + g.transpose() * g * h) * 4.0;
            if kappa > 0.0 {
                p += cofactor(&f) * (2.0 * kappa * det_defect(&g, h));
            }
            out.as_mut_slice()[9 * q..9 * q + 9].copy_from_slice((p * *w).as_slice());
        }
        out
    }

    fn value_parts(&self, c: &[f64], flat: &DVector<f64>, r: &Mat3, h: f64, kappa: f64) -> f64 {
        self.stored(flat, h, kappa) - ddot(r, &self.work_matrix(c)) - ddot(&(r - Mat3::identity()), &self.moment) / h
    }

    /// `𝒢_h` of an ansatz, penalty included when `penalty` is set.
    pub fn eval(&self, ansatz: &DeformationAnsatz, penalty: Option<f64>) -> Result<f64> {
        check_h(ansatz.h)?;
        self.check_len(&ansatz.coeffs)?;
        let flat = &self.grads * DVector::from_column_slice(&ansatz.coeffs);
        let v = self.value_parts(&ansatz.coeffs, &flat, &ansatz.rotation.to_matrix(), ansatz.h, penalty.unwrap_or(0.0));
        if !v.is_finite() {
            return Err(Error::NonFinite { value: v, node: [f64::NAN; 3] });
        }
        Ok(v)
    }

    /// Gradient of `𝒢_h` in the coefficients at a fixed rotation.
    pub fn gradient(&self, ansatz: &DeformationAnsatz, penalty: Option<f64>) -> Result<DVector<f64>> {
        check_h(ansatz.h)?;
        self.check_len(&ansatz.coeffs)?;
        let flat = &self.grads * DVector::from_column_slice(&ansatz.coeffs);
        Ok(self.coefficient_gradient(&flat, &ansatz.rotation.to_matrix(), ansatz.h, penalty.unwrap_or(0.0)))
    }

    fn coefficient_gradient(&self, flat: &DVector<f64>, r: &Mat3, h: f64, kappa: f64) -> DVector<f64> {
        // ∂/∂cᵢ h⁻² W(I + h∇u) = h⁻¹ DW(F) : ∇bᵢ, and DW(F) = 4F(FᵀF − I) = 4hF(G + Gᵀ + hGᵀG)
        let p = self.stored_gradient(flat, h, kappa);
        let mut g = self.grads.tr_mul(&p);
        for (gi, b) in g.iter_mut().zip(&self.work_blocks) {
            *gi -= ddot(r, b);
        }
        g
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.dim() {
            return Err(Error::invalid(format!("expected {} coefficients, got {}", self.dim(), c.len())));
        }
        Ok(())
    }

    /// Distance from `R` to the rotation kernel, `min_S |R − S|`.
    pub fn rotation_distance(&self, r: &Mat3) -> Result<f64> {
        let (best, _) = kernel_max_work(&self.kernel, r)?;
        Ok((6.0 - 2.0 * best).max(0.0).sqrt())
    }

    /// `‖sym(h⁻¹(R − I) + R∇u)‖_{L²}`, the strain of `v = h⁻¹(y − x)`.
    pub fn rescaled_strain(&self, ansatz: &DeformationAnsatz) -> Result<f64> {
        self.check_len(&ansatz.coeffs)?;
        let flat = &self.grads * DVector::from_column_slice(&ansatz.coeffs);
        let r = ansatz.rotation.to_matrix();
        let base = (r - Mat3::identity()) / ansatz.h;
        let total: f64 = self
            .rule
            .weights
            .iter()
            .enumerate()
            .map(|(q, w)| w * sym(&(base + r * Self::node_gradient(&flat, q))).norm_squared())
            .sum();
        Ok(total.sqrt())
    }

    /// Preconditioned Armijo descent in the coefficients at fixed `R`.
    fn descend(
        &self,
        c: &mut DVector<f64>,
        r: &Mat3,
        h: f64,
        kappa: f64,
        options: &NonlinearOptions,
        iterations: &mut usize,
    ) -> Result<(f64, f64)> {
        let mut flat = &self.grads * &*c;
        let mut value = self.value_parts(c.as_slice(), &flat, r, h, kappa);
        let mut gnorm = f64::INFINITY;
        while *iterations < options.max_iterations {
            let g = self.coefficient_gradient(&flat, r, h, kappa);
            gnorm = (&g - &self.gauge_projector * &g).norm();
            if gnorm < options.gradient_tol {
                break;
            }
            let mut d = -(&self.precond * &g);
            d -= &self.gauge_correction * (&self.gauge * &d);
            let slope = g.dot(&d);
            if !(slope < 0.0) {
                break;
            }
            let gd = &self.grads * &d;
            let mut t = 1.0;
            let accepted = loop {
                let trial_c = &*c + &d * t;
                let trial_flat = &flat + &gd * t;
                let trial = self.value_parts(trial_c.as_slice(), &trial_flat, r, h, kappa);
                if trial <= value + options.armijo * t * slope {
                    *c = trial_c;
                    flat = trial_flat;
                    break Some(trial);
                }
                t *= options.shrink;
                if t < 1e-12 {
                    break None;
                }
            };
            *iterations += 1;
            match accepted {
                Some(v) => {
                    if v < DIVERGENCE_THRESHOLD {
                        return Err(Error::Divergent {
                            value: v,
                            reason: "the loads do positive work on a rigid rotation".into(),
                        });
                    }
                    let decrease = value - v;
                    value = v;
                    if decrease <= 1e-16 * value.abs().max(1e-300) {
                        break;
                    }
                }
                None => break,
            }
        }
        Ok((value, gnorm))
    }

    /// Optimal rotation for fixed `u`: `𝒢_h` is affine in `R`, so this is a Procrustes problem.
    fn best_rotation(&self, c: &[f64], h: f64) -> Mat3 {
        nearest_rotation(&(self.work_matrix(c) + self.moment / h)).0
    }

    /// Alternating minimization from `init`.
    pub fn minimize(&self, init: &DeformationAnsatz, options: &NonlinearOptions) -> Result<NonlinearSolve> {
        check_h(init.h)?;
        self.check_len(&init.coeffs)?;
        if self.kernel == KernelClass::Incompatible {
            return Err(Error::Incompatible(
                "compatibility violated: some rotation does positive work, so 𝒢_h is unbounded below as h → 0".into(),
            ));
        }
        let h = init.h;
        let kappa = options.penalty.unwrap_or(0.0);
        let mut c = DVector::from_column_slice(&init.coeffs);
        let mut r = init.rotation.to_matrix();
        let mut iterations = 0;
        let mut history = vec![self.value_parts(c.as_slice(), &(&self.grads * &c), &r, h, kappa)];
        let mut status = SolveStatus::MaxIterations;
        for _ in 0..options.max_rounds {
            let before = *history.last().expect("nonempty");
            self.descend(&mut c, &r, h, kappa, options, &mut iterations)?;
            r = self.best_rotation(c.as_slice(), h);
            let after = self.value_parts(c.as_slice(), &(&self.grads * &c), &r, h, kappa);
            history.push(after);
            if after > before {
                status = SolveStatus::Stationary;
                break;
            }
            if before - after < options.joint_tol {
                status = SolveStatus::Converged;
                break;
            }
            if iterations >= options.max_iterations {
                break;
            }
        }
        let final_grad = self.coefficient_gradient(&(&self.grads * &c), &r, h, kappa).norm();
        let ansatz = DeformationAnsatz { rotation: AxisAngle::from_matrix(&r), coeffs: c.iter().copied().collect(), h };
        let theta = match self.kernel {
            KernelClass::AxisSubgroup { axis } => Some(log_about(&r, &axis)),
            _ => None,
        };
        Ok(NonlinearSolve {
            result: SolveResult {
                coefficients: ansatz.coeffs.clone(),
                value: *history.last().expect("nonempty"),
                rotation: r,
                theta,
                residual_norm: final_grad,
                iterations,
                status,
            },
            rotation_distance: self.rotation_distance(&r)?,
            rescaled_strain: self.rescaled_strain(&ansatz)?,
            history,
            ansatz,
        })
    }
}

/// Angle of the component of `R` about `axis`.
fn log_about(r: &Mat3, axis: &Vec3) -> f64 {
    let w = crate::math3::SkewParams::from_axis(axis).matrix();
    let p = ddot(&w, r);
    let q = ddot(&(w * w), r);
    // R_θ : R = tr R + sinθ p + (1 − cosθ) q is maximal at (sinθ, cosθ) ∝ (p, −q)
    p.atan2(-q)
}

fn check_finite<const R: usize, const C: usize>(
    m: &nalgebra::SMatrix<f64, R, C>,
    x: &Vec3,
) -> Result<()> {
    match m.iter().find(|v| !v.is_finite()) {
        Some(&value) => Err(Error::NonFinite { value, node: [x.x, x.y, x.z] }),
        None => Ok(()),
    }
}

/// `h⁻¹(det(I + hG) − 1) = tr G + h·i₂(G) + h²·det G`.
fn det_defect(g: &Mat3, h: f64) -> f64 {
    let tr = g.trace();
    let i2 = 0.5 * (tr * tr - (g * g).trace());
    tr + h * i2 + h * h * g.determinant()
}

/// `∂ det F / ∂F`.
fn cofactor(f: &Mat3) -> Mat3 {
    let (c0, c1, c2) = (f.column(0), f.column(1), f.column(2));
    Mat3::from_columns(&[c1.cross(&c2), c2.cross(&c0), c0.cross(&c1)])
}

fn pseudo_inverse(m: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.amax();
    let inv = eig.eigenvalues.map(|l| if l > 1e-13 * top { 1.0 / l } else { 0.0 });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSolve {
    pub result: SolveResult,
    pub ansatz: DeformationAnsatz,
    pub rotation_distance: f64,
    pub rescaled_strain: f64,
    /// Energy after each alternation round, starting from the initial value.
    pub history: Vec<f64>,
}

/// `𝒢_h` of a field directly by quadrature of `h⁻² W(I + h∇u)`.
pub fn eval_gh_field(
    u: &dyn VectorField,
    rotation: &Mat3,
    h: f64,
    loads: &LoadEvaluator,
    penalty: Option<f64>,
) -> Result<f64> {
    check_h(h)?;
    let kappa = penalty.unwrap_or(0.0);
    let stored = integrate_scalar(
        |x| {
            let f = Mat3::identity() + u.gradient(x) * h;
            let d = f.determinant() - 1.0;
            (density(&f) + kappa * d * d) / (h * h)
        },
        loads.volume_rule(),
    )?;
    let work = loads.load_functional(|x| rotation * u.value(x))?;
    Ok(stored - work - loads.rotation_work(rotation) / h)
}

/// `argmin_R ∫ g_p(|∇y − R|)` by descent along `R exp(δ)` from the polar rotation of `mean ∇y`.
pub fn optimal_rotation_ap(y: &dyn VectorField, rule: &QuadratureRule, p: f64) -> Result<(Mat3, f64)> {
    crate::math3::g_p(0.0, p)?;
    let grads: Vec<Mat3> = rule.nodes.iter().map(|x| y.gradient(x)).collect();
    for (g, x) in grads.iter().zip(&rule.nodes) {
        check_finite(g, x)?;
    }
    let vol = rule.total_weight();
    let mean = grads.iter().zip(&rule.weights).fold(Mat3::zeros(), |acc, (g, w)| acc + g * *w) / vol;
    let objective = |r: &Mat3| -> f64 {
        grads.iter().zip(&rule.weights).map(|(g, w)| w * g_p_unchecked((g - r).norm(), p)).sum()
    };
    let gradient = |r: &Mat3| -> Vec3 {
        let mut out = Vec3::zeros();
        for (g, w) in grads.iter().zip(&rule.weights) {
            let d = g - r;
            let t = d.norm();
            if t == 0.0 {
                continue;
            }
            let s = w * g_p_derivative(t, p).expect("p validated") / t;
            for k in 0..3 {
                let dr = r * crate::math3::cross_matrix(&Vec3::ith(k, 1.0));
                out[k] -= s * ddot(&d, &dr);
            }
        }
        out
    };
    let mut r = nearest_rotation(&mean).0;
    let mut v = objective(&r);
    for _ in 0..500 {
        let g = gradient(&r);
        if g.norm() < 1e-14 * (1.0 + v) {
            break;
        }
        let mut step = 1.0 / vol;
        let mut moved = false;
        while step > 1e-16 {
            let trial = nearest_rotation(&(r * exp_so3(&(-g * step)))).0;
            let tv = objective(&trial);
            if tv <= v - 1e-4 * step * g.norm_squared() {
                r = trial;
                v = tv;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    Ok((r, v))
}

/// One row of the `h → 0` study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    /// NaN (`null`) when the row failed.
    #[serde(rename = "value_Gh", with = "crate::nullable")]
    pub value_gh: f64,
    #[serde(with = "crate::nullable")]
    pub gap_to_limit: f64,
    #[serde(rename = "rot_dist", with = "crate::nullable")]
    pub rotation_distance: f64,
    #[serde(rename = "strain_rescaled", with = "crate::nullable")]
    pub rescaled_strain: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub status: Option<SolveStatus>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    /// `min 𝒢` used as the reference value.
    pub limit_value: f64,
    pub limit_rotation: Mat3,
    pub degree: usize,
    pub rows: Vec<ConvergenceRow>,
    /// `log(gapᵢ / gapᵢ₊₁) / log(hᵢ / hᵢ₊₁)` between consecutive rows; `None` where undefined.
    pub empirical_rates: Vec<Option<f64>>,
}

/// Validates that the schedule is nonempty, in `(0, 1)` and strictly decreasing.
pub fn check_schedule(h_schedule: &[f64]) -> Result<()> {
    if h_schedule.is_empty() {
        return Err(Error::invalid("h schedule is empty"));
    }
    for &h in h_schedule {
        check_h(h)?;
    }
    if h_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("h schedule must be strictly decreasing"));
    }
    Ok(())
}

/// Warm-started quasi-minimization of `𝒢_h` along a decreasing schedule.
///
/// The model is enriched by the limit minimizer: the closed-form pair
/// `u₀, u_{−π/2}` when available, else the Galerkin minimizer of the limit problem.
/// With a penalty the reference is the limit problem over the divergence-free space.
pub fn convergence_study(
    spec: &LoadSpec,
    h_schedule: &[f64],
    options: &NonlinearOptions,
    limit_options: &LimitOptions,
) -> Result<ConvergenceStudy> {
    check_schedule(h_schedule)?;
    let kind = if options.penalty.is_some() { limit_options.incompressible_space } else { limit_options.space };
    let problem = LimitProblem::new(spec, kind, limit_options)?;
    let limit = problem.minimize(limit_options)?;
    let limit_rotation = limit.result.rotation;
    let closed = if options.penalty.is_some() { None } else { ExplicitSolution::new(spec).ok() };
    let galerkin_field = problem.space().field(&limit.result.coefficients)?;

    let (model, start, limit_value) = match &closed {
        Some(sol) if matches!(problem.kernel().classification, KernelClass::AxisSubgroup { axis } if (axis.z.abs() - 1.0).abs() < 1e-9) => {
            let u0 = sol.u0();
            let u1 = sol.u_minus_half_pi();
            let model = NonlinearModel::new(spec, options, &[&u0, &u1])?;
            // both ±π/2 are optimal; start from the pair (u_{−π/2}, R_{−π/2})
            let mut start = vec![0.0; model.dim()];
            start[1] = 1.0;
            let value = sol.radial_integrals().min_rotated().min(limit.result.value);
            let rotation = crate::limit::axis_rotation(&Vec3::z(), -std::f64::consts::FRAC_PI_2);
            (model, (start, rotation), value)
        }
        _ => {
            let model = NonlinearModel::new(spec, options, &[&galerkin_field])?;
            let mut start = vec![0.0; model.dim()];
            start[0] = 1.0;
            (model, (start, limit_rotation), limit.result.value)
        }
    };

    let (mut coeffs, mut rotation) = start;
    let mut rows = Vec::new();
    for &h in h_schedule {
        let init = DeformationAnsatz::new(&rotation, coeffs.clone(), h)?;
        match model.minimize(&init, options) {
            Ok(sol) => {
                coeffs = sol.ansatz.coeffs.clone();
                rotation = sol.result.rotation;
                rows.push(ConvergenceRow {
                    h,
                    value_gh: sol.result.value,
                    gap_to_limit: (sol.result.value - limit_value).abs(),
                    rotation_distance: sol.rotation_distance,
                    rescaled_strain: sol.rescaled_strain,
                    iterations: Some(sol.result.iterations),
                    status: Some(sol.result.status),
                    error: None,
                });
            }
            Err(e) => rows.push(ConvergenceRow {
                h,
                value_gh: f64::NAN,
                gap_to_limit: f64::NAN,
                rotation_distance: f64::NAN,
                rescaled_strain: f64::NAN,
                iterations: None,
                status: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let empirical_rates = rows
        .windows(2)
        .map(|w| Some((w[0].gap_to_limit / w[1].gap_to_limit).ln() / (w[0].h / w[1].h).ln()).filter(|r| r.is_finite()))
        .collect();
    Ok(ConvergenceStudy { limit_value, limit_rotation, degree: options.degree, rows, empirical_rates })
}
