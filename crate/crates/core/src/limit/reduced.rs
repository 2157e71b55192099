//! The limit functional restricted to a Galerkin space.
//!
//! For fixed `R` the minimum of `½cᵀAc − cᵀb(R)` is `−½ b(R)ᵀA⁺b(R)`, and
//! `b(R)` is linear in the nine entries of `R`. Nine solves therefore give a
//! 9×9 form `H` with `min_c = −½ vec(R)ᵀ H vec(R)`, and the outer optimization
//! over the kernel becomes a cheap finite-dimensional search.

use nalgebra::{DMatrix, DVector, SMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain::{integrate_scalar, QuadratureRule};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::galerkin::{
    assemble, projected_residual, AssembleOptions, DirectSolver, GalerkinSpace, SolveResult, SolveStatus, SpaceKind,
    StiffnessSystem,
};
use crate::loads::{compatibility_report, KernelClass, KernelOptions, KernelReport, LoadEvaluator, LoadSpec};
use crate::math3::{cross_matrix, ddot, exp_so3, nearest_rotation, rodrigues_unchecked, Mat3, SkewParams, Vec3};

type Mat9 = SMatrix<f64, 9, 9>;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitOptions {
    pub space: SpaceKind,
    /// Divergence-free space for the incompressible problems.
    pub incompressible_space: SpaceKind,
    /// `degree2d` of the divergence-free planar candidate space.
    pub kdiv_degree: usize,
    /// Space for the negativity bound of the planar-spin family.
    pub lemma_space: SpaceKind,
    pub quadrature_order: usize,
    pub kernel: KernelOptions,
    pub theta_grid: usize,
    pub angle_tol: f64,
    pub multistarts: usize,
    pub seed: u64,
    pub penalty_schedule: Vec<f64>,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            space: SpaceKind::Full { degree: 7 },
            incompressible_space: SpaceKind::CurlPotential { degree: 7 },
            kdiv_degree: 8,
            lemma_space: SpaceKind::AnsatzK { degree2d: 8, degree1d: 3 },
            quadrature_order: 16,
            kernel: KernelOptions::default(),
            theta_grid: 64,
            angle_tol: 1e-10,
            multistarts: 8,
            seed: 0,
            penalty_schedule: vec![1e3, 1e4, 1e5, 1e6],
        }
    }
}

fn vec9(r: &Mat3) -> SMatrix<f64, 9, 1> {
    SMatrix::<f64, 9, 1>::from_fn(|p, _| r[(p / 3, p % 3)])
}

/// Refuses incompatible loads with the violated conditions.
pub fn require_compatible(report: &KernelReport) -> Result<()> {
    if report.classification == KernelClass::Incompatible {
        return Err(Error::Incompatible(format!(
            "loads are incompatible: {}",
            report.violations.join("; ")
        )));
    }
    Ok(())
}

/// Galerkin model of the limit problem for one load and one space.
pub struct LimitProblem {
    spec: LoadSpec,
    space: GalerkinSpace,
    system: StiffnessSystem,
    kernel: KernelReport,
    /// `y_p = A⁺ P B_p`
    responses: Vec<DVector<f64>>,
    form: Mat9,
}

impl LimitProblem {
    pub fn new(spec: &LoadSpec, kind: SpaceKind, options: &LimitOptions) -> Result<Self> {
        let kernel = compatibility_report(spec, &options.kernel)?;
        require_compatible(&kernel)?;
        let space = GalerkinSpace::build(kind, spec.domain, options.quadrature_order)?;
        let system = assemble(&space, spec, &AssembleOptions::default())?;
        Self::from_parts(spec.clone(), space, system, kernel)
    }

    fn from_parts(spec: LoadSpec, space: GalerkinSpace, system: StiffnessSystem, kernel: KernelReport) -> Result<Self> {
        let solver = DirectSolver::new(&system)?;
        let mut projected = system.load_blocks.clone();
        for b in &mut projected {
            system.project(b);
        }
        let responses: Vec<DVector<f64>> = projected.iter().map(|b| solver.solve(&system, b)).collect();
        let mut form = Mat9::from_fn(|p, q| projected[p].dot(&responses[q]));
        form = (form + form.transpose()) * 0.5;
        Ok(Self { spec, space, system, kernel, responses, form })
    }

    /// The same problem with the divergence penalty `κ`.
    pub fn with_penalty(&self, kappa: f64) -> Result<Self> {
        let system = self.system.with_penalty(Some(kappa));
        let space = self.space.clone();
        Self::from_parts(self.spec.clone(), space, system, self.kernel.clone())
    }

    pub fn spec(&self) -> &LoadSpec {
        &self.spec
    }

    pub fn space(&self) -> &GalerkinSpace {
        &self.space
    }

    pub fn system(&self) -> &StiffnessSystem {
        &self.system
    }

    pub fn kernel(&self) -> &KernelReport {
        &self.kernel
    }

    /// `min_c ½cᵀAc − cᵀb(R)`.
    pub fn value(&self, r: &Mat3) -> f64 {
        let v = vec9(r);
        -0.5 * (v.transpose() * self.form * v)[(0, 0)]
    }

    /// Gradient of [`Self::value`] along `R ↦ R exp(δ)` at `δ = 0`.
    fn value_gradient(&self, r: &Mat3) -> Vec3 {
        let hv = self.form * vec9(r);
        Vec3::from_fn(|k, _| -(vec9(&(r * cross_matrix(&Vec3::ith(k, 1.0)))).transpose() * hv)[(0, 0)])
    }

    pub fn coefficients(&self, r: &Mat3) -> DVector<f64> {
        let mut c = DVector::zeros(self.system.dim());
        for p in 0..9 {
            c.axpy(r[(p / 3, p % 3)], &self.responses[p], 1.0);
        }
        c
    }

    /// Minimizer at a fixed rotation.
    pub fn solve_at(&self, r: &Mat3) -> Result<SolveResult> {
        let b = self.system.load_vector(r);
        crate::galerkin::check_rigid_orthogonality(&self.system, &b)?;
        let c = self.coefficients(r);
        Ok(SolveResult {
            value: self.system.energy(&c, &b),
            residual_norm: projected_residual(&self.system, &c, &b),
            coefficients: c.iter().copied().collect(),
            rotation: *r,
            theta: None,
            iterations: 0,
            status: SolveStatus::Converged,
        })
    }

    /// `min_R min_c` over the rotation kernel.
    pub fn minimize(&self, options: &LimitOptions) -> Result<LimitMinimum> {
        let (rotation, theta, note) = match self.kernel.classification {
            KernelClass::Incompatible => unreachable!("checked on construction"),
            KernelClass::IdentityOnly => (Mat3::identity(), None, None),
            _ if self.form.norm() == 0.0 => {
                (Mat3::identity(), Some(0.0), Some("zero load response: every kernel rotation is optimal".into()))
            }
            KernelClass::AxisSubgroup { axis } => {
                let (t, note) = self.search_axis(&axis, options);
                (axis_rotation(&axis, t), Some(t), note)
            }
            KernelClass::PlanarAxes { normal } => (self.search_planar(&normal, options), None, None),
            KernelClass::FullSO3 => (self.search_so3(options), None, None),
        };
        let mut result = self.solve_at(&rotation)?;
        result.theta = theta;
        Ok(LimitMinimum { kernel: self.kernel.classification, space: self.space.kind(), result, note })
    }

    /// Grid search, golden section, then Newton on the derivative.
    fn search_axis(&self, axis: &Vec3, options: &LimitOptions) -> (f64, Option<String>) {
        let w = SkewParams::from_axis(axis).matrix();
        let f = |t: f64| self.value(&rodrigues_unchecked(&w, t));
        let n = options.theta_grid.max(8);
        let grid: Vec<f64> = (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let low = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let slack = 1e-9 * low.abs();
        let local: Vec<usize> =
            (0..n).filter(|&i| vals[i] <= vals[(i + n - 1) % n] && vals[i] <= vals[(i + 1) % n]).collect();
        let best = *local.iter().find(|&&i| vals[i] <= low + slack).expect("a grid minimum exists");
        let h = 2.0 * PI / n as f64;
        let mut t = golden(f, grid[best] - h, grid[best] + h, 1e-7);
        t = newton_refine(self, &w, t, options.angle_tol);
        let ties: Vec<String> = local
            .iter()
            .filter(|&&i| i != best && vals[i] <= low + slack)
            .map(|&i| format!("{:.6}", grid[i]))
            .collect();
        let note = (!ties.is_empty()).then(|| {
            format!("θ = {t:.12} reported first; equally optimal grid minima near θ = {}", ties.join(", "))
        });
        (crate::math3::wrap_angle(t), note)
    }

    fn search_planar(&self, normal: &Vec3, options: &LimitOptions) -> Mat3 {
        let e1 = normal.cross(&if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
        let e2 = normal.cross(&e1);
        let rot = |a: f64, t: f64| exp_so3(&((e1 * a.cos() + e2 * a.sin()) * t));
        let n = options.theta_grid.max(8);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n / 2 {
            let a = PI * i as f64 / (n / 2) as f64;
            for j in 0..n {
                let t = -PI + 2.0 * PI * j as f64 / n as f64;
                let v = self.value(&rot(a, t));
                if v < best.0 {
                    best = (v, a, t);
                }
            }
        }
        let (mut a, mut t) = (best.1, best.2);
        let (mut ha, mut ht) = (PI / n as f64, 2.0 * PI / n as f64);
        for _ in 0..40 {
            a = golden(|s| self.value(&rot(s, t)), a - ha, a + ha, 1e-12);
            t = golden(|s| self.value(&rot(a, s)), t - ht, t + ht, 1e-12);
            ha *= 0.5;
            ht *= 0.5;
        }
        rot(a, t)
    }

    fn search_so3(&self, options: &LimitOptions) -> Mat3 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut best = (f64::INFINITY, Mat3::identity());
        for k in 0..options.multistarts.max(1) {
            let start = if k == 0 { Mat3::identity() } else { random_rotation(&mut rng) };
            let r = self.descend(start);
            let v = self.value(&r);
            if v < best.0 - 1e-14 * v.abs() {
                best = (v, r);
            }
        }
        best.1
    }

    /// Armijo descent along `R exp(δ)`, reprojected onto SO(3) every step.
    fn descend(&self, mut r: Mat3) -> Mat3 {
        let mut v = self.value(&r);
        for _ in 0..2000 {
            let g = self.value_gradient(&r);
            if g.norm() < 1e-13 * (1.0 + v.abs()) {
                break;
            }
            let mut step = 1.0;
            loop {
                let trial = nearest_rotation(&(r * exp_so3(&(-g * step)))).0;
                let tv = self.value(&trial);
                if tv <= v - 1e-4 * step * g.norm_squared() {
                    r = trial;
                    v = tv;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    return r;
                }
            }
        }
        r
    }
}

/// Uniform random rotation from a uniform unit quaternion.
fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            let (w, x, y, z) = (q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            return Mat3::new(
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            );
        }
    }
}

/// `R_θ = I + sinθ W + (1 − cosθ) W²` for the unit generator with the given axis.
pub fn axis_rotation(axis: &Vec3, theta: f64) -> Mat3 {
    rodrigues_unchecked(&SkewParams::from_axis(axis).matrix(), theta)
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Newton iterations on `d/dθ value(R_θ)` using the trigonometric form of `R_θ`.
fn newton_refine(problem: &LimitProblem, w: &Mat3, mut t: f64, tol: f64) -> f64 {
    let w2 = w * w;
    for _ in 0..20 {
        let (s, c) = t.sin_cos();
        let r = vec9(&rodrigues_unchecked(w, t));
        let r1 = vec9(&(w * c + w2 * s));
        let r2 = vec9(&(w * (-s) + w2 * c));
        let h = &problem.form;
        let d1 = -(r1.transpose() * h * r)[(0, 0)];
        let d2 = -(r1.transpose() * h * r1)[(0, 0)] - (r2.transpose() * h * r)[(0, 0)];
        if !(d2 > 0.0) {
            break;
        }
        let step = d1 / d2;
        t -= step;
        if step.abs() < tol {
            break;
        }
    }
    t
}

/// Result of the outer optimization over the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitMinimum {
    pub kernel: KernelClass,
    pub space: SpaceKind,
    pub result: SolveResult,
    pub note: Option<String>,
}

/// `max_{R ∈ kernel} L(Ru)` and a maximizing rotation, from the work matrix
/// `M_u = ∫ f ⊗ u` (so that `L(Ru) = R : M_u`).
pub fn kernel_max_work(kernel: &KernelClass, work: &Mat3) -> Result<(f64, Mat3)> {
    match kernel {
        KernelClass::Incompatible => Err(Error::Incompatible("no rotation kernel for incompatible loads".into())),
        KernelClass::IdentityOnly => Ok((work.trace(), Mat3::identity())),
        KernelClass::AxisSubgroup { axis } => {
            let w = SkewParams::from_axis(axis).matrix();
            let p = ddot(&w, work);
            let q = ddot(&(w * w), work);
            let amp = p.hypot(q);
            let r = if amp == 0.0 {
                Mat3::identity()
            } else {
                Mat3::identity() + w * (p / amp) + w * w * (1.0 + q / amp)
            };
            Ok((work.trace() + q + amp, r))
        }
        KernelClass::FullSO3 => {
            let r = nearest_rotation(work).0;
            Ok((ddot(&r, work), r))
        }
        KernelClass::PlanarAxes { normal } => {
            let e1 = normal.cross(&if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() }).normalize();
            let e2 = normal.cross(&e1);
            let rot = |a: f64, t: f64| exp_so3(&((e1 * a.cos() + e2 * a.sin()) * t));
            let f = |a: f64, t: f64| -ddot(&rot(a, t), work);
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for i in 0..32 {
                let a = PI * i as f64 / 32.0;
                for j in 0..64 {
                    let t = -PI + 2.0 * PI * j as f64 / 64.0;
                    if f(a, t) < best.0 {
                        best = (f(a, t), a, t);
                    }
                }
            }
            let (mut a, mut t) = (best.1, best.2);
            let (mut ha, mut ht) = (PI / 32.0, PI / 32.0);
            for _ in 0..40 {
                a = golden(|s| f(s, t), a - ha, a + ha, 1e-13);
                t = golden(|s| f(a, s), t - ht, t + ht, 1e-13);
                ha *= 0.5;
                ht *= 0.5;
            }
            let r = rot(a, t);
            Ok((ddot(&r, work), r))
        }
    }
}

/// `∫Q(𝔼u) − max_{R ∈ kernel} L(Ru)`, returned with the maximizing rotation.
pub fn limit_energy(
    u: &dyn VectorField,
    loads: &LoadEvaluator,
    kernel: &KernelClass,
    rule: &QuadratureRule,
) -> Result<(f64, Mat3)> {
    let q = integrate_scalar(|x| crate::energy::quadratic_form(&u.gradient(x)), rule)?;
    let work = loads.work_matrix(|x| u.value(x))?;
    let (max, r) = kernel_max_work(kernel, &work)?;
    Ok((q - max, r))
}

/// Dense `H` for tests and reports.
pub fn reduced_form(problem: &LimitProblem) -> DMatrix<f64> {
    DMatrix::from_fn(9, 9, |p, q| problem.form[(p, q)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::solve_quadratic;
    use approx::assert_relative_eq;

    fn options() -> LimitOptions {
        LimitOptions { space: SpaceKind::Full { degree: 3 }, quadrature_order: 10, ..LimitOptions::default() }
    }

    #[test]
    fn reduced_value_matches_cg_solve() {
        let p = LimitProblem::new(&LoadSpec::preset(0.3), SpaceKind::Full { degree: 3 }, &options()).unwrap();
        let r = axis_rotation(&Vec3::z(), 0.7);
        let cg = solve_quadratic(p.system(), &r).unwrap();
        assert_relative_eq!(p.value(&r), cg.value, max_relative = 1e-9);
        assert_relative_eq!(p.solve_at(&r).unwrap().value, cg.value, max_relative = 1e-9);
    }

    #[test]
    fn axis_search_finds_quarter_turn() {
        let p = LimitProblem::new(&LoadSpec::preset(0.01), SpaceKind::Full { degree: 3 }, &options()).unwrap();
        let m = p.minimize(&options()).unwrap();
        let t = m.result.theta.unwrap();
        assert!((t.abs() - PI / 2.0).abs() < 1e-8, "{t}");
        assert!(m.note.is_some());
        assert!(m.result.value <= p.value(&Mat3::identity()));
    }

    #[test]
    fn so3_search_beats_every_sample() {
        let p = LimitProblem::new(&LoadSpec::preset(0.0), SpaceKind::Full { degree: 2 }, &options()).unwrap();
        assert_eq!(p.kernel().classification, KernelClass::FullSO3);
        let m = p.minimize(&options()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            assert!(m.result.value <= p.value(&r) + 1e-12);
        }
    }

    #[test]
    fn zero_loads_any_rotation() {
        let p = LimitProblem::new(&LoadSpec::zero(), SpaceKind::Full { degree: 2 }, &options()).unwrap();
        let m = p.minimize(&options()).unwrap();
        assert_eq!(m.result.value, 0.0);
    }

    #[test]
    fn axis_inner_max_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let work = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let axis = Vec3::new(0.3, -0.5, 0.8).normalize();
            let (v, r) = kernel_max_work(&KernelClass::AxisSubgroup { axis }, &work).unwrap();
            assert_relative_eq!(ddot(&r, &work), v, epsilon = 1e-12);
            assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-12);
            for k in 0..360 {
                let s = axis_rotation(&axis, k as f64 * PI / 180.0);
                assert!(ddot(&s, &work) <= v + 1e-12);
            }
        }
    }

    #[test]
    fn random_rotations_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let r = random_rotation(&mut rng);
            assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-12);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
        }
    }
}
