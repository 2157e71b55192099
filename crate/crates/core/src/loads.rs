//! Load functional, compatibility checks and the rotation kernel.
//!
//! Body forces on the cylinder are `f = (φ′(r) x/r, φ′(r) y/r, ψ(z))` with
//! polynomial profiles, optionally plus a normal surface pressure `g = λn`.
//! A rotated load `L_R(v) = L(Rv)` is represented by a frame matrix: the
//! effective force is `frameᵀ f`, and rotating again by `R` multiplies the
//! frame on the right.
//!
//! Everything rotation-related is expressed through the moment matrix
//! `M = ∫ f ⊗ x (+ ∫ g ⊗ x)`, because `L(Ax) = A : M` for every constant `A`.
//! For a unit skew generator with axis `ω`, `L(W²x) = ωᵀ K ω` where
//! `K = sym M − tr(M) I`, so the kernel structure follows from the spectrum of `K`.

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Add;

use crate::domain::{surface_quadrature, volume_quadrature, Domain, QuadratureRule};
use crate::error::{Error, Result};
use crate::math3::{ddot, exp_so3, skew_matrix, Mat3, SkewParams, Vec3};
use crate::poly::Poly;

pub const DEFAULT_QUADRATURE_ORDER: usize = 16;
pub const DEFAULT_KERNEL_SAMPLES: usize = 200;
pub const CLASSIFICATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `f(x) = −x` on the unit ball, no surface load.
    #[serde(alias = "BallPullIn")]
    BallPullIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    /// Radial profile `φ(r)`, ascending powers.
    pub phi: Poly,
    /// Axial profile `ψ(z)`, ascending powers.
    pub psi: Poly,
    /// `λ` in the normal surface load `g = λn`.
    pub surface_pressure: Option<f64>,
    pub builtin: Option<Builtin>,
    pub domain: Domain,
    /// Accumulated rotation of rotated loads; identity for plain loads.
    pub frame: Mat3,
}

/// Values entering the profile conditions on `φ` and `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstraints {
    pub phi_at_one: f64,
    pub phi_prime_at_one: f64,
    /// `∫₀¹ r² φ′(r) dr`
    pub radial_moment: f64,
    /// `∫₀¹ ψ`
    pub psi_mean: f64,
    /// `∫₀¹ z ψ(z) dz`
    pub psi_first_moment: f64,
}

impl ProfileConstraints {
    pub fn radial_defect(&self) -> f64 {
        self.phi_at_one.abs() + self.phi_prime_at_one.abs() + self.radial_moment.abs()
    }

    pub fn radial_ok(&self, tol: f64) -> bool {
        self.radial_defect() < tol
    }

    pub fn axial_ok(&self, tol: f64) -> bool {
        self.psi_mean.abs() < tol && self.psi_first_moment >= -tol
    }
}

impl LoadSpec {
    /// The cylinder example: `φ = 4r⁶ − 9r⁴ + 6r² − 1`, `ψ = β(z − ½)`.
    pub fn preset(beta: f64) -> Self {
        Self {
            phi: Poly::new(vec![-1.0, 0.0, 6.0, 0.0, -9.0, 0.0, 4.0]),
            psi: Poly::new(vec![-0.5 * beta, beta]),
            surface_pressure: None,
            builtin: None,
            domain: Domain::unit_cylinder(),
            frame: Mat3::identity(),
        }
    }

    pub fn zero() -> Self {
        Self {
            phi: Poly::zero(),
            psi: Poly::zero(),
            surface_pressure: None,
            builtin: None,
            domain: Domain::unit_cylinder(),
            frame: Mat3::identity(),
        }
    }

    pub fn ball_pull_in() -> Self {
        Self { builtin: Some(Builtin::BallPullIn), domain: Domain::UnitBall, ..Self::zero() }
    }

    /// Pure normal pressure `g = λn` on the unit cylinder.
    pub fn pressure(lambda: f64) -> Self {
        Self { surface_pressure: Some(lambda), ..Self::zero() }
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if !self.phi.is_finite() || !self.psi.is_finite() {
            return Err(Error::invalid("load profiles must have finite coefficients"));
        }
        if self.phi.coeff(1) != 0.0 {
            return Err(Error::invalid(format!(
                "phi'(0) must vanish for a smooth radial force, got linear coefficient {}",
                self.phi.coeff(1)
            )));
        }
        if let Some(l) = self.surface_pressure {
            if !l.is_finite() {
                return Err(Error::invalid("surface_pressure must be finite"));
            }
            if l != 0.0 && self.domain == Domain::UnitBall {
                return Err(Error::Unsupported("surface pressure on the ball".into()));
            }
        }
        if self.builtin == Some(Builtin::BallPullIn) && self.domain != Domain::UnitBall {
            return Err(Error::invalid("builtin ball_pull_in requires the unit ball domain"));
        }
        let orth = (self.frame.transpose() * self.frame - Mat3::identity()).norm();
        if !(orth < 1e-10) || self.frame.determinant() <= 0.0 {
            return Err(Error::invalid("load frame must be a rotation"));
        }
        Ok(())
    }

    pub fn profile_constraints(&self) -> ProfileConstraints {
        let dphi = self.phi.deriv();
        ProfileConstraints {
            phi_at_one: self.phi.eval(1.0),
            phi_prime_at_one: dphi.eval(1.0),
            radial_moment: dphi.shift(2).integrate(0.0, 1.0),
            psi_mean: self.psi.integrate(0.0, 1.0),
            psi_first_moment: self.psi.shift(1).integrate(0.0, 1.0),
        }
    }

    /// `φ′(r)/r` as a polynomial; exact because `φ′(0) = 0`.
    fn radial_factor(&self) -> Poly {
        self.phi.deriv().div_by_x()
    }

    /// Force in the reference frame, before applying `frame`.
    fn raw_force(&self, radial: &Poly, x: &Vec3) -> Vec3 {
        if self.builtin == Some(Builtin::BallPullIn) {
            return -x;
        }
        let r = (x.x * x.x + x.y * x.y).sqrt();
        let k = radial.eval(r);
        Vec3::new(k * x.x, k * x.y, self.psi.eval(x.z))
    }

    pub fn body_force(&self, x: &Vec3) -> Vec3 {
        self.frame.transpose() * self.raw_force(&self.radial_factor(), x)
    }

    pub fn has_surface_load(&self) -> bool {
        matches!(self.surface_pressure, Some(l) if l != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.builtin.is_none() && self.phi.deriv().is_zero() && self.psi.is_zero() && !self.has_surface_load()
    }
}

/// `L_R(v) = L(Rv)`, i.e. forces `Rᵀf` and tractions `Rᵀg`.
pub fn rotate_loads(spec: &LoadSpec, r: &Mat3) -> Result<LoadSpec> {
    let orth = (r.transpose() * r - Mat3::identity()).norm();
    if !(orth < 1e-10) || r.determinant() <= 0.0 {
        return Err(Error::invalid("rotate_loads expects a rotation matrix"));
    }
    Ok(LoadSpec { frame: spec.frame * r, ..spec.clone() })
}

pub(crate) fn pairwise_reduce<T: Copy + Add<Output = T>>(values: &[T], zero: T) -> T {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().fold(zero, |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_reduce(&values[..mid], zero) + pairwise_reduce(&values[mid..], zero)
}

/// Quadrature-weighted forces at the nodes of a volume (and surface) rule.
#[derive(Debug, Clone)]
pub struct LoadEvaluator {
    spec: LoadSpec,
    volume: QuadratureRule,
    /// `wᵢ f(xᵢ)`
    weighted_forces: Vec<Vec3>,
    surface_nodes: Vec<Vec3>,
    /// `wᵢ g(xᵢ)`
    weighted_tractions: Vec<Vec3>,
}

impl LoadEvaluator {
    pub fn new(spec: &LoadSpec, order: usize) -> Result<Self> {
        spec.validate()?;
        let volume = volume_quadrature(&spec.domain, order)?;
        let radial = spec.radial_factor();
        let ft = spec.frame.transpose();
        let weighted_forces = volume
            .nodes
            .iter()
            .zip(&volume.weights)
            .map(|(x, w)| ft * spec.raw_force(&radial, x) * *w)
            .collect();
        let (surface_nodes, weighted_tractions) = match spec.surface_pressure {
            Some(lambda) if lambda != 0.0 => {
                let s = surface_quadrature(&spec.domain, order)?;
                let normals = s.normals.as_ref().expect("surface rule carries normals");
                let t = normals.iter().zip(&s.weights).map(|(n, w)| ft * n * (lambda * w)).collect();
                (s.nodes, t)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Self { spec: spec.clone(), volume, weighted_forces, surface_nodes, weighted_tractions })
    }

    pub fn spec(&self) -> &LoadSpec {
        &self.spec
    }

    pub fn volume_rule(&self) -> &QuadratureRule {
        &self.volume
    }

    /// Weighted forces `wᵢ f(xᵢ)` aligned with the volume rule nodes.
    pub fn weighted_forces(&self) -> &[Vec3] {
        &self.weighted_forces
    }

    pub fn surface_nodes(&self) -> &[Vec3] {
        &self.surface_nodes
    }

    pub fn weighted_tractions(&self) -> &[Vec3] {
        &self.weighted_tractions
    }

    fn check(v: Vec3, x: &Vec3) -> Result<Vec3> {
        match v.iter().find(|c| !c.is_finite()) {
            Some(&bad) => Err(Error::NonFinite { value: bad, node: [x.x, x.y, x.z] }),
            None => Ok(v),
        }
    }

    /// `L(v) = ∫ f·v + ∫ g·v`.
    pub fn load_functional<F>(&self, v: F) -> Result<f64>
    where
        F: Fn(&Vec3) -> Vec3 + Sync,
    {
        Ok(ddot(&Mat3::identity(), &self.work_matrix(v)?))
    }

    /// `M_v = ∫ f ⊗ v + ∫ g ⊗ v`, so that `L(Rv) = R : M_v`.
    pub fn work_matrix<F>(&self, v: F) -> Result<Mat3>
    where
        F: Fn(&Vec3) -> Vec3 + Sync,
    {
        let vol: Vec<Mat3> = self
            .volume
            .nodes
            .par_iter()
            .zip(self.weighted_forces.par_iter())
            .map(|(x, wf)| Ok(wf * Self::check(v(x), x)?.transpose()))
            .collect::<Result<_>>()?;
        let surf: Vec<Mat3> = self
            .surface_nodes
            .par_iter()
            .zip(self.weighted_tractions.par_iter())
            .map(|(x, wg)| Ok(wg * Self::check(v(x), x)?.transpose()))
            .collect::<Result<_>>()?;
        Ok(pairwise_reduce(&vol, Mat3::zeros()) + pairwise_reduce(&surf, Mat3::zeros()))
    }

    pub fn resultant(&self) -> Vec3 {
        pairwise_reduce(&self.weighted_forces, Vec3::zeros()) + pairwise_reduce(&self.weighted_tractions, Vec3::zeros())
    }

    /// `M = ∫ f ⊗ x + ∫ g ⊗ x`.
    pub fn moment_matrix(&self) -> Mat3 {
        let vol: Vec<Mat3> =
            self.volume.nodes.iter().zip(&self.weighted_forces).map(|(x, wf)| wf * x.transpose()).collect();
        let surf: Vec<Mat3> =
            self.surface_nodes.iter().zip(&self.weighted_tractions).map(|(x, wg)| wg * x.transpose()).collect();
        pairwise_reduce(&vol, Mat3::zeros()) + pairwise_reduce(&surf, Mat3::zeros())
    }

    /// Work of a rigid rotation of the reference configuration, `L((R − I)x)`.
    pub fn rotation_work(&self, r: &Mat3) -> f64 {
        ddot(&(r - Mat3::identity()), &self.moment_matrix())
    }
}

/// Structure of the rotation kernel `{R : L((R − I)x) = 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelClass {
    IdentityOnly,
    /// Rotations about a single axis.
    AxisSubgroup { axis: Vec3 },
    /// Rotations about any axis orthogonal to `normal`. Not closed under composition.
    PlanarAxes { normal: Vec3 },
    FullSO3,
    Incompatible,
}

impl KernelClass {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IdentityOnly => "identity_only",
            Self::AxisSubgroup { .. } => "axis_subgroup",
            Self::PlanarAxes { .. } => "planar_axes",
            Self::FullSO3 => "full_so3",
            Self::Incompatible => "incompatible",
        }
    }

    /// Equality of kernel structure up to the sign of the axis.
    pub fn same_structure(&self, other: &Self, tol: f64) -> bool {
        match (self, other) {
            (Self::AxisSubgroup { axis: a }, Self::AxisSubgroup { axis: b })
            | (Self::PlanarAxes { normal: a }, Self::PlanarAxes { normal: b }) => (a.dot(b).abs() - 1.0).abs() < tol,
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W2Sample {
    pub params: SkewParams,
    /// `L(W²x)`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub resultant: Vec3,
    /// `max |L(Wx)|` over the three coordinate generators.
    pub momentum_max: f64,
    pub w2_values: Vec<W2Sample>,
    /// Eigenvalues of the form `ω ↦ L(W²x)`, ascending.
    pub form_eigenvalues: [f64; 3],
    pub classification: KernelClass,
    pub tolerance: f64,
    /// Violated conditions when incompatible.
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub samples: usize,
    pub tol: f64,
    pub quadrature_order: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { samples: DEFAULT_KERNEL_SAMPLES, tol: CLASSIFICATION_TOL, quadrature_order: DEFAULT_QUADRATURE_ORDER }
    }
}

/// Quasi-uniform unit vectors on the sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            Vec3::new(rho * t.cos(), rho * t.sin(), z)
        })
        .collect()
}

/// `K` with `L(W²x) = ωᵀ K ω` for the generator with axis `ω`.
pub fn w2_form(moment: &Mat3) -> Mat3 {
    crate::math3::sym(moment) - Mat3::identity() * moment.trace()
}

fn canonical_direction(v: Vec3) -> Vec3 {
    let mut k = 0;
    for i in 1..3 {
        if v[i].abs() > v[k].abs() + 1e-12 {
            k = i;
        }
    }
    let v = if v[k] < 0.0 { -v } else { v };
    v / v.norm()
}

pub fn compatibility_report(spec: &LoadSpec, options: &KernelOptions) -> Result<KernelReport> {
    let eval = LoadEvaluator::new(spec, options.quadrature_order)?;
    Ok(classify_moments(eval.resultant(), &eval.moment_matrix(), options))
}

/// Classification from the resultant and the moment matrix alone.
pub fn classify_moments(resultant: Vec3, moment: &Mat3, options: &KernelOptions) -> KernelReport {
    let tol = options.tol;
    let generators = [SkewParams::new(1.0, 0.0, 0.0), SkewParams::new(0.0, 1.0, 0.0), SkewParams::new(0.0, 0.0, 1.0)];
    let momentum_max = generators.iter().map(|g| ddot(&g.matrix(), moment).abs()).fold(0.0, f64::max);

    let form = w2_form(moment);
    let eig = SymmetricEigen::new(form);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let form_eigenvalues = order.map(|i| eig.eigenvalues[i]);
    let directions = order.map(|i| eig.eigenvectors.column(i).into_owned());

    // sampled directions plus the principal directions, so that a positive
    // part of the form can never fall between samples
    let mut w2_values: Vec<W2Sample> = fibonacci_sphere(options.samples)
        .into_iter()
        .chain(directions.iter().map(|d| canonical_direction(*d)))
        .map(|w| {
            let params = SkewParams::from_axis(&w);
            let wm = skew_matrix(params);
            W2Sample { params, value: ddot(&(wm * wm), moment) }
        })
        .collect();
    w2_values.shrink_to_fit();

    let mut violations = Vec::new();
    if resultant.norm() > tol {
        violations.push(format!("null resultant violated: |∫f + ∫g| = {:.3e}", resultant.norm()));
    }
    if momentum_max > tol {
        violations.push(format!("null momentum violated: max |L(Wx)| = {momentum_max:.3e}"));
    }
    let worst = w2_values.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    if worst > tol {
        violations.push(format!("compatibility violated: L(W²x) reaches {worst:.3e} > 0"));
    }

    let classification = if !violations.is_empty() {
        KernelClass::Incompatible
    } else {
        let null: Vec<usize> = (0..3).filter(|&i| form_eigenvalues[i].abs() <= tol).collect();
        match null.len() {
            3 => KernelClass::FullSO3,
            2 => {
                let k = (0..3).find(|i| !null.contains(i)).expect("one non-null direction");
                KernelClass::PlanarAxes { normal: canonical_direction(directions[k]) }
            }
            1 => KernelClass::AxisSubgroup { axis: canonical_direction(directions[null[0]]) },
            _ => KernelClass::IdentityOnly,
        }
    };

    KernelReport { resultant, momentum_max, w2_values, form_eigenvalues, classification, tolerance: tol, violations }
}

/// A rotation doing positive work `L((R − I)x) > tol`, searched on an axis-angle grid.
pub fn reversed_compatibility_witness(spec: &LoadSpec, options: &KernelOptions) -> Result<Option<Mat3>> {
    let eval = LoadEvaluator::new(spec, options.quadrature_order)?;
    let m = eval.moment_matrix();
    let mut axes = vec![Vec3::x(), Vec3::y(), Vec3::z()];
    axes.extend(fibonacci_sphere(options.samples.max(8)));
    let angles: Vec<f64> = (1..=12).flat_map(|k| [PI * k as f64 / 12.0, -PI * k as f64 / 12.0]).collect();
    let mut best: Option<(f64, Mat3)> = None;
    for axis in &axes {
        for &t in &angles {
            let r = exp_so3(&(axis * t));
            let work = ddot(&(r - Mat3::identity()), &m);
            if work > options.tol && best.is_none_or(|(b, _)| work > b) {
                best = Some((work, r));
            }
        }
    }
    Ok(best.map(|(_, r)| r))
}

/// Infinitesimal rigid displacement `x ↦ a + Wx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidPart {
    pub translation: Vec3,
    pub spin: SkewParams,
}

impl RigidPart {
    pub fn eval(&self, x: &Vec3) -> Vec3 {
        self.translation + self.spin.matrix() * x
    }
}

/// L² projection onto infinitesimal rigid displacements.
pub fn rigid_projection<F>(v: F, rule: &QuadratureRule) -> Result<RigidPart>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let values: Vec<Vec3> = rule.nodes.par_iter().map(&v).collect();
    rigid_projection_values(&values, rule)
}

/// [`rigid_projection`] for field values already sampled at the rule nodes.
pub fn rigid_projection_values(values: &[Vec3], rule: &QuadratureRule) -> Result<RigidPart> {
    if values.len() != rule.len() {
        return Err(Error::invalid("field samples do not match the quadrature rule"));
    }
    if let Some((x, v)) = rule.nodes.iter().zip(values).find(|(_, v)| !v.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite { value: v.norm(), node: [x.x, x.y, x.z] });
    }
    let vol = rule.total_weight();
    let wx: Vec<Vec3> = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| x * *w).collect();
    let wv: Vec<Vec3> = values.iter().zip(&rule.weights).map(|(v, w)| v * *w).collect();
    let centroid = pairwise_reduce(&wx, Vec3::zeros()) / vol;
    let mean_v = pairwise_reduce(&wv, Vec3::zeros()) / vol;
    let inertia: Vec<Mat3> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| {
            let y = x - centroid;
            (Mat3::identity() * y.norm_squared() - y * y.transpose()) * *w
        })
        .collect();
    let torque: Vec<Vec3> = rule
        .nodes
        .iter()
        .zip(values)
        .zip(&rule.weights)
        .map(|((x, v), w)| (x - centroid).cross(&(v - mean_v)) * *w)
        .collect();
    let j = pairwise_reduce(&inertia, Mat3::zeros());
    let t = pairwise_reduce(&torque, Vec3::zeros());
    let omega = j.lu().solve(&t).ok_or_else(|| Error::invalid("degenerate inertia tensor"))?;
    // v ≈ mean + ω × (x − centroid), and ω × x = [ω]× x
    let w = crate::math3::cross_matrix(&omega);
    Ok(RigidPart { translation: mean_v - w * centroid, spin: SkewParams::from_matrix(&w) })
}
