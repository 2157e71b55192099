use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::explicit::{ExplicitSolution, RadialIntegrals};
use super::reduced::{axis_rotation, limit_energy, LimitMinimum, LimitOptions, LimitProblem};
use crate::domain::integrate_scalar;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::galerkin::{SolveResult, SpaceKind};
use crate::loads::{rotate_loads, KernelClass, LoadEvaluator, LoadSpec};
use crate::math3::{skew_matrix, Mat3, SkewParams, Vec3};

/// The closed-form solution when the loads admit one, `None` otherwise.
pub fn closed_form(spec: &LoadSpec) -> Option<ExplicitSolution> {
    ExplicitSolution::new(spec).ok()
}

fn relative(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenalizedValue {
    pub kappa: f64,
    pub value: f64,
}

/// Two-sided information on `min ℰ^I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompressibleBounds {
    /// Minimum over the divergence-free space.
    pub upper: f64,
    pub upper_space: SpaceKind,
    /// Full-space minima with the divergence penalty `κ ∫ (div u)²`.
    pub penalized: Vec<PenalizedValue>,
    /// Closed-form compressible minimum when available, else the largest penalized value.
    pub lower: f64,
    /// Whether `lower` is a bound for the continuous problem rather than a discrete estimate.
    pub lower_rigorous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMinimum {
    pub result: SolveResult,
    pub space: SpaceKind,
    pub closed_form: Option<f64>,
    pub relative_error: Option<f64>,
    /// `|value + ½L(u)|`
    pub work_identity_defect: f64,
    pub incompressible: Option<IncompressibleBounds>,
}

fn work_defect(problem: &LimitProblem, result: &SolveResult, spec: &LoadSpec) -> Result<f64> {
    let u = problem.space().field(&result.coefficients)?;
    let loads = LoadEvaluator::new(spec, problem.space().quadrature_order())?;
    Ok((result.value + 0.5 * loads.load_functional(|x| u.value(x))?).abs())
}

/// `min ℰ`, or the bounds on `min ℰ^I`.
pub fn min_linear(spec: &LoadSpec, incompressible: bool, options: &LimitOptions) -> Result<LinearMinimum> {
    let full = LimitProblem::new(spec, options.space, options)?;
    let result = full.solve_at(&Mat3::identity())?;
    let exact = closed_form(spec).map(|s| s.radial_integrals().min_linear());
    if !incompressible {
        return Ok(LinearMinimum {
            work_identity_defect: work_defect(&full, &result, spec)?,
            relative_error: exact.map(|e| relative(result.value, e)),
            closed_form: exact,
            space: options.space,
            result,
            incompressible: None,
        });
    }
    let curl = LimitProblem::new(spec, options.incompressible_space, options)?;
    let upper = curl.solve_at(&Mat3::identity())?;
    let mut penalized = Vec::new();
    for &kappa in &options.penalty_schedule {
        penalized.push(PenalizedValue { kappa, value: full.with_penalty(kappa)?.value(&Mat3::identity()) });
    }
    let (lower, lower_rigorous) = match exact {
        Some(e) => (e, true),
        None => (penalized.iter().map(|p| p.value).fold(result.value, f64::max), false),
    };
    Ok(LinearMinimum {
        work_identity_defect: work_defect(&curl, &upper, spec)?,
        closed_form: None,
        relative_error: None,
        space: options.incompressible_space,
        incompressible: Some(IncompressibleBounds {
            upper: upper.value,
            upper_space: options.incompressible_space,
            penalized,
            lower,
            lower_rigorous,
        }),
        result: upper,
    })
}

/// `min 𝒢` (or an upper bound on `min 𝒢^I` over the divergence-free space).
pub fn min_limit(spec: &LoadSpec, incompressible: bool, options: &LimitOptions) -> Result<LimitMinimum> {
    let kind = if incompressible { options.incompressible_space } else { options.space };
    LimitProblem::new(spec, kind, options)?.minimize(options)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRow {
    pub theta: f64,
    /// Galerkin `min 𝒢_θ`.
    pub value: f64,
    /// `cos²θ · min ℰ + sin²θ · min 𝒢̃`
    pub predicted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormGap {
    pub integrals: RadialIntegrals,
    pub min_linear: f64,
    pub min_rotated: f64,
    pub margin: f64,
    /// The margin recomputed by 3-D quadrature of the minimizers.
    pub margin_volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GalerkinGap {
    pub space: SpaceKind,
    pub min_linear: f64,
    pub min_limit: f64,
    pub optimal_rotation: Mat3,
    pub optimal_theta: Option<f64>,
    pub relative_error_linear: Option<f64>,
    pub relative_error_limit: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompressibleGap {
    pub min_linear_upper: f64,
    pub min_linear_lower: f64,
    pub min_linear_lower_rigorous: bool,
    pub min_linear_penalized: Vec<PenalizedValue>,
    /// `𝒢^I` of the best divergence-free planar candidate.
    pub min_limit_upper: f64,
    /// `degree2d` of the candidate space that produced `min_limit_upper`.
    pub candidate_degree: usize,
    pub certified: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub kernel: KernelClass,
    pub min_linear: f64,
    pub min_limit: f64,
    pub optimal_theta: Option<f64>,
    /// `min ℰ − min 𝒢`
    pub margin: f64,
    pub relative_margin: f64,
    pub closed_form: Option<ClosedFormGap>,
    pub galerkin: GalerkinGap,
    pub incompressible: IncompressibleGap,
    pub decomposition_table: Vec<DecompositionRow>,
    /// Minimum of the planar-spin family `(u_y, −u_x, w(z))` at the optimal rotation.
    pub spin_family_bound: Option<f64>,
    pub notes: Vec<String>,
}

pub const DECOMPOSITION_ANGLES: [f64; 5] = [-PI / 2.0, -PI / 4.0, 0.0, PI / 4.0, PI / 2.0];

fn is_z_axis(kernel: &KernelClass) -> bool {
    matches!(kernel, KernelClass::AxisSubgroup { axis } if (axis.z.abs() - 1.0).abs() < 1e-9)
}

pub fn gap_report(spec: &LoadSpec, options: &LimitOptions) -> Result<GapReport> {
    let mut notes = Vec::new();
    let full = LimitProblem::new(spec, options.space, options)?;
    let kernel = full.kernel().classification;
    let linear = full.value(&Mat3::identity());
    let limit = full.minimize(options)?;
    notes.extend(limit.note.clone());
    let sol = closed_form(spec);

    let closed = match &sol {
        Some(s) => {
            let integrals = s.radial_integrals();
            let rule = full.space().volume_rule()?;
            let e0 = integrate_scalar(|x| s.u0().strain(x).norm_squared(), &rule)?;
            let e1 = integrate_scalar(|x| s.u_minus_half_pi().strain(x).norm_squared(), &rule)?;
            if !is_z_axis(&kernel) {
                notes.push(format!(
                    "kernel is {}; the closed-form rotated value is an upper bound on min 𝒢",
                    kernel.name()
                ));
            }
            Some(ClosedFormGap {
                integrals,
                min_linear: integrals.min_linear(),
                min_rotated: integrals.min_rotated(),
                margin: integrals.margin(),
                margin_volume: 4.0 * (e1 - e0),
            })
        }
        None => {
            notes.push("no closed form for these loads; values are Galerkin upper bounds".into());
            None
        }
    };

    let (min_linear_v, min_limit_v, margin) = match &closed {
        Some(c) if is_z_axis(&kernel) => (c.min_linear, c.min_rotated, c.margin),
        Some(c) => {
            let g = c.min_rotated.min(limit.result.value);
            (c.min_linear, g, c.min_linear - g)
        }
        None => (linear, limit.result.value, linear - limit.result.value),
    };

    let galerkin = GalerkinGap {
        space: options.space,
        min_linear: linear,
        min_limit: limit.result.value,
        optimal_rotation: limit.result.rotation,
        optimal_theta: limit.result.theta,
        relative_error_linear: closed.as_ref().map(|c| relative(linear, c.min_linear)),
        relative_error_limit: closed.as_ref().map(|c| relative(limit.result.value, c.min_rotated)),
        note: limit.note.clone(),
    };

    let decomposition_table = if is_z_axis(&kernel) {
        let (e, g) = match &closed {
            Some(c) => (c.min_linear, c.min_rotated),
            None => (linear, full.value(&axis_rotation(&Vec3::z(), -PI / 2.0))),
        };
        DECOMPOSITION_ANGLES
            .iter()
            .map(|&theta| {
                let value = full.value(&axis_rotation(&Vec3::z(), theta));
                let (s, c) = theta.sin_cos();
                let predicted = c * c * e + s * s * g;
                DecompositionRow { theta, value, predicted, residual: (value - predicted).abs() }
            })
            .collect()
    } else {
        notes.push("decomposition table needs a z-axis kernel".into());
        Vec::new()
    };

    let incompressible = incompressible_gap(spec, &full, &limit, sol.as_ref(), options)?;

    let spin_family_bound = if is_z_axis(&kernel) {
        let lemma = LimitProblem::new(spec, options.lemma_space, options)?;
        Some(lemma.value(&limit.result.rotation))
    } else {
        None
    };

    Ok(GapReport {
        kernel,
        min_linear: min_linear_v,
        min_limit: min_limit_v,
        optimal_theta: limit.result.theta,
        margin,
        relative_margin: margin / min_linear_v.abs().max(f64::MIN_POSITIVE),
        closed_form: closed,
        galerkin,
        incompressible,
        decomposition_table,
        spin_family_bound,
        notes,
    })
}

fn incompressible_gap(
    spec: &LoadSpec,
    full: &LimitProblem,
    limit: &LimitMinimum,
    sol: Option<&ExplicitSolution>,
    options: &LimitOptions,
) -> Result<IncompressibleGap> {
    let curl = LimitProblem::new(spec, options.incompressible_space, options)?;
    let upper = curl.value(&Mat3::identity());
    let mut penalized = Vec::new();
    for &kappa in &options.penalty_schedule {
        penalized.push(PenalizedValue { kappa, value: full.with_penalty(kappa)?.value(&Mat3::identity()) });
    }
    let (lower, rigorous) = match sol {
        Some(s) => (s.radial_integrals().min_linear(), true),
        None => (penalized.iter().map(|p| p.value).fold(full.value(&Mat3::identity()), f64::max), false),
    };

    let kernel = full.kernel().classification;
    let loads = LoadEvaluator::new(spec, options.quadrature_order)?;
    let rule = loads.volume_rule().clone();
    let candidate = |degree: usize| -> Result<f64> {
        let p = LimitProblem::new(spec, SpaceKind::AnsatzKdiv { degree2d: degree }, options)?;
        let c = p.coefficients(&limit.result.rotation);
        let u = p.space().field(c.as_slice())?;
        Ok(limit_energy(&u, &loads, &kernel, &rule)?.0)
    };

    let mut degree = options.kdiv_degree;
    let mut limit_upper = candidate(degree)?;
    let attempted = sol.is_some();
    let mut certified = attempted && limit_upper < lower;
    let mut note = if !attempted {
        "not attempted: certification needs the closed-form lower bound".to_string()
    } else if certified {
        format!("certified with divergence-free planar candidates of degree {degree}")
    } else {
        String::new()
    };
    if attempted && !certified {
        degree += 2;
        limit_upper = limit_upper.min(candidate(degree)?);
        certified = limit_upper < lower;
        note = if certified {
            format!("certified after refinement to degree {degree}")
        } else {
            "not certified at this resolution".to_string()
        };
    }
    Ok(IncompressibleGap {
        min_linear_upper: upper,
        min_linear_lower: lower,
        min_linear_lower_rigorous: rigorous,
        min_linear_penalized: penalized,
        min_limit_upper: limit_upper,
        candidate_degree: degree,
        certified,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedComparison {
    pub min_limit: f64,
    pub min_linear: f64,
    /// `min ℰ − min 𝒢`
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedCheck {
    pub rotation: Mat3,
    pub kernel: KernelClass,
    pub rotated_kernel: KernelClass,
    pub same_kernel: bool,
    pub rotated: RotatedComparison,
    pub relative_difference: f64,
    pub identity: RotatedComparison,
}

fn compare(spec: &LoadSpec, options: &LimitOptions) -> Result<(RotatedComparison, KernelClass, LimitMinimum)> {
    let problem = LimitProblem::new(spec, options.space, options)?;
    let lim = problem.minimize(options)?;
    let lin = problem.value(&Mat3::identity());
    let cmp = RotatedComparison { min_limit: lim.result.value, min_linear: lin, difference: lin - lim.result.value };
    Ok((cmp, problem.kernel().classification, lim))
}

/// Compares `min 𝒢` and `min ℰ` for the loads rotated by an optimal rotation
/// (computed when `rotation` is `None`).
pub fn rotated_no_gap_check(spec: &LoadSpec, rotation: Option<Mat3>, options: &LimitOptions) -> Result<RotatedCheck> {
    let (identity, kernel, lim) = compare(spec, options)?;
    let rotation = rotation.unwrap_or(lim.result.rotation);
    let rotated_spec = rotate_loads(spec, &rotation)?;
    let (rotated, rotated_kernel, _) = compare(&rotated_spec, options)?;
    Ok(RotatedCheck {
        rotation,
        kernel,
        rotated_kernel,
        same_kernel: kernel.same_structure(&rotated_kernel, 1e-9),
        relative_difference: relative(rotated.min_limit, rotated.min_linear),
        rotated,
        identity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonuniquenessCheck {
    pub value: f64,
    pub mirrored_value: f64,
    pub relative_difference: f64,
    pub rotation: Mat3,
    pub mirrored_rotation: Mat3,
    /// `diag(−1, −1, 1) · rotation`
    pub expected_mirrored_rotation: Mat3,
    /// `‖𝔼(û − u*)‖`
    pub strain_difference: f64,
    /// `‖𝔼(u*)‖`
    pub strain_norm: f64,
    /// `|𝒢(u* + a + Wx) − 𝒢(u*)|` for a fixed rigid displacement.
    pub rigid_shift_difference: f64,
}

/// Compares `u* = u_{−π/2}` with its mirror `û = (−u₁*, −u₂*, u₃*)`.
pub fn nonuniqueness_check(spec: &LoadSpec, options: &LimitOptions) -> Result<NonuniquenessCheck> {
    let sol = ExplicitSolution::new(spec)?;
    if spec.profile_constraints().psi_first_moment <= 0.0 {
        return Err(Error::invalid("the mirror comparison needs ∫ z psi > 0"));
    }
    let loads = LoadEvaluator::new(spec, options.quadrature_order)?;
    let report = crate::loads::compatibility_report(spec, &options.kernel)?;
    super::reduced::require_compatible(&report)?;
    let kernel = report.classification;
    let rule = loads.volume_rule().clone();
    let mirror = Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0));

    let u = sol.u_minus_half_pi();
    let hat = MirroredField { inner: &u, mirror };
    let (value, rotation) = limit_energy(&u, &loads, &kernel, &rule)?;
    let (mirrored_value, mirrored_rotation) = limit_energy(&hat, &loads, &kernel, &rule)?;
    let strain_difference =
        integrate_scalar(|x| (hat.strain(x) - u.strain(x)).norm_squared(), &rule)?.sqrt();
    let strain_norm = integrate_scalar(|x| u.strain(x).norm_squared(), &rule)?.sqrt();

    let shift = Vec3::new(0.3, -0.2, 0.5);
    let spin = skew_matrix(SkewParams::new(0.4, -0.1, 0.7));
    let shifted = crate::field::FnField {
        value: |x: &Vec3| u.value(x) + shift + spin * x,
        gradient: |x: &Vec3| u.gradient(x) + spin,
    };
    let (shifted_value, _) = limit_energy(&shifted, &loads, &kernel, &rule)?;

    Ok(NonuniquenessCheck {
        value,
        mirrored_value,
        relative_difference: relative(mirrored_value, value),
        expected_mirrored_rotation: mirror * rotation,
        rotation,
        mirrored_rotation,
        strain_difference,
        strain_norm,
        rigid_shift_difference: (shifted_value - value).abs(),
    })
}

struct MirroredField<'a, V> {
    inner: &'a V,
    mirror: Mat3,
}

impl<V: VectorField> VectorField for MirroredField<'_, V> {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.mirror * self.inner.value(x)
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.mirror * self.inner.gradient(x)
    }
}
