use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::galerkin::SpaceKind;
use crate::limit::LimitOptions;
use crate::loads::{Builtin, KernelOptions, LoadSpec};
use crate::math3::Mat3;
use crate::nonlinear::{check_schedule, NonlinearOptions};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Cylinder,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Full,
    AnsatzK,
    AnsatzKdiv,
    CurlPotential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub kind: BasisKind,
    /// Total degree (`full`, `curl_potential`) or in-plane degree (`ansatz_k`, `ansatz_kdiv`).
    pub degree: usize,
    /// Degree of the axial part of `ansatz_k`.
    pub degree1d: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { kind: BasisKind::Full, degree: 7, degree1d: 3 }
    }
}

impl BasisConfig {
    pub fn space(&self) -> SpaceKind {
        match self.kind {
            BasisKind::Full => SpaceKind::Full { degree: self.degree },
            BasisKind::AnsatzK => SpaceKind::AnsatzK { degree2d: self.degree, degree1d: self.degree1d },
            BasisKind::AnsatzKdiv => SpaceKind::AnsatzKdiv { degree2d: self.degree },
            BasisKind::CurlPotential => SpaceKind::CurlPotential { degree: self.degree },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NonlinearConfig {
    pub degree: usize,
    pub quadrature_order: usize,
    pub max_iterations: usize,
    pub max_rounds: usize,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        let d = NonlinearOptions::default();
        Self {
            degree: d.degree,
            quadrature_order: d.quadrature_order,
            max_iterations: d.max_iterations,
            max_rounds: d.max_rounds,
        }
    }
}

/// Solver tolerances and certification thresholds. All are embedded in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub classification: f64,
    pub angle: f64,
    pub gradient: f64,
    pub joint_decrease: f64,
    pub profile: f64,
    pub ode: f64,
    pub euler_lagrange: f64,
    pub biharmonic: f64,
    pub orthogonality: f64,
    /// Relative to `|min ℰ|`.
    pub decomposition: f64,
    /// Minimum of `margin / |min ℰ|`.
    pub relative_margin: f64,
    pub rotated: f64,
    pub nonuniqueness_value: f64,
    /// Minimum of `‖𝔼(û − u*)‖ / ‖𝔼(u*)‖`.
    pub nonuniqueness_strain: f64,
    /// Maximum relative gap at the last `h`.
    pub study_final_gap: f64,
    /// Minimum ratio of the rescaled strain at the last and first `h`.
    pub study_strain_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            classification: 1e-9,
            angle: 1e-10,
            gradient: 1e-8,
            joint_decrease: 1e-10,
            profile: 1e-12,
            ode: 1e-12,
            euler_lagrange: 1e-8,
            biharmonic: 1e-8,
            orthogonality: 1e-10,
            decomposition: 1e-8,
            relative_margin: 1e-3,
            rotated: 1e-6,
            nonuniqueness_value: 1e-8,
            nonuniqueness_strain: 0.1,
            study_final_gap: 0.05,
            study_strain_growth: 2.0,
        }
    }
}

/// Run configuration. Every field is optional; the defaults give the cylinder
/// preset `φ = 4r⁶ − 9r⁴ + 6r² − 1`, `ψ = β(z − ½)` with `β = 0.01`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Defaults to `ball` for the builtin ball load and `cylinder` otherwise.
    pub domain: Option<DomainName>,
    /// `φ(r)`, ascending powers.
    pub phi_coeffs: Vec<f64>,
    /// `ψ(z)`, ascending powers; `β(z − ½)` when absent.
    pub psi_coeffs: Option<Vec<f64>>,
    pub surface_pressure: Option<f64>,
    pub builtin: Option<Builtin>,
    pub basis: BasisConfig,
    pub quadrature_order: usize,
    pub kernel_samples: usize,
    pub h_schedule: Vec<f64>,
    /// `κ` of the nonlinear incompressibility penalty.
    pub penalty_kappa: f64,
    /// Penalty schedule for the penalized linear minima.
    pub penalty_schedule: Vec<f64>,
    pub beta: f64,
    /// Solve the incompressible variants in `solve-linear`, `solve-limit` and `nonlinear-study`.
    pub incompressible: bool,
    pub nonlinear: NonlinearConfig,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub multistarts: usize,
}

impl Default for Config {
    fn default() -> Self {
        let limit = LimitOptions::default();
        Self {
            domain: None,
            phi_coeffs: LoadSpec::preset(0.0).phi.coeffs().to_vec(),
            psi_coeffs: None,
            surface_pressure: None,
            builtin: None,
            basis: BasisConfig::default(),
            quadrature_order: limit.quadrature_order,
            kernel_samples: limit.kernel.samples,
            h_schedule: vec![0.2, 0.1, 0.05, 0.02],
            penalty_kappa: 1e4,
            penalty_schedule: limit.penalty_schedule,
            beta: 0.01,
            incompressible: false,
            nonlinear: NonlinearConfig::default(),
            tolerances: Tolerances::default(),
            seed: limit.seed,
            multistarts: limit.multistarts,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

impl Config {
    /// Parses JSON, reporting the path of the offending field on failure.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::invalid(format!("config field `{path}`: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::invalid("beta must be finite"));
        }
        if self.basis.degree == 0 {
            return Err(Error::invalid("basis.degree must be at least 1"));
        }
        if self.quadrature_order == 0 || self.nonlinear.quadrature_order == 0 {
            return Err(Error::invalid("quadrature orders must be at least 1"));
        }
        if self.kernel_samples == 0 || self.multistarts == 0 {
            return Err(Error::invalid("kernel_samples and multistarts must be at least 1"));
        }
        if self.nonlinear.degree == 0 {
            return Err(Error::invalid("nonlinear.degree must be at least 1"));
        }
        positive("penalty_kappa", self.penalty_kappa)?;
        for &k in &self.penalty_schedule {
            positive("penalty_schedule entry", k)?;
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.classification", t.classification),
            ("tolerances.angle", t.angle),
            ("tolerances.gradient", t.gradient),
            ("tolerances.joint_decrease", t.joint_decrease),
            ("tolerances.profile", t.profile),
            ("tolerances.ode", t.ode),
            ("tolerances.euler_lagrange", t.euler_lagrange),
            ("tolerances.biharmonic", t.biharmonic),
            ("tolerances.orthogonality", t.orthogonality),
            ("tolerances.decomposition", t.decomposition),
            ("tolerances.relative_margin", t.relative_margin),
            ("tolerances.rotated", t.rotated),
            ("tolerances.nonuniqueness_value", t.nonuniqueness_value),
            ("tolerances.nonuniqueness_strain", t.nonuniqueness_strain),
            ("tolerances.study_final_gap", t.study_final_gap),
            ("tolerances.study_strain_growth", t.study_strain_growth),
        ] {
            positive(name, v)?;
        }
        check_schedule(&self.h_schedule)?;
        self.load_spec()?.validate()
    }

    pub fn load_spec(&self) -> Result<LoadSpec> {
        let domain = match self.domain {
            Some(DomainName::Ball) => Domain::UnitBall,
            Some(DomainName::Cylinder) => Domain::unit_cylinder(),
            None if self.builtin == Some(Builtin::BallPullIn) => Domain::UnitBall,
            None => Domain::unit_cylinder(),
        };
        let psi = match &self.psi_coeffs {
            Some(c) => Poly::new(c.clone()),
            None => Poly::new(vec![-0.5 * self.beta, self.beta]),
        };
        let spec = LoadSpec {
            phi: Poly::new(self.phi_coeffs.clone()),
            psi,
            surface_pressure: self.surface_pressure,
            builtin: self.builtin,
            domain,
            frame: Mat3::identity(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn kernel_options(&self) -> KernelOptions {
        KernelOptions {
            samples: self.kernel_samples,
            tol: self.tolerances.classification,
            quadrature_order: self.quadrature_order,
        }
    }

    pub fn limit_options(&self) -> LimitOptions {
        let space = self.basis.space();
        let incompressible_space =
            if space.is_divergence_free() { space } else { SpaceKind::CurlPotential { degree: self.basis.degree } };
        LimitOptions {
            space,
            incompressible_space,
            kdiv_degree: self.basis.degree + 1,
            lemma_space: SpaceKind::AnsatzK { degree2d: self.basis.degree + 1, degree1d: self.basis.degree1d },
            quadrature_order: self.quadrature_order,
            kernel: self.kernel_options(),
            angle_tol: self.tolerances.angle,
            multistarts: self.multistarts,
            seed: self.seed,
            penalty_schedule: self.penalty_schedule.clone(),
            ..LimitOptions::default()
        }
    }

    pub fn nonlinear_options(&self) -> NonlinearOptions {
        NonlinearOptions {
            degree: self.nonlinear.degree,
            quadrature_order: self.nonlinear.quadrature_order,
            penalty: self.incompressible.then_some(self.penalty_kappa),
            max_iterations: self.nonlinear.max_iterations,
            gradient_tol: self.tolerances.gradient,
            joint_tol: self.tolerances.joint_decrease,
            max_rounds: self.nonlinear.max_rounds,
            kernel: self.kernel_options(),
            ..NonlinearOptions::default()
        }
    }
}
