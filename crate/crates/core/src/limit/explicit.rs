//! Closed-form minimizers on the unit cylinder.
//!
//! With `η` solving `r²η″ + rη′ − η = −r²φ′/8`, `η(0) = η′(1) = 0`, and
//! `Ψ(z) = −⅛ ∫₀^z ∫₀^s ψ`, the fields
//!
//! ```text
//! grad(x) = (η/r)(x, y, 0)      rot(x) = (2η/r)(y, −x, 0)      axial(x) = (0, 0, Ψ(z))
//! u_θ = cosθ · grad − sinθ · rot + axial
//! ```
//! minimize `∫Q(𝔼u) − L(R_θ u)` for the z-axis rotations `R_θ`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain::{gauss_legendre, volume_quadrature, Domain};
use crate::error::{Error, Result};
use crate::field::{fd_divergence, VectorField};
use crate::loads::LoadSpec;
use crate::math3::{ddot, Mat3, Vec3};
use crate::poly::Poly;

/// Tolerance on the profile conditions for `φ` and `ψ`.
pub const PROFILE_TOL: f64 = 1e-12;

/// `η*(r) = −rφ(r)/16 + (1/16r) ∫₀^r t²φ′(t) dt`.
pub fn eta_star(phi: &Poly) -> Result<Poly> {
    let spec = LoadSpec { phi: phi.clone(), ..LoadSpec::zero() };
    let c = spec.profile_constraints();
    if !c.radial_ok(PROFILE_TOL) {
        return Err(Error::invalid(format!(
            "radial profile violates phi(1) = phi'(1) = ∫r²phi' = 0: ({:e}, {:e}, {:e})",
            c.phi_at_one, c.phi_prime_at_one, c.radial_moment
        )));
    }
    let moment = phi.deriv().shift(2).antiderivative();
    Ok(phi.shift(1).scale(-1.0 / 16.0).add(&moment.div_by_x().scale(1.0 / 16.0)))
}

/// `max |r²η″ + rη′ − η + r²φ′/8|` over `r_grid`.
pub fn ode_residual(eta: &Poly, phi: &Poly, r_grid: &[f64]) -> f64 {
    let d1 = eta.deriv();
    let d2 = d1.deriv();
    let dphi = phi.deriv();
    r_grid
        .iter()
        .map(|&r| (r * r * d2.eval(r) + r * d1.eval(r) - eta.eval(r) + r * r * dphi.eval(r) / 8.0).abs())
        .fold(0.0, f64::max)
}

/// `Ψ(z) = −⅛ ∫₀^z ∫₀^s ψ(t) dt ds`.
pub fn psi_potential(psi: &Poly) -> Poly {
    psi.antiderivative().antiderivative().scale(-1.0 / 8.0)
}

/// `max |8Δ²Φ + Δφ|` at planar points, where `Φ′ = η` and Δ is the planar Laplacian.
pub fn biharmonic_residual(eta: &Poly, phi: &Poly, points: &[(f64, f64)]) -> f64 {
    // ΔΦ = η′ + η/r =: g, Δ²Φ = g″ + g′/r
    let g = eta.deriv().add(&eta.div_by_x());
    let (g1, g2) = (g.deriv(), g.deriv().deriv());
    let (p1, p2) = (phi.deriv(), phi.deriv().deriv());
    points
        .iter()
        .map(|&(x, y)| {
            let r = (x * x + y * y).sqrt();
            let bi = g2.eval(r) + g1.eval(r) / r;
            let lap_phi = p2.eval(r) + p1.eval(r) / r;
            (8.0 * bi + lap_phi).abs()
        })
        .fold(0.0, f64::max)
}

/// Strain-energy integrals of the three building blocks over the unit cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialIntegrals {
    /// `∫|𝔼(grad)|²`
    pub grad: f64,
    /// `∫|𝔼(rot)|²`
    pub rot: f64,
    /// `∫|𝔼(axial)|²`
    pub axial: f64,
}

impl RadialIntegrals {
    /// `min ℰ = −4(∫|𝔼(grad)|² + ∫|𝔼(axial)|²)`.
    pub fn min_linear(&self) -> f64 {
        -4.0 * (self.grad + self.axial)
    }

    /// `𝒢_{−π/2}(u_{−π/2}) = −4(∫|𝔼(rot)|² + ∫|𝔼(axial)|²)`.
    pub fn min_rotated(&self) -> f64 {
        -4.0 * (self.rot + self.axial)
    }

    /// `𝒢_θ(u_θ) = cos²θ min ℰ + sin²θ 𝒢_{−π/2}(u_{−π/2})`.
    pub fn family_value(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        c * c * self.min_linear() + s * s * self.min_rotated()
    }

    /// `min ℰ − 𝒢_{−π/2}(u_{−π/2}) = 4(∫|𝔼(rot)|² − ∫|𝔼(grad)|²)`.
    pub fn margin(&self) -> f64 {
        4.0 * (self.rot - self.grad)
    }
}

/// The explicit minimizers for polynomial profiles on the unit cylinder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplicitSolution {
    pub phi: Poly,
    pub psi: Poly,
    pub eta: Poly,
    /// `η/r`
    pub eta_over_r: Poly,
    #[serde(rename = "psi_potential")]
    pub axial: Poly,
}

impl ExplicitSolution {
    pub fn new(spec: &LoadSpec) -> Result<Self> {
        if spec.domain != Domain::unit_cylinder() || spec.builtin.is_some() || spec.has_surface_load() {
            return Err(Error::Unsupported(
                "closed-form minimizers need body-force profiles on the unit cylinder".into(),
            ));
        }
        if (spec.frame - Mat3::identity()).norm() > 1e-14 {
            return Err(Error::Unsupported("closed-form minimizers are for unrotated loads".into()));
        }
        let c = spec.profile_constraints();
        if !c.axial_ok(PROFILE_TOL) {
            return Err(Error::invalid(format!(
                "axial profile violates ∫psi = 0, ∫z psi ≥ 0: ({:e}, {:e})",
                c.psi_mean, c.psi_first_moment
            )));
        }
        let eta = eta_star(&spec.phi)?;
        Ok(Self {
            phi: spec.phi.clone(),
            psi: spec.psi.clone(),
            eta_over_r: eta.div_by_x(),
            eta,
            axial: psi_potential(&spec.psi),
        })
    }

    /// `u_θ`.
    pub fn field(&self, theta: f64) -> ExplicitField<'_> {
        ExplicitField { sol: self, cos: theta.cos(), sin: theta.sin(), axial: 1.0 }
    }

    pub fn u0(&self) -> ExplicitField<'_> {
        ExplicitField { sol: self, cos: 1.0, sin: 0.0, axial: 1.0 }
    }

    /// `u_{−π/2} = rot + axial`.
    pub fn u_minus_half_pi(&self) -> ExplicitField<'_> {
        ExplicitField { sol: self, cos: 0.0, sin: -1.0, axial: 1.0 }
    }

    /// `k(r) = η/r`, `k′(r)`, `k′(r)/r`.
    fn radial(&self, r: f64) -> (f64, f64, f64) {
        let dk = self.eta_over_r.deriv();
        let dk_over_r = if dk.coeff(0) == 0.0 { dk.div_by_x().eval(r) } else { dk.eval(r) / r };
        (self.eta_over_r.eval(r), dk.eval(r), dk_over_r)
    }

    /// `g′ = η″ + η′/r − η/r²`, the radial factor of `div 𝔼` for both planar parts.
    fn strain_divergence_factor(&self, r: f64) -> f64 {
        let g = self.eta.deriv().add(&self.eta_over_r);
        g.deriv().eval(r)
    }

    /// Analytic `div 𝔼(u_θ)`.
    pub fn strain_divergence(&self, theta: f64, x: &Vec3) -> Vec3 {
        let r = (x.x * x.x + x.y * x.y).sqrt();
        let (s, c) = theta.sin_cos();
        let planar = if r > 0.0 {
            let gp = self.strain_divergence_factor(r) / r;
            Vec3::new(x.x, x.y, 0.0) * (c * gp) - Vec3::new(x.y, -x.x, 0.0) * (s * gp)
        } else {
            Vec3::zeros()
        };
        planar + Vec3::new(0.0, 0.0, self.axial.deriv().deriv().eval(x.z))
    }

    /// The three strain-energy integrals by Gauss–Legendre quadrature in `r` and `z`.
    pub fn radial_integrals(&self) -> RadialIntegrals {
        let n = (self.eta.degree() + self.axial.degree() + 4).max(8);
        let (x, w) = gauss_legendre(n);
        let deta = self.eta.deriv();
        let dpsi = self.axial.deriv();
        let (mut grad, mut rot, mut axial) = (0.0, 0.0, 0.0);
        for (t, wt) in x.iter().zip(&w) {
            let r = 0.5 * (t + 1.0);
            let wr = 0.5 * wt;
            let (e1, k) = (deta.eval(r), self.eta_over_r.eval(r));
            grad += wr * r * (e1 * e1 + k * k);
            rot += wr * r * 2.0 * (e1 - k).powi(2);
            axial += wr * dpsi.eval(r).powi(2);
        }
        RadialIntegrals { grad: 2.0 * PI * grad, rot: 2.0 * PI * rot, axial: PI * axial }
    }
}

/// `u_θ` as a [`VectorField`].
#[derive(Clone, Copy)]
pub struct ExplicitField<'a> {
    sol: &'a ExplicitSolution,
    cos: f64,
    sin: f64,
    axial: f64,
}

impl ExplicitField<'_> {
    pub fn solution(&self) -> &ExplicitSolution {
        self.sol
    }
}

impl VectorField for ExplicitField<'_> {
    fn value(&self, x: &Vec3) -> Vec3 {
        let k = self.sol.eta_over_r.eval((x.x * x.x + x.y * x.y).sqrt());
        let grad = Vec3::new(k * x.x, k * x.y, 0.0);
        let rot = Vec3::new(2.0 * k * x.y, -2.0 * k * x.x, 0.0);
        grad * self.cos - rot * self.sin + Vec3::new(0.0, 0.0, self.axial * self.sol.axial.eval(x.z))
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        let r = (x.x * x.x + x.y * x.y).sqrt();
        let (k, _, q) = self.sol.radial(r);
        let (xx, xy, yy) = (q * x.x * x.x, q * x.x * x.y, q * x.y * x.y);
        let grad = Mat3::new(k + xx, xy, 0.0, xy, k + yy, 0.0, 0.0, 0.0, 0.0);
        let rot = Mat3::new(2.0 * xy, 2.0 * (yy + k), 0.0, -2.0 * (xx + k), -2.0 * xy, 0.0, 0.0, 0.0, 0.0);
        let mut g = grad * self.cos - rot * self.sin;
        g[(2, 2)] = self.axial * self.sol.axial.deriv().eval(x.z);
        g
    }
}

/// Residuals of the closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitResiduals {
    pub ode: f64,
    pub eta_at_zero: f64,
    pub eta_prime_at_one: f64,
    /// interior `max |−8 div 𝔼(u₀) − f|`, finite differences of the analytic strain
    pub euler_lagrange_interior: f64,
    /// same with the analytic divergence
    pub euler_lagrange_analytic: f64,
    /// `max |𝔼(u₀)n|` on the lateral wall and caps
    pub euler_lagrange_boundary: f64,
    pub biharmonic: f64,
    /// `∫ 𝔼(u₀):𝔼(u_{−π/2})`; equals `∫|𝔼(axial)|²` because both fields share the axial part
    pub orthogonality: f64,
    /// `∫ 𝔼(grad):𝔼(rot)`
    pub planar_orthogonality: f64,
    /// `∫|𝔼(axial)|²`
    pub axial_energy: f64,
}

/// Evaluates every residual on deterministic sample grids.
pub fn explicit_residuals(sol: &ExplicitSolution, spec: &LoadSpec, quadrature_order: usize) -> Result<ExplicitResiduals> {
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
    let ode = ode_residual(&sol.eta, &sol.phi, &grid);

    let u0 = sol.u0();
    let h = 1e-3;
    let mut interior = Vec::new();
    for i in 0..12 {
        let r = 0.02 + 0.97 * i as f64 / 11.0;
        for j in 0..8 {
            let t = 2.0 * PI * j as f64 / 8.0 + 0.1;
            for k in 0..7 {
                let z = 0.01 + 0.98 * k as f64 / 6.0;
                interior.push(Vec3::new(r * t.cos(), r * t.sin(), z));
            }
        }
    }
    let mut el_fd: f64 = 0.0;
    let mut el_an: f64 = 0.0;
    for x in &interior {
        let f = spec.body_force(x);
        let div_fd = fd_divergence(|y| u0.strain(y), x, h);
        el_fd = el_fd.max((-8.0 * div_fd - f).amax());
        el_an = el_an.max((-8.0 * sol.strain_divergence(0.0, x) - f).amax());
    }

    let mut boundary: f64 = 0.0;
    for j in 0..32 {
        let t = 2.0 * PI * j as f64 / 32.0;
        let n = Vec3::new(t.cos(), t.sin(), 0.0);
        for k in 0..=10 {
            let x = Vec3::new(n.x, n.y, k as f64 / 10.0);
            boundary = boundary.max((u0.strain(&x) * n).amax());
        }
        for i in 0..=10 {
            let r = i as f64 / 10.0;
            for (z, nz) in [(0.0, -1.0), (1.0, 1.0)] {
                let x = Vec3::new(r * t.cos(), r * t.sin(), z);
                boundary = boundary.max((u0.strain(&x) * Vec3::new(0.0, 0.0, nz)).amax());
            }
        }
    }

    let planar: Vec<(f64, f64)> = (1..=20)
        .flat_map(|i| {
            let r = i as f64 / 20.0;
            (0..6).map(move |j| {
                let t = PI * j as f64 / 3.0 + 0.2;
                (r * t.cos(), r * t.sin())
            })
        })
        .collect();
    let biharmonic = biharmonic_residual(&sol.eta, &sol.phi, &planar);

    let rule = volume_quadrature(&Domain::unit_cylinder(), quadrature_order)?;
    let u1 = sol.u_minus_half_pi();
    let orthogonality = crate::domain::integrate_scalar(|x| ddot(&u0.strain(x), &u1.strain(x)), &rule)?;
    let grad = ExplicitField { sol, cos: 1.0, sin: 0.0, axial: 0.0 };
    let rot = ExplicitField { sol, cos: 0.0, sin: -1.0, axial: 0.0 };
    let planar_orthogonality = crate::domain::integrate_scalar(|x| ddot(&grad.strain(x), &rot.strain(x)), &rule)?;

    Ok(ExplicitResiduals {
        ode,
        eta_at_zero: sol.eta.eval(0.0),
        eta_prime_at_one: sol.eta.deriv().eval(1.0),
        euler_lagrange_interior: el_fd,
        euler_lagrange_analytic: el_an,
        euler_lagrange_boundary: boundary,
        biharmonic,
        orthogonality,
        planar_orthogonality,
        axial_energy: sol.radial_integrals().axial,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::integrate_scalar;
    use crate::field::fd_gradient;
    use crate::loads::LoadEvaluator;
    use crate::math3::{rodrigues, skew_matrix, SkewParams};
    use approx::assert_relative_eq;

    fn preset_phi() -> Poly {
        LoadSpec::preset(0.01).phi
    }

    #[test]
    fn eta_star_closed_form() {
        let eta = eta_star(&preset_phi()).unwrap();
        // r(1 − r²)³/16 = (r − 3r³ + 3r⁵ − r⁷)/16
        let expected = Poly::new(vec![0.0, 1.0, 0.0, -3.0, 0.0, 3.0, 0.0, -1.0]).scale(1.0 / 16.0);
        for (a, b) in eta.coeffs().iter().zip(expected.coeffs()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(eta.eval(0.0), 0.0);
        assert!(eta.deriv().eval(1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_star_rejects_bad_profile() {
        assert!(eta_star(&Poly::new(vec![1.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn ode_residual_examples() {
        let phi = preset_phi();
        let eta = eta_star(&phi).unwrap();
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
        assert!(ode_residual(&eta, &phi, &grid) < 1e-12);
        let perturbed = eta.add(&Poly::new(vec![0.0, 0.0, 0.01]));
        assert!(ode_residual(&perturbed, &phi, &grid) > 1e-3);
        assert_eq!(ode_residual(&Poly::zero(), &Poly::zero(), &grid), 0.0);
    }

    #[test]
    fn psi_potential_boundary_slopes() {
        let psi = LoadSpec::preset(0.01).psi;
        let p = psi_potential(&psi);
        assert_eq!(p.deriv().eval(0.0), 0.0);
        assert!(p.deriv().eval(1.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sol = ExplicitSolution::new(&LoadSpec::preset(0.3)).unwrap();
        for theta in [0.0, -PI / 2.0, 0.7] {
            let u = sol.field(theta);
            for x in [Vec3::new(0.3, -0.2, 0.4), Vec3::new(-0.6, 0.55, 0.9)] {
                let fd = fd_gradient(|y| u.value(y), &x, 1e-3);
                assert!((fd - u.gradient(&x)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn residuals_are_small() {
        let spec = LoadSpec::preset(0.01);
        let sol = ExplicitSolution::new(&spec).unwrap();
        let r = explicit_residuals(&sol, &spec, 16).unwrap();
        assert!(r.ode < 1e-12, "{r:?}");
        assert!(r.euler_lagrange_interior < 1e-8, "{r:?}");
        assert!(r.euler_lagrange_analytic < 1e-12, "{r:?}");
        assert!(r.euler_lagrange_boundary < 1e-8, "{r:?}");
        assert!(r.biharmonic < 1e-8, "{r:?}");
        assert!(r.planar_orthogonality.abs() < 1e-12, "{r:?}");
        assert!((r.orthogonality - r.axial_energy).abs() < 1e-15, "{r:?}");
        // π ∫ Ψ′² with Ψ′ = −β(z² − z)/16
        let beta: f64 = 0.01;
        assert!((r.axial_energy - PI * beta * beta / 7680.0).abs() < 1e-18, "{r:?}");
    }

    #[test]
    fn radial_integrals_match_volume_quadrature() {
        let spec = LoadSpec::preset(0.01);
        let sol = ExplicitSolution::new(&spec).unwrap();
        let ri = sol.radial_integrals();
        let rule = volume_quadrature(&Domain::unit_cylinder(), 16).unwrap();
        let u0 = sol.u0();
        let u1 = sol.u_minus_half_pi();
        let e0 = integrate_scalar(|x| u0.strain(x).norm_squared(), &rule).unwrap();
        let e1 = integrate_scalar(|x| u1.strain(x).norm_squared(), &rule).unwrap();
        assert_relative_eq!(e0, ri.grad + ri.axial, max_relative = 1e-12);
        assert_relative_eq!(e1, ri.rot + ri.axial, max_relative = 1e-12);
        // frozen oracle values
        assert_relative_eq!(ri.grad, 0.0042074902, max_relative = 1e-8);
        assert_relative_eq!(ri.rot, 2.0 * ri.grad, max_relative = 1e-12);
        assert_relative_eq!(ri.min_linear(), -0.0168301243, max_relative = 1e-8);
        assert_relative_eq!(ri.min_rotated(), -0.0336600849, max_relative = 1e-8);
    }

    #[test]
    fn family_value_is_first_variation_value() {
        // 𝒢_θ(u_θ) = ∫Q − L(R_θ u_θ) must equal −4∫|𝔼(u_θ)|²
        let spec = LoadSpec::preset(0.01);
        let sol = ExplicitSolution::new(&spec).unwrap();
        let loads = LoadEvaluator::new(&spec, 16).unwrap();
        let rule = loads.volume_rule().clone();
        let wz = skew_matrix(SkewParams::new(1.0, 0.0, 0.0));
        for theta in [-PI / 2.0, -PI / 4.0, 0.0, PI / 4.0, PI / 2.0] {
            let u = sol.field(theta);
            let r = rodrigues(&wz, theta).unwrap();
            let q = integrate_scalar(|x| 4.0 * u.strain(x).norm_squared(), &rule).unwrap();
            let work = ddot(&r, &loads.work_matrix(|x| u.value(x)).unwrap());
            let value = q - work;
            assert_relative_eq!(value, -q, max_relative = 1e-10);
            assert_relative_eq!(value, sol.radial_integrals().family_value(theta), max_relative = 1e-10);
        }
    }
}
