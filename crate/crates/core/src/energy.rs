//! Kirchhoff–Saint-Venant stored energy `W(F) = |FᵀF − I|²` and its
//! quadratic form at the identity, `Q(F) = 4|sym F|²`.

use serde::{Deserialize, Serialize};

use crate::math3::{sym, Mat3};

/// Trace threshold of the incompressible quadratic form.
pub const TRACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyKind {
    Ksv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub kind: EnergyKind,
    pub quadratic_scale: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self { kind: EnergyKind::Ksv, quadratic_scale: 4.0 }
    }
}

impl EnergyModel {
    pub fn density(&self, f: &Mat3) -> f64 {
        density(f)
    }

    pub fn density_gradient(&self, f: &Mat3) -> Mat3 {
        density_gradient(f)
    }

    pub fn quadratic_form(&self, f: &Mat3) -> f64 {
        self.quadratic_scale * sym(f).norm_squared()
    }

    pub fn quadratic_form_incompressible(&self, f: &Mat3) -> f64 {
        if f.trace().abs() < TRACE_TOL {
            self.quadratic_form(f)
        } else {
            f64::INFINITY
        }
    }
}

pub fn density(f: &Mat3) -> f64 {
    (f.transpose() * f - Mat3::identity()).norm_squared()
}

/// `∂W/∂F = 4F(FᵀF − I)`.
pub fn density_gradient(f: &Mat3) -> Mat3 {
    f * (f.transpose() * f - Mat3::identity()) * 4.0
}

pub fn quadratic_form(f: &Mat3) -> f64 {
    EnergyModel::default().quadratic_form(f)
}

/// `Q(F)` when `tr F = 0`, `+∞` otherwise.
pub fn quadratic_form_incompressible(f: &Mat3) -> f64 {
    EnergyModel::default().quadratic_form_incompressible(f)
}

/// `|h⁻² W(I + hB) − Q(sym B)|`.
pub fn taylor_residual(b: &Mat3, h: f64) -> f64 {
    let f = Mat3::identity() + b * h;
    (density(&f) / (h * h) - quadratic_form(&sym(b))).abs()
}
