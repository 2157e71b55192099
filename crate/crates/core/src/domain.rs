//! Reference configurations and their quadrature rules.
//!
//! The cylinder rule is Gauss–Legendre in `r` and `z` with a uniform
//! periodic rule in the angle. The periodic rule with `2n` nodes integrates
//! trigonometric polynomials of degree `< 2n` exactly, so a Cartesian
//! polynomial of degree `2n − 1` is integrated exactly just like in the
//! radial direction. The ball uses `r`, `μ = cos φ` and the azimuth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `{x² + y² < radius², 0 < z < height}`.
    Cylinder { radius: f64, height: f64 },
    UnitBall,
}

impl Default for Domain {
    fn default() -> Self {
        Self::unit_cylinder()
    }
}

impl Domain {
    pub const fn unit_cylinder() -> Self {
        Self::Cylinder { radius: 1.0, height: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Cylinder { radius, height } = *self {
            if !(radius > 0.0 && radius.is_finite() && height > 0.0 && height.is_finite()) {
                return Err(Error::invalid(format!(
                    "cylinder needs positive radius and height, got ({radius}, {height})"
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        match *self {
            Self::Cylinder { radius, height } => PI * radius * radius * height,
            Self::UnitBall => 4.0 * PI / 3.0,
        }
    }

    pub fn surface_area(&self) -> f64 {
        match *self {
            Self::Cylinder { radius, height } => 2.0 * PI * radius * height + 2.0 * PI * radius * radius,
            Self::UnitBall => 4.0 * PI,
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        match *self {
            Self::Cylinder { radius, height } => (Vec3::new(-radius, -radius, 0.0), Vec3::new(radius, radius, height)),
            Self::UnitBall => (Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)),
        }
    }

    /// Membership of the closure.
    pub fn contains(&self, x: &Vec3) -> bool {
        const SLACK: f64 = 1e-12;
        match *self {
            Self::Cylinder { radius, height } => {
                x.x * x.x + x.y * x.y <= radius * radius * (1.0 + SLACK) && x.z >= -SLACK && x.z <= height + SLACK
            }
            Self::UnitBall => x.norm_squared() <= 1.0 + SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<Vec3>,
    pub weights: Vec<f64>,
    /// Outward unit normals, present for surface rules.
    pub normals: Option<Vec<Vec3>>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|wi| wi * half).collect())
}

/// Uniform periodic angle rule with `m` nodes.
fn periodic(m: usize) -> (Vec<f64>, f64) {
    let step = 2.0 * PI / m as f64;
    ((0..m).map(|k| (k as f64 + 0.5) * step).collect(), step)
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::invalid("quadrature order must be at least 1"));
    }
    Ok(())
}

/// Volume rule exact for Cartesian polynomials of degree `≤ 2·order − 1`.
pub fn volume_quadrature(domain: &Domain, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    domain.validate()?;
    let (angles, dtheta) = periodic(2 * order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match *domain {
        Domain::Cylinder { radius, height } => {
            // the Jacobian r raises the radial degree by one
            let (rs, wr) = gauss_legendre_on(order + 1, 0.0, radius);
            let (zs, wz) = gauss_legendre_on(order, 0.0, height);
            for (&z, &wzk) in zs.iter().zip(&wz) {
                for (&r, &wri) in rs.iter().zip(&wr) {
                    for &t in &angles {
                        nodes.push(Vec3::new(r * t.cos(), r * t.sin(), z));
                        weights.push(wri * r * dtheta * wzk);
                    }
                }
            }
        }
        Domain::UnitBall => {
            let (rs, wr) = gauss_legendre_on(order + 1, 0.0, 1.0);
            let (mus, wmu) = gauss_legendre(order);
            for (&mu, &wm) in mus.iter().zip(&wmu) {
                let s = (1.0 - mu * mu).sqrt();
                for (&r, &wri) in rs.iter().zip(&wr) {
                    for &t in &angles {
                        nodes.push(Vec3::new(r * s * t.cos(), r * s * t.sin(), r * mu));
                        weights.push(wri * r * r * wm * dtheta);
                    }
                }
            }
        }
    }
    Ok(QuadratureRule { nodes, weights, normals: None })
}

/// Surface rule on the lateral wall and both caps of a cylinder.
pub fn surface_quadrature(domain: &Domain, order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    domain.validate()?;
    let Domain::Cylinder { radius, height } = *domain else {
        return Err(Error::Unsupported("surface quadrature is only implemented for the cylinder".into()));
    };
    let (angles, dtheta) = periodic(2 * order);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut normals = Vec::new();
    let (zs, wz) = gauss_legendre_on(order, 0.0, height);
    for (&z, &wzk) in zs.iter().zip(&wz) {
        for &t in &angles {
            let n = Vec3::new(t.cos(), t.sin(), 0.0);
            nodes.push(Vec3::new(radius * n.x, radius * n.y, z));
            weights.push(radius * dtheta * wzk);
            normals.push(n);
        }
    }
    let (rs, wr) = gauss_legendre_on(order + 1, 0.0, radius);
    for (z, nz) in [(0.0, -1.0), (height, 1.0)] {
        for (&r, &wri) in rs.iter().zip(&wr) {
            for &t in &angles {
                nodes.push(Vec3::new(r * t.cos(), r * t.sin(), z));
                weights.push(wri * r * dtheta);
                normals.push(Vec3::new(0.0, 0.0, nz));
            }
        }
    }
    Ok(QuadratureRule { nodes, weights, normals: Some(normals) })
}

/// Fixed-shape pairwise summation; the result does not depend on thread count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `Σ wᵢ field(xᵢ)`, rejecting non-finite field values.
pub fn integrate_scalar<F>(field: F, rule: &QuadratureRule) -> Result<f64>
where
    F: Fn(&Vec3) -> f64 + Sync,
{
    let terms: Vec<f64> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(x, w)| {
            let v = field(x);
            if v.is_finite() {
                Ok(w * v)
            } else {
                Err(Error::NonFinite { value: v, node: [x.x, x.y, x.z] })
            }
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms))
}

/// Componentwise version of [`integrate_scalar`] for vector fields.
pub fn integrate_vector<F>(field: F, rule: &QuadratureRule) -> Result<Vec3>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    let values: Vec<Vec3> = rule
        .nodes
        .par_iter()
        .map(|x| {
            let v = field(x);
            if v.iter().all(|c| c.is_finite()) {
                Ok(v)
            } else {
                let bad = v.iter().copied().find(|c| !c.is_finite()).unwrap_or(f64::NAN);
                Err(Error::NonFinite { value: bad, node: [x.x, x.y, x.z] })
            }
        })
        .collect::<Result<_>>()?;
    let mut out = Vec3::zeros();
    for c in 0..3 {
        let terms: Vec<f64> = values.iter().zip(&rule.weights).map(|(v, w)| w * v[c]).collect();
        out[c] = pairwise_sum(&terms);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            for k in 0..2 * n {
                let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((approx - exact).abs() < 1e-13, "n={n} k={k}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn cylinder_volume_examples() {
        let rule = volume_quadrature(&Domain::unit_cylinder(), 16).unwrap();
        assert_relative_eq!(integrate_scalar(|_| 1.0, &rule).unwrap(), PI, epsilon = 1e-13);
        assert_relative_eq!(integrate_scalar(|x| x.z, &rule).unwrap(), PI / 2.0, epsilon = 1e-13);
        assert_relative_eq!(integrate_scalar(|x| x.x * x.x + x.y * x.y, &rule).unwrap(), PI / 2.0, epsilon = 1e-13);
        assert_relative_eq!(integrate_scalar(|x| x.z * (x.z - 1.0), &rule).unwrap(), -PI / 6.0, epsilon = 1e-13);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn ball_volume() {
        let rule = volume_quadrature(&Domain::UnitBall, 16).unwrap();
        assert_relative_eq!(rule.total_weight(), 4.0 * PI / 3.0, epsilon = 1e-13);
        // ∫ x² over the ball = 4π/15
        assert_relative_eq!(integrate_scalar(|x| x.x * x.x, &rule).unwrap(), 4.0 * PI / 15.0, epsilon = 1e-13);
    }

    #[test]
    fn cylinder_surface_examples() {
        let rule = surface_quadrature(&Domain::unit_cylinder(), 16).unwrap();
        assert_relative_eq!(rule.total_weight(), 4.0 * PI, epsilon = 1e-13);
        let normals = rule.normals.clone().unwrap();
        let mut n_int = Vec3::zeros();
        let mut flux = 0.0;
        for ((x, n), w) in rule.nodes.iter().zip(&normals).zip(&rule.weights) {
            n_int += n * *w;
            flux += w * n.dot(x);
        }
        assert!(n_int.norm() < 1e-13);
        assert_relative_eq!(flux, 3.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn ball_surface_is_unsupported() {
        assert!(matches!(surface_quadrature(&Domain::UnitBall, 4), Err(Error::Unsupported(_))));
        assert!(volume_quadrature(&Domain::unit_cylinder(), 0).is_err());
    }

    #[test]
    fn non_finite_reports_node() {
        let rule = volume_quadrature(&Domain::unit_cylinder(), 2).unwrap();
        let err = integrate_scalar(|x| if x.z > 0.5 { f64::NAN } else { 1.0 }, &rule).unwrap_err();
        match err {
            Error::NonFinite { node, .. } => assert!(node[2] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn order_is_exact_up_to_2n_minus_1() {
        let n = 4;
        let rule = volume_quadrature(&Domain::unit_cylinder(), n).unwrap();
        // ∫ x⁶ over unit disk × [0,1] = 2π∫r⁷dr · (5/16) = 5π/64
        let got = integrate_scalar(|x| x.x.powi(6), &rule).unwrap();
        assert_relative_eq!(got, 5.0 * PI / 64.0, epsilon = 1e-14);
        let got = integrate_scalar(|x| x.z.powi(7), &rule).unwrap();
        assert_relative_eq!(got, PI / 8.0, epsilon = 1e-14);
    }
}
