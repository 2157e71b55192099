//! Small-matrix algebra on ℝ³: skew generators, rotation parameterizations,
//! distance to SO(3) and the coercivity profile `g_p`.
//!
//! Sign convention for skew matrices: the parameters `(a, b, c)` build
//!
//! ```text
//!     |  0   a   b |
//! W = | -a   0   c |
//!     | -b  -c   0 |
//! ```
//!
//! which acts as `W x = x × ω` with the axis vector `ω = (c, -b, a)`.
//! With `|ω| = 1` (equivalently `|W|² = 2`) the Euler–Rodrigues matrix
//! `I + sinθ W + (1 − cosθ) W²` is the right-handed rotation by `−θ`
//! about `ω`; in particular `a = 1` reproduces the z-axis family
//! `R_θ = [[cosθ, sinθ, 0], [−sinθ, cosθ, 0], [0, 0, 1]]`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance used when checking the `|W|² = 2` normalization and skew symmetry.
pub const RODRIGUES_TOL: f64 = 1e-12;

/// The three free entries of a skew-symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SkewParams {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// Parameters whose matrix satisfies `W x = x × axis`.
    pub fn from_axis(axis: &Vec3) -> Self {
        Self { a: axis.z, b: -axis.y, c: axis.x }
    }

    /// Reads the parameters off the upper triangle; the lower triangle is ignored.
    pub fn from_matrix(w: &Mat3) -> Self {
        Self { a: w[(0, 1)], b: w[(0, 2)], c: w[(1, 2)] }
    }

    pub fn axis(&self) -> Vec3 {
        Vec3::new(self.c, -self.b, self.a)
    }

    pub fn matrix(&self) -> Mat3 {
        skew_matrix(*self)
    }

    pub fn norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c).sqrt()
    }
}

pub fn skew_matrix(p: SkewParams) -> Mat3 {
    Mat3::new(0.0, p.a, p.b, -p.a, 0.0, p.c, -p.b, -p.c, 0.0)
}

/// Cross-product matrix `[v]×`, so that `[v]× x = v × x`.
pub fn cross_matrix(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn sym(f: &Mat3) -> Mat3 {
    (f + f.transpose()) * 0.5
}

pub fn skew(f: &Mat3) -> Mat3 {
    (f - f.transpose()) * 0.5
}

/// Frobenius inner product `A : B`.
pub fn ddot(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

/// Unit axis plus angle, right-handed: `to_matrix` rotates by `theta` about `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    axis: Vec3,
    theta: f64,
}

impl AxisAngle {
    /// Normalizes `axis` and wraps `theta` into `[−π, π]`.
    pub fn new(axis: Vec3, theta: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) || !theta.is_finite() {
            return Err(Error::invalid("axis-angle needs a finite nonzero axis and finite angle"));
        }
        Ok(Self { axis: axis / n, theta: wrap_angle(theta) })
    }

    pub fn identity() -> Self {
        Self { axis: Vec3::z(), theta: 0.0 }
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn to_matrix(&self) -> Mat3 {
        exp_so3(&(self.axis * self.theta))
    }

    /// Inverse of [`AxisAngle::to_matrix`] for a proper rotation.
    pub fn from_matrix(r: &Mat3) -> Self {
        let w = log_so3(r);
        let theta = w.norm();
        if theta < 1e-300 {
            return Self::identity();
        }
        Self { axis: w / theta, theta }
    }
}

/// Maps an angle into `[−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut t = theta.rem_euclid(two_pi);
    if t > std::f64::consts::PI {
        t -= two_pi;
    }
    t
}

/// Euler–Rodrigues formula `R = I + sinθ W + (1 − cosθ) W²` for a skew `W`
/// normalized to `|W|² = 2`.
pub fn rodrigues(w: &Mat3, theta: f64) -> Result<Mat3> {
    let asym = (w + w.transpose()).norm();
    if asym > RODRIGUES_TOL {
        return Err(Error::invalid(format!("rodrigues: W is not skew (|W + Wᵀ| = {asym:e})")));
    }
    let n2 = w.norm_squared();
    if (n2 - 2.0).abs() > RODRIGUES_TOL {
        return Err(Error::invalid(format!("rodrigues: expected |W|² = 2, got {n2}")));
    }
    Ok(rodrigues_unchecked(w, theta))
}

pub(crate) fn rodrigues_unchecked(w: &Mat3, theta: f64) -> Mat3 {
    Mat3::identity() + w * theta.sin() + w * w * (1.0 - theta.cos())
}

/// Exponential map for an unnormalized rotation vector (right-handed).
pub fn exp_so3(omega: &Vec3) -> Mat3 {
    let theta = omega.norm();
    let k = cross_matrix(omega);
    if theta < 1e-8 {
        // second-order series keeps orthogonality to ~θ³
        return Mat3::identity() + k + k * k * 0.5;
    }
    let k = k / theta;
    Mat3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos())
}

/// Rotation vector of a proper rotation, angle in `[0, π]`.
pub fn log_so3(r: &Mat3) -> Vec3 {
    let cos_t = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let v = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let theta = (0.5 * v.norm()).atan2(cos_t);
    if theta < 1e-6 {
        return v * 0.5;
    }
    if std::f64::consts::PI - theta < 1e-3 {
        // near π the antisymmetric part vanishes; sym R − cosθ I = (1 − cosθ) a aᵀ
        let b = (sym(r) - Mat3::identity() * cos_t) / (1.0 - cos_t);
        let mut best = 0;
        for i in 1..3 {
            if b[(i, i)] > b[(best, best)] {
                best = i;
            }
        }
        let mut axis = b.column(best).into_owned();
        axis /= axis.norm();
        if axis.dot(&v) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    v * (theta / (2.0 * theta.sin()))
}

/// Closest rotation to `f` in the Frobenius norm and the distance `|f − R|`.
pub fn nearest_rotation(f: &Mat3) -> (Mat3, f64) {
    let svd = f.svd(true, true);
    let mut u = svd.u.expect("svd requested U");
    let v_t = svd.v_t.expect("svd requested Vᵀ");
    if (u * v_t).determinant() < 0.0 {
        let s = &svd.singular_values;
        let mut k = 0;
        for i in 1..3 {
            if s[i] < s[k] {
                k = i;
            }
        }
        let mut col = u.column_mut(k);
        col.neg_mut();
    }
    let r = u * v_t;
    let dist = (f - r).norm();
    (r, dist)
}

/// Distance from `f` to SO(3).
pub fn dist_so3(f: &Mat3) -> f64 {
    nearest_rotation(f).1
}

fn check_gp_args(t: f64, p: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("g_p: t must be ≥ 0, got {t}")));
    }
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::invalid(format!("g_p: p must lie in (1, 2], got {p}")));
    }
    Ok(())
}

/// `t²` on `[0, 1]`, `(2/p) tᵖ − 2/p + 1` beyond.
pub fn g_p(t: f64, p: f64) -> Result<f64> {
    check_gp_args(t, p)?;
    Ok(g_p_unchecked(t, p))
}

pub(crate) fn g_p_unchecked(t: f64, p: f64) -> f64 {
    if t <= 1.0 {
        t * t
    } else {
        2.0 * t.powf(p) / p - 2.0 / p + 1.0
    }
}

/// Derivative of [`g_p`] in `t`.
pub fn g_p_derivative(t: f64, p: f64) -> Result<f64> {
    check_gp_args(t, p)?;
    Ok(if t <= 1.0 { 2.0 * t } else { 2.0 * t.powf(p - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn skew_examples() {
        assert_eq!(skew_matrix(SkewParams::new(0.0, 0.0, 0.0)), Mat3::zeros());
        let w = skew_matrix(SkewParams::new(1.0, 0.0, 0.0));
        assert_eq!(w, Mat3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let w = skew_matrix(SkewParams::new(1.0, 1.0, 1.0));
        assert_eq!(w.norm_squared(), 6.0);
        assert_eq!(w + w.transpose(), Mat3::zeros());
    }

    #[test]
    fn skew_axis_acts_as_cross_product() {
        let p = SkewParams::new(0.3, -1.2, 0.7);
        let x = Vec3::new(0.1, 2.0, -0.4);
        let lhs = p.matrix() * x;
        let rhs = x.cross(&p.axis());
        assert_relative_eq!(lhs, rhs, epsilon = 1e-15);
        assert_eq!(SkewParams::from_axis(&p.axis()), p);
    }

    #[test]
    fn rodrigues_examples() {
        let wz = skew_matrix(SkewParams::new(1.0, 0.0, 0.0));
        assert_relative_eq!(rodrigues(&wz, 0.0).unwrap(), Mat3::identity());
        let half_turn = rodrigues(&wz, PI).unwrap();
        assert_relative_eq!(half_turn, Mat3::from_diagonal(&Vec3::new(-1.0, -1.0, 1.0)), epsilon = 1e-15);
        // R̃ = [[0,1,0],[-1,0,0],[0,0,1]]
        let r_tilde = Mat3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(rodrigues(&wz, PI / 2.0).unwrap(), r_tilde, epsilon = 1e-15);
        assert_relative_eq!(rodrigues(&wz, -PI / 2.0).unwrap(), r_tilde.transpose(), epsilon = 1e-15);
    }

    #[test]
    fn rodrigues_rejects_bad_generators() {
        let not_skew = Mat3::identity();
        assert!(rodrigues(&not_skew, 0.3).is_err());
        let unnormalized = skew_matrix(SkewParams::new(1.0, 1.0, 0.0));
        assert!(rodrigues(&unnormalized, 0.3).is_err());
    }

    #[test]
    fn rodrigues_matches_exp_with_reversed_axis() {
        let p = SkewParams::new(0.48, -0.6, 0.64);
        let r = rodrigues(&p.matrix(), 0.9).unwrap();
        let e = exp_so3(&(-p.axis() * 0.9));
        assert_relative_eq!(r, e, epsilon = 1e-14);
    }

    #[test]
    fn log_inverts_exp() {
        for w in [Vec3::new(0.1, -0.2, 0.3), Vec3::new(3.0, 0.1, -0.2), Vec3::new(0.0, 0.0, PI - 1e-9)] {
            let r = exp_so3(&w);
            assert_relative_eq!(exp_so3(&log_so3(&r)), r, epsilon = 1e-9);
        }
        let aa = AxisAngle::new(Vec3::new(1.0, 2.0, 2.0), 2.5).unwrap();
        let back = AxisAngle::from_matrix(&aa.to_matrix());
        assert_relative_eq!(back.axis(), aa.axis(), epsilon = 1e-12);
        assert_relative_eq!(back.theta(), aa.theta(), epsilon = 1e-12);
    }

    #[test]
    fn axis_angle_normalizes() {
        let aa = AxisAngle::new(Vec3::new(0.0, 3.0, 4.0), 7.0).unwrap();
        assert!((aa.axis().norm() - 1.0).abs() < 1e-14);
        assert!(aa.theta().abs() <= PI);
        assert!(AxisAngle::new(Vec3::zeros(), 1.0).is_err());
    }

    #[test]
    fn nearest_rotation_examples() {
        let (r, d) = nearest_rotation(&Mat3::identity());
        assert_relative_eq!(r, Mat3::identity(), epsilon = 1e-14);
        assert!(d < 1e-14);
        let (r, d) = nearest_rotation(&(Mat3::identity() * 2.0));
        assert_relative_eq!(r, Mat3::identity(), epsilon = 1e-14);
        assert_relative_eq!(d, 3f64.sqrt(), epsilon = 1e-14);
        let r0 = exp_so3(&Vec3::new(0.4, -1.1, 0.25));
        let (r, d) = nearest_rotation(&r0);
        assert_relative_eq!(r, r0, epsilon = 1e-13);
        assert!(d < 1e-13);
    }

    #[test]
    fn nearest_rotation_of_reflection_is_proper() {
        let f = Mat3::from_diagonal(&Vec3::new(3.0, 2.0, -0.5));
        let (r, d) = nearest_rotation(&f);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-14);
        // the smallest singular direction is the one that gets reversed
        assert_relative_eq!(r, Mat3::identity(), epsilon = 1e-14);
        assert_relative_eq!(d, (4.0f64 + 1.0 + 2.25).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn g_p_examples() {
        for p in [1.1, 1.5, 2.0] {
            assert_eq!(g_p(1.0, p).unwrap(), 1.0);
        }
        for t in [0.0, 0.3, 1.0, 2.5, 10.0] {
            assert_relative_eq!(g_p(t, 2.0).unwrap(), t * t, epsilon = 1e-12);
        }
        let expected = (4.0 / 3.0) * 2f64.powf(1.5) - 4.0 / 3.0 + 1.0;
        assert_relative_eq!(g_p(2.0, 1.5).unwrap(), expected, epsilon = 1e-15);
        assert!((g_p(2.0, 1.5).unwrap() - 3.4379).abs() < 1e-4);
    }

    #[test]
    fn g_p_rejects_bad_arguments() {
        assert!(g_p(-0.1, 1.5).is_err());
        assert!(g_p(1.0, 1.0).is_err());
        assert!(g_p(1.0, 2.5).is_err());
        assert!(g_p(f64::NAN, 1.5).is_err());
    }

    #[test]
    fn g_p_is_c1_at_one() {
        let p = 1.3;
        let eps = 1e-7;
        let left = (g_p(1.0, p).unwrap() - g_p(1.0 - eps, p).unwrap()) / eps;
        let right = (g_p(1.0 + eps, p).unwrap() - g_p(1.0, p).unwrap()) / eps;
        assert!((left - right).abs() < 1e-5);
        assert_eq!(g_p_derivative(1.0, p).unwrap(), 2.0);
    }
}
