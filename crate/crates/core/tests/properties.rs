//! Randomized invariants of the pointwise kernels, quadrature and loads.

use proptest::prelude::*;
use std::f64::consts::PI;

use traction_gap::domain::{surface_quadrature, volume_quadrature, Domain};
use traction_gap::energy::{density, density_gradient, quadratic_form};
use traction_gap::field::AffineField;
use traction_gap::loads::{rigid_projection, rotate_loads, LoadEvaluator, LoadSpec, RigidPart};
use traction_gap::math3::{
    dist_so3, exp_so3, g_p, nearest_rotation, rodrigues, skew_matrix, sym, Mat3, SkewParams, Vec3,
};
use traction_gap::nonlinear::eval_gh_field;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-range..range).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
}

fn mat3(range: f64) -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-range..range).prop_map(|a| Mat3::from_column_slice(&a))
}

fn rotation() -> impl Strategy<Value = Mat3> {
    vec3(PI).prop_map(|w| exp_so3(&w))
}

/// Unit quaternion from three uniforms (Shoemake), as a matrix.
fn uniform_rotation(u: [f64; 3]) -> Mat3 {
    let (a, b) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
    let (t1, t2) = (2.0 * PI * u[1], 2.0 * PI * u[2]);
    let q = nalgebra::Quaternion::new(b * t2.cos(), a * t1.sin(), a * t1.cos(), b * t2.sin());
    *nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().matrix()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rodrigues_is_a_rotation(axis in vec3(1.0), theta in -10.0..10.0f64) {
        prop_assume!(axis.norm() > 1e-3);
        let p = SkewParams::from_axis(&axis.normalize());
        let r = rodrigues(&skew_matrix(p), theta).unwrap();
        prop_assert!((r.transpose() * r - Mat3::identity()).norm() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_is_frame_indifferent(r in rotation(), f in mat3(2.0)) {
        let w = density(&f);
        prop_assert!((density(&(r * f)) - w).abs() <= 1e-12 * w.max(1.0));
    }

    #[test]
    fn quadratic_form_sees_only_the_symmetric_part(f in mat3(3.0)) {
        let q = quadratic_form(&f);
        prop_assert!((q - quadratic_form(&sym(&f))).abs() <= 1e-14 * q.max(1.0));
    }

    #[test]
    fn g_p_is_monotone_and_convex(s in 0.0..5.0f64, dt in 0.0..5.0f64, lambda in 0.0..1.0f64, p in 1.01..=2.0f64) {
        let t = s + dt;
        let (gs, gt) = (g_p(s, p).unwrap(), g_p(t, p).unwrap());
        prop_assert!(gs <= gt + 1e-15);
        let mid = g_p(lambda * s + (1.0 - lambda) * t, p).unwrap();
        prop_assert!(mid <= lambda * gs + (1.0 - lambda) * gt + 1e-12 * gt.max(1.0));
    }

    #[test]
    fn density_dominates_squared_distance(r in rotation(), v in rotation(), s in prop::array::uniform3(0.5..2.0f64)) {
        let f = r * Mat3::from_diagonal(&Vec3::new(s[0], s[1], s[2])) * v.transpose();
        let (_, d) = nearest_rotation(&f);
        prop_assert!(density(&f) >= g_p(d, 2.0).unwrap() - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn density_gradient_matches_central_differences(f in mat3(1.5)) {
        let g = density_gradient(&f);
        let step = 1e-6;
        let mut fd = Mat3::zeros();
        for k in 0..9 {
            let mut e = Mat3::zeros();
            e[k] = step;
            fd[k] = (density(&(f + e)) - density(&(f - e))) / (2.0 * step);
        }
        prop_assert!((fd - g).norm() <= 1e-6 * g.norm().max(1.0), "fd {fd} exact {g}");
    }

    #[test]
    fn discrete_gp_lower_bound(
        values in prop::collection::vec(-50.0..50.0f64, 1..64),
        h in 0.001..0.999f64,
        p in 1.01..=2.0f64,
    ) {
        let rule = volume_quadrature(&Domain::unit_cylinder(), 4).unwrap();
        let volume: f64 = rule.weights.iter().sum();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (i, w) in rule.weights.iter().enumerate() {
            let eta = values[i % values.len()];
            lhs += w * g_p(h * eta.abs(), p).unwrap() / (h * h);
            rhs += w * eta.abs().powf(p);
        }
        prop_assert!(lhs >= rhs - (2.0 - p) / p * volume - 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn load_functional_is_linear(a in mat3(1.0), b in mat3(1.0), s in vec3(1.0), t in vec3(1.0), alpha in -2.0..2.0f64, beta in -2.0..2.0f64) {
        let loads = LoadEvaluator::new(&LoadSpec::preset(0.3), 10).unwrap();
        let u = |x: &Vec3| s + a * x + Vec3::new(x.x * x.y, x.z * x.z, x.x) ;
        let v = |x: &Vec3| t + b * x;
        let lhs = loads.load_functional(|x| u(x) * alpha + v(x) * beta).unwrap();
        let rhs = alpha * loads.load_functional(u).unwrap() + beta * loads.load_functional(v).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_closed_under_products_and_inverses(s in -PI..PI, t in -PI..PI) {
        let loads = LoadEvaluator::new(&LoadSpec::preset(0.01), 16).unwrap();
        let r = exp_so3(&(Vec3::z() * s));
        let q = exp_so3(&(Vec3::z() * t));
        prop_assert!(loads.rotation_work(&r).abs() < 1e-10);
        prop_assert!(loads.rotation_work(&q).abs() < 1e-10);
        prop_assert!(loads.rotation_work(&(r * q)).abs() < 1e-10);
        prop_assert!(loads.rotation_work(&r.transpose()).abs() < 1e-10);
    }

    #[test]
    fn rigid_projection_is_idempotent(a in vec3(2.0), spin in prop::array::uniform3(-2.0..2.0f64), m in mat3(1.0)) {
        let rule = volume_quadrature(&Domain::unit_cylinder(), 6).unwrap();
        let rigid = RigidPart { translation: a, spin: SkewParams::new(spin[0], spin[1], spin[2]) };
        let back = rigid_projection(|x| rigid.eval(x), &rule).unwrap();
        prop_assert!((back.translation - a).norm() < 1e-12);
        prop_assert!((back.spin.matrix() - rigid.spin.matrix()).norm() < 1e-12);
        // projecting a general field twice changes nothing
        let once = rigid_projection(|x| m * x + Vec3::new(x.y * x.y, 0.0, x.x * x.z), &rule).unwrap();
        let twice = rigid_projection(|x| once.eval(x), &rule).unwrap();
        prop_assert!((once.translation - twice.translation).norm() < 1e-12);
        prop_assert!((once.spin.matrix() - twice.spin.matrix()).norm() < 1e-12);
    }

    #[test]
    fn divergence_theorem_on_the_cylinder(c in prop::collection::vec(-1.0..1.0f64, 30)) {
        // v = A x + quadratic terms, div v computed by hand
        let a = Mat3::from_column_slice(&c[0..9]);
        let q = &c[9..];
        let v = |x: &Vec3| {
            a * x + Vec3::new(
                q[0] * x.x * x.x + q[1] * x.y * x.z + q[2] * x.z * x.z * x.x,
                q[3] * x.y * x.y + q[4] * x.x * x.z + q[5] * x.x * x.x * x.y,
                q[6] * x.z * x.z + q[7] * x.x * x.y + q[8] * x.y * x.y * x.z,
            )
        };
        let div = |x: &Vec3| {
            a.trace() + 2.0 * q[0] * x.x + q[2] * x.z * x.z + 2.0 * q[3] * x.y + q[5] * x.x * x.x
                + 2.0 * q[6] * x.z + q[8] * x.y * x.y
        };
        let d = Domain::unit_cylinder();
        let vol = volume_quadrature(&d, 8).unwrap();
        let surf = surface_quadrature(&d, 8).unwrap();
        let normals = surf.normals.as_ref().unwrap();
        let flux: f64 = surf.nodes.iter().zip(normals).zip(&surf.weights).map(|((x, n), w)| w * v(x).dot(n)).sum();
        let source: f64 = vol.nodes.iter().zip(&vol.weights).map(|(x, w)| w * div(x)).sum();
        prop_assert!((flux - source).abs() < 1e-10, "flux {flux} source {source}");
    }

    #[test]
    fn nonlinear_energy_frame_identity(
        q in rotation(), r in rotation(), b in mat3(0.5), a in vec3(0.5), h in 0.01..0.5f64,
    ) {
        // rotating R by Q and the loads by Qᵀ shifts the energy by h⁻¹ L((Qᵀ − I)x)
        let spec = LoadSpec::preset(0.2);
        let field = AffineField { offset: a, matrix: b };
        let loads = LoadEvaluator::new(&spec, 6).unwrap();
        let rotated = LoadEvaluator::new(&rotate_loads(&spec, &q.transpose()).unwrap(), 6).unwrap();
        let base = eval_gh_field(&field, &r, h, &loads, None).unwrap();
        let moved = eval_gh_field(&field, &(q * r), h, &rotated, None).unwrap();
        let shift = loads.rotation_work(&q.transpose()) / h;
        prop_assert!((moved - base - shift).abs() <= 1e-12 * base.abs().max(1.0), "{moved} {base} {shift}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn nonlinear_energy_is_invariant_under_kernel_rotations(
        t in -PI..PI, r in rotation(), b in mat3(0.5), h in 0.01..0.5f64,
    ) {
        let spec = LoadSpec::preset(0.01);
        let q = exp_so3(&(Vec3::z() * t));
        let field = AffineField { offset: Vec3::zeros(), matrix: b };
        let loads = LoadEvaluator::new(&spec, 4).unwrap();
        let rotated = LoadEvaluator::new(&rotate_loads(&spec, &q.transpose()).unwrap(), 4).unwrap();
        let base = eval_gh_field(&field, &r, h, &loads, None).unwrap();
        let moved = eval_gh_field(&field, &(q * r), h, &rotated, None).unwrap();
        prop_assert!((moved - base).abs() <= 1e-12 * base.abs().max(1.0), "{moved} vs {base}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn nearest_rotation_beats_random_rotations(f in mat3(2.0), seeds in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 10_000)) {
        let (r, d) = nearest_rotation(&f);
        prop_assert!((d - (f - r).norm()).abs() < 1e-12);
        prop_assert!((d - dist_so3(&f)).abs() < 1e-12);
        let best = seeds.iter().map(|u| (f - uniform_rotation(*u)).norm()).fold(f64::INFINITY, f64::min);
        prop_assert!(d <= best + 1e-12);
        // 10⁴ samples cover SO(3) to about 0.15 rad, which costs O(angle²) near the optimum
        prop_assert!(best - d < 0.5 * f.norm().max(1.0), "sampled {best} vs exact {d}");
    }
}

#[test]
fn load_integrals_are_exact_at_default_order() {
    for spec in [LoadSpec::preset(0.01), LoadSpec::preset(1.0), LoadSpec::pressure(-1.0), LoadSpec::ball_pull_in()] {
        let coarse = LoadEvaluator::new(&spec, 16).unwrap();
        let fine = LoadEvaluator::new(&spec, 32).unwrap();
        assert!((coarse.moment_matrix() - fine.moment_matrix()).norm() < 1e-12);
        assert!((coarse.resultant() - fine.resultant()).norm() < 1e-12);
        let u = |x: &Vec3| Vec3::new(x.x * x.x * x.y, x.z.powi(3), x.x + x.y * x.z);
        let (a, b) = (coarse.load_functional(u).unwrap(), fine.load_functional(u).unwrap());
        assert!((a - b).abs() < 1e-12, "{spec:?}: {a} vs {b}");
    }
}

#[test]
fn preset_z_rotations_cost_nothing_on_a_fine_grid() {
    let loads = LoadEvaluator::new(&LoadSpec::preset(0.01), 16).unwrap();
    for k in 0..100 {
        let theta = -PI + 2.0 * PI * k as f64 / 99.0;
        assert!(loads.rotation_work(&exp_so3(&(Vec3::z() * theta))).abs() < 1e-10);
    }
}
