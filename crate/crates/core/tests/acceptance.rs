//! Acceptance run: one PASS/FAIL line per criterion, tolerances and time limits pinned.
//!
//! Runs without the libtest harness so the lines are always printed. Exits
//! nonzero when any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use traction_gap::domain::{volume_quadrature, Domain};
use traction_gap::energy::{density, density_gradient};
use traction_gap::galerkin::SpaceKind;
use traction_gap::limit::{
    axis_rotation, biharmonic_residual, eta_star, explicit_residuals, gap_report, nonuniqueness_check, ode_residual,
    rotated_no_gap_check, ExplicitSolution, LimitOptions, LimitProblem,
};
use traction_gap::loads::{
    compatibility_report, reversed_compatibility_witness, rigid_projection, KernelClass, KernelOptions, LoadSpec,
    RigidPart,
};
use traction_gap::math3::{exp_so3, g_p, Mat3, SkewParams, Vec3};
use traction_gap::nonlinear::{convergence_study, DeformationAnsatz, NonlinearModel, NonlinearOptions};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn preset() -> LoadSpec {
    LoadSpec::preset(0.01)
}

fn profile_constraints() -> Outcome {
    let c = preset().profile_constraints();
    let defect = c.phi_at_one.abs() + c.phi_prime_at_one.abs() + c.radial_moment.abs();
    Ok((defect < 1e-12, format!("|phi(1)|+|phi'(1)|+|int r^2 phi'| = {defect:.3e} (< 1e-12)")))
}

fn explicit_residual_check() -> Outcome {
    let spec = preset();
    let sol = ExplicitSolution::new(&spec).map_err(err)?;
    let eta = eta_star(&spec.phi).map_err(err)?;
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 / 1000.0).collect();
    let ode = ode_residual(&eta, &spec.phi, &grid);
    let res = explicit_residuals(&sol, &spec, 16).map_err(err)?;
    let points: Vec<(f64, f64)> =
        (1..=100).map(|i| (0.01 * i as f64 * (0.3 * i as f64).cos(), 0.01 * i as f64 * (0.3 * i as f64).sin())).collect();
    let bih = biharmonic_residual(&eta, &spec.phi, &points);
    let el = res.euler_lagrange_interior.max(res.euler_lagrange_boundary);
    let orth = res.orthogonality.abs();
    let ok = ode < 1e-12 && el < 1e-8 && bih < 1e-8 && orth < 1e-10;
    Ok((
        ok,
        format!(
            "ode {ode:.2e} (< 1e-12), euler-lagrange interior {:.2e} boundary {:.2e} (< 1e-8), biharmonic {bih:.2e} (< 1e-8), \
             orthogonality {orth:.3e} (< 1e-10; planar part {:.1e}, shared axial energy {:.3e})",
            res.euler_lagrange_interior, res.euler_lagrange_boundary, res.planar_orthogonality, res.axial_energy
        ),
    ))
}

fn compressible_gap() -> Outcome {
    let spec = preset();
    let ints = ExplicitSolution::new(&spec).map_err(err)?.radial_integrals();
    let (exact_e, exact_g) = (ints.min_linear(), ints.min_rotated());
    let margin = ints.margin();
    let opts = LimitOptions::default();
    let mut galerkin = Vec::new();
    for degree in [6, 7] {
        let p = LimitProblem::new(&spec, SpaceKind::Full { degree }, &opts).map_err(err)?;
        let e = p.value(&Mat3::identity());
        let g = p.minimize(&opts).map_err(err)?.result.value;
        galerkin.push((degree, rel(e, exact_e), rel(g, exact_g)));
    }
    let (_, de6, dg6) = galerkin[0];
    let (_, de7, dg7) = galerkin[1];
    let ok = margin > 0.0 && margin > 1e-3 * exact_e.abs() && de6 < 0.01 && dg6 < 0.01;
    Ok((
        ok,
        format!(
            "margin {margin:.6e} (> 0, relative {:.3e} > 1e-3); degree 6: min E off {:.2}%, min G off {:.2}% (< 1%); \
             degree 7: {:.1e}, {:.1e}",
            margin / exact_e.abs(),
            100.0 * de6,
            100.0 * dg6,
            de7,
            dg7
        ),
    ))
}

fn decomposition() -> Outcome {
    let spec = preset();
    let ints = ExplicitSolution::new(&spec).map_err(err)?.radial_integrals();
    let p = LimitProblem::new(&spec, SpaceKind::Full { degree: 7 }, &LimitOptions::default()).map_err(err)?;
    let scale = ints.min_linear().abs();
    let worst = [-FRAC_PI_2, -FRAC_PI_4, 0.0, FRAC_PI_4, FRAC_PI_2]
        .iter()
        .map(|&t| (p.value(&axis_rotation(&Vec3::z(), t)) - ints.family_value(t)).abs())
        .fold(0.0, f64::max);
    Ok((worst < 1e-8 * scale, format!("max residual {worst:.3e} (< {:.3e})", 1e-8 * scale)))
}

fn kernel_classification() -> Outcome {
    let ko = KernelOptions::default();
    let class = |s: &LoadSpec| compatibility_report(s, &ko).map(|r| r.classification).map_err(err);
    let axis = match class(&preset())? {
        KernelClass::AxisSubgroup { axis } => (axis.z.abs() - 1.0).abs() < 1e-9,
        _ => false,
    };
    let full = class(&LoadSpec::preset(0.0))? == KernelClass::FullSO3;
    let ball = class(&LoadSpec::ball_pull_in())? == KernelClass::Incompatible;
    let witness = reversed_compatibility_witness(&LoadSpec::pressure(-1.0), &ko).map_err(err)?.is_some();
    Ok((
        axis && full && ball && witness,
        format!("beta>0 axis e_z: {axis}, beta=0 full SO(3): {full}, ball pull-in incompatible: {ball}, pressure -1 witness: {witness}"),
    ))
}

fn rotated_no_gap() -> Outcome {
    let c = rotated_no_gap_check(&preset(), None, &LimitOptions::default()).map_err(err)?;
    Ok((
        c.relative_difference < 1e-6,
        format!(
            "|min G_R - min E_R| / |min E_R| = {:.3e} (< 1e-6), min E_R = {:.10}",
            c.relative_difference, c.rotated.min_linear
        ),
    ))
}

fn nonuniqueness() -> Outcome {
    let n = nonuniqueness_check(&preset(), &LimitOptions::default()).map_err(err)?;
    let ok = n.relative_difference < 1e-8 && n.strain_difference > 0.1 * n.strain_norm;
    Ok((
        ok,
        format!(
            "value difference {:.2e} (< 1e-8), |E(u^ - u*)| = {:.4} vs 0.1|E(u*)| = {:.4}",
            n.relative_difference,
            n.strain_difference,
            0.1 * n.strain_norm
        ),
    ))
}

fn gamma_convergence() -> Outcome {
    let study = convergence_study(
        &preset(),
        &[0.2, 0.1, 0.05, 0.02],
        &NonlinearOptions { degree: 4, ..NonlinearOptions::default() },
        &LimitOptions::default(),
    )
    .map_err(err)?;
    let rows = &study.rows;
    if let Some(r) = rows.iter().find(|r| r.error.is_some()) {
        return Ok((false, format!("row h = {} failed: {}", r.h, r.error.as_deref().unwrap_or(""))));
    }
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap_to_limit).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let final_rel = gaps[gaps.len() - 1] / study.limit_value.abs();
    let growth = rows[rows.len() - 1].rescaled_strain / rows[0].rescaled_strain;
    Ok((
        decreasing && final_rel < 0.05 && growth > 2.0,
        format!(
            "gaps {:?} strictly decreasing: {decreasing}; final relative gap {final_rel:.2e} (< 5%); strain growth {growth:.2}x (> 2x)",
            gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>()
        ),
    ))
}

fn incompressible_gap() -> Outcome {
    let g = gap_report(&preset(), &LimitOptions::default()).map_err(err)?;
    let i = &g.incompressible;
    Ok((
        i.certified,
        format!(
            "min G^I upper {:.10} < min E^I lower {:.10}: certified {} (degree {})",
            i.min_limit_upper, i.min_linear_lower, i.certified, i.candidate_degree
        ),
    ))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mat = |rng: &mut ChaCha8Rng, s: f64| Mat3::from_fn(|_, _| rng.random_range(-s..s));
    let mut notes = Vec::new();

    let mut frame = 0.0f64;
    for _ in 0..1000 {
        let r = exp_so3(&Vec3::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI), rng.random_range(-PI..PI)));
        let f = mat(&mut rng, 2.0);
        frame = frame.max((density(&(r * f)) - density(&f)).abs() / density(&f).max(1.0));
    }
    notes.push(format!("frame indifference {frame:.1e}"));

    let mut convex = true;
    let mut gp_bound = true;
    for _ in 0..1000 {
        let p = rng.random_range(1.01..=2.0);
        let s = rng.random_range(0.0..5.0);
        let t = s + rng.random_range(0.0..5.0);
        let l: f64 = rng.random_range(0.0..1.0);
        let (gs, gt) = (g_p(s, p).map_err(err)?, g_p(t, p).map_err(err)?);
        let mid = g_p(l * s + (1.0 - l) * t, p).map_err(err)?;
        convex &= gs <= gt && mid <= l * gs + (1.0 - l) * gt + 1e-12 * gt.max(1.0);
    }
    let rule = volume_quadrature(&Domain::unit_cylinder(), 4).map_err(err)?;
    let volume: f64 = rule.weights.iter().sum();
    for _ in 0..200 {
        let p = rng.random_range(1.01..=2.0);
        let h = rng.random_range(0.001..0.999);
        let scale = rng.random_range(0.1..100.0);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for w in &rule.weights {
            let eta: f64 = rng.random_range(-scale..scale);
            lhs += w * g_p(h * eta.abs(), p).map_err(err)? / (h * h);
            rhs += w * eta.abs().powf(p);
        }
        gp_bound &= lhs >= rhs - (2.0 - p) / p * volume - 1e-9 * lhs.abs().max(1.0);
    }
    notes.push(format!("g_p convex {convex}, discrete inequality {gp_bound}"));

    let spec = preset();
    let opts = LimitOptions::default();
    let mut values = Vec::new();
    for degree in [3, 5, 7] {
        let p = LimitProblem::new(&spec, SpaceKind::Full { degree }, &opts).map_err(err)?;
        values.push(p.value(&Mat3::identity()));
    }
    let monotone = values.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    notes.push(format!("Galerkin monotone {monotone}"));

    let mut fd_worst = 0.0f64;
    for _ in 0..100 {
        let f = mat(&mut rng, 1.5);
        let g = density_gradient(&f);
        let mut fd = Mat3::zeros();
        for k in 0..9 {
            let mut e = Mat3::zeros();
            e[k] = 1e-6;
            fd[k] = (density(&(f + e)) - density(&(f - e))) / 2e-6;
        }
        fd_worst = fd_worst.max((fd - g).norm() / g.norm().max(1.0));
    }
    let nl = NonlinearOptions { degree: 2, quadrature_order: 6, ..NonlinearOptions::default() };
    let model = NonlinearModel::new(&LoadSpec::preset(0.2), &nl, &[]).map_err(err)?;
    let coeffs: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(-0.3..0.3)).collect();
    let r = exp_so3(&Vec3::new(0.1, 0.2, -0.3));
    let at = |c: Vec<f64>| DeformationAnsatz::new(&r, c, 0.1).map_err(err);
    let grad = model.gradient(&at(coeffs.clone())?, Some(10.0)).map_err(err)?;
    let mut fd = grad.clone();
    for i in 0..coeffs.len() {
        let (mut up, mut dn) = (coeffs.clone(), coeffs.clone());
        up[i] += 1e-6;
        dn[i] -= 1e-6;
        fd[i] = (model.eval(&at(up)?, Some(10.0)).map_err(err)? - model.eval(&at(dn)?, Some(10.0)).map_err(err)?) / 2e-6;
    }
    fd_worst = fd_worst.max((&fd - &grad).norm() / grad.norm());
    notes.push(format!("gradient vs FD {fd_worst:.1e}"));

    let rule = volume_quadrature(&Domain::unit_cylinder(), 6).map_err(err)?;
    let mut idem = 0.0f64;
    for _ in 0..50 {
        let m = mat(&mut rng, 1.0);
        let once = rigid_projection(|x| m * x + Vec3::new(x.y * x.y, x.z, x.x * x.z), &rule).map_err(err)?;
        let twice = rigid_projection(|x| once.eval(x), &rule).map_err(err)?;
        let rigid = RigidPart { translation: once.translation, spin: SkewParams::new(1.0, -0.5, 0.25) };
        let back = rigid_projection(|x| rigid.eval(x), &rule).map_err(err)?;
        idem = idem
            .max((once.translation - twice.translation).norm())
            .max((once.spin.matrix() - twice.spin.matrix()).norm())
            .max((back.spin.matrix() - rigid.spin.matrix()).norm());
    }
    notes.push(format!("rigid projection idempotence {idem:.1e}"));

    let ok = frame < 1e-12 && convex && gp_bound && monotone && fd_worst < 1e-6 && idem < 1e-12;
    Ok((ok, notes.join(", ")))
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: 1, name: "profile constraints", limit: Duration::from_secs(1), run: profile_constraints },
    Criterion { id: 2, name: "explicit-solution residuals", limit: Duration::from_secs(10), run: explicit_residual_check },
    Criterion { id: 3, name: "compressible gap", limit: Duration::from_secs(120), run: compressible_gap },
    Criterion { id: 4, name: "decomposition", limit: Duration::from_secs(120), run: decomposition },
    Criterion { id: 5, name: "kernel classification", limit: Duration::from_secs(10), run: kernel_classification },
    Criterion { id: 6, name: "rotated no-gap", limit: Duration::from_secs(120), run: rotated_no_gap },
    Criterion { id: 7, name: "nonuniqueness", limit: Duration::from_secs(30), run: nonuniqueness },
    Criterion { id: 8, name: "gamma-convergence study", limit: Duration::from_secs(600), run: gamma_convergence },
    Criterion { id: 9, name: "incompressible gap", limit: Duration::from_secs(600), run: incompressible_gap },
    Criterion { id: 10, name: "property suites", limit: Duration::from_secs(60), run: property_suites },
];

fn main() {
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} [{}] {}: {}; {:.2} s (< {} s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
