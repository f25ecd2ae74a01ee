//! Invariant checks shared by the property and acceptance suites. Each check
//! takes a generated case and reports a `TestCaseError` on violation.

use duopoly_core::model::{profit_gradient, profit_hessian, HessianBlock};
use duopoly_core::spectrum::{quasipoly_roots, right_region_radius};
use duopoly_core::*;
use nalgebra::Matrix4;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};

use super::{any_spec, symmetric_spec};

pub type CheckResult = std::result::Result<(), TestCaseError>;

pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Runs `check` on `cases` draws from `strategy` with a fixed seed.
pub fn run<S: Strategy>(cases: u32, strategy: S, check: impl Fn(S::Value) -> CheckResult) -> std::result::Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| match e {
        TestError::Fail(why, input) => format!("{why} for {input:?}"),
        TestError::Abort(why) => format!("aborted: {why}"),
    })
}

/// Richardson-extrapolated central differences of the analytic gradient.
fn fd_hessian(spec: &ModelSpec, firm: Firm, s: &StateVector) -> Option<HessianBlock> {
    let base = s.to_array();
    let bump = |k: usize, h: f64| {
        let mut w = base;
        w[k] += h;
        StateVector::from_array(w)
    };
    let (own_x, rival_x, own_z) = match firm {
        Firm::One => (0, 1, 2),
        Firm::Two => (1, 0, 3),
    };
    let central = |k: usize, h: f64| -> Option<(f64, f64)> {
        let p = profit_gradient(spec, firm, &bump(k, h)).ok()?;
        let m = profit_gradient(spec, firm, &bump(k, -h)).ok()?;
        Some(((p.dx - m.dx) / (2.0 * h), (p.dz - m.dz) / (2.0 * h)))
    };
    let d = |k: usize| -> Option<(f64, f64)> {
        let h = 1e-3 * (1e-2 + base[k].abs());
        let (a0, b0) = central(k, h)?;
        let (a1, b1) = central(k, 0.5 * h)?;
        Some(((4.0 * a1 - a0) / 3.0, (4.0 * b1 - b0) / 3.0))
    };
    let (xx, _) = d(own_x)?;
    let (cross, rival_z) = d(rival_x)?;
    let (xz, zz) = d(own_z)?;
    Some(HessianBlock { xx, cross, xz, rival_z, zz })
}

/// Fractions of the demand domain and of revenue used to place a random state.
pub fn state_fractions() -> impl Strategy<Value = [f64; 4]> {
    (0.05..0.95f64, 0.05..0.95f64, 0.0..1.2f64, 0.0..1.2f64).prop_map(|(a, b, c, d)| [a, b, c, d])
}

pub fn hessian_case() -> impl Strategy<Value = (ModelSpec, [f64; 4])> {
    (any_spec(), state_fractions())
}

pub fn check_hessian_fd((spec, f): (ModelSpec, [f64; 4])) -> CheckResult {
    let scale = spec.demand().quantity_scale();
    let (x1, x2) = (f[0] * 0.5 * scale, f[1] * 0.5 * scale);
    let Ok(p) = spec.demand().eval(x1 + x2) else { return Ok(()) };
    let s = StateVector::new(x1, x2, f[2] * x1 * p.value, f[3] * x2 * p.value);
    for firm in Firm::BOTH {
        let Ok(h) = profit_hessian(&spec, firm, &s) else { continue };
        let Some(fd) = fd_hessian(&spec, firm, &s) else { continue };
        // entries far below the block's size are compared against that size
        let floor = h.to_array().iter().fold(1e-6f64, |m, v| m.max(v.abs())) * 1e-4;
        for (a, b) in h.to_array().iter().zip(fd.to_array()) {
            prop_assert!(rel(*a, b, floor) < 1e-6, "{firm:?} {h:?} vs {fd:?}");
        }
    }
    Ok(())
}

pub fn determinant_case() -> impl Strategy<Value = (ModelSpec, Vec<(f64, f64)>)> {
    (any_spec(), prop::collection::vec((-5.0..5.0f64, -20.0..20.0f64), 100))
}

pub fn check_determinant_identity((spec, points): (ModelSpec, Vec<(f64, f64)>)) -> CheckResult {
    let Ok(eq) = solve(&spec) else { return Ok(()) };
    let sys = build_linearization(&spec, &eq).unwrap();
    let qp = build_quasipolynomial(&sys);
    for (re, im) in points {
        let z = Complex64::new(re, im);
        let det = sys.characteristic_matrix(z).determinant();
        let q = qp.eval(z);
        let terms = (qp.p1.eval(z) * qp.p2.eval(z)).norm()
            + ((-z * qp.tau).exp() * qp.g1.eval(z) * qp.g2.eval(z)).norm();
        prop_assert!((det - q).norm() <= 1e-10 * det.norm().max(terms), "{z}: {det} vs {q}");
    }
    Ok(())
}

pub fn hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let one_way = |x: &[Complex64], y: &[Complex64]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

pub fn check_zero_delay_roots(spec: ModelSpec) -> CheckResult {
    let Ok(eq) = solve(&spec) else { return Ok(()) };
    let qp = quasipolynomial_at(&spec, &eq).unwrap().with_tau(0.0);
    let exact = quartic_roots(&tau0_quartic(&qp));
    // independent oracle: eigenvalues of the undelayed Jacobian A + B
    let sys = build_linearization(&spec, &eq).unwrap();
    let eig: Vec<Complex64> = (sys.a + sys.b).complex_eigenvalues().iter().copied().collect();
    let scale = exact.iter().fold(1.0f64, |m, z| m.max(z.norm()));
    prop_assert!(hausdorff(&exact, &eig) < 1e-6 * scale, "{exact:?} vs {eig:?}");

    // a square holding every zero, sampled on a 200 x 200 grid
    let r = right_region_radius(&qp, 0.0) * 1.1 + 1.0;
    let rect = Rectangle::new(-r, r, -r, r).unwrap();
    let res = quasipoly_roots(&qp, &rect, 100.0 / r).unwrap();
    prop_assert!(res.count_verified, "{:?}", res.hint);
    let found: Vec<Complex64> = res.roots.iter().flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity)).collect();
    prop_assert_eq!(found.len(), 4);
    prop_assert!(hausdorff(&found, &exact) < 1e-6 * scale, "{found:?} vs {exact:?}");
    Ok(())
}

pub fn companion(q: &QuarticCoefficients) -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 0.0, -q.a0, //
        1.0, 0.0, 0.0, -q.a1, //
        0.0, 1.0, 0.0, -q.a2, //
        0.0, 0.0, 1.0, -q.a3,
    )
}

/// Quartics drawn either from raw coefficients or from two root pairs, so that
/// a good share of draws is Hurwitz.
pub fn quartic_case() -> impl Strategy<Value = QuarticCoefficients> {
    prop_oneof![
        prop::array::uniform4(-2.0..20.0f64).prop_map(|c| QuarticCoefficients::new(c[0], c[1], c[2], c[3])),
        (prop::array::uniform2(-5.0..1.0f64), prop::array::uniform2(0.0..5.0f64)).prop_map(|(re, im)| {
            // (λ² − 2r₀λ + r₀² + i₀²)(λ² − 2r₁λ + r₁² + i₁²)
            let (a1, a0) = (-2.0 * re[0], re[0] * re[0] + im[0] * im[0]);
            let (b1, b0) = (-2.0 * re[1], re[1] * re[1] + im[1] * im[1]);
            QuarticCoefficients::new(a0 * b0, a1 * b0 + a0 * b1, a0 + b0 + a1 * b1, a1 + b1)
        }),
    ]
}

pub fn check_routh_hurwitz(q: QuarticCoefficients) -> CheckResult {
    if conditions::routh_hurwitz(&q) {
        for z in companion(&q).complex_eigenvalues().iter() {
            prop_assert!(z.re < 0.0, "{q:?}: {z}");
        }
    }
    Ok(())
}

pub fn delay_independent_case() -> impl Strategy<Value = (ModelSpec, [f64; 5])> {
    (symmetric_spec(), prop::array::uniform5(0.0..50.0f64))
}

/// Returns whether the spec was classified delay-independent stable.
pub fn check_delay_independent((spec, taus): (ModelSpec, [f64; 5])) -> std::result::Result<bool, TestCaseError> {
    let Ok(eq) = solve(&spec) else { return Ok(false) };
    let report = assemble_report(&spec, &eq).unwrap();
    if report.verdict != Verdict::DelayIndependentStable {
        return Ok(false);
    }
    prop_assert!(report.routh_hurwitz.holds());
    let qp = quasipolynomial_at(&spec, &eq).unwrap();
    prop_assert_eq!(crossing_test(&qp), Crossing::NoCrossings);
    for tau in taus {
        let a = spectral_abscissa(&qp.with_tau(tau), &Rectangle::default());
        prop_assert!(matches!(a, Ok(a) if a < 0.0), "tau={tau}: {a:?}");
    }
    Ok(true)
}
