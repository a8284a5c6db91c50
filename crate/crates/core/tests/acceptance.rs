//! Acceptance suite: every conservation, measure, reconstruction, and
//! equivalence claim is exercised at its pinned tolerance. One criterion
//! per test, each printing a PASS/FAIL line (run with `--nocapture` to see
//! them all).

use std::time::Instant;

use bearing_dynamics::integrators::{convergence_order, integrate, NullObserver, VectorField};
use bearing_dynamics::oracle::{reduced_rate_via_oracle, OracleState};
use bearing_dynamics::planar::{
    self, LevelSetParams, PlanarBall, PlanarParams, PlanarReducedState,
};
use bearing_dynamics::rng::SplitMix64;
use bearing_dynamics::spherical::{
    self, FullSphericalState, SphericalBall, SphericalParams, SphericalReducedField,
};
use bearing_dynamics::verification::{
    drift_report, sample_planar_full, sample_spherical_state, transport_check, weighted_divergence,
    RunSpec, SystemDescriptor,
};
use bearing_dynamics::Vec3;

fn check(name: &str, pass: bool, detail: &str, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!(
        "[{verdict}] {name}: {detail} ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "{name}: {detail}");
}

fn spherical_params(n: usize) -> SphericalParams<f64> {
    let spins = [0.4, -0.7, 0.25];
    let balls = (0..n)
        .map(|i| SphericalBall {
            inertia: 0.3 + 0.1 * i as f64,
            mass: 1.0 - 0.15 * i as f64,
            spin: spins[i % spins.len()],
        })
        .collect();
    SphericalParams::new(2.0, 1.0, Vec3::new(2.0, 3.0, 4.0), balls).unwrap()
}

fn planar_params() -> PlanarParams<f64> {
    PlanarParams::new(
        0.5,
        2.5,
        1.8,
        vec![
            PlanarBall {
                mass: 1.0,
                inertia: 0.1,
            },
            PlanarBall {
                mass: 0.7,
                inertia: 0.08,
            },
            PlanarBall {
                mass: 1.3,
                inertia: 0.13,
            },
        ],
    )
    .unwrap()
}

#[test]
fn criterion_1_spherical_integral_conservation() {
    let started = Instant::now();
    let tol = 1e-8;
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let p = spherical_params(n);
        let mut rng = SplitMix64::new(1000 + n as u64);
        for _ in 0..20 {
            let s = sample_spherical_state(&mut rng, &p);
            let report = drift_report(
                &SystemDescriptor::SphericalReduced {
                    params: p.clone(),
                    initial: s,
                },
                &RunSpec::new(1e-3, 10.0),
            )
            .unwrap();
            // F1, F2, T, and every Gram entry drift relatively by <= 1e-8.
            worst = worst.max(report.worst_relative_drift());
        }
    }
    check(
        "criterion 1 (spherical integral conservation)",
        worst <= tol,
        &format!("worst relative drift {worst:.3e} (tolerance {tol:.0e})"),
        started,
    );
}

#[test]
fn criterion_2_spherical_invariant_measure() {
    let started = Instant::now();
    let mut worst_pointwise = 0.0f64;
    for n in 1..=3 {
        let p = spherical_params(n);
        let field = SphericalReducedField { params: &p };
        let mut rng = SplitMix64::new(2000 + n as u64);
        for _ in 0..200 {
            let s = sample_spherical_state(&mut rng, &p);
            let c = weighted_divergence(
                &field,
                |z: &[f64]| {
                    let (_, gammas) = spherical::unpack_reduced(z);
                    spherical::measure_density(&p, &gammas)
                },
                &s.to_vec(),
            );
            worst_pointwise = worst_pointwise.max(c.scaled_residual());
        }
    }

    let p = spherical_params(2);
    let field = SphericalReducedField { params: &p };
    let mut rng = SplitMix64::new(2042);
    let s = sample_spherical_state(&mut rng, &p);
    let density = |z: &[f64]| {
        let (_, gammas) = spherical::unpack_reduced(z);
        spherical::measure_density(&p, &gammas)
    };
    let transport = transport_check(&field, density, &s.to_vec(), 1e-3, 5.0, 100).unwrap();
    let control = transport_check(&field, |_: &[f64]| 1.0, &s.to_vec(), 1e-3, 5.0, 100).unwrap();

    let pass = worst_pointwise <= 1e-6 && transport <= 1e-6 && control > 1e-3;
    check(
        "criterion 2 (spherical invariant measure)",
        pass,
        &format!(
            "pointwise {worst_pointwise:.3e} (<=1e-6), transport {transport:.3e} (<=1e-6), \
             unit-density control {control:.3e} (>1e-3)"
        ),
        started,
    );
}

#[test]
fn criterion_3_full_reconstruction() {
    let started = Instant::now();
    let mut worst_residual = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for n in 1..=2 {
        let p = spherical_params(n);
        let mut rng = SplitMix64::new(3000 + n as u64);
        let s = sample_spherical_state(&mut rng, &p);
        let report = drift_report(
            &SystemDescriptor::SphericalFull {
                params: p,
                initial: FullSphericalState::from_reduced(s),
            },
            &RunSpec::new(1e-3, 10.0),
        )
        .unwrap();
        worst_residual = worst_residual.max(report.reconstruction_residual.unwrap());
        worst_ortho = worst_ortho.max(report.orthogonality_drift.unwrap());
    }
    let pass = worst_residual <= 1e-8 && worst_ortho <= 1e-9;
    check(
        "criterion 3 (full-configuration reconstruction)",
        pass,
        &format!(
            "fixed-frame kinematics residual {worst_residual:.3e} (<=1e-8), \
             orthogonality drift {worst_ortho:.3e} (<=1e-9)"
        ),
        started,
    );
}

#[test]
fn criterion_4_rolling_constraint_identities() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for n in 1..=3 {
        let p = spherical_params(n);
        let mut rng = SplitMix64::new(4000 + n as u64);
        let s = sample_spherical_state(&mut rng, &p);
        let report = drift_report(
            &SystemDescriptor::SphericalReduced {
                params: p,
                initial: s,
            },
            &RunSpec::new(1e-3, 10.0),
        )
        .unwrap();
        worst = worst.max(report.max_constraint_residual);
    }
    check(
        "criterion 4 (rolling-constraint identities)",
        worst <= 1e-13,
        &format!("max residual over all sampled states {worst:.3e} (<=1e-13)"),
        started,
    );
}

#[test]
fn criterion_5_planar_reduced_oracle_equivalence() {
    let started = Instant::now();
    let p = planar_params();
    let mut rng = SplitMix64::new(5001);
    let mut worst_deriv = 0.0f64;
    for _ in 0..200 {
        let full = sample_planar_full(&mut rng, &p);
        let o = OracleState::from_full(&p, &full);
        let via_oracle = reduced_rate_via_oracle(&p, &o).unwrap();
        let direct = planar::reduced_rhs(&p, &o.reduced(&p).unwrap());
        worst_deriv = worst_deriv
            .max((via_oracle.v_dot - direct.v_dot).norm_inf())
            .max((via_oracle.moments_dot - direct.moments_dot).norm_inf());
    }

    let full = sample_planar_full(&mut rng, &p);
    let report = drift_report(
        &SystemDescriptor::OracleCompare {
            params: p,
            initial: full,
        },
        &RunSpec::new(1e-3, 2.0),
    )
    .unwrap();
    let divergence = report.oracle_divergence.unwrap();

    let pass = worst_deriv <= 1e-9 && divergence <= 1e-7;
    check(
        "criterion 5 (planar reduced/oracle equivalence)",
        pass,
        &format!(
            "derivative agreement {worst_deriv:.3e} (<=1e-9) over 200 states, \
             trajectory divergence {divergence:.3e} (<=1e-7) over t=2"
        ),
        started,
    );
}

#[test]
fn criterion_6_planar_integrals_and_measure() {
    let started = Instant::now();
    let p = planar_params();
    let mut rng = SplitMix64::new(6001);
    let full = sample_planar_full(&mut rng, &p);
    let report = drift_report(
        &SystemDescriptor::PlanarFull {
            params: p.clone(),
            initial: full,
        },
        &RunSpec::new(1e-3, 10.0),
    )
    .unwrap();
    let f_drift = report
        .integrals
        .iter()
        .filter(|i| i.name.starts_with('f'))
        .fold(0.0f64, |acc, i| acc.max(i.relative_drift));
    let triangle = report.triangle_drift.unwrap();

    // Level-set divergence identity, including the closed-form div(X)
    // cross-check, at states around a generic point.
    let level = LevelSetParams::new(0.35, -0.2, 0.8).unwrap();
    let mut run = RunSpec::new(1e-3, 1.0);
    run.divergence_samples = 50;
    run.seed = 6002;
    let level_report = drift_report(
        &SystemDescriptor::LevelSet {
            params: p,
            level,
            initial: Vec3::new(0.6, 0.3, -0.2),
        },
        &run,
    )
    .unwrap();
    let div_residual = level_report.divergence_residual.unwrap();

    let pass = f_drift <= 1e-8 && div_residual <= 1e-6 && triangle <= 1e-8;
    check(
        "criterion 6 (planar integrals and measure)",
        pass,
        &format!(
            "f1..f4 relative drift {f_drift:.3e} (<=1e-8), level-set divergence residual \
             {div_residual:.3e} (<=1e-6), triangle drift {triangle:.3e} (<=1e-8)"
        ),
        started,
    );
}

#[test]
fn criterion_7_quadrature_case() {
    let started = Instant::now();
    let p = planar_params();
    let level = LevelSetParams::new(0.0, 0.0, 0.8).unwrap();
    let report = drift_report(
        &SystemDescriptor::LevelSet {
            params: p,
            level,
            initial: Vec3::new(0.9, 0.5, -0.1),
        },
        &RunSpec::new(1e-3, 10.0),
    )
    .unwrap();
    let closed = report.closed_form_deviation.unwrap();
    let vphi_drift = report
        .integrals
        .iter()
        .find(|i| i.name == "v_phi")
        .unwrap()
        .max_abs_drift;
    let pass = closed <= 1e-8 && vphi_drift <= 1e-12;
    check(
        "criterion 7 (trigonometric quadrature case)",
        pass,
        &format!(
            "closed-form deviation {closed:.3e} (<=1e-8), v_phi drift {vphi_drift:.3e} (<=1e-12)"
        ),
        started,
    );
}

#[test]
fn criterion_8_limit_consistency() {
    let started = Instant::now();
    let balls = vec![SphericalBall {
        inertia: 0.4,
        mass: 1.0,
        spin: 0.0,
    }];
    let flat: SphericalParams<f64> =
        SphericalParams::new(1e9, 1.0, Vec3::new(2.0, 3.0, 4.0), balls).unwrap();
    let eps_error = (flat.epsilon() - 0.5).abs();

    // Fixed-centers family: override the kinematic ratio to 1, zero spins,
    // and require the coupling operator to follow the plain commutator
    // equation.
    let mut p = spherical_params(2).with_epsilon_override(1.0);
    for b in &mut p.balls {
        b.spin = 0.0;
    }
    let mut rng = SplitMix64::new(8001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let s = sample_spherical_state(&mut rng, &p);
        let d = spherical::reduced_rhs(&p, s.omega, &s.gammas);
        let analytic = spherical::coupling_rate(&p, &s.gammas, &d.gamma_dots);
        let expected = bearing_dynamics::commutator(
            spherical::coupling_operator(&p, &s.gammas).mat(),
            bearing_dynamics::hat(s.omega).mat(),
        );
        worst = worst.max(analytic.max_diff(&expected));
    }

    let pass = eps_error <= 1e-8 && worst <= 1e-10;
    check(
        "criterion 8 (limit consistency)",
        pass,
        &format!(
            "|eps(R=1e9) - 1/2| = {eps_error:.3e} (<=1e-8), fixed-centers commutator residual \
             {worst:.3e} (<=1e-10)"
        ),
        started,
    );
}

#[test]
fn criterion_9_integrator_order() {
    let started = Instant::now();
    struct Exp;
    impl VectorField<f64> for Exp {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dydt: &mut [f64]) {
            dydt[0] = y[0];
        }
    }
    let exp_order = convergence_order(&Exp, &[1.0], 0.05, 1.0).unwrap();

    let top = SphericalParams::free_rigid_body(Vec3::new(1.0, 2.0, 4.0));
    let field = SphericalReducedField { params: &top };
    let top_order = convergence_order(&field, &[0.3, 1.0, -0.5], 0.02, 1.0).unwrap();

    let pass = exp_order >= 3.9 && top_order >= 3.9;
    check(
        "criterion 9 (integrator convergence order)",
        pass,
        &format!("exponential order {exp_order:.3}, rigid-body order {top_order:.3} (both >=3.9)"),
        started,
    );
}

/// The reduced planar field conserves its integrals when integrated
/// directly as well; kept as a cheap cross-check that the acceptance
/// scenarios do not depend on the pose-space embedding.
#[test]
fn reduced_planar_trajectories_conserve_integrals() {
    let p = planar_params();
    let mut rng = SplitMix64::new(777);
    let v = Vec3::new(
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
    );
    let n1 = rng.uniform(-0.5, 0.5);
    let n2 = rng.uniform(-0.5, 0.5);
    let m = (n1 * n1 + n2 * n2 + 0.9) / p.delta();
    let s = PlanarReducedState::new(&p, v, Vec3::new(n1, n2, m)).unwrap();
    let field = planar::PlanarReducedField { params: &p };
    let res = integrate(&field, &s.to_vec(), 1e-3, 10.0, 100, &mut NullObserver).unwrap();
    let f0 = planar::integrals(&p, &s);
    for y in &res.states {
        let st = PlanarReducedState::from_slice(&p, y).unwrap();
        let f = planar::integrals(&p, &st);
        assert!((f.f1 - f0.f1).abs() / f0.f1.abs().max(1.0) < 1e-8);
        assert!((f.f2 - f0.f2).abs() / f0.f2.abs().max(1.0) < 1e-8);
        assert!((f.f3 - f0.f3).abs() / f0.f3.abs().max(1.0) < 1e-8);
        assert!((f.f4 - f0.f4).abs() / f0.f4.abs().max(1.0) < 1e-8);
    }
}
