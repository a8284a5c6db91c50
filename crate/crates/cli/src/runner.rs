//! Scenario execution: build the system from a validated config, run the
//! drift report, evaluate the enabled checks, and emit CSV/JSON artifacts.

use std::fmt::Write as _;

use bearing_dynamics::planar::{
    LevelSetParams, PlanarBall, PlanarFullState, PlanarParams, PlanarReducedState,
};
use bearing_dynamics::spherical::{
    self, FullSphericalState, SphericalBall, SphericalParams, SphericalState,
};
use bearing_dynamics::verification::{
    drift_report_with_trajectory, sample_spherical_state, DriftReport, RunOutput, RunSpec,
    SystemDescriptor,
};
use bearing_dynamics::{hat, Vec3};

use crate::config::{ChecksConfig, ScenarioConfig, SystemConfig};

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Runtime(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub report: DriftReport,
    pub checks: Vec<CheckResult>,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn build_spherical_params(
    cfg: &crate::config::SphericalParamsConfig,
) -> Result<SphericalParams<f64>, RunError> {
    let balls = cfg
        .balls
        .iter()
        .map(|b| SphericalBall {
            inertia: b.inertia,
            mass: b.mass,
            spin: b.spin,
        })
        .collect();
    let mut p = SphericalParams::new(
        cfg.fixed_radius,
        cfg.ball_radius,
        Vec3::new(cfg.inertia[0], cfg.inertia[1], cfg.inertia[2]),
        balls,
    )
    .map_err(|e| RunError::Config(e.to_string()))?;
    if let Some(eps) = cfg.epsilon_override {
        p = p.with_epsilon_override(eps);
    }
    Ok(p)
}

fn build_planar_params(
    cfg: &crate::config::PlanarParamsConfig,
) -> Result<PlanarParams<f64>, RunError> {
    PlanarParams::new(
        cfg.radius,
        cfg.plate_mass,
        cfg.plate_inertia,
        cfg.balls
            .iter()
            .map(|b| PlanarBall {
                mass: b.mass,
                inertia: b.inertia,
            })
            .collect(),
    )
    .map_err(|e| RunError::Config(e.to_string()))
}

fn build_planar_full(
    p: &PlanarParams<f64>,
    init: &crate::config::PlanarInitialConfig,
) -> Result<PlanarFullState<f64>, RunError> {
    let centers = init
        .centers
        .clone()
        .ok_or_else(|| RunError::Config("this planar run needs 'initial.centers'".into()))?;
    if centers.len() != p.n_balls() {
        return Err(RunError::Config(format!(
            "{} centers for {} balls",
            centers.len(),
            p.n_balls()
        )));
    }
    let pose = init.pose.unwrap_or([0.0; 3]);
    let spins = init.spins.clone().unwrap_or_else(|| vec![0.0; p.n_balls()]);
    if spins.len() != p.n_balls() {
        return Err(RunError::Config("'initial.spins' length mismatch".into()));
    }
    Ok(PlanarFullState {
        x: pose[0],
        y: pose[1],
        phi: pose[2],
        vx: init.v[0],
        vy: init.v[1],
        vphi: init.v[2],
        centers,
        spins,
    })
}

fn build_descriptor(cfg: &ScenarioConfig) -> Result<SystemDescriptor, RunError> {
    match &cfg.system {
        SystemConfig::Spherical { params, initial } => {
            let p = build_spherical_params(params)?;
            if initial.gammas.len() != p.n_balls() {
                return Err(RunError::Config(format!(
                    "{} directions for {} balls",
                    initial.gammas.len(),
                    p.n_balls()
                )));
            }
            let omega = Vec3::new(initial.omega[0], initial.omega[1], initial.omega[2]);
            let gammas = initial
                .gammas
                .iter()
                .map(|g| Vec3::new(g[0], g[1], g[2]))
                .collect();
            let state = SphericalState::from_raw(omega, gammas)
                .map_err(|e| RunError::Config(e.to_string()))?;
            if initial.full {
                Ok(SystemDescriptor::SphericalFull {
                    params: p,
                    initial: FullSphericalState::from_reduced(state),
                })
            } else {
                Ok(SystemDescriptor::SphericalReduced {
                    params: p,
                    initial: state,
                })
            }
        }
        SystemConfig::Planar { params, initial } => {
            let p = build_planar_params(params)?;
            if initial.centers.is_some() {
                let full = build_planar_full(&p, initial)?;
                Ok(SystemDescriptor::PlanarFull {
                    params: p,
                    initial: full,
                })
            } else if let Some(nvec) = initial.nvec {
                let state = PlanarReducedState::new(
                    &p,
                    Vec3::new(initial.v[0], initial.v[1], initial.v[2]),
                    Vec3::new(nvec[0], nvec[1], nvec[2]),
                )
                .map_err(|e| RunError::Config(e.to_string()))?;
                Ok(SystemDescriptor::PlanarReduced {
                    params: p,
                    initial: state,
                })
            } else {
                Err(RunError::Config(
                    "planar initial state needs 'centers' or 'nvec'".into(),
                ))
            }
        }
        SystemConfig::PlanarLevelSet { params, initial } => {
            let p = build_planar_params(params)?;
            let level = LevelSetParams::new(initial.d[0], initial.d[1], initial.d[2])
                .map_err(|e| RunError::Config(e.to_string()))?;
            Ok(SystemDescriptor::LevelSet {
                params: p,
                level,
                initial: Vec3::new(initial.y[0], initial.y[1], initial.y[2]),
            })
        }
        SystemConfig::PlanarOracleCompare { params, initial } => {
            let p = build_planar_params(params)?;
            let full = build_planar_full(&p, initial)?;
            Ok(SystemDescriptor::OracleCompare {
                params: p,
                initial: full,
            })
        }
    }
}

fn build_run_spec(cfg: &ScenarioConfig, seed: u64) -> RunSpec {
    let mut run = RunSpec::new(cfg.integration.h, cfg.integration.t_end);
    run.sample_every = cfg.integration.sample_every;
    run.seed = seed;
    if let Some(t) = &cfg.checks.measure_transport {
        run.transport_t_end = Some(t.t_end);
        run.unit_density = t.unit_density;
    }
    if let Some(d) = &cfg.checks.divergence {
        run.divergence_samples = d.samples;
    }
    run.measure_order = cfg.checks.order.is_some();
    run
}

/// Max residual of the coupling commutator identity
/// `dC/dt = eps [C, hat(Omega)]` at random admissible states.
fn coupling_commutator_residual(p: &SphericalParams<f64>, samples: usize, seed: u64) -> f64 {
    let mut rng = bearing_dynamics::rng::SplitMix64::new(seed ^ 0xc0_4d);
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let s = sample_spherical_state(&mut rng, p);
        let d = spherical::reduced_rhs(p, s.omega, &s.gammas);
        let analytic = spherical::coupling_rate(p, &s.gammas, &d.gamma_dots);
        let expected = bearing_dynamics::commutator(
            spherical::coupling_operator(p, &s.gammas).mat(),
            hat(s.omega).mat(),
        )
        .scale(p.epsilon());
        worst = worst.max(analytic.max_diff(&expected));
    }
    worst
}

fn upper_bound_check(
    checks: &mut Vec<CheckResult>,
    name: &str,
    value: Option<f64>,
    tolerance: f64,
) {
    match value {
        Some(v) => checks.push(CheckResult {
            name: name.to_string(),
            passed: v <= tolerance,
            detail: format!("{v:.3e} (tolerance {tolerance:.3e})"),
        }),
        None => checks.push(CheckResult {
            name: name.to_string(),
            passed: false,
            detail: "not computed for this system".to_string(),
        }),
    }
}

fn evaluate_checks(
    cfg: &ChecksConfig,
    desc: &SystemDescriptor,
    report: &DriftReport,
    seed: u64,
) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if let Some(c) = &cfg.integral_drift {
        upper_bound_check(
            &mut out,
            "integral_drift",
            Some(report.worst_relative_drift()),
            c.tolerance,
        );
    }
    if let Some(c) = &cfg.constraint_residuals {
        upper_bound_check(
            &mut out,
            "constraint_residuals",
            Some(report.max_constraint_residual),
            c.tolerance,
        );
    }
    if let Some(c) = &cfg.measure_transport {
        upper_bound_check(
            &mut out,
            "measure_transport",
            report.measure_transport_deviation,
            c.tolerance,
        );
    }
    if let Some(c) = &cfg.divergence {
        upper_bound_check(
            &mut out,
            "divergence",
            report.divergence_residual,
            c.tolerance,
        );
    }
    if let Some(c) = &cfg.reconstruction {
        upper_bound_check(
            &mut out,
            "reconstruction",
            report.reconstruction_residual,
            c.tolerance,
        );
        upper_bound_check(
            &mut out,
            "reconstruction.orthogonality",
            report.orthogonality_drift,
            c.orthogonality_tolerance,
        );
    }
    if let Some(c) = &cfg.triangle {
        upper_bound_check(&mut out, "triangle", report.triangle_drift, c.tolerance);
    }
    if let Some(c) = &cfg.closed_form {
        upper_bound_check(
            &mut out,
            "closed_form",
            report.closed_form_deviation,
            c.tolerance,
        );
        let vphi = report
            .integrals
            .iter()
            .find(|i| i.name == "v_phi")
            .map(|i| i.max_abs_drift);
        upper_bound_check(&mut out, "closed_form.v_phi", vphi, c.v_phi_tolerance);
    }
    if let Some(c) = &cfg.oracle {
        upper_bound_check(
            &mut out,
            "oracle.trajectory",
            report.oracle_divergence,
            c.trajectory_tolerance,
        );
        upper_bound_check(
            &mut out,
            "oracle.elimination",
            report.oracle_elimination_residual,
            c.elimination_tolerance,
        );
    }
    if let Some(c) = &cfg.coupling_commutator {
        let value = match desc {
            SystemDescriptor::SphericalReduced { params, .. }
            | SystemDescriptor::SphericalFull { params, .. } => {
                Some(coupling_commutator_residual(params, c.samples, seed))
            }
            _ => None,
        };
        upper_bound_check(&mut out, "coupling_commutator", value, c.tolerance);
    }
    if let Some(c) = &cfg.order {
        match report.convergence_order {
            Some(order) => out.push(CheckResult {
                name: "order".to_string(),
                passed: order >= c.min_order,
                detail: format!("observed {order:.3} (minimum {})", c.min_order),
            }),
            None => out.push(CheckResult {
                name: "order".to_string(),
                passed: false,
                detail: "not computed for this system".to_string(),
            }),
        }
    }
    if cfg.admissibility.unwrap_or(true) {
        let separation_clean = report.separation_ok.unwrap_or(true);
        out.push(CheckResult {
            name: "admissibility".to_string(),
            passed: report.admissible && separation_clean,
            detail: format!(
                "region flag {}, separation flag {}",
                report.admissible, separation_clean
            ),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_table(desc: &SystemDescriptor, out: &RunOutput) -> (Vec<String>, Vec<Vec<f64>>) {
    match desc {
        SystemDescriptor::SphericalReduced { params, .. }
        | SystemDescriptor::SphericalFull { params, .. } => {
            let n = params.n_balls();
            let full = matches!(desc, SystemDescriptor::SphericalFull { .. });
            let mut headers = vec![
                "t".into(),
                "omega_x".into(),
                "omega_y".into(),
                "omega_z".into(),
            ];
            for i in 1..=n {
                for axis in ["x", "y", "z"] {
                    headers.push(format!("gamma{i}_{axis}"));
                }
            }
            headers.extend(["F1".into(), "F2".into(), "T".into(), "mu".into()]);
            if full {
                for r in 0..3 {
                    for c in 0..3 {
                        headers.push(format!("g_{}{}", r + 1, c + 1));
                    }
                }
                for i in 1..=n {
                    for r in 0..3 {
                        for c in 0..3 {
                            headers.push(format!("g{i}_{}{}", r + 1, c + 1));
                        }
                    }
                }
            }
            let reduced_dim = 3 + 3 * n;
            let rows = out
                .times
                .iter()
                .zip(&out.states)
                .map(|(t, y)| {
                    let (omega, gammas) = spherical::unpack_reduced(&y[..reduced_dim]);
                    let ints = spherical::integrals(params, omega, &gammas);
                    let mu = spherical::measure_density(params, &gammas);
                    let mut row = vec![*t];
                    row.extend_from_slice(&y[..reduced_dim]);
                    row.extend([ints.f1, ints.f2, ints.kinetic, mu]);
                    if full {
                        row.extend_from_slice(&y[reduced_dim..]);
                    }
                    row
                })
                .collect();
            (headers, rows)
        }
        SystemDescriptor::PlanarReduced { params, .. } => {
            let headers = planar_headers(false, 0);
            let rows = out
                .times
                .iter()
                .zip(&out.states)
                .map(|(t, y)| planar_row(params, *t, y, None))
                .collect();
            (headers, rows)
        }
        SystemDescriptor::PlanarFull { params, initial } => {
            let n = params.n_balls();
            let headers = planar_headers(true, n);
            let rows = out
                .times
                .iter()
                .zip(&out.states)
                .map(|(t, y)| {
                    let f = PlanarFullState::from_slice(y, initial.spins.clone())
                        .expect("trajectory layout");
                    let moments = f.aggregates(params);
                    let reduced = [f.vx, f.vy, f.vphi, moments.x, moments.y, moments.z];
                    let mut pose = vec![f.x, f.y, f.phi];
                    for c in &f.centers {
                        pose.extend_from_slice(c);
                    }
                    planar_row(params, *t, &reduced, Some(&pose))
                })
                .collect();
            (headers, rows)
        }
        SystemDescriptor::OracleCompare { params, .. } => {
            let n = params.n_balls();
            let headers = planar_headers(true, n);
            let rows = out
                .times
                .iter()
                .zip(&out.states)
                .map(|(t, y)| {
                    let o = bearing_dynamics::oracle::OracleState::from_slice(y, n)
                        .expect("trajectory layout");
                    let f = o.to_full();
                    let moments = f.aggregates(params);
                    let reduced = [f.vx, f.vy, f.vphi, moments.x, moments.y, moments.z];
                    let mut pose = vec![f.x, f.y, f.phi];
                    for c in &f.centers {
                        pose.extend_from_slice(c);
                    }
                    planar_row(params, *t, &reduced, Some(&pose))
                })
                .collect();
            (headers, rows)
        }
        SystemDescriptor::LevelSet { params, level, .. } => {
            let headers = vec![
                "t".into(),
                "v_phi".into(),
                "N1".into(),
                "N2".into(),
                "mu".into(),
            ];
            let rows = out
                .times
                .iter()
                .zip(&out.states)
                .map(|(t, y)| {
                    let mu = bearing_dynamics::planar::level_set_det(
                        params,
                        level,
                        Vec3::new(y[0], y[1], y[2]),
                    )
                    .sqrt();
                    vec![*t, y[0], y[1], y[2], mu]
                })
                .collect();
            (headers, rows)
        }
    }
}

fn planar_headers(with_pose: bool, n: usize) -> Vec<String> {
    let mut headers = vec![
        "t".into(),
        "v_x".into(),
        "v_y".into(),
        "v_phi".into(),
        "N1".into(),
        "N2".into(),
        "M".into(),
        "f1".into(),
        "f2".into(),
        "f3".into(),
        "f4".into(),
        "mu".into(),
    ];
    if with_pose {
        headers.extend(["x".into(), "y".into(), "phi".into()]);
        for i in 1..=n {
            headers.push(format!("x{i}"));
            headers.push(format!("y{i}"));
        }
    }
    headers
}

fn planar_row(
    params: &PlanarParams<f64>,
    t: f64,
    reduced: &[f64],
    pose: Option<&[f64]>,
) -> Vec<f64> {
    let s = PlanarReducedState {
        v: Vec3::new(reduced[0], reduced[1], reduced[2]),
        moments: Vec3::new(reduced[3], reduced[4], reduced[5]),
    };
    let ints = bearing_dynamics::planar::integrals(params, &s);
    let mu = bearing_dynamics::planar::measure_density(params, s.moments);
    let mut row = vec![t];
    row.extend_from_slice(reduced);
    row.extend([ints.f1, ints.f2, ints.f3, ints.f4, mu]);
    if let Some(p) = pose {
        row.extend_from_slice(p);
    }
    row
}

fn write_csv(path: &str, headers: &[String], rows: &[Vec<f64>]) -> Result<(), RunError> {
    let mut text = String::new();
    text.push_str(&headers.join(","));
    text.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                text.push(',');
            }
            let _ = write!(text, "{}", fmt17(*v));
            first = false;
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| RunError::Io(format!("writing {path}: {e}")))
}

/// Execute a validated scenario: run the system, evaluate the enabled
/// checks, and write the requested artifacts.
pub fn execute(cfg: &ScenarioConfig, seed: u64, quiet: bool) -> Result<RunSummary, RunError> {
    let desc = build_descriptor(cfg)?;
    let run = build_run_spec(cfg, seed);
    let output =
        drift_report_with_trajectory(&desc, &run).map_err(|e| RunError::Runtime(e.to_string()))?;

    if let Some(path) = &cfg.output.csv_path {
        let (headers, rows) = csv_table(&desc, &output);
        write_csv(path, &headers, &rows)?;
        if !quiet {
            println!("trajectory written to {path}");
        }
    }
    if let Some(path) = &cfg.output.report_path {
        let json = serde_json::to_string_pretty(&output.report)
            .map_err(|e| RunError::Runtime(e.to_string()))?;
        std::fs::write(path, json + "\n")
            .map_err(|e| RunError::Io(format!("writing {path}: {e}")))?;
        if !quiet {
            println!("report written to {path}");
        }
    }

    let checks = evaluate_checks(&cfg.checks, &desc, &output.report, seed);
    Ok(RunSummary {
        report: output.report,
        checks,
    })
}
