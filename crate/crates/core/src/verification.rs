//! Executable checks for the conservation and measure statements:
//! weighted divergence identities, measure transport along the tangent
//! flow, first-integral drift, constraint residuals, and reduced-vs-oracle
//! equivalence, aggregated into a serializable [`DriftReport`].

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::integrators::{
    convergence_order, fd_jacobian, integrate, tangent_flow, IntegratorError, NullObserver,
    VectorField,
};
use crate::oracle::{
    elimination_residual, elimination_residual_variant, solve_multipliers, OracleError,
    OracleField, OracleState,
};
use crate::planar::{
    self, LevelSetField, LevelSetParams, PlanarError, PlanarFullState, PlanarKinematicField,
    PlanarParams, PlanarReducedField, PlanarReducedState,
};
use crate::rng::SplitMix64;
use crate::scalar::{real, Real};
use crate::spherical::{
    self, space_kinematics_residual, FullSphericalState, SphericalFullField, SphericalParams,
    SphericalReducedField, SphericalRenormalizer, SphericalState,
};

#[derive(Debug, thiserror::Error)]
pub enum VerificationError {
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
    #[error(transparent)]
    Spherical(#[from] crate::spherical::SphericalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("inadmissible initial state: {0}")]
    Inadmissible(String),
}

// ---------------------------------------------------------------------------
// Pointwise divergence and flow transport
// ---------------------------------------------------------------------------

/// The two halves of the measure identity at a state: the density rate
/// `<grad mu, X>` and the weighted divergence `mu div X`, both by central
/// finite differences. An invariant measure makes their sum vanish.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceCheck<S> {
    pub mu_rate: S,
    pub weighted_div: S,
}

impl<S: Real> DivergenceCheck<S> {
    /// Signed residual `d(mu)/dt + mu div X`.
    pub fn residual(&self) -> S {
        self.mu_rate + self.weighted_div
    }

    /// Residual scaled by the magnitude of the two cancelling terms.
    pub fn scaled_residual(&self) -> S {
        self.residual().abs() / S::one().max(self.mu_rate.abs() + self.weighted_div.abs())
    }
}

/// Evaluate the measure identity pointwise. The gradient of the density
/// and the field divergence use central differences with steps scaled per
/// component, since states mix quantities of very different magnitude.
pub fn weighted_divergence<S: Real, F: VectorField<S>>(
    field: &F,
    density: impl Fn(&[S]) -> S,
    y: &[S],
) -> DivergenceCheck<S> {
    let n = field.dim();
    let eps = real::<S>(1e-6);
    let mut rate = vec![S::zero(); n];
    field.eval(y, &mut rate);

    let mut mu_rate = S::zero();
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    for j in 0..n {
        let step = eps * S::one().max(y[j].abs());
        yp[j] = y[j] + step;
        ym[j] = y[j] - step;
        let grad_j = (density(&yp) - density(&ym)) / (yp[j] - ym[j]);
        mu_rate += grad_j * rate[j];
        yp[j] = y[j];
        ym[j] = y[j];
    }

    let jac = fd_jacobian(field, y);
    let mut div = S::zero();
    for j in 0..n {
        div += jac[(j, j)];
    }
    DivergenceCheck {
        mu_rate,
        weighted_div: density(y) * div,
    }
}

/// Integrate the tangent flow and return the worst deviation of the
/// transported volume, `max_t |mu(z(t)) det J(t) / mu(z(0)) - 1|`.
pub fn transport_check<S: Real, F: VectorField<S>>(
    field: &F,
    density: impl Fn(&[S]) -> S,
    y0: &[S],
    h: S,
    t_end: S,
    sample_every: usize,
) -> Result<S, VerificationError> {
    let flow = tangent_flow(field, y0, h, t_end, sample_every)?;
    let mu0 = density(y0);
    let jacobians = flow.jacobians.as_ref().expect("tangent flow carries J");
    let mut worst = S::zero();
    for (state, jac) in flow.states.iter().zip(jacobians) {
        let det = jac.det().map_err(|e| {
            VerificationError::Inadmissible(format!("tangent flow determinant failed: {e}"))
        })?;
        let ratio = density(state) * det / mu0;
        worst = worst.max((ratio - S::one()).abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// Random admissible states
// ---------------------------------------------------------------------------

/// Angular velocity uniform in [-1, 1]^3; directions uniform on the sphere,
/// rejection-sampled to respect the pairwise contact bound.
pub fn sample_spherical_state(
    rng: &mut SplitMix64,
    p: &SphericalParams<f64>,
) -> SphericalState<f64> {
    let min_sep = p.min_separation();
    loop {
        let omega = Vec3::new(
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
        );
        let gammas: Vec<Vec3<f64>> = (0..p.n_balls())
            .map(|_| Vec3::from_array(rng.unit_sphere()))
            .collect();
        let admissible = gammas.iter().enumerate().all(|(i, gi)| {
            gammas[i + 1..]
                .iter()
                .all(|gj| (*gi - *gj).norm() > min_sep)
        });
        if admissible {
            return SphericalState::from_raw(omega, gammas).expect("unit directions");
        }
    }
}

/// Velocities uniform in [-1, 1]; moments drawn with a strict margin inside
/// the admissible region.
pub fn sample_planar_reduced(
    rng: &mut SplitMix64,
    p: &PlanarParams<f64>,
) -> PlanarReducedState<f64> {
    let v = Vec3::new(
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
        rng.uniform(-1.0, 1.0),
    );
    let n1 = rng.uniform(-1.0, 1.0);
    let n2 = rng.uniform(-1.0, 1.0);
    let m = (n1 * n1 + n2 * n2 + rng.uniform(0.2, 2.0)) / p.delta();
    PlanarReducedState::new(p, v, Vec3::new(n1, n2, m)).expect("margin is positive")
}

/// Ball centers in an annulus around the plate center, rejection-sampled to
/// respect the pairwise separation constraints; velocities uniform.
pub fn sample_planar_full(rng: &mut SplitMix64, p: &PlanarParams<f64>) -> PlanarFullState<f64> {
    let n = p.n_balls();
    let two_r = 2.0 * p.radius;
    loop {
        let x = rng.uniform(-1.0, 1.0);
        let y = rng.uniform(-1.0, 1.0);
        let centers: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                let rho = rng.uniform(2.5 * p.radius, 5.0 * p.radius);
                let theta = rng.uniform(0.0, core::f64::consts::TAU);
                [x + rho * theta.cos(), y + rho * theta.sin()]
            })
            .collect();
        let ok = (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let dx = centers[i][0] - centers[j][0];
                let dy = centers[i][1] - centers[j][1];
                (dx * dx + dy * dy).sqrt() > two_r * 1.05
            })
        });
        if !ok {
            continue;
        }
        return PlanarFullState {
            x,
            y,
            phi: rng.uniform(-1.0, 1.0),
            vx: rng.uniform(-1.0, 1.0),
            vy: rng.uniform(-1.0, 1.0),
            vphi: rng.uniform(-1.0, 1.0),
            centers,
            spins: (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        };
    }
}

// ---------------------------------------------------------------------------
// Drift report
// ---------------------------------------------------------------------------

/// Per-integral drift along a trajectory. The relative drift normalizes by
/// `max(1, |initial|)` to avoid blowup for near-zero integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralDrift {
    pub name: String,
    pub initial: f64,
    pub max_abs_drift: f64,
    pub final_drift: f64,
    pub relative_drift: f64,
}

/// Aggregated verification results for one run. Optional fields stay unset
/// for systems where the corresponding check does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub system: String,
    pub n_balls: usize,
    pub h: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub seed: u64,
    pub integrals: Vec<IntegralDrift>,
    pub max_constraint_residual: f64,
    pub admissible: bool,
    pub separation_ok: Option<bool>,
    pub measure_transport_deviation: Option<f64>,
    pub divergence_residual: Option<f64>,
    pub triangle_drift: Option<f64>,
    pub reconstruction_residual: Option<f64>,
    pub orthogonality_drift: Option<f64>,
    pub direction_norm_drift: Option<f64>,
    pub closed_form_deviation: Option<f64>,
    pub oracle_divergence: Option<f64>,
    pub oracle_elimination_residual: Option<f64>,
    pub oracle_elimination_variant_residual: Option<f64>,
    pub convergence_order: Option<f64>,
    pub warnings: Vec<String>,
}

impl DriftReport {
    fn new(system: &str, n_balls: usize, run: &RunSpec) -> Self {
        Self {
            system: system.to_string(),
            n_balls,
            h: run.h,
            t_end: run.t_end,
            sample_every: run.sample_every,
            seed: run.seed,
            integrals: Vec::new(),
            max_constraint_residual: 0.0,
            admissible: true,
            separation_ok: None,
            measure_transport_deviation: None,
            divergence_residual: None,
            triangle_drift: None,
            reconstruction_residual: None,
            orthogonality_drift: None,
            direction_norm_drift: None,
            closed_form_deviation: None,
            oracle_divergence: None,
            oracle_elimination_residual: None,
            oracle_elimination_variant_residual: None,
            convergence_order: None,
            warnings: Vec::new(),
        }
    }

    /// Largest relative drift across all tracked integrals.
    pub fn worst_relative_drift(&self) -> f64 {
        self.integrals
            .iter()
            .fold(0.0, |acc, i| acc.max(i.relative_drift))
    }
}

/// Integration span and optional extra checks for [`drift_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub h: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub seed: u64,
    /// Horizon for the measure-transport check; `None` skips it.
    pub transport_t_end: Option<f64>,
    /// Replace the measure density by 1 (negative control).
    pub unit_density: bool,
    /// Number of random states for the pointwise divergence check; 0 skips.
    pub divergence_samples: usize,
    /// Measure the integrator's convergence order on this system.
    pub measure_order: bool,
}

impl RunSpec {
    pub fn new(h: f64, t_end: f64) -> Self {
        Self {
            h,
            t_end,
            sample_every: 10,
            seed: 0,
            transport_t_end: None,
            unit_density: false,
            divergence_samples: 0,
            measure_order: false,
        }
    }
}

/// Which system to run and from where.
#[derive(Debug, Clone)]
pub enum SystemDescriptor {
    SphericalReduced {
        params: SphericalParams<f64>,
        initial: SphericalState<f64>,
    },
    SphericalFull {
        params: SphericalParams<f64>,
        initial: FullSphericalState<f64>,
    },
    PlanarFull {
        params: PlanarParams<f64>,
        initial: PlanarFullState<f64>,
    },
    PlanarReduced {
        params: PlanarParams<f64>,
        initial: PlanarReducedState<f64>,
    },
    LevelSet {
        params: PlanarParams<f64>,
        level: LevelSetParams<f64>,
        initial: Vec3<f64>,
    },
    OracleCompare {
        params: PlanarParams<f64>,
        initial: PlanarFullState<f64>,
    },
}

struct Tracker {
    names: Vec<String>,
    initial: Vec<f64>,
    max_abs: Vec<f64>,
    last: Vec<f64>,
}

impl Tracker {
    fn new(names: Vec<String>, first: Vec<f64>) -> Self {
        let n = first.len();
        assert_eq!(names.len(), n);
        Self {
            names,
            initial: first.clone(),
            max_abs: vec![0.0; n],
            last: first,
        }
    }

    fn update(&mut self, values: &[f64]) {
        for (k, v) in values.iter().enumerate() {
            let drift = (v - self.initial[k]).abs();
            if drift > self.max_abs[k] {
                self.max_abs[k] = drift;
            }
            self.last[k] = *v;
        }
    }

    fn finish(self) -> Vec<IntegralDrift> {
        self.names
            .into_iter()
            .enumerate()
            .map(|(k, name)| IntegralDrift {
                name,
                initial: self.initial[k],
                max_abs_drift: self.max_abs[k],
                final_drift: (self.last[k] - self.initial[k]).abs(),
                relative_drift: self.max_abs[k] / self.initial[k].abs().max(1.0),
            })
            .collect()
    }
}

fn spherical_integral_names(n: usize) -> Vec<String> {
    let mut names = vec!["F1".to_string(), "F2".to_string(), "T".to_string()];
    for i in 0..n {
        for j in i..n {
            names.push(format!("G{}{}", i + 1, j + 1));
        }
    }
    for i in 0..n {
        names.push(format!("c{}", i + 1));
    }
    names
}

fn spherical_integral_values(p: &SphericalParams<f64>, y: &[f64]) -> Vec<f64> {
    let (omega, gammas) = spherical::unpack_reduced(y);
    let ints = spherical::integrals(p, omega, &gammas);
    let mut vals = vec![ints.f1, ints.f2, ints.kinetic];
    for i in 0..gammas.len() {
        for j in i..gammas.len() {
            vals.push(ints.gram[i][j]);
        }
    }
    for (i, b) in p.balls.iter().enumerate() {
        let w = spherical::omega_ball(p, omega, gammas[i], b.spin);
        vals.push(w.dot(gammas[i]));
    }
    vals
}

fn spherical_constraint_worst(p: &SphericalParams<f64>, y: &[f64]) -> f64 {
    let (omega, gammas) = spherical::unpack_reduced(y);
    spherical::constraint_residuals(p, omega, &gammas)
        .iter()
        .fold(0.0, |acc, r| acc.max(r.inner).max(r.outer))
}

fn spherical_separation_ok(p: &SphericalParams<f64>, y: &[f64]) -> bool {
    let (_, gammas) = spherical::unpack_reduced(y);
    let min_sep = p.min_separation();
    gammas.iter().enumerate().all(|(i, gi)| {
        gammas[i + 1..]
            .iter()
            .all(|gj| (*gi - *gj).norm() >= min_sep)
    })
}

fn spherical_divergence_residual(p: &SphericalParams<f64>, run: &RunSpec) -> f64 {
    let field = SphericalReducedField { params: p };
    let mut rng = SplitMix64::new(run.seed ^ 0x51_70_3d);
    let mut worst = 0.0f64;
    for _ in 0..run.divergence_samples {
        let s = sample_spherical_state(&mut rng, p);
        let y = s.to_vec();
        let check = if run.unit_density {
            weighted_divergence(&field, |_: &[f64]| 1.0, &y)
        } else {
            weighted_divergence(
                &field,
                |z: &[f64]| {
                    let (_, gammas) = spherical::unpack_reduced(z);
                    spherical::measure_density(p, &gammas)
                },
                &y,
            )
        };
        worst = worst.max(check.scaled_residual());
    }
    worst
}

fn planar_divergence_residual(p: &PlanarParams<f64>, run: &RunSpec) -> f64 {
    let field = PlanarReducedField { params: p };
    let mut rng = SplitMix64::new(run.seed ^ 0x51_70_3d);
    let mut worst = 0.0f64;
    for _ in 0..run.divergence_samples {
        let s = sample_planar_reduced(&mut rng, p);
        let y = s.to_vec();
        let check = if run.unit_density {
            weighted_divergence(&field, |_: &[f64]| 1.0, &y)
        } else {
            weighted_divergence(
                &field,
                |z: &[f64]| planar::measure_density(p, Vec3::new(z[3], z[4], z[5])),
                &y,
            )
        };
        worst = worst.max(check.scaled_residual());
    }
    worst
}

/// Pointwise level-set divergence check, including the closed-form
/// divergence `m (N1 d1 + N2 d2) / (2 det)` as a second route.
fn level_set_divergence_residual(
    p: &PlanarParams<f64>,
    level: &LevelSetParams<f64>,
    initial: Vec3<f64>,
    run: &RunSpec,
) -> f64 {
    let field = LevelSetField {
        params: p,
        level: *level,
    };
    let mut rng = SplitMix64::new(run.seed ^ 0x51_70_3d);
    let mut worst = 0.0f64;
    for _ in 0..run.divergence_samples.max(1) {
        let y = Vec3::new(
            initial.x + rng.uniform(-0.5, 0.5),
            initial.y + rng.uniform(-0.5, 0.5),
            initial.z + rng.uniform(-0.5, 0.5),
        );
        let ys = y.to_array();
        let density =
            |z: &[f64]| planar::level_set_det(p, level, Vec3::new(z[0], z[1], z[2])).sqrt();
        let check = if run.unit_density {
            weighted_divergence(&field, |_: &[f64]| 1.0, &ys)
        } else {
            weighted_divergence(&field, density, &ys)
        };
        worst = worst.max(check.scaled_residual());

        // Cross-check the finite-difference divergence against its closed
        // form.
        let det = planar::level_set_det(p, level, y);
        let closed = p.plate_mass * (y.y * level.d1 + y.z * level.d2) / (2.0 * det);
        let jac = fd_jacobian(&field, &ys);
        let fd_div = jac[(0, 0)] + jac[(1, 1)] + jac[(2, 2)];
        worst = worst.max((fd_div - closed).abs() / closed.abs().max(1.0));
    }
    worst
}

fn planar_integral_names(n: usize, with_positions: bool) -> Vec<String> {
    let mut names = vec![
        "f1".to_string(),
        "f2".to_string(),
        "f3".to_string(),
        "f4".to_string(),
    ];
    if with_positions {
        for i in 0..n {
            for j in i + 1..n {
                names.push(format!("d{}{}", i + 1, j + 1));
            }
        }
        for i in 0..n {
            names.push(format!("w{}_3", i + 1));
        }
    }
    names
}

fn planar_full_integral_values(p: &PlanarParams<f64>, f: &PlanarFullState<f64>) -> Vec<f64> {
    let s = PlanarReducedState {
        v: Vec3::new(f.vx, f.vy, f.vphi),
        moments: f.aggregates(p),
    };
    let ints = planar::integrals(p, &s);
    let mut vals = vec![ints.f1, ints.f2, ints.f3, ints.f4];
    vals.extend(f.pairwise_distances());
    for i in 0..f.n_balls() {
        vals.push(f.ball_omega(p, i).z);
    }
    vals
}

/// A report together with the sampled trajectory that produced it, in the
/// state layout of the system that ran (reduced, full, level-set, or
/// multiplier coordinates).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: DriftReport,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

/// Run a system and aggregate every applicable check into a report.
pub fn drift_report(
    desc: &SystemDescriptor,
    run: &RunSpec,
) -> Result<DriftReport, VerificationError> {
    Ok(drift_report_with_trajectory(desc, run)?.report)
}

/// As [`drift_report`], also returning the sampled trajectory.
pub fn drift_report_with_trajectory(
    desc: &SystemDescriptor,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    match desc {
        SystemDescriptor::SphericalReduced { params, initial } => {
            spherical_report(params, initial, None, run)
        }
        SystemDescriptor::SphericalFull { params, initial } => {
            spherical_report(params, &initial.reduced, Some(initial), run)
        }
        SystemDescriptor::PlanarFull { params, initial } => {
            planar_full_report(params, initial, run)
        }
        SystemDescriptor::PlanarReduced { params, initial } => {
            planar_reduced_report(params, initial, run)
        }
        SystemDescriptor::LevelSet {
            params,
            level,
            initial,
        } => level_set_report(params, level, *initial, run),
        SystemDescriptor::OracleCompare { params, initial } => {
            oracle_compare_report(params, initial, run)
        }
    }
}

fn spherical_report(
    params: &SphericalParams<f64>,
    initial: &SphericalState<f64>,
    full_initial: Option<&FullSphericalState<f64>>,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    let n = params.n_balls();
    let label = if full_initial.is_some() {
        "spherical-full"
    } else {
        "spherical"
    };
    let mut report = DriftReport::new(label, n, run);

    if !spherical_separation_ok(params, &initial.to_vec()) {
        return Err(VerificationError::Inadmissible(
            "ball directions closer than the contact bound".into(),
        ));
    }

    let mut tracker = Tracker::new(
        spherical_integral_names(n),
        spherical_integral_values(params, &initial.to_vec()),
    );
    let mut separation_ok = true;
    let times;
    let states;

    if let Some(full0) = full_initial {
        let field = SphericalFullField { params };
        let mut renorm = SphericalRenormalizer::full(n);
        let flow = integrate(
            &field,
            &full0.to_vec(),
            run.h,
            run.t_end,
            run.sample_every,
            &mut renorm,
        )?;
        let mut reconstruction = 0.0f64;
        for y in &flow.states {
            let reduced_dim = SphericalState::<f64>::dim(n);
            tracker.update(&spherical_integral_values(params, &y[..reduced_dim]));
            report.max_constraint_residual = report
                .max_constraint_residual
                .max(spherical_constraint_worst(params, &y[..reduced_dim]));
            separation_ok &= spherical_separation_ok(params, &y[..reduced_dim]);
            let f = FullSphericalState::from_slice(y, n)?;
            reconstruction = reconstruction.max(space_kinematics_residual(params, &f));
        }
        report.reconstruction_residual = Some(reconstruction);
        report.orthogonality_drift = Some(renorm.max_rotation_deviation);
        report.direction_norm_drift = Some(renorm.max_gamma_deviation);
        times = flow.times;
        states = flow.states;
    } else {
        let field = SphericalReducedField { params };
        let mut renorm = SphericalRenormalizer::reduced(n);
        let flow = integrate(
            &field,
            &initial.to_vec(),
            run.h,
            run.t_end,
            run.sample_every,
            &mut renorm,
        )?;
        for y in &flow.states {
            tracker.update(&spherical_integral_values(params, y));
            report.max_constraint_residual = report
                .max_constraint_residual
                .max(spherical_constraint_worst(params, y));
            separation_ok &= spherical_separation_ok(params, y);
        }
        report.direction_norm_drift = Some(renorm.max_gamma_deviation);
        times = flow.times;
        states = flow.states;
    }
    report.integrals = tracker.finish();
    report.separation_ok = Some(separation_ok);

    if let Some(t_transport) = run.transport_t_end {
        let field = SphericalReducedField { params };
        let deviation = if run.unit_density {
            transport_check(
                &field,
                |_: &[f64]| 1.0,
                &initial.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        } else {
            transport_check(
                &field,
                |z: &[f64]| {
                    let (_, gammas) = spherical::unpack_reduced(z);
                    spherical::measure_density(params, &gammas)
                },
                &initial.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        };
        report.measure_transport_deviation = Some(deviation);
    }
    if run.divergence_samples > 0 {
        report.divergence_residual = Some(spherical_divergence_residual(params, run));
    }
    if run.measure_order {
        let field = SphericalReducedField { params };
        report.convergence_order = Some(convergence_order(
            &field,
            &initial.to_vec(),
            (run.h * 20.0).min(0.05),
            1.0,
        )?);
    }
    Ok(RunOutput {
        report,
        times,
        states,
    })
}

fn planar_full_report(
    params: &PlanarParams<f64>,
    initial: &PlanarFullState<f64>,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    let n = params.n_balls();
    let mut report = DriftReport::new("planar", n, run);
    let s0 = initial.reduced(params)?;

    if initial.separation_margin(params) < 0.0 {
        return Err(VerificationError::Inadmissible(
            "ball centers closer than one diameter".into(),
        ));
    }

    let field = PlanarKinematicField { params };
    let flow = integrate(
        &field,
        &initial.to_vec(),
        run.h,
        run.t_end,
        run.sample_every,
        &mut NullObserver,
    )?;
    let mut tracker = Tracker::new(
        planar_integral_names(n, true),
        planar_full_integral_values(params, initial),
    );
    let mut separation_ok = true;
    let mut states = Vec::with_capacity(flow.states.len());
    for y in &flow.states {
        let f = PlanarFullState::from_slice(y, initial.spins.clone())?;
        tracker.update(&planar_full_integral_values(params, &f));
        separation_ok &= f.separation_margin(params) >= 0.0;
        report.admissible &= planar::admissibility_margin(params, f.aggregates(params)) > 0.0;
        states.push(f);
    }
    report.integrals = tracker.finish();
    report.separation_ok = Some(separation_ok);
    if !separation_ok {
        report
            .warnings
            .push("one-side contact constraints violated along the trajectory".into());
    }
    report.triangle_drift = Some(planar::triangle_drift(&states));

    if let Some(t_transport) = run.transport_t_end {
        let reduced_field = PlanarReducedField { params };
        let deviation = if run.unit_density {
            transport_check(
                &reduced_field,
                |_: &[f64]| 1.0,
                &s0.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        } else {
            transport_check(
                &reduced_field,
                |z: &[f64]| planar::measure_density(params, Vec3::new(z[3], z[4], z[5])),
                &s0.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        };
        report.measure_transport_deviation = Some(deviation);
    }
    if run.divergence_samples > 0 {
        report.divergence_residual = Some(planar_divergence_residual(params, run));
    }
    if run.measure_order {
        let reduced_field = PlanarReducedField { params };
        report.convergence_order = Some(convergence_order(
            &reduced_field,
            &s0.to_vec(),
            (run.h * 20.0).min(0.05),
            1.0,
        )?);
    }
    Ok(RunOutput {
        report,
        times: flow.times,
        states: flow.states,
    })
}

fn planar_reduced_report(
    params: &PlanarParams<f64>,
    initial: &PlanarReducedState<f64>,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    let n = params.n_balls();
    let mut report = DriftReport::new("planar-reduced", n, run);
    let field = PlanarReducedField { params };
    let mut guard = planar::AdmissibilityObserver::reduced(params);
    let flow = integrate(
        &field,
        &initial.to_vec(),
        run.h,
        run.t_end,
        run.sample_every,
        &mut guard,
    )?;
    let values = |y: &[f64]| {
        let s = PlanarReducedState {
            v: Vec3::new(y[0], y[1], y[2]),
            moments: Vec3::new(y[3], y[4], y[5]),
        };
        let ints = planar::integrals(params, &s);
        vec![ints.f1, ints.f2, ints.f3, ints.f4]
    };
    let mut tracker = Tracker::new(planar_integral_names(n, false), values(&initial.to_vec()));
    for y in &flow.states {
        tracker.update(&values(y));
        report.admissible &=
            planar::admissibility_margin(params, Vec3::new(y[3], y[4], y[5])) > 0.0;
    }
    report.integrals = tracker.finish();

    if let Some(t_transport) = run.transport_t_end {
        let deviation = if run.unit_density {
            transport_check(
                &field,
                |_: &[f64]| 1.0,
                &initial.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        } else {
            transport_check(
                &field,
                |z: &[f64]| planar::measure_density(params, Vec3::new(z[3], z[4], z[5])),
                &initial.to_vec(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        };
        report.measure_transport_deviation = Some(deviation);
    }
    if run.divergence_samples > 0 {
        report.divergence_residual = Some(planar_divergence_residual(params, run));
    }
    if run.measure_order {
        report.convergence_order = Some(convergence_order(
            &field,
            &initial.to_vec(),
            (run.h * 20.0).min(0.05),
            1.0,
        )?);
    }
    Ok(RunOutput {
        report,
        times: flow.times,
        states: flow.states,
    })
}

fn level_set_report(
    params: &PlanarParams<f64>,
    level: &LevelSetParams<f64>,
    initial: Vec3<f64>,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    let n = params.n_balls();
    let mut report = DriftReport::new("planar-levelset", n, run);
    // The embedding must land inside the admissible region.
    planar::level_set_embed(params, level, initial)?;

    let field = LevelSetField {
        params,
        level: *level,
    };
    let flow = integrate(
        &field,
        &initial.to_array(),
        run.h,
        run.t_end,
        run.sample_every,
        &mut NullObserver,
    )?;

    let values = |y: &[f64]| -> Result<Vec<f64>, VerificationError> {
        let embedded = planar::level_set_embed(params, level, Vec3::new(y[0], y[1], y[2]))?;
        let ints = planar::integrals(params, &embedded);
        Ok(vec![ints.f1, ints.f2, ints.f3, ints.f4, y[0]])
    };
    let mut names = planar_integral_names(n, false);
    names.push("v_phi".to_string());
    let mut tracker = Tracker::new(names, values(&initial.to_array())?);
    for y in &flow.states {
        tracker.update(&values(y)?);
    }
    report.integrals = tracker.finish();

    let zero_momentum = level.d1 == 0.0 && level.d2 == 0.0;
    if zero_momentum {
        let mut worst = 0.0f64;
        for (t, y) in flow.times.iter().zip(&flow.states) {
            let exact = planar::closed_form_zero_d(params, initial, *t);
            worst = worst
                .max((y[0] - exact.x).abs())
                .max((y[1] - exact.y).abs())
                .max((y[2] - exact.z).abs());
        }
        report.closed_form_deviation = Some(worst);
    }

    if let Some(t_transport) = run.transport_t_end {
        let density =
            |z: &[f64]| planar::level_set_det(params, level, Vec3::new(z[0], z[1], z[2])).sqrt();
        let deviation = if run.unit_density {
            transport_check(
                &field,
                |_: &[f64]| 1.0,
                &initial.to_array(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        } else {
            transport_check(
                &field,
                density,
                &initial.to_array(),
                run.h,
                t_transport,
                run.sample_every,
            )?
        };
        report.measure_transport_deviation = Some(deviation);
    }
    if run.divergence_samples > 0 {
        report.divergence_residual =
            Some(level_set_divergence_residual(params, level, initial, run));
    }
    if run.measure_order {
        report.convergence_order = Some(convergence_order(
            &field,
            &initial.to_array(),
            (run.h * 20.0).min(0.05),
            1.0,
        )?);
    }
    Ok(RunOutput {
        report,
        times: flow.times,
        states: flow.states,
    })
}

fn oracle_compare_report(
    params: &PlanarParams<f64>,
    initial: &PlanarFullState<f64>,
    run: &RunSpec,
) -> Result<RunOutput, VerificationError> {
    let n = params.n_balls();
    let mut report = DriftReport::new("planar-oracle-compare", n, run);
    let s0 = initial.reduced(params)?;
    let o0 = OracleState::from_full(params, initial);

    let reduced_field = PlanarReducedField { params };
    let oracle_field = OracleField { params };
    let reduced_flow = integrate(
        &reduced_field,
        &s0.to_vec(),
        run.h,
        run.t_end,
        run.sample_every,
        &mut NullObserver,
    )?;
    let oracle_flow = integrate(
        &oracle_field,
        &o0.to_vec(),
        run.h,
        run.t_end,
        run.sample_every,
        &mut NullObserver,
    )?;

    let mut tracker = Tracker::new(
        planar_integral_names(n, true),
        planar_full_integral_values(params, initial),
    );
    let mut divergence = 0.0f64;
    let mut elim = 0.0f64;
    let mut elim_variant = f64::INFINITY;
    let mut states = Vec::with_capacity(oracle_flow.states.len());
    for (yr, yo) in reduced_flow.states.iter().zip(&oracle_flow.states) {
        let o = OracleState::from_slice(yo, n)?;
        for r in o.constraint_residuals(params) {
            report.max_constraint_residual = report.max_constraint_residual.max(r.abs());
        }
        let full = o.to_full();
        tracker.update(&planar_full_integral_values(params, &full));
        let mapped = full.reduced(params)?.to_vec();
        for (a, b) in mapped.iter().zip(yr) {
            divergence = divergence.max((a - b).abs());
        }
        let sol = solve_multipliers(params, &o)?;
        elim = elim.max(elimination_residual(params, &o, &sol));
        elim_variant = elim_variant.min(elimination_residual_variant(params, &o, &sol));
        states.push(full);
    }
    report.integrals = tracker.finish();
    report.oracle_divergence = Some(divergence);
    report.oracle_elimination_residual = Some(elim);
    report.oracle_elimination_variant_residual = if elim_variant.is_finite() {
        Some(elim_variant)
    } else {
        None
    };
    report.triangle_drift = Some(planar::triangle_drift(&states));
    report.separation_ok = Some(states.iter().all(|f| f.separation_margin(params) >= 0.0));
    if report
        .oracle_elimination_variant_residual
        .is_some_and(|v| v > 1e-6)
    {
        report.warnings.push(
            "transposed-torque elimination variant does not hold; the assembled system is authoritative"
                .into(),
        );
    }
    Ok(RunOutput {
        report,
        times: oracle_flow.times,
        states: oracle_flow.states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planar::PlanarBall;
    use crate::spherical::SphericalBall;

    fn spherical_params(n: usize) -> SphericalParams<f64> {
        let balls = (0..n)
            .map(|i| SphericalBall {
                inertia: 0.3 + 0.1 * i as f64,
                mass: 1.0 - 0.1 * i as f64,
                spin: 0.2 - 0.3 * i as f64,
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
    fn rigid_rotation_is_divergence_free_with_constant_density() {
        struct Spin;
        impl VectorField<f64> for Spin {
            fn dim(&self) -> usize {
                3
            }
            fn eval(&self, y: &[f64], dydt: &mut [f64]) {
                let w = Vec3::new(0.3, -0.2, 0.9);
                let z = Vec3::new(y[0], y[1], y[2]);
                let d = w.cross(z);
                dydt.copy_from_slice(&d.to_array());
            }
        }
        let check = weighted_divergence(&Spin, |_: &[f64]| 1.0, &[0.4, -0.7, 0.2]);
        assert!(check.residual().abs() < 1e-9);
    }

    #[test]
    fn spherical_measure_identity_holds_pointwise() {
        for n in 1..=3 {
            let p = spherical_params(n);
            let field = SphericalReducedField { params: &p };
            let mut rng = SplitMix64::new(101);
            for _ in 0..20 {
                let s = sample_spherical_state(&mut rng, &p);
                let check = weighted_divergence(
                    &field,
                    |z: &[f64]| {
                        let (_, gammas) = spherical::unpack_reduced(z);
                        spherical::measure_density(&p, &gammas)
                    },
                    &s.to_vec(),
                );
                assert!(
                    check.scaled_residual() < 1e-6,
                    "n = {n}: scaled residual {}",
                    check.scaled_residual()
                );
            }
        }
    }

    #[test]
    fn wrong_density_fails_the_divergence_identity() {
        let p = spherical_params(2);
        let field = SphericalReducedField { params: &p };
        let mut rng = SplitMix64::new(7);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let s = sample_spherical_state(&mut rng, &p);
            let check = weighted_divergence(&field, |_: &[f64]| 1.0, &s.to_vec());
            worst = worst.max(check.scaled_residual());
        }
        assert!(worst > 1e-4, "unit density should fail, got {worst}");
    }

    #[test]
    fn euler_top_transport_is_exact() {
        // Ball-free configuration: constant density, volume-preserving flow.
        let p = SphericalParams::free_rigid_body(Vec3::new(1.0, 2.0, 4.0));
        let field = SphericalReducedField { params: &p };
        let dev = transport_check(
            &field,
            |_: &[f64]| (1.0f64 * 2.0 * 4.0).sqrt(),
            &[0.3, 1.0, -0.5],
            1e-3,
            5.0,
            100,
        )
        .unwrap();
        assert!(dev < 1e-7, "free rigid body transport deviation {dev}");
    }

    #[test]
    fn spherical_transport_holds_and_unit_density_control_fails() {
        let p = spherical_params(2);
        let field = SphericalReducedField { params: &p };
        let mut rng = SplitMix64::new(42);
        let s = sample_spherical_state(&mut rng, &p);
        let dev = transport_check(
            &field,
            |z: &[f64]| {
                let (_, gammas) = spherical::unpack_reduced(z);
                spherical::measure_density(&p, &gammas)
            },
            &s.to_vec(),
            1e-3,
            5.0,
            100,
        )
        .unwrap();
        assert!(dev <= 1e-6, "transport deviation {dev}");

        let control =
            transport_check(&field, |_: &[f64]| 1.0, &s.to_vec(), 1e-3, 5.0, 100).unwrap();
        assert!(control > 1e-3, "negative control too small: {control}");
    }

    #[test]
    fn planar_transport_holds_on_the_reduced_system() {
        let p = planar_params();
        let mut rng = SplitMix64::new(33);
        let s = sample_planar_reduced(&mut rng, &p);
        let field = PlanarReducedField { params: &p };
        let dev = transport_check(
            &field,
            |z: &[f64]| planar::measure_density(&p, Vec3::new(z[3], z[4], z[5])),
            &s.to_vec(),
            1e-3,
            5.0,
            100,
        )
        .unwrap();
        assert!(dev <= 1e-6, "planar transport deviation {dev}");
    }

    #[test]
    fn spherical_steady_rotation_report_is_clean() {
        let p = SphericalParams::new(
            2.0,
            1.0,
            Vec3::new(1.0, 2.0, 3.0),
            vec![SphericalBall {
                inertia: 0.5,
                mass: 1.0,
                spin: 0.0,
            }],
        )
        .unwrap();
        let s = SphericalState::from_raw(Vec3::new(0.0, 0.0, 2.0), vec![Vec3::new(0.0, 0.0, 1.0)])
            .unwrap();
        let report = drift_report(
            &SystemDescriptor::SphericalReduced {
                params: p,
                initial: s,
            },
            &RunSpec::new(1e-3, 2.0),
        )
        .unwrap();
        assert!(report.worst_relative_drift() <= 1e-12);
        assert!(report.max_constraint_residual <= 1e-13);
        assert_eq!(report.separation_ok, Some(true));
    }

    #[test]
    fn reports_name_every_first_integral() {
        let p = spherical_params(2);
        let mut rng = SplitMix64::new(19);
        let s = sample_spherical_state(&mut rng, &p);
        let report = drift_report(
            &SystemDescriptor::SphericalReduced {
                params: p,
                initial: s,
            },
            &RunSpec::new(1e-2, 0.1),
        )
        .unwrap();
        let names: Vec<&str> = report.integrals.iter().map(|i| i.name.as_str()).collect();
        for expected in ["F1", "F2", "T", "G11", "G12", "G22", "c1", "c2"] {
            assert!(names.contains(&expected), "missing integral {expected}");
        }

        let q = planar_params();
        let mut rng = SplitMix64::new(20);
        let full = sample_planar_full(&mut rng, &q);
        let report = drift_report(
            &SystemDescriptor::PlanarFull {
                params: q,
                initial: full,
            },
            &RunSpec::new(1e-2, 0.1),
        )
        .unwrap();
        let names: Vec<&str> = report.integrals.iter().map(|i| i.name.as_str()).collect();
        for expected in [
            "f1", "f2", "f3", "f4", "d12", "d13", "d23", "w1_3", "w2_3", "w3_3",
        ] {
            assert!(names.contains(&expected), "missing integral {expected}");
        }
    }

    #[test]
    fn planar_report_tracks_triangles_and_spins() {
        let p = planar_params();
        let mut rng = SplitMix64::new(3);
        let full = sample_planar_full(&mut rng, &p);
        let mut run = RunSpec::new(1e-3, 2.0);
        run.seed = 3;
        let report = drift_report(
            &SystemDescriptor::PlanarFull {
                params: p,
                initial: full,
            },
            &run,
        )
        .unwrap();
        assert!(report.worst_relative_drift() < 1e-9);
        assert!(report.triangle_drift.unwrap() < 1e-9);
        assert_eq!(report.separation_ok, Some(true));
        assert!(report.admissible);
        // Carried spins have exactly zero drift.
        for i in &report.integrals {
            if i.name.starts_with('w') {
                assert_eq!(i.max_abs_drift, 0.0);
            }
        }
    }

    #[test]
    fn oracle_compare_report_stays_tight() {
        let p = planar_params();
        let mut rng = SplitMix64::new(5);
        let full = sample_planar_full(&mut rng, &p);
        let report = drift_report(
            &SystemDescriptor::OracleCompare {
                params: p,
                initial: full,
            },
            &RunSpec::new(1e-3, 1.0),
        )
        .unwrap();
        assert!(report.oracle_divergence.unwrap() < 1e-8);
        assert!(report.oracle_elimination_residual.unwrap() < 1e-9);
        assert!(report.oracle_elimination_variant_residual.unwrap() > 1e-6);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn level_set_report_matches_closed_form() {
        let p = planar_params();
        let level = LevelSetParams::new(0.0, 0.0, 0.8).unwrap();
        let mut run = RunSpec::new(1e-3, 5.0);
        run.divergence_samples = 10;
        let report = drift_report(
            &SystemDescriptor::LevelSet {
                params: p,
                level,
                initial: Vec3::new(0.8, 0.4, -0.1),
            },
            &run,
        )
        .unwrap();
        assert!(report.closed_form_deviation.unwrap() < 1e-8);
        assert!(report.divergence_residual.unwrap() < 1e-6);
        // v_phi is frozen on the zero-momentum level set.
        let vphi = report.integrals.iter().find(|i| i.name == "v_phi").unwrap();
        assert!(vphi.max_abs_drift <= 1e-12);
    }

    #[test]
    fn broken_field_fails_the_conservation_check() {
        // Negative control: drop the coupling term from the angular
        // equation and require the momentum integral to drift visibly
        // (the energy integral is blind to this particular mutilation,
        // the momentum-square one is not). A verification suite that
        // cannot fail is worthless.
        let p = spherical_params(2);
        struct Broken<'a>(&'a SphericalParams<f64>);
        impl VectorField<f64> for Broken<'_> {
            fn dim(&self) -> usize {
                9
            }
            fn eval(&self, y: &[f64], dydt: &mut [f64]) {
                let (omega, gammas) = spherical::unpack_reduced(y);
                let eps = self.0.epsilon();
                let (_, nvec) = spherical::momentum_pair(self.0, omega, &gammas);
                let body = crate::geometry::Mat3::diagonal(self.0.inertia)
                    .mul_vec(omega)
                    .cross(omega);
                let rhs = body + nvec.cross(omega) * (1.0 - eps); // coupling term missing
                let omega_dot = spherical::modified_inertia(self.0, &gammas)
                    .solve(rhs)
                    .unwrap();
                dydt[..3].copy_from_slice(&omega_dot.to_array());
                for (i, g) in gammas.iter().enumerate() {
                    let gd = g.cross(omega) * eps;
                    dydt[3 + 3 * i..6 + 3 * i].copy_from_slice(&gd.to_array());
                }
            }
        }
        let mut rng = SplitMix64::new(404);
        let s = sample_spherical_state(&mut rng, &p);
        let flow = integrate(&Broken(&p), &s.to_vec(), 1e-3, 2.0, 100, &mut NullObserver).unwrap();
        let f0 = spherical::integrals(&p, s.omega, &s.gammas).f2;
        let mut drift = 0.0f64;
        for y in &flow.states {
            let (omega, gammas) = spherical::unpack_reduced(y);
            let f = spherical::integrals(&p, omega, &gammas).f2;
            drift = drift.max((f - f0).abs() / f0.abs().max(1.0));
        }
        assert!(drift > 1e-6, "broken field went undetected, drift {drift}");
    }

    #[test]
    fn report_serializes_deterministically() {
        let p = planar_params();
        let mut rng = SplitMix64::new(9);
        let full = sample_planar_full(&mut rng, &p);
        let desc = SystemDescriptor::PlanarFull {
            params: p,
            initial: full,
        };
        let run = RunSpec::new(1e-2, 0.5);
        let a = serde_json::to_string(&drift_report(&desc, &run).unwrap()).unwrap();
        let b = serde_json::to_string(&drift_report(&desc, &run).unwrap()).unwrap();
        assert_eq!(a, b);
        let parsed: DriftReport = serde_json::from_str(&a).unwrap();
        assert_eq!(parsed.system, "planar");
    }

    #[test]
    fn inadmissible_initial_states_are_rejected() {
        let p = planar_params();
        let bad = PlanarFullState {
            x: 0.0,
            y: 0.0,
            phi: 0.0,
            vx: 0.1,
            vy: 0.0,
            vphi: 0.0,
            centers: vec![[1.0, 0.0], [1.2, 0.0], [0.0, 2.0]],
            spins: vec![0.0; 3],
        };
        let err = drift_report(
            &SystemDescriptor::PlanarFull {
                params: p,
                initial: bad,
            },
            &RunSpec::new(1e-3, 0.1),
        );
        assert!(matches!(err, Err(VerificationError::Inadmissible(_))));
    }
}
