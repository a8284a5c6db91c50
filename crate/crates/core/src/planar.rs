//! The planar ball bearing: `n` homogeneous balls of radius `r` roll
//! without slipping on a fixed plane while a plate rides on top of them
//! without slipping. Written for any `n >= 1`; three balls is the
//! validated default.
//!
//! The reduced state on the admissible region `Q` collects the plate
//! velocity `v = (v_x, v_y, v_phi)` and the weighted contact moments
//! `(N_1, N_2, M)`; the equations close as `I_mass dv/dt = m_gyro`,
//! `dn/dt = J v`. Four first integrals `f1..f4` and the measure density
//! `sqrt(det(I_mass))` make the system solvable by quadratures; on a joint
//! level set of `f1, f2, f3` the flow closes in `(v_phi, N_1, N_2)` and,
//! for zero momentum constants, is an explicit rotation.

use crate::geometry::{Mat3, SymMat3, Vec3};
use crate::integrators::{Observer, VectorField};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanarError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("at least one ball is required")]
    NoBalls,
    #[error("state outside the admissible region: delta M - N1^2 - N2^2 = {margin:e} <= 0")]
    OutsideAdmissibleRegion { margin: f64 },
    #[error("state has {got} ball entries, parameters have {expected} balls")]
    BallCountMismatch { expected: usize, got: usize },
    #[error("state slice has length {len}, expected {expected}")]
    BadLayout { len: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

fn check_positive<S: Real>(name: &'static str, value: S) -> Result<(), PlanarError> {
    if value > S::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(PlanarError::NonPositive {
            name,
            value: value.to_f64().unwrap_or(f64::NAN),
        })
    }
}

/// Ball constants: mass and moment of inertia.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarBall<S> {
    pub mass: S,
    pub inertia: S,
}

/// Plate and ball constants of the planar bearing.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarParams<S> {
    /// Common ball radius r.
    pub radius: S,
    /// Plate mass m.
    pub plate_mass: S,
    /// Plate moment of inertia I about the vertical axis through its center.
    pub plate_inertia: S,
    pub balls: Vec<PlanarBall<S>>,
}

impl<S: Real> PlanarParams<S> {
    pub fn new(
        radius: S,
        plate_mass: S,
        plate_inertia: S,
        balls: Vec<PlanarBall<S>>,
    ) -> Result<Self, PlanarError> {
        check_positive("ball radius", radius)?;
        check_positive("plate mass", plate_mass)?;
        check_positive("plate inertia", plate_inertia)?;
        if balls.is_empty() {
            return Err(PlanarError::NoBalls);
        }
        for b in &balls {
            check_positive("ball mass", b.mass)?;
            check_positive("ball inertia", b.inertia)?;
        }
        Ok(Self {
            radius,
            plate_mass,
            plate_inertia,
            balls,
        })
    }

    pub fn n_balls(&self) -> usize {
        self.balls.len()
    }

    /// Per-ball weights `delta_i = (m_i r^2 + I_i) / (4 r^2)` and their sum.
    pub fn ball_deltas(&self) -> (Vec<S>, S) {
        let four = real::<S>(4.0);
        let r2 = self.radius * self.radius;
        let deltas: Vec<S> = self
            .balls
            .iter()
            .map(|b| (b.mass * r2 + b.inertia) / (four * r2))
            .collect();
        let total = deltas.iter().fold(S::zero(), |acc, d| acc + *d);
        (deltas, total)
    }

    pub fn delta(&self) -> S {
        self.ball_deltas().1
    }
}

// ---------------------------------------------------------------------------
// Reduced state on Q
// ---------------------------------------------------------------------------

/// Reduced state: plate velocity `v = (v_x, v_y, v_phi)` and moments
/// `(N_1, N_2, M)`. Membership in the admissible region
/// `delta M > N_1^2 + N_2^2` is enforced at construction; the margin is
/// itself the conserved integral `f3`, so trajectories never leave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarReducedState<S> {
    pub v: Vec3<S>,
    pub moments: Vec3<S>,
}

impl<S: Real> PlanarReducedState<S> {
    pub fn new(p: &PlanarParams<S>, v: Vec3<S>, moments: Vec3<S>) -> Result<Self, PlanarError> {
        let margin = admissibility_margin(p, moments);
        if !(margin > S::zero()) {
            return Err(PlanarError::OutsideAdmissibleRegion {
                margin: margin.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { v, moments })
    }

    pub fn to_vec(&self) -> Vec<S> {
        vec![
            self.v.x,
            self.v.y,
            self.v.z,
            self.moments.x,
            self.moments.y,
            self.moments.z,
        ]
    }

    pub fn from_slice(p: &PlanarParams<S>, y: &[S]) -> Result<Self, PlanarError> {
        if y.len() != 6 {
            return Err(PlanarError::BadLayout {
                len: y.len(),
                expected: 6,
            });
        }
        Self::new(p, Vec3::new(y[0], y[1], y[2]), Vec3::new(y[3], y[4], y[5]))
    }
}

/// `delta M - N_1^2 - N_2^2`, positive on the admissible region; equals `f3`.
pub fn admissibility_margin<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> S {
    p.delta() * moments.z - moments.x * moments.x - moments.y * moments.y
}

/// Mass matrix of the reduced system,
/// `[[m+d, 0, -N2], [0, m+d, N1], [-N2, N1, I+M]]`.
pub fn mass_matrix<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> SymMat3<S> {
    let md = p.plate_mass + p.delta();
    let (n1, n2, m) = (moments.x, moments.y, moments.z);
    let z = S::zero();
    SymMat3::from_symmetric_expr(Mat3::from_rows([
        [md, z, -n2],
        [z, md, n1],
        [-n2, n1, p.plate_inertia + m],
    ]))
}

/// Closed-form determinant
/// `(m+d)((m+d) I + m M + (d M - N1^2 - N2^2))`, positive on the
/// admissible region and still positive on its boundary.
pub fn mass_matrix_det<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> S {
    let md = p.plate_mass + p.delta();
    md * (md * p.plate_inertia + p.plate_mass * moments.z + admissibility_margin(p, moments))
}

/// Explicit inverse of the mass matrix over the closed-form determinant;
/// kept separate from the adjugate solve used by [`reduced_rhs`] so the two
/// routes cross-check each other.
pub fn mass_matrix_inverse<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> SymMat3<S> {
    let md = p.plate_mass + p.delta();
    let (n1, n2, m) = (moments.x, moments.y, moments.z);
    let im = p.plate_inertia + m;
    let det = mass_matrix_det(p, moments);
    SymMat3::from_symmetric_expr(
        Mat3::from_rows([
            [md * im - n1 * n1, -n1 * n2, md * n2],
            [-n1 * n2, md * im - n2 * n2, -md * n1],
            [md * n2, -md * n1, md * md],
        ])
        .scale(S::one() / det),
    )
}

/// Velocity-quadratic forcing
/// `(N1 v_phi^2 - d v_phi v_y, N2 v_phi^2 + d v_phi v_x,
///   v_phi (N1 v_x + N2 v_y)) / 2`.
pub fn gyroscopic_forcing<S: Real>(p: &PlanarParams<S>, s: &PlanarReducedState<S>) -> Vec3<S> {
    let d = p.delta();
    let (n1, n2) = (s.moments.x, s.moments.y);
    let (vx, vy, vphi) = (s.v.x, s.v.y, s.v.z);
    Vec3::new(
        n1 * vphi * vphi - d * vphi * vy,
        n2 * vphi * vphi + d * vphi * vx,
        vphi * (n1 * vx + n2 * vy),
    ) * real::<S>(0.5)
}

/// Coefficient matrix of the moment rates,
/// `-[[d, 0, N2], [0, d, -N1], [2 N1, 2 N2, 0]] / 2`.
pub fn moment_rate_matrix<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> Mat3<S> {
    let d = p.delta();
    let (n1, n2) = (moments.x, moments.y);
    let two = real::<S>(2.0);
    let z = S::zero();
    Mat3::from_rows([[d, z, n2], [z, d, -n1], [two * n1, two * n2, z]]).scale(-real::<S>(0.5))
}

/// Time derivative of the reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarReducedDeriv<S> {
    pub v_dot: Vec3<S>,
    pub moments_dot: Vec3<S>,
}

/// Reduced equations of motion: `v_dot` solves the mass matrix against the
/// gyroscopic forcing, `moments_dot` is linear in `v`.
pub fn reduced_rhs<S: Real>(
    p: &PlanarParams<S>,
    s: &PlanarReducedState<S>,
) -> PlanarReducedDeriv<S> {
    let v_dot = mass_matrix(p, s.moments)
        .solve(gyroscopic_forcing(p, s))
        .expect("mass matrix is invertible on the admissible region");
    let moments_dot = moment_rate_matrix(p, s.moments).mul_vec(s.v);
    PlanarReducedDeriv { v_dot, moments_dot }
}

/// First integrals of the reduced flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarIntegrals<S> {
    pub f1: S,
    pub f2: S,
    pub f3: S,
    pub f4: S,
}

/// `f1 = (m+d) v_x - v_phi N2`, `f2 = (m+d) v_y + v_phi N1`,
/// `f3 = d M - N1^2 - N2^2`, and the energy
/// `f4 = (I+M) v_phi^2 / 2 + (m+d)(v_x^2+v_y^2) / 2
///  + v_phi (N1 v_y - N2 v_x)`.
pub fn integrals<S: Real>(p: &PlanarParams<S>, s: &PlanarReducedState<S>) -> PlanarIntegrals<S> {
    let md = p.plate_mass + p.delta();
    let (n1, n2, m) = (s.moments.x, s.moments.y, s.moments.z);
    let (vx, vy, vphi) = (s.v.x, s.v.y, s.v.z);
    let half = real::<S>(0.5);
    PlanarIntegrals {
        f1: md * vx - vphi * n2,
        f2: md * vy + vphi * n1,
        f3: admissibility_margin(p, s.moments),
        f4: half * (p.plate_inertia + m) * vphi * vphi
            + half * md * (vx * vx + vy * vy)
            + vphi * (n1 * vy - n2 * vx),
    }
}

/// Invariant-measure density `sqrt(det(I_mass))`; depends on the moments
/// only.
pub fn measure_density<S: Real>(p: &PlanarParams<S>, moments: Vec3<S>) -> S {
    mass_matrix_det(p, moments).sqrt()
}

// ---------------------------------------------------------------------------
// Full configuration on the pose space
// ---------------------------------------------------------------------------

/// Full planar state: plate pose and velocity, ball centers, and the
/// conserved vertical spins `c_i` of the balls. Ball center velocities and
/// angular velocities are reconstructed from the rolling constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarFullState<S> {
    pub x: S,
    pub y: S,
    pub phi: S,
    pub vx: S,
    pub vy: S,
    pub vphi: S,
    pub centers: Vec<[S; 2]>,
    pub spins: Vec<S>,
}

impl<S: Real> PlanarFullState<S> {
    pub fn n_balls(&self) -> usize {
        self.centers.len()
    }

    /// Center velocity of ball `i` from the rolling constraints:
    /// `2 v_{O_i} = v_O + omega x OA_i`.
    pub fn center_velocity(&self, i: usize) -> [S; 2] {
        let half = real::<S>(0.5);
        let ox = self.centers[i][0] - self.x;
        let oy = self.centers[i][1] - self.y;
        [
            half * (self.vx - self.vphi * oy),
            half * (self.vy + self.vphi * ox),
        ]
    }

    /// Angular velocity of ball `i` in the fixed frame: the horizontal part
    /// follows from rolling on the fixed plane, the vertical part is the
    /// conserved spin.
    pub fn ball_omega(&self, p: &PlanarParams<S>, i: usize) -> Vec3<S> {
        let v = self.center_velocity(i);
        Vec3::new(-v[1] / p.radius, v[0] / p.radius, self.spins[i])
    }

    /// Weighted contact moments `(N_1, N_2, M)` of the current configuration.
    pub fn aggregates(&self, p: &PlanarParams<S>) -> Vec3<S> {
        let (deltas, _) = p.ball_deltas();
        let mut n1 = S::zero();
        let mut n2 = S::zero();
        let mut m = S::zero();
        for (c, d) in self.centers.iter().zip(&deltas) {
            let ox = c[0] - self.x;
            let oy = c[1] - self.y;
            n1 += *d * ox;
            n2 += *d * oy;
            m += *d * (ox * ox + oy * oy);
        }
        Vec3::new(n1, n2, m)
    }

    /// Project onto the reduced state; degenerate configurations with all
    /// contact points at the plate center are rejected.
    pub fn reduced(&self, p: &PlanarParams<S>) -> Result<PlanarReducedState<S>, PlanarError> {
        PlanarReducedState::new(
            p,
            Vec3::new(self.vx, self.vy, self.vphi),
            self.aggregates(p),
        )
    }

    /// Smallest pairwise center distance minus `2r`; negative means the
    /// one-side contact constraints are violated.
    pub fn separation_margin(&self, p: &PlanarParams<S>) -> S {
        let mut margin = S::infinity();
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let dx = self.centers[i][0] - self.centers[j][0];
                let dy = self.centers[i][1] - self.centers[j][1];
                let dist = (dx * dx + dy * dy).sqrt();
                margin = margin.min(dist - real::<S>(2.0) * p.radius);
            }
        }
        margin
    }

    /// Pairwise center distances, ordered (i, j), i < j.
    pub fn pairwise_distances(&self) -> Vec<S> {
        let mut out = Vec::new();
        for i in 0..self.centers.len() {
            for j in i + 1..self.centers.len() {
                let dx = self.centers[i][0] - self.centers[j][0];
                let dy = self.centers[i][1] - self.centers[j][1];
                out.push((dx * dx + dy * dy).sqrt());
            }
        }
        out
    }

    /// Rotate the whole configuration about the vertical axis through the
    /// fixed origin.
    pub fn rotated(&self, angle: S) -> Self {
        let (sin, cos) = angle.sin_cos();
        let rot = |x: S, y: S| [cos * x - sin * y, sin * x + cos * y];
        let pos = rot(self.x, self.y);
        let vel = rot(self.vx, self.vy);
        Self {
            x: pos[0],
            y: pos[1],
            phi: self.phi + angle,
            vx: vel[0],
            vy: vel[1],
            vphi: self.vphi,
            centers: self.centers.iter().map(|c| rot(c[0], c[1])).collect(),
            spins: self.spins.clone(),
        }
    }

    pub fn dim(n_balls: usize) -> usize {
        6 + 2 * n_balls
    }

    /// Pose-space layout `[x, y, phi, vx, vy, vphi, centers...]`; spins are
    /// carried by the state, not integrated.
    pub fn to_vec(&self) -> Vec<S> {
        let mut y = vec![self.x, self.y, self.phi, self.vx, self.vy, self.vphi];
        for c in &self.centers {
            y.extend_from_slice(c);
        }
        y
    }

    pub fn from_slice(y: &[S], spins: Vec<S>) -> Result<Self, PlanarError> {
        let n = spins.len();
        if y.len() != Self::dim(n) {
            return Err(PlanarError::BadLayout {
                len: y.len(),
                expected: Self::dim(n),
            });
        }
        let centers = y[6..].chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        Ok(Self {
            x: y[0],
            y: y[1],
            phi: y[2],
            vx: y[3],
            vy: y[4],
            vphi: y[5],
            centers,
            spins,
        })
    }
}

/// Pose rates of the full planar state: the plate pose follows its
/// velocity and each ball center moves with half the local plate velocity,
/// `2 (dx_i, dy_i) = (v_x, v_y) + (-v_phi (y_i - y), v_phi (x_i - x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarKinematicDeriv<S> {
    pub pose_dot: [S; 3],
    pub center_dots: Vec<[S; 2]>,
}

pub fn kinematic_rhs<S: Real>(full: &PlanarFullState<S>) -> PlanarKinematicDeriv<S> {
    PlanarKinematicDeriv {
        pose_dot: [full.vx, full.vy, full.vphi],
        center_dots: (0..full.n_balls())
            .map(|i| full.center_velocity(i))
            .collect(),
    }
}

/// Maximum drift of the pairwise center distances along a trajectory of
/// full states; both contact triangles are vertical translates of the
/// center triangle, so one set of distances covers them.
pub fn triangle_drift<S: Real>(states: &[PlanarFullState<S>]) -> S {
    let Some(first) = states.first() else {
        return S::zero();
    };
    let base = first.pairwise_distances();
    let mut drift = S::zero();
    for s in states {
        for (d, d0) in s.pairwise_distances().iter().zip(&base) {
            drift = drift.max((*d - *d0).abs());
        }
    }
    drift
}

// ---------------------------------------------------------------------------
// Level sets of (f1, f2, f3)
// ---------------------------------------------------------------------------

/// Fixed values `(d1, d2, d3)` of the integrals `(f1, f2, f3)`; `f3` is
/// positive on the admissible region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetParams<S> {
    pub d1: S,
    pub d2: S,
    pub d3: S,
}

impl<S: Real> LevelSetParams<S> {
    pub fn new(d1: S, d2: S, d3: S) -> Result<Self, PlanarError> {
        check_positive("level-set constant d3", d3)?;
        Ok(Self { d1, d2, d3 })
    }
}

/// Reconstruct the reduced state from level-set coordinates
/// `(v_phi, N_1, N_2)`.
pub fn level_set_embed<S: Real>(
    p: &PlanarParams<S>,
    d: &LevelSetParams<S>,
    y: Vec3<S>,
) -> Result<PlanarReducedState<S>, PlanarError> {
    let (vphi, n1, n2) = (y.x, y.y, y.z);
    let md = p.plate_mass + p.delta();
    let vx = (vphi * n2 + d.d1) / md;
    let vy = (-vphi * n1 + d.d2) / md;
    let m = (n1 * n1 + n2 * n2 + d.d3) / p.delta();
    PlanarReducedState::new(p, Vec3::new(vx, vy, vphi), Vec3::new(n1, n2, m))
}

/// Determinant of the mass matrix restricted to the level set.
pub fn level_set_det<S: Real>(p: &PlanarParams<S>, d: &LevelSetParams<S>, y: Vec3<S>) -> S {
    let md = p.plate_mass + p.delta();
    let n_sq = y.y * y.y + y.z * y.z;
    md * (md * p.plate_inertia
        + p.plate_mass / p.delta() * n_sq
        + p.plate_mass * d.d3 / p.delta()
        + d.d3)
}

/// Closed flow on a joint level set, in the coordinates
/// `y = (v_phi, N_1, N_2)`.
pub fn level_set_rhs<S: Real>(p: &PlanarParams<S>, d: &LevelSetParams<S>, y: Vec3<S>) -> Vec3<S> {
    let (vphi, n1, n2) = (y.x, y.y, y.z);
    let m = p.plate_mass;
    let delta = p.delta();
    let md = m + delta;
    let two = real::<S>(2.0);
    let det = level_set_det(p, d, y);
    let swirl = (m + two * delta) / (two * md);
    Vec3::new(
        m * vphi * (n1 * d.d1 + n2 * d.d2) / (two * det),
        -swirl * n2 * vphi - delta * d.d1 / (two * md),
        swirl * n1 * vphi - delta * d.d2 / (two * md),
    )
}

/// Closed-form solution for `d1 = d2 = 0`: `v_phi` is frozen and
/// `(N_1, N_2)` rotates rigidly at rate
/// `(m + 2 delta) v_phi / (2 (m + delta))`.
pub fn closed_form_zero_d<S: Real>(p: &PlanarParams<S>, y0: Vec3<S>, t: S) -> Vec3<S> {
    let m = p.plate_mass;
    let delta = p.delta();
    let two = real::<S>(2.0);
    let rate = (m + two * delta) * y0.x / (two * (m + delta));
    let (sin, cos) = (rate * t).sin_cos();
    Vec3::new(y0.x, cos * y0.y - sin * y0.z, sin * y0.y + cos * y0.z)
}

// ---------------------------------------------------------------------------
// Vector fields and observers
// ---------------------------------------------------------------------------

/// Reduced flow on `Q`, layout `[v_x, v_y, v_phi, N_1, N_2, M]`.
pub struct PlanarReducedField<'a, S> {
    pub params: &'a PlanarParams<S>,
}

impl<S: Real> VectorField<S> for PlanarReducedField<'_, S> {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, y: &[S], dydt: &mut [S]) {
        let s = PlanarReducedState {
            v: Vec3::new(y[0], y[1], y[2]),
            moments: Vec3::new(y[3], y[4], y[5]),
        };
        match mass_matrix(self.params, s.moments).solve(gyroscopic_forcing(self.params, &s)) {
            Ok(v_dot) => {
                let n_dot = moment_rate_matrix(self.params, s.moments).mul_vec(s.v);
                dydt[..3].copy_from_slice(&v_dot.to_array());
                dydt[3..6].copy_from_slice(&n_dot.to_array());
            }
            // Outside Q the solve can degenerate; poison the derivative so
            // the integrator aborts with a state echo.
            Err(_) => dydt.fill(S::nan()),
        }
    }
}

/// Full flow on the pose space, layout
/// `[x, y, phi, vx, vy, vphi, centers...]`.
pub struct PlanarKinematicField<'a, S> {
    pub params: &'a PlanarParams<S>,
}

impl<S: Real> VectorField<S> for PlanarKinematicField<'_, S> {
    fn dim(&self) -> usize {
        PlanarFullState::<S>::dim(self.params.n_balls())
    }

    fn eval(&self, y: &[S], dydt: &mut [S]) {
        let n = self.params.n_balls();
        let full = PlanarFullState::from_slice(y, vec![S::zero(); n])
            .expect("field evaluated with matching layout");
        let kin = kinematic_rhs(&full);
        dydt[0] = kin.pose_dot[0];
        dydt[1] = kin.pose_dot[1];
        dydt[2] = kin.pose_dot[2];
        let moments = full.aggregates(self.params);
        let s = PlanarReducedState {
            v: Vec3::new(full.vx, full.vy, full.vphi),
            moments,
        };
        match mass_matrix(self.params, moments).solve(gyroscopic_forcing(self.params, &s)) {
            Ok(v_dot) => dydt[3..6].copy_from_slice(&v_dot.to_array()),
            Err(_) => {
                dydt.fill(S::nan());
                return;
            }
        }
        for (i, c) in kin.center_dots.iter().enumerate() {
            dydt[6 + 2 * i] = c[0];
            dydt[6 + 2 * i + 1] = c[1];
        }
    }
}

/// Level-set flow in `(v_phi, N_1, N_2)`.
pub struct LevelSetField<'a, S> {
    pub params: &'a PlanarParams<S>,
    pub level: LevelSetParams<S>,
}

impl<S: Real> VectorField<S> for LevelSetField<'_, S> {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, y: &[S], dydt: &mut [S]) {
        let d = level_set_rhs(self.params, &self.level, Vec3::new(y[0], y[1], y[2]));
        dydt.copy_from_slice(&d.to_array());
    }
}

/// Aborts integration if the reduced state leaves the admissible region;
/// `f3` is conserved, so a trigger indicates integrator failure or
/// inadmissible input rather than dynamics.
pub struct AdmissibilityObserver<S> {
    delta: S,
    moments_at: usize,
}

impl<S: Real> AdmissibilityObserver<S> {
    /// Layout with the moments starting at index 3 (the reduced field).
    pub fn reduced(p: &PlanarParams<S>) -> Self {
        Self {
            delta: p.delta(),
            moments_at: 3,
        }
    }
}

impl<S: Real> Observer<S> for AdmissibilityObserver<S> {
    fn after_step(&mut self, _step: usize, _t: S, y: &mut [S]) -> Result<(), String> {
        let at = self.moments_at;
        let margin = self.delta * y[at + 2] - y[at] * y[at] - y[at + 1] * y[at + 1];
        if margin > S::zero() {
            Ok(())
        } else {
            Err(format!(
                "left the admissible region (margin {:e})",
                margin.to_f64().unwrap_or(f64::NAN)
            ))
        }
    }
}
