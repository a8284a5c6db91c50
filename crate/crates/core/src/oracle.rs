//! Full-coordinates formulation of the planar bearing with explicit
//! contact reactions. The rolling constraints are differentiated in time,
//! the Newton-Euler equations substituted, and the resulting square linear
//! system solved for all accelerations and the `4n` multiplier components
//! at once. Nothing here uses the reduced mass matrix or moment algebra,
//! so derivative agreement with [`crate::planar::reduced_rhs`] is a
//! genuine cross-check of the reduction.

use crate::geometry::Vec3;
use crate::integrators::VectorField;
use crate::linalg::{DenseMat, LinalgError};
use crate::planar::{PlanarFullState, PlanarParams, PlanarReducedDeriv, PlanarReducedState};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("multiplier system is singular, state is inconsistent: {0}")]
    Singular(#[from] LinalgError),
    #[error("state has {got} ball entries, parameters have {expected} balls")]
    BallCountMismatch { expected: usize, got: usize },
    #[error("state slice has length {len}, expected {expected}")]
    BadLayout { len: usize, expected: usize },
    #[error(transparent)]
    Planar(#[from] crate::planar::PlanarError),
}

/// Velocity-level state of the multiplier formulation. Ball center
/// velocities and angular velocities are independent coordinates tied to
/// the plate motion only through the constraints, which the solver
/// differentiates rather than eliminates.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleState<S> {
    pub x: S,
    pub y: S,
    pub phi: S,
    pub vx: S,
    pub vy: S,
    pub vphi: S,
    pub centers: Vec<[S; 2]>,
    pub center_vels: Vec<[S; 2]>,
    pub omegas: Vec<Vec3<S>>,
}

impl<S: Real> OracleState<S> {
    /// Manufacture a constraint-consistent state: ball center velocities
    /// from the plate motion, ball angular velocities from rolling on the
    /// fixed plane plus the free vertical spin.
    pub fn from_full(p: &PlanarParams<S>, full: &PlanarFullState<S>) -> Self {
        let n = full.n_balls();
        Self {
            x: full.x,
            y: full.y,
            phi: full.phi,
            vx: full.vx,
            vy: full.vy,
            vphi: full.vphi,
            centers: full.centers.clone(),
            center_vels: (0..n).map(|i| full.center_velocity(i)).collect(),
            omegas: (0..n).map(|i| full.ball_omega(p, i)).collect(),
        }
    }

    pub fn n_balls(&self) -> usize {
        self.centers.len()
    }

    /// Project back onto the pose-space state, carrying the vertical spins.
    pub fn to_full(&self) -> PlanarFullState<S> {
        PlanarFullState {
            x: self.x,
            y: self.y,
            phi: self.phi,
            vx: self.vx,
            vy: self.vy,
            vphi: self.vphi,
            centers: self.centers.clone(),
            spins: self.omegas.iter().map(|w| w.z).collect(),
        }
    }

    pub fn reduced(&self, p: &PlanarParams<S>) -> Result<PlanarReducedState<S>, OracleError> {
        Ok(self.to_full().reduced(p)?)
    }

    /// Residuals of all `4n` scalar rolling constraints at this state:
    /// per ball, the lower-contact pair `v_{O_i} - r omega_i x gamma` and
    /// the upper-contact pair
    /// `v_{O_i} + r omega_i x gamma - v_O - omega x OA_i`.
    pub fn constraint_residuals(&self, p: &PlanarParams<S>) -> Vec<S> {
        let r = p.radius;
        let mut out = Vec::with_capacity(4 * self.n_balls());
        for i in 0..self.n_balls() {
            let [u, w] = self.center_vels[i];
            let omega = self.omegas[i];
            // omega x e_z = (omega_y, -omega_x, 0).
            out.push(u - r * omega.y);
            out.push(w + r * omega.x);
            let ox = self.centers[i][0] - self.x;
            let oy = self.centers[i][1] - self.y;
            out.push(u + r * omega.y - self.vx + self.vphi * oy);
            out.push(w - r * omega.x - self.vy - self.vphi * ox);
        }
        out
    }

    /// Kinetic energy of plate and balls from the independent velocities.
    pub fn kinetic_energy(&self, p: &PlanarParams<S>) -> S {
        let half = real::<S>(0.5);
        let mut t = half * p.plate_inertia * self.vphi * self.vphi
            + half * p.plate_mass * (self.vx * self.vx + self.vy * self.vy);
        for i in 0..self.n_balls() {
            let [u, w] = self.center_vels[i];
            t += half * p.balls[i].mass * (u * u + w * w);
            t += half * p.balls[i].inertia * self.omegas[i].norm_squared();
        }
        t
    }

    pub fn dim(n_balls: usize) -> usize {
        6 + 7 * n_balls
    }

    /// Layout `[x, y, phi, vx, vy, vphi, centers (2n), center velocities
    /// (2n), ball angular velocities (3n)]`.
    pub fn to_vec(&self) -> Vec<S> {
        let mut y = vec![self.x, self.y, self.phi, self.vx, self.vy, self.vphi];
        for c in &self.centers {
            y.extend_from_slice(c);
        }
        for v in &self.center_vels {
            y.extend_from_slice(v);
        }
        for w in &self.omegas {
            y.extend_from_slice(&w.to_array());
        }
        y
    }

    pub fn from_slice(y: &[S], n_balls: usize) -> Result<Self, OracleError> {
        if y.len() != Self::dim(n_balls) {
            return Err(OracleError::BadLayout {
                len: y.len(),
                expected: Self::dim(n_balls),
            });
        }
        let centers = y[6..6 + 2 * n_balls]
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let center_vels = y[6 + 2 * n_balls..6 + 4 * n_balls]
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let omegas = y[6 + 4 * n_balls..]
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0], c[1], c[2]))
            .collect();
        Ok(Self {
            x: y[0],
            y: y[1],
            phi: y[2],
            vx: y[3],
            vy: y[4],
            vphi: y[5],
            centers,
            center_vels,
            omegas,
        })
    }
}

/// Solved accelerations and contact reactions. The lower forces act on the
/// balls at the fixed plane, the upper forces at the plate; both are
/// horizontal.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution<S> {
    pub plate_acc: Vec3<S>,
    pub center_accs: Vec<[S; 2]>,
    /// Horizontal angular accelerations; the vertical component vanishes
    /// because the reactions produce no torque about the ball's vertical
    /// axis.
    pub omega_dots: Vec<[S; 2]>,
    pub lower_forces: Vec<[S; 2]>,
    pub upper_forces: Vec<[S; 2]>,
}

impl<S: Real> MultiplierSolution<S> {
    /// All multiplier components: the lower-contact pairs for every ball,
    /// then the upper-contact pairs.
    pub fn lambdas(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(4 * self.lower_forces.len());
        for f in &self.lower_forces {
            out.extend_from_slice(f);
        }
        for f in &self.upper_forces {
            out.extend_from_slice(f);
        }
        out
    }
}

/// Assemble and solve the square system in the accelerations and the `4n`
/// reaction components: Newton-Euler rows for every body plus the
/// time-differentiated rolling constraints, solved by dense LU with
/// partial pivoting.
pub fn solve_multipliers<S: Real>(
    p: &PlanarParams<S>,
    s: &OracleState<S>,
) -> Result<MultiplierSolution<S>, OracleError> {
    let n = s.n_balls();
    if n != p.n_balls() {
        return Err(OracleError::BallCountMismatch {
            expected: p.n_balls(),
            got: n,
        });
    }
    let dim = 3 + 8 * n;
    let mut a = DenseMat::<S>::zeros(dim, dim);
    let mut b = vec![S::zero(); dim];

    // Unknown ordering: plate acceleration (3), per ball center
    // acceleration (2) and horizontal angular acceleration (2), then per
    // ball lower force (2) and upper force (2).
    let acc = |i: usize| 3 + 4 * i;
    let alpha = |i: usize| 3 + 4 * i + 2;
    let lower = |i: usize| 3 + 4 * n + 4 * i;
    let upper = |i: usize| 3 + 4 * n + 4 * i + 2;

    let r = p.radius;
    let mut row = 0;
    for i in 0..n {
        let m_i = p.balls[i].mass;
        let i_i = p.balls[i].inertia;
        // Ball linear momentum: m_i a_i = F_lower + F_upper.
        for axis in 0..2 {
            a[(row, acc(i) + axis)] = m_i;
            a[(row, lower(i) + axis)] = -S::one();
            a[(row, upper(i) + axis)] = -S::one();
            row += 1;
        }
        // Ball angular momentum, horizontal part:
        // I_i dw = r e_z x (F_upper - F_lower).
        a[(row, alpha(i))] = i_i;
        a[(row, lower(i) + 1)] = -r;
        a[(row, upper(i) + 1)] = r;
        row += 1;
        a[(row, alpha(i) + 1)] = i_i;
        a[(row, lower(i))] = r;
        a[(row, upper(i))] = -r;
        row += 1;
    }
    // Plate linear momentum: m a_O = -sum F_upper.
    for axis in 0..2 {
        a[(row, axis)] = p.plate_mass;
        for i in 0..n {
            a[(row, upper(i) + axis)] = S::one();
        }
        row += 1;
    }
    // Plate angular momentum: I a_phi = -sum (OA_i x F_upper,i)_z.
    a[(row, 2)] = p.plate_inertia;
    for i in 0..n {
        let ox = s.centers[i][0] - s.x;
        let oy = s.centers[i][1] - s.y;
        a[(row, upper(i))] = -oy;
        a[(row, upper(i) + 1)] = ox;
    }
    row += 1;
    // Differentiated lower constraints: a_i = r dw x e_z.
    for i in 0..n {
        a[(row, acc(i))] = S::one();
        a[(row, alpha(i) + 1)] = -r;
        row += 1;
        a[(row, acc(i) + 1)] = S::one();
        a[(row, alpha(i))] = r;
        row += 1;
    }
    // Differentiated upper constraints:
    // a_i + r dw x e_z - a_O - da_phi x OA_i = vphi-dependent drift terms.
    for i in 0..n {
        let ox = s.centers[i][0] - s.x;
        let oy = s.centers[i][1] - s.y;
        let [u, w] = s.center_vels[i];
        a[(row, acc(i))] = S::one();
        a[(row, alpha(i) + 1)] = r;
        a[(row, 0)] = -S::one();
        a[(row, 2)] = oy;
        b[row] = -s.vphi * (w - s.vy);
        row += 1;
        a[(row, acc(i) + 1)] = S::one();
        a[(row, alpha(i))] = -r;
        a[(row, 1)] = -S::one();
        a[(row, 2)] = -ox;
        b[row] = s.vphi * (u - s.vx);
        row += 1;
    }
    debug_assert_eq!(row, dim);

    let sol = a.lu()?.solve(&b)?;
    Ok(MultiplierSolution {
        plate_acc: Vec3::new(sol[0], sol[1], sol[2]),
        center_accs: (0..n).map(|i| [sol[acc(i)], sol[acc(i) + 1]]).collect(),
        omega_dots: (0..n).map(|i| [sol[alpha(i)], sol[alpha(i) + 1]]).collect(),
        lower_forces: (0..n).map(|i| [sol[lower(i)], sol[lower(i) + 1]]).collect(),
        upper_forces: (0..n).map(|i| [sol[upper(i)], sol[upper(i) + 1]]).collect(),
    })
}

/// Residual of the closed-form elimination of the ball unknowns down to
/// the upper forces: for each ball,
/// `4 I r^2 / (m_i r^2 + I_i) F_i = -(I/m) sum_j F_j + OA_i x (sum_j OA_j
/// x F_j) + I omega x (v_{O_i} - v_O)`. Vanishes on solutions of
/// [`solve_multipliers`]; a nonzero value signals an assembly regression.
pub fn elimination_residual<S: Real>(
    p: &PlanarParams<S>,
    s: &OracleState<S>,
    sol: &MultiplierSolution<S>,
) -> S {
    elimination_residual_with(p, s, sol, false)
}

/// Residual of a variant convention for the same elimination, with the
/// torque term transposed to `(sum_j OA_j x F_j) x OA_i` and the swirl
/// term left unscaled by the plate inertia. Retained as a diagnostic: a
/// large value documents that this convention does not describe the solved
/// dynamics.
pub fn elimination_residual_variant<S: Real>(
    p: &PlanarParams<S>,
    s: &OracleState<S>,
    sol: &MultiplierSolution<S>,
) -> S {
    elimination_residual_with(p, s, sol, true)
}

fn elimination_residual_with<S: Real>(
    p: &PlanarParams<S>,
    s: &OracleState<S>,
    sol: &MultiplierSolution<S>,
    variant: bool,
) -> S {
    let n = s.n_balls();
    let four = real::<S>(4.0);
    let r2 = p.radius * p.radius;
    let big_i = p.plate_inertia;

    let force = |i: usize| Vec3::new(sol.upper_forces[i][0], sol.upper_forces[i][1], S::zero());
    let oa = |i: usize| Vec3::new(s.centers[i][0] - s.x, s.centers[i][1] - s.y, S::zero());
    let mut force_sum = Vec3::zero();
    let mut torque = Vec3::zero();
    for j in 0..n {
        force_sum = force_sum + force(j);
        torque = torque + oa(j).cross(force(j));
    }
    let omega = Vec3::new(S::zero(), S::zero(), s.vphi);
    let v_plate = Vec3::new(s.vx, s.vy, S::zero());

    let mut residual = S::zero();
    for i in 0..n {
        let b = &p.balls[i];
        let lhs = force(i) * (four * big_i * r2 / (b.mass * r2 + b.inertia));
        let v_i = Vec3::new(s.center_vels[i][0], s.center_vels[i][1], S::zero());
        let swirl = omega.cross(v_i - v_plate);
        let rhs = if variant {
            torque.cross(oa(i)) + swirl - force_sum * (big_i / p.plate_mass)
        } else {
            oa(i).cross(torque) + swirl * big_i - force_sum * (big_i / p.plate_mass)
        };
        residual = residual.max((lhs - rhs).norm_inf());
    }
    residual
}

/// Reduced-state derivative implied by the oracle: plate accelerations from
/// the multiplier solve, moment rates from the velocity-level definition of
/// the aggregates.
pub fn reduced_rate_via_oracle<S: Real>(
    p: &PlanarParams<S>,
    s: &OracleState<S>,
) -> Result<PlanarReducedDeriv<S>, OracleError> {
    let sol = solve_multipliers(p, s)?;
    let (deltas, _) = p.ball_deltas();
    let two = real::<S>(2.0);
    let mut n1_dot = S::zero();
    let mut n2_dot = S::zero();
    let mut m_dot = S::zero();
    for i in 0..s.n_balls() {
        let rel = [s.center_vels[i][0] - s.vx, s.center_vels[i][1] - s.vy];
        let ox = s.centers[i][0] - s.x;
        let oy = s.centers[i][1] - s.y;
        n1_dot += deltas[i] * rel[0];
        n2_dot += deltas[i] * rel[1];
        m_dot += two * deltas[i] * (ox * rel[0] + oy * rel[1]);
    }
    Ok(PlanarReducedDeriv {
        v_dot: sol.plate_acc,
        moments_dot: Vec3::new(n1_dot, n2_dot, m_dot),
    })
}

/// Full multiplier flow: positions advance by the stored velocities, all
/// velocities by the solved accelerations; the vertical ball spin has zero
/// torque and is held exactly.
pub struct OracleField<'a, S> {
    pub params: &'a PlanarParams<S>,
}

impl<S: Real> VectorField<S> for OracleField<'_, S> {
    fn dim(&self) -> usize {
        OracleState::<S>::dim(self.params.n_balls())
    }

    fn eval(&self, y: &[S], dydt: &mut [S]) {
        let n = self.params.n_balls();
        let Ok(s) = OracleState::from_slice(y, n) else {
            dydt.fill(S::nan());
            return;
        };
        let Ok(sol) = solve_multipliers(self.params, &s) else {
            dydt.fill(S::nan());
            return;
        };
        dydt[0] = s.vx;
        dydt[1] = s.vy;
        dydt[2] = s.vphi;
        dydt[3..6].copy_from_slice(&sol.plate_acc.to_array());
        for i in 0..n {
            dydt[6 + 2 * i] = s.center_vels[i][0];
            dydt[6 + 2 * i + 1] = s.center_vels[i][1];
            dydt[6 + 2 * n + 2 * i] = sol.center_accs[i][0];
            dydt[6 + 2 * n + 2 * i + 1] = sol.center_accs[i][1];
            dydt[6 + 4 * n + 3 * i] = sol.omega_dots[i][0];
            dydt[6 + 4 * n + 3 * i + 1] = sol.omega_dots[i][1];
            dydt[6 + 4 * n + 3 * i + 2] = S::zero();
        }
    }
}
