//! Fixed-step explicit integration over generic vector fields, plus
//! variational (tangent-flow) propagation for measure-transport checks.
//!
//! Fixed-step RK4 keeps drift numbers reproducible; step-halving
//! convergence studies stand in for adaptive error control.

use crate::linalg::DenseMat;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegratorError {
    #[error("non-finite field evaluation at t = {t}; state = {state_echo}")]
    NonFinite { t: f64, state_echo: String },
    #[error("integration aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },
    #[error("invalid integration span: h = {h}, t_end = {t_end}")]
    InvalidSpan { h: f64, t_end: f64 },
}

/// Autonomous vector field on R^dim.
pub trait VectorField<S> {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[S], dydt: &mut [S]);
}

/// Wrap a closure as a vector field.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F> {
    pub fn new<S>(dim: usize, f: F) -> Self
    where
        F: Fn(&[S], &mut [S]),
    {
        Self { dim, f }
    }
}

impl<S, F: Fn(&[S], &mut [S])> VectorField<S> for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, y: &[S], dydt: &mut [S]) {
        (self.f)(y, dydt)
    }
}

/// Hook invoked after every accepted step. May adjust the state
/// (renormalization) or abort the run by returning an error reason.
pub trait Observer<S> {
    fn after_step(&mut self, step: usize, t: S, y: &mut [S]) -> Result<(), String>;
}

/// Observer that does nothing.
pub struct NullObserver;

impl<S> Observer<S> for NullObserver {
    fn after_step(&mut self, _step: usize, _t: S, _y: &mut [S]) -> Result<(), String> {
        Ok(())
    }
}

/// Run two observers in sequence.
pub struct ObserverPair<A, B>(pub A, pub B);

impl<S: Copy, A: Observer<S>, B: Observer<S>> Observer<S> for ObserverPair<A, B> {
    fn after_step(&mut self, step: usize, t: S, y: &mut [S]) -> Result<(), String> {
        self.0.after_step(step, t, y)?;
        self.1.after_step(step, t, y)
    }
}

/// Sampled trajectory. `jacobians`, when present, holds the flow Jacobian
/// J(t) at each sample, with J(0) the identity.
#[derive(Debug, Clone)]
pub struct FlowResult<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    pub h: S,
    pub jacobians: Option<Vec<DenseMat<S>>>,
}

fn state_echo<S: Real>(y: &[S]) -> String {
    let parts: Vec<String> = y
        .iter()
        .take(16)
        .map(|x| format!("{:e}", x.to_f64().unwrap_or(f64::NAN)))
        .collect();
    let tail = if y.len() > 16 { ", ..." } else { "" };
    format!("[{}{}]", parts.join(", "), tail)
}

struct Rk4Scratch<S> {
    k1: Vec<S>,
    k2: Vec<S>,
    k3: Vec<S>,
    k4: Vec<S>,
    tmp: Vec<S>,
}

impl<S: Real> Rk4Scratch<S> {
    fn new(dim: usize) -> Self {
        let z = vec![S::zero(); dim];
        Self {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step<F: VectorField<S>>(
        &mut self,
        field: &F,
        y: &mut [S],
        h: S,
        t: S,
    ) -> Result<(), IntegratorError> {
        let half = real::<S>(0.5);
        let sixth = S::one() / real::<S>(6.0);
        let two = real::<S>(2.0);

        field.eval(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k1[i] * half * h;
        }
        field.eval(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k2[i] * half * h;
        }
        field.eval(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k3[i] * h;
        }
        field.eval(&self.tmp, &mut self.k4);

        for i in 0..y.len() {
            let incr = self.k1[i] + two * self.k2[i] + two * self.k3[i] + self.k4[i];
            y[i] += h * sixth * incr;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(IntegratorError::NonFinite {
                t: t.to_f64().unwrap_or(f64::NAN),
                state_echo: state_echo(y),
            });
        }
        Ok(())
    }
}

/// One classical fourth-order Runge-Kutta step. Deterministic.
pub fn rk4_step<S: Real, F: VectorField<S>>(
    field: &F,
    y: &mut [S],
    h: S,
) -> Result<(), IntegratorError> {
    Rk4Scratch::new(y.len()).step(field, y, h, S::zero())
}

/// Number of full steps and the final partial step for a span.
fn plan_steps<S: Real>(h: S, t_end: S) -> Result<(usize, Option<S>), IntegratorError> {
    if !(h > S::zero()) || !(t_end > S::zero()) {
        return Err(IntegratorError::InvalidSpan {
            h: h.to_f64().unwrap_or(f64::NAN),
            t_end: t_end.to_f64().unwrap_or(f64::NAN),
        });
    }
    let ratio = t_end / h;
    let n_full = ratio.floor().to_usize().unwrap_or(0);
    let remainder = t_end - h * S::from_usize(n_full).unwrap();
    let partial = if remainder > h * real::<S>(1e-9) {
        Some(remainder)
    } else {
        None
    };
    Ok((n_full, partial))
}

/// Integrate with repeated RK4 steps and an exact final partial step.
/// The state at t = 0 and the final state are always sampled; interior
/// states every `sample_every` steps. The observer runs after every step,
/// before the state is sampled.
pub fn integrate<S: Real, F: VectorField<S>, O: Observer<S>>(
    field: &F,
    y0: &[S],
    h: S,
    t_end: S,
    sample_every: usize,
    observer: &mut O,
) -> Result<FlowResult<S>, IntegratorError> {
    let sample_every = sample_every.max(1);
    let (n_full, partial) = plan_steps(h, t_end)?;
    let n_total = n_full + usize::from(partial.is_some());

    let mut y = y0.to_vec();
    let mut scratch = Rk4Scratch::new(y.len());
    let mut times = Vec::with_capacity(n_total / sample_every + 2);
    let mut states = Vec::with_capacity(n_total / sample_every + 2);
    times.push(S::zero());
    states.push(y.clone());

    for step in 1..=n_total {
        let (step_h, t_next) = if step <= n_full {
            (h, h * S::from_usize(step).unwrap())
        } else {
            (partial.unwrap(), t_end)
        };
        scratch.step(field, &mut y, step_h, t_next)?;
        observer
            .after_step(step, t_next, &mut y)
            .map_err(|reason| IntegratorError::Aborted {
                t: t_next.to_f64().unwrap_or(f64::NAN),
                reason,
            })?;
        if step % sample_every == 0 || step == n_total {
            times.push(t_next);
            states.push(y.clone());
        }
    }

    Ok(FlowResult {
        times,
        states,
        h,
        jacobians: None,
    })
}

/// Central-difference Jacobian of `field` at `y`, step `1e-6 * max(1, |y_i|)`
/// per component. States mix rad/s with mass-length^2 magnitudes, so the
/// step scales with the component.
pub fn fd_jacobian<S: Real, F: VectorField<S>>(field: &F, y: &[S]) -> DenseMat<S> {
    let n = field.dim();
    let eps = real::<S>(1e-6);
    let mut jac = DenseMat::zeros(n, n);
    let mut yp = y.to_vec();
    let mut ym = y.to_vec();
    let mut fp = vec![S::zero(); n];
    let mut fm = vec![S::zero(); n];
    for j in 0..n {
        let step = eps * S::one().max(y[j].abs());
        yp[j] = y[j] + step;
        ym[j] = y[j] - step;
        field.eval(&yp, &mut fp);
        field.eval(&ym, &mut fm);
        let denom = yp[j] - ym[j];
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / denom;
        }
        yp[j] = y[j];
        ym[j] = y[j];
    }
    jac
}

struct TangentField<'a, F> {
    inner: &'a F,
    n: usize,
}

impl<S: Real, F: VectorField<S>> VectorField<S> for TangentField<'_, F> {
    fn dim(&self) -> usize {
        self.n + self.n * self.n
    }

    fn eval(&self, y: &[S], dydt: &mut [S]) {
        let n = self.n;
        self.inner.eval(&y[..n], &mut dydt[..n]);
        let a = fd_jacobian(self.inner, &y[..n]);
        // dJ/dt = A(y) J, both row-major.
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    acc += a[(i, k)] * y[n + k * n + j];
                }
                dydt[n + i * n + j] = acc;
            }
        }
    }
}

/// Integrate the state together with its tangent flow J(t), J(0) = E,
/// using the same RK4 tableau. The Jacobian of the field is obtained by
/// central finite differences, which keeps the transport check independent
/// of analytic-derivative bugs in the field itself.
pub fn tangent_flow<S: Real, F: VectorField<S>>(
    field: &F,
    y0: &[S],
    h: S,
    t_end: S,
    sample_every: usize,
) -> Result<FlowResult<S>, IntegratorError> {
    let n = field.dim();
    let tangent = TangentField { inner: field, n };
    let mut aug = vec![S::zero(); n + n * n];
    aug[..n].copy_from_slice(y0);
    for i in 0..n {
        aug[n + i * n + i] = S::one();
    }
    let raw = integrate(&tangent, &aug, h, t_end, sample_every, &mut NullObserver)?;

    let mut states = Vec::with_capacity(raw.states.len());
    let mut jacobians = Vec::with_capacity(raw.states.len());
    for s in &raw.states {
        states.push(s[..n].to_vec());
        let mut j = DenseMat::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                j[(r, c)] = s[n + r * n + c];
            }
        }
        jacobians.push(j);
    }
    Ok(FlowResult {
        times: raw.times,
        states,
        h,
        jacobians: Some(jacobians),
    })
}

/// Observed convergence order from endpoint errors at steps h and h/2
/// against a reference computed at h/32.
pub fn convergence_order<S: Real, F: VectorField<S>>(
    field: &F,
    y0: &[S],
    h: S,
    t_end: S,
) -> Result<S, IntegratorError> {
    let thirty_two = real::<S>(32.0);
    let run = |step: S| -> Result<Vec<S>, IntegratorError> {
        let res = integrate(field, y0, step, t_end, usize::MAX, &mut NullObserver)?;
        Ok(res.states.last().unwrap().clone())
    };
    let reference = run(h / thirty_two)?;
    let coarse = run(h)?;
    let fine = run(h / real::<S>(2.0))?;
    let err = |y: &[S]| -> S {
        y.iter()
            .zip(&reference)
            .fold(S::zero(), |acc, (a, b)| acc.max((*a - *b).abs()))
    };
    let e1 = err(&coarse);
    let e2 = err(&fine);
    Ok((e1 / e2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar;
    impl VectorField<f64> for Scalar {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, y: &[f64], dydt: &mut [f64]) {
            dydt[0] = y[0];
        }
    }

    struct Still;
    impl VectorField<f64> for Still {
        fn dim(&self) -> usize {
            3
        }
        fn eval(&self, _y: &[f64], dydt: &mut [f64]) {
            dydt.fill(0.0);
        }
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let mut y = [1.0, -2.0, 0.5];
        rk4_step(&Still, &mut y, 0.1).unwrap();
        assert_eq!(y, [1.0, -2.0, 0.5]);
    }

    #[test]
    fn exponential_step_matches_truncated_series() {
        // RK4 on x' = x, one step h = 0.1 from x = 1:
        // 1 + h + h^2/2 + h^3/6 + h^4/24 = 1.1051708333333333
        let mut y = [1.0];
        rk4_step(&Scalar, &mut y, 0.1).unwrap();
        assert!((y[0] - 1.1051708333333333).abs() < 1e-15);
        assert!((y[0] - 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn sampling_includes_initial_and_final_state() {
        let h = 0.1;
        let res = integrate(&Scalar, &[1.0], h, 3.0 * h, 1, &mut NullObserver).unwrap();
        assert_eq!(res.states.len(), 4);
        assert_eq!(res.times[0], 0.0);
        assert!((res.times[3] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn partial_final_step_hits_t_end_exactly() {
        let res = integrate(&Scalar, &[1.0], 0.15, 1.0, usize::MAX, &mut NullObserver).unwrap();
        let t_last = *res.times.last().unwrap();
        assert_eq!(t_last, 1.0);
        assert!((res.states.last().unwrap()[0] - 1.0f64.exp()).abs() < 1e-4);
    }

    #[test]
    fn observer_abort_propagates() {
        struct Bomb;
        impl Observer<f64> for Bomb {
            fn after_step(&mut self, step: usize, _t: f64, _y: &mut [f64]) -> Result<(), String> {
                if step >= 2 {
                    Err("left admissible region".into())
                } else {
                    Ok(())
                }
            }
        }
        let err = integrate(&Scalar, &[1.0], 0.1, 1.0, 1, &mut Bomb).unwrap_err();
        assert!(matches!(err, IntegratorError::Aborted { .. }));
    }

    #[test]
    fn non_finite_fields_abort_with_echo() {
        struct Blowup;
        impl VectorField<f64> for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, y: &[f64], dydt: &mut [f64]) {
                dydt[0] = y[0] * y[0] * 1e308;
            }
        }
        let err = integrate(&Blowup, &[1.0], 0.5, 2.0, 1, &mut NullObserver).unwrap_err();
        match err {
            IntegratorError::NonFinite { state_echo, .. } => {
                assert!(state_echo.starts_with('['));
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn tangent_flow_of_zero_field_is_identity() {
        let res = tangent_flow(&Still, &[0.1, 0.2, 0.3], 0.1, 1.0, 5).unwrap();
        let j = res.jacobians.as_ref().unwrap().last().unwrap().clone();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((j[(i, k)] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn trace_free_linear_field_has_unit_jacobian_det() {
        struct Saddle;
        impl VectorField<f64> for Saddle {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, y: &[f64], dydt: &mut [f64]) {
                dydt[0] = y[0];
                dydt[1] = -y[1];
            }
        }
        let res = tangent_flow(&Saddle, &[1.0, 1.0], 1e-3, 2.0, 100).unwrap();
        for j in res.jacobians.as_ref().unwrap() {
            assert!((j.det().unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn jacobian_multiplicativity_over_subintervals() {
        struct Swirl;
        impl VectorField<f64> for Swirl {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, y: &[f64], dydt: &mut [f64]) {
                dydt[0] = -y[1] + 0.1 * y[0] * y[1];
                dydt[1] = y[0] - 0.05 * y[0] * y[0];
            }
        }
        let t = 0.8;
        let full = tangent_flow(&Swirl, &[0.7, -0.2], 1e-3, 2.0 * t, usize::MAX).unwrap();
        let first = tangent_flow(&Swirl, &[0.7, -0.2], 1e-3, t, usize::MAX).unwrap();
        let mid_state = first.states.last().unwrap().clone();
        let second = tangent_flow(&Swirl, &mid_state, 1e-3, t, usize::MAX).unwrap();

        let j_full = full.jacobians.as_ref().unwrap().last().unwrap().clone();
        let j1 = first.jacobians.as_ref().unwrap().last().unwrap().clone();
        let j2 = second.jacobians.as_ref().unwrap().last().unwrap().clone();
        let prod = j2.mul(&j1);
        for i in 0..2 {
            for k in 0..2 {
                assert!((j_full[(i, k)] - prod[(i, k)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn order_estimate_on_exponential() {
        let order = convergence_order(&Scalar, &[1.0], 0.05, 1.0).unwrap();
        assert!(order > 3.9, "observed order {order}");
    }

    #[test]
    fn determinism_bitwise() {
        let a = integrate(&Scalar, &[1.0], 1e-3, 1.0, 10, &mut NullObserver).unwrap();
        let b = integrate(&Scalar, &[1.0], 1e-3, 1.0, 10, &mut NullObserver).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.times, b.times);
    }

    /// Field with the sign of time flipped; used for the forward-backward
    /// sanity run.
    struct Reversed<'a, F>(&'a F);
    impl<S: Real, F: VectorField<S>> VectorField<S> for Reversed<'_, F> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval(&self, y: &[S], dydt: &mut [S]) {
            self.0.eval(y, dydt);
            for v in dydt.iter_mut() {
                *v = -*v;
            }
        }
    }

    #[test]
    fn forward_backward_run_returns_near_the_start() {
        // Planar bearing, forward then backward for t = 1. RK4 is not
        // time-symmetric, so the mismatch reflects truncation error.
        use crate::planar::{PlanarBall, PlanarParams, PlanarReducedField, PlanarReducedState};
        use crate::Vec3;
        let p: PlanarParams<f64> = PlanarParams::new(
            0.5,
            2.5,
            1.8,
            vec![
                PlanarBall {
                    mass: 1.0,
                    inertia: 0.1,
                };
                3
            ],
        )
        .unwrap();
        let s = PlanarReducedState::new(&p, Vec3::new(0.4, -0.3, 0.8), Vec3::new(0.3, -0.2, 1.0))
            .unwrap();
        let field = PlanarReducedField { params: &p };
        let y0 = s.to_vec();
        let fwd = integrate(&field, &y0, 1e-3, 1.0, usize::MAX, &mut NullObserver).unwrap();
        let mid = fwd.states.last().unwrap().clone();
        let back = integrate(
            &Reversed(&field),
            &mid,
            1e-3,
            1.0,
            usize::MAX,
            &mut NullObserver,
        )
        .unwrap();
        let end = back.states.last().unwrap();
        for (a, b) in end.iter().zip(&y0) {
            assert!((a - b).abs() < 1e-8, "round trip mismatch: {a} vs {b}");
        }
    }
}
