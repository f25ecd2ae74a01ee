//! Method-of-steps integration of the delayed gradient dynamics.
//!
//! Classic RK4 with constant initial history; delayed values come from cubic
//! Hermite interpolation of the stored states and their derivatives.

use nalgebra::{Matrix4, Vector4};

use crate::equilibrium::solve;
use crate::error::{Error, Result};
use crate::model::{profit_gradient_at, Firm, FirmPoint, ModelSpec, StateVector};

pub const DIVERGENCE_CUTOFF: f64 = 1e6;
pub const DEFAULT_MAX_STEP: f64 = 0.01;

/// History convention recorded in simulation metadata.
pub const HISTORY_CONVENTION: &str = "constant: x(t) = x(0) for t in [-tau, 0]";

/// Right-hand side `f(x(t), x(t - τ))` of a four-dimensional delay system.
pub trait DelaySystem: Sync {
    fn tau(&self) -> f64;
    fn rhs(&self, current: &[f64; 4], delayed: &[f64; 4]) -> Result<[f64; 4]>;
}

/// Nonlinear model: firm 2's demand sees the rival's lagged quantity.
pub struct ModelSystem<'a> {
    pub spec: &'a ModelSpec,
}

impl DelaySystem for ModelSystem<'_> {
    fn tau(&self) -> f64 {
        self.spec.tau()
    }

    fn rhs(&self, x: &[f64; 4], delayed: &[f64; 4]) -> Result<[f64; 4]> {
        model_rhs(self.spec, &StateVector::from_array(*x), delayed[0])
    }
}

/// `dx/dt` of the model given the current state and the lagged `x1`.
pub fn model_rhs(spec: &ModelSpec, s: &StateVector, x1_delayed: f64) -> Result<[f64; 4]> {
    let g1 = profit_gradient_at(
        spec,
        Firm::One,
        FirmPoint {
            own_x: s.x1,
            own_z: s.z1,
            rival_x: s.x2,
        },
    )?;
    let g2 = profit_gradient_at(
        spec,
        Firm::Two,
        FirmPoint {
            own_x: s.x2,
            own_z: s.z2,
            rival_x: x1_delayed,
        },
    )?;
    let k = spec.params().k;
    Ok([k[0] * g1.dx, k[1] * g2.dx, k[2] * g1.dz, k[3] * g2.dz])
}

/// `dx/dt = A x(t) + B x(t − τ)`.
pub struct LinearSystem {
    pub a: Matrix4<f64>,
    pub b: Matrix4<f64>,
    pub tau: f64,
}

impl DelaySystem for LinearSystem {
    fn tau(&self) -> f64 {
        self.tau
    }

    fn rhs(&self, x: &[f64; 4], delayed: &[f64; 4]) -> Result<[f64; 4]> {
        let v = self.a * Vector4::from(*x) + self.b * Vector4::from(*delayed);
        Ok([v[0], v[1], v[2], v[3]])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimStatus {
    Completed,
    /// A state left the `DIVERGENCE_CUTOFF` ball or became non-finite.
    Diverged { t: f64 },
    /// The right-hand side left a function family's domain.
    DomainExit { t: f64, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// Max-norm distance to `reference` per time; empty without a reference.
    pub equilibrium_distance: Vec<f64>,
    pub reference: Option<StateVector>,
    pub status: SimStatus,
    pub step: f64,
    pub tau: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&StateVector> {
        self.states.last()
    }

    pub fn final_distance(&self) -> Option<f64> {
        self.equilibrium_distance.last().copied()
    }
}

/// `min(τ/20, 0.01)` for positive delays, else 0.01.
pub fn default_step(tau: f64) -> f64 {
    if tau > 0.0 {
        (tau / 20.0).min(DEFAULT_MAX_STEP)
    } else {
        DEFAULT_MAX_STEP
    }
}

struct History {
    step: f64,
    states: Vec<[f64; 4]>,
    derivs: Vec<[f64; 4]>,
}

impl History {
    /// State at `t`, constant before zero, Hermite-interpolated inside stored steps.
    fn at(&self, t: f64) -> [f64; 4] {
        if t <= 0.0 {
            return self.states[0];
        }
        let pos = t / self.step;
        let last = self.derivs.len() - 1;
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        if i + 1 > last {
            return self.states[last];
        }
        let s = (pos - i as f64).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (y0, y1, f0, f1) = (self.states[i], self.states[i + 1], self.derivs[i], self.derivs[i + 1]);
        std::array::from_fn(|k| h00 * y0[k] + h10 * self.step * f0[k] + h01 * y1[k] + h11 * self.step * f1[k])
    }
}

fn axpy(x: &[f64; 4], a: f64, d: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|k| x[k] + a * d[k])
}

/// Raw method-of-steps RK4; returns `(times, states, status)`.
pub fn integrate_system<S: DelaySystem>(
    system: &S,
    initial: [f64; 4],
    t_end: f64,
    step: f64,
) -> Result<(Vec<f64>, Vec<[f64; 4]>, SimStatus)> {
    let tau = system.tau();
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Configuration(format!("step must be positive, got {step}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Configuration(format!("t_end must be non-negative, got {t_end}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::Configuration(format!("tau must be non-negative, got {tau}")));
    }
    if tau > 0.0 && step > tau * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!("step {step} exceeds the delay {tau}")));
    }
    let n = (t_end / step - 1e-9).ceil().max(0.0) as usize;
    let mut hist = History {
        step,
        states: Vec::with_capacity(n + 1),
        derivs: Vec::with_capacity(n + 1),
    };
    hist.states.push(initial);
    let mut times = vec![0.0];
    let h = step;
    let lagged = |hist: &History, t: f64, current: &[f64; 4]| if tau == 0.0 { *current } else { hist.at(t - tau) };

    let mut status = SimStatus::Completed;
    for i in 0..n {
        let t = i as f64 * h;
        let y = hist.states[i];
        let stages = (|| -> Result<[[f64; 4]; 4]> {
            let k1 = system.rhs(&y, &lagged(&hist, t, &y))?;
            // stored first: with h = τ the last stage looks up exactly t
            hist.derivs.push(k1);
            let y2 = axpy(&y, 0.5 * h, &k1);
            let k2 = system.rhs(&y2, &lagged(&hist, t + 0.5 * h, &y2))?;
            let y3 = axpy(&y, 0.5 * h, &k2);
            let k3 = system.rhs(&y3, &lagged(&hist, t + 0.5 * h, &y3))?;
            let y4 = axpy(&y, h, &k3);
            let k4 = system.rhs(&y4, &lagged(&hist, t + h, &y4))?;
            Ok([k1, k2, k3, k4])
        })();
        let [k1, k2, k3, k4] = match stages {
            Ok(k) => k,
            Err(Error::Domain { family, detail }) => {
                status = SimStatus::DomainExit {
                    t,
                    detail: format!("{family}: {detail}"),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        let next: [f64; 4] = std::array::from_fn(|k| y[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
        let t_next = (i + 1) as f64 * h;
        if next.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_CUTOFF) {
            status = SimStatus::Diverged { t: t_next };
            break;
        }
        hist.states.push(next);
        times.push(t_next);
    }
    Ok((times, hist.states, status))
}

/// Integrate the model from constant history `initial`, measuring the
/// distance to `reference` (when given).
pub fn integrate_with_reference(
    spec: &ModelSpec,
    initial: StateVector,
    t_end: f64,
    step: f64,
    reference: Option<StateVector>,
) -> Result<Trajectory> {
    if !initial.is_finite() {
        return Err(Error::Configuration("initial state must be finite".into()));
    }
    // reject an initial state outside the model's domain up front
    model_rhs(spec, &initial, initial.x1)?;
    let (times, raw, status) = integrate_system(&ModelSystem { spec }, initial.to_array(), t_end, step)?;
    let states: Vec<StateVector> = raw.into_iter().map(StateVector::from_array).collect();
    let equilibrium_distance = reference
        .map(|r| states.iter().map(|s| s.distance(&r)).collect())
        .unwrap_or_default();
    Ok(Trajectory {
        times,
        states,
        equilibrium_distance,
        reference,
        status,
        step,
        tau: spec.tau(),
    })
}

/// Integrate the model; the reference is the solved equilibrium when one exists.
pub fn integrate(spec: &ModelSpec, initial: StateVector, t_end: f64, step: f64) -> Result<Trajectory> {
    let reference = solve(spec).ok().map(|e| e.state);
    integrate_with_reference(spec, initial, t_end, step, reference)
}

/// Observed order `log2(|y_h − y_{h/2}| / |y_{h/2} − y_{h/4}|)`, using the
/// max-norm over the common grid.
pub fn convergence_order_with_step(spec: &ModelSpec, initial: StateVector, t_end: f64, step: f64) -> Result<f64> {
    let run = |h: f64| -> Result<Vec<[f64; 4]>> {
        let (_, states, status) = integrate_system(&ModelSystem { spec }, initial.to_array(), t_end, h)?;
        if status != SimStatus::Completed {
            return Err(Error::Precondition(format!("trajectory did not complete at step {h}: {status:?}")));
        }
        Ok(states)
    };
    let coarse = run(step)?;
    let mid = run(step / 2.0)?;
    let fine = run(step / 4.0)?;
    let gap = |x: &[f64; 4], y: &[f64; 4]| (0..4).map(|k| (x[k] - y[k]).abs()).fold(0.0, f64::max);
    let common = coarse.len().min(mid.len().div_ceil(2)).min(fine.len().div_ceil(4));
    let e1 = (0..common).map(|i| gap(&coarse[i], &mid[2 * i])).fold(0.0, f64::max);
    let e2 = (0..common).map(|i| gap(&mid[2 * i], &fine[4 * i])).fold(0.0, f64::max);
    Ok((e1 / e2).log2())
}

/// Observed order at step `τ/4` (or 0.1 without delay), so delay multiples fall on the grid.
pub fn convergence_order_check(spec: &ModelSpec, initial: StateVector, t_end: f64) -> Result<f64> {
    let tau = spec.tau();
    let step = if tau > 0.0 { (tau / 4.0).min(0.1) } else { 0.1 };
    convergence_order_with_step(spec, initial, t_end, step)
}
