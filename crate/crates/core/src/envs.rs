//! Deterministic benchmark environments.
//!
//! Each environment is a pure transition map `step(s, a)` with a non-negative
//! running cost and a compact state space that is closed under transitions:
//! raw successors are projected back into the box (angles wrapped, the rest
//! clamped). All constants are pinned here rather than configurable so that
//! experiment outputs are reproducible.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Pendulum: gravity 10, unit mass and length, semi-implicit Euler at
// dt = 0.05, torque limit 2, speed limit 8.
const PEND_G: f64 = 10.0;
const PEND_M: f64 = 1.0;
const PEND_L: f64 = 1.0;
const PEND_DT: f64 = 0.05;
const PEND_MAX_TORQUE: f64 = 2.0;
const PEND_MAX_SPEED: f64 = 8.0;

// Acrobot: two unit-mass unit-length links, centers of mass at the midpoints,
// unit link inertias, gravity 9.8, torque on the second joint, one RK4 step
// of 0.2 per transition, velocity limits 4π and 9π.
const ACRO_M1: f64 = 1.0;
const ACRO_M2: f64 = 1.0;
const ACRO_L1: f64 = 1.0;
const ACRO_LC1: f64 = 0.5;
const ACRO_LC2: f64 = 0.5;
const ACRO_I1: f64 = 1.0;
const ACRO_I2: f64 = 1.0;
const ACRO_G: f64 = 9.8;
const ACRO_DT: f64 = 0.2;
const ACRO_MAX_TORQUE: f64 = 1.0;
const ACRO_MAX_VEL1: f64 = 4.0 * PI;
const ACRO_MAX_VEL2: f64 = 9.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    /// `s' = (1 - s) a`; with the linear policy `a = θs` this is the logistic
    /// map. Cost `s² + 0.1 a²`.
    Logistic,
    /// Saturating 1-D map `s' = clamp(a, -1, 1)` on `S = [-1, 1]`, cost `|s|`.
    Sat1d,
    /// Variant on `S = [0, 1]` used with the uniform policy: `a ≤ 0` maps to
    /// 0, otherwise `s' = min(a, 1)`. Cost `s + 1`.
    Sat1dShifted,
    /// Single pendulum, state `[angle from upright, angular velocity]`.
    Pendulum,
    /// Two-link underactuated arm, state `[θ1, θ2, θ̇1, θ̇2]`: θ1 measured
    /// from upright (like the pendulum), θ2 relative between the links.
    Acrobot,
}

impl EnvKind {
    pub const ALL: [EnvKind; 5] = [
        EnvKind::Logistic,
        EnvKind::Sat1d,
        EnvKind::Sat1dShifted,
        EnvKind::Pendulum,
        EnvKind::Acrobot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Logistic => "logistic",
            EnvKind::Sat1d => "sat1d",
            EnvKind::Sat1dShifted => "sat1d-shifted",
            EnvKind::Pendulum => "pendulum",
            EnvKind::Acrobot => "acrobot",
        }
    }

    pub fn from_name(name: &str) -> Option<EnvKind> {
        EnvKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

/// A state vector. Finite entries, inside the environment box after
/// [`EnvModel::project`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub values: Vec<f64>,
}

impl State {
    pub fn new(values: Vec<f64>) -> State {
        State { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl From<Vec<f64>> for State {
    fn from(values: Vec<f64>) -> State {
        State { values }
    }
}

/// An environment instance: dimensions, box bounds, and the transition/cost
/// maps selected by `kind`. Immutable after construction; all methods are
/// pure functions of their arguments.
#[derive(Debug, Clone, Serialize)]
pub struct EnvModel {
    pub kind: EnvKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub state_lo: Vec<f64>,
    pub state_hi: Vec<f64>,
    pub action_lo: Vec<f64>,
    pub action_hi: Vec<f64>,
    /// Coordinates that live on the circle and are wrapped to [-π, π).
    angle_dims: Vec<bool>,
    /// Upper bound on the cost over the state and action boxes.
    max_cost: f64,
    /// Documented Lipschitz bound for one `step` with a shared action.
    step_lipschitz: f64,
}

/// Wrap an angle to [-π, π).
pub fn wrap_angle(x: f64) -> f64 {
    x - TAU * ((x + PI) / TAU).floor()
}

impl EnvModel {
    pub fn new(kind: EnvKind) -> EnvModel {
        match kind {
            EnvKind::Logistic => EnvModel {
                kind,
                state_dim: 1,
                action_dim: 1,
                // Trajectories for the studied θ stay in [0, 1]; the wider box
                // keeps the space closed for arbitrary parameter scans.
                state_lo: vec![-3.0],
                state_hi: vec![3.0],
                action_lo: vec![-12.0],
                action_hi: vec![12.0],
                angle_dims: vec![false],
                max_cost: 9.0 + 0.1 * 144.0,
                step_lipschitz: 12.5,
            },
            EnvKind::Sat1d => EnvModel {
                kind,
                state_dim: 1,
                action_dim: 1,
                state_lo: vec![-1.0],
                state_hi: vec![1.0],
                action_lo: vec![-10.0],
                action_hi: vec![10.0],
                angle_dims: vec![false],
                max_cost: 1.0,
                // The successor does not depend on the current state at all.
                step_lipschitz: 1.0,
            },
            EnvKind::Sat1dShifted => EnvModel {
                kind,
                state_dim: 1,
                action_dim: 1,
                state_lo: vec![0.0],
                state_hi: vec![1.0],
                action_lo: vec![0.0],
                action_hi: vec![10.0],
                angle_dims: vec![false],
                max_cost: 2.0,
                step_lipschitz: 1.0,
            },
            EnvKind::Pendulum => EnvModel {
                kind,
                state_dim: 2,
                action_dim: 1,
                state_lo: vec![-PI, -PEND_MAX_SPEED],
                state_hi: vec![PI, PEND_MAX_SPEED],
                action_lo: vec![-PEND_MAX_TORQUE],
                action_hi: vec![PEND_MAX_TORQUE],
                angle_dims: vec![true, false],
                max_cost: PI * PI + 0.1 * PEND_MAX_SPEED * PEND_MAX_SPEED
                    + 0.001 * PEND_MAX_TORQUE * PEND_MAX_TORQUE,
                step_lipschitz: 1.6,
            },
            EnvKind::Acrobot => EnvModel {
                kind,
                state_dim: 4,
                action_dim: 1,
                state_lo: vec![-PI, -PI, -ACRO_MAX_VEL1, -ACRO_MAX_VEL2],
                state_hi: vec![PI, PI, ACRO_MAX_VEL1, ACRO_MAX_VEL2],
                action_lo: vec![-ACRO_MAX_TORQUE],
                action_hi: vec![ACRO_MAX_TORQUE],
                angle_dims: vec![true, true, false, false],
                max_cost: 2.0 * PI * PI
                    + 0.1 * (ACRO_MAX_VEL1 * ACRO_MAX_VEL1 + ACRO_MAX_VEL2 * ACRO_MAX_VEL2)
                    + 0.005 * ACRO_MAX_TORQUE * ACRO_MAX_TORQUE,
                // One RK4 step at dt = 0.2 is strongly expanding near the
                // velocity limits; the empirical maximum over the box is
                // ~5.9e3 (see the Lipschitz spot-check test).
                step_lipschitz: 1.0e4,
            },
        }
    }

    pub fn from_name(name: &str) -> Result<EnvModel> {
        EnvKind::from_name(name)
            .map(EnvModel::new)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown environment '{name}'")))
    }

    /// The initial state used by the experiments for this environment.
    pub fn default_initial_state(&self) -> State {
        match self.kind {
            EnvKind::Logistic => State::new(vec![0.9]),
            EnvKind::Sat1d | EnvKind::Sat1dShifted => State::new(vec![0.0]),
            EnvKind::Pendulum => State::new(vec![-1.0, 0.0]),
            EnvKind::Acrobot => State::new(vec![1.0, 0.0, 0.0, 0.0]),
        }
    }

    /// Upper bound on `cost` over the state and action boxes. Used for the
    /// discounted-tail bound `M₂ γ^T / (1 - γ)`.
    pub fn max_cost(&self) -> f64 {
        self.max_cost
    }

    /// Documented per-step Lipschitz constant in the state argument.
    pub fn step_lipschitz(&self) -> f64 {
        self.step_lipschitz
    }

    pub fn clamp_action(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.action_lo.iter().zip(&self.action_hi))
            .map(|(&ai, (&lo, &hi))| ai.clamp(lo, hi))
            .collect()
    }

    /// Project a raw vector into the state space: wrap angle coordinates to
    /// [-π, π), clamp everything else to the box.
    pub fn project(&self, raw: &[f64]) -> State {
        let values = raw
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.angle_dims[i] {
                    wrap_angle(x)
                } else {
                    x.clamp(self.state_lo[i], self.state_hi[i])
                }
            })
            .collect();
        State { values }
    }

    pub fn contains(&self, s: &State) -> bool {
        s.values.len() == self.state_dim
            && s.values.iter().enumerate().all(|(i, &x)| {
                x.is_finite() && x >= self.state_lo[i] && x <= self.state_hi[i]
            })
    }

    /// One transition. The action is clamped to the action box, the raw
    /// successor is projected back into the state space.
    pub fn step(&self, s: &State, a: &[f64]) -> Result<State> {
        let a = self.clamp_action(a);
        let raw = match self.kind {
            EnvKind::Logistic => vec![(1.0 - s.values[0]) * a[0]],
            EnvKind::Sat1d => {
                let u = a[0];
                vec![if u <= -1.0 {
                    -1.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    u
                }]
            }
            EnvKind::Sat1dShifted => {
                let u = a[0];
                vec![if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    u
                }]
            }
            EnvKind::Pendulum => {
                let (phi, omega) = (s.values[0], s.values[1]);
                let omega_next = (omega
                    + PEND_DT * (PEND_G / PEND_L * phi.sin() + a[0] / (PEND_M * PEND_L * PEND_L)))
                    .clamp(-PEND_MAX_SPEED, PEND_MAX_SPEED);
                let phi_next = phi + PEND_DT * omega_next;
                vec![phi_next, omega_next]
            }
            EnvKind::Acrobot => {
                let y = [s.values[0], s.values[1], s.values[2], s.values[3]];
                let out = rk4_step(&y, a[0]);
                vec![
                    out[0],
                    out[1],
                    out[2].clamp(-ACRO_MAX_VEL1, ACRO_MAX_VEL1),
                    out[3].clamp(-ACRO_MAX_VEL2, ACRO_MAX_VEL2),
                ]
            }
        };
        let next = self.project(&raw);
        if next.values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState(format!(
                "{} step from {:?} with action {:?}",
                self.kind.name(),
                s.values,
                a
            )));
        }
        Ok(next)
    }

    /// Running cost. Non-negative over the state and action boxes.
    pub fn cost(&self, s: &State, a: &[f64]) -> f64 {
        match self.kind {
            EnvKind::Logistic => s.values[0] * s.values[0] + 0.1 * a[0] * a[0],
            EnvKind::Sat1d => s.values[0].abs(),
            EnvKind::Sat1dShifted => s.values[0] + 1.0,
            EnvKind::Pendulum => {
                let q = s.values[0] * s.values[0] + 0.1 * s.values[1] * s.values[1];
                q + 0.001 * a.iter().map(|x| x * x).sum::<f64>()
            }
            EnvKind::Acrobot => {
                let v = &s.values;
                let q = v[0] * v[0] + v[1] * v[1] + 0.1 * v[2] * v[2] + 0.1 * v[3] * v[3];
                q + 0.005 * a.iter().map(|x| x * x).sum::<f64>()
            }
        }
    }

    /// Coordinate-wise difference `a - b` using the shorter arc for angle
    /// coordinates, so separations near the wrap boundary stay small.
    pub fn state_diff(&self, a: &State, b: &State) -> Vec<f64> {
        a.values
            .iter()
            .zip(&b.values)
            .zip(&self.angle_dims)
            .map(|((&x, &y), &ang)| if ang { wrap_angle(x - y) } else { x - y })
            .collect()
    }

    /// Euclidean distance in the metric of [`Self::state_diff`].
    pub fn state_distance(&self, a: &State, b: &State) -> f64 {
        self.state_diff(a, b)
            .iter()
            .map(|d| d * d)
            .sum::<f64>()
            .sqrt()
    }

    /// `base + delta`, projected back into the state space.
    pub fn displace(&self, base: &State, delta: &[f64]) -> State {
        let raw: Vec<f64> = base
            .values
            .iter()
            .zip(delta)
            .map(|(&x, &d)| x + d)
            .collect();
        self.project(&raw)
    }
}

fn acrobot_deriv(y: &[f64; 4], torque: f64) -> [f64; 4] {
    let (th1, th2, dth1, dth2) = (y[0], y[1], y[2], y[3]);
    let d1 = ACRO_M1 * ACRO_LC1 * ACRO_LC1
        + ACRO_M2 * (ACRO_L1 * ACRO_L1 + ACRO_LC2 * ACRO_LC2 + 2.0 * ACRO_L1 * ACRO_LC2 * th2.cos())
        + ACRO_I1
        + ACRO_I2;
    let d2 = ACRO_M2 * (ACRO_LC2 * ACRO_LC2 + ACRO_L1 * ACRO_LC2 * th2.cos()) + ACRO_I2;
    // Gravity torques for θ1 measured from the upright position.
    let phi2 = -ACRO_M2 * ACRO_LC2 * ACRO_G * (th1 + th2).sin();
    let phi1 = -ACRO_M2 * ACRO_L1 * ACRO_LC2 * dth2 * dth2 * th2.sin()
        - 2.0 * ACRO_M2 * ACRO_L1 * ACRO_LC2 * dth2 * dth1 * th2.sin()
        - (ACRO_M1 * ACRO_LC1 + ACRO_M2 * ACRO_L1) * ACRO_G * th1.sin()
        + phi2;
    let ddth2 = (torque + (d2 / d1) * phi1
        - ACRO_M2 * ACRO_L1 * ACRO_LC2 * dth1 * dth1 * th2.sin()
        - phi2)
        / (ACRO_M2 * ACRO_LC2 * ACRO_LC2 + ACRO_I2 - d2 * d2 / d1);
    let ddth1 = -(d2 * ddth2 + phi1) / d1;
    [dth1, dth2, ddth1, ddth2]
}

fn rk4_step(y: &[f64; 4], torque: f64) -> [f64; 4] {
    let k1 = acrobot_deriv(y, torque);
    let k2 = acrobot_deriv(&add_scaled(y, &k1, ACRO_DT / 2.0), torque);
    let k3 = acrobot_deriv(&add_scaled(y, &k2, ACRO_DT / 2.0), torque);
    let k4 = acrobot_deriv(&add_scaled(y, &k3, ACRO_DT), torque);
    let mut out = *y;
    for i in 0..4 {
        out[i] += ACRO_DT / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn add_scaled(y: &[f64; 4], k: &[f64; 4], h: f64) -> [f64; 4] {
    [
        y[0] + h * k[0],
        y[1] + h * k[1],
        y[2] + h * k[2],
        y[3] + h * k[3],
    ]
}
