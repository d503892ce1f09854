//! Policy families and their score functions.
//!
//! Deterministic policies map states to actions directly: a linear map `W s`
//! or the two-layer network `W₂ tanh(W₁ s)` (no biases). The Gaussian kinds
//! wrap either mean in `N(u(s), σ² I)`, storing σ as log σ in the last slot
//! of the parameter vector so it survives unconstrained perturbation. The
//! uniform kind draws from `U(|θ₁|s + |θ₂|^β, |θ₁|s + 2|θ₂|^β)`, a family
//! whose exponent β controls how fast the landscape roughens as θ₂ leaves
//! zero.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envs::State;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// Default standard deviation stored in freshly initialized Gaussian policies.
pub const DEFAULT_SIGMA0: f64 = 0.1;
/// Weight prior scale for initialization.
pub const INIT_WEIGHT_STD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    LinearDet,
    LinearGaussian,
    TanhNetDet,
    TanhNetGaussian,
    UniformShifted { beta: f64 },
}

/// Dimensions and kind of a policy family. `state_dim` = n, `action_dim` = m,
/// `hidden` = r (tanh kinds only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: usize,
}

/// A flat parameter vector for some [`PolicySpec`] layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> ParamVector {
        ParamVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> ParamVector {
        ParamVector { values }
    }
}

/// Parameter blocks of a [`ParamVector`] in its layout.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyParams {
    Linear {
        /// m×n row-major weight matrix.
        w: Vec<f64>,
        log_sigma: Option<f64>,
    },
    TanhNet {
        /// r×n row-major first layer.
        w1: Vec<f64>,
        /// m×r row-major second layer.
        w2: Vec<f64>,
        log_sigma: Option<f64>,
    },
    Uniform {
        theta1: f64,
        theta2: f64,
    },
}

/// One sampled action with its log-density and score where defined.
#[derive(Debug, Clone)]
pub struct ActionSample {
    pub action: Vec<f64>,
    /// `log π(a|s)`; `None` when the distribution has collapsed to a point.
    pub log_prob: Option<f64>,
    /// `∇_θ log π(a|s)`; Gaussian kinds with σ > 0 only.
    pub score: Option<Vec<f64>>,
}

impl PolicySpec {
    pub fn linear_det(state_dim: usize, action_dim: usize) -> PolicySpec {
        PolicySpec { kind: PolicyKind::LinearDet, state_dim, action_dim, hidden: 0 }
    }

    pub fn linear_gaussian(state_dim: usize, action_dim: usize) -> PolicySpec {
        PolicySpec { kind: PolicyKind::LinearGaussian, state_dim, action_dim, hidden: 0 }
    }

    pub fn tanh_net_det(state_dim: usize, action_dim: usize, hidden: usize) -> PolicySpec {
        PolicySpec { kind: PolicyKind::TanhNetDet, state_dim, action_dim, hidden }
    }

    pub fn tanh_net_gaussian(state_dim: usize, action_dim: usize, hidden: usize) -> PolicySpec {
        PolicySpec { kind: PolicyKind::TanhNetGaussian, state_dim, action_dim, hidden }
    }

    pub fn uniform_shifted(beta: f64) -> PolicySpec {
        PolicySpec {
            kind: PolicyKind::UniformShifted { beta },
            state_dim: 1,
            action_dim: 1,
            hidden: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.action_dim == 0 {
            return Err(Error::InvalidConfig("policy dims must be positive".into()));
        }
        match self.kind {
            PolicyKind::TanhNetDet | PolicyKind::TanhNetGaussian if self.hidden == 0 => {
                Err(Error::InvalidConfig("tanh network needs hidden width >= 1".into()))
            }
            PolicyKind::UniformShifted { beta } if beta <= 0.0 => {
                Err(Error::InvalidConfig("uniform policy needs beta > 0".into()))
            }
            PolicyKind::UniformShifted { .. }
                if self.state_dim != 1 || self.action_dim != 1 =>
            {
                Err(Error::InvalidConfig("uniform policy is one-dimensional".into()))
            }
            _ => Ok(()),
        }
    }

    /// Total number of parameters in the layout.
    pub fn param_count(&self) -> usize {
        match self.kind {
            PolicyKind::LinearDet => self.action_dim * self.state_dim,
            PolicyKind::LinearGaussian => self.action_dim * self.state_dim + 1,
            PolicyKind::TanhNetDet => {
                self.hidden * self.state_dim + self.action_dim * self.hidden
            }
            PolicyKind::TanhNetGaussian => {
                self.hidden * self.state_dim + self.action_dim * self.hidden + 1
            }
            PolicyKind::UniformShifted { .. } => 2,
        }
    }

    /// Index of the log σ slot, for Gaussian kinds.
    pub fn sigma_index(&self) -> Option<usize> {
        match self.kind {
            PolicyKind::LinearGaussian | PolicyKind::TanhNetGaussian => {
                Some(self.param_count() - 1)
            }
            _ => None,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(
            self.kind,
            PolicyKind::LinearGaussian
                | PolicyKind::TanhNetGaussian
                | PolicyKind::UniformShifted { .. }
        )
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, PolicyKind::LinearGaussian | PolicyKind::TanhNetGaussian)
    }

    pub fn sigma(&self, theta: &ParamVector) -> Option<f64> {
        self.sigma_index().map(|i| theta.values[i].exp())
    }

    /// Layout token written into theta files.
    pub fn descriptor(&self) -> String {
        match self.kind {
            PolicyKind::LinearDet => {
                format!("linear-det:n={},m={}", self.state_dim, self.action_dim)
            }
            PolicyKind::LinearGaussian => {
                format!("linear-gaussian:n={},m={}", self.state_dim, self.action_dim)
            }
            PolicyKind::TanhNetDet => format!(
                "tanh-net-det:n={},m={},r={}",
                self.state_dim, self.action_dim, self.hidden
            ),
            PolicyKind::TanhNetGaussian => format!(
                "tanh-net-gaussian:n={},m={},r={}",
                self.state_dim, self.action_dim, self.hidden
            ),
            PolicyKind::UniformShifted { beta } => format!("uniform-shifted:beta={beta}"),
        }
    }

    fn check_theta(&self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.param_count() {
            return Err(Error::LayoutMismatch(format!(
                "expected {} parameters for {}, got {}",
                self.param_count(),
                self.descriptor(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// Split a flat vector into its layout blocks.
    pub fn unflatten(&self, theta: &ParamVector) -> Result<PolicyParams> {
        self.check_theta(theta)?;
        let v = &theta.values;
        Ok(match self.kind {
            PolicyKind::LinearDet => PolicyParams::Linear {
                w: v.clone(),
                log_sigma: None,
            },
            PolicyKind::LinearGaussian => PolicyParams::Linear {
                w: v[..v.len() - 1].to_vec(),
                log_sigma: Some(v[v.len() - 1]),
            },
            PolicyKind::TanhNetDet | PolicyKind::TanhNetGaussian => {
                let n1 = self.hidden * self.state_dim;
                let n2 = n1 + self.action_dim * self.hidden;
                PolicyParams::TanhNet {
                    w1: v[..n1].to_vec(),
                    w2: v[n1..n2].to_vec(),
                    log_sigma: if matches!(self.kind, PolicyKind::TanhNetGaussian) {
                        Some(v[n2])
                    } else {
                        None
                    },
                }
            }
            PolicyKind::UniformShifted { .. } => PolicyParams::Uniform {
                theta1: v[0],
                theta2: v[1],
            },
        })
    }

    /// Inverse of [`Self::unflatten`].
    pub fn flatten(&self, params: &PolicyParams) -> Result<ParamVector> {
        let values = match (self.kind, params) {
            (PolicyKind::LinearDet, PolicyParams::Linear { w, log_sigma: None }) => w.clone(),
            (PolicyKind::LinearGaussian, PolicyParams::Linear { w, log_sigma: Some(ls) }) => {
                let mut v = w.clone();
                v.push(*ls);
                v
            }
            (PolicyKind::TanhNetDet, PolicyParams::TanhNet { w1, w2, log_sigma: None }) => {
                let mut v = w1.clone();
                v.extend_from_slice(w2);
                v
            }
            (
                PolicyKind::TanhNetGaussian,
                PolicyParams::TanhNet { w1, w2, log_sigma: Some(ls) },
            ) => {
                let mut v = w1.clone();
                v.extend_from_slice(w2);
                v.push(*ls);
                v
            }
            (PolicyKind::UniformShifted { .. }, PolicyParams::Uniform { theta1, theta2 }) => {
                vec![*theta1, *theta2]
            }
            _ => {
                return Err(Error::LayoutMismatch(format!(
                    "parameter blocks do not match {}",
                    self.descriptor()
                )))
            }
        };
        let theta = ParamVector::new(values);
        self.check_theta(&theta)?;
        Ok(theta)
    }

    /// Draw an initial parameter vector: weights from N(0, 0.05²), log σ slot
    /// set to log(0.1).
    pub fn init_theta(&self, rng: &mut impl Rng) -> ParamVector {
        let p = self.param_count();
        let mut values: Vec<f64> = (0..p)
            .map(|_| INIT_WEIGHT_STD * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some(i) = self.sigma_index() {
            values[i] = DEFAULT_SIGMA0.ln();
        }
        ParamVector::new(values)
    }
}

fn mat_vec(w: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
    out
}

fn tanh_hidden(spec: &PolicySpec, w1: &[f64], s: &[f64]) -> Vec<f64> {
    mat_vec(w1, spec.hidden, spec.state_dim, s)
        .into_iter()
        .map(f64::tanh)
        .collect()
}

/// The deterministic action `u(s)`: the mean of the stochastic kinds.
pub fn mean_action(spec: &PolicySpec, theta: &ParamVector, s: &State) -> Result<Vec<f64>> {
    spec.check_theta(theta)?;
    let params = spec.unflatten(theta)?;
    Ok(match params {
        PolicyParams::Linear { ref w, .. } => {
            mat_vec(w, spec.action_dim, spec.state_dim, &s.values)
        }
        PolicyParams::TanhNet { ref w1, ref w2, .. } => {
            let h = tanh_hidden(spec, w1, &s.values);
            mat_vec(w2, spec.action_dim, spec.hidden, &h)
        }
        PolicyParams::Uniform { theta1, theta2 } => {
            let PolicyKind::UniformShifted { beta } = spec.kind else { unreachable!() };
            let half = theta2.abs().powf(beta);
            vec![theta1.abs() * s.values[0] + 1.5 * half]
        }
    })
}

/// Draw one action. Gaussian kinds consume exactly `action_dim` normal draws
/// per call and the uniform kind one draw, regardless of θ, so streams stay
/// aligned across perturbed parameters (common random numbers).
pub fn sample_action(
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    rng: &mut impl Rng,
) -> Result<ActionSample> {
    spec.check_theta(theta)?;
    match spec.kind {
        PolicyKind::LinearDet | PolicyKind::TanhNetDet => Ok(ActionSample {
            action: mean_action(spec, theta, s)?,
            log_prob: None,
            score: None,
        }),
        PolicyKind::LinearGaussian | PolicyKind::TanhNetGaussian => {
            let mean = mean_action(spec, theta, s)?;
            let sigma = spec.sigma(theta).expect("gaussian kind has sigma slot");
            let z: Vec<f64> = (0..spec.action_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            if sigma == 0.0 {
                return Ok(ActionSample { action: mean, log_prob: None, score: None });
            }
            let action: Vec<f64> = mean.iter().zip(&z).map(|(u, zi)| u + sigma * zi).collect();
            let log_prob = gaussian_log_prob(&action, &mean, sigma);
            let score = gaussian_score(spec, theta, s, &action)?;
            Ok(ActionSample { action, log_prob: Some(log_prob), score: Some(score) })
        }
        PolicyKind::UniformShifted { beta } => {
            let PolicyParams::Uniform { theta1, theta2 } = spec.unflatten(theta)? else {
                unreachable!()
            };
            let width = theta2.abs().powf(beta);
            let lo = theta1.abs() * s.values[0] + width;
            let u: f64 = rng.random();
            let action = vec![lo + u * width];
            let log_prob = (width > 0.0).then(|| -width.ln());
            Ok(ActionSample { action, log_prob, score: None })
        }
    }
}

fn gaussian_log_prob(action: &[f64], mean: &[f64], sigma: f64) -> f64 {
    let m = action.len() as f64;
    let sq: f64 = action
        .iter()
        .zip(mean)
        .map(|(a, u)| (a - u) * (a - u))
        .sum();
    -0.5 * m * LN_2PI - m * sigma.ln() - sq / (2.0 * sigma * sigma)
}

fn gaussian_score(
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    action: &[f64],
) -> Result<Vec<f64>> {
    let params = spec.unflatten(theta)?;
    let sigma = spec.sigma(theta).expect("gaussian kind");
    let mean = mean_action(spec, theta, s)?;
    let sigma2 = sigma * sigma;
    // Residual in sigma-scaled form: delta = (a - u(s)) / sigma^2.
    let delta: Vec<f64> = action
        .iter()
        .zip(&mean)
        .map(|(a, u)| (a - u) / sigma2)
        .collect();
    let mut grad = vec![0.0; spec.param_count()];
    match params {
        PolicyParams::Linear { .. } => {
            // d/dW = delta ⊗ s
            let n = spec.state_dim;
            for i in 0..spec.action_dim {
                for j in 0..n {
                    grad[i * n + j] = delta[i] * s.values[j];
                }
            }
        }
        PolicyParams::TanhNet { ref w1, ref w2, .. } => {
            let h = tanh_hidden(spec, w1, &s.values);
            let n = spec.state_dim;
            let r = spec.hidden;
            let w1_len = r * n;
            // d/dW2 = delta ⊗ h
            for i in 0..spec.action_dim {
                for k in 0..r {
                    grad[w1_len + i * r + k] = delta[i] * h[k];
                }
            }
            // d/dW1 = ((W2ᵀ delta) ∘ (1 - h²)) ⊗ s
            for k in 0..r {
                let back: f64 = (0..spec.action_dim).map(|i| w2[i * r + k] * delta[i]).sum();
                let gate = back * (1.0 - h[k] * h[k]);
                for j in 0..n {
                    grad[k * n + j] = gate * s.values[j];
                }
            }
        }
        PolicyParams::Uniform { .. } => unreachable!("gaussian_score on uniform kind"),
    }
    // d/d(log sigma) = ||a - u||² / sigma² - m
    let sq: f64 = action
        .iter()
        .zip(&mean)
        .map(|(a, u)| (a - u) * (a - u))
        .sum();
    let idx = spec.sigma_index().expect("gaussian kind");
    grad[idx] = sq / sigma2 - spec.action_dim as f64;
    Ok(grad)
}

/// Analytic `∇_θ log π_θ(a|s)` for the Gaussian kinds.
pub fn score_gradient(
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    action: &[f64],
) -> Result<Vec<f64>> {
    if !spec.is_gaussian() {
        return Err(Error::InvalidConfig(format!(
            "score gradient is defined for Gaussian kinds, not {}",
            spec.descriptor()
        )));
    }
    spec.check_theta(theta)?;
    let sigma = spec.sigma(theta).expect("gaussian kind");
    if sigma == 0.0 {
        return Err(Error::DegenerateDensity(
            "score gradient at sigma = 0".into(),
        ));
    }
    gaussian_score(spec, theta, s, action)
}

/// `log π_θ(a|s)` for stochastic kinds.
pub fn log_prob(
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    action: &[f64],
) -> Result<f64> {
    spec.check_theta(theta)?;
    match spec.kind {
        PolicyKind::LinearGaussian | PolicyKind::TanhNetGaussian => {
            let sigma = spec.sigma(theta).expect("gaussian kind");
            if sigma == 0.0 {
                return Err(Error::DegenerateDensity("log prob at sigma = 0".into()));
            }
            let mean = mean_action(spec, theta, s)?;
            Ok(gaussian_log_prob(action, &mean, sigma))
        }
        PolicyKind::UniformShifted { beta } => {
            let PolicyParams::Uniform { theta2, .. } = spec.unflatten(theta)? else {
                unreachable!()
            };
            let width = theta2.abs().powf(beta);
            if width == 0.0 {
                return Err(Error::DegenerateDensity("log prob at zero-width interval".into()));
            }
            Ok(-width.ln())
        }
        _ => Err(Error::DegenerateDensity(
            "log prob of a deterministic policy".into(),
        )),
    }
}
