//! Trajectory generation and truncated discounted-return evaluation.
//!
//! The objective is the discounted cost sum over the first `horizon` steps;
//! the dropped tail is bounded by `M₂ γ^T / (1 - γ)` with `M₂` the
//! environment's cost bound, and that bound is reported next to every value
//! so truncation error is always visible. Stochastic evaluation averages a
//! fixed number of sample paths whose noise streams are keyed by path index
//! (common random numbers), so results are bitwise reproducible and
//! comparable across parameter perturbations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvModel, State};
use crate::error::{Error, Result};
use crate::policies::{mean_action, sample_action, ParamVector, PolicySpec};
use crate::rng::{hash_f64_slice, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Deterministic,
    Stochastic { n_paths: usize },
}

/// Default number of sample paths averaged in stochastic mode.
pub const DEFAULT_N_PATHS: usize = 16;
/// Default truncation horizon.
pub const DEFAULT_HORIZON: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub gamma: f64,
    pub horizon: usize,
    pub s0: State,
    pub mode: EvalMode,
    pub master_seed: u64,
    /// When true, noise streams depend only on `(master_seed, path index)` so
    /// different θ see identical noise. When false, a digest of θ is mixed in
    /// (still deterministic — no ambient entropy anywhere).
    pub common_random_numbers: bool,
}

impl RolloutConfig {
    pub fn deterministic(gamma: f64, horizon: usize, s0: State) -> RolloutConfig {
        RolloutConfig {
            gamma,
            horizon,
            s0,
            mode: EvalMode::Deterministic,
            master_seed: 0,
            common_random_numbers: true,
        }
    }

    pub fn stochastic(
        gamma: f64,
        horizon: usize,
        s0: State,
        n_paths: usize,
        master_seed: u64,
    ) -> RolloutConfig {
        RolloutConfig {
            gamma,
            horizon,
            s0,
            mode: EvalMode::Stochastic { n_paths },
            master_seed,
            common_random_numbers: true,
        }
    }

    pub fn validate(&self, env: &EnvModel, spec: &PolicySpec) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if let EvalMode::Stochastic { n_paths } = self.mode {
            if n_paths == 0 {
                return Err(Error::InvalidConfig("n_paths must be >= 1".into()));
            }
        }
        if self.s0.dim() != env.state_dim {
            return Err(Error::InvalidConfig(format!(
                "s0 has dim {}, environment expects {}",
                self.s0.dim(),
                env.state_dim
            )));
        }
        spec.validate()?;
        if spec.state_dim != env.state_dim || spec.action_dim != env.action_dim {
            return Err(Error::InvalidConfig(format!(
                "policy dims ({}, {}) do not match environment dims ({}, {})",
                spec.state_dim, spec.action_dim, env.state_dim, env.action_dim
            )));
        }
        Ok(())
    }
}

/// A rolled-out trajectory: `horizon + 1` states, `horizon` actions and
/// costs, and per-step scores when the policy provided them.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub actions: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub scores: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut w = 1.0;
        for c in &self.costs {
            total += w * c;
            w *= gamma;
        }
        total
    }
}

fn path_rng(
    cfg: &RolloutConfig,
    theta: &ParamVector,
    path_seed: u64,
) -> rand_chacha::ChaCha8Rng {
    let master = if cfg.common_random_numbers {
        cfg.master_seed
    } else {
        cfg.master_seed ^ hash_f64_slice(&theta.values)
    };
    substream(master, "path", path_seed)
}

/// Roll one trajectory. Deterministic mode ignores `path_seed` and plays the
/// mean action; stochastic mode samples from the policy with the noise
/// stream `(master_seed, path_seed)`.
pub fn rollout(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    cfg: &RolloutConfig,
    path_seed: u64,
) -> Result<Trajectory> {
    cfg.validate(env, spec)?;
    let stochastic = matches!(cfg.mode, EvalMode::Stochastic { .. });
    let mut rng = path_rng(cfg, theta, path_seed);

    let mut states = Vec::with_capacity(cfg.horizon + 1);
    let mut actions = Vec::with_capacity(cfg.horizon);
    let mut costs = Vec::with_capacity(cfg.horizon);
    let mut scores: Option<Vec<Vec<f64>>> = None;

    let mut s = env.project(&cfg.s0.values);
    states.push(s.clone());
    for _ in 0..cfg.horizon {
        let (a, score) = if stochastic {
            let sample = sample_action(spec, theta, &s, &mut rng)?;
            (sample.action, sample.score)
        } else {
            (mean_action(spec, theta, &s)?, None)
        };
        let a = env.clamp_action(&a);
        let cost = env.cost(&s, &a);
        let next = env.step(&s, &a)?;
        if let Some(sc) = score {
            scores.get_or_insert_with(Vec::new).push(sc);
        }
        actions.push(a);
        costs.push(cost);
        states.push(next.clone());
        s = next;
    }
    Ok(Trajectory { states, actions, costs, scores })
}

/// Discounted return of one path without materializing the trajectory.
fn discounted_return_streaming(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    cfg: &RolloutConfig,
    path_seed: u64,
    stochastic: bool,
) -> Result<f64> {
    let mut rng = path_rng(cfg, theta, path_seed);
    let mut s = env.project(&cfg.s0.values);
    let mut total = 0.0;
    let mut w = 1.0;
    for _ in 0..cfg.horizon {
        let a = if stochastic {
            sample_action(spec, theta, &s, &mut rng)?.action
        } else {
            mean_action(spec, theta, &s)?
        };
        let a = env.clamp_action(&a);
        total += w * env.cost(&s, &a);
        w *= cfg.gamma;
        s = env.step(&s, &a)?;
    }
    Ok(total)
}

/// The truncated objective `J(θ)`: the discounted cost of the mean-action
/// path in deterministic mode, or the average over `n_paths` independent
/// sample paths (reduced in path order) in stochastic mode.
pub fn objective(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    cfg: &RolloutConfig,
) -> Result<f64> {
    cfg.validate(env, spec)?;
    match cfg.mode {
        EvalMode::Deterministic => {
            discounted_return_streaming(env, spec, theta, cfg, 0, false)
        }
        EvalMode::Stochastic { n_paths } => {
            let returns: Vec<Result<f64>> = (0..n_paths as u64)
                .into_par_iter()
                .map(|p| discounted_return_streaming(env, spec, theta, cfg, p, true))
                .collect();
            let mut sum = 0.0;
            for r in returns {
                sum += r?;
            }
            Ok(sum / n_paths as f64)
        }
    }
}

/// Upper bound `M₂ γ^T / (1 - γ)` on the truncation error of the objective.
pub fn tail_bound(env: &EnvModel, gamma: f64, horizon: usize) -> f64 {
    env.max_cost() * gamma.powi(horizon as i32) / (1.0 - gamma)
}

/// Deterministic `horizon`-step value from an arbitrary start state.
pub fn value_from(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    gamma: f64,
    horizon: usize,
) -> Result<f64> {
    let mut state = env.project(&s.values);
    let mut total = 0.0;
    let mut w = 1.0;
    for _ in 0..horizon {
        let a = env.clamp_action(&mean_action(spec, theta, &state)?);
        total += w * env.cost(&state, &a);
        w *= gamma;
        state = env.step(&state, &a)?;
    }
    Ok(total)
}

/// Deterministic Q-value: `c(s, a) + γ · V(f(s, a))` where the continuation
/// runs for `horizon - 1` steps, so `q_value(s, π(s))` equals the
/// `horizon`-step value from `s`. The accumulation below mirrors
/// [`value_from`] operation for operation, which makes that identity hold
/// bitwise when `a` is the policy action.
pub fn q_value(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s: &State,
    a: &[f64],
    cfg: &RolloutConfig,
) -> Result<f64> {
    cfg.validate(env, spec)?;
    let a = env.clamp_action(a);
    let mut state = env.project(&s.values);
    let mut total = env.cost(&state, &a);
    let mut w = 1.0;
    state = env.step(&state, &a)?;
    w *= cfg.gamma;
    for _ in 1..cfg.horizon {
        let act = env.clamp_action(&mean_action(spec, theta, &state)?);
        total += w * env.cost(&state, &act);
        w *= cfg.gamma;
        state = env.step(&state, &act)?;
    }
    Ok(total)
}

/// Residual of the performance-difference identity
/// `V^{θ'}(s0) - V^{θ}(s0) = Σ_t γ^t (Q^{θ}(s'_t, π_{θ'}(s'_t)) - V^{θ}(s'_t))`
/// with every sum truncated at the configured horizon; the summation runs
/// over the θ'-trajectory. Returns `|lhs - rhs|`.
pub fn performance_difference_residual(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    theta_prime: &ParamVector,
    cfg: &RolloutConfig,
) -> Result<f64> {
    cfg.validate(env, spec)?;
    let t = cfg.horizon;
    let gamma = cfg.gamma;
    let s0 = env.project(&cfg.s0.values);

    let lhs = value_from(env, spec, theta_prime, &s0, gamma, t)?
        - value_from(env, spec, theta, &s0, gamma, t)?;

    // θ'-trajectory.
    let det_cfg = RolloutConfig::deterministic(gamma, t, s0.clone());
    let traj = rollout(env, spec, theta_prime, &det_cfg, 0)?;

    let terms: Vec<Result<f64>> = (0..t)
        .into_par_iter()
        .map(|i| {
            let s_t = &traj.states[i];
            let a_prime = env.clamp_action(&mean_action(spec, theta_prime, s_t)?);
            let q = q_value(env, spec, theta, s_t, &a_prime, cfg)?;
            let v = value_from(env, spec, theta, s_t, gamma, t)?;
            Ok(q - v)
        })
        .collect();
    let mut rhs = 0.0;
    let mut w = 1.0;
    for term in terms {
        rhs += w * term?;
        w *= gamma;
    }
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn logistic() -> (EnvModel, PolicySpec) {
        (EnvModel::new(EnvKind::Logistic), PolicySpec::linear_det(1, 1))
    }

    #[test]
    fn sat1d_fixed_point_at_zero() {
        let env = EnvModel::new(EnvKind::Sat1d);
        let spec = PolicySpec::linear_det(1, 1);
        let cfg = RolloutConfig::deterministic(0.9, 10, State::new(vec![0.0]));
        let traj = rollout(&env, &spec, &ParamVector::new(vec![1.5]), &cfg, 0).unwrap();
        assert!(traj.states.iter().all(|s| s.values[0] == 0.0));
        assert!(traj.costs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn logistic_three_steps_by_hand() {
        let (env, spec) = logistic();
        let cfg = RolloutConfig::deterministic(0.9, 3, State::new(vec![0.9]));
        let traj = rollout(&env, &spec, &ParamVector::new(vec![3.5]), &cfg, 0).unwrap();
        // s' = 3.5 s (1 - s), iterated from 0.9.
        let mut s = 0.9;
        let mut expect = vec![s];
        for _ in 0..3 {
            s = 3.5 * s * (1.0 - s);
            expect.push(s);
        }
        for (st, e) in traj.states.iter().zip(&expect) {
            assert_abs_diff_eq!(st.values[0], *e, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(traj.states[1].values[0], 0.315, epsilon = 1e-15);
        assert_abs_diff_eq!(traj.states[2].values[0], 0.7552125, epsilon = 1e-15);
    }

    #[test]
    fn pendulum_zero_net_at_equilibrium_costs_nothing() {
        let env = EnvModel::new(EnvKind::Pendulum);
        let spec = PolicySpec::tanh_net_det(2, 1, 8);
        let theta = ParamVector::new(vec![0.0; spec.param_count()]);
        let cfg = RolloutConfig::deterministic(0.9, 100, State::new(vec![0.0, 0.0]));
        let traj = rollout(&env, &spec, &theta, &cfg, 0).unwrap();
        assert!(traj.costs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn shifted_env_gives_truncated_geometric_series() {
        let env = EnvModel::new(EnvKind::Sat1dShifted);
        let spec = PolicySpec::uniform_shifted(1.0);
        let theta = ParamVector::new(vec![1.5, 0.0]);
        for gamma in [0.5, 0.9, 0.99] {
            let t = 200;
            let cfg = RolloutConfig::stochastic(gamma, t, State::new(vec![0.0]), 4, 7);
            let j = objective(&env, &spec, &theta, &cfg).unwrap();
            let exact = (1.0 - gamma.powi(t as i32)) / (1.0 - gamma);
            assert_abs_diff_eq!(j, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn saturating_map_value_lower_bound() {
        // V(δ) ≥ γ/(1-γ) · δ^(-log γ / log θ) for the saturating map.
        let env = EnvModel::new(EnvKind::Sat1d);
        let spec = PolicySpec::linear_det(1, 1);
        let theta = ParamVector::new(vec![1.5]);
        let (gamma, delta) = (0.8, 1e-3);
        let cfg = RolloutConfig::deterministic(gamma, 1000, State::new(vec![delta]));
        let j = objective(&env, &spec, &theta, &cfg).unwrap();
        let exponent = -gamma.ln() / 1.5f64.ln();
        let bound = gamma / (1.0 - gamma) * delta.powf(exponent);
        assert!(j >= bound, "J = {j} vs bound = {bound}");
    }

    #[test]
    fn truncation_tail_is_bounded_and_monotone() {
        let (env, spec) = logistic();
        let theta = ParamVector::new(vec![3.7]);
        let gamma = 0.99;
        let j1 = objective(
            &env,
            &spec,
            &theta,
            &RolloutConfig::deterministic(gamma, 1000, State::new(vec![0.9])),
        )
        .unwrap();
        let j2 = objective(
            &env,
            &spec,
            &theta,
            &RolloutConfig::deterministic(gamma, 2000, State::new(vec![0.9])),
        )
        .unwrap();
        assert!(j2 >= j1, "partial sums of non-negative terms are monotone");
        assert!((j2 - j1).abs() <= tail_bound(&env, gamma, 1000));
    }

    #[test]
    fn q_of_mean_action_equals_value() {
        let (env, spec) = logistic();
        let theta = ParamVector::new(vec![2.7]);
        let s = State::new(vec![0.4]);
        let cfg = RolloutConfig::deterministic(0.9, 50, s.clone());
        let a = mean_action(&spec, &theta, &s).unwrap();
        let q = q_value(&env, &spec, &theta, &s, &a, &cfg).unwrap();
        let v = value_from(&env, &spec, &theta, &s, 0.9, 50).unwrap();
        assert_abs_diff_eq!(q, v, epsilon = 1e-12);
    }

    #[test]
    fn q_at_fixed_point_is_zero() {
        let env = EnvModel::new(EnvKind::Sat1d);
        let spec = PolicySpec::linear_det(1, 1);
        let cfg = RolloutConfig::deterministic(0.9, 50, State::new(vec![0.0]));
        let q = q_value(
            &env,
            &spec,
            &ParamVector::new(vec![1.5]),
            &State::new(vec![0.0]),
            &[0.0],
            &cfg,
        )
        .unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn q_by_direct_recursion() {
        let (env, spec) = logistic();
        let theta = ParamVector::new(vec![3.5]);
        let cfg = RolloutConfig::deterministic(0.5, 5, State::new(vec![0.9]));
        let s = State::new(vec![0.9]);
        let q = q_value(&env, &spec, &theta, &s, &[3.15], &cfg).unwrap();
        // Independent recursion: five cost terms along the closed loop.
        let mut expect = 0.0;
        let mut state = 0.9f64;
        let mut action = 3.15f64;
        let mut w = 1.0;
        for _ in 0..5 {
            expect += w * (state * state + 0.1 * action * action);
            state = (1.0 - state) * action;
            action = 3.5 * state;
            w *= 0.5;
        }
        assert_abs_diff_eq!(q, expect, epsilon = 1e-12);
    }

    #[test]
    fn performance_difference_residual_is_zero_for_identical_parameters() {
        let (env, spec) = logistic();
        let theta = ParamVector::new(vec![2.0]);
        let cfg = RolloutConfig::deterministic(0.5, 60, State::new(vec![0.9]));
        let r = performance_difference_residual(&env, &spec, &theta, &theta, &cfg).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn performance_difference_residual_within_tail_bound() {
        let (env, spec) = logistic();
        let cfg = RolloutConfig::deterministic(0.5, 60, State::new(vec![0.9]));
        let r = performance_difference_residual(
            &env,
            &spec,
            &ParamVector::new(vec![2.0]),
            &ParamVector::new(vec![2.01]),
            &cfg,
        )
        .unwrap();
        assert!(r <= 1e-6, "residual {r}");

        let env = EnvModel::new(EnvKind::Sat1d);
        let cfg = RolloutConfig::deterministic(0.9, 400, State::new(vec![0.5]));
        let r = performance_difference_residual(
            &env,
            &spec,
            &ParamVector::new(vec![0.5]),
            &ParamVector::new(vec![0.6]),
            &cfg,
        )
        .unwrap();
        assert!(r <= 1e-6, "residual {r}");
    }

    #[test]
    fn stochastic_objective_is_reproducible_and_converges_to_deterministic() {
        let env = EnvModel::new(EnvKind::Pendulum);
        let spec = PolicySpec::tanh_net_gaussian(2, 1, 4);
        let mut rng = crate::rng::substream(11, "test", 0);
        let mut theta = spec.init_theta(&mut rng);
        let s0 = env.default_initial_state();

        let cfg = RolloutConfig::stochastic(0.9, 200, s0.clone(), 8, 42);
        let a = objective(&env, &spec, &theta, &cfg).unwrap();
        let b = objective(&env, &spec, &theta, &cfg).unwrap();
        assert_eq!(a.to_bits(), b.to_bits(), "bitwise reproducible");

        theta.values[spec.sigma_index().unwrap()] = 1e-12f64.ln();
        let stoch = objective(&env, &spec, &theta, &cfg).unwrap();
        let det = objective(
            &env,
            &spec,
            &theta,
            &RolloutConfig::deterministic(0.9, 200, s0),
        )
        .unwrap();
        assert_abs_diff_eq!(stoch, det, epsilon = 1e-8);
    }

    #[test]
    fn objective_is_nonnegative() {
        let mut rng = crate::rng::substream(12, "nonneg", 0);
        for kind in EnvKind::ALL {
            let env = EnvModel::new(kind);
            let spec = match kind {
                EnvKind::Sat1dShifted => PolicySpec::uniform_shifted(1.0),
                EnvKind::Pendulum => PolicySpec::tanh_net_det(2, 1, 4),
                EnvKind::Acrobot => PolicySpec::tanh_net_det(4, 1, 4),
                _ => PolicySpec::linear_det(1, 1),
            };
            let theta = ParamVector::new(
                (0..spec.param_count())
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            );
            let cfg = RolloutConfig::deterministic(0.9, 100, env.default_initial_state());
            let j = objective(&env, &spec, &theta, &cfg).unwrap();
            assert!(j >= 0.0, "{kind:?}: J = {j}");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (env, spec) = logistic();
        let theta = ParamVector::new(vec![1.0]);
        let mut cfg = RolloutConfig::deterministic(0.9, 10, State::new(vec![0.9]));
        cfg.gamma = 1.0;
        assert!(objective(&env, &spec, &theta, &cfg).is_err());
        let cfg = RolloutConfig::deterministic(0.9, 10, State::new(vec![0.9, 0.0]));
        assert!(objective(&env, &spec, &theta, &cfg).is_err());
    }
}
