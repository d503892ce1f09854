//! Monte Carlo policy-gradient estimation.
//!
//! Likelihood-ratio estimator over full episodes: the gradient direction is
//! the average over episodes of `Σ_t γ^t ∇log π(a_t|s_t) Â_t`, where the
//! advantage `Â_t` is the discounted reward-to-go minus a cross-episode
//! per-timestep mean baseline. No critic is trained and no gradient flows
//! through the dynamics; this exists to produce scan directions for the
//! landscape experiments, not to train policies.
//!
//! Episodes are rolled twice with identical noise streams: once to collect
//! returns for the baseline, once to accumulate score-weighted advantages.
//! That keeps memory at O(horizon) per worker instead of storing every
//! score vector, and the fixed episode-order reduction keeps the estimate
//! bitwise independent of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvModel, State};
use crate::error::{Error, Result};
use crate::policies::{ParamVector, PolicySpec};
use crate::rollout::{rollout, EvalMode, RolloutConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Per-timestep mean of reward-to-go across episodes.
    MeanReturn,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradConfig {
    pub n_episodes: usize,
    pub gamma: f64,
    pub horizon: usize,
    pub baseline: Baseline,
    pub master_seed: u64,
    /// Weight the score term by γ^t (the discounted state distribution).
    /// Disable to drop that weighting.
    pub discounted_visitation: bool,
    /// Multiplies every cost before advantage estimation. The estimator is
    /// linear in costs, and this hook makes that covariance directly
    /// checkable; leave at 1.0 otherwise.
    pub cost_scale: f64,
}

impl GradConfig {
    pub fn new(n_episodes: usize, gamma: f64, horizon: usize, master_seed: u64) -> GradConfig {
        GradConfig {
            n_episodes,
            gamma,
            horizon,
            baseline: Baseline::MeanReturn,
            master_seed,
            discounted_visitation: true,
            cost_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_episodes == 0 {
            return Err(Error::InvalidConfig("need at least one episode".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1)".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if !(self.cost_scale.is_finite()) {
            return Err(Error::InvalidConfig("cost scale must be finite".into()));
        }
        Ok(())
    }
}

/// Default episode count.
pub const DEFAULT_EPISODES: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct GradEstimate {
    /// Estimated gradient of the discounted cost; descend along `-eta`.
    pub eta: Vec<f64>,
    pub norm: f64,
    pub n_episodes: usize,
}

/// Per-timestep baseline from a set of episode reward-to-go curves.
/// `MeanReturn` averages across episodes at each timestep; `None` is zero.
pub fn baseline_value(returns_to_go: &[Vec<f64>], baseline: Baseline) -> Vec<f64> {
    let horizon = returns_to_go.first().map_or(0, Vec::len);
    match baseline {
        Baseline::None => vec![0.0; horizon],
        Baseline::MeanReturn => {
            let mut mean = vec![0.0; horizon];
            for episode in returns_to_go {
                for (m, g) in mean.iter_mut().zip(episode) {
                    *m += g;
                }
            }
            let n = returns_to_go.len() as f64;
            for m in &mut mean {
                *m /= n;
            }
            mean
        }
    }
}

fn rollout_config(cfg: &GradConfig, s0: &State) -> RolloutConfig {
    RolloutConfig {
        gamma: cfg.gamma,
        horizon: cfg.horizon,
        s0: s0.clone(),
        mode: EvalMode::Stochastic { n_paths: 1 },
        master_seed: cfg.master_seed,
        common_random_numbers: true,
    }
}

fn returns_to_go(costs: &[f64], gamma: f64, scale: f64) -> Vec<f64> {
    let mut g = vec![0.0; costs.len()];
    let mut acc = 0.0;
    for (i, &c) in costs.iter().enumerate().rev() {
        acc = scale * c + gamma * acc;
        g[i] = acc;
    }
    g
}

/// Estimate the policy gradient at `theta0` from `s0`. Gaussian kinds with
/// σ > 0 only. Episode `e` draws its action noise from the substream
/// `(master_seed, "path", e)`, so the estimate is bitwise reproducible.
pub fn estimate_gradient(
    env: &EnvModel,
    spec: &PolicySpec,
    theta0: &ParamVector,
    s0: &State,
    cfg: &GradConfig,
) -> Result<GradEstimate> {
    cfg.validate()?;
    if !spec.is_gaussian() {
        return Err(Error::InvalidConfig(
            "the score-function estimator needs a Gaussian policy".into(),
        ));
    }
    match spec.sigma(theta0) {
        Some(sigma) if sigma > 0.0 => {}
        _ => {
            return Err(Error::DegenerateDensity(
                "policy gradient at sigma = 0".into(),
            ))
        }
    }
    let rc = rollout_config(cfg, s0);
    rc.validate(env, spec)?;

    // Pass 1: returns-to-go per episode, for the baseline.
    let all_returns: Vec<Vec<f64>> = (0..cfg.n_episodes as u64)
        .into_par_iter()
        .map(|e| {
            let traj = rollout(env, spec, theta0, &rc, e)?;
            Ok(returns_to_go(&traj.costs, cfg.gamma, cfg.cost_scale))
        })
        .collect::<Result<_>>()?;
    let baseline = baseline_value(&all_returns, cfg.baseline);

    // Pass 2: replay the identical episodes, accumulate score * advantage.
    let p = spec.param_count();
    let contributions: Vec<Vec<f64>> = (0..cfg.n_episodes as u64)
        .into_par_iter()
        .map(|e| {
            let traj = rollout(env, spec, theta0, &rc, e)?;
            let scores = traj.scores.as_ref().ok_or_else(|| {
                Error::DegenerateDensity("episode produced no scores".into())
            })?;
            let g = &all_returns[e as usize];
            let mut acc = vec![0.0; p];
            let mut w = 1.0;
            for t in 0..traj.costs.len() {
                let adv = g[t] - baseline[t];
                let weight = if cfg.discounted_visitation { w } else { 1.0 };
                for (a, s) in acc.iter_mut().zip(&scores[t]) {
                    *a += weight * s * adv;
                }
                w *= cfg.gamma;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut eta = vec![0.0; p];
    for c in &contributions {
        for (e, v) in eta.iter_mut().zip(c) {
            *e += v;
        }
    }
    for e in &mut eta {
        *e /= cfg.n_episodes as f64;
    }
    let norm = eta.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(GradEstimate { eta, norm, n_episodes: cfg.n_episodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;
    use crate::rng::substream;

    #[test]
    fn baseline_single_episode_zeroes_advantages() {
        let g = vec![vec![3.0, 2.0, 1.0]];
        let b = baseline_value(&g, Baseline::MeanReturn);
        assert_eq!(b, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn baseline_identical_episodes_zeroes_advantages() {
        let g = vec![vec![3.0, 2.0], vec![3.0, 2.0], vec![3.0, 2.0]];
        let b = baseline_value(&g, Baseline::MeanReturn);
        assert_eq!(b, vec![3.0, 2.0]);
    }

    #[test]
    fn baseline_symmetric_returns_cancel() {
        let g = vec![vec![5.0], vec![-5.0]];
        let b = baseline_value(&g, Baseline::MeanReturn);
        assert_eq!(b, vec![0.0]);
        assert_eq!(baseline_value(&g, Baseline::None), vec![0.0]);
    }

    #[test]
    fn single_episode_mean_baseline_gives_zero_gradient() {
        let env = EnvModel::new(EnvKind::Logistic);
        let spec = PolicySpec::linear_gaussian(1, 1);
        let theta = ParamVector::new(vec![1.0, 0.0]);
        let cfg = GradConfig::new(1, 0.9, 20, 3);
        let est = estimate_gradient(&env, &spec, &theta, &State::new(vec![1.0]), &cfg).unwrap();
        assert!(est.eta.iter().all(|&x| x == 0.0), "{:?}", est.eta);
        assert_eq!(est.norm, 0.0);
    }

    #[test]
    fn one_step_gaussian_quadratic_matches_closed_form() {
        // Logistic cost at s0 = 1 with T = 1: J(μ) = 1 + 0.1 E[(μ + z)²],
        // so dJ/dμ = 0.2 μ = 0.2 at μ = 1.
        let env = EnvModel::new(EnvKind::Logistic);
        let spec = PolicySpec::linear_gaussian(1, 1);
        let theta = ParamVector::new(vec![1.0, 0.0]); // mean weight 1, sigma 1
        let mut estimates = Vec::new();
        for seed in 0..20u64 {
            let cfg = GradConfig {
                baseline: Baseline::None,
                ..GradConfig::new(500, 0.9, 1, seed)
            };
            let est =
                estimate_gradient(&env, &spec, &theta, &State::new(vec![1.0]), &cfg).unwrap();
            estimates.push(est.eta[0]);
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - 0.2).abs() <= 3.0 * se,
            "mean {mean} vs 0.2, se {se}"
        );
    }

    #[test]
    fn reproducible_and_exactly_scale_covariant() {
        let env = EnvModel::new(EnvKind::Pendulum);
        let spec = PolicySpec::tanh_net_gaussian(2, 1, 4);
        let mut rng = substream(7, "theta0", 0);
        let theta = spec.init_theta(&mut rng);
        let s0 = env.default_initial_state();
        let cfg = GradConfig::new(16, 0.9, 50, 11);

        let a = estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap();
        let b = estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap();
        for (x, y) in a.eta.iter().zip(&b.eta) {
            assert_eq!(x.to_bits(), y.to_bits());
        }

        // Doubling every cost doubles the estimate bit-for-bit.
        let scaled_cfg = GradConfig { cost_scale: 2.0, ..cfg.clone() };
        let c = estimate_gradient(&env, &spec, &theta, &s0, &scaled_cfg).unwrap();
        for (x, y) in a.eta.iter().zip(&c.eta) {
            assert_eq!((2.0 * x).to_bits(), y.to_bits());
        }

        // Non-dyadic scales hold to rounding error.
        let scaled_cfg = GradConfig { cost_scale: 3.0, ..cfg.clone() };
        let d = estimate_gradient(&env, &spec, &theta, &s0, &scaled_cfg).unwrap();
        for (x, y) in a.eta.iter().zip(&d.eta) {
            let err = (3.0 * x - y).abs();
            assert!(err <= 1e-9 * (1.0 + y.abs()), "3*{x} vs {y}");
        }
    }

    #[test]
    fn baseline_is_unbiased_across_seeds() {
        let env = EnvModel::new(EnvKind::Logistic);
        let spec = PolicySpec::linear_gaussian(1, 1);
        let theta = ParamVector::new(vec![1.2, -1.0]);
        let s0 = State::new(vec![0.9]);
        let mut with: Vec<f64> = Vec::new();
        let mut without: Vec<f64> = Vec::new();
        for seed in 0..20u64 {
            let cfg = GradConfig::new(128, 0.9, 10, seed);
            with.push(estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap().eta[0]);
            let cfg = GradConfig { baseline: Baseline::None, ..cfg };
            without.push(estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap().eta[0]);
        }
        let stats = |v: &[f64]| {
            let n = v.len() as f64;
            let m = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
            (m, var / n)
        };
        let (m1, v1) = stats(&with);
        let (m2, v2) = stats(&without);
        let pooled_se = (v1 + v2).sqrt();
        assert!(
            (m1 - m2).abs() <= 3.0 * pooled_se,
            "baseline shifted the mean: {m1} vs {m2} (se {pooled_se})"
        );
        // The baseline exists to cut variance.
        assert!(v1 < v2, "baseline did not reduce variance: {v1} vs {v2}");
    }

    #[test]
    fn visitation_flag_changes_the_estimate() {
        let env = EnvModel::new(EnvKind::Logistic);
        let spec = PolicySpec::linear_gaussian(1, 1);
        let theta = ParamVector::new(vec![1.2, -1.0]);
        let s0 = State::new(vec![0.9]);
        let cfg = GradConfig::new(32, 0.5, 20, 5);
        let a = estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap();
        let cfg = GradConfig { discounted_visitation: false, ..cfg };
        let b = estimate_gradient(&env, &spec, &theta, &s0, &cfg).unwrap();
        assert_ne!(a.eta[0].to_bits(), b.eta[0].to_bits());
    }

    #[test]
    fn rejects_deterministic_and_degenerate_policies() {
        let env = EnvModel::new(EnvKind::Logistic);
        let s0 = State::new(vec![0.9]);
        let cfg = GradConfig::new(4, 0.9, 5, 0);
        let det = PolicySpec::linear_det(1, 1);
        assert!(estimate_gradient(&env, &det, &ParamVector::new(vec![1.0]), &s0, &cfg).is_err());
        let gauss = PolicySpec::linear_gaussian(1, 1);
        let frozen = ParamVector::new(vec![1.0, f64::NEG_INFINITY]);
        assert!(matches!(
            estimate_gradient(&env, &gauss, &frozen, &s0, &cfg),
            Err(Error::DegenerateDensity(_))
        ));
    }
}
