//! Maximal Lyapunov exponent estimation for the closed-loop system.
//!
//! The estimator is the classic two-trajectory renormalization scheme: evolve
//! the state and a copy displaced by `d0` under the same closed-loop map, and
//! whenever their separation reaches `renorm_threshold` — or every
//! `renorm_interval` steps, whichever comes first — accumulate the log of the
//! stretch factor and pull the perturbed copy back to distance `d0` along the
//! current separation direction. The exponent is the accumulated log-stretch
//! per step after a transient is discarded, maximized over several random
//! initial perturbation directions.
//!
//! The interval-based renormalization matters in both directions: expanding
//! loops would otherwise saturate against the compact state space, and
//! contracting loops would underflow the separation to zero.
//!
//! For stochastic policies the perturbed pair is coupled path-by-path with
//! common action noise, the per-path separations are averaged across paths at
//! each window, and the log-stretch of the norm of that mean is accumulated
//! (the norm of the expectation, not the expectation of norms).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvModel, State};
use crate::error::{Error, Result};
use crate::policies::{mean_action, sample_action, ParamVector, PolicySpec};
use crate::rng::substream;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleConfig {
    /// Initial perturbation norm.
    pub d0: f64,
    /// Separation at which the perturbed trajectory is rescaled back to `d0`.
    pub renorm_threshold: f64,
    /// Separation at which a contracting window is closed early. Keeps the
    /// separation far above the ulp of the states, where differences quantize
    /// and eventually collapse to exactly zero.
    pub renorm_floor: f64,
    /// Maximum number of renormalization-free steps.
    pub renorm_interval: usize,
    /// Total steps per run.
    pub t_max: usize,
    /// Steps discarded before accumulation starts.
    pub transient_skip: usize,
    /// Sample paths for the stochastic variant.
    pub n_paths: usize,
    /// Random perturbation directions tried; the reported exponent is the max.
    pub n_restarts: usize,
    /// Fixed perturbation direction. Overrides the random restarts.
    pub direction: Option<Vec<f64>>,
    pub master_seed: u64,
}

impl Default for MleConfig {
    fn default() -> MleConfig {
        MleConfig {
            d0: 1e-8,
            renorm_threshold: 1e-4,
            renorm_floor: 1e-12,
            renorm_interval: 50,
            t_max: 10_000,
            transient_skip: 100,
            n_paths: 64,
            n_restarts: 8,
            direction: None,
            master_seed: 0,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.d0 < self.renorm_threshold) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < d0 < renorm_threshold, got d0={} threshold={}",
                self.d0, self.renorm_threshold
            )));
        }
        if !(self.renorm_floor > 0.0 && self.renorm_floor < self.d0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < renorm_floor < d0, got floor={} d0={}",
                self.renorm_floor, self.d0
            )));
        }
        if self.t_max <= self.transient_skip {
            return Err(Error::InvalidConfig(format!(
                "t_max ({}) must exceed transient_skip ({})",
                self.t_max, self.transient_skip
            )));
        }
        if self.renorm_interval == 0 || self.n_paths == 0 || self.n_restarts == 0 {
            return Err(Error::InvalidConfig(
                "renorm_interval, n_paths and n_restarts must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Estimated maximal Lyapunov exponent, in nats per step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleEstimate {
    pub lambda: f64,
    /// Accumulated log-stretch per closed renormalization window.
    pub window_logs: Vec<f64>,
    pub n_renorms: usize,
    /// Steps contributing to `lambda` (after the transient).
    pub steps_counted: usize,
    /// True when the separation collapsed to exactly zero (saturating maps,
    /// fixed points) and the run ended early on the windows seen so far.
    pub censored: bool,
}

impl MleEstimate {
    /// The non-smoothness threshold: the landscape is at risk of losing
    /// Lipschitz continuity when `λ > -log γ`.
    pub fn exceeds_discount_threshold(&self, gamma: f64) -> bool {
        self.lambda > -gamma.ln()
    }
}

fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn normalized(direction: &[f64]) -> Result<Vec<f64>> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidConfig("perturbation direction must be nonzero".into()));
    }
    Ok(direction.iter().map(|x| x / norm).collect())
}

/// Window bookkeeping shared by the deterministic and stochastic runs.
struct WindowAccumulator {
    logs: Vec<f64>,
    steps: usize,
    n_renorms: usize,
    win_len: usize,
    censored: bool,
}

impl WindowAccumulator {
    fn new() -> WindowAccumulator {
        WindowAccumulator { logs: Vec::new(), steps: 0, n_renorms: 0, win_len: 0, censored: false }
    }

    fn finish(self, label: &str) -> Result<MleEstimate> {
        if self.steps == 0 {
            if self.censored {
                return Err(Error::ZeroSeparation);
            }
            return Err(Error::InvalidConfig(format!(
                "no full renormalization window inside t_max ({label})"
            )));
        }
        let lambda = self.logs.iter().sum::<f64>() / self.steps as f64;
        Ok(MleEstimate {
            lambda,
            window_logs: self.logs,
            n_renorms: self.n_renorms,
            steps_counted: self.steps,
            censored: self.censored,
        })
    }
}

fn benettin_run(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s0: &State,
    cfg: &MleConfig,
    direction: &[f64],
) -> Result<MleEstimate> {
    let mut s = env.project(&s0.values);
    let delta: Vec<f64> = direction.iter().map(|d| d * cfg.d0).collect();
    let mut sp = env.displace(&s, &delta);
    let mut d_base = env.state_distance(&s, &sp);
    if d_base == 0.0 {
        return Err(Error::ZeroSeparation);
    }

    let mut acc = WindowAccumulator::new();
    for t in 0..cfg.t_max {
        let a = env.clamp_action(&mean_action(spec, theta, &s)?);
        s = env.step(&s, &a)?;
        let ap = env.clamp_action(&mean_action(spec, theta, &sp)?);
        sp = env.step(&sp, &ap)?;
        acc.win_len += 1;

        let d = env.state_distance(&s, &sp);
        if d == 0.0 {
            // Both trajectories collapsed onto the same point (a clamp or a
            // fixed point); there is no direction left to renormalize along.
            acc.censored = true;
            break;
        }
        let window_full = d >= cfg.renorm_threshold
            || d <= cfg.renorm_floor
            || acc.win_len >= cfg.renorm_interval;
        // Close the running window exactly at the transient boundary so the
        // accumulated windows cover t >= transient_skip and nothing else.
        let at_transient_edge = t + 1 == cfg.transient_skip;
        if window_full || at_transient_edge || t + 1 == cfg.t_max {
            if t + 1 > cfg.transient_skip {
                acc.logs.push((d / d_base).ln());
                acc.steps += acc.win_len;
            }
            let diff = env.state_diff(&sp, &s);
            let scale = cfg.d0 / d;
            let scaled: Vec<f64> = diff.iter().map(|x| x * scale).collect();
            sp = env.displace(&s, &scaled);
            d_base = env.state_distance(&s, &sp);
            acc.n_renorms += 1;
            acc.win_len = 0;
            if d_base == 0.0 {
                acc.censored = true;
                break;
            }
        }
    }
    acc.finish("deterministic run")
}

/// Maximal Lyapunov exponent of the deterministic closed loop at `theta`,
/// maximized over restart directions.
pub fn estimate_mle(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s0: &State,
    cfg: &MleConfig,
) -> Result<MleEstimate> {
    cfg.validate()?;
    spec.validate()?;
    let directions = restart_directions(cfg, env.state_dim)?;
    let runs: Vec<Result<MleEstimate>> = directions
        .par_iter()
        .map(|dir| benettin_run(env, spec, theta, s0, cfg, dir))
        .collect();
    pick_best(runs)
}

fn restart_directions(cfg: &MleConfig, dim: usize) -> Result<Vec<Vec<f64>>> {
    match &cfg.direction {
        Some(d) => {
            if d.len() != dim {
                return Err(Error::InvalidConfig(format!(
                    "direction has dim {}, state has dim {}",
                    d.len(),
                    dim
                )));
            }
            Ok(vec![normalized(d)?])
        }
        None => Ok((0..cfg.n_restarts)
            .map(|r| {
                let mut rng = substream(cfg.master_seed, "mle-direction", r as u64);
                random_unit_vector(dim, &mut rng)
            })
            .collect()),
    }
}

fn pick_best(runs: Vec<Result<MleEstimate>>) -> Result<MleEstimate> {
    let mut best: Option<MleEstimate> = None;
    let mut last_err: Option<Error> = None;
    for r in runs {
        match r {
            Ok(est) => {
                if best.as_ref().is_none_or(|b| est.lambda > b.lambda) {
                    best = Some(est);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or(Error::ZeroSeparation))
}

/// One coupled sample-path pair for the stochastic variant.
struct CoupledPath {
    s: State,
    sp: State,
    rng: rand_chacha::ChaCha8Rng,
}

fn stochastic_run(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s0: &State,
    cfg: &MleConfig,
    direction: &[f64],
    restart: usize,
) -> Result<MleEstimate> {
    let base = env.project(&s0.values);
    let delta: Vec<f64> = direction.iter().map(|d| d * cfg.d0).collect();
    let mut paths: Vec<CoupledPath> = (0..cfg.n_paths)
        .map(|p| CoupledPath {
            s: base.clone(),
            sp: env.displace(&base, &delta),
            rng: substream(
                cfg.master_seed,
                "mle-path",
                ((restart as u64) << 32) | p as u64,
            ),
        })
        .collect();

    let mean_sep = |paths: &[CoupledPath]| -> Vec<f64> {
        let mut mean = vec![0.0; env.state_dim];
        for p in paths {
            for (m, d) in mean.iter_mut().zip(env.state_diff(&p.sp, &p.s)) {
                *m += d;
            }
        }
        for m in &mut mean {
            *m /= paths.len() as f64;
        }
        mean
    };

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut d_base = norm(&mean_sep(&paths));
    if d_base == 0.0 {
        return Err(Error::ZeroSeparation);
    }

    let mut acc = WindowAccumulator::new();
    for t in 0..cfg.t_max {
        for path in &mut paths {
            // The pair shares one action-noise draw per step: the coupling
            // that makes the path difference well-defined.
            let mut rng_pair = path.rng.clone();
            let a = sample_action(spec, theta, &path.s, &mut path.rng)?.action;
            let ap = sample_action(spec, theta, &path.sp, &mut rng_pair)?.action;
            path.s = env.step(&path.s, &env.clamp_action(&a))?;
            path.sp = env.step(&path.sp, &env.clamp_action(&ap))?;
        }
        acc.win_len += 1;

        let mean = mean_sep(&paths);
        let d = norm(&mean);
        if d == 0.0 {
            acc.censored = true;
            break;
        }
        let window_full = d >= cfg.renorm_threshold
            || d <= cfg.renorm_floor
            || acc.win_len >= cfg.renorm_interval;
        let at_transient_edge = t + 1 == cfg.transient_skip;
        if window_full || at_transient_edge || t + 1 == cfg.t_max {
            if t + 1 > cfg.transient_skip {
                acc.logs.push((d / d_base).ln());
                acc.steps += acc.win_len;
            }
            // Shrink every path's separation by the common factor; the mean
            // separation returns to norm d0 while per-path structure is kept.
            let scale = cfg.d0 / d;
            for path in &mut paths {
                let diff = env.state_diff(&path.sp, &path.s);
                let scaled: Vec<f64> = diff.iter().map(|x| x * scale).collect();
                path.sp = env.displace(&path.s, &scaled);
            }
            d_base = norm(&mean_sep(&paths));
            acc.n_renorms += 1;
            acc.win_len = 0;
            if d_base == 0.0 {
                acc.censored = true;
                break;
            }
        }
    }
    acc.finish("stochastic run")
}

/// Stochastic-policy variant: couples each sample path with common action
/// noise and tracks the norm of the across-path mean separation.
pub fn estimate_mle_stochastic(
    env: &EnvModel,
    spec: &PolicySpec,
    theta: &ParamVector,
    s0: &State,
    cfg: &MleConfig,
) -> Result<MleEstimate> {
    cfg.validate()?;
    spec.validate()?;
    if !spec.is_stochastic() {
        return Err(Error::InvalidConfig(
            "stochastic MLE needs a stochastic policy kind".into(),
        ));
    }
    let directions = restart_directions(cfg, env.state_dim)?;
    let runs: Vec<Result<MleEstimate>> = directions
        .par_iter()
        .enumerate()
        .map(|(r, dir)| stochastic_run(env, spec, theta, s0, cfg, dir, r))
        .collect();
    pick_best(runs)
}

/// One grid point of an MLE sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MleSweepPoint {
    pub theta: f64,
    pub lambda: Option<f64>,
    pub censored: bool,
    pub error: Option<String>,
}

/// Estimate the exponent along a grid of a one-parameter policy family.
/// Per-point failures are recorded and the sweep continues.
pub fn mle_sweep(
    env: &EnvModel,
    spec: &PolicySpec,
    theta_grid: &[f64],
    s0: &State,
    cfg: &MleConfig,
) -> Result<Vec<MleSweepPoint>> {
    if spec.param_count() != 1 {
        return Err(Error::InvalidConfig(
            "MLE sweep needs a one-parameter policy family".into(),
        ));
    }
    cfg.validate()?;
    Ok(theta_grid
        .par_iter()
        .map(|&th| {
            match estimate_mle(env, spec, &ParamVector::new(vec![th]), s0, cfg) {
                Ok(est) => MleSweepPoint {
                    theta: th,
                    lambda: Some(est.lambda),
                    censored: est.censored,
                    error: None,
                },
                Err(e) => MleSweepPoint {
                    theta: th,
                    lambda: None,
                    censored: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// CSV rendering of a sweep: `theta,lambda,censored`.
pub fn sweep_to_csv(points: &[MleSweepPoint]) -> String {
    let mut out = String::from("theta,lambda,censored\n");
    for p in points {
        let lambda = p.lambda.map_or_else(|| "nan".to_string(), |l| l.to_string());
        out.push_str(&format!("{},{},{}\n", p.theta, lambda, p.censored));
    }
    out
}

/// Independent one-dimensional oracle: the time average of
/// `log |dF/ds| = log |θ(1 - 2s)|` along the logistic closed loop
/// `F(s) = θ s (1 - s)`. Used to cross-check the two-trajectory estimate.
pub fn logistic_derivative_mle(theta: f64, s0: f64, steps: usize, skip: usize) -> f64 {
    let mut s = s0;
    for _ in 0..skip {
        s = theta * s * (1.0 - s);
    }
    let mut total = 0.0;
    for _ in 0..steps {
        total += (theta * (1.0 - 2.0 * s)).abs().ln();
        s = theta * s * (1.0 - s);
    }
    total / steps as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvKind;
    use approx::assert_abs_diff_eq;

    fn sat1d() -> (EnvModel, PolicySpec) {
        (EnvModel::new(EnvKind::Sat1d), PolicySpec::linear_det(1, 1))
    }

    fn logistic() -> (EnvModel, PolicySpec) {
        (EnvModel::new(EnvKind::Logistic), PolicySpec::linear_det(1, 1))
    }

    #[test]
    fn saturating_map_exponent_is_log_theta() {
        let (env, spec) = sat1d();
        let cfg = MleConfig::default();
        for theta in [1.2, 1.5, 2.0] {
            let est = estimate_mle(
                &env,
                &spec,
                &ParamVector::new(vec![theta]),
                &State::new(vec![0.0]),
                &cfg,
            )
            .unwrap();
            assert_abs_diff_eq!(est.lambda, theta.ln(), epsilon = 1e-3);
            assert!(!est.censored);
            assert!(est.n_renorms > 0);
        }
    }

    #[test]
    fn contraction_gives_negative_exponent() {
        let (env, spec) = sat1d();
        let est = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![0.5]),
            &State::new(vec![0.0]),
            &MleConfig { t_max: 2000, ..MleConfig::default() },
        )
        .unwrap();
        assert_abs_diff_eq!(est.lambda, 0.5f64.ln(), epsilon = 1e-3);
    }

    #[test]
    fn logistic_chaos_at_four() {
        let (env, spec) = logistic();
        let cfg = MleConfig { t_max: 100_000, transient_skip: 1000, ..MleConfig::default() };
        let est = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![4.0]),
            &State::new(vec![0.9]),
            &cfg,
        )
        .unwrap();
        assert_abs_diff_eq!(est.lambda, 2.0f64.ln(), epsilon = 0.02);

        let oracle = logistic_derivative_mle(4.0, 0.9, 100_000, 1000);
        assert_abs_diff_eq!(est.lambda, oracle, epsilon = 1e-2);
    }

    #[test]
    fn logistic_stable_regime_is_negative() {
        let (env, spec) = logistic();
        let est = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![2.5]),
            &State::new(vec![0.9]),
            &MleConfig::default(),
        )
        .unwrap();
        // Fixed point s* = 1 - 1/θ, multiplier 2 - θ.
        assert_abs_diff_eq!(est.lambda, 0.5f64.ln(), epsilon = 1e-2);
        assert!(est.lambda < 0.0);
    }

    #[test]
    fn derivative_oracle_agreement_over_theta_range() {
        let (env, spec) = logistic();
        let mut rng = substream(0xA11CE, "oracle-thetas", 0);
        let cfg = MleConfig { t_max: 40_000, transient_skip: 500, ..MleConfig::default() };
        for case in 0..20 {
            let theta: f64 = rng.random_range(0.5..4.0);
            let est = estimate_mle(
                &env,
                &spec,
                &ParamVector::new(vec![theta]),
                &State::new(vec![0.9]),
                &cfg,
            );
            let est = match est {
                Ok(e) => e,
                // Superstable orbits legitimately collapse the separation.
                Err(Error::ZeroSeparation) => continue,
                Err(e) => panic!("case {case}: {e}"),
            };
            if est.censored {
                continue;
            }
            let oracle = logistic_derivative_mle(
                theta,
                0.9,
                cfg.t_max - cfg.transient_skip,
                cfg.transient_skip,
            );
            assert!(
                (est.lambda - oracle).abs() <= 1e-2,
                "case {case} theta={theta}: benettin {} vs oracle {}",
                est.lambda,
                oracle
            );
        }
    }

    #[test]
    fn halving_d0_barely_moves_the_estimate() {
        let (env, spec) = logistic();
        let base = MleConfig { t_max: 50_000, transient_skip: 500, ..MleConfig::default() };
        let halved = MleConfig { d0: 0.5e-8, ..base.clone() };
        for theta in [3.7, 4.0] {
            let a = estimate_mle(
                &env,
                &spec,
                &ParamVector::new(vec![theta]),
                &State::new(vec![0.9]),
                &base,
            )
            .unwrap();
            let b = estimate_mle(
                &env,
                &spec,
                &ParamVector::new(vec![theta]),
                &State::new(vec![0.9]),
                &halved,
            )
            .unwrap();
            assert!(
                (a.lambda - b.lambda).abs() <= 5e-3,
                "theta {theta}: {} vs {}",
                a.lambda,
                b.lambda
            );
        }
    }

    #[test]
    fn restart_maximum_is_monotone_in_restarts() {
        let env = EnvModel::new(EnvKind::Pendulum);
        let spec = PolicySpec::tanh_net_det(2, 1, 4);
        let mut rng = substream(0xBEEF, "restart-theta", 0);
        let theta = spec.init_theta(&mut rng);
        let s0 = env.default_initial_state();
        let mut prev = f64::NEG_INFINITY;
        for n in [1usize, 4, 8] {
            let cfg = MleConfig {
                t_max: 2000,
                n_restarts: n,
                master_seed: 5,
                ..MleConfig::default()
            };
            let est = estimate_mle(&env, &spec, &theta, &s0, &cfg).unwrap();
            assert!(
                est.lambda >= prev - 1e-15,
                "max over {n} restarts decreased: {} < {prev}",
                est.lambda
            );
            prev = est.lambda;
        }
    }

    #[test]
    fn zero_separation_is_flagged_on_saturating_collapse() {
        // θ s0 > 1 on both trajectories: both saturate at 1 after one step.
        let (env, spec) = sat1d();
        let cfg = MleConfig { transient_skip: 0, ..MleConfig::default() };
        let est = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![1.5]),
            &State::new(vec![0.8]),
            &cfg,
        );
        match est {
            Ok(e) => assert!(e.censored, "collapse must be flagged"),
            Err(Error::ZeroSeparation) => {}
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn threshold_criterion_reports_both_sides() {
        let (env, spec) = sat1d();
        let est = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![1.5]),
            &State::new(vec![0.0]),
            &MleConfig::default(),
        )
        .unwrap();
        // log 1.5 ≈ 0.405: above -log 0.9, below -log 0.5.
        assert!(est.exceeds_discount_threshold(0.9));
        assert!(!est.exceeds_discount_threshold(0.5));
    }

    #[test]
    fn stochastic_limit_matches_deterministic() {
        let env = EnvModel::new(EnvKind::Sat1d);
        let spec = PolicySpec::linear_gaussian(1, 1);
        let theta = ParamVector::new(vec![1.5, 1e-10f64.ln()]);
        // The noise pushes the base path off the unstable fixed point and
        // into the clamp after ~55 steps, so accumulation has to start early;
        // the run ends censored when all paths have saturated.
        let cfg = MleConfig {
            n_paths: 16,
            t_max: 200,
            transient_skip: 5,
            ..MleConfig::default()
        };
        let est = estimate_mle_stochastic(&env, &spec, &theta, &State::new(vec![0.0]), &cfg)
            .unwrap();
        assert_abs_diff_eq!(est.lambda, 1.5f64.ln(), epsilon = 1e-2);
    }

    #[test]
    fn uniform_counterexample_exponent_is_log_theta1() {
        let env = EnvModel::new(EnvKind::Sat1dShifted);
        let spec = PolicySpec::uniform_shifted(1.0);
        let theta = ParamVector::new(vec![1.5, 0.0]);
        let cfg = MleConfig { n_paths: 16, t_max: 4000, ..MleConfig::default() };
        let est = estimate_mle_stochastic(&env, &spec, &theta, &State::new(vec![0.0]), &cfg)
            .unwrap();
        assert_abs_diff_eq!(est.lambda, 1.5f64.ln(), epsilon = 1e-2);
    }

    #[test]
    fn noisy_pendulum_at_rest_is_not_expanding() {
        let env = EnvModel::new(EnvKind::Pendulum);
        let spec = PolicySpec::tanh_net_gaussian(2, 1, 4);
        // Zero second layer: u(s) = 0, actions are pure noise.
        let mut theta = ParamVector::new(vec![0.0; spec.param_count()]);
        let idx = spec.sigma_index().unwrap();
        theta.values[idx] = 0.1f64.ln();
        let hanging = State::new(vec![std::f64::consts::PI - 1e-9, 0.0]);
        let cfg = MleConfig { n_paths: 16, t_max: 4000, ..MleConfig::default() };
        let stoch = estimate_mle_stochastic(&env, &spec, &theta, &hanging, &cfg).unwrap();
        // Undamped center: neutrally stable, so the estimate sits at zero up
        // to finite-time wobble. It must not look chaotic.
        assert!(stoch.lambda <= 5e-3, "stochastic λ = {}", stoch.lambda);
        let det = estimate_mle(&env, &spec, &theta, &hanging, &cfg).unwrap();
        assert!(det.lambda <= 5e-3, "deterministic λ = {}", det.lambda);
        assert!((stoch.lambda - det.lambda).abs() <= 2e-2);
    }

    #[test]
    fn sweep_degenerate_grid_matches_single_estimate() {
        let (env, spec) = sat1d();
        let cfg = MleConfig::default();
        let pts = mle_sweep(&env, &spec, &[1.5], &State::new(vec![0.0]), &cfg).unwrap();
        assert_eq!(pts.len(), 1);
        let single = estimate_mle(
            &env,
            &spec,
            &ParamVector::new(vec![1.5]),
            &State::new(vec![0.0]),
            &cfg,
        )
        .unwrap();
        assert_eq!(pts[0].lambda.unwrap().to_bits(), single.lambda.to_bits());
    }

    #[test]
    fn sweep_distinguishes_stable_and_chaotic_logistic_regimes() {
        let (env, spec) = logistic();
        let cfg = MleConfig { t_max: 20_000, transient_skip: 500, ..MleConfig::default() };
        let pts = mle_sweep(
            &env,
            &spec,
            &[2.0, 3.3, 3.5, 3.678, 3.9],
            &State::new(vec![0.9]),
            &cfg,
        )
        .unwrap();
        let lambda = |i: usize| pts[i].lambda.expect("estimate");
        // θ = 2.0: superstable fixed point — either censored (separation hits
        // exactly zero) or strongly negative.
        assert!(pts[0].censored || pts[0].error.is_some() || lambda(0) < -1.0, "{:?}", pts[0]);
        // θ = 3.3 (period-2) and θ = 3.5 (period-4): stable cycles, λ < 0.
        assert!(lambda(1) < 0.0, "λ(3.3) = {}", lambda(1));
        assert!(lambda(2) < 0.0, "λ(3.5) = {}", lambda(2));
        // θ = 3.678 and θ = 3.9: chaotic, λ > 0.
        assert!(lambda(3) > 0.0, "λ(3.678) = {}", lambda(3));
        assert!(lambda(4) > 0.0, "λ(3.9) = {}", lambda(4));
    }

    #[test]
    fn rejects_bad_configs() {
        let (env, spec) = sat1d();
        let theta = ParamVector::new(vec![1.5]);
        let s0 = State::new(vec![0.0]);
        let cfg = MleConfig { d0: 1e-3, renorm_threshold: 1e-4, ..MleConfig::default() };
        assert!(estimate_mle(&env, &spec, &theta, &s0, &cfg).is_err());
        let cfg = MleConfig { direction: Some(vec![0.0]), ..MleConfig::default() };
        assert!(estimate_mle(&env, &spec, &theta, &s0, &cfg).is_err());
        let cfg = MleConfig::default();
        assert!(mle_sweep(&env, &PolicySpec::linear_gaussian(1, 1), &[1.0], &s0, &cfg).is_err());
    }
}
