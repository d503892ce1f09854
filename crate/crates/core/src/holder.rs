//! Hölder-exponent estimation by variance scaling.
//!
//! If `J` is α-Hölder around `θ0`, the variance of `J(θ0 + σ z)` over
//! isotropic Gaussian perturbations scales like `σ^{2α}` for small σ, so
//! `log Var` against `log σ` is close to a line of slope `k = 2α`. A slope
//! near 2 means the objective is locally Lipschitz (smooth); a slope clearly
//! below 2 means the largest provable Hölder exponent is below 1 and no
//! gradient needs to exist. The estimator here samples a ladder of σ values,
//! fits the line by least squares, and classifies the result.
//!
//! The module also carries the validation oracles used to calibrate the
//! estimator: the Weierstrass function (known Hölder exponent
//! `log(1/a)/log b` and graph dimension `2 + log_b a`) and a box-counting
//! dimension estimator for sampled curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;
use rand_distr::StandardNormal;

use rand::Rng;

/// Objective evaluator used by the sampling estimator. Must be pure: the
/// same θ must always map to the same value.
pub type Evaluator<'a> = dyn Fn(&[f64]) -> Result<f64> + Sync + 'a;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderConfig {
    /// Strictly increasing perturbation scales; at least four.
    pub sigma_grid: Vec<f64>,
    /// Samples per scale.
    pub n_samples: usize,
    pub master_seed: u64,
    /// Whether the log σ coordinate of a Gaussian policy is perturbed too.
    /// Off by default: the landscape protocol evaluates J deterministically,
    /// so that coordinate is dead weight in the regression.
    pub scan_sigma: bool,
}

impl Default for HolderConfig {
    fn default() -> HolderConfig {
        HolderConfig {
            sigma_grid: log_spaced(1e-5, 1e-2, 12),
            n_samples: 200,
            master_seed: 0,
            scan_sigma: false,
        }
    }
}

/// `n` logarithmically spaced points over `[lo, hi]`, inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl HolderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_grid.len() < 4 {
            return Err(Error::InvalidConfig(
                "sigma grid needs at least 4 points".into(),
            ));
        }
        if !self.sigma_grid.windows(2).all(|w| w[0] < w[1]) || self.sigma_grid[0] <= 0.0 {
            return Err(Error::InvalidConfig(
                "sigma grid must be positive and strictly increasing".into(),
            ));
        }
        if self.n_samples < 30 {
            return Err(Error::InvalidConfig(
                "need at least 30 samples per sigma".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothnessClass {
    Smooth,
    Fractal,
    Inconclusive,
}

/// Log-log regression of variance against perturbation scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Estimated Hölder exponent, `slope / 2`.
    pub alpha: f64,
    pub class: SmoothnessClass,
    /// All `(σ, sample variance)` pairs, including any dropped as degenerate.
    pub pairs: Vec<(f64, f64)>,
    /// Number of zero-variance pairs excluded from the regression.
    pub dropped: usize,
}

/// Slope thresholds for the classification. The regression is refused
/// outright when the line fits poorly.
pub const SMOOTH_SLOPE_MIN: f64 = 1.8;
pub const FRACTAL_SLOPE_MAX: f64 = 1.5;
pub const MIN_R_SQUARED: f64 = 0.9;

/// Ordinary least squares of `ys` on `xs`: returns (slope, intercept, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    (slope, intercept, r2)
}

/// Unbiased sample variance of `J(θ0 + σ z)` over `n` isotropic standard
/// normal draws. `perturb_mask`, when given, restricts the perturbation to
/// the marked coordinates. Draw `j` uses substream
/// `(master_seed, "holder-sample", (sigma_index << 32) | j)`, so samples are
/// independent across the grid and identical regardless of thread count.
pub fn variance_at_sigma(
    eval: &Evaluator,
    theta0: &[f64],
    sigma: f64,
    n: usize,
    master_seed: u64,
    sigma_index: usize,
    perturb_mask: Option<&[bool]>,
) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::InvalidConfig("sigma must be positive".into()));
    }
    if n < 2 {
        return Err(Error::InvalidConfig("variance needs n >= 2".into()));
    }
    if let Some(mask) = perturb_mask {
        if mask.len() != theta0.len() {
            return Err(Error::InvalidConfig("perturbation mask length mismatch".into()));
        }
    }
    let values =
        sample_objective_values(eval, theta0, sigma, n, master_seed, sigma_index, perturb_mask)?;
    Ok(sample_variance(&values))
}

fn sample_objective_values(
    eval: &Evaluator,
    theta0: &[f64],
    sigma: f64,
    n: usize,
    master_seed: u64,
    sigma_index: usize,
    perturb_mask: Option<&[bool]>,
) -> Result<Vec<f64>> {
    (0..n as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng =
                substream(master_seed, "holder-sample", ((sigma_index as u64) << 32) | j);
            let theta: Vec<f64> = theta0
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let active = perturb_mask.is_none_or(|m| m[i]);
                    // Consume one draw per coordinate either way so the
                    // stream stays aligned across masks.
                    let z: f64 = rng.sample(StandardNormal);
                    if active {
                        v + sigma * z
                    } else {
                        v
                    }
                })
                .collect();
            eval(&theta)
        })
        .collect()
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Per-σ variances plus the range of every objective value seen. The range
/// feeds the truncation-noise guard in the landscape pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceProfile {
    pub pairs: Vec<(f64, f64)>,
    pub j_min: f64,
    pub j_max: f64,
}

/// Sample the full σ ladder.
pub fn variance_profile(
    eval: &Evaluator,
    theta0: &[f64],
    cfg: &HolderConfig,
    perturb_mask: Option<&[bool]>,
) -> Result<VarianceProfile> {
    cfg.validate()?;
    let mut pairs = Vec::with_capacity(cfg.sigma_grid.len());
    let mut j_min = f64::INFINITY;
    let mut j_max = f64::NEG_INFINITY;
    for (i, &sigma) in cfg.sigma_grid.iter().enumerate() {
        let values = sample_objective_values(
            eval,
            theta0,
            sigma,
            cfg.n_samples,
            cfg.master_seed,
            i,
            perturb_mask,
        )?;
        for &v in &values {
            j_min = j_min.min(v);
            j_max = j_max.max(v);
        }
        pairs.push((sigma, sample_variance(&values)));
    }
    Ok(VarianceProfile { pairs, j_min, j_max })
}

/// Least-squares fit of `log Var` on `log σ` with classification. Pairs with
/// zero variance carry no information about the scaling law and are dropped.
pub fn fit_holder(pairs: &[(f64, f64)]) -> Result<HolderFit> {
    let usable: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(_, v)| v > 0.0).collect();
    let dropped = pairs.len() - usable.len();
    if usable.is_empty() && !pairs.is_empty() {
        return Err(Error::DegenerateVariance(pairs[0].0));
    }
    if usable.len() < 4 {
        return Err(Error::InsufficientPoints(format!(
            "{} non-degenerate variance pairs (need 4)",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|&(s, _)| s.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    let class = if r_squared < MIN_R_SQUARED {
        SmoothnessClass::Inconclusive
    } else if slope >= SMOOTH_SLOPE_MIN {
        SmoothnessClass::Smooth
    } else if slope <= FRACTAL_SLOPE_MAX {
        SmoothnessClass::Fractal
    } else {
        SmoothnessClass::Inconclusive
    };
    Ok(HolderFit {
        slope,
        intercept,
        r_squared,
        alpha: slope / 2.0,
        class,
        pairs: pairs.to_vec(),
        dropped,
    })
}

/// Sample the σ ladder and fit in one call.
pub fn estimate_holder(
    eval: &Evaluator,
    theta0: &[f64],
    cfg: &HolderConfig,
    perturb_mask: Option<&[bool]>,
) -> Result<HolderFit> {
    let profile = variance_profile(eval, theta0, cfg, perturb_mask)?;
    fit_holder(&profile.pairs)
}

/// CSV rendering of the variance pairs: `sigma,variance`.
pub fn pairs_to_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("sigma,variance\n");
    for (s, v) in pairs {
        out.push_str(&format!("{s},{v}\n"));
    }
    out
}

/// Truncated Weierstrass series `Σ aⁿ cos(bⁿ π x)`. The truncation error is
/// at most `a^n_terms / (1 - a)`; 60 terms put it below 1e-13 for a = 0.6.
pub fn weierstrass(x: f64, a: f64, b: f64, n_terms: usize) -> f64 {
    assert!(a > 0.0 && a < 1.0 && b >= 1.0);
    let mut total = 0.0;
    let mut amp = 1.0;
    let mut freq = std::f64::consts::PI;
    for _ in 0..n_terms {
        total += amp * (freq * x).cos();
        amp *= a;
        freq *= b;
    }
    total
}

/// Default term count for the Weierstrass oracle at `a = 0.6`.
pub const WEIERSTRASS_TERMS: usize = 60;

/// A sampled curve with strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct CurveSample {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl CurveSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<CurveSample> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidConfig(
                "curve needs equal-length xs/ys with at least 2 points".into(),
            ));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig("curve xs must be strictly increasing".into()));
        }
        Ok(CurveSample { xs, ys })
    }
}

/// Box-counting estimate of the dimension of a curve's graph.
///
/// For each dyadic box size `ε = span_x / 2^k`, the x-axis is cut into
/// columns of width ε and the graph occupies every ε-box between the column's
/// minimum and maximum y (the curve is continuous, so by the intermediate
/// value theorem this count is exact once the samples resolve the column).
/// The dimension is the least-squares slope of `log N(ε)` against
/// `log(1/ε)` over the middle half of the ladder, where both the too-coarse
/// and the under-sampled extremes are excluded.
pub fn box_count_dimension(curve: &CurveSample) -> Result<f64> {
    let n = curve.xs.len();
    if n < 1000 {
        return Err(Error::InsufficientPoints(format!(
            "box counting needs at least 1000 points, got {n}"
        )));
    }
    let span_x = curve.xs[n - 1] - curve.xs[0];
    let x0 = curve.xs[0];
    // Deepest level keeps ≥ 8 samples per column on average, capped so the
    // ladder stays in a regime where f64 column indices are exact.
    let k_max = ((n as f64 / 8.0).log2().floor() as usize).min(16);
    let levels: Vec<usize> = (0..=k_max).collect();
    let mut log_inv_eps = Vec::with_capacity(levels.len());
    let mut log_count = Vec::with_capacity(levels.len());
    for &k in &levels {
        let cols = 1usize << k;
        let eps = span_x / cols as f64;
        let mut col_min = vec![f64::INFINITY; cols];
        let mut col_max = vec![f64::NEG_INFINITY; cols];
        let mut prev_col = 0usize;
        for (i, (&x, &y)) in curve.xs.iter().zip(&curve.ys).enumerate() {
            let col = (((x - x0) / eps) as usize).min(cols - 1);
            col_min[col] = col_min[col].min(y);
            col_max[col] = col_max[col].max(y);
            // Attribute the connecting segment to the columns it crosses so
            // sparse sampling does not split the graph.
            if i > 0 && col > prev_col {
                let y_prev = curve.ys[i - 1];
                for c in prev_col..=col {
                    col_min[c] = col_min[c].min(y.min(y_prev));
                    col_max[c] = col_max[c].max(y.max(y_prev));
                }
            }
            prev_col = col;
        }
        let mut boxes = 0u64;
        for c in 0..cols {
            if col_min[c].is_finite() {
                let lo = (col_min[c] / eps).floor();
                let hi = (col_max[c] / eps).floor();
                boxes += (hi - lo) as u64 + 1;
            }
        }
        log_inv_eps.push(-(eps.ln()));
        log_count.push((boxes as f64).ln());
    }
    // Middle half of the ladder.
    let l = levels.len();
    let (start, end) = (l / 4, l - l / 4);
    if end - start < 2 {
        return Err(Error::InsufficientPoints("box ladder too short".into()));
    }
    let (slope, _, _) = linear_fit(&log_inv_eps[start..end], &log_count[start..end]);
    Ok(slope)
}
