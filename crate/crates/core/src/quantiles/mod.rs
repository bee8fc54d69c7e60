//! Estimates of the null-LLR quantile surface `x ↦ Q_x(1−γ)` over the
//! Berger–Boos set: Monte Carlo percentiles, boosted quantile regression on
//! single draws, the empirical maximum and the rolling maximum in `μ`.

pub mod gbt;

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearGaussianProblem;
use crate::optim::LlrEvaluator;
use crate::stats::derive_seed;

pub use gbt::{default_grid, GbtParams};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub x: DVector<f64>,
    pub mu: f64,
    pub llr_draw: Option<f64>,
    pub q_hat: Option<f64>,
}

/// `λ(hᵀx, Kx + ε)` for a given noise vector.
pub fn null_llr_with_noise(problem: &LinearGaussianProblem, x: &DVector<f64>, eps: &DVector<f64>) -> Result<f64> {
    let y = problem.noiseless(x) + eps;
    let ev = LlrEvaluator::new(problem, &y)?;
    Ok(ev.eval(problem.phi(x))?.value)
}

/// One draw of the null LLR at `x` with fresh standard normal noise.
pub fn sample_null_llr<R: Rng + ?Sized>(problem: &LinearGaussianProblem, x: &DVector<f64>, rng: &mut R) -> Result<f64> {
    let eps = DVector::from_fn(problem.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
    null_llr_with_noise(problem, x, &eps)
}

/// 1-based index `{(1−γ)N}` (nearest integer, halves rounded up), clamped to `[1, N]`.
pub fn order_index(gamma: f64, n: usize) -> usize {
    let k = ((1.0 - gamma) * n as f64 + 0.5).floor() as usize;
    k.clamp(1, n)
}

/// The `{(1−γ)N}`-th order statistic of `draws`.
pub fn empirical_quantile(draws: &[f64], gamma: f64) -> f64 {
    assert!(!draws.is_empty());
    let mut v = draws.to_vec();
    let k = order_index(gamma, v.len()) - 1;
    let (_, q, _) = v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *q
}

/// Monte Carlo `(1−γ)`-quantile of the null LLR at `x` from `n` draws.
pub fn mc_quantile<R: Rng + ?Sized>(problem: &LinearGaussianProblem, x: &DVector<f64>, gamma: f64, n: usize, rng: &mut R) -> Result<f64> {
    if n < 50 {
        return Err(Error::InvalidArgument(format!("mc_quantile needs N >= 50, got {n}")));
    }
    let draws = (0..n).map(|_| sample_null_llr(problem, x, rng)).collect::<Result<Vec<_>>>()?;
    Ok(empirical_quantile(&draws, gamma))
}

/// Nonnegative pinball loss at level `τ`; minimized by the `τ`-quantile.
pub fn pinball_loss(z: f64, q: f64, tau: f64) -> f64 {
    if z < q {
        (1.0 - tau) * (q - z)
    } else {
        tau * (z - q)
    }
}

/// Single null-LLR draws at each point, in parallel with per-point streams.
pub fn llr_draws(problem: &LinearGaussianProblem, points: &[DVector<f64>], seed: u64) -> Result<Vec<CalibrationSample>> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let l = sample_null_llr(problem, x, &mut rng)?;
            Ok(CalibrationSample {
                x: x.clone(),
                mu: problem.phi(x),
                llr_draw: Some(l),
                q_hat: None,
            })
        })
        .collect()
}

/// Monte Carlo quantiles at each point (Algorithm 1 calibration).
pub fn mc_quantiles(problem: &LinearGaussianProblem, points: &[DVector<f64>], gamma: f64, n: usize, seed: u64) -> Result<Vec<CalibrationSample>> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, x)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k as u64));
            let q = mc_quantile(problem, x, gamma, n, &mut rng)?;
            Ok(CalibrationSample {
                x: x.clone(),
                mu: problem.phi(x),
                llr_draw: None,
                q_hat: Some(q),
            })
        })
        .collect()
}

/// Fitted model of the upper-γ conditional quantile of the LLR.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantileRegressor {
    pub gamma: f64,
    pub training_size: usize,
    pub params: Option<GbtParams>,
    /// True when the targets were all equal and a constant is returned.
    pub constant: bool,
    model: Option<gbt::Gbt>,
    value: f64,
}

impl QuantileRegressor {
    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        match &self.model {
            Some(m) => m.predict(x.as_slice()).max(0.0),
            None => self.value.max(0.0),
        }
    }
}

fn training_targets(samples: &[CalibrationSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| s.llr_draw.ok_or_else(|| Error::InvalidArgument("training sample lacks an LLR draw".into())))
        .collect()
}

/// Selects boosting hyperparameters by `folds`-fold CV over `grid`.
pub fn select_hyperparameters(samples: &[CalibrationSample], gamma: f64, grid: &[GbtParams], folds: usize, seed: u64) -> Result<GbtParams> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let targets = training_targets(samples)?;
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let data = gbt::Dataset::new(&rows, &targets);
    let losses = gbt::cross_validate(&data, 1.0 - gamma, grid, folds, seed);
    Ok(gbt::select(grid, &losses))
}

/// Fits boosted trees to `(x, λ)` pairs at level `τ = 1 − γ`. A grid of more
/// than one point is searched by cross-validation first.
pub fn fit_quantile_regressor(
    samples: &[CalibrationSample],
    gamma: f64,
    grid: &[GbtParams],
    cv_folds: usize,
    seed: u64,
) -> Result<QuantileRegressor> {
    if samples.len() < 200 {
        return Err(Error::InvalidArgument(format!(
            "quantile regression needs at least 200 samples, got {}",
            samples.len()
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must lie in (0,1)")));
    }
    let targets = training_targets(samples)?;
    let first = targets[0];
    if targets.iter().all(|t| *t == first) {
        return Ok(QuantileRegressor {
            gamma,
            training_size: samples.len(),
            params: None,
            constant: true,
            model: None,
            value: first,
        });
    }
    let params = select_hyperparameters(samples, gamma, grid, cv_folds, seed)?;
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.x.as_slice()).collect();
    let data = gbt::Dataset::new(&rows, &targets);
    let model = gbt::fit(&data, None, 1.0 - gamma, &params);
    Ok(QuantileRegressor {
        gamma,
        training_size: samples.len(),
        params: Some(params),
        constant: false,
        model: Some(model),
        value: f64::NAN,
    })
}

/// Predicted quantiles at the given points.
pub fn predict_quantiles(problem: &LinearGaussianProblem, reg: &QuantileRegressor, points: &[DVector<f64>]) -> Vec<CalibrationSample> {
    points
        .iter()
        .map(|x| CalibrationSample {
            x: x.clone(),
            mu: problem.phi(x),
            llr_draw: None,
            q_hat: Some(reg.predict(x)),
        })
        .collect()
}

fn q_values(samples: &[CalibrationSample]) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|s| s.q_hat.ok_or_else(|| Error::InvalidArgument("sample lacks a quantile estimate".into())))
        .collect()
}

/// Empirical maximum of the estimated quantiles.
pub fn max_quantile_estimate(samples: &[CalibrationSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no quantile samples".into()));
    }
    Ok(q_values(samples)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Default window `max(10, ⌈0.02 M⌉)`.
pub fn default_window(m: usize) -> usize {
    10usize.max((0.02 * m as f64).ceil() as usize)
}

/// Trailing windowed maximum of quantiles ordered by functional value.
#[derive(Debug, Clone)]
pub struct RollingMaxQuantile {
    pub mus: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub window: usize,
    window_max: Vec<f64>,
}

impl RollingMaxQuantile {
    /// Nearest sorted index to `mu`, clamped to the ends.
    pub fn nearest_index(&self, mu: f64) -> usize {
        let m = self.mus.len();
        let pos = self.mus.partition_point(|v| *v < mu);
        if pos == 0 {
            return 0;
        }
        if pos >= m {
            return m - 1;
        }
        if (mu - self.mus[pos - 1]) <= (self.mus[pos] - mu) {
            pos - 1
        } else {
            pos
        }
    }

    /// `m̂(μ) = max{q_{σ(k*−T)}, …, q_{σ(k*)}}`
    pub fn evaluate(&self, mu: f64) -> f64 {
        self.window_max[self.nearest_index(mu)]
    }

    /// Windowed maximum at sorted position `k`.
    pub fn at_sorted(&self, k: usize) -> f64 {
        self.window_max[k]
    }
}

pub fn rolling_max(samples: &[CalibrationSample], window: usize) -> Result<RollingMaxQuantile> {
    let m = samples.len();
    if window < 1 || m <= window {
        return Err(Error::InvalidArgument(format!("rolling max needs M > T >= 1 (M = {m}, T = {window})")));
    }
    let q = q_values(samples)?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| samples[a].mu.total_cmp(&samples[b].mu).then(a.cmp(&b)));
    let mus: Vec<f64> = order.iter().map(|&i| samples[i].mu).collect();
    let quantiles: Vec<f64> = order.iter().map(|&i| q[i]).collect();
    // Monotone deque for the trailing window maximum.
    let mut window_max = Vec::with_capacity(m);
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    for k in 0..m {
        while dq.back().is_some_and(|&j| quantiles[j] <= quantiles[k]) {
            dq.pop_back();
        }
        dq.push_back(k);
        while dq.front().is_some_and(|&j| j + window < k) {
            dq.pop_front();
        }
        window_max.push(quantiles[*dq.front().unwrap()]);
    }
    Ok(RollingMaxQuantile {
        mus,
        quantiles,
        window,
        window_max,
    })
}

/// CSV with columns `x_1..x_p, mu, llr, q_hat`.
pub fn write_calibration_csv<W: Write>(samples: &[CalibrationSample], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let p = samples.first().map_or(0, |s| s.x.len());
    let mut header: Vec<String> = (1..=p).map(|i| format!("x_{i}")).collect();
    header.extend(["mu", "llr", "q_hat"].map(String::from));
    wr.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.17e}"));
    for s in samples {
        let mut rec: Vec<String> = s.x.iter().map(|v| format!("{v:.17e}")).collect();
        rec.push(format!("{:.17e}", s.mu));
        rec.push(fmt(s.llr_draw));
        rec.push(fmt(s.q_hat));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
