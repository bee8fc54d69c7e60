//! The six interval constructions: OSB and SSB baselines and the global /
//! sliced, inverted / optimized Berger–Boos intervals, plus the end-to-end
//! calibration pipeline that feeds them.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{functional_extremes, BergerBoosSet};
use crate::model::LinearGaussianProblem;
use crate::optim::{endpoint_optimize_with_fit, LlrEvaluator};
use crate::quantiles::{self, CalibrationSample, GbtParams, RollingMaxQuantile};
use crate::samplers::{self, PreparedPolytope, SampleBatch};
use crate::stats::{chi2_upper_quantile, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Method {
    Osb,
    Ssb,
    GlobalInverted,
    GlobalOptimized,
    SlicedInverted,
    SlicedOptimized,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Osb,
        Method::Ssb,
        Method::GlobalInverted,
        Method::GlobalOptimized,
        Method::SlicedInverted,
        Method::SlicedOptimized,
    ];

    pub const BERGER_BOOS: [Method; 4] = [
        Method::GlobalInverted,
        Method::GlobalOptimized,
        Method::SlicedInverted,
        Method::SlicedOptimized,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Osb => "osb",
            Method::Ssb => "ssb",
            Method::GlobalInverted => "global_inverted",
            Method::GlobalOptimized => "global_optimized",
            Method::SlicedInverted => "sliced_inverted",
            Method::SlicedOptimized => "sliced_optimized",
        }
    }

    pub fn is_berger_boos(&self) -> bool {
        !matches!(self, Method::Osb | Method::Ssb)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CutoffKind {
    /// A single LLR cutoff.
    Scalar,
    /// Per-sample quantile estimates.
    PerSample,
    /// Rolling maximum with the given window.
    RollingMax { window: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub method: Method,
    pub lower: f64,
    pub upper: f64,
    pub degenerate: bool,
    pub n_accepted: Option<usize>,
    /// The cutoff for scalar methods, the largest cutoff otherwise.
    pub cutoff_used: f64,
    pub cutoff_kind: CutoffKind,
    pub alpha: f64,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
}

impl IntervalResult {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    /// Coverage rule: an empty acceptance set collapses to a point that only
    /// counts when it matches `mu` to 1e-9.
    pub fn covers(&self, mu: f64) -> bool {
        if self.degenerate && self.n_accepted == Some(0) {
            (mu - self.lower).abs() <= 1e-9
        } else {
            self.lower <= mu && mu <= self.upper
        }
    }
}

fn check_levels(alpha: f64, eta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0,1)")));
    }
    if !(eta > 0.0 && eta < alpha) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must lie in (0, alpha)")));
    }
    Ok(alpha - eta)
}

/// One-at-a-time strict bounds: `ψ² = χ²_{1,α} + s(y)²`.
pub fn osb_interval(problem: &LinearGaussianProblem, y: &DVector<f64>, alpha: f64) -> Result<IntervalResult> {
    osb_from(&LlrEvaluator::new(problem, y)?, alpha)
}

pub fn osb_from(ev: &LlrEvaluator<'_>, alpha: f64) -> Result<IntervalResult> {
    let c = chi2_upper_quantile(1, alpha);
    let (lower, upper) = ev.acceptance_range(c)?;
    Ok(IntervalResult {
        method: Method::Osb,
        lower,
        upper,
        degenerate: false,
        n_accepted: None,
        cutoff_used: c,
        cutoff_kind: CutoffKind::Scalar,
        alpha,
        eta: None,
        gamma: None,
    })
}

/// Simultaneous strict bounds: extremes of `hᵀx` over the `χ²_{n,α}` set.
/// An empty set gives the degenerate point interval.
pub fn ssb_interval(problem: &LinearGaussianProblem, y: &DVector<f64>, alpha: f64) -> Result<IntervalResult> {
    let t = chi2_upper_quantile(problem.n() as u32, alpha);
    let set = BergerBoosSet::with_threshold(problem, y, t)?;
    if set.is_empty() {
        let mut r = empty_interval(set.fit().x.dot(problem.functional()), Method::Ssb, alpha, None);
        r.cutoff_used = t;
        return Ok(r);
    }
    let fe = functional_extremes(&set)?;
    Ok(IntervalResult {
        method: Method::Ssb,
        lower: fe.mu_lower,
        upper: fe.mu_upper,
        degenerate: false,
        n_accepted: None,
        cutoff_used: t,
        cutoff_kind: CutoffKind::Scalar,
        alpha,
        eta: None,
        gamma: None,
    })
}

/// Point interval at `mu_hat`, used when nothing is accepted. For the
/// Berger–Boos methods this covers an empty `B_η`.
pub fn empty_interval(mu_hat: f64, method: Method, alpha: f64, eta: Option<f64>) -> IntervalResult {
    IntervalResult {
        method,
        lower: mu_hat,
        upper: mu_hat,
        degenerate: true,
        n_accepted: if method.is_berger_boos() { Some(0) } else { None },
        cutoff_used: f64::NAN,
        cutoff_kind: CutoffKind::Scalar,
        alpha,
        eta,
        gamma: eta.map(|e| alpha - e),
    }
}

/// Indices `k` with `λ(μ_k, y) ≤ cutoffs[k]`.
///
/// λ is convex in μ, so only samples inside `{μ : λ ≤ max cutoff}` can pass;
/// that range is found by one endpoint optimization and λ is evaluated only
/// there. With a constant cutoff, samples well inside the range are accepted
/// without evaluation.
pub fn accepted_indices(ev: &LlrEvaluator<'_>, mus: &[f64], cutoffs: &[f64]) -> Result<Vec<usize>> {
    assert_eq!(mus.len(), cutoffs.len());
    if mus.is_empty() {
        return Ok(vec![]);
    }
    let c_max = cutoffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_min = cutoffs.iter().cloned().fold(f64::INFINITY, f64::min);
    if c_max < 0.0 {
        return Ok(vec![]);
    }
    let constant = c_max == c_min;
    let range = if c_max.is_finite() { Some(ev.acceptance_range(c_max)?) } else { None };
    let mut sure = Vec::new();
    let mut check = Vec::new();
    for (k, &mu) in mus.iter().enumerate() {
        match range {
            Some((a, b)) => {
                let tol = 1e-7 * (1.0 + a.abs().max(b.abs()) + (b - a));
                if mu < a - tol || mu > b + tol {
                    continue;
                }
                if constant && mu > a + tol && mu < b - tol {
                    sure.push(k);
                } else {
                    check.push(k);
                }
            }
            None => check.push(k),
        }
    }
    let checked: Vec<Option<usize>> = check
        .par_iter()
        .map(|&k| -> Result<Option<usize>> {
            let l = ev.eval(mus[k])?;
            Ok((l.value <= cutoffs[k]).then_some(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<usize> = sure.into_iter().chain(checked.into_iter().flatten()).collect();
    out.sort_unstable();
    Ok(out)
}

fn inverted_result(
    ev: &LlrEvaluator<'_>,
    method: Method,
    mus: &[f64],
    accepted: &[usize],
    cutoff_used: f64,
    cutoff_kind: CutoffKind,
    alpha: f64,
    eta: f64,
) -> IntervalResult {
    let n = accepted.len();
    let (lower, upper) = if n == 0 {
        let m = ev.mu_hat();
        (m, m)
    } else {
        accepted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| (lo.min(mus[k]), hi.max(mus[k])))
    };
    IntervalResult {
        method,
        lower,
        upper,
        degenerate: n <= 1,
        n_accepted: Some(n),
        cutoff_used,
        cutoff_kind,
        alpha,
        eta: Some(eta),
        gamma: Some(alpha - eta),
    }
}

fn mus_and_q(samples: &[CalibrationSample]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mus = samples.iter().map(|s| s.mu).collect();
    let q = samples
        .iter()
        .map(|s| s.q_hat.ok_or_else(|| Error::InvalidArgument("sample lacks a quantile estimate".into())))
        .collect::<Result<Vec<_>>>()?;
    Ok((mus, q))
}

/// Accepts sampled `μ_k` with `λ(μ_k, y) ≤ q̂ = max_k q_k`.
pub fn global_inverted(ev: &LlrEvaluator<'_>, samples: &[CalibrationSample], alpha: f64, eta: f64) -> Result<IntervalResult> {
    check_levels(alpha, eta)?;
    let q_max = quantiles::max_quantile_estimate(samples)?;
    global_inverted_with_cutoff(ev, samples, q_max, alpha, eta)
}

/// [`global_inverted`] with an explicit cutoff.
pub fn global_inverted_with_cutoff(ev: &LlrEvaluator<'_>, samples: &[CalibrationSample], cutoff: f64, alpha: f64, eta: f64) -> Result<IntervalResult> {
    let mus: Vec<f64> = samples.iter().map(|s| s.mu).collect();
    let cut = vec![cutoff; mus.len()];
    let acc = accepted_indices(ev, &mus, &cut)?;
    Ok(inverted_result(ev, Method::GlobalInverted, &mus, &acc, cutoff, CutoffKind::Scalar, alpha, eta))
}

/// Endpoint optimization with `ψ² = q̂ + s(y)²`.
pub fn global_optimized(ev: &LlrEvaluator<'_>, samples: &[CalibrationSample], alpha: f64, eta: f64) -> Result<IntervalResult> {
    check_levels(alpha, eta)?;
    let q_max = quantiles::max_quantile_estimate(samples)?;
    global_optimized_with_cutoff(ev, q_max, alpha, eta)
}

pub fn global_optimized_with_cutoff(ev: &LlrEvaluator<'_>, cutoff: f64, alpha: f64, eta: f64) -> Result<IntervalResult> {
    let fit = ev.fit();
    let (lower, upper) = endpoint_optimize_with_fit(ev_problem(ev), ev.y(), fit, cutoff.max(0.0) + fit.s2)?;
    Ok(IntervalResult {
        method: Method::GlobalOptimized,
        lower,
        upper,
        degenerate: false,
        n_accepted: None,
        cutoff_used: cutoff,
        cutoff_kind: CutoffKind::Scalar,
        alpha,
        eta: Some(eta),
        gamma: Some(alpha - eta),
    })
}

fn ev_problem<'a>(ev: &LlrEvaluator<'a>) -> &'a LinearGaussianProblem {
    ev.problem()
}

/// Accepts sampled `μ_k` with `λ(μ_k, y) ≤ q_k`.
pub fn sliced_inverted(ev: &LlrEvaluator<'_>, samples: &[CalibrationSample], alpha: f64, eta: f64) -> Result<IntervalResult> {
    check_levels(alpha, eta)?;
    let (mus, q) = mus_and_q(samples)?;
    let acc = accepted_indices(ev, &mus, &q)?;
    let q_max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(inverted_result(ev, Method::SlicedInverted, &mus, &acc, q_max, CutoffKind::PerSample, alpha, eta))
}

/// Accepts sampled `μ_k` with `λ(μ_k, y) ≤ m̂(μ_k)`.
pub fn sliced_optimized(
    ev: &LlrEvaluator<'_>,
    rolling: &RollingMaxQuantile,
    samples: &[CalibrationSample],
    alpha: f64,
    eta: f64,
) -> Result<IntervalResult> {
    check_levels(alpha, eta)?;
    let mus: Vec<f64> = samples.iter().map(|s| s.mu).collect();
    let cut: Vec<f64> = mus.iter().map(|&m| rolling.evaluate(m)).collect();
    let acc = accepted_indices(ev, &mus, &cut)?;
    let c_max = cut.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(inverted_result(
        ev,
        Method::SlicedOptimized,
        &mus,
        &acc,
        c_max,
        CutoffKind::RollingMax { window: rolling.window },
        alpha,
        eta,
    ))
}

/// Which design-point sampler to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerKind {
    /// VGS when `p < 10` and `K` has full column rank, polytope otherwise.
    Auto,
    Vgs,
    Polytope,
    ImportanceLike,
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "auto" => Ok(SamplerKind::Auto),
            "vgs" => Ok(SamplerKind::Vgs),
            "polytope" | "vaidya" => Ok(SamplerKind::Polytope),
            "importance_like" | "importance" => Ok(SamplerKind::ImportanceLike),
            other => Err(Error::Config(format!("unknown sampler '{other}'"))),
        }
    }
}

/// How per-point quantiles are estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum QuantileMethod {
    /// Monte Carlo percentiles from `n` draws per point.
    MonteCarlo { n: usize },
    /// Boosted quantile regression on `m_train` single draws.
    Regression { m_train: usize, grid: Vec<GbtParams>, cv_folds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub sampler: SamplerKind,
    /// Design points used for the intervals.
    pub m: usize,
    pub quantile: QuantileMethod,
    pub chains: usize,
    pub radius: f64,
    /// Random bounding directions; `None` means `2p`.
    pub n_random: Option<usize>,
    pub gamma_p: f64,
    pub q_norm: f64,
    /// Rolling window; `None` means `max(10, ⌈0.02 M⌉)`.
    pub window: Option<usize>,
    pub reject_cap: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            sampler: SamplerKind::Auto,
            m: 1000,
            quantile: QuantileMethod::Regression {
                m_train: 1000,
                grid: quantiles::default_grid(),
                cv_folds: 10,
            },
            chains: samplers::DEFAULT_CHAINS,
            radius: samplers::DEFAULT_RADIUS,
            n_random: None,
            gamma_p: samplers::DEFAULT_GAMMA_P,
            q_norm: samplers::DEFAULT_Q_NORM,
            window: None,
            reject_cap: samplers::DEFAULT_REJECT_CAP,
        }
    }
}

/// Quantile-calibrated design points for one observation.
#[derive(Debug, Clone)]
pub struct Calibration {
    pub samples: Vec<CalibrationSample>,
    pub q_max: f64,
    pub rolling: RollingMaxQuantile,
    pub training: Option<Vec<CalibrationSample>>,
    pub params: Option<GbtParams>,
    pub sampler_used: SamplerKind,
}

fn resolve_sampler(problem: &LinearGaussianProblem, kind: SamplerKind) -> SamplerKind {
    match kind {
        SamplerKind::Auto => {
            if problem.p() < 10 && problem.eigen().numerical_rank == problem.p() {
                SamplerKind::Vgs
            } else {
                SamplerKind::Polytope
            }
        }
        k => k,
    }
}

/// Draws design points from `B_η` in batches sharing one bounding polytope.
struct DesignSampler<'s, 'a> {
    set: &'s BergerBoosSet<'a>,
    kind: SamplerKind,
    prepared: Option<PreparedPolytope>,
    cfg: &'s CalibrationConfig,
}

impl<'s, 'a> DesignSampler<'s, 'a> {
    fn new(set: &'s BergerBoosSet<'a>, cfg: &'s CalibrationConfig, seed: u64) -> Result<Self> {
        let kind = resolve_sampler(set.problem(), cfg.sampler);
        let prepared = match kind {
            SamplerKind::Polytope | SamplerKind::ImportanceLike => {
                let n_random = cfg.n_random.unwrap_or(2 * set.problem().p());
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Some(PreparedPolytope::new(set, cfg.chains, n_random, &mut rng)?)
            }
            _ => None,
        };
        Ok(DesignSampler { set, kind, prepared, cfg })
    }

    fn draw(&self, m: usize, seed: u64) -> Result<SampleBatch> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.kind {
            SamplerKind::Vgs => samplers::vgs_sample(self.set, m, &mut rng, self.cfg.reject_cap),
            SamplerKind::Polytope => {
                let prepared = self.prepared.as_ref().expect("prepared polytope");
                let per_chain = m.div_ceil(prepared.starts.len());
                let mut b = samplers::sample_prepared(self.set, prepared, per_chain, self.cfg.radius, seed)?;
                truncate_batch(&mut b, m);
                Ok(b)
            }
            SamplerKind::ImportanceLike => {
                let prepared = self.prepared.as_ref().expect("prepared polytope");
                samplers::importance_like_prepared(self.set, prepared, m, self.cfg.gamma_p, self.cfg.q_norm, self.cfg.radius, &mut rng)
            }
            SamplerKind::Auto => unreachable!("resolved above"),
        }
    }
}

/// Draws `m` design points from `B_η` with the configured sampler, as the
/// calibration would. Returns the batch and the sampler actually used.
pub fn sample_design(set: &BergerBoosSet<'_>, cfg: &CalibrationConfig, m: usize, seed: u64) -> Result<(SampleBatch, SamplerKind)> {
    let sampler = DesignSampler::new(set, cfg, derive_seed(seed, 0))?;
    Ok((sampler.draw(m, derive_seed(seed, 1))?, sampler.kind))
}

/// Keeps `m` points, dropping the last steps of each chain evenly.
fn truncate_batch(b: &mut SampleBatch, m: usize) {
    if b.len() <= m {
        return;
    }
    let chains = b.chain_ids.as_ref().map_or(1, |c| c.iter().max().map_or(1, |x| x + 1));
    let per = b.len() / chains;
    let extra = b.len() - m;
    // Remove the final step from the last `extra` chains.
    let mut keep = vec![true; b.len()];
    for c in 0..extra {
        let chain = chains - 1 - c;
        keep[chain * per + per - 1] = false;
    }
    let mut k = 0;
    b.points.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let mut k = 0;
    b.functional_values.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    let mut k = 0;
    b.steps.retain(|_| {
        k += 1;
        keep[k - 1]
    });
    if let Some(ids) = b.chain_ids.as_mut() {
        let mut k = 0;
        ids.retain(|_| {
            k += 1;
            keep[k - 1]
        });
    }
}

/// Samples `B_η` and estimates the γ-quantile at every design point.
pub fn calibrate(set: &BergerBoosSet<'_>, gamma: f64, cfg: &CalibrationConfig, seed: u64) -> Result<Calibration> {
    let problem = set.problem();
    let sampler = DesignSampler::new(set, cfg, derive_seed(seed, 0))?;
    let (samples, training, params) = match &cfg.quantile {
        QuantileMethod::MonteCarlo { n } => {
            let batch = sampler.draw(cfg.m, derive_seed(seed, 1))?;
            let s = quantiles::mc_quantiles(problem, &batch.points, gamma, *n, derive_seed(seed, 2))?;
            (s, None, None)
        }
        QuantileMethod::Regression { m_train, grid, cv_folds } => {
            let train_batch = sampler.draw(*m_train, derive_seed(seed, 3))?;
            let training = quantiles::llr_draws(problem, &train_batch.points, derive_seed(seed, 4))?;
            let reg = quantiles::fit_quantile_regressor(&training, gamma, grid, *cv_folds, derive_seed(seed, 5))?;
            let batch = sampler.draw(cfg.m, derive_seed(seed, 6))?;
            let s = quantiles::predict_quantiles(problem, &reg, &batch.points);
            (s, Some(training), reg.params)
        }
    };
    let q_max = quantiles::max_quantile_estimate(&samples)?;
    let window = cfg.window.unwrap_or_else(|| quantiles::default_window(samples.len()));
    let window = window.min(samples.len().saturating_sub(1)).max(1);
    let rolling = quantiles::rolling_max(&samples, window)?;
    Ok(Calibration {
        samples,
        q_max,
        rolling,
        training,
        params,
        sampler_used: sampler.kind,
    })
}

/// Runs the cross-validated hyperparameter search once on a training batch
/// drawn for `set`, so that a study can reuse the choice across replications.
/// Returns `None` when the configuration has nothing to search.
pub fn pilot_hyperparameters(set: &BergerBoosSet<'_>, gamma: f64, cfg: &CalibrationConfig, seed: u64) -> Result<Option<GbtParams>> {
    let QuantileMethod::Regression { m_train, grid, cv_folds } = &cfg.quantile else {
        return Ok(None);
    };
    if grid.len() <= 1 {
        return Ok(grid.first().copied());
    }
    let sampler = DesignSampler::new(set, cfg, derive_seed(seed, 0))?;
    let batch = sampler.draw(*m_train, derive_seed(seed, 3))?;
    let training = quantiles::llr_draws(set.problem(), &batch.points, derive_seed(seed, 4))?;
    quantiles::select_hyperparameters(&training, gamma, grid, *cv_folds, derive_seed(seed, 5)).map(Some)
}

/// Computes the requested methods for one observation. Berger–Boos methods
/// need a calibration.
pub fn compute_methods(
    ev: &LlrEvaluator<'_>,
    calibration: Option<&Calibration>,
    methods: &[Method],
    alpha: f64,
    eta: f64,
) -> Vec<Result<IntervalResult>> {
    methods
        .iter()
        .map(|m| -> Result<IntervalResult> {
            match m {
                Method::Osb => osb_from(ev, alpha),
                Method::Ssb => ssb_interval(ev.problem(), ev.y(), alpha),
                bb => {
                    // Without a calibration only an empty `B_η` is legitimate.
                    let Some(cal) = calibration else {
                        let set = BergerBoosSet::new(ev.problem(), ev.y(), eta)?;
                        if set.is_empty() {
                            return Ok(empty_interval(ev.mu_hat(), *bb, alpha, Some(eta)));
                        }
                        return Err(Error::InvalidArgument("Berger–Boos method without calibration".into()));
                    };
                    match bb {
                        Method::GlobalInverted => global_inverted(ev, &cal.samples, alpha, eta),
                        Method::GlobalOptimized => global_optimized(ev, &cal.samples, alpha, eta),
                        Method::SlicedInverted => sliced_inverted(ev, &cal.samples, alpha, eta),
                        Method::SlicedOptimized => sliced_optimized(ev, &cal.rolling, &cal.samples, alpha, eta),
                        _ => unreachable!(),
                    }
                }
            }
        })
        .collect()
}

/// Builds `B_η`, calibrates and computes `methods` for observation `y`.
pub fn intervals_for_observation(
    problem: &LinearGaussianProblem,
    y: &DVector<f64>,
    alpha: f64,
    eta: f64,
    methods: &[Method],
    cfg: &CalibrationConfig,
    seed: u64,
) -> Result<(Vec<Result<IntervalResult>>, Option<Calibration>)> {
    let gamma = check_levels(alpha, eta)?;
    let ev = LlrEvaluator::new(problem, y)?;
    let set = BergerBoosSet::new(problem, y, eta)?;
    if !methods.iter().any(|m| m.is_berger_boos()) || set.is_empty() {
        return Ok((compute_methods(&ev, None, methods, alpha, eta), None));
    }
    let calibration = calibrate(&set, gamma, cfg, seed)?;
    Ok((compute_methods(&ev, Some(&calibration), methods, alpha, eta), Some(calibration)))
}
