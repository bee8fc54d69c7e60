//! Scenario factories, the coverage-study runner and the η-sweep.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::geometry::{BergerBoosSet, Polytope};
use crate::intervals::{
    compute_methods, pilot_hyperparameters, calibrate, CalibrationConfig, IntervalResult, Method, QuantileMethod, SamplerKind,
};
use crate::model::{simulate_seeded, LinearGaussianProblem};
use crate::optim::LlrEvaluator;
use crate::quantiles;
use crate::stats::{clopper_pearson, derive_seed, mean_sem};

/// Stand-in for `η = 0`, where the Berger–Boos set would be unbounded.
pub const ETA_ZERO_SURROGATE: f64 = 1e-6;

/// Largest tolerated fraction of failed replications per method.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub problem: LinearGaussianProblem,
    pub x_true: DVector<f64>,
    pub alpha: f64,
    pub eta: f64,
    pub calibration: CalibrationConfig,
    pub methods: Vec<Method>,
    pub replications: usize,
    pub master_seed: u64,
}

impl Scenario {
    pub fn gamma(&self) -> f64 {
        self.alpha - self.eta
    }

    pub fn mu_true(&self) -> f64 {
        self.problem.phi(&self.x_true)
    }

    /// Self-checks run before a study.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0,1)", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta < self.alpha) {
            return Err(Error::Config(format!("eta = {} must lie in (0, alpha)", self.eta)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.x_true.len() != self.problem.p() {
            return Err(Error::Config(format!(
                "x_true has {} entries, expected {}",
                self.x_true.len(),
                self.problem.p()
            )));
        }
        if self.problem.functional().iter().all(|v| *v == 0.0) {
            return Err(Error::Config("functional h is zero".into()));
        }
        if !self.problem.is_whitened() {
            return Err(Error::Config("problem is not whitened".into()));
        }
        if !self.problem.constraints().contains(&self.x_true) {
            warn!("scenario {}: x_true lies outside the constraint set", self.name);
        }
        Ok(())
    }
}

fn regression(m_train: usize, cv_folds: usize) -> QuantileMethod {
    QuantileMethod::Regression {
        m_train,
        grid: quantiles::default_grid(),
        cv_folds,
    }
}

fn low_dim_calibration(sampler: SamplerKind) -> CalibrationConfig {
    CalibrationConfig {
        sampler,
        m: 1000,
        quantile: regression(1000, 5),
        ..CalibrationConfig::default()
    }
}

/// `K = I₂`, `X = ℝ²₊`, `φ(x) = x₁ − x₂`, `x* = (0.5, 0.5)`.
pub fn scenario_gaussian2d() -> Scenario {
    let problem = LinearGaussianProblem::with_identity_noise(
        DMatrix::identity(2, 2),
        Polytope::nonnegative_orthant(2),
        DVector::from_vec(vec![1.0, -1.0]),
    )
    .expect("valid 2D problem");
    Scenario {
        name: "gaussian2d".into(),
        problem,
        x_true: DVector::from_vec(vec![0.5, 0.5]),
        alpha: 0.32,
        eta: 0.01,
        calibration: low_dim_calibration(SamplerKind::Vgs),
        methods: Method::ALL.to_vec(),
        replications: 1000,
        master_seed: 1,
    }
}

/// `K = I₃`, `X = ℝ³₊`, `φ(x) = x₁ + x₂ − x₃`, `x* = (0.03, 0.03, 1)`.
pub fn scenario_gaussian3d() -> Scenario {
    let problem = LinearGaussianProblem::with_identity_noise(
        DMatrix::identity(3, 3),
        Polytope::nonnegative_orthant(3),
        DVector::from_vec(vec![1.0, 1.0, -1.0]),
    )
    .expect("valid 3D problem");
    Scenario {
        name: "gaussian3d".into(),
        problem,
        x_true: DVector::from_vec(vec![0.03, 0.03, 1.0]),
        alpha: 0.32,
        eta: 0.01,
        calibration: low_dim_calibration(SamplerKind::ImportanceLike),
        methods: Method::ALL.to_vec(),
        replications: 1000,
        master_seed: 1,
    }
}

pub const WIDEBIN_TRUE_BINS: usize = 80;
pub const WIDEBIN_OBS_BINS: usize = 40;
pub const WIDEBIN_LO: f64 = -7.0;
pub const WIDEBIN_HI: f64 = 7.0;
pub const WIDEBIN_SMEAR: f64 = 0.75;
pub const WIDEBIN_INTENSITY: f64 = 1e4;
/// True bins summed by the functional.
pub const WIDEBIN_FUNCTIONAL_BINS: std::ops::Range<usize> = 48..56;

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn bin_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Smearing matrix: entry `(i, j)` is the Gaussian mass, centred on true bin
/// `j`, falling in observed bin `i`.
pub fn widebin_operator() -> DMatrix<f64> {
    let obs = bin_edges(WIDEBIN_LO, WIDEBIN_HI, WIDEBIN_OBS_BINS);
    let tru = bin_edges(WIDEBIN_LO, WIDEBIN_HI, WIDEBIN_TRUE_BINS);
    DMatrix::from_fn(WIDEBIN_OBS_BINS, WIDEBIN_TRUE_BINS, |i, j| {
        let c = 0.5 * (tru[j] + tru[j + 1]);
        normal_cdf((obs[i + 1] - c) / WIDEBIN_SMEAR) - normal_cdf((obs[i] - c) / WIDEBIN_SMEAR)
    })
}

/// Binned intensity of `0.35·N(−2,1) + 0.5·N(2,1.2²) + 0.15·U(−7,7)`.
pub fn widebin_smooth_truth() -> DVector<f64> {
    let e = bin_edges(WIDEBIN_LO, WIDEBIN_HI, WIDEBIN_TRUE_BINS);
    let mass = |a: f64, b: f64| {
        0.35 * (normal_cdf((b + 2.0) / 1.0) - normal_cdf((a + 2.0) / 1.0))
            + 0.5 * (normal_cdf((b - 2.0) / 1.2) - normal_cdf((a - 2.0) / 1.2))
            + 0.15 * (b - a) / (WIDEBIN_HI - WIDEBIN_LO)
    };
    DVector::from_fn(WIDEBIN_TRUE_BINS, |j, _| WIDEBIN_INTENSITY * mass(e[j], e[j + 1]))
}

/// The smooth profile with two blocks tripled and two blocks zeroed.
pub fn widebin_adversarial_truth() -> DVector<f64> {
    let mut x = widebin_smooth_truth();
    for j in (30..=35).chain(60..=65) {
        x[j] *= 3.0;
    }
    for j in (44..=48).chain(56..=60) {
        x[j] = 0.0;
    }
    x
}

/// Whitened wide-bin problem with `Σ = diag(max(K x_ref, 1))`.
pub fn widebin_problem(x_ref: &DVector<f64>) -> Result<LinearGaussianProblem> {
    let k = widebin_operator();
    let counts = &k * x_ref;
    let sigma = DMatrix::from_diagonal(&counts.map(|c| c.max(1.0)));
    let h = DVector::from_fn(WIDEBIN_TRUE_BINS, |j, _| if WIDEBIN_FUNCTIONAL_BINS.contains(&j) { 1.0 } else { 0.0 });
    LinearGaussianProblem::new(k, sigma, Polytope::nonnegative_orthant(WIDEBIN_TRUE_BINS), h)
}

/// Ratio of the largest to the smallest singular value above the rank
/// threshold.
pub fn row_space_condition(k: &DMatrix<f64>) -> f64 {
    let sv = k.singular_values();
    let max = sv.max();
    let min = sv
        .iter()
        .cloned()
        .filter(|s| s * s > crate::model::RANK_TOL * max * max)
        .fold(f64::INFINITY, f64::min);
    max / min
}

/// Wide-bin deconvolution study at desk scale, or at paper scale with `full`.
pub fn scenario_widebin(smooth: bool, full: bool) -> Scenario {
    let x_true = if smooth { widebin_smooth_truth() } else { widebin_adversarial_truth() };
    let problem = widebin_problem(&x_true).expect("valid wide-bin problem");
    let (half, replications) = if full { (10_500, 1000) } else { (2500, 100) };
    Scenario {
        name: if smooth { "widebin_smooth" } else { "widebin_adversarial" }.into(),
        problem,
        x_true,
        alpha: 0.32,
        eta: 0.01,
        calibration: CalibrationConfig {
            sampler: SamplerKind::Polytope,
            m: half,
            quantile: regression(half, 5),
            chains: 14,
            ..CalibrationConfig::default()
        },
        methods: Method::ALL.to_vec(),
        replications,
        master_seed: 1,
    }
}

/// Looks a built-in scenario up by name.
pub fn scenario_by_name(name: &str, full: bool) -> Result<Scenario> {
    match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "gaussian2d" | "2d" => Ok(scenario_gaussian2d()),
        "gaussian3d" | "3d" => Ok(scenario_gaussian3d()),
        "widebin_smooth" | "widebin" => Ok(scenario_widebin(true, full)),
        "widebin_adversarial" => Ok(scenario_widebin(false, full)),
        "eta_sweep" => Ok(eta_sweep_scenario()),
        other => Err(Error::Config(format!("unknown scenario '{other}'"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub scenario: String,
    pub method: Method,
    pub rep: usize,
    pub mu_true: f64,
    pub lower: f64,
    pub upper: f64,
    pub length: f64,
    pub covered: bool,
    pub degenerate: bool,
    pub n_accepted: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub rep: usize,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials: usize,
    pub covered: usize,
    pub missed: usize,
    pub failed: usize,
    pub coverage: f64,
    pub cp_lower: f64,
    pub cp_upper: f64,
    pub mean_length: f64,
    pub sem_length: f64,
    pub degenerate: usize,
}

impl MethodSummary {
    /// Whether the 95% Clopper–Pearson interval reaches `level`.
    pub fn reaches(&self, level: f64) -> bool {
        self.cp_upper >= level
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub scenario: String,
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub mu_true: f64,
    pub replications: usize,
    pub master_seed: u64,
    pub pilot_params: Option<quantiles::GbtParams>,
    pub methods: Vec<MethodSummary>,
    pub failures: Vec<ReplicationFailure>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub summary: StudySummary,
    pub rows: Vec<ReplicationRow>,
}

impl StudyReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.summary.methods.iter().find(|s| s.method == m)
    }

    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows_csv(&self.rows, w)
    }

    pub fn write_summary_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.summary)?;
        writeln!(w)?;
        Ok(())
    }
}

pub fn write_rows_csv<W: Write>(rows: &[ReplicationRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn replication_seed(master: u64, rep: usize) -> u64 {
    derive_seed(master, rep as u64)
}

/// Runs one replication: simulate, calibrate, compute every method.
pub fn run_replication(s: &Scenario, cfg: &CalibrationConfig, rep: usize) -> (u64, Vec<Result<IntervalResult>>) {
    let seed = replication_seed(s.master_seed, rep);
    let obs = simulate_seeded(&s.problem, &s.x_true, derive_seed(seed, 0));
    let fail_all = |e: &Error| s.methods.iter().map(|_| Err(Error::InvalidArgument(e.to_string()))).collect();
    let ev = match LlrEvaluator::new(&s.problem, &obs.y) {
        Ok(ev) => ev,
        Err(e) => return (seed, fail_all(&e)),
    };
    let calibration = if s.methods.iter().any(|m| m.is_berger_boos()) {
        match BergerBoosSet::new(&s.problem, &obs.y, s.eta) {
            Ok(set) if set.is_empty() => return (seed, compute_methods(&ev, None, &s.methods, s.alpha, s.eta)),
            Ok(set) => calibrate(&set, s.gamma(), cfg, derive_seed(seed, 1)),
            Err(e) => Err(e),
        }
    } else {
        Err(Error::InvalidArgument("no calibration requested".into()))
    };
    let results = match &calibration {
        Ok(cal) => compute_methods(&ev, Some(cal), &s.methods, s.alpha, s.eta),
        Err(e) => {
            let base = compute_methods(&ev, None, &s.methods, s.alpha, s.eta);
            s.methods
                .iter()
                .zip(base)
                .map(|(m, r)| if m.is_berger_boos() { Err(Error::InvalidArgument(e.to_string())) } else { r })
                .collect()
        }
    };
    (seed, results)
}

/// Runs the cross-validated hyperparameter search once on a pilot
/// observation and pins the result for all replications.
fn pinned_calibration(s: &Scenario) -> Result<(CalibrationConfig, Option<quantiles::GbtParams>)> {
    let mut cfg = s.calibration.clone();
    let needs_search = matches!(&cfg.quantile, QuantileMethod::Regression { grid, .. } if grid.len() > 1);
    if !needs_search || !s.methods.iter().any(|m| m.is_berger_boos()) {
        return Ok((cfg, None));
    }
    let pilot_seed = derive_seed(s.master_seed ^ 0x5049_4c4f_5400_0000, 0);
    let obs = simulate_seeded(&s.problem, &s.x_true, pilot_seed);
    let set = BergerBoosSet::new(&s.problem, &obs.y, s.eta)?;
    let params = pilot_hyperparameters(&set, s.gamma(), &cfg, derive_seed(pilot_seed, 1))?;
    if let (Some(p), QuantileMethod::Regression { grid, .. }) = (params, &mut cfg.quantile) {
        *grid = vec![p];
    }
    Ok((cfg, params))
}

/// Runs all replications of a scenario and aggregates coverage and length.
pub fn run_coverage_study(s: &Scenario) -> Result<StudyReport> {
    s.validate()?;
    let (cfg, pilot_params) = pinned_calibration(s)?;
    if let Some(p) = &pilot_params {
        info!("study={} pilot_params={}", s.name, serde_json::to_string(p)?);
    }
    let mu_true = s.mu_true();
    let done = AtomicUsize::new(0);
    let step = (s.replications / 10).max(1);
    let outcomes: Vec<(u64, Vec<Result<IntervalResult>>)> = (0..s.replications)
        .into_par_iter()
        .map(|rep| {
            let out = run_replication(s, &cfg, rep);
            let d = done.fetch_add(1, Ordering::Relaxed) + 1;
            if d % step == 0 || d == s.replications {
                info!("study={} progress={}/{}", s.name, d, s.replications);
            }
            out
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (rep, (seed, results)) in outcomes.into_iter().enumerate() {
        for (m, r) in s.methods.iter().zip(results) {
            match r {
                Ok(iv) => rows.push(ReplicationRow {
                    scenario: s.name.clone(),
                    method: *m,
                    rep,
                    mu_true,
                    lower: iv.lower,
                    upper: iv.upper,
                    length: iv.length(),
                    covered: iv.covers(mu_true),
                    degenerate: iv.degenerate,
                    n_accepted: iv.n_accepted,
                    seed,
                }),
                Err(e) => failures.push(ReplicationFailure {
                    rep,
                    method: *m,
                    message: e.to_string(),
                }),
            }
        }
    }

    let mut methods = Vec::new();
    for m in &s.methods {
        let mine: Vec<&ReplicationRow> = rows.iter().filter(|r| r.method == *m).collect();
        let failed = failures.iter().filter(|f| f.method == *m).count();
        if failed as f64 > MAX_FAILURE_FRACTION * s.replications as f64 {
            if let Some(f) = failures.iter().find(|f| f.method == *m) {
                warn!("study={} method={} first failure: {}", s.name, m, f.message);
            }
            return Err(Error::StudyAborted {
                failed,
                replications: s.replications,
            });
        }
        methods.push(summarize(*m, &mine, failed));
    }
    let mut notes = Vec::new();
    if s.eta <= ETA_ZERO_SURROGATE {
        notes.push(format!("eta = {} stands in for eta = 0", s.eta));
    }
    Ok(StudyReport {
        summary: StudySummary {
            scenario: s.name.clone(),
            alpha: s.alpha,
            eta: s.eta,
            gamma: s.gamma(),
            mu_true,
            replications: s.replications,
            master_seed: s.master_seed,
            pilot_params,
            methods,
            failures,
            notes,
        },
        rows,
    })
}

fn summarize(method: Method, rows: &[&ReplicationRow], failed: usize) -> MethodSummary {
    let trials = rows.len();
    let covered = rows.iter().filter(|r| r.covered).count();
    let (cp_lower, cp_upper) = if trials > 0 {
        clopper_pearson(covered as u64, trials as u64, 0.95)
    } else {
        (0.0, 1.0)
    };
    let lengths: Vec<f64> = rows.iter().map(|r| r.length).collect();
    let (mean_length, sem_length) = mean_sem(&lengths);
    MethodSummary {
        method,
        trials,
        covered,
        missed: trials - covered,
        failed,
        coverage: if trials > 0 { covered as f64 / trials as f64 } else { f64::NAN },
        cp_lower,
        cp_upper,
        mean_length,
        sem_length,
        degenerate: rows.iter().filter(|r| r.degenerate).count(),
    }
}

/// Base scenario for the η-sweep: the 3D problem with uniform sampling of
/// the Berger–Boos set.
pub fn eta_sweep_scenario() -> Scenario {
    let mut s = scenario_gaussian3d();
    s.name = "eta_sweep".into();
    s.x_true = DVector::from_vec(vec![5.0, 5.0, 0.0]);
    // The importance-like weights vanish this far from the origin.
    s.calibration.sampler = SamplerKind::Auto;
    s.methods = vec![Method::GlobalOptimized];
    s.replications = 100;
    s
}

pub fn default_eta_grid() -> Vec<f64> {
    vec![0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2]
}

pub fn default_sweep_truths() -> Vec<DVector<f64>> {
    [2.0, 3.0, 5.0]
        .iter()
        .map(|&a| DVector::from_vec(vec![a, a, 0.0]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSweepRow {
    pub x_true: Vec<f64>,
    pub eta: f64,
    /// The value actually used; differs from `eta` only at zero.
    pub eta_used: f64,
    pub surrogate: bool,
    pub replications: usize,
    pub failed: usize,
    pub coverage: f64,
    pub mean_length: f64,
    pub sem_length: f64,
}

/// Mean GlobalOptimized length for each truth and η. The same observations
/// are reused across η for a given truth.
pub fn eta_sweep(base: &Scenario, x_trues: &[DVector<f64>], etas: &[f64]) -> Result<Vec<EtaSweepRow>> {
    let mut out = Vec::new();
    for x in x_trues {
        for &eta in etas {
            let surrogate = eta <= 0.0;
            let eta_used = if surrogate { ETA_ZERO_SURROGATE } else { eta };
            let mut s = base.clone();
            s.x_true = x.clone();
            s.eta = eta_used;
            s.methods = vec![Method::GlobalOptimized];
            let rep = run_coverage_study(&s)?;
            let m = &rep.summary.methods[0];
            info!(
                "sweep x_true={:?} eta={} mean_length={:.4} coverage={:.3}",
                x.as_slice(),
                eta,
                m.mean_length,
                m.coverage
            );
            out.push(EtaSweepRow {
                x_true: x.as_slice().to_vec(),
                eta,
                eta_used,
                surrogate,
                replications: s.replications,
                failed: m.failed,
                coverage: m.coverage,
                mean_length: m.mean_length,
                sem_length: m.sem_length,
            });
        }
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(rows: &[EtaSweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["x_true", "eta", "eta_used", "surrogate", "replications", "failed", "coverage", "mean_length", "sem_length"])?;
    for r in rows {
        let x: Vec<String> = r.x_true.iter().map(|v| v.to_string()).collect();
        wr.write_record([
            x.join(" "),
            r.eta.to_string(),
            r.eta_used.to_string(),
            r.surrogate.to_string(),
            r.replications.to_string(),
            r.failed.to_string(),
            r.coverage.to_string(),
            r.mean_length.to_string(),
            r.sem_length.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
