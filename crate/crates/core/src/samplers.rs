//! Design-point samplers over the Berger–Boos set: accept–reject from the
//! pre-image ellipsoid (VGS), Vaidya-walk chains on a bounding polytope, and
//! an importance-like thinning of the polytope draws.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounding_polytope, chebyshev_center, functional_extremes, BergerBoosSet, FunctionalExtremes, Polytope};
use crate::ipm::Row;
use crate::model::gls_estimate;
use crate::stats::derive_seed;

pub const DEFAULT_RADIUS: f64 = 0.5;
pub const DEFAULT_CHAINS: usize = 14;
pub const DEFAULT_REJECT_CAP: u64 = 10_000_000;
pub const DEFAULT_GAMMA_P: f64 = 0.5;
pub const DEFAULT_Q_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Vgs,
    Polytope,
    ImportanceLike,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<DVector<f64>>,
    pub functional_values: Vec<f64>,
    pub provenance: Provenance,
    pub chain_ids: Option<Vec<usize>>,
    /// Step index within each chain (or draw index for VGS).
    pub steps: Vec<usize>,
    /// Proposals or raw draws consumed to produce the batch.
    pub attempts: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            return f64::NAN;
        }
        self.points.len() as f64 / self.attempts as f64
    }

    /// CSV with columns `chain_id, step, x_1..x_p, mu`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let p = self.points.first().map_or(0, |x| x.len());
        let mut header = vec!["chain_id".to_string(), "step".to_string()];
        header.extend((1..=p).map(|i| format!("x_{i}")));
        header.push("mu".into());
        wr.write_record(&header)?;
        for (k, x) in self.points.iter().enumerate() {
            let chain = self.chain_ids.as_ref().map_or(0, |c| c[k]);
            let mut rec = vec![chain.to_string(), self.steps[k].to_string()];
            rec.extend(x.iter().map(|v| format!("{v:.17e}")));
            rec.push(format!("{:.17e}", self.functional_values[k]));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Fraction of `bins` equal-width sub-intervals of `[lo, hi]` that hold at
    /// least one functional value.
    pub fn range_occupancy(&self, lo: f64, hi: f64, bins: usize) -> f64 {
        range_occupancy(&self.functional_values, lo, hi, bins)
    }
}

pub fn range_occupancy(values: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    assert!(bins > 0);
    if !(hi > lo) {
        return if values.iter().any(|v| (v - lo).abs() <= 1e-9 * (1.0 + lo.abs())) { 1.0 } else { 0.0 };
    }
    let mut hit = vec![false; bins];
    let w = (hi - lo) / bins as f64;
    for &v in values {
        if v < lo - 1e-12 * w || v > hi + 1e-12 * w {
            continue;
        }
        let idx = (((v - lo) / w).floor().max(0.0) as usize).min(bins - 1);
        hit[idx] = true;
    }
    hit.iter().filter(|h| **h).count() as f64 / bins as f64
}

/// Uniform draw from the unit `p`-ball: normalise a `(p+2)`-dimensional
/// Gaussian and keep the first `p` coordinates.
pub fn vgs_ball<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DVector<f64> {
    assert!(p >= 1);
    loop {
        let z: Vec<f64> = (0..p + 2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return DVector::from_iterator(p, z[..p].iter().map(|v| v / norm));
        }
    }
}

/// Maps unit-ball draws onto the pre-image ellipsoid.
#[derive(Debug, Clone)]
pub struct EllipsoidMap {
    pub center: DVector<f64>,
    /// `√(t − r²_GLS) · P Ω^{-1/2}`
    pub transform: DMatrix<f64>,
    pub radius_sq: f64,
}

impl EllipsoidMap {
    /// `{x : ‖y − Kx‖² ≤ t}` written as `x̂_GLS + √(t − r²) P Ω^{-1/2} B`.
    pub fn new(set: &BergerBoosSet<'_>) -> Result<Self> {
        let problem = set.problem();
        let center = gls_estimate(problem, set.y())?;
        let r2 = problem.residual_sq(set.y(), &center);
        let radius_sq = set.threshold() - r2;
        if radius_sq <= 0.0 {
            return Err(Error::EmptyBergerBoosSet);
        }
        let eig = problem.eigen();
        let p = problem.p();
        let mut transform = eig.vectors.clone();
        for j in 0..p {
            let s = radius_sq.sqrt() / eig.values[j].sqrt();
            transform.column_mut(j).scale_mut(s);
        }
        Ok(EllipsoidMap {
            center,
            transform,
            radius_sq,
        })
    }

    pub fn map(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.transform * u + &self.center
    }
}

/// Accept–reject sampling of `B_η` from its pre-image ellipsoid.
pub fn vgs_sample<R: Rng + ?Sized>(set: &BergerBoosSet<'_>, m: usize, rng: &mut R, reject_cap: u64) -> Result<SampleBatch> {
    let problem = set.problem();
    let ell = EllipsoidMap::new(set)?;
    let p = problem.p();
    let x_poly = problem.constraints();
    let mut points = Vec::with_capacity(m);
    let mut rejected = 0u64;
    let mut attempts = 0u64;
    while points.len() < m {
        let w = ell.map(&vgs_ball(p, rng));
        attempts += 1;
        if x_poly.contains(&w) {
            points.push(w);
        } else {
            rejected += 1;
            if rejected > reject_cap {
                return Err(Error::VgsAcceptanceTooLow);
            }
        }
    }
    let functional_values = points.iter().map(|x| problem.phi(x)).collect();
    Ok(SampleBatch {
        functional_values,
        steps: (0..points.len()).collect(),
        points,
        provenance: Provenance::Vgs,
        chain_ids: None,
        attempts,
    })
}

/// Vaidya-walk kernel for a fixed polytope. Axis-aligned faces are handled
/// as diagonal terms and the remaining faces as a dense block.
#[derive(Debug, Clone)]
pub struct VaidyaWalk {
    p: usize,
    d: usize,
    beta: f64,
    axis: Vec<(usize, f64, f64)>,
    dense_a: DMatrix<f64>,
    dense_b: DVector<f64>,
}

/// Current state of a walk with its cached metric.
#[derive(Debug, Clone)]
pub struct WalkState {
    pub x: DVector<f64>,
    metric: Metric,
}

#[derive(Debug, Clone)]
struct Metric {
    v: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    half_logdet: f64,
}

impl VaidyaWalk {
    pub fn new(poly: &Polytope) -> Self {
        let p = poly.dim();
        let d = poly.n_faces();
        let mut axis = Vec::new();
        let mut dense_idx = Vec::new();
        for (i, row) in poly.rows().iter().enumerate() {
            match row {
                Row::Axis { j, coef } => axis.push((*j, *coef, poly.b()[i])),
                Row::Dense(_) => dense_idx.push(i),
            }
        }
        let dense_a = DMatrix::from_fn(dense_idx.len(), p, |r, c| poly.a()[(dense_idx[r], c)]);
        let dense_b = DVector::from_iterator(dense_idx.len(), dense_idx.iter().map(|&i| poly.b()[i]));
        VaidyaWalk {
            p,
            d,
            beta: p as f64 / d.max(1) as f64,
            axis,
            dense_a,
            dense_b,
        }
    }

    fn strictly_inside(&self, x: &DVector<f64>) -> bool {
        self.axis.iter().all(|&(j, c, b)| b - c * x[j] > 0.0)
            && (&self.dense_b - &self.dense_a * x).iter().all(|s| *s > 0.0)
    }

    /// `V(x) = Σ (σᵢ + β) aᵢaᵢᵀ / sᵢ²` with leverage scores `σᵢ` of `S⁻¹A`.
    fn metric(&self, x: &DVector<f64>) -> Option<Metric> {
        let p = self.p;
        let axis_s: Vec<f64> = self.axis.iter().map(|&(j, c, b)| b - c * x[j]).collect();
        let dense_s = &self.dense_b - &self.dense_a * x;
        if axis_s.iter().chain(dense_s.iter()).any(|s| !(*s > 0.0)) {
            return None;
        }
        // Slack-scaled dense block.
        let mut scaled = self.dense_a.clone();
        for (i, s) in dense_s.iter().enumerate() {
            scaled.row_mut(i).scale_mut(1.0 / s);
        }
        let mut axis_diag = DVector::<f64>::zeros(p);
        for (&(j, c, _), s) in self.axis.iter().zip(&axis_s) {
            axis_diag[j] += c * c / (s * s);
        }
        let mut g = scaled.transpose() * &scaled;
        for j in 0..p {
            g[(j, j)] += axis_diag[j];
        }
        let g_inv = robust_inverse(g)?;
        // Leverage scores.
        let sg = &scaled * &g_inv;
        let lev_dense: Vec<f64> = (0..scaled.nrows()).map(|i| sg.row(i).dot(&scaled.row(i))).collect();
        let mut weighted = scaled;
        for (i, l) in lev_dense.iter().enumerate() {
            weighted.row_mut(i).scale_mut((l + self.beta).sqrt());
        }
        let mut v = weighted.transpose() * &weighted;
        for (&(j, c, _), s) in self.axis.iter().zip(&axis_s) {
            let w = c * c / (s * s);
            let lev = w * g_inv[(j, j)];
            v[(j, j)] += (lev + self.beta) * w;
        }
        let chol = nalgebra::Cholesky::new(v.clone())?;
        let chol_l = chol.l();
        let half_logdet = chol_l.diagonal().iter().map(|d| d.ln()).sum();
        Some(Metric { v, chol_l, half_logdet })
    }

    pub fn state(&self, x: &DVector<f64>) -> Result<WalkState> {
        if x.len() != self.p {
            return Err(Error::Dimension("walk state has wrong length".into()));
        }
        let metric = self.metric(x).ok_or(Error::InvalidWalkState)?;
        Ok(WalkState { x: x.clone(), metric })
    }

    /// Proposal scale `r² / √(d p)`.
    fn scale(&self, radius: f64) -> f64 {
        radius * radius / ((self.d * self.p) as f64).sqrt()
    }

    /// One Metropolis–Hastings step; returns whether the proposal was accepted.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut WalkState, radius: f64, rng: &mut R) -> bool {
        let c = self.scale(radius);
        let xi = DVector::from_fn(self.p, |_, _| rng.sample::<f64, _>(StandardNormal));
        // z = x + √c L⁻ᵀ ξ  gives covariance c V⁻¹.
        let dir = state
            .metric
            .chol_l
            .transpose()
            .solve_upper_triangular(&xi)
            .expect("cholesky factor is nonsingular");
        let z = &state.x + dir * c.sqrt();
        let u: f64 = rng.random();
        if !self.strictly_inside(&z) {
            return false;
        }
        let Some(mz) = self.metric(&z) else {
            return false;
        };
        let back = &state.x - &z;
        let quad_back = back.dot(&(&mz.v * &back)) / c;
        let log_ratio = (mz.half_logdet - 0.5 * quad_back) - (state.metric.half_logdet - 0.5 * xi.norm_squared());
        if u.ln() < log_ratio {
            state.x = z;
            state.metric = mz;
            true
        } else {
            false
        }
    }
}

fn robust_inverse(g: DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = nalgebra::Cholesky::new(g.clone()) {
        return Some(ch.inverse());
    }
    let scale = g.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut ridge = 1e-12 * scale;
    for _ in 0..8 {
        let mut gr = g.clone();
        for j in 0..gr.nrows() {
            gr[(j, j)] += ridge;
        }
        if let Some(ch) = nalgebra::Cholesky::new(gr) {
            return Some(ch.inverse());
        }
        ridge *= 100.0;
    }
    None
}

/// One stateless Vaidya step from `x`.
pub fn vaidya_step<R: Rng + ?Sized>(poly: &Polytope, x: &DVector<f64>, radius: f64, rng: &mut R) -> Result<(DVector<f64>, bool)> {
    let walk = VaidyaWalk::new(poly);
    let mut st = walk.state(x)?;
    let acc = walk.step(&mut st, radius, rng);
    Ok((st.x, acc))
}

/// Uniform grid `linspace(0.05, 0.95, C/2)`.
pub fn default_taus(chains: usize) -> Vec<f64> {
    let k = chains / 2;
    match k {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..k).map(|i| 0.05 + 0.9 * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Starting points on the segments from the Chebyshev center to the
/// functional extremes.
pub fn chain_starts(set: &BergerBoosSet<'_>, poly: &Polytope, chains: usize, taus: &[f64]) -> Result<Vec<DVector<f64>>> {
    let (xc, r) = chebyshev_center(poly)?;
    let fe = functional_extremes(set)?;
    chain_starts_from(poly, &xc, r, &fe, chains, taus)
}

fn chain_starts_from(
    poly: &Polytope,
    xc: &DVector<f64>,
    r: f64,
    fe: &FunctionalExtremes,
    chains: usize,
    taus: &[f64],
) -> Result<Vec<DVector<f64>>> {
    if chains == 0 || chains % 2 != 0 {
        return Err(Error::InvalidArgument(format!("chain count {chains} must be positive and even")));
    }
    if taus.len() != chains / 2 || taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::InvalidArgument("need C/2 taus in (0,1)".into()));
    }
    let mut starts = Vec::with_capacity(chains);
    for k in 1..=chains {
        let tau = taus[(k + 1) / 2 - 1];
        let end = if k % 2 == 1 { &fe.x_lower } else { &fe.x_upper };
        let mut x = end * tau + xc * (1.0 - tau);
        let mut step = 1e-6 * r;
        let mut guard = 0;
        while !poly.contains_strictly(&x) {
            let to_c = xc - &x;
            let dist = to_c.norm();
            if dist <= step || guard > 60 {
                x = xc.clone();
                break;
            }
            x += to_c * (step / dist);
            step *= 2.0;
            guard += 1;
        }
        starts.push(x);
    }
    Ok(starts)
}

/// A bounding polytope with its Chebyshev ball, extremes and chain starts.
#[derive(Debug, Clone)]
pub struct PreparedPolytope {
    pub polytope: Polytope,
    pub center: DVector<f64>,
    pub radius: f64,
    pub extremes: FunctionalExtremes,
    pub starts: Vec<DVector<f64>>,
    walk: VaidyaWalk,
}

impl PreparedPolytope {
    pub fn new<R: Rng + ?Sized>(set: &BergerBoosSet<'_>, chains: usize, n_random: usize, rng: &mut R) -> Result<Self> {
        let polytope = bounding_polytope(set, n_random, rng)?;
        let (center, radius) = chebyshev_center(&polytope)?;
        let extremes = functional_extremes(set)?;
        let starts = chain_starts_from(&polytope, &center, radius, &extremes, chains, &default_taus(chains))?;
        let walk = VaidyaWalk::new(&polytope);
        Ok(PreparedPolytope {
            polytope,
            center,
            radius,
            extremes,
            starts,
            walk,
        })
    }

    pub fn walk(&self) -> &VaidyaWalk {
        &self.walk
    }
}

/// Independent chains that can be advanced in rounds.
pub struct ChainSet<'p> {
    prepared: &'p PreparedPolytope,
    states: Vec<WalkState>,
    rngs: Vec<ChaCha8Rng>,
    steps_done: usize,
    radius: f64,
    accepted: u64,
    proposed: u64,
}

impl<'p> ChainSet<'p> {
    pub fn new(prepared: &'p PreparedPolytope, radius: f64, seed: u64) -> Result<Self> {
        let states = prepared
            .starts
            .iter()
            .map(|s| prepared.walk.state(s))
            .collect::<Result<Vec<_>>>()?;
        let rngs = (0..states.len())
            .map(|c| ChaCha8Rng::seed_from_u64(derive_seed(seed, c as u64)))
            .collect();
        Ok(ChainSet {
            prepared,
            states,
            rngs,
            steps_done: 0,
            radius,
            accepted: 0,
            proposed: 0,
        })
    }

    /// Advances every chain `steps` times; returns `(chain, step, x)` in
    /// chain-major order.
    pub fn advance(&mut self, steps: usize) -> Vec<(usize, usize, DVector<f64>)> {
        let walk = &self.prepared.walk;
        let radius = self.radius;
        let start = self.steps_done;
        let results: Vec<(Vec<DVector<f64>>, u64)> = self
            .states
            .par_iter_mut()
            .zip(self.rngs.par_iter_mut())
            .map(|(st, rng)| {
                let mut out = Vec::with_capacity(steps);
                let mut acc = 0u64;
                for _ in 0..steps {
                    if walk.step(st, radius, rng) {
                        acc += 1;
                    }
                    debug_assert!(walk.strictly_inside(&st.x));
                    out.push(st.x.clone());
                }
                (out, acc)
            })
            .collect();
        self.steps_done += steps;
        let mut flat = Vec::with_capacity(steps * results.len());
        for (c, (pts, acc)) in results.into_iter().enumerate() {
            self.accepted += acc;
            self.proposed += steps as u64;
            for (s, x) in pts.into_iter().enumerate() {
                flat.push((c, start + s, x));
            }
        }
        flat
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposed.max(1) as f64
    }
}

/// Runs `chains` Vaidya walks of `m_p` steps each on the bounding polytope
/// of `set` and concatenates all visited states.
pub fn polytope_sample<R: Rng + ?Sized>(
    set: &BergerBoosSet<'_>,
    chains: usize,
    m_p: usize,
    radius: f64,
    n_random: usize,
    rng: &mut R,
) -> Result<SampleBatch> {
    let prepared = PreparedPolytope::new(set, chains, n_random, rng)?;
    sample_prepared(set, &prepared, m_p, radius, rng.next_u64())
}

pub fn sample_prepared(
    set: &BergerBoosSet<'_>,
    prepared: &PreparedPolytope,
    m_p: usize,
    radius: f64,
    seed: u64,
) -> Result<SampleBatch> {
    let mut chains = ChainSet::new(prepared, radius, seed)?;
    let draws = chains.advance(m_p);
    let problem = set.problem();
    let mut batch = SampleBatch {
        points: Vec::with_capacity(draws.len()),
        functional_values: Vec::with_capacity(draws.len()),
        provenance: Provenance::Polytope,
        chain_ids: Some(Vec::with_capacity(draws.len())),
        steps: Vec::with_capacity(draws.len()),
        attempts: draws.len() as u64,
    };
    for (c, s, x) in draws {
        batch.functional_values.push(problem.phi(&x));
        batch.chain_ids.as_mut().unwrap().push(c);
        batch.steps.push(s);
        batch.points.push(x);
    }
    Ok(batch)
}

/// `(Σ|xᵢ|^q)^{1/q}`
pub fn quasi_norm(x: &DVector<f64>, q: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Thins polytope draws, keeping `x` with probability `exp(−γ_p ‖x‖_q)`,
/// until `m` points are kept.
pub fn importance_like_sample<R: Rng + ?Sized>(
    set: &BergerBoosSet<'_>,
    m: usize,
    gamma_p: f64,
    q_norm: f64,
    chains: usize,
    radius: f64,
    n_random: usize,
    rng: &mut R,
) -> Result<SampleBatch> {
    let prepared = PreparedPolytope::new(set, chains, n_random, rng)?;
    importance_like_prepared(set, &prepared, m, gamma_p, q_norm, radius, rng)
}

pub fn importance_like_prepared<R: Rng + ?Sized>(
    set: &BergerBoosSet<'_>,
    prepared: &PreparedPolytope,
    m: usize,
    gamma_p: f64,
    q_norm: f64,
    radius: f64,
    rng: &mut R,
) -> Result<SampleBatch> {
    if !(q_norm > 0.0) || !(gamma_p >= 0.0) {
        return Err(Error::InvalidArgument("importance-like sampler needs q > 0 and gamma_p >= 0".into()));
    }
    let problem = set.problem();
    let mut chains = ChainSet::new(prepared, radius, rng.next_u64())?;
    let mut thin_rng = ChaCha8Rng::seed_from_u64(rng.next_u64());
    let n_chains = prepared.starts.len();
    let cap = (m as u64).saturating_mul(100_000).max(1_000_000);
    let mut batch = SampleBatch {
        points: Vec::with_capacity(m),
        functional_values: Vec::with_capacity(m),
        provenance: Provenance::ImportanceLike,
        chain_ids: Some(Vec::with_capacity(m)),
        steps: Vec::with_capacity(m),
        attempts: 0,
    };
    while batch.points.len() < m {
        let need = m - batch.points.len();
        let per_chain = need.div_ceil(n_chains).max(1);
        for (c, s, x) in chains.advance(per_chain) {
            batch.attempts += 1;
            let keep = (-gamma_p * quasi_norm(&x, q_norm)).exp();
            if thin_rng.random::<f64>() < keep && batch.points.len() < m {
                batch.functional_values.push(problem.phi(&x));
                batch.chain_ids.as_mut().unwrap().push(c);
                batch.steps.push(s);
                batch.points.push(x);
            }
        }
        if batch.attempts > cap {
            return Err(Error::ImportanceAcceptanceTooLow);
        }
    }
    Ok(batch)
}
