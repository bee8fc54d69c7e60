//! The linear-Gaussian inverse problem `y = Kx + ε`, `ε ~ N(0, Σ)`, `x ∈ X`,
//! with a linear functional `φ(x) = hᵀx` of interest.

use std::sync::OnceLock;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::Polytope;

/// Relative cut below which eigenvalues of `KᵀK` count as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LinearGaussianProblem {
    k: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    /// Accumulated lower Cholesky factor mapping whitened data back to raw data.
    whitener: DMatrix<f64>,
    whitened: bool,
    constraints: Polytope,
    h: DVector<f64>,
    cache: Cache,
}

#[derive(Debug, Clone, Default)]
struct Cache {
    gram_flat: OnceLock<Vec<f64>>,
    eig: OnceLock<EigenStructure>,
    functional_range: OnceLock<Result<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub y: DVector<f64>,
    pub true_x: Option<DVector<f64>>,
    pub seed: Option<u64>,
}

/// Eigendecomposition `KᵀK = P Ω Pᵀ` of the whitened normal matrix.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    pub vectors: DMatrix<f64>,
    /// Descending, clamped at zero.
    pub values: DVector<f64>,
    pub numerical_rank: usize,
}

fn check_spd(sigma: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = sigma.nrows();
    let scale = sigma.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::CovarianceNotSpd);
            }
        }
    }
    nalgebra::Cholesky::new(sigma.clone()).ok_or(Error::CovarianceNotSpd)
}

impl LinearGaussianProblem {
    /// Builds and whitens a problem.
    pub fn new(
        k: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        constraints: Polytope,
        h: DVector<f64>,
    ) -> Result<Self> {
        Self::new_raw(k, noise_cov, constraints, h)?.whiten()
    }

    /// Builds a problem with `Σ = I`.
    pub fn with_identity_noise(k: DMatrix<f64>, constraints: Polytope, h: DVector<f64>) -> Result<Self> {
        let n = k.nrows();
        Self::new(k, DMatrix::identity(n, n), constraints, h)
    }

    /// Builds a problem without whitening; call [`whiten`](Self::whiten)
    /// before handing it to the solvers.
    pub fn new_raw(
        k: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        constraints: Polytope,
        h: DVector<f64>,
    ) -> Result<Self> {
        let (n, p) = k.shape();
        if n == 0 || p == 0 {
            return Err(Error::Dimension("forward matrix must be non-empty".into()));
        }
        if noise_cov.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "noise covariance is {}x{}, expected {n}x{n}",
                noise_cov.nrows(),
                noise_cov.ncols()
            )));
        }
        if h.len() != p {
            return Err(Error::Dimension(format!("functional has {} entries, expected {p}", h.len())));
        }
        if constraints.dim() != p {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} columns, expected {p}",
                constraints.dim()
            )));
        }
        if k.iter().chain(noise_cov.iter()).chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite problem entry".into()));
        }
        check_spd(&noise_cov)?;
        Ok(LinearGaussianProblem {
            k,
            noise_cov,
            whitener: DMatrix::identity(n, n),
            whitened: false,
            constraints,
            h,
            cache: Cache::default(),
        })
    }

    /// Returns the problem with `K ← L⁻¹K` and `Σ ← I`, where `LLᵀ = Σ`.
    pub fn whiten(&self) -> Result<Self> {
        let chol = check_spd(&self.noise_cov)?;
        let l = chol.l();
        let k = l
            .solve_lower_triangular(&self.k)
            .ok_or(Error::CovarianceNotSpd)?;
        let n = self.n();
        Ok(LinearGaussianProblem {
            k,
            noise_cov: DMatrix::identity(n, n),
            whitener: &self.whitener * l,
            whitened: true,
            constraints: self.constraints.clone(),
            h: self.h.clone(),
            cache: Cache::default(),
        })
    }

    /// Maps a raw observation into the whitened frame of this problem.
    pub fn whiten_observation(&self, y_raw: &DVector<f64>) -> Result<DVector<f64>> {
        if y_raw.len() != self.n() {
            return Err(Error::Dimension(format!(
                "observation has {} entries, expected {}",
                y_raw.len(),
                self.n()
            )));
        }
        self.whitener
            .solve_lower_triangular(y_raw)
            .ok_or(Error::CovarianceNotSpd)
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn p(&self) -> usize {
        self.k.ncols()
    }

    pub fn forward(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn constraints(&self) -> &Polytope {
        &self.constraints
    }

    pub fn functional(&self) -> &DVector<f64> {
        &self.h
    }

    pub fn is_whitened(&self) -> bool {
        self.whitened
    }

    /// `hᵀx`
    pub fn phi(&self, x: &DVector<f64>) -> f64 {
        self.h.dot(x)
    }

    /// `‖y − Kx‖²`
    pub fn residual_sq(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        (y - &self.k * x).norm_squared()
    }

    /// Row-major `KᵀK` (of the whitened operator).
    pub(crate) fn gram_flat(&self) -> &[f64] {
        self.cache.gram_flat.get_or_init(|| {
            let g = self.normal_matrix();
            let p = self.p();
            let mut v = Vec::with_capacity(p * p);
            for i in 0..p {
                for j in 0..p {
                    v.push(g[(i, j)]);
                }
            }
            v
        })
    }

    /// `KᵀΣ⁻¹K`.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        if self.whitened {
            self.k.transpose() * &self.k
        } else {
            let chol = nalgebra::Cholesky::new(self.noise_cov.clone()).expect("checked at construction");
            let kw = chol.l().solve_lower_triangular(&self.k).expect("triangular solve");
            kw.transpose() * kw
        }
    }

    pub fn eigen(&self) -> &EigenStructure {
        self.cache.eig.get_or_init(|| eigendecompose(self))
    }

    /// `(min, max)` of `hᵀx` over `X`; infinite ends where `X` is unbounded.
    pub fn functional_range(&self) -> Result<(f64, f64)> {
        self.cache
            .functional_range
            .get_or_init(|| crate::optim::linear_range_over_constraints(self, &self.h))
            .clone()
    }

    /// Noise-free data `Kx`.
    pub fn noiseless(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.k * x
    }
}

/// Simulates `y = K x_true + ε` with standard normal `ε` (whitened frame).
pub fn simulate<R: Rng + ?Sized>(problem: &LinearGaussianProblem, x_true: &DVector<f64>, rng: &mut R) -> Observation {
    warn_if_outside(problem, x_true);
    let mut y = problem.noiseless(x_true);
    for v in y.iter_mut() {
        *v += rng.sample::<f64, _>(StandardNormal);
    }
    Observation {
        y,
        true_x: Some(x_true.clone()),
        seed: None,
    }
}

/// [`simulate`] with a dedicated ChaCha stream for `seed`.
pub fn simulate_seeded(problem: &LinearGaussianProblem, x_true: &DVector<f64>, seed: u64) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = simulate(problem, x_true, &mut rng);
    obs.seed = Some(seed);
    obs
}

/// Zero-noise observation `y = K x_true`.
pub fn simulate_noiseless(problem: &LinearGaussianProblem, x_true: &DVector<f64>) -> Observation {
    warn_if_outside(problem, x_true);
    Observation {
        y: problem.noiseless(x_true),
        true_x: Some(x_true.clone()),
        seed: None,
    }
}

fn warn_if_outside(problem: &LinearGaussianProblem, x: &DVector<f64>) {
    if !problem.constraints().contains(x) {
        warn!("simulating from a parameter outside the constraint set");
    }
}

/// Unconstrained generalized least squares estimate.
pub fn gls_estimate(problem: &LinearGaussianProblem, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "observation has {} entries, expected {}",
            y.len(),
            problem.n()
        )));
    }
    if problem.eigen().numerical_rank < problem.p() {
        return Err(Error::GlsUndefined);
    }
    let rhs = if problem.is_whitened() {
        problem.forward().transpose() * y
    } else {
        let chol = nalgebra::Cholesky::new(problem.noise_cov().clone()).ok_or(Error::CovarianceNotSpd)?;
        problem.forward().transpose() * chol.solve(y)
    };
    let chol = nalgebra::Cholesky::new(problem.normal_matrix()).ok_or(Error::GlsUndefined)?;
    Ok(chol.solve(&rhs))
}

/// Eigendecomposition of `KᵀΣ⁻¹K`, sorted descending.
pub fn eigendecompose(problem: &LinearGaussianProblem) -> EigenStructure {
    let g = problem.normal_matrix();
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i].max(0.0)));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    let numerical_rank = values.iter().filter(|&&w| w > RANK_TOL * max).count();
    EigenStructure {
        vectors,
        values,
        numerical_rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn free(p: usize) -> Polytope {
        Polytope::unconstrained(p)
    }

    #[test]
    fn identity_covariance_leaves_k() {
        let k = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let pr = LinearGaussianProblem::new(k.clone(), DMatrix::identity(2, 2), free(3), DVector::zeros(3)).unwrap();
        assert_eq!(pr.forward(), &k);
    }

    #[test]
    fn scalar_whitening() {
        let pr = LinearGaussianProblem::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 4.0),
            free(1),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((pr.forward()[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(pr.noise_cov()[(0, 0)], 1.0);
    }

    #[test]
    fn correlated_whitening_matches_inverse() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let pr = LinearGaussianProblem::new(DMatrix::identity(2, 2), sigma.clone(), free(2), DVector::zeros(2)).unwrap();
        let g = pr.forward().transpose() * pr.forward();
        let inv = sigma.try_inverse().unwrap();
        assert!((g - inv).amax() < 1e-12);
    }

    #[test]
    fn whitening_is_idempotent() {
        let sigma = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, 0.5, 1.0]);
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]);
        let once = LinearGaussianProblem::new(k, sigma, free(2), DVector::zeros(2)).unwrap();
        let twice = once.whiten().unwrap();
        assert!((once.forward() - twice.forward()).amax() < 1e-12);
        let y = DVector::from_vec(vec![1.0, -2.0]);
        assert!((once.whiten_observation(&y).unwrap() - twice.whiten_observation(&y).unwrap()).amax() < 1e-12);
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = LinearGaussianProblem::new(DMatrix::identity(2, 2), sigma, free(2), DVector::zeros(2)).unwrap_err();
        assert_eq!(err, Error::CovarianceNotSpd);
        assert_eq!(err.to_string(), "covariance not SPD");
    }

    #[test]
    fn dimension_checks() {
        let r = LinearGaussianProblem::with_identity_noise(DMatrix::identity(2, 2), free(2), DVector::zeros(3));
        assert!(matches!(r, Err(Error::Dimension(_))));
        let r = LinearGaussianProblem::with_identity_noise(DMatrix::identity(2, 2), free(3), DVector::zeros(2));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn noiseless_simulation() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::identity(2, 2),
            Polytope::nonnegative_orthant(2),
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        assert_eq!(simulate_noiseless(&pr, &x).y, x);
    }

    #[test]
    fn simulation_mean_matches_clt() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::identity(2, 2),
            Polytope::nonnegative_orthant(2),
            DVector::from_vec(vec![1.0, -1.0]),
        )
        .unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut acc = DVector::zeros(2);
        for _ in 0..n {
            acc += simulate(&pr, &x, &mut rng).y;
        }
        acc /= n as f64;
        for i in 0..2 {
            assert!((acc[i] - 0.5).abs() < 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn seeded_simulation_is_deterministic() {
        let pr = LinearGaussianProblem::with_identity_noise(DMatrix::identity(3, 3), free(3), DVector::zeros(3)).unwrap();
        let x = DVector::from_element(3, 1.0);
        let a = simulate_seeded(&pr, &x, 5);
        let b = simulate_seeded(&pr, &x, 5);
        assert_eq!(a.y, b.y);
        assert_eq!(a.seed, Some(5));
    }

    #[test]
    fn gls_examples() {
        let pr = LinearGaussianProblem::with_identity_noise(DMatrix::identity(2, 2), free(2), DVector::zeros(2)).unwrap();
        let y = DVector::from_vec(vec![0.3, -4.0]);
        assert!((gls_estimate(&pr, &y).unwrap() - &y).amax() < 1e-14);

        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            free(1),
            DVector::from_element(1, 1.0),
        )
        .unwrap();
        let x = gls_estimate(&pr, &DVector::from_vec(vec![1.0, 3.0])).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gls_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let pr = LinearGaussianProblem::with_identity_noise(k.clone(), free(3), DVector::zeros(3)).unwrap();
        let x = gls_estimate(&pr, &y).unwrap();
        let oracle = (k.transpose() * &k).try_inverse().unwrap() * k.transpose() * &y;
        assert!((x - &oracle).amax() < 1e-8);
        let grad = k.transpose() * (&y - &k * oracle);
        assert!(grad.norm() < 1e-8);
    }

    #[test]
    fn gls_rank_deficient() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            free(2),
            DVector::zeros(2),
        )
        .unwrap();
        let err = gls_estimate(&pr, &DVector::from_element(1, 1.0)).unwrap_err();
        assert_eq!(err.to_string(), "GLS undefined; use constrained_lsq or polytope faces");
    }

    #[test]
    fn eigen_examples() {
        let pr = LinearGaussianProblem::with_identity_noise(DMatrix::identity(2, 2), free(2), DVector::zeros(2)).unwrap();
        let e = eigendecompose(&pr);
        assert_eq!(e.numerical_rank, 2);
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);

        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            free(2),
            DVector::zeros(2),
        )
        .unwrap();
        let e = eigendecompose(&pr);
        assert_eq!(e.numerical_rank, 1);
        assert!((e.values[0] - 2.0).abs() < 1e-12);
        assert!(e.values[1].abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstruction_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..100 {
            let n = 2 + trial % 5;
            let p = 1 + (trial * 7) % 6;
            let k = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let pr = LinearGaussianProblem::with_identity_noise(k.clone(), free(p), DVector::zeros(p)).unwrap();
            let e = eigendecompose(&pr);
            let ptp = e.vectors.transpose() * &e.vectors;
            assert!((ptp - DMatrix::identity(p, p)).amax() <= 1e-10);
            let rec = &e.vectors * DMatrix::from_diagonal(&e.values) * e.vectors.transpose();
            let g = k.transpose() * &k;
            let max = e.values[0];
            assert!((rec - g).amax() <= 1e-8 * (1.0 + max));
            for w in e.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }
}
