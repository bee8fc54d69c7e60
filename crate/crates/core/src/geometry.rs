//! Polytopes, the Berger–Boos set `B_η = {x ∈ X : ‖y − Kx‖² ≤ χ²_{n,η}}`,
//! its bounding polytope, Chebyshev centers and functional extremes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ipm::{self, Program, Row, Settings};
use crate::model::{LinearGaussianProblem, RANK_TOL};
use crate::optim::{self, ConstrainedFit, BOX_RADIUS};

pub use crate::stats::{chi2_quantile, chi2_upper_quantile};

/// Absolute slack allowed by membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Half-space representation `{x : Ax ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    rows: Vec<Row>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} rows but offset vector has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN in polytope".into()));
        }
        let mut rows = Vec::with_capacity(a.nrows());
        for i in 0..a.nrows() {
            let r: Vec<f64> = a.row(i).iter().copied().collect();
            if r.iter().all(|v| *v == 0.0) {
                return Err(Error::InvalidArgument(format!("constraint row {i} is zero")));
            }
            rows.push(Row::from_dense(&r));
        }
        Ok(Polytope { a, b, rows })
    }

    /// Builds from `(aᵢ, bᵢ)` pairs in dimension `p`.
    pub fn from_rows(p: usize, faces: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut a = DMatrix::zeros(faces.len(), p);
        let mut b = DVector::zeros(faces.len());
        for (i, (row, off)) in faces.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Dimension(format!("face {i} has {} entries, expected {p}", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                a[(i, j)] = *v;
            }
            b[i] = *off;
        }
        Polytope::new(a, b)
    }

    /// `ℝ^p` (no faces).
    pub fn unconstrained(p: usize) -> Self {
        Polytope {
            a: DMatrix::zeros(0, p),
            b: DVector::zeros(0),
            rows: vec![],
        }
    }

    /// `{x : x ≥ 0}`
    pub fn nonnegative_orthant(p: usize) -> Self {
        Polytope::new(-DMatrix::identity(p, p), DVector::zeros(p)).expect("orthant is valid")
    }

    /// `{x : lo ≤ xᵢ ≤ hi}`
    pub fn hyperrectangle(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let p = lo.len();
        if hi.len() != p {
            return Err(Error::Dimension("box bounds differ in length".into()));
        }
        let mut faces = Vec::with_capacity(2 * p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            faces.push((e.clone(), hi[j]));
            e[j] = -1.0;
            faces.push((e, -lo[j]));
        }
        Polytope::from_rows(p, &faces)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_faces(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub(crate) fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// `b − Ax`
    pub fn slacks(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.n_faces(),
            self.rows.iter().zip(self.b.iter()).map(|(r, b)| b - r.dot(x.as_slice())),
        )
    }

    /// `Ax ≤ b + 1e-9` coordinatewise.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.rows
            .iter()
            .zip(self.b.iter())
            .all(|(r, b)| r.dot(x.as_slice()) <= b + MEMBERSHIP_TOL)
    }

    /// All slacks strictly positive.
    pub fn contains_strictly(&self, x: &DVector<f64>) -> bool {
        self.rows.iter().zip(self.b.iter()).all(|(r, b)| r.dot(x.as_slice()) < *b)
    }
}

/// `B_η` anchored at an observation.
#[derive(Debug, Clone)]
pub struct BergerBoosSet<'a> {
    problem: &'a LinearGaussianProblem,
    y: DVector<f64>,
    eta: f64,
    threshold: f64,
    fit: ConstrainedFit,
}

impl<'a> BergerBoosSet<'a> {
    /// Threshold `χ²_{n,η}`, the upper-η quantile.
    pub fn new(problem: &'a LinearGaussianProblem, y: &DVector<f64>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidArgument(format!("eta = {eta} must lie in (0,1)")));
        }
        let threshold = chi2_upper_quantile(problem.n() as u32, eta);
        Self::build(problem, y, eta, threshold)
    }

    /// Explicit threshold; `eta` is recorded as the matching upper tail.
    pub fn with_threshold(problem: &'a LinearGaussianProblem, y: &DVector<f64>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidArgument(format!("threshold = {threshold} must be positive")));
        }
        let eta = crate::stats::chi2_sf(problem.n() as u32, threshold);
        Self::build(problem, y, eta, threshold)
    }

    fn build(problem: &'a LinearGaussianProblem, y: &DVector<f64>, eta: f64, threshold: f64) -> Result<Self> {
        let fit = optim::constrained_fit(problem, y)?;
        Ok(BergerBoosSet {
            problem,
            y: y.clone(),
            eta,
            threshold,
            fit,
        })
    }

    pub fn problem(&self) -> &'a LinearGaussianProblem {
        self.problem
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Constrained least-squares fit `(x̂_c, s²)` of the anchoring data.
    pub fn fit(&self) -> &ConstrainedFit {
        &self.fit
    }

    pub fn is_empty(&self) -> bool {
        self.fit.s2 > self.threshold + MEMBERSHIP_TOL
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        bb_membership(self, x)
    }
}

/// `x ∈ X` and `‖y − Kx‖² ≤ threshold` (both with 1e-9 slack).
pub fn bb_membership(set: &BergerBoosSet<'_>, x: &DVector<f64>) -> bool {
    set.problem.constraints().contains(x) && set.problem.residual_sq(&set.y, x) <= set.threshold + MEMBERSHIP_TOL
}

/// `max_{x ∈ B_η} aᵀx` with its maximizer.
pub fn support_point(set: &BergerBoosSet<'_>, a: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if a.len() != set.problem.p() {
        return Err(Error::Dimension("support direction has wrong length".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyBergerBoosSet);
    }
    optim::maximize_over_ball(set.problem, &set.y, &set.fit, set.threshold, a)?.ok_or(Error::UnboundedSupport)
}

pub fn support_value(set: &BergerBoosSet<'_>, a: &DVector<f64>) -> Result<f64> {
    support_point(set, a).map(|(_, v)| v)
}

#[derive(Debug, Clone)]
pub struct FunctionalExtremes {
    pub x_lower: DVector<f64>,
    pub x_upper: DVector<f64>,
    pub mu_lower: f64,
    pub mu_upper: f64,
}

/// Min and max of `hᵀx` over `B_η`.
pub fn functional_extremes(set: &BergerBoosSet<'_>) -> Result<FunctionalExtremes> {
    if set.is_empty() {
        return Err(Error::EmptyBergerBoosSet);
    }
    let h = set.problem.functional();
    let t = set.threshold.max(set.fit.s2);
    let (x_upper, mu_upper) =
        optim::maximize_over_ball(set.problem, &set.y, &set.fit, t, h)?.ok_or(Error::UnboundedFunctional)?;
    let neg = -h;
    let (x_lower, neg_lower) =
        optim::maximize_over_ball(set.problem, &set.y, &set.fit, t, &neg)?.ok_or(Error::UnboundedFunctional)?;
    Ok(FunctionalExtremes {
        x_lower,
        x_upper,
        mu_lower: -neg_lower,
        mu_upper,
    })
}

/// Outer polytope `P^d ⊇ B_η`: the rows of `X`, axis bounds, the supported
/// eigen-directions of `KᵀK` and `n_random` Gaussian directions.
pub fn bounding_polytope<R: Rng + ?Sized>(set: &BergerBoosSet<'_>, n_random: usize, rng: &mut R) -> Result<Polytope> {
    if set.is_empty() {
        return Err(Error::EmptyBergerBoosSet);
    }
    let problem = set.problem;
    let p = problem.p();
    let x_poly = problem.constraints();
    let mut faces: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..x_poly.n_faces() {
        faces.push((x_poly.a().row(i).iter().copied().collect(), x_poly.b()[i]));
    }

    let mut directions: Vec<DVector<f64>> = Vec::new();
    for j in 0..p {
        let mut e = DVector::zeros(p);
        e[j] = 1.0;
        directions.push(e.clone());
        if !has_lower_axis_face(x_poly, j) {
            directions.push(-e);
        }
    }
    let eig = problem.eigen();
    let max = eig.values.iter().cloned().fold(0.0, f64::max);
    for i in 0..p {
        if eig.values[i] > RANK_TOL * max {
            let v = eig.vectors.column(i).into_owned();
            directions.push(-&v);
            directions.push(v);
        }
    }
    for _ in 0..n_random {
        let g = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        directions.push(if norm > 0.0 { g / norm } else { DVector::from_element(p, 1.0) });
    }

    for d in directions {
        let b = match support_value(set, &d) {
            Ok(b) => b,
            Err(Error::UnboundedSupport) => return Err(Error::UnboundedBergerBoosSet),
            Err(e) => return Err(e),
        };
        let margin = MEMBERSHIP_TOL * (1.0 + b.abs());
        faces.push((d.as_slice().to_vec(), b + margin));
    }
    Polytope::from_rows(p, &faces)
}

fn has_lower_axis_face(poly: &Polytope, j: usize) -> bool {
    poly.rows()
        .iter()
        .any(|r| matches!(r, Row::Axis { j: jj, coef } if *jj == j && *coef < 0.0))
}

fn chebyshev_lp(poly: &Polytope, radius_cap: Option<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let p = poly.dim();
    let n = p + 1;
    let mut rows: Vec<Row> = Vec::with_capacity(poly.n_faces() + 1);
    let mut rhs: Vec<f64> = Vec::with_capacity(poly.n_faces() + 1);
    for i in 0..poly.n_faces() {
        let a = poly.a().row(i);
        let mut r: Vec<f64> = a.iter().copied().collect();
        r.push(a.norm());
        rows.push(Row::Dense(r));
        rhs.push(poly.b()[i]);
    }
    if let Some(cap) = radius_cap {
        rows.push(Row::Axis { j: p, coef: 1.0 });
        rhs.push(cap);
    }
    let mut c = vec![0.0; n];
    c[p] = -1.0;
    let prog = Program {
        n,
        quad: None,
        c,
        rows: &rows,
        rhs: &rhs,
        eq_rows: vec![],
        eq_rhs: vec![],
        ball: None,
        box_radius: Some(BOX_RADIUS),
    };
    let sol = ipm::solve(&prog, &vec![0.0; n], &Settings::default())?;
    let x = DVector::from_column_slice(&sol.x[..p]);
    Ok((x, sol.x[p], sol.box_fraction))
}

/// Radius of the largest inscribed ball, capped at 1; negative when empty.
pub(crate) fn chebyshev_radius_boxed(poly: &Polytope) -> Result<f64> {
    chebyshev_lp(poly, Some(1.0)).map(|(_, r, _)| r)
}

/// Center and radius of the largest ball inside `poly`.
pub fn chebyshev_center(poly: &Polytope) -> Result<(DVector<f64>, f64)> {
    if poly.n_faces() == 0 {
        return Err(Error::InvalidArgument("unbounded polytope".into()));
    }
    let (x, r, frac) = chebyshev_lp(poly, None)?;
    if frac > 0.5 {
        return Err(Error::InvalidArgument("unbounded polytope".into()));
    }
    let scale = 1.0 + poly.b().amax();
    if r < -1e-9 * scale {
        return Err(Error::EmptyPolytope);
    }
    if r <= 1e-12 * scale {
        return Err(Error::DegeneratePolytope);
    }
    Ok((x, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    fn problem2(constraints: Polytope, h: [f64; 2]) -> LinearGaussianProblem {
        LinearGaussianProblem::with_identity_noise(DMatrix::identity(2, 2), constraints, v(&h)).unwrap()
    }

    #[test]
    fn chi2_examples() {
        assert!((chi2_quantile(2, 0.99) - 9.210340371976184).abs() < 1e-9);
        assert!((chi2_quantile(1, 0.68) - 0.988946).abs() < 1e-6);
        assert!((chi2_quantile(40, 0.99) - 63.690739751564).abs() < 1e-6);
        for (dof, prob) in [(1u32, 0.3), (5, 0.5), (40, 0.01), (80, 0.999)] {
            let z = chi2_quantile(dof, prob);
            assert!((crate::stats::chi2_cdf(dof, z) - prob).abs() <= 1e-10);
        }
    }

    #[test]
    fn membership_examples() {
        let pr = problem2(Polytope::nonnegative_orthant(2), [1.0, -1.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[1.0, 1.0]), 9.21).unwrap();
        assert!(bb_membership(&set, &v(&[1.0, 1.0])));
        assert!(!bb_membership(&set, &v(&[-0.1, 1.0])));
        let t = (9.21f64 + 0.01).sqrt();
        assert!(!bb_membership(&set, &v(&[1.0 + t, 1.0])));
    }

    #[test]
    fn support_examples() {
        let pr = problem2(Polytope::unconstrained(2), [1.0, 0.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[0.0, 0.0]), 1.0).unwrap();
        let a = v(&[3.0, -4.0]);
        assert!((support_value(&set, &a).unwrap() - 5.0).abs() < 1e-7 * 5.0);

        let pr = problem2(Polytope::nonnegative_orthant(2), [1.0, 0.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[0.0, 0.0]), 1.0).unwrap();
        assert!(support_value(&set, &v(&[-1.0, 0.0])).unwrap().abs() < 1e-7);
    }

    #[test]
    fn support_errors() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Polytope::unconstrained(2),
            v(&[1.0, 0.0]),
        )
        .unwrap();
        let set = BergerBoosSet::with_threshold(&pr, &v(&[0.0]), 1.0).unwrap();
        assert_eq!(support_value(&set, &v(&[1.0, -1.0])).unwrap_err(), Error::UnboundedSupport);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(bounding_polytope(&set, 0, &mut rng).unwrap_err(), Error::UnboundedBergerBoosSet);

        let pr = problem2(Polytope::nonnegative_orthant(2), [1.0, 0.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[-3.0, -3.0]), 1.0).unwrap();
        assert_eq!(support_value(&set, &v(&[1.0, 0.0])).unwrap_err(), Error::EmptyBergerBoosSet);
    }

    #[test]
    fn bounding_polytope_counts() {
        let pr = problem2(Polytope::nonnegative_orthant(2), [1.0, -1.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[1.0, 1.0]), 9.21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let poly = bounding_polytope(&set, 0, &mut rng).unwrap();
        assert_eq!(poly.n_faces(), 2 + 2 + 4);
        let poly4 = bounding_polytope(&set, 4, &mut rng).unwrap();
        assert_eq!(poly4.n_faces(), poly.n_faces() + 4);
    }

    #[test]
    fn bounding_polytope_contains_rejection_samples() {
        let pr = problem2(Polytope::nonnegative_orthant(2), [1.0, -1.0]);
        let y = v(&[1.0, 1.0]);
        let set = BergerBoosSet::with_threshold(&pr, &y, 9.21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let poly = bounding_polytope(&set, 0, &mut rng).unwrap();
        let r = 9.21f64.sqrt();
        let mut kept = 0;
        while kept < 1000 {
            let x = v(&[rng.random_range(-r..r) + 1.0, rng.random_range(-r..r) + 1.0]);
            if bb_membership(&set, &x) {
                kept += 1;
                assert!(poly.contains(&x));
            }
        }
    }

    #[test]
    fn chebyshev_examples() {
        let unit = Polytope::hyperrectangle(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let (x, r) = chebyshev_center(&unit).unwrap();
        assert!((x - v(&[0.5, 0.5])).amax() < 1e-7);
        assert!((r - 0.5).abs() < 1e-8);

        let tri = Polytope::from_rows(2, &[(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0), (vec![1.0, 1.0], 1.0)]).unwrap();
        let (x, r) = chebyshev_center(&tri).unwrap();
        let oracle = 1.0 / (2.0 + 2f64.sqrt());
        assert!((r - oracle).abs() < 1e-8);
        assert!((&x - v(&[oracle, oracle])).amax() < 1e-7);
        let slack = tri.slacks(&x);
        for i in 0..tri.n_faces() {
            assert!(slack[i] >= r * tri.a().row(i).norm() - 1e-8);
        }
    }

    #[test]
    fn chebyshev_errors() {
        let empty = Polytope::from_rows(1, &[(vec![1.0], 0.0), (vec![-1.0], -1.0)]).unwrap();
        assert_eq!(chebyshev_center(&empty).unwrap_err(), Error::EmptyPolytope);
        let flat = Polytope::from_rows(1, &[(vec![1.0], 0.0), (vec![-1.0], 0.0)]).unwrap();
        assert_eq!(chebyshev_center(&flat).unwrap_err(), Error::DegeneratePolytope);
    }

    #[test]
    fn extremes_examples() {
        let pr = problem2(Polytope::unconstrained(2), [1.0, -1.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[1.0, 1.0]), 1.0).unwrap();
        let fe = functional_extremes(&set).unwrap();
        assert!((fe.mu_lower + 2f64.sqrt()).abs() < 1e-6);
        assert!((fe.mu_upper - 2f64.sqrt()).abs() < 1e-6);
        assert!(bb_membership(&set, &fe.x_lower) || pr.residual_sq(set.y(), &fe.x_lower) <= 1.0 + 1e-7);

        let pr = problem2(Polytope::unconstrained(2), [0.0, 0.0]);
        let set = BergerBoosSet::with_threshold(&pr, &v(&[1.0, 1.0]), 1.0).unwrap();
        let fe = functional_extremes(&set).unwrap();
        assert_eq!((fe.mu_lower, fe.mu_upper), (0.0, 0.0));
    }

    #[test]
    fn polytope_validation() {
        assert!(Polytope::from_rows(2, &[(vec![0.0, 0.0], 1.0)]).is_err());
        assert!(Polytope::new(DMatrix::zeros(2, 2), DVector::zeros(3)).is_err());
    }
}
