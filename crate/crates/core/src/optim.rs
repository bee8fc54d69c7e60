//! Constrained least squares, the Gaussian LLR statistic and endpoint
//! optimization over `D(ψ², y) = {x ∈ X : ‖y − Kx‖² ≤ ψ²}`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::ipm::{self, Program, Settings};
use crate::model::LinearGaussianProblem;

/// Radius of the implicit box used to certify boundedness.
pub const BOX_RADIUS: f64 = 1e8;

/// A solution with `|xᵢ|` beyond this fraction of the box is treated as unbounded.
const BOX_HIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LlrValue {
    /// Nonnegative, `+∞` iff the slice is infeasible.
    pub value: f64,
    pub slice_feasible: bool,
    /// `s(y)² = min_{x∈X} ‖y − Kx‖²`
    pub fit_residual: f64,
}

/// Minimizer of `‖y − Kx‖²` over `X`.
#[derive(Debug, Clone)]
pub struct ConstrainedFit {
    pub x: DVector<f64>,
    pub s2: f64,
}

fn dims_check(problem: &LinearGaussianProblem, y: &DVector<f64>) -> Result<()> {
    if y.len() != problem.n() {
        return Err(Error::Dimension(format!(
            "observation has {} entries, expected {}",
            y.len(),
            problem.n()
        )));
    }
    Ok(())
}

fn settings() -> Settings {
    Settings::default()
}

/// Minimizes `‖y − Kx‖²` over `X`, optionally restricted to `aᵀx = μ`.
/// Returns the minimizer and the (nonnegative) objective.
pub fn constrained_lsq(
    problem: &LinearGaussianProblem,
    y: &DVector<f64>,
    extra_equality: Option<(&DVector<f64>, f64)>,
) -> Result<(DVector<f64>, f64)> {
    dims_check(problem, y)?;
    match extra_equality {
        None => lsq_core(problem, y, None),
        Some((a, mu)) => {
            if a.len() != problem.p() {
                return Err(Error::Dimension("equality row has wrong length".into()));
            }
            let (lo, hi) = if a == problem.functional() {
                problem.functional_range()?
            } else {
                linear_range_over_constraints(problem, a)?
            };
            let tol = 1e-9 * (1.0 + mu.abs());
            if mu < lo - tol || mu > hi + tol {
                return Err(Error::SliceInfeasible { mu });
            }
            lsq_core(problem, y, Some((a, mu.clamp(lo, hi))))
        }
    }
}

fn lsq_core(
    problem: &LinearGaussianProblem,
    y: &DVector<f64>,
    eq: Option<(&DVector<f64>, f64)>,
) -> Result<(DVector<f64>, f64)> {
    let p = problem.p();
    let kty = problem.forward().transpose() * y;
    let quad: Vec<f64> = problem.gram_flat().iter().map(|g| 2.0 * g).collect();
    let (eq_rows, eq_rhs) = match eq {
        Some((a, mu)) if a.amax() > 0.0 => (vec![a.as_slice().to_vec()], vec![mu]),
        _ => (vec![], vec![]),
    };
    let poly = problem.constraints();
    let prog = Program {
        n: p,
        quad: Some(&quad),
        c: kty.iter().map(|v| -2.0 * v).collect(),
        rows: poly.rows(),
        rhs: poly.b().as_slice(),
        eq_rows,
        eq_rhs,
        ball: None,
        box_radius: Some(BOX_RADIUS),
    };
    let x0 = start_point(problem, eq);
    let sol = ipm::solve(&prog, x0.as_slice(), &settings())?;
    let x = DVector::from_vec(sol.x);
    let obj = problem.residual_sq(y, &x).max(0.0);
    Ok((x, obj))
}

fn start_point(problem: &LinearGaussianProblem, eq: Option<(&DVector<f64>, f64)>) -> DVector<f64> {
    let p = problem.p();
    match eq {
        Some((a, mu)) if a.amax() > 0.0 => a * (mu / a.norm_squared()),
        _ => DVector::zeros(p),
    }
}

/// Computes `s(y)²` and the constrained minimizer `x̂_c`.
pub fn constrained_fit(problem: &LinearGaussianProblem, y: &DVector<f64>) -> Result<ConstrainedFit> {
    let (x, s2) = constrained_lsq(problem, y, None)?;
    Ok(ConstrainedFit { x, s2 })
}

/// Range of `aᵀx` over `X`, with infinite ends where unbounded.
pub fn linear_range_over_constraints(problem: &LinearGaussianProblem, a: &DVector<f64>) -> Result<(f64, f64)> {
    let p = problem.p();
    let poly = problem.constraints();
    if a.amax() == 0.0 {
        ensure_nonempty(problem)?;
        return Ok((0.0, 0.0));
    }
    if poly.n_faces() == 0 {
        return Ok((f64::NEG_INFINITY, f64::INFINITY));
    }
    let mut ends = [0.0; 2];
    for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
        let prog = Program {
            n: p,
            quad: None,
            c: a.iter().map(|v| sign * v).collect(),
            rows: poly.rows(),
            rhs: poly.b().as_slice(),
            eq_rows: vec![],
            eq_rhs: vec![],
            ball: None,
            box_radius: Some(BOX_RADIUS),
        };
        let sol = match ipm::solve(&prog, &vec![0.0; p], &settings()) {
            Ok(s) => s,
            Err(e) => {
                ensure_nonempty(problem)?;
                return Err(e);
            }
        };
        ends[slot] = if sol.box_fraction > BOX_HIT {
            sign * f64::NEG_INFINITY
        } else {
            a.iter().zip(&sol.x).map(|(u, v)| u * v).sum()
        };
    }
    Ok((ends[0], ends[1]))
}

fn ensure_nonempty(problem: &LinearGaussianProblem) -> Result<()> {
    let poly = problem.constraints();
    if poly.n_faces() == 0 {
        return Ok(());
    }
    let r = crate::geometry::chebyshev_radius_boxed(poly)?;
    if r < -1e-9 {
        Err(Error::EmptyFeasibleRegion)
    } else {
        Ok(())
    }
}

/// Evaluates `λ(μ, y)` repeatedly for one observation, reusing `s(y)²`.
#[derive(Debug, Clone)]
pub struct LlrEvaluator<'a> {
    problem: &'a LinearGaussianProblem,
    y: DVector<f64>,
    fit: ConstrainedFit,
    range: (f64, f64),
}

impl<'a> LlrEvaluator<'a> {
    pub fn new(problem: &'a LinearGaussianProblem, y: &DVector<f64>) -> Result<Self> {
        dims_check(problem, y)?;
        let fit = constrained_fit(problem, y)?;
        let range = problem.functional_range()?;
        Ok(LlrEvaluator {
            problem,
            y: y.clone(),
            fit,
            range,
        })
    }

    pub fn problem(&self) -> &'a LinearGaussianProblem {
        self.problem
    }

    pub fn fit(&self) -> &ConstrainedFit {
        &self.fit
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `hᵀx̂_c`, where λ vanishes.
    pub fn mu_hat(&self) -> f64 {
        self.problem.phi(&self.fit.x)
    }

    pub fn eval(&self, mu: f64) -> Result<LlrValue> {
        let (lo, hi) = self.range;
        let tol = 1e-9 * (1.0 + mu.abs());
        if mu < lo - tol || mu > hi + tol {
            return Ok(LlrValue {
                value: f64::INFINITY,
                slice_feasible: false,
                fit_residual: self.fit.s2,
            });
        }
        let h = self.problem.functional();
        let (_, obj) = lsq_core(self.problem, &self.y, Some((h, mu.clamp(lo, hi))))?;
        Ok(LlrValue {
            value: (obj - self.fit.s2).max(0.0),
            slice_feasible: true,
            fit_residual: self.fit.s2,
        })
    }

    /// Endpoints of `{μ : λ(μ, y) ≤ c}`, obtained from `D(c + s², y)`.
    pub fn acceptance_range(&self, cutoff: f64) -> Result<(f64, f64)> {
        endpoint_optimize_with_fit(self.problem, &self.y, &self.fit, cutoff.max(0.0) + self.fit.s2)
    }
}

/// `λ(μ, y)` for a single `μ`.
pub fn llr(problem: &LinearGaussianProblem, y: &DVector<f64>, mu: f64) -> Result<LlrValue> {
    LlrEvaluator::new(problem, y)?.eval(mu)
}

/// `argmin_{x∈X} −aᵀx + λ‖y − Kx‖²`, with the residual and box fraction.
fn penalized_fit(problem: &LinearGaussianProblem, y: &DVector<f64>, kty: &DVector<f64>, a: &DVector<f64>, lambda: f64, x0: &DVector<f64>) -> Result<(DVector<f64>, f64, f64)> {
    let quad: Vec<f64> = problem.gram_flat().iter().map(|g| 2.0 * lambda * g).collect();
    let poly = problem.constraints();
    let prog = Program {
        n: problem.p(),
        quad: Some(&quad),
        c: a.iter().zip(kty.iter()).map(|(ai, ki)| -ai - 2.0 * lambda * ki).collect(),
        rows: poly.rows(),
        rhs: poly.b().as_slice(),
        eq_rows: vec![],
        eq_rhs: vec![],
        ball: None,
        box_radius: Some(BOX_RADIUS),
    };
    let sol = ipm::solve(&prog, x0.as_slice(), &settings())?;
    let x = DVector::from_vec(sol.x);
    let r = problem.residual_sq(y, &x);
    Ok((x, r, sol.box_fraction))
}

const MAX_MULTIPLIER_STEPS: usize = 120;

/// Maximizes `aᵀx` over `{x ∈ X : ‖y − Kx‖² ≤ t}`. Returns `None` when the
/// program is unbounded. The caller guarantees the set is nonempty.
///
/// Solved through the multiplier `λ` of the ball: the penalized fit's
/// residual decreases in `λ`, so the root of `r(λ) = t` is bracketed on a
/// log scale and refined by a safeguarded secant.
pub(crate) fn maximize_over_ball(
    problem: &LinearGaussianProblem,
    y: &DVector<f64>,
    fit: &ConstrainedFit,
    t: f64,
    a: &DVector<f64>,
) -> Result<Option<(DVector<f64>, f64)>> {
    let slack = t - fit.s2;
    if slack <= 1e-12 * (1.0 + fit.s2) {
        return Ok(Some((fit.x.clone(), a.dot(&fit.x))));
    }
    if a.amax() == 0.0 {
        return Ok(Some((fit.x.clone(), 0.0)));
    }
    let kty = problem.forward().transpose() * y;
    let p = problem.p();
    let g_scale = (problem.gram_flat().iter().step_by(p + 1).sum::<f64>() / p as f64).max(f64::MIN_POSITIVE);
    let lambda0 = a.norm() / (2.0 * slack.sqrt() * g_scale.sqrt());
    let tol = 1e-9 * (1.0 + t);
    // Without constraints `r − s²` scales as `λ⁻²`, so `g` below is linear
    // in λ there and nearly so otherwise.
    let g = |r: f64| 1.0 / (r - fit.s2).max(1e-300).sqrt() - 1.0 / slack.sqrt();
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: Option<(f64, DVector<f64>, f64)> = None;
    let mut lam = lambda0;
    let mut prev: Option<(f64, f64)> = None;
    // Consecutive updates of the same bracket side.
    let mut streak = (false, 0u32);
    let mut converged = false;
    for _ in 0..MAX_MULTIPLIER_STEPS {
        let (x, r, b) = penalized_fit(problem, y, &kty, a, lam, &fit.x)?;
        let last = prev.replace((lam, g(r)));
        let side = r <= t;
        streak = if streak.0 == side { (side, streak.1 + 1) } else { (side, 1) };
        if r <= t {
            if b > BOX_HIT {
                return Ok(None);
            }
            hi = Some((lam, x, r));
        } else {
            lo = Some((lam, r));
        }
        let next = match (&lo, &hi) {
            (_, Some((_, _, rh))) if t - rh <= tol => {
                converged = true;
                break;
            }
            // Every feasible x has aᵀx ≤ aᵀx_λ + λ(t − r_λ), so a small
            // gap certifies the feasible iterate, e.g. when the ball is
            // inactive at the optimum. The scale matches the QP tolerance.
            (_, Some((lh, xh, rh))) if lh * (t - rh) <= 1e-9 * (1.0 + a.dot(xh).abs() + a.norm() * xh.norm()) => {
                converged = true;
                break;
            }
            (Some((ll, rl)), Some((lh, _, rh))) => {
                if lh / ll - 1.0 <= 1e-13 {
                    converged = true;
                    break;
                }
                let (gl, gh) = (g(*rl), g(*rh));
                let sec = ll - gl * (lh - ll) / (gh - gl);
                // Plateaus of r(λ) make g far from linear; a one-sided
                // streak of secant steps falls back to bisection.
                if streak.1 < 3 && sec.is_finite() && sec > *ll && sec < *lh {
                    // Nudge toward the far side so the bracket keeps shrinking.
                    let w = 1e-3 * (lh - ll);
                    if r > t { (sec + w).min(*lh) } else { (sec - w).max(*ll) }
                } else {
                    (ll * lh).sqrt()
                }
            }
            _ => {
                let ratio = ((r - fit.s2).max(0.0) / slack).sqrt().clamp(1e-3, 1e3);
                let fixed = lam * ratio;
                // Secant through the last two points once there are two.
                let sec = last.map(|(l0, g0)| {
                    let g1 = g(r);
                    lam - g1 * (lam - l0) / (g1 - g0)
                });
                let cand = match sec {
                    Some(v) if v.is_finite() && v > 0.0 && v / lam < 1e3 && lam / v < 1e3 => v,
                    _ => fixed,
                };
                // Overshoot slightly so the next point lands on the other
                // side, and faster on plateaus of r(λ).
                let boost = 10f64.powi(streak.1.saturating_sub(1).min(6) as i32);
                if r > t {
                    cand.max(lam * boost) * (1.0 + 1e-6)
                } else {
                    cand.min(lam / boost) * (1.0 - 1e-6)
                }
            }
        };
        lam = next;
    }
    match hi {
        Some((_, x, _)) if converged => {
            let v = a.dot(&x);
            Ok(Some((x, v)))
        }
        _ => Err(Error::QpFailed {
            iterations: MAX_MULTIPLIER_STEPS,
            primal: lo.map_or(f64::NAN, |l| l.1 - t),
            dual: f64::NAN,
            gap: f64::NAN,
        }),
    }
}

/// Min and max of `hᵀx` over `D(ψ², y)`.
pub fn endpoint_optimize(problem: &LinearGaussianProblem, y: &DVector<f64>, psi_sq: f64) -> Result<(f64, f64)> {
    dims_check(problem, y)?;
    let fit = constrained_fit(problem, y)?;
    endpoint_optimize_with_fit(problem, y, &fit, psi_sq)
}

pub(crate) fn endpoint_optimize_with_fit(
    problem: &LinearGaussianProblem,
    y: &DVector<f64>,
    fit: &ConstrainedFit,
    psi_sq: f64,
) -> Result<(f64, f64)> {
    if psi_sq < fit.s2 - 1e-9 * (1.0 + fit.s2) {
        return Err(Error::EmptyFeasibleRegion);
    }
    let h = problem.functional();
    let upper = maximize_over_ball(problem, y, fit, psi_sq, h)?.ok_or(Error::UnboundedFunctional)?;
    let neg = -h;
    let lower = maximize_over_ball(problem, y, fit, psi_sq, &neg)?.ok_or(Error::UnboundedFunctional)?;
    let (lo, hi) = (-lower.1, upper.1);
    Ok((lo.min(hi), hi.max(lo)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;
    use nalgebra::DMatrix;

    fn orthant2(h: [f64; 2]) -> LinearGaussianProblem {
        LinearGaussianProblem::with_identity_noise(
            DMatrix::identity(2, 2),
            Polytope::nonnegative_orthant(2),
            DVector::from_vec(h.to_vec()),
        )
        .unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn lsq_interior_point() {
        let pr = orthant2([1.0, -1.0]);
        let (x, obj) = constrained_lsq(&pr, &v(&[2.0, 1.0]), None).unwrap();
        assert!((x - v(&[2.0, 1.0])).amax() < 1e-7);
        assert!(obj.abs() < 1e-10);
    }

    #[test]
    fn lsq_projection_onto_orthant() {
        let pr = orthant2([1.0, -1.0]);
        let (x, obj) = constrained_lsq(&pr, &v(&[-1.0, -1.0]), None).unwrap();
        assert!(x.amax() < 1e-7);
        assert!((obj - 2.0).abs() < 1e-7);
    }

    #[test]
    fn lsq_on_slice() {
        let pr = orthant2([1.0, -1.0]);
        let h = pr.functional().clone();
        let (x, obj) = constrained_lsq(&pr, &v(&[-1.0, -1.0]), Some((&h, 1.0))).unwrap();
        assert!((obj - 5.0).abs() < 1e-7);
        assert!((x - v(&[1.0, 0.0])).amax() < 1e-6);
    }

    #[test]
    fn infeasible_slice() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::identity(2, 2),
            Polytope::new(
                DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
                v(&[1.0, 1.0, 0.0, 0.0]),
            )
            .unwrap(),
            v(&[1.0, 1.0]),
        )
        .unwrap();
        let h = pr.functional().clone();
        let err = constrained_lsq(&pr, &v(&[0.0, 0.0]), Some((&h, 3.0))).unwrap_err();
        assert!(matches!(err, Error::SliceInfeasible { .. }));
        let l = llr(&pr, &v(&[0.0, 0.0]), 3.0).unwrap();
        assert!(l.value.is_infinite() && !l.slice_feasible);
        let l = llr(&pr, &v(&[0.0, 0.0]), 2.0).unwrap();
        assert!((l.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn llr_examples() {
        let pr = orthant2([1.0, -1.0]);
        let y = v(&[-1.0, -1.0]);
        let l = llr(&pr, &y, 1.0).unwrap();
        assert!((l.value - 3.0).abs() < 1e-7);
        assert!((l.fit_residual - 2.0).abs() < 1e-7);

        let y = v(&[0.7, 2.0]);
        let ev = LlrEvaluator::new(&pr, &y).unwrap();
        assert!(ev.eval(ev.mu_hat()).unwrap().value < 1e-6);

        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::identity(1, 1),
            Polytope::unconstrained(1),
            v(&[1.0]),
        )
        .unwrap();
        let l = llr(&pr, &v(&[1.0]), 0.0).unwrap();
        assert!((l.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn endpoint_examples() {
        let pr = orthant2([1.0, -1.0]);
        let y = v(&[2.0, 1.0]);
        let (lo, hi) = endpoint_optimize(&pr, &y, 0.989).unwrap();
        let r = (2.0f64 * 0.989).sqrt();
        assert!((lo - (1.0 - r)).abs() < 1e-6);
        assert!((hi - (1.0 + r)).abs() < 1e-6);

        let (lo, hi) = endpoint_optimize(&pr, &y, 0.0).unwrap();
        assert!((lo - 1.0).abs() < 1e-7 && (hi - 1.0).abs() < 1e-7);

        let (lo2, hi2) = endpoint_optimize(&pr, &y, 2.0).unwrap();
        assert!(lo2 <= lo && hi2 >= hi);

        let y = v(&[-1.0, -1.0]);
        assert_eq!(endpoint_optimize(&pr, &y, 1.0).unwrap_err(), Error::EmptyFeasibleRegion);
    }

    #[test]
    fn unbounded_endpoint() {
        let pr = LinearGaussianProblem::with_identity_noise(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Polytope::unconstrained(2),
            v(&[1.0, 0.0]),
        )
        .unwrap();
        let err = endpoint_optimize(&pr, &v(&[0.0]), 1.0).unwrap_err();
        assert_eq!(err, Error::UnboundedFunctional);
    }
}
