//! Dense primal–dual interior-point solver for the small convex programs used
//! throughout the crate:
//!
//! ```text
//! minimize    ½ xᵀQx + cᵀx
//! subject to  G x ≤ g               (linear rows, axis-aligned rows stored sparsely)
//!             E x = f               (a handful of equality rows)
//!             ‖r₀ − K x‖² ≤ t       (at most one convex quadratic row)
//!             |xᵢ| ≤ box            (optional, certifies boundedness)
//! ```
//!
//! Slack form with infeasible start and Mehrotra predictor–corrector steps.
//! The reduced Newton system `(H + JᵀWJ) dx + Eᵀdv = rhs` is factored once
//! per iteration by a dense Cholesky and reused for both the predictor and
//! the corrector.

use crate::error::{Error, Result};

/// A linear inequality row `aᵀx ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    /// `coef · x_j ≤ b`
    Axis { j: usize, coef: f64 },
    Dense(Vec<f64>),
}

impl Row {
    pub fn from_dense(a: &[f64]) -> Row {
        let mut nz = a.iter().enumerate().filter(|(_, v)| **v != 0.0);
        match (nz.next(), nz.next()) {
            (Some((j, &coef)), None) => Row::Axis { j, coef },
            _ => Row::Dense(a.to_vec()),
        }
    }

    #[inline]
    pub fn dot(&self, x: &[f64]) -> f64 {
        match self {
            Row::Axis { j, coef } => coef * x[*j],
            Row::Dense(a) => a.iter().zip(x).map(|(a, x)| a * x).sum(),
        }
    }

    /// `out += scale · a`
    #[inline]
    fn axpy(&self, scale: f64, out: &mut [f64]) {
        match self {
            Row::Axis { j, coef } => out[*j] += scale * coef,
            Row::Dense(a) => {
                for (o, v) in out.iter_mut().zip(a) {
                    *o += scale * v;
                }
            }
        }
    }

    /// `M += w · a aᵀ` on the lower triangle of a row-major `n×n` matrix.
    #[inline]
    fn rank_one_lower(&self, w: f64, m: &mut [f64], n: usize) {
        match self {
            Row::Axis { j, coef } => m[j * n + j] += w * coef * coef,
            Row::Dense(a) => rank_one_lower(a, w, m, n),
        }
    }
}

#[inline]
fn rank_one_lower(a: &[f64], w: f64, m: &mut [f64], n: usize) {
    for i in 0..n {
        let wa = w * a[i];
        if wa == 0.0 {
            continue;
        }
        let row = &mut m[i * n..i * n + i + 1];
        for (mij, aj) in row.iter_mut().zip(&a[..=i]) {
            *mij += wa * aj;
        }
    }
}

/// The single convex quadratic row `‖r₀ − K x‖² ≤ t`.
#[derive(Debug, Clone, Copy)]
pub struct BallRow<'a> {
    /// Row-major `rows×n` matrix.
    pub k: &'a [f64],
    pub rows: usize,
    /// Row-major `KᵀK`.
    pub gram: &'a [f64],
    pub r0: &'a [f64],
    pub t: f64,
}

impl BallRow<'_> {
    fn residual_sq(&self, x: &[f64], n: usize) -> f64 {
        (0..self.rows)
            .map(|i| {
                let kx: f64 = self.k[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
                (self.r0[i] - kx).powi(2)
            })
            .sum()
    }

    /// Gradient `2Kᵀ(Kx − r₀)`.
    fn gradient(&self, x: &[f64], n: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.rows {
            let row = &self.k[i * n..(i + 1) * n];
            let r: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.r0[i];
            for (o, a) in out.iter_mut().zip(row) {
                *o += 2.0 * r * a;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol: 1e-9,
            max_iter: 500,
        }
    }
}

/// Problem description; all matrices are row-major slices.
#[derive(Debug, Clone)]
pub struct Program<'a> {
    pub n: usize,
    /// Objective Hessian, row-major `n×n`.
    pub quad: Option<&'a [f64]>,
    pub c: Vec<f64>,
    pub rows: &'a [Row],
    pub rhs: &'a [f64],
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ball: Option<BallRow<'a>>,
    pub box_radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Multiplier of the quadratic row, if present.
    pub ball_multiplier: f64,
    pub iterations: usize,
    /// Largest |xᵢ| relative to the box radius (0 when no box).
    pub box_fraction: f64,
}

struct Layout {
    n_lin: usize,
    n_box: usize,
    has_ball: bool,
}

impl Layout {
    fn m(&self) -> usize {
        self.n_lin + self.n_box + usize::from(self.has_ball)
    }
}

impl Program<'_> {
    fn layout(&self) -> Layout {
        Layout {
            n_lin: self.rows.len(),
            n_box: if self.box_radius.is_some() { 2 * self.n } else { 0 },
            has_ball: self.ball.is_some(),
        }
    }

    /// Constraint values `c_i(x)` (feasible iff ≤ 0).
    fn constraint_values(&self, x: &[f64], lay: &Layout, out: &mut [f64]) {
        for (i, (row, b)) in self.rows.iter().zip(self.rhs).enumerate() {
            out[i] = row.dot(x) - b;
        }
        if let Some(radius) = self.box_radius {
            for j in 0..self.n {
                out[lay.n_lin + 2 * j] = x[j] - radius;
                out[lay.n_lin + 2 * j + 1] = -x[j] - radius;
            }
        }
        if let Some(ball) = &self.ball {
            out[lay.m() - 1] = ball.residual_sq(x, self.n) - ball.t;
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.c.iter().zip(x).map(|(a, b)| a * b).sum();
        let quad = match self.quad {
            Some(q) => {
                let n = self.n;
                let mut acc = 0.0;
                for i in 0..n {
                    let qi: f64 = q[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
                    acc += x[i] * qi;
                }
                0.5 * acc
            }
            None => 0.0,
        };
        lin + quad
    }
}

/// In-place Cholesky of the lower triangle of a row-major SPD matrix.
/// Returns false if a non-positive pivot is met.
pub(crate) fn cholesky_in_place(m: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = m[j * n + j];
        {
            let rj = &m[j * n..j * n + j];
            d -= rj.iter().map(|v| v * v).sum::<f64>();
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        m[j * n + j] = d;
        for i in j + 1..n {
            let (head, tail) = m.split_at_mut(i * n);
            let rj = &head[j * n..j * n + j];
            let ri = &mut tail[..=j];
            let s: f64 = ri[..j].iter().zip(rj).map(|(a, b)| a * b).sum();
            ri[j] = (ri[j] - s) / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place given the factor from [`cholesky_in_place`].
pub(crate) fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s: f64 = l[i * n..i * n + i].iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = f64::INFINITY;
    for (vi, di) in v.iter().zip(dv) {
        if *di < 0.0 {
            a = a.min(-vi / di);
        }
    }
    a
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Solves the program from the starting point `x0`.
pub fn solve(prog: &Program<'_>, x0: &[f64], settings: &Settings) -> Result<Solution> {
    let n = prog.n;
    assert_eq!(x0.len(), n);
    assert_eq!(prog.c.len(), n);
    let lay = prog.layout();
    let m = lay.m();
    let k = prog.eq_rows.len();

    let mut x = x0.to_vec();
    let mut cval = vec![0.0; m];
    prog.constraint_values(&x, &lay, &mut cval);
    let mut s: Vec<f64> = cval.iter().map(|c| (-c).max(1.0)).collect();
    let ball_interior = lay.has_ball && cval[m - 1] < 0.0;
    if ball_interior {
        s[m - 1] = -cval[m - 1];
    }
    let mut z: Vec<f64> = s.iter().map(|s| 1.0 / s).collect();
    let mut v = vec![0.0; k];

    let rhs_scale: Vec<f64> = (0..m)
        .map(|i| {
            if i < lay.n_lin {
                1.0 + prog.rhs[i].abs()
            } else if i < lay.n_lin + lay.n_box {
                1.0 + prog.box_radius.unwrap_or(0.0)
            } else {
                1.0 + prog.ball.map(|b| b.t.abs()).unwrap_or(0.0)
            }
        })
        .collect();
    let c_scale = 1.0 + inf_norm(&prog.c);
    let eq_scale: Vec<f64> = prog.eq_rhs.iter().map(|f| 1.0 + f.abs()).collect();

    let mut grad_ball = vec![0.0; n];
    let mut r_d = vec![0.0; n];
    let mut r_p = vec![0.0; m];
    let mut r_e = vec![0.0; k];
    let mut mat = vec![0.0; n * n];
    let mut w = vec![0.0; m];
    let mut rhs = vec![0.0; n];
    let mut tmp = vec![0.0; m];
    let mut dx = vec![0.0; n];
    let mut ds = vec![0.0; m];
    let mut dz = vec![0.0; m];
    let mut dv = vec![0.0; k];
    let mut minv_e: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    let mut qx = vec![0.0; n];

    let ball_idx = m.wrapping_sub(1);
    let mut last = (f64::NAN, f64::NAN, f64::NAN);

    for iter in 0..settings.max_iter {
        prog.constraint_values(&x, &lay, &mut cval);
        if let Some(ball) = &prog.ball {
            ball.gradient(&x, n, &mut grad_ball);
        }

        // dual residual r_d = Qx + c + Jᵀz + Eᵀv
        qx.iter_mut().for_each(|q| *q = 0.0);
        if let Some(q) = prog.quad {
            for i in 0..n {
                qx[i] = q[i * n..(i + 1) * n].iter().zip(&x).map(|(a, b)| a * b).sum();
            }
        }
        for i in 0..n {
            r_d[i] = qx[i] + prog.c[i];
        }
        apply_jt(prog, &lay, &grad_ball, &z, &mut r_d);
        for (row, vi) in prog.eq_rows.iter().zip(&v) {
            for (r, a) in r_d.iter_mut().zip(row) {
                *r += vi * a;
            }
        }
        for i in 0..m {
            r_p[i] = cval[i] + s[i];
        }
        for (j, row) in prog.eq_rows.iter().enumerate() {
            r_e[j] = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() - prog.eq_rhs[j];
        }
        let mu = s.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() / m.max(1) as f64;

        let dual_scale = c_scale + inf_norm(&qx);
        let pres = r_p
            .iter()
            .zip(&rhs_scale)
            .fold(0.0f64, |acc, (r, sc)| acc.max(r.abs() / sc));
        let eres = r_e
            .iter()
            .zip(&eq_scale)
            .fold(0.0f64, |acc, (r, sc)| acc.max(r.abs() / sc));
        let dres = inf_norm(&r_d) / dual_scale;
        let obj = prog.objective(&x);
        let gap = mu * m as f64 / (1.0 + obj.abs());
        last = (pres.max(eres), dres, gap);
        if pres <= settings.tol && eres <= settings.tol && dres <= settings.tol && gap <= settings.tol {
            let box_fraction = match prog.box_radius {
                Some(b) => inf_norm(&x) / b,
                None => 0.0,
            };
            return Ok(Solution {
                ball_multiplier: if lay.has_ball { z[ball_idx] } else { 0.0 },
                x,
                iterations: iter,
                box_fraction,
            });
        }
        if !(mu.is_finite() && dres.is_finite() && pres.is_finite()) {
            break;
        }

        // M = H + JᵀWJ
        for i in 0..m {
            w[i] = z[i] / s[i];
        }
        mat.iter_mut().for_each(|v| *v = 0.0);
        if let Some(q) = prog.quad {
            for i in 0..n {
                mat[i * n..i * n + i + 1].copy_from_slice(&q[i * n..i * n + i + 1]);
            }
        }
        if let Some(ball) = &prog.ball {
            let zq = z[ball_idx];
            for i in 0..n {
                for j in 0..=i {
                    mat[i * n + j] += 2.0 * zq * ball.gram[i * n + j];
                }
            }
            rank_one_lower(&grad_ball, w[ball_idx], &mut mat, n);
        }
        for (i, row) in prog.rows.iter().enumerate() {
            row.rank_one_lower(w[i], &mut mat, n);
        }
        if lay.n_box > 0 {
            for j in 0..n {
                mat[j * n + j] += w[lay.n_lin + 2 * j] + w[lay.n_lin + 2 * j + 1];
            }
        }
        let max_diag = (0..n).fold(0.0f64, |a, i| a.max(mat[i * n + i].abs()));
        // Diagonal-relative regularization, so one huge barrier weight does
        // not swamp the other directions.
        let mut reg = 1e-13;
        let base = mat.clone();
        loop {
            for i in 0..n {
                mat[i * n + i] += reg * (1.0 + base[i * n + i].abs());
            }
            if cholesky_in_place(&mut mat, n) {
                break;
            }
            mat.copy_from_slice(&base);
            reg *= 100.0;
            if !(reg <= 1e6) || !max_diag.is_finite() {
                return Err(Error::QpFailed {
                    iterations: iter,
                    primal: last.0,
                    dual: last.1,
                    gap: last.2,
                });
            }
        }
        for (j, row) in prog.eq_rows.iter().enumerate() {
            minv_e[j].copy_from_slice(row);
            cholesky_solve(&mat, n, &mut minv_e[j]);
        }
        let Some(schur) = eq_schur(&prog.eq_rows, &minv_e) else {
            return Err(Error::QpFailed {
                iterations: iter,
                primal: last.0,
                dual: last.1,
                gap: last.2,
            });
        };

        // Predictor (affine) direction.
        for i in 0..m {
            tmp[i] = s[i] * z[i];
        }
        newton_direction(
            prog, &lay, &mat, &schur, &minv_e, &grad_ball, &r_d, &r_p, &r_e, &s, &z, &w, &tmp,
            &mut rhs, &mut dx, &mut ds, &mut dz, &mut dv,
        );
        let a_aff = max_step(&s, &ds).min(max_step(&z, &dz)).min(1.0);
        let mu_aff = s
            .iter()
            .zip(&ds)
            .zip(z.iter().zip(&dz))
            .map(|((si, dsi), (zi, dzi))| (si + a_aff * dsi) * (zi + a_aff * dzi))
            .sum::<f64>()
            / m.max(1) as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // Corrector.
        for i in 0..m {
            tmp[i] = s[i] * z[i] + ds[i] * dz[i] - sigma * mu;
        }
        newton_direction(
            prog, &lay, &mat, &schur, &minv_e, &grad_ball, &r_d, &r_p, &r_e, &s, &z, &w, &tmp,
            &mut rhs, &mut dx, &mut ds, &mut dz, &mut dv,
        );
        let a_max = max_step(&s, &ds).min(max_step(&z, &dz));
        let mut alpha = (0.99 * a_max).min(1.0);
        // When the start lies strictly inside the ball, stay inside it and
        // keep that row's slack equal to its true value.
        let mut ball_slack = None;
        if ball_interior {
            let ball = prog.ball.as_ref().unwrap();
            let mut trial = x.clone();
            loop {
                for i in 0..n {
                    trial[i] = x[i] + alpha * dx[i];
                }
                let cq = ball.residual_sq(&trial, n) - ball.t;
                if cq < 0.0 {
                    ball_slack = Some(-cq);
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
        }

        for i in 0..n {
            x[i] += alpha * dx[i];
        }
        for i in 0..m {
            s[i] += alpha * ds[i];
            z[i] += alpha * dz[i];
        }
        for j in 0..k {
            v[j] += alpha * dv[j];
        }
        if let Some(sl) = ball_slack {
            s[ball_idx] = sl;
        }
    }
    Err(Error::QpFailed {
        iterations: settings.max_iter,
        primal: last.0,
        dual: last.1,
        gap: last.2,
    })
}

/// `out += Jᵀ y` where J stacks the inequality gradients.
fn apply_jt(prog: &Program<'_>, lay: &Layout, grad_ball: &[f64], y: &[f64], out: &mut [f64]) {
    for (row, yi) in prog.rows.iter().zip(y) {
        row.axpy(*yi, out);
    }
    if lay.n_box > 0 {
        for j in 0..prog.n {
            out[j] += y[lay.n_lin + 2 * j] - y[lay.n_lin + 2 * j + 1];
        }
    }
    if lay.has_ball {
        let yq = y[lay.m() - 1];
        for (o, g) in out.iter_mut().zip(grad_ball) {
            *o += yq * g;
        }
    }
}

/// `out = J d`
fn apply_j(prog: &Program<'_>, lay: &Layout, grad_ball: &[f64], d: &[f64], out: &mut [f64]) {
    for (i, row) in prog.rows.iter().enumerate() {
        out[i] = row.dot(d);
    }
    if lay.n_box > 0 {
        for j in 0..prog.n {
            out[lay.n_lin + 2 * j] = d[j];
            out[lay.n_lin + 2 * j + 1] = -d[j];
        }
    }
    if lay.has_ball {
        out[lay.m() - 1] = grad_ball.iter().zip(d).map(|(a, b)| a * b).sum();
    }
}

fn eq_schur(eq_rows: &[Vec<f64>], minv_e: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = eq_rows.len();
    let mut s = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            s[i * k + j] = eq_rows[i].iter().zip(&minv_e[j]).map(|(a, b)| a * b).sum();
        }
    }
    if k > 0 {
        let base = s.clone();
        let mut reg = 0.0;
        while !cholesky_in_place(&mut s, k) {
            s.copy_from_slice(&base);
            reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
            if !(reg < 1e6) {
                return None;
            }
            for i in 0..k {
                s[i * k + i] += reg * (1.0 + base[i * k + i].abs());
            }
        }
    }
    Some(s)
}

#[allow(clippy::too_many_arguments)]
fn newton_direction(
    prog: &Program<'_>,
    lay: &Layout,
    chol: &[f64],
    schur: &[f64],
    minv_e: &[Vec<f64>],
    grad_ball: &[f64],
    r_d: &[f64],
    r_p: &[f64],
    r_e: &[f64],
    s: &[f64],
    z: &[f64],
    w: &[f64],
    r_c: &[f64],
    rhs: &mut [f64],
    dx: &mut [f64],
    ds: &mut [f64],
    dz: &mut [f64],
    dv: &mut [f64],
) {
    let n = prog.n;
    let m = lay.m();
    let k = prog.eq_rows.len();
    // rhs = −r_d − Jᵀ S⁻¹(−r_c + Z r_p)
    for i in 0..m {
        ds[i] = (-r_c[i] + z[i] * r_p[i]) / s[i];
    }
    for i in 0..n {
        rhs[i] = -r_d[i];
    }
    let neg: Vec<f64> = ds.iter().map(|v| -v).collect();
    apply_jt(prog, lay, grad_ball, &neg, rhs);

    dx.copy_from_slice(rhs);
    cholesky_solve(chol, n, dx);
    if k > 0 {
        // (E M⁻¹ Eᵀ) dv = E M⁻¹ rhs + r_e
        for j in 0..k {
            dv[j] = prog.eq_rows[j].iter().zip(dx.iter()).map(|(a, b)| a * b).sum::<f64>() + r_e[j];
        }
        cholesky_solve(schur, k, dv);
        for j in 0..k {
            for i in 0..n {
                dx[i] -= dv[j] * minv_e[j][i];
            }
        }
    }
    // ds = −r_p − J dx ; dz = S⁻¹(−r_c − Z ds)
    apply_j(prog, lay, grad_ball, dx, ds);
    for i in 0..m {
        ds[i] = -r_p[i] - ds[i];
        dz[i] = (-r_c[i] - z[i] * ds[i]) / s[i];
        let _ = w[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_simple(prog: &Program<'_>) -> Solution {
        solve(prog, &vec![0.0; prog.n], &Settings::default()).unwrap()
    }

    #[test]
    fn projection_onto_orthant() {
        // min ‖y − x‖² over x ≥ 0, y = (−1, 2)
        let q = [2.0, 0.0, 0.0, 2.0];
        let rows = vec![Row::Axis { j: 0, coef: -1.0 }, Row::Axis { j: 1, coef: -1.0 }];
        let rhs = [0.0, 0.0];
        let prog = Program {
            n: 2,
            quad: Some(&q),
            c: vec![2.0, -4.0],
            rows: &rows,
            rhs: &rhs,
            eq_rows: vec![],
            eq_rhs: vec![],
            ball: None,
            box_radius: Some(1e8),
        };
        let sol = solve_simple(&prog);
        assert!(sol.x[0].abs() < 1e-8);
        assert!((sol.x[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn linear_objective_over_ball() {
        // max x₁ + x₂ over ‖x‖² ≤ 1 → √2
        let k = [1.0, 0.0, 0.0, 1.0];
        let r0 = [0.0, 0.0];
        let prog = Program {
            n: 2,
            quad: None,
            c: vec![-1.0, -1.0],
            rows: &[],
            rhs: &[],
            eq_rows: vec![],
            eq_rhs: vec![],
            ball: Some(BallRow {
                k: &k,
                rows: 2,
                gram: &k,
                r0: &r0,
                t: 1.0,
            }),
            box_radius: Some(1e8),
        };
        let sol = solve_simple(&prog);
        assert!((sol.x[0] + sol.x[1] - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn equality_constrained_lp() {
        // min x₁ s.t. x₁ + x₂ = 1, x ≥ 0 → 0
        let rows = vec![Row::Axis { j: 0, coef: -1.0 }, Row::Axis { j: 1, coef: -1.0 }];
        let rhs = [0.0, 0.0];
        let prog = Program {
            n: 2,
            quad: None,
            c: vec![1.0, 0.0],
            rows: &rows,
            rhs: &rhs,
            eq_rows: vec![vec![1.0, 1.0]],
            eq_rhs: vec![1.0],
            ball: None,
            box_radius: Some(1e8),
        };
        let sol = solve_simple(&prog);
        assert!(sol.x[0].abs() < 1e-8);
        assert!((sol.x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let mut l = a;
        assert!(cholesky_in_place(&mut l, 3));
        let mut b = [1.0, 2.0, 3.0];
        cholesky_solve(&l, 3, &mut b);
        for i in 0..3 {
            let r: f64 = (0..3).map(|j| a[i * 3 + j] * b[j]).sum();
            assert!((r - [1.0, 2.0, 3.0][i]).abs() < 1e-12);
        }
    }
}
