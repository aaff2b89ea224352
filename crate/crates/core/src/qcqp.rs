//! The recurring x-subproblem: minimise `f(x) = x^H A x + 2 Re(x^H a)`
//! subject to the single complex equality
//! `g(x) = x^H B x + x^H b_l + b_r^H x + c = 0`.
//!
//! When `A` is positive definite the problem is solved globally through its
//! two-multiplier Lagrangian dual. Otherwise [`escape_step`] builds a
//! feasibility-preserving descent ray from a feasible point.

use std::io::{self, Write};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::channel::ChannelSet;
use crate::linalg::{
    complex_null_space, complex_rank, hermitian_cholesky, hermitian_eig, inf_norm, lambda_min, pinv, real_null_space,
    real_rep, svd, symmetric_eig, to_real, from_real, quad_form,
};
use crate::system_model::RisVector;
use crate::{CMat, CVec, Complex64, Error, Result, User};

/// Smallest objective decrease an escape step must deliver.
pub const MIN_DECREASE: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-12;
const DUAL_MAX_ITERS: usize = 200;
const RESTORE_MAX_ITERS: usize = 50;
const FLAT_REACH: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Qcqp {
    objective_quad: CMat,
    objective_lin: CVec,
    constraint_quad: CMat,
    constraint_left: CVec,
    constraint_right: CVec,
    constraint_const: Complex64,
}

impl Qcqp {
    /// `objective_quad` must be Hermitian to `1e-12` (relative to its
    /// largest entry); it is stored exactly Hermitian.
    pub fn new(
        objective_quad: CMat,
        objective_lin: CVec,
        constraint_quad: CMat,
        constraint_left: CVec,
        constraint_right: CVec,
        constraint_const: Complex64,
    ) -> Result<Self> {
        let n = objective_lin.len();
        if objective_quad.shape() != (n, n)
            || constraint_quad.shape() != (n, n)
            || constraint_left.len() != n
            || constraint_right.len() != n
        {
            return Err(Error::Dimension(format!(
                "inconsistent QCQP sizes: A {:?}, a {}, B {:?}, b_l {}, b_r {}",
                objective_quad.shape(),
                n,
                constraint_quad.shape(),
                constraint_left.len(),
                constraint_right.len()
            )));
        }
        let finite = objective_quad
            .iter()
            .chain(objective_lin.iter())
            .chain(constraint_quad.iter())
            .chain(constraint_left.iter())
            .chain(constraint_right.iter())
            .chain(std::iter::once(&constraint_const))
            .all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::Numerical("non-finite QCQP data".into()));
        }
        let skew = (&objective_quad - objective_quad.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let size = objective_quad.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if skew > HERMITIAN_TOL * size.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "objective matrix is not Hermitian (skew {skew:e})"
            )));
        }
        let objective_quad = (&objective_quad + objective_quad.adjoint()).scale(0.5);
        Ok(Self {
            objective_quad,
            objective_lin,
            constraint_quad,
            constraint_left,
            constraint_right,
            constraint_const,
        })
    }

    pub fn n(&self) -> usize {
        self.objective_lin.len()
    }

    pub fn objective_quad(&self) -> &CMat {
        &self.objective_quad
    }

    pub fn objective_lin(&self) -> &CVec {
        &self.objective_lin
    }

    pub fn constraint_quad(&self) -> &CMat {
        &self.constraint_quad
    }

    pub fn constraint_left(&self) -> &CVec {
        &self.constraint_left
    }

    pub fn constraint_right(&self) -> &CVec {
        &self.constraint_right
    }

    pub fn constraint_const(&self) -> Complex64 {
        self.constraint_const
    }

    /// Same instance with the objective multiplied by `c`.
    pub fn scaled_objective(&self, c: f64) -> Result<Self> {
        Self::new(
            self.objective_quad.scale(c),
            self.objective_lin.scale(c),
            self.constraint_quad.clone(),
            self.constraint_left.clone(),
            self.constraint_right.clone(),
            self.constraint_const,
        )
    }

    pub fn objective(&self, x: &CVec) -> f64 {
        quad_form(&self.objective_quad, x) + 2.0 * x.dotc(&self.objective_lin).re
    }

    /// `A x + a`; the objective gradient is twice this.
    pub fn objective_half_gradient(&self, x: &CVec) -> CVec {
        &self.objective_quad * x + &self.objective_lin
    }

    pub fn constraint(&self, x: &CVec) -> Complex64 {
        x.dotc(&(&self.constraint_quad * x))
            + x.dotc(&self.constraint_left)
            + self.constraint_right.dotc(x)
            + self.constraint_const
    }

    /// `(B x + b_l, B^H x + b_r)`, so that
    /// `g(x + s) = g(x) + s^H c1 + c2^H s + s^H B s`.
    pub fn constraint_linear_terms(&self, x: &CVec) -> (CVec, CVec) {
        (
            &self.constraint_quad * x + &self.constraint_left,
            self.constraint_quad.ad_mul(x) + &self.constraint_right,
        )
    }

    /// Smallest eigenvalue of the objective matrix; the subproblem is
    /// bounded below (and solved globally) iff this is positive.
    pub fn boundedness_margin(&self) -> Result<f64> {
        lambda_min(&self.objective_quad)
    }

    /// Feasibility tolerance `1e-8 (1 + |c|)`.
    pub fn feasibility_tol(&self) -> f64 {
        1e-8 * (1.0 + self.constraint_const.norm())
    }

    fn constraint_scale(&self, x: &CVec) -> f64 {
        let xn = x.norm();
        1.0 + self.constraint_const.norm()
            + self.constraint_quad.norm() * xn * xn
            + (self.constraint_left.norm() + self.constraint_right.norm()) * xn
    }

    /// Plain-text dump: one block per coefficient, one matrix row per line,
    /// entries written as `re,im` separated by spaces.
    pub fn write_text<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let n = self.n();
        let write_row = |out: &mut W, row: &mut dyn Iterator<Item = Complex64>| -> io::Result<()> {
            let cells: Vec<String> = row.map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            writeln!(out, "{}", cells.join(" "))
        };
        for (name, m) in [("A1", &self.objective_quad), ("A2", &self.constraint_quad)] {
            writeln!(out, "# {name} {n}x{n}")?;
            for r in 0..n {
                write_row(out, &mut m.row(r).iter().copied())?;
            }
        }
        for (name, v) in [
            ("a1", &self.objective_lin),
            ("a2", &self.constraint_left),
            ("a3", &self.constraint_right),
        ] {
            writeln!(out, "# {name} {n}x1")?;
            for z in v.iter() {
                write_row(out, &mut std::iter::once(*z))?;
            }
        }
        writeln!(out, "# a4 1x1")?;
        write_row(out, &mut std::iter::once(self.constraint_const))
    }
}

/// Orthogonality constraint `h1^H h2 = 0` written in x.
fn orthogonality_constraint(cs: &ChannelSet) -> (CMat, CVec, CVec, Complex64) {
    let f1 = cs.reflect(User::One);
    let f2 = cs.reflect(User::Two);
    let d1 = cs.direct(User::One);
    let d2 = cs.direct(User::Two);
    (f1.ad_mul(f2), f1.ad_mul(d2), f2.ad_mul(d1), d1.dotc(d2))
}

fn check_len(name: &str, v: &CVec, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::Dimension(format!("{name} has length {}, expected {len}", v.len())));
    }
    Ok(())
}

/// x-subproblem of the weighted-SINR splitting.
pub fn assemble_wsinr_x(
    cs: &ChannelSet,
    lambda: f64,
    rho: f64,
    mu: &CVec,
    y: &CVec,
) -> Result<Qcqp> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
    }
    let n = cs.n();
    check_len("mu", mu, n)?;
    check_len("y", y, n)?;
    let f1 = cs.reflect(User::One);
    let f2 = cs.reflect(User::Two);
    let gram = f1.ad_mul(f1).scale(lambda) + f2.ad_mul(f2).scale(1.0 - lambda);
    let quad = CMat::identity(n, n).scale(rho / 2.0) - gram;
    let lin = -(f1.ad_mul(cs.direct(User::One)).scale(lambda)
        + f2.ad_mul(cs.direct(User::Two)).scale(1.0 - lambda))
        - y.scale(rho / 2.0)
        + mu.scale(0.5);
    let (b, bl, br, c) = orthogonality_constraint(cs);
    Qcqp::new(quad, lin, b, bl, br, c)
}

/// Current iterates entering the sum-rate x-subproblem.
#[derive(Debug, Clone, Copy)]
pub struct SumRateXTerms<'a> {
    pub z: &'a CVec,
    pub y: &'a CVec,
    pub mu1: &'a CVec,
    pub mu2: &'a CVec,
    pub rho1: f64,
    pub rho2: f64,
}

/// x-subproblem of the sum-rate splitting.
pub fn assemble_sumrate_x(
    cs: &ChannelSet,
    p_t: f64,
    sigma2: f64,
    terms: SumRateXTerms<'_>,
) -> Result<Qcqp> {
    let SumRateXTerms { z, y, mu1, mu2, rho1, rho2 } = terms;
    if !(rho1 > 0.0) || !(rho2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "penalties must be > 0, got {rho1} and {rho2}"
        )));
    }
    let (m, n) = (cs.m(), cs.n());
    check_len("z", z, m)?;
    check_len("mu2", mu2, m)?;
    check_len("y", y, n)?;
    check_len("mu1", mu1, n)?;
    let f1 = cs.reflect(User::One);
    let f2 = cs.reflect(User::Two);
    let weight = p_t * (p_t * z.norm_squared() + 2.0 * sigma2);
    let quad = CMat::identity(n, n).scale(rho1 / 2.0) + f2.ad_mul(f2).scale(rho2 / 2.0)
        - f1.ad_mul(f1).scale(weight);
    let lin = -f1.ad_mul(cs.direct(User::One)).scale(weight)
        + mu1.scale(0.5)
        + f2.ad_mul(mu2).scale(0.5)
        - y.scale(rho1 / 2.0)
        + f2.ad_mul(&(cs.direct(User::Two) - z)).scale(rho2 / 2.0);
    let (b, bl, br, c) = orthogonality_constraint(cs);
    Qcqp::new(quad, lin, b, bl, br, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QcqpStatus {
    /// Global minimiser certified by the dual.
    Global,
    /// Feasible descent step of the unbounded case.
    Escape,
}

/// Dual certificate of a global solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCertificate {
    /// Multiplier of the equality, `L = f + Re(conj(nu) g)`.
    pub multiplier: Complex64,
    /// Dual value, a lower bound on the optimum.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QcqpSolution {
    pub x: CVec,
    pub objective: f64,
    pub g_residual: f64,
    pub status: QcqpStatus,
    pub dual: Option<DualCertificate>,
}

impl QcqpSolution {
    fn new(q: &Qcqp, x: CVec, status: QcqpStatus, dual: Option<DualCertificate>) -> Self {
        Self { objective: q.objective(&x), g_residual: q.constraint(&x).norm(), x, status, dual }
    }

    /// `(f(x) - dual value) / (1 + |f(x)|)`, for certified solutions.
    pub fn duality_gap(&self) -> Option<f64> {
        self.dual.map(|d| (self.objective - d.lower_bound) / (1.0 + self.objective.abs()))
    }
}

/// Real and imaginary parts of `g` as real-valued quadratics.
struct SplitConstraint {
    re_quad: CMat,
    re_lin: CVec,
    re_const: f64,
    im_quad: CMat,
    im_lin: CVec,
    im_const: f64,
}

impl SplitConstraint {
    fn new(q: &Qcqp) -> Self {
        let b = &q.constraint_quad;
        let bl = &q.constraint_left;
        let br = &q.constraint_right;
        let i = Complex64::i();
        Self {
            re_quad: (b + b.adjoint()).scale(0.5),
            re_lin: (bl + br).scale(0.5),
            re_const: q.constraint_const.re,
            im_quad: (b.adjoint() - b) * (i * 0.5),
            im_lin: (br - bl) * (i * 0.5),
            im_const: q.constraint_const.im,
        }
    }

    fn is_trivial(quad: &CMat, lin: &CVec, scale: f64) -> bool {
        quad.norm() + lin.norm() <= 1e-14 * scale
    }
}

struct DualPoint {
    nu: [f64; 2],
    chol: Cholesky<Complex64, Dyn>,
    rhs: CVec,
    x: CVec,
    value: f64,
    grad: [f64; 2],
}

fn dual_point(q: &Qcqp, sc: &SplitConstraint, nu: [f64; 2]) -> Option<DualPoint> {
    let k = &q.objective_quad + sc.re_quad.scale(nu[0]) + sc.im_quad.scale(nu[1]);
    let chol = hermitian_cholesky(&k)?;
    let rhs = &q.objective_lin + sc.re_lin.scale(nu[0]) + sc.im_lin.scale(nu[1]);
    let x = -chol.solve(&rhs);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    let value = nu[0] * sc.re_const + nu[1] * sc.im_const + rhs.dotc(&x).re;
    let g = q.constraint(&x);
    Some(DualPoint { nu, chol, rhs, x, value, grad: [g.re, g.im] })
}

/// Ascent direction `(-H)^+ grad` with small curvature directions dropped.
fn newton_direction(sc: &SplitConstraint, p: &DualPoint) -> Result<[f64; 2]> {
    let r_re = &sc.re_quad * &p.x + &sc.re_lin;
    let r_im = &sc.im_quad * &p.x + &sc.im_lin;
    let s_re = p.chol.solve(&r_re);
    let s_im = p.chol.solve(&r_im);
    let curvature = DMatrix::from_row_slice(
        2,
        2,
        &[
            2.0 * r_re.dotc(&s_re).re,
            2.0 * r_re.dotc(&s_im).re,
            2.0 * r_im.dotc(&s_re).re,
            2.0 * r_im.dotc(&s_im).re,
        ],
    );
    let (vals, vecs) = symmetric_eig(&curvature)?;
    let top = vals.iter().cloned().fold(0.0, f64::max);
    let mut dir = [0.0; 2];
    let mut flat = [0.0; 2];
    for (k, &lam) in vals.iter().enumerate() {
        let v = vecs.column(k);
        let proj = v[0] * p.grad[0] + v[1] * p.grad[1];
        if lam <= 1e-12 * top || lam <= 0.0 {
            flat[0] += proj * v[0];
            flat[1] += proj * v[1];
            continue;
        }
        dir[0] += proj / lam * v[0];
        dir[1] += proj / lam * v[1];
    }
    // The dual is linear along flat directions up to the boundary of the
    // positive definite region; aim far and let the line search back off.
    let flat_norm = flat[0].hypot(flat[1]);
    if flat_norm > 0.0 {
        let reach = FLAT_REACH * (1.0 + p.nu[0].hypot(p.nu[1]));
        dir[0] += reach * flat[0] / flat_norm;
        dir[1] += reach * flat[1] / flat_norm;
    }
    Ok(dir)
}

/// Global minimiser of a bounded instance (`boundedness_margin > 0`).
pub fn solve_bounded(q: &Qcqp) -> Result<QcqpSolution> {
    let margin = q.boundedness_margin()?;
    if !(margin > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solve_bounded needs a positive definite objective, margin is {margin:e}"
        )));
    }
    let sc = SplitConstraint::new(q);
    let scale = 1.0 + q.objective_quad.norm() + q.constraint_quad.norm();
    let constraint_size =
        q.constraint_quad.norm() + q.constraint_left.norm() + q.constraint_right.norm();
    // A vanishing constraint part leaves a constant that must already be zero.
    for (quad, lin, c) in [
        (&sc.re_quad, &sc.re_lin, sc.re_const),
        (&sc.im_quad, &sc.im_lin, sc.im_const),
    ] {
        if SplitConstraint::is_trivial(quad, lin, constraint_size) && c.abs() > q.feasibility_tol() {
            return Err(Error::Infeasible);
        }
    }

    let mut cur = dual_point(q, &sc, [0.0, 0.0])
        .ok_or_else(|| Error::Numerical("objective matrix failed Cholesky".into()))?;
    for _ in 0..DUAL_MAX_ITERS {
        let g_norm = cur.grad[0].hypot(cur.grad[1]);
        if g_norm <= 1e-14 * q.constraint_scale(&cur.x) {
            break;
        }
        let dir = newton_direction(&sc, &cur)?;
        let slope = dir[0] * cur.grad[0] + dir[1] * cur.grad[1];
        if !(slope > 0.0) {
            break;
        }
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..120 {
            let nu = [cur.nu[0] + step * dir[0], cur.nu[1] + step * dir[1]];
            if let Some(p) = dual_point(q, &sc, nu) {
                let slack = 1e-15 * (1.0 + cur.value.abs());
                if p.value >= cur.value + 1e-4 * step * slope - slack {
                    next = Some(p);
                    break;
                }
            }
            step *= 0.5;
        }
        match next {
            Some(p) => {
                let stalled = (p.value - cur.value).abs() <= 1e-16 * (1.0 + cur.value.abs())
                    && step < 1e-10;
                cur = p;
                if stalled {
                    break;
                }
            }
            None => break,
        }
        if cur.nu[0].hypot(cur.nu[1]) > 1e14 * scale {
            return Err(Error::Infeasible);
        }
    }

    let mut x = cur.x.clone();
    if q.constraint(&x).norm() > 1e-6 * q.constraint_scale(&x) {
        x = hard_case_point(q, &sc, &cur).unwrap_or(x);
    }
    let x = restore_feasibility(q, &x, None);
    let sol = QcqpSolution::new(
        q,
        x,
        QcqpStatus::Global,
        Some(DualCertificate {
            multiplier: Complex64::new(cur.nu[0], cur.nu[1]),
            lower_bound: cur.value,
        }),
    );
    if sol.g_residual > q.feasibility_tol() {
        return Err(Error::Numerical(format!(
            "global solve ended with |g| = {:e}",
            sol.g_residual
        )));
    }
    Ok(sol)
}

/// Dual optimum on the boundary of the positive definite region: combine
/// the minimum-norm stationary point with the kernel of the Lagrangian
/// Hessian to reach `g = 0` at the same Lagrangian value.
fn hard_case_point(q: &Qcqp, sc: &SplitConstraint, p: &DualPoint) -> Option<CVec> {
    let k = &q.objective_quad + sc.re_quad.scale(p.nu[0]) + sc.im_quad.scale(p.nu[1]);
    let (vals, vecs) = hermitian_eig(&k).ok()?;
    let top = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let kernel: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] <= 1e-7 * top).collect();
    if kernel.is_empty() {
        return None;
    }
    let basis = CMat::from_fn(k.nrows(), kernel.len(), |r, c| vecs[(r, kernel[c])]);
    let base = -(pinv(&k).ok()? * &p.rhs);
    // Kick along the kernel so the linearisation is not singular at the start.
    let mut best: Option<CVec> = None;
    for col in 0..basis.ncols() {
        let v = basis.column(col).into_owned();
        let curv = q.constraint(&(&base + &v)) - q.constraint(&base);
        let kick = (q.constraint(&base).norm() / curv.norm().max(1e-300)).sqrt().min(1e6);
        for sign in [1.0, -1.0] {
            let start = &base + &v * Complex64::new(sign * kick, 0.0);
            let cand = restore_feasibility(q, &start, Some(&basis));
            let res = q.constraint(&cand).norm();
            if res <= q.feasibility_tol()
                && best.as_ref().is_none_or(|b| q.objective(&cand) < q.objective(b))
            {
                best = Some(cand);
            }
        }
    }
    best
}

/// Minimum-norm Gauss-Newton projection onto `g = 0`, optionally moving only
/// inside the column span of `basis`.
pub fn restore_feasibility(q: &Qcqp, x0: &CVec, basis: Option<&CMat>) -> CVec {
    let mut x = x0.clone();
    let target = 1e-15 * q.constraint_scale(x0);
    for _ in 0..RESTORE_MAX_ITERS {
        let g = q.constraint(&x);
        if g.norm() <= target {
            break;
        }
        let (c1, c2) = q.constraint_linear_terms(&x);
        let sum = &c1 + &c2;
        let diff = &c1 - &c2;
        let n = x.len();
        let mut jac = DMatrix::<f64>::zeros(2, 2 * n);
        for l in 0..n {
            jac[(0, l)] = sum[l].re;
            jac[(0, l + n)] = sum[l].im;
            jac[(1, l)] = diff[l].im;
            jac[(1, l + n)] = -diff[l].re;
        }
        let (jac, lift) = match basis {
            Some(z) => {
                let zr = real_rep(z);
                (&jac * &zr, Some(zr))
            }
            None => (jac, None),
        };
        let rhs = DVector::from_vec(vec![-g.re, -g.im]);
        let Some(step) = svd(jac.clone(), true, true).ok().and_then(|s| s.solve(&rhs, 1e-12).ok()) else {
            break;
        };
        let step = match &lift {
            Some(zr) => zr * step,
            None => step,
        };
        let cand = &x + from_real(&step);
        if q.constraint(&cand).norm() >= g.norm() {
            // Linearisation no longer helps; keep the best point found.
            let half = &x + from_real(&step.scale(0.5));
            if q.constraint(&half).norm() < g.norm() {
                x = half;
                continue;
            }
            break;
        }
        x = cand;
    }
    x
}

/// Result of [`escape_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeStep {
    pub solution: QcqpSolution,
    /// Step `s` with `g(x_k + alpha s) = g(x_k)` for every `alpha`.
    pub direction: CVec,
    /// Dimension of the real nullspace the step was drawn from.
    pub nullity: usize,
}

/// Real stacked system whose nullspace keeps `g(x_k + s)` equal to
/// `g(x_k)`: `B s = 0` plus the two real parts of the linear term.
pub fn escape_system(q: &Qcqp, x_k: &CVec) -> DMatrix<f64> {
    let n = q.n();
    let (c1, c2) = q.constraint_linear_terms(x_k);
    let mut w = DMatrix::<f64>::zeros(2 * n + 2, 2 * n);
    w.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&real_rep(&q.constraint_quad));
    for l in 0..n {
        let sum = c1[l] + c2[l];
        w[(2 * n, l)] = sum.re;
        w[(2 * n, l + n)] = sum.im;
        w[(2 * n + 1, l)] = c1[l].im - c2[l].im;
        w[(2 * n + 1, l + n)] = c2[l].re - c1[l].re;
    }
    w
}

/// Numerical rank of [`escape_system`] together with the bound `2M + 2`
/// that holds for instances assembled from M-antenna channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub rank: usize,
    pub bound: usize,
}

impl RankCheck {
    pub fn holds(&self) -> bool {
        self.rank <= self.bound
    }
}

pub fn rank_deficiency_check(q: &Qcqp, x_k: &CVec, m: usize) -> Result<RankCheck> {
    let (rank, _) = real_null_space(&escape_system(q, x_k))?;
    Ok(RankCheck { rank, bound: 2 * m + 2 })
}

/// Feasible descent step for an instance that may be unbounded below.
pub fn escape_step(q: &Qcqp, x_k: &CVec) -> Result<EscapeStep> {
    if x_k.len() != q.n() {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x_k.len(), q.n())));
    }
    if x_k.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite escape start".into()));
    }
    let g0 = q.constraint(x_k).norm();
    if g0 > q.feasibility_tol() {
        return Err(Error::InvalidParameter(format!(
            "escape step needs a feasible start, |g| = {g0:e}"
        )));
    }
    let (_, v2) = real_null_space(&escape_system(q, x_k))?;
    if v2.ncols() == 0 {
        return Err(Error::NullspaceEmpty);
    }
    let reduced = v2.transpose() * real_rep(&q.objective_quad) * &v2;
    let lin = v2.transpose() * to_real(&q.objective_half_gradient(x_k));
    let f0 = q.objective(x_k);
    let lift = |u: &DVector<f64>| from_real(&(&v2 * u));
    let decreases = |s: &CVec| f0 - q.objective(&(x_k + s)) >= MIN_DECREASE;

    let (vals, vecs) = symmetric_eig(&reduced)?;
    let top = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let zero_tol = 1e-12 * top.max(1e-300);
    let lin_tol = 1e-12 * (1.0 + lin.norm());
    let mut chosen: Option<CVec> = None;
    for (k, &eig) in vals.iter().enumerate() {
        if eig > zero_tol {
            break;
        }
        let mut u = vecs.column(k).into_owned();
        if lin.dot(&u) > 0.0 {
            u = -u;
        }
        if eig.abs() <= zero_tol && lin.dot(&u).abs() <= lin_tol {
            continue;
        }
        let base = lift(&u);
        let mut alpha = 1.0;
        for _ in 0..64 {
            let s = &base * Complex64::new(alpha, 0.0);
            if decreases(&s) {
                chosen = Some(s);
                break;
            }
            alpha *= 2.0;
        }
        if chosen.is_some() {
            break;
        }
    }
    if chosen.is_none() {
        let inv = svd(reduced.clone(), true, true)?
            .pseudo_inverse(1e-12 * top.max(1e-300))
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let s = lift(&(-(inv * &lin)));
        if decreases(&s) {
            chosen = Some(s);
        }
    }
    let direction = chosen.ok_or(Error::NoDecrease)?;
    let solution = QcqpSolution::new(q, x_k + &direction, QcqpStatus::Escape, None);
    Ok(EscapeStep { solution, direction, nullity: v2.ncols() })
}

/// Feasible starting point built from the nullspace of the cross-channel
/// map: `x = a y / ||y|| - F2^+ d2` with `F1^H F2 y = 0` and `d1^H F2 y = 0`.
/// Tries user 2 in the pseudo-inverse role first, then user 1.
pub fn feasible_init(cs: &ChannelSet) -> Result<RisVector> {
    let mut reasons = Vec::new();
    for (other, pinned) in [(User::One, User::Two), (User::Two, User::One)] {
        match feasible_init_with(cs, other, pinned) {
            Ok(x) => return Ok(x),
            Err(e) => reasons.push(format!("{pinned:?}: {e}")),
        }
    }
    Err(Error::ConditionsUnmet(reasons.join("; ")))
}

fn feasible_init_with(cs: &ChannelSet, other: User, pinned: User) -> Result<RisVector> {
    let (m, n) = (cs.m(), cs.n());
    let fp = cs.reflect(pinned);
    let dp = cs.direct(pinned);
    if complex_rank(fp)? != m {
        return Err(Error::ConditionsUnmet("reflected channel is rank deficient".into()));
    }
    let offset = pinv(fp)? * dp;
    let peak = inf_norm(&offset);
    if peak > 1.0 {
        return Err(Error::ConditionsUnmet(format!("||F^+ d||_inf = {peak:e} > 1")));
    }
    let fo = cs.reflect(other);
    let mut stacked = CMat::zeros(n + 1, m);
    stacked.view_mut((0, 0), (n, m)).copy_from(&fo.adjoint());
    stacked.row_mut(n).copy_from(&cs.direct(other).adjoint());
    let ns = complex_null_space(&(stacked * fp))?;
    if ns.ncols() == 0 {
        return Err(Error::ConditionsUnmet("cross-channel map has a trivial nullspace".into()));
    }
    let y = ns.column(0).into_owned();
    let a = 1.0 - peak;
    let x = y * Complex64::new(a, 0.0) - offset;
    let (h1, h2) = cs.effective_channels(&x)?;
    let g = h1.dotc(&h2).norm();
    if g > 1e-8 {
        return Err(Error::ConditionsUnmet(format!("constructed point has |g| = {g:e}")));
    }
    Ok(RisVector(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gaussian_matrix, make_channel_set, stream_rng};
    use crate::config::ScenarioConfig;
    use crate::linalg::lambda_max;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cvec(seed: u64, len: usize) -> CVec {
        gaussian_matrix(&mut stream_rng(seed, 1, 7), len, 1).column(0).into_owned()
    }

    fn cmat(seed: u64, r: usize, cols: usize) -> CMat {
        gaussian_matrix(&mut stream_rng(seed, 2, 7), r, cols)
    }

    fn small_channels(m: usize, n: usize, seed: u64) -> ChannelSet {
        let mut cfg = ScenarioConfig::wsinr_small();
        cfg.m = m;
        cfg.n = n;
        cfg.seed = seed;
        make_channel_set(&cfg, 0).unwrap()
    }

    /// Random bounded instance with a feasible point at a random x.
    fn random_bounded(seed: u64, n: usize) -> Qcqp {
        let r = cmat(seed, n, n);
        let quad = r.ad_mul(&r) + CMat::identity(n, n).scale(0.1);
        let b = cmat(seed + 1000, n, n);
        let bl = cvec(seed + 2000, n);
        let br = cvec(seed + 3000, n);
        let x0 = cvec(seed + 4000, n);
        let partial = x0.dotc(&(&b * &x0)) + x0.dotc(&bl) + br.dotc(&x0);
        Qcqp::new(quad, cvec(seed + 5000, n), b, bl, br, -partial).unwrap()
    }

    #[test]
    fn constraint_matches_channel_product() {
        let cs = small_channels(3, 6, 4);
        let q = assemble_wsinr_x(&cs, 0.4, 1.0, &CVec::zeros(6), &CVec::zeros(6)).unwrap();
        for s in 0..10 {
            let x = cvec(s, 6);
            let (h1, h2) = cs.effective_channels(&x).unwrap();
            let direct = h1.dotc(&h2);
            assert!((q.constraint(&x) - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        }
        let g0 = q.constraint(&CVec::zeros(6));
        assert_eq!(g0, cs.direct(User::One).dotc(cs.direct(User::Two)));
    }

    #[test]
    fn wsinr_assembly_special_case() {
        let cs = small_channels(2, 5, 1);
        let zero = CVec::zeros(5);
        let q = assemble_wsinr_x(&cs, 0.0, 2.0, &zero, &zero).unwrap();
        let f2 = cs.reflect(User::Two);
        let expected = CMat::identity(5, 5) - f2.ad_mul(f2);
        assert!((q.objective_quad() - expected).norm() < 1e-12);
        assert_eq!(q.objective(&zero), 0.0);
    }

    /// Weighted-SINR augmented Lagrangian written out in full.
    fn wsinr_lagrangian(cs: &ChannelSet, lambda: f64, rho: f64, mu: &CVec, y: &CVec, x: &CVec) -> f64 {
        let (h1, h2) = cs.effective_channels(x).unwrap();
        let diff = x - y;
        -lambda * h1.norm_squared() - (1.0 - lambda) * h2.norm_squared()
            + mu.dotc(&diff).re
            + rho / 2.0 * diff.norm_squared()
    }

    #[test]
    fn wsinr_assembly_drops_only_constants() {
        let cs = small_channels(3, 5, 2);
        let (lambda, rho) = (0.3, 1.7);
        let mu = cvec(1, 5);
        let y = cvec(2, 5);
        let q = assemble_wsinr_x(&cs, lambda, rho, &mu, &y).unwrap();
        for s in 0..5 {
            let x1 = cvec(10 + s, 5);
            let x2 = cvec(20 + s, 5);
            let lhs = q.objective(&x1) - q.objective(&x2);
            let rhs = wsinr_lagrangian(&cs, lambda, rho, &mu, &y, &x1)
                - wsinr_lagrangian(&cs, lambda, rho, &mu, &y, &x2);
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    fn sumrate_lagrangian(cs: &ChannelSet, p_t: f64, sigma2: f64, t: &SumRateXTerms<'_>, x: &CVec) -> f64 {
        let (h1, h2) = cs.effective_channels(x).unwrap();
        let z2 = t.z.norm_squared();
        let obj = p_t * p_t * h1.norm_squared() * z2 + 2.0 * p_t * sigma2 * (h1.norm_squared() + z2);
        let dx = x - t.y;
        let dz = h2 - t.z;
        -obj + t.mu1.dotc(&dx).re
            + t.rho1 / 2.0 * dx.norm_squared()
            + t.mu2.dotc(&dz).re
            + t.rho2 / 2.0 * dz.norm_squared()
    }

    #[test]
    fn sumrate_gradient_matches_finite_differences() {
        let cs = small_channels(3, 4, 5);
        let (z, y, mu1, mu2) = (cvec(1, 3), cvec(2, 4), cvec(3, 4), cvec(4, 3));
        let terms = SumRateXTerms { z: &z, y: &y, mu1: &mu1, mu2: &mu2, rho1: 0.7, rho2: 1.3 };
        let (p_t, sigma2) = (1.5, 0.2);
        let q = assemble_sumrate_x(&cs, p_t, sigma2, terms).unwrap();
        let x = cvec(5, 4);
        let grad = q.objective_half_gradient(&x) * c(2.0, 0.0);
        let h = 1e-6;
        for l in 0..4 {
            for (dir, part) in [(c(1.0, 0.0), 0), (c(0.0, 1.0), 1)] {
                let mut xp = x.clone();
                xp[l] += dir * h;
                let mut xm = x.clone();
                xm[l] -= dir * h;
                let fd = (sumrate_lagrangian(&cs, p_t, sigma2, &terms, &xp)
                    - sumrate_lagrangian(&cs, p_t, sigma2, &terms, &xm))
                    / (2.0 * h);
                let analytic = if part == 0 { grad[l].re } else { grad[l].im };
                assert!(
                    (fd - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()),
                    "l={l} part={part}: {fd} vs {analytic}"
                );
            }
        }
    }

    #[test]
    fn sumrate_assembly_without_weight_is_convex() {
        let cs = small_channels(2, 4, 6);
        let (z, y, mu1, mu2) = (CVec::zeros(2), CVec::zeros(4), CVec::zeros(4), CVec::zeros(2));
        let terms = SumRateXTerms { z: &z, y: &y, mu1: &mu1, mu2: &mu2, rho1: 0.5, rho2: 0.8 };
        let q = assemble_sumrate_x(&cs, 1.0, 0.0, terms).unwrap();
        let f2 = cs.reflect(User::Two);
        let expected = CMat::identity(4, 4).scale(0.25) + f2.ad_mul(f2).scale(0.4);
        assert!((q.objective_quad() - expected).norm() < 1e-12);
        assert!(q.boundedness_margin().unwrap() > 0.0);
        let qw = assemble_wsinr_x(&cs, 0.5, 1.0, &y, &y).unwrap();
        assert_eq!(q.constraint_quad(), qw.constraint_quad());
        assert_eq!(q.constraint_const(), qw.constraint_const());
    }

    #[test]
    fn margin_examples() {
        let one = |s: f64| {
            Qcqp::new(
                CMat::identity(3, 3).scale(s),
                CVec::zeros(3),
                CMat::zeros(3, 3),
                CVec::zeros(3),
                CVec::zeros(3),
                c(0.0, 0.0),
            )
            .unwrap()
        };
        assert!((one(1.0).boundedness_margin().unwrap() - 1.0).abs() < 1e-14);
        assert!((one(-1.0).boundedness_margin().unwrap() + 1.0).abs() < 1e-14);

        let cs = small_channels(3, 6, 3);
        let lambda = 0.3;
        let f1 = cs.reflect(User::One);
        let f2 = cs.reflect(User::Two);
        let gram = f1.ad_mul(f1).scale(lambda) + f2.ad_mul(f2).scale(1.0 - lambda);
        let eps = 0.01;
        let rho = 2.0 * lambda_max(&gram).unwrap() + 2.0 * eps;
        let zero = CVec::zeros(6);
        let q = assemble_wsinr_x(&cs, lambda, rho, &zero, &zero).unwrap();
        assert!((q.boundedness_margin().unwrap() - eps).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_hermitian_objective() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        let err = Qcqp::new(a, CVec::zeros(2), CMat::zeros(2, 2), CVec::zeros(2), CVec::zeros(2), c(0.0, 0.0));
        assert!(err.is_err());
    }

    #[test]
    fn rejects_non_finite_data() {
        let mut lin = CVec::zeros(2);
        lin[1] = c(f64::INFINITY, 0.0);
        let err = Qcqp::new(CMat::identity(2, 2), lin, CMat::zeros(2, 2), CVec::zeros(2), CVec::zeros(2), c(0.0, 0.0));
        assert!(matches!(err, Err(Error::Numerical(_))));
    }

    #[test]
    fn unit_circle_instance() {
        let q = Qcqp::new(
            CMat::identity(1, 1),
            CVec::from_element(1, c(1.0, 0.0)),
            CMat::identity(1, 1),
            CVec::zeros(1),
            CVec::zeros(1),
            c(-1.0, 0.0),
        )
        .unwrap();
        let sol = solve_bounded(&q).unwrap();
        assert!((sol.x[0] - c(-1.0, 0.0)).norm() < 1e-9);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!(sol.duality_gap().unwrap().abs() < 1e-9);
    }

    #[test]
    fn infeasible_constant_constraint() {
        let q = Qcqp::new(
            CMat::identity(2, 2),
            CVec::zeros(2),
            CMat::zeros(2, 2),
            CVec::zeros(2),
            CVec::zeros(2),
            c(1.0, 0.0),
        )
        .unwrap();
        assert_eq!(solve_bounded(&q).unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn bounded_solve_is_scale_invariant() {
        for seed in 0..10 {
            let q = random_bounded(seed, 4);
            let a = solve_bounded(&q).unwrap();
            let b = solve_bounded(&q.scaled_objective(7.5).unwrap()).unwrap();
            assert!((&a.x - &b.x).norm() <= 1e-6 * (1.0 + a.x.norm()), "seed {seed}");
        }
    }

    #[test]
    fn bounded_solve_beats_feasible_samples() {
        for seed in 0..10 {
            let q = random_bounded(seed, 3);
            let sol = solve_bounded(&q).unwrap();
            assert!(sol.g_residual <= q.feasibility_tol());
            assert!(sol.duality_gap().unwrap() <= 1e-6);
            let lb = sol.dual.unwrap().lower_bound;
            for s in 0..50 {
                let x = restore_feasibility(&q, &cvec(100 * seed + s, 3), None);
                if q.constraint(&x).norm() <= 1e-10 {
                    let fx = q.objective(&x);
                    assert!(lb <= fx + 1e-9 * (1.0 + fx.abs()));
                    assert!(sol.objective <= fx + 1e-6 * (1.0 + fx.abs()));
                }
            }
        }
    }

    #[test]
    fn hard_case_is_handled() {
        // min |x1|^2 + |x2|^2 - ... with a kernel at the dual optimum:
        // minimise -|x1|^2 + 2|x2|^2 style instances via f = x^H x and g = |x1|^2 - 4.
        let q = Qcqp::new(
            CMat::identity(2, 2),
            CVec::zeros(2),
            CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])),
            CVec::zeros(2),
            CVec::zeros(2),
            c(-4.0, 0.0),
        )
        .unwrap();
        let sol = solve_bounded(&q).unwrap();
        assert!(sol.g_residual <= q.feasibility_tol());
        assert!((sol.objective - 4.0).abs() < 1e-6);
    }

    #[test]
    fn escape_with_free_constraint() {
        let q = Qcqp::new(
            CMat::identity(3, 3).scale(-1.0),
            cvec(1, 3),
            CMat::zeros(3, 3),
            CVec::zeros(3),
            CVec::zeros(3),
            c(0.0, 0.0),
        )
        .unwrap();
        let x0 = cvec(2, 3);
        let out = escape_step(&q, &x0).unwrap();
        assert_eq!(out.nullity, 6);
        assert!(out.solution.objective < q.objective(&x0));
        assert_eq!(out.solution.g_residual, 0.0);
    }

    #[test]
    fn escape_on_channel_instance() {
        for seed in 0..5 {
            let cs = small_channels(2, 8, seed);
            let x0 = feasible_init(&cs).unwrap().0;
            let zero = CVec::zeros(8);
            let q = assemble_wsinr_x(&cs, 0.5, 1e-3, &zero, &x0).unwrap();
            assert!(q.boundedness_margin().unwrap() <= 0.0);
            let out = escape_step(&q, &x0).unwrap();
            let tol = 1e-8 * (1.0 + q.constraint_const().norm());
            assert!(out.solution.g_residual <= tol);
            assert!(out.solution.objective < q.objective(&x0) - MIN_DECREASE);
            for alpha in [0.5, 1.0, 2.0, 10.0] {
                let x = &x0 + &out.direction * c(alpha, 0.0);
                assert!(q.constraint(&x).norm() <= tol, "seed {seed} alpha {alpha}");
            }
        }
    }

    #[test]
    fn escape_rejects_infeasible_start() {
        let q = random_bounded(1, 2);
        assert!(escape_step(&q, &cvec(9, 2)).is_err());
    }

    #[test]
    fn escape_reports_empty_nullspace() {
        let q = Qcqp::new(
            CMat::identity(1, 1).scale(-1.0),
            CVec::zeros(1),
            CMat::identity(1, 1),
            CVec::zeros(1),
            CVec::zeros(1),
            c(-1.0, 0.0),
        )
        .unwrap();
        let x = CVec::from_element(1, c(1.0, 0.0));
        assert_eq!(escape_step(&q, &x).unwrap_err(), Error::NullspaceEmpty);
    }

    #[test]
    fn feasible_init_small_example() {
        let bs_ris = CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(1.0, 0.0)]);
        let cs = ChannelSet::from_parts(
            bs_ris,
            CVec::zeros(1),
            CVec::from_element(1, c(0.5, 0.0)),
            CVec::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)]),
            CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
        )
        .unwrap();
        let x = feasible_init(&cs).unwrap();
        let expected = CVec::from_vec(vec![c(-0.5, 0.0), c(0.5, 0.0)]);
        // The nullspace vector is defined up to a unit phase.
        assert!((x.0[0] - expected[0]).norm() < 1e-12);
        assert!((x.0[1].norm() - 0.5).abs() < 1e-12);
        let h2 = cs.effective_channel(User::Two, &x.0).unwrap();
        assert!(h2.norm() < 1e-12);
        assert!((x.max_modulus() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn feasible_init_homogeneous() {
        let cs = small_channels(2, 6, 3);
        let cs = ChannelSet::from_parts(
            cs.bs_ris().clone(),
            CVec::zeros(2),
            CVec::zeros(2),
            cs.ris_user(User::One).clone(),
            cs.ris_user(User::Two).clone(),
        )
        .unwrap();
        let x = feasible_init(&cs).unwrap();
        let q = assemble_wsinr_x(&cs, 0.5, 1.0, &CVec::zeros(6), &CVec::zeros(6)).unwrap();
        assert!(q.constraint(&x.0).norm() < 1e-12);
        assert!((x.max_modulus() - 1.0).abs() < 1e-12 || x.max_modulus() < 1.0);
    }

    #[test]
    fn feasible_init_conditions_unmet() {
        // N < M makes both reflected channels rank deficient.
        let cs = small_channels(3, 2, 1);
        assert!(matches!(feasible_init(&cs), Err(Error::ConditionsUnmet(_))));
    }

    #[test]
    fn rank_examples() {
        let cs = small_channels(2, 8, 1);
        let x = feasible_init(&cs).unwrap().0;
        let q = assemble_wsinr_x(&cs, 0.5, 1.0, &CVec::zeros(8), &x).unwrap();
        let check = rank_deficiency_check(&q, &x, 2).unwrap();
        assert_eq!(check.bound, 6);
        assert!(check.holds());

        let zero_f1 = ChannelSet::from_parts(
            cs.bs_ris().clone(),
            cs.direct(User::One).clone(),
            cs.direct(User::Two).clone(),
            CVec::zeros(8),
            cs.ris_user(User::Two).clone(),
        )
        .unwrap();
        let q = assemble_wsinr_x(&zero_f1, 0.5, 1.0, &CVec::zeros(8), &x).unwrap();
        assert!(rank_deficiency_check(&q, &x, 2).unwrap().rank <= 2);

        let cs = small_channels(1, 4, 2);
        let q = assemble_wsinr_x(&cs, 0.5, 1.0, &CVec::zeros(4), &CVec::zeros(4)).unwrap();
        let check = rank_deficiency_check(&q, &cvec(3, 4), 1).unwrap();
        assert_eq!(check.bound, 4);
        assert!(check.holds());
    }

    #[test]
    fn text_dump_layout() {
        let q = random_bounded(3, 2);
        let mut buf = Vec::new();
        q.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6 + 2 * 2 + 3 * 2 + 1);
        assert_eq!(lines[0], "# A1 2x2");
        assert_eq!(lines[1].split(' ').count(), 2);
        assert!(lines[1].split(' ').all(|cell| cell.split(',').count() == 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn channel_constraint_identity(seed in 0u64..10_000) {
            let cs = small_channels(2, 5, seed);
            let q = assemble_wsinr_x(&cs, 0.5, 1.0, &CVec::zeros(5), &CVec::zeros(5)).unwrap();
            let x = cvec(seed, 5);
            let (h1, h2) = cs.effective_channels(&x).unwrap();
            let direct = h1.dotc(&h2);
            prop_assert!((q.constraint(&x) - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
            prop_assert!((q.objective_quad() - q.objective_quad().adjoint()).norm() == 0.0);
        }

        #[test]
        fn solution_fields_are_recomputed(seed in 0u64..10_000) {
            let q = random_bounded(seed, 3);
            let sol = solve_bounded(&q).unwrap();
            prop_assert!((sol.objective - q.objective(&sol.x)).abs() <= 1e-10 * (1.0 + sol.objective.abs()));
            prop_assert!((sol.g_residual - q.constraint(&sol.x).norm()).abs() <= 1e-10);
            prop_assert!(sol.g_residual <= q.feasibility_tol());
        }

        #[test]
        fn escape_ray_stays_feasible(seed in 0u64..10_000) {
            let cs = small_channels(2, 6, seed);
            let x0 = feasible_init(&cs).unwrap().0;
            let q = assemble_wsinr_x(&cs, 0.5, 1e-2, &cvec(seed, 6), &x0).unwrap();
            if let Ok(out) = escape_step(&q, &x0) {
                for alpha in [0.5, 3.0] {
                    let x = &x0 + &out.direction * c(alpha, 0.0);
                    prop_assert!(q.constraint(&x).norm() <= q.feasibility_tol());
                }
            }
        }
    }
}
