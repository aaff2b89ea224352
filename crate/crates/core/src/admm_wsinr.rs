//! ADMM for the weighted-SINR surrogate: maximise
//! `lambda ||h1||^2 + (1 - lambda) ||h2||^2` over `h1 ⟂ h2`, `|x_l| <= 1`,
//! splitting the modulus box onto a copy `y` of `x`.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::channel::{complex_gaussian, ChannelSet};
use crate::config::AdmmConfig;
use crate::linalg::{svd, to_real};
use crate::qcqp::{assemble_wsinr_x, escape_step, feasible_init, solve_bounded, Qcqp};
use crate::system_model::{orthogonality_residual, project_unit_disc, RisVector};
use crate::{CVec, Complex64, Error, Result, User};

/// Moduli within this distance of one count as active box constraints
/// when recovering the box multipliers.
pub const ACTIVE_MODULUS_TOL: f64 = 1e-4;

/// Elementwise `proj(x_l + mu_l / rho)` onto the unit disc.
pub fn y_update(x: &CVec, mu: &CVec, rho: f64) -> CVec {
    x.zip_map(mu, |xl, ml| project_unit_disc(xl + ml / rho))
}

/// How an iteration produced its x-iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Bounded subproblem solved globally.
    Global,
    /// Unbounded subproblem, escape step taken.
    Escape,
    /// Unbounded subproblem without a decreasing escape step; x kept.
    Hold,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Global => "sdr",
            Branch::Escape => "escape",
            Branch::Hold => "hold",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// Surrogate objective at `x_k`.
    pub objective: f64,
    /// `||x_k - y_k||`.
    pub primal_gap: f64,
    /// `||y_k - y_{k-1}||`.
    pub dual_gap: f64,
    pub rho: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsinrState {
    pub x: CVec,
    pub y: CVec,
    pub mu: CVec,
    pub rho: f64,
    pub k: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// First-order certificate of a terminal point.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `||r|| / (1 + ||grad f||)` with `r` the Lagrangian gradient at the
    /// least-squares multiplier.
    pub stationarity: f64,
    /// `||tau ⊙ (|x|^2 - 1)||`.
    pub complementarity: f64,
    pub constraint_residual: f64,
    /// `max(0, max_l |x_l| - 1)`.
    pub modulus_violation: f64,
    pub multiplier: Complex64,
    pub box_multipliers: Vec<f64>,
    /// `||F2 x + d2 - z||` for the sum-rate splitting.
    pub consistency: Option<f64>,
}

/// Build the certificate from the objective gradient `grad0` (the
/// conjugate-Wirtinger gradient scaled by two) and the box multipliers
/// carried by the splitting, `mu = tau ⊙ x` at a KKT point.
pub(crate) fn kkt_from_gradient(q: &Qcqp, x: &CVec, grad0: &CVec, mu: &CVec) -> KktReport {
    let taus: Vec<f64> = x
        .iter()
        .zip(mu.iter())
        .map(|(xl, ml)| {
            let m2 = xl.norm_sqr();
            if m2.sqrt() >= 1.0 - ACTIVE_MODULUS_TOL && m2 > 0.0 {
                ((ml * xl.conj()).re / m2).max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let base = CVec::from_fn(x.len(), |l, _| grad0[l] + x[l] * taus[l]);
    let (c1, c2) = q.constraint_linear_terms(x);
    let dir_re = &c1 + &c2;
    let dir_im = (&c2 - &c1) * Complex64::i();
    let n = x.len();
    let mut lhs = DMatrix::<f64>::zeros(2 * n, 2);
    lhs.column_mut(0).copy_from(&to_real(&dir_re));
    lhs.column_mut(1).copy_from(&to_real(&dir_im));
    let rhs = -to_real(&base);
    let nu = svd(lhs, true, true)
        .ok()
        .and_then(|s| s.solve(&rhs, 1e-12).ok())
        .map(|v| Complex64::new(v[0], v[1]))
        .unwrap_or(Complex64::new(0.0, 0.0));
    let residual = base + dir_re * Complex64::new(nu.re, 0.0) + dir_im * Complex64::new(nu.im, 0.0);
    let complementarity = taus
        .iter()
        .zip(x.iter())
        .map(|(t, xl)| (t * (xl.norm_sqr() - 1.0)).powi(2))
        .sum::<f64>()
        .sqrt();
    let peak = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    KktReport {
        stationarity: residual.norm() / (1.0 + grad0.norm()),
        complementarity,
        constraint_residual: q.constraint(x).norm(),
        modulus_violation: (peak - 1.0).max(0.0),
        multiplier: nu,
        box_multipliers: taus,
        consistency: None,
    }
}

/// KKT residuals of the weighted-SINR surrogate at `x` with the box
/// multipliers read off `mu_star`.
pub fn kkt_residual(cs: &ChannelSet, lambda: f64, x: &CVec, mu_star: &CVec) -> Result<KktReport> {
    let n = cs.n();
    let q = assemble_wsinr_x(cs, lambda, 1.0, &CVec::zeros(n), &CVec::zeros(n))?;
    if mu_star.len() != n {
        return Err(Error::Dimension(format!("mu has length {}, expected {n}", mu_star.len())));
    }
    let (h1, h2) = cs.effective_channels(x)?;
    let grad0 = -(cs.reflect(User::One).ad_mul(&h1).scale(2.0 * lambda)
        + cs.reflect(User::Two).ad_mul(&h2).scale(2.0 * (1.0 - lambda)));
    Ok(kkt_from_gradient(&q, x, &grad0, mu_star))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WsinrOutcome {
    /// Last x-iterate clipped onto the unit disc.
    pub x: RisVector,
    pub x0: RisVector,
    pub state: WsinrState,
    pub kkt: KktReport,
    pub orthogonality_residual: f64,
    pub objective: f64,
    /// `2 lambda_max(lambda F1^H F1 + (1 - lambda) F2^H F2)`; the x-step is
    /// convex once the penalty exceeds it.
    pub convexity_threshold: f64,
}

/// Initial `(y0, mu0)`: either `(x0, 0)` or random draws.
fn initial_copies<R: Rng>(x0: &CVec, random: bool, rng: &mut R) -> (CVec, CVec) {
    if !random {
        return (x0.clone(), CVec::zeros(x0.len()));
    }
    let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let y = CVec::from_fn(x0.len(), |_, _| Complex64::from_polar(1.0, phase.sample(rng)));
    let mu = CVec::from_fn(x0.len(), |_, _| complex_gaussian(rng));
    (y, mu)
}

/// Residual-scaled orthogonality: zero when a channel vanishes at machine
/// precision relative to its parts.
pub fn channel_orthogonality(cs: &ChannelSet, x: &CVec) -> Result<f64> {
    let (h1, h2) = cs.effective_channels(x)?;
    let negligible = |h: &CVec, j: User| {
        h.norm() <= 1e-12 * (cs.direct(j).norm() + cs.reflect(j).norm() * x.norm())
    };
    if negligible(&h1, User::One) || negligible(&h2, User::Two) {
        return Ok(0.0);
    }
    Ok(orthogonality_residual(&h1, &h2))
}

/// Run the weighted-SINR ADMM from the constructed feasible point.
/// `rng` is only drawn from when `cfg.random_init` is set.
pub fn run_alg1<R: Rng>(
    cs: &ChannelSet,
    lambda: f64,
    cfg: &AdmmConfig,
    rng: &mut R,
) -> Result<WsinrOutcome> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let x0 = feasible_init(cs)?.0;
    let (mut y, mut mu) = initial_copies(&x0, cfg.random_init, rng);
    let mut x = x0.clone();
    let mut rho = cfg.rho0;
    let mut gap = (&x - &y).norm();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k = 0;
    let surrogate = |x: &CVec| -> Result<f64> {
        let (h1, h2) = cs.effective_channels(x)?;
        Ok(lambda * h1.norm_squared() + (1.0 - lambda) * h2.norm_squared())
    };

    while k < cfg.k_max {
        k += 1;
        let q = assemble_wsinr_x(cs, lambda, rho, &mu, &y)?;
        let branch = if q.boundedness_margin()? > 0.0 {
            x = solve_bounded(&q)?.x;
            Branch::Global
        } else {
            match escape_step(&q, &x) {
                Ok(step) => {
                    x = step.solution.x;
                    Branch::Escape
                }
                Err(Error::NoDecrease) => Branch::Hold,
                Err(e) => return Err(e),
            }
        };
        let y_next = y_update(&x, &mu, rho);
        mu += (&x - &y_next) * Complex64::new(rho, 0.0);
        let gap_next = (&x - &y_next).norm();
        let y_step = (&y_next - &y).norm();
        y = y_next;
        trace.push(TraceRow {
            k,
            objective: surrogate(&x)?,
            primal_gap: gap_next,
            dual_gap: y_step,
            rho,
            branch,
        });
        if gap_next > 0.25 * gap {
            rho *= cfg.delta;
        }
        gap = gap_next;
        if gap_next.max(y_step) <= cfg.eps {
            converged = true;
            break;
        }
    }

    let f1 = cs.reflect(User::One);
    let f2 = cs.reflect(User::Two);
    let gram = f1.ad_mul(f1).scale(lambda) + f2.ad_mul(f2).scale(1.0 - lambda);
    let convexity_threshold = 2.0 * crate::linalg::lambda_max(&gram)?;
    if converged && rho <= convexity_threshold {
        log::warn!(
            "penalty {rho:e} ended below the convexity threshold {convexity_threshold:e}"
        );
    }
    let clipped = RisVector(x.clone()).clipped();
    let kkt = kkt_residual(cs, lambda, &clipped.0, &mu)?;
    Ok(WsinrOutcome {
        orthogonality_residual: channel_orthogonality(cs, &clipped.0)?,
        objective: surrogate(&clipped.0)?,
        x: clipped,
        x0: RisVector(x0),
        state: WsinrState { x, y, mu, rho, k, converged, trace },
        kkt,
        convexity_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gaussian_matrix, make_channel_set, stream_rng};
    use crate::config::ScenarioConfig;
    use crate::CMat;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cvec(seed: u64, len: usize) -> CVec {
        gaussian_matrix(&mut stream_rng(seed, 3, 5), len, 1).column(0).into_owned()
    }

    fn channels(m: usize, n: usize, seed: u64) -> ChannelSet {
        let mut cfg = ScenarioConfig::wsinr_small();
        cfg.m = m;
        cfg.n = n;
        cfg.seed = seed;
        make_channel_set(&cfg, 0).unwrap()
    }

    #[test]
    fn y_update_examples() {
        let x = CVec::from_vec(vec![c(0.3, -0.4), c(0.9, 0.0)]);
        assert_eq!(y_update(&x, &CVec::zeros(2), 2.0), x);
        let mu = CVec::from_vec(vec![c(1.0, 0.0), c(2.0, 2.0)]);
        let a = y_update(&x, &mu, 0.5);
        let b = y_update(&x, &(&mu * c(3.0, 0.0)), 1.5);
        assert_eq!(a, b);
        assert!(a.iter().all(|z| z.norm() <= 1.0 + 1e-15));
    }

    /// The y-subproblem objective of one coordinate.
    fn y_objective(y: Complex64, x: Complex64, mu: Complex64, rho: f64) -> f64 {
        rho / 2.0 * y.norm_sqr() - (y.conj() * (x * rho + mu)).re
    }

    #[test]
    fn y_update_matches_polar_grid() {
        let x = cvec(1, 6) * c(0.8, 0.0);
        let mu = cvec(2, 6);
        let rho = 0.7;
        let y = y_update(&x, &mu, rho);
        for l in [0, 2, 5] {
            let mut best = f64::INFINITY;
            for i in 0..100 {
                let r = (i as f64 + 0.5) / 100.0;
                for j in 0..100 {
                    let phi = j as f64 / 100.0 * std::f64::consts::TAU;
                    best = best.min(y_objective(Complex64::from_polar(r, phi), x[l], mu[l], rho));
                }
            }
            let ours = y_objective(y[l], x[l], mu[l], rho);
            assert!(ours <= best + 1e-12, "l={l}: {ours} vs grid {best}");
            assert!(best - ours <= 0.1 * rho, "grid too far from closed form");
        }
    }

    #[test]
    fn kkt_zero_in_homogeneous_case() {
        let cs = channels(2, 5, 1);
        let cs = ChannelSet::from_parts(
            cs.bs_ris().clone(),
            CVec::zeros(2),
            CVec::zeros(2),
            cs.ris_user(User::One).clone(),
            cs.ris_user(User::Two).clone(),
        )
        .unwrap();
        let r = kkt_residual(&cs, 0.5, &CVec::zeros(5), &CVec::zeros(5)).unwrap();
        assert_eq!(r.stationarity, 0.0);
        assert_eq!(r.complementarity, 0.0);
        assert_eq!(r.constraint_residual, 0.0);
        assert_eq!(r.multiplier, c(0.0, 0.0));
        assert!(r.box_multipliers.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn kkt_certifies_global_subproblem_optimum() {
        // A global x-step with y = x, mu = 0 and large rho is stationary for
        // the penalised problem; with mu absorbing the penalty gradient the
        // surrogate stationarity holds exactly.
        let cs = channels(2, 2, 3);
        let lambda = 0.5;
        let y = cvec(5, 2) * c(0.1, 0.0);
        let rho = 200.0;
        let q = assemble_wsinr_x(&cs, lambda, rho, &CVec::zeros(2), &y).unwrap();
        let sol = solve_bounded(&q).unwrap();
        let mu_equiv = (&sol.x - &y) * c(rho, 0.0);
        // Interior point: the box multipliers are zero, so fold the penalty
        // term into the gradient by hand.
        let (h1, h2) = cs.effective_channels(&sol.x).unwrap();
        let grad0 = -(cs.reflect(User::One).ad_mul(&h1).scale(2.0 * lambda)
            + cs.reflect(User::Two).ad_mul(&h2).scale(2.0 * (1.0 - lambda)))
            + &mu_equiv;
        let r = kkt_from_gradient(&q, &sol.x, &grad0, &CVec::zeros(2));
        assert!(r.stationarity <= 1e-6, "stationarity {}", r.stationarity);
    }

    #[test]
    fn blind_surface_converges_to_direct_objective() {
        let base = channels(2, 6, 2);
        let cs = ChannelSet::from_parts(
            CMat::zeros(6, 2),
            base.direct(User::One).clone(),
            base.direct(User::Two).clone(),
            base.ris_user(User::One).clone(),
            base.ris_user(User::Two).clone(),
        )
        .unwrap();
        // F = 0 leaves no pseudo-inverse to build x0 from.
        let cfg = AdmmConfig::default();
        let err = run_alg1(&cs, 0.5, &cfg, &mut stream_rng(0, 0, 0)).unwrap_err();
        assert!(matches!(err, Error::ConditionsUnmet(_)));
    }

    #[test]
    fn trace_and_penalty_invariants() {
        let cs = channels(2, 8, 4);
        let cfg = AdmmConfig { rho0: 1.0, delta: 1.5, k_max: 40, ..AdmmConfig::default() };
        let out = run_alg1(&cs, 0.5, &cfg, &mut stream_rng(0, 0, 0)).unwrap();
        assert_eq!(out.state.trace.len(), out.state.k);
        assert!(out.state.k <= cfg.k_max);
        for w in out.state.trace.windows(2) {
            assert!(w[1].rho >= w[0].rho);
            let fired = w[1].rho > w[0].rho;
            assert_eq!(fired, w[0].primal_gap > 0.25 * prev_gap(&out.state.trace, w[0].k));
        }
        assert!(out.x.is_feasible());
    }

    fn prev_gap(trace: &[TraceRow], k: usize) -> f64 {
        if k == 1 {
            0.0
        } else {
            trace[k - 2].primal_gap
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn y_update_scale_invariant(seed in 0u64..10_000, s in 0.1f64..10.0) {
            let x = cvec(seed, 4);
            let mu = cvec(seed + 1, 4);
            let a = y_update(&x, &mu, 0.8);
            let b = y_update(&x, &(&mu * c(s, 0.0)), 0.8 * s);
            prop_assert!((a - b).norm() <= 1e-12);
        }

        #[test]
        fn y_update_in_disc(seed in 0u64..10_000, rho in 0.01f64..10.0) {
            let y = y_update(&cvec(seed, 5), &cvec(seed + 7, 5), rho);
            prop_assert!(y.iter().all(|z| z.norm() <= 1.0 + 1e-15));
        }
    }
}
