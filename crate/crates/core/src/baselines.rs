//! Comparison schemes: zero forcing without a surface, random and DFT
//! surfaces with optimal precoding for that fixed surface, and WMMSE
//! without a surface.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::channel::ChannelSet;
use crate::linalg::hermitian_eig;
use crate::system_model::{Precoders, QosReport, RisVector};
use crate::{CMat, CVec, Complex64, Error, Result, User};

/// Points per axis of one grid level in the fixed-surface searches.
pub const GRID_POINTS: usize = 64;
/// Zoom levels after the initial grid.
pub const GRID_REFINEMENTS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    NoRisZf,
    RisRandom,
    RisDft,
    RisOptWsinr,
    RisOptSumrate,
    NoRisWmmse,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::NoRisZf,
        Scheme::RisRandom,
        Scheme::RisDft,
        Scheme::RisOptWsinr,
        Scheme::RisOptSumrate,
        Scheme::NoRisWmmse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::NoRisZf => "no_ris_zf",
            Scheme::RisRandom => "ris_random",
            Scheme::RisDft => "ris_dft",
            Scheme::RisOptWsinr => "ris_opt_wsinr",
            Scheme::RisOptSumrate => "ris_opt_sumrate",
            Scheme::NoRisWmmse => "no_ris_wmmse",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme tag {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: Scheme,
    /// Surface used, `None` for schemes without one.
    pub x: Option<RisVector>,
    pub precoders: Precoders,
    pub qos: QosReport,
    pub iterations: usize,
    /// Final grid spacing of the fixed-surface search; zero otherwise.
    pub search_width: f64,
    /// Sum rate after every WMMSE iteration; empty for other schemes.
    pub rate_trace: Vec<f64>,
}

/// Zero forcing on the direct channels, `P_T` split equally over the two
/// normalised pseudo-inverse columns.
pub fn zf_no_ris(cs: &ChannelSet, p_t: f64, sigma1_2: f64, sigma2_2: f64) -> Result<BaselineResult> {
    let d1 = cs.direct(User::One);
    let d2 = cs.direct(User::Two);
    let m = cs.m();
    let stacked = CMat::from_fn(2, m, |r, c| if r == 0 { d1[c].conj() } else { d2[c].conj() });
    let sv = crate::linalg::svd(stacked.clone(), false, false)?.singular_values;
    let (hi, lo) = (sv.max(), sv.min());
    if m < 2 || !(lo > 1e-10 * hi) {
        return Err(Error::CollinearChannels);
    }
    let gram = &stacked * stacked.adjoint();
    let inv = gram.try_inverse().ok_or(Error::CollinearChannels)?;
    let pinv = stacked.adjoint() * inv;
    let amp = Complex64::new((p_t / 2.0).sqrt(), 0.0);
    let column = |j: usize| {
        let col = pinv.column(j).into_owned();
        col.unscale(col.norm()) * amp
    };
    let precoders = Precoders { w1: column(0), w2: column(1) };
    let qos = QosReport::from_channels(d1, d2, &precoders, sigma1_2, sigma2_2)?;
    Ok(BaselineResult {
        scheme: Scheme::NoRisZf,
        x: None,
        precoders,
        qos,
        iterations: 0,
        search_width: 0.0,
        rate_trace: Vec::new(),
    })
}

/// Unit-modulus surface with independent uniform phases.
pub fn random_phase_ris<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RisVector {
    let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    RisVector(CVec::from_fn(n, |_, _| Complex64::from_polar(1.0, phase.sample(rng))))
}

/// `theta_l = exp(-i (l - 1)^2 / M)` for `l = 1..N`, returned as `x = conj(theta)`.
pub fn dft_phase_ris(n: usize, m: usize) -> Result<RisVector> {
    if m == 0 {
        return Err(Error::InvalidParameter("M must be >= 1".into()));
    }
    Ok(RisVector(CVec::from_fn(n, |l, _| {
        let phase = (l * l) as f64 / m as f64;
        Complex64::from_polar(1.0, phase)
    })))
}

/// Unit beam family of user `j` against the other user's channel:
/// `sqrt(a) P h_j / ||P h_j|| + sqrt(1 - a) P' h_j / ||P' h_j||` with `P`
/// the projector onto the other channel and `P'` its complement.
struct BeamFamily {
    par: CVec,
    perp: CVec,
}

impl BeamFamily {
    fn new(own: &CVec, other: &CVec) -> Self {
        let m = own.len();
        let own_scale = own.norm();
        if own_scale == 0.0 {
            return Self { par: CVec::zeros(m), perp: CVec::zeros(m) };
        }
        let other2 = other.norm_squared();
        let par = if other2 > 0.0 { other * (other.dotc(own) / other2) } else { CVec::zeros(m) };
        let perp = own - &par;
        let unit = |v: CVec| {
            let n = v.norm();
            if n <= 1e-12 * own_scale {
                CVec::zeros(m)
            } else {
                v.unscale(n)
            }
        };
        Self { par: unit(par), perp: unit(perp) }
    }

    fn beam(&self, a: f64) -> CVec {
        let v = self.par.scale(a.sqrt()) + self.perp.scale((1.0 - a).sqrt());
        let n = v.norm();
        if n == 0.0 {
            v
        } else {
            v.unscale(n)
        }
    }
}

/// `(|h_own^H u(a)|^2, |h_other^H u(a)|^2)` on a grid of `a`.
fn beam_gains(family: &BeamFamily, own: &CVec, other: &CVec, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&a| {
            let u = family.beam(a);
            (own.dotc(&u).norm_sqr(), other.dotc(&u).norm_sqr())
        })
        .collect()
}

/// Grid of `GRID_POINTS` values over `[lo, hi]`, clamped to `[0, 1]`.
fn axis(center: f64, half: f64) -> Vec<f64> {
    let lo = (center - half).max(0.0);
    let hi = (center + half).min(1.0);
    (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

/// Maximise `score` over `[0, 1]^D` by a zooming grid; returns the best
/// point and the final spacing.
fn zoom_search<const D: usize>(
    tol: f64,
    mut score: impl FnMut(&[Vec<f64>; D]) -> ([usize; D], f64),
) -> ([f64; D], f64) {
    let mut center = [0.5; D];
    let mut half = 0.5;
    let mut best = [0.0; D];
    let mut width = 1.0;
    for level in 0..=GRID_REFINEMENTS {
        let axes: [Vec<f64>; D] = std::array::from_fn(|d| axis(center[d], half));
        let (idx, _) = score(&axes);
        for d in 0..D {
            best[d] = axes[d][idx[d]];
        }
        width = (0..D).map(|d| axes[d][1] - axes[d][0]).fold(0.0, f64::max);
        if width <= tol || level == GRID_REFINEMENTS {
            break;
        }
        center = best;
        half = width;
    }
    if width > tol {
        log::debug!("fixed-surface search stopped at grid width {width:e} > tol {tol:e}");
    }
    (best, width)
}

fn check_surface(cs: &ChannelSet, x: &RisVector) -> Result<(CVec, CVec)> {
    if x.len() != cs.n() {
        return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), cs.n())));
    }
    cs.effective_channels(&x.0)
}

/// Optimal precoders for a fixed surface under `||w_j|| <= 1` maximising
/// `lambda SINR1 + (1 - lambda) SINR2`. The search runs over the full-power
/// Pareto beam family; `tol` is the target grid spacing.
pub fn fixed_ris_wsinr(
    cs: &ChannelSet,
    x: &RisVector,
    lambda: f64,
    sigma1_2: f64,
    sigma2_2: f64,
    tol: f64,
    scheme: Scheme,
) -> Result<BaselineResult> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let (h1, h2) = check_surface(cs, x)?;
    let fam1 = BeamFamily::new(&h1, &h2);
    let fam2 = BeamFamily::new(&h2, &h1);
    let mut evals = 0;
    let (best, width) = zoom_search::<2>(tol, |axes| {
        let g1 = beam_gains(&fam1, &h1, &h2, &axes[0]);
        let g2 = beam_gains(&fam2, &h2, &h1, &axes[1]);
        let mut top = ([0, 0], f64::NEG_INFINITY);
        for (i, &(s11, c21)) in g1.iter().enumerate() {
            for (j, &(s22, c12)) in g2.iter().enumerate() {
                let v = lambda * s11 / (c12 + sigma1_2) + (1.0 - lambda) * s22 / (c21 + sigma2_2);
                if v > top.1 {
                    top = ([i, j], v);
                }
            }
        }
        evals += 1;
        top
    });
    let precoders = Precoders { w1: fam1.beam(best[0]), w2: fam2.beam(best[1]) };
    let qos = QosReport::from_channels(&h1, &h2, &precoders, sigma1_2, sigma2_2)?;
    Ok(BaselineResult {
        scheme,
        x: Some(x.clone()),
        precoders,
        qos,
        iterations: evals,
        search_width: width,
        rate_trace: Vec::new(),
    })
}

/// Optimal precoders for a fixed surface under `||w1||^2 + ||w2||^2 <= P_T`
/// maximising the sum rate: share `t` of the power to user 2 and one beam
/// of each family.
pub fn fixed_ris_sumrate(
    cs: &ChannelSet,
    x: &RisVector,
    p_t: f64,
    sigma1_2: f64,
    sigma2_2: f64,
    tol: f64,
    scheme: Scheme,
) -> Result<BaselineResult> {
    if !(p_t > 0.0) {
        return Err(Error::InvalidParameter(format!("P_T must be > 0, got {p_t}")));
    }
    let (h1, h2) = check_surface(cs, x)?;
    let fam1 = BeamFamily::new(&h1, &h2);
    let fam2 = BeamFamily::new(&h2, &h1);
    let mut evals = 0;
    let (best, width) = zoom_search::<3>(tol, |axes| {
        let g1 = beam_gains(&fam1, &h1, &h2, &axes[1]);
        let g2 = beam_gains(&fam2, &h2, &h1, &axes[2]);
        let mut top = ([0, 0, 0], f64::NEG_INFINITY);
        for (ti, &t) in axes[0].iter().enumerate() {
            let (p1, p2) = (p_t * (1.0 - t), p_t * t);
            for (i, &(s11, c21)) in g1.iter().enumerate() {
                for (j, &(s22, c12)) in g2.iter().enumerate() {
                    let v = (1.0 + p1 * s11 / (p2 * c12 + sigma1_2)).ln()
                        + (1.0 + p2 * s22 / (p1 * c21 + sigma2_2)).ln();
                    if v > top.1 {
                        top = ([ti, i, j], v);
                    }
                }
            }
        }
        evals += 1;
        top
    });
    let t = best[0];
    let precoders = Precoders {
        w1: fam1.beam(best[1]).scale((p_t * (1.0 - t)).sqrt()),
        w2: fam2.beam(best[2]).scale((p_t * t).sqrt()),
    };
    let qos = QosReport::from_channels(&h1, &h2, &precoders, sigma1_2, sigma2_2)?;
    Ok(BaselineResult {
        scheme,
        x: Some(x.clone()),
        precoders,
        qos,
        iterations: evals,
        search_width: width,
        rate_trace: Vec::new(),
    })
}

/// Relative change of the sum rate below which WMMSE stops.
pub const WMMSE_RATE_TOL: f64 = 1e-8;

/// Sum-power-constrained WMMSE on the direct channels, started from MRT
/// with equal power.
pub fn wmmse_no_ris(
    cs: &ChannelSet,
    p_t: f64,
    sigma1_2: f64,
    sigma2_2: f64,
    iters: usize,
) -> Result<BaselineResult> {
    if iters == 0 {
        return Err(Error::InvalidParameter("WMMSE needs at least one iteration".into()));
    }
    if !(p_t > 0.0) {
        return Err(Error::InvalidParameter(format!("P_T must be > 0, got {p_t}")));
    }
    let h = [cs.direct(User::One).clone(), cs.direct(User::Two).clone()];
    let noise = [sigma1_2, sigma2_2];
    let m = cs.m();
    let amp = (p_t / 2.0).sqrt();
    let mrt = |v: &CVec| if v.norm() > 0.0 { v.unscale(v.norm()).scale(amp) } else { CVec::zeros(m) };
    let mut w = [mrt(&h[0]), mrt(&h[1])];
    let rate = |w: &[CVec; 2]| -> Result<QosReport> {
        let prec = Precoders { w1: w[0].clone(), w2: w[1].clone() };
        QosReport::from_channels(&h[0], &h[1], &prec, sigma1_2, sigma2_2)
    };
    let mut current = rate(&w)?.sum_rate;
    let mut trace = vec![current];
    let mut done = 0;
    for _ in 0..iters {
        done += 1;
        let mut recv = [Complex64::new(0.0, 0.0); 2];
        let mut weight = [0.0; 2];
        for k in 0..2 {
            let total: f64 = w.iter().map(|wj| h[k].dotc(wj).norm_sqr()).sum::<f64>() + noise[k];
            let signal = h[k].dotc(&w[k]);
            recv[k] = signal / total;
            let mse = 1.0 - signal.norm_sqr() / total;
            weight[k] = 1.0 / mse.max(f64::MIN_POSITIVE);
        }
        let mut cov = CMat::zeros(m, m);
        for k in 0..2 {
            cov += (&h[k] * h[k].adjoint()).scale(weight[k] * recv[k].norm_sqr());
        }
        let rhs: [CVec; 2] =
            std::array::from_fn(|k| &h[k] * (recv[k] * weight[k]));
        w = transmit_update(&cov, &rhs, p_t)?;
        let next = rate(&w)?.sum_rate;
        trace.push(next);
        let change = (next - current).abs() / (1.0 + current.abs());
        current = next;
        if change < WMMSE_RATE_TOL {
            break;
        }
    }
    let precoders = Precoders { w1: w[0].clone(), w2: w[1].clone() };
    let qos = rate(&w)?;
    Ok(BaselineResult {
        scheme: Scheme::NoRisWmmse,
        x: None,
        precoders,
        qos,
        iterations: done,
        search_width: 0.0,
        rate_trace: trace,
    })
}

/// `w_k = (cov + eta I)^{-1} rhs_k` with the smallest `eta >= 0` meeting the
/// sum-power budget, found by bisection in the eigenbasis of `cov`.
fn transmit_update(cov: &CMat, rhs: &[CVec; 2], p_t: f64) -> Result<[CVec; 2]> {
    let (vals, vecs) = hermitian_eig(cov)?;
    let coeffs: Vec<f64> = (0..vals.len())
        .map(|i| rhs.iter().map(|r| vecs.column(i).dotc(r).norm_sqr()).sum())
        .collect();
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let power = |eta: f64| -> f64 {
        vals.iter()
            .zip(&coeffs)
            .map(|(&lam, &c)| {
                let den = (lam.max(0.0) + eta).powi(2);
                if c == 0.0 {
                    0.0
                } else {
                    c / den
                }
            })
            .sum()
    };
    let eta = if power(0.0) <= p_t {
        0.0
    } else {
        let total: f64 = coeffs.iter().sum();
        let mut hi = (total / p_t).sqrt().max(1e-300);
        let mut lo = 0.0;
        while power(hi) > p_t {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if power(mid) > p_t {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    if !eta.is_finite() {
        return Err(Error::Numerical("WMMSE power multiplier diverged".into()));
    }
    let floor = 1e-300 * scale;
    let solve = |r: &CVec| -> CVec {
        let mut out = CVec::zeros(r.len());
        for i in 0..vals.len() {
            let v = vecs.column(i);
            let c = v.dotc(r);
            if c.norm() == 0.0 {
                continue;
            }
            let den = (vals[i].max(0.0) + eta).max(floor);
            out += v * (c / den);
        }
        out
    };
    Ok([solve(&rhs[0]), solve(&rhs[1])])
}
