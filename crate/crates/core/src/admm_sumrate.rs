//! ADMM for the sum-rate approximation: maximise
//! `P^2 ||h1||^2 ||h2||^2 + 2 P sigma^2 (||h1||^2 + ||h2||^2)` over `h1 ⟂ h2`,
//! `|x_l| <= 1`, with the box split onto `y` and user 2's equivalent channel
//! split onto `z = F2 x + d2`.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::admm_wsinr::{channel_orthogonality, kkt_from_gradient, y_update, Branch, KktReport};
use crate::channel::{complex_gaussian, ChannelSet};
use crate::config::SumRateAdmmConfig;
use crate::qcqp::{assemble_sumrate_x, escape_step, feasible_init, solve_bounded, SumRateXTerms};
use crate::system_model::{evaluate, mrt_precoders, Precoders, QosReport, RisVector};
use crate::{CVec, Complex64, Error, Result, User};

/// Which case of the closed-form power split applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitRegime {
    Interior,
    /// `t = 1`: all power to user 2.
    AllUser2,
    /// `t = 0`: all power to user 1.
    AllUser1,
}

/// Optimal share `t = omega2^2` of the transmit power given to user 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub t: f64,
    pub regime: SplitRegime,
}

impl PowerSplit {
    /// `(omega1, omega2)` amplitudes.
    pub fn omegas(&self) -> (f64, f64) {
        ((1.0 - self.t).sqrt(), self.t.sqrt())
    }

    /// The user receiving all power, if any.
    pub fn single_user(&self) -> Option<User> {
        match self.regime {
            SplitRegime::Interior => None,
            SplitRegime::AllUser2 => Some(User::Two),
            SplitRegime::AllUser1 => Some(User::One),
        }
    }
}

/// Maximiser over `t in [0, 1]` of `(b1 (1 - t) + a1)(b2 t + a2)`.
pub fn power_split_from_gains(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<PowerSplit> {
    if [a1, a2, b1, b2].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "power split needs finite nonnegative inputs, got a=({a1}, {a2}) b=({b1}, {b2})"
        )));
    }
    match (b1 > 0.0, b2 > 0.0) {
        (false, false) => return Err(Error::DegenerateChannel(User::One)),
        (false, true) => return Ok(PowerSplit { t: 1.0, regime: SplitRegime::AllUser2 }),
        (true, false) => return Ok(PowerSplit { t: 0.0, regime: SplitRegime::AllUser1 }),
        (true, true) => {}
    }
    let diff = a1 * b2 - a2 * b1;
    let prod = b1 * b2;
    Ok(if diff > prod {
        PowerSplit { t: 1.0, regime: SplitRegime::AllUser2 }
    } else if diff + prod < 0.0 {
        PowerSplit { t: 0.0, regime: SplitRegime::AllUser1 }
    } else {
        PowerSplit { t: 0.5 + diff / (2.0 * prod), regime: SplitRegime::Interior }
    })
}

/// Closed-form power split at `x` with `a_j = sigma_j^2`, `b_j = P ||h_j||^2`.
/// A vanishing channel sends all power to the other user; both vanishing is
/// a `DegenerateChannel` error.
pub fn power_split(
    cs: &ChannelSet,
    x: &RisVector,
    p_t: f64,
    sigma1_2: f64,
    sigma2_2: f64,
) -> Result<PowerSplit> {
    let (h1, h2) = cs.effective_channels(&x.0)?;
    power_split_from_gains(sigma1_2, sigma2_2, p_t * h1.norm_squared(), p_t * h2.norm_squared())
}

/// `P^2 ||h1||^2 ||h2||^2 + 2 P sigma^2 (||h1||^2 + ||h2||^2)`.
pub fn objective_ap(cs: &ChannelSet, x: &RisVector, p_t: f64, sigma2: f64) -> Result<f64> {
    let (h1, h2) = cs.effective_channels(&x.0)?;
    let (n1, n2) = (h1.norm_squared(), h2.norm_squared());
    Ok(p_t * p_t * n1 * n2 + 2.0 * p_t * sigma2 * (n1 + n2))
}

/// z-step: minimise `h(z) = c/2 ||z||^2 + Re(z^H p)` exactly when `c > 0`,
/// otherwise take a unit gradient step from `z_prev`.
pub fn z_update(
    cs: &ChannelSet,
    x: &CVec,
    mu2: &CVec,
    rho2: f64,
    p_t: f64,
    sigma2: f64,
    z_prev: &CVec,
) -> Result<CVec> {
    if !(rho2 > 0.0) {
        return Err(Error::InvalidParameter(format!("rho2 must be > 0, got {rho2}")));
    }
    let (c, p) = z_coefficients(cs, x, mu2, rho2, p_t, sigma2)?;
    if z_prev.len() != p.len() {
        return Err(Error::Dimension(format!(
            "z has length {}, expected {}",
            z_prev.len(),
            p.len()
        )));
    }
    Ok(if c > 0.0 {
        -p.unscale(c)
    } else if c == 0.0 {
        z_prev - p
    } else {
        z_prev.scale(1.0 - c) - p
    })
}

/// `(c, p)` of the z-subproblem.
pub fn z_coefficients(
    cs: &ChannelSet,
    x: &CVec,
    mu2: &CVec,
    rho2: f64,
    p_t: f64,
    sigma2: f64,
) -> Result<(f64, CVec)> {
    if mu2.len() != cs.m() {
        return Err(Error::Dimension(format!(
            "mu2 has length {}, expected {}",
            mu2.len(),
            cs.m()
        )));
    }
    let h1 = cs.effective_channel(User::One, x)?;
    let h2 = cs.effective_channel(User::Two, x)?;
    let c = rho2 - 2.0 * p_t * (p_t * h1.norm_squared() + 2.0 * sigma2);
    Ok((c, -mu2 - h2.scale(rho2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumRateTraceRow {
    pub k: usize,
    pub objective_ap: f64,
    /// `||x_k - y_k||`.
    pub xy_gap: f64,
    /// `||F2 x_k + d2 - z_k||`.
    pub z_gap: f64,
    pub y_step: f64,
    pub z_step: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub branch: Branch,
}

impl SumRateTraceRow {
    /// Largest of the four stopping residuals.
    pub fn residual(&self) -> f64 {
        self.xy_gap.max(self.z_gap).max(self.y_step).max(self.z_step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumRateState {
    pub x: CVec,
    pub y: CVec,
    pub z: CVec,
    pub mu1: CVec,
    pub mu2: CVec,
    pub rho1: f64,
    pub rho2: f64,
    pub k: usize,
    pub converged: bool,
    pub trace: Vec<SumRateTraceRow>,
}

/// KKT residuals of the sum-rate approximation at `x`, with box multipliers
/// read off `mu1`. When `z` is given, `||F2 x + d2 - z||` is reported as the
/// consistency residual.
pub fn kkt_residual_sumrate(
    cs: &ChannelSet,
    x: &CVec,
    z: Option<&CVec>,
    mu1: &CVec,
    p_t: f64,
    sigma2: f64,
) -> Result<KktReport> {
    let (m, n) = (cs.m(), cs.n());
    if mu1.len() != n {
        return Err(Error::Dimension(format!("mu1 has length {}, expected {n}", mu1.len())));
    }
    let zeros_m = CVec::zeros(m);
    let zeros_n = CVec::zeros(n);
    let q = assemble_sumrate_x(
        cs,
        p_t,
        sigma2,
        SumRateXTerms {
            z: &zeros_m,
            y: &zeros_n,
            mu1: &zeros_n,
            mu2: &zeros_m,
            rho1: 1.0,
            rho2: 1.0,
        },
    )?;
    let (h1, h2) = cs.effective_channels(x)?;
    let g1 = cs.reflect(User::One).ad_mul(&h1);
    let g2 = cs.reflect(User::Two).ad_mul(&h2);
    let (n1, n2) = (h1.norm_squared(), h2.norm_squared());
    let grad0 = -((g1.scale(n2) + g2.scale(n1)).scale(2.0 * p_t * p_t)
        + (&g1 + &g2).scale(4.0 * p_t * sigma2));
    let mut report = kkt_from_gradient(&q, x, &grad0, mu1);
    if let Some(z) = z {
        if z.len() != m {
            return Err(Error::Dimension(format!("z has length {}, expected {m}", z.len())));
        }
        report.consistency = Some((&h2 - z).norm());
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumRateOutcome {
    /// Last x-iterate clipped onto the unit disc.
    pub x: RisVector,
    pub x0: RisVector,
    pub split: PowerSplit,
    /// MRT precoders with `omega2^2 = t`.
    pub precoders: Precoders,
    pub qos: QosReport,
    pub state: SumRateState,
    pub kkt: KktReport,
    pub objective_ap: f64,
    pub orthogonality_residual: f64,
}

impl SumRateOutcome {
    /// Set when the power split is on the boundary and only one user is served.
    pub fn single_user(&self) -> Option<User> {
        self.split.single_user()
    }
}

struct Start {
    y: CVec,
    z: CVec,
    mu1: CVec,
    mu2: CVec,
}

fn initial_copies<R: Rng>(cs: &ChannelSet, x0: &CVec, random: bool, rng: &mut R) -> Result<Start> {
    let (m, n) = (cs.m(), cs.n());
    if !random {
        return Ok(Start {
            y: x0.clone(),
            z: cs.effective_channel(User::Two, x0)?,
            mu1: CVec::zeros(n),
            mu2: CVec::zeros(m),
        });
    }
    let phase = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
    let y = CVec::from_fn(n, |_, _| Complex64::from_polar(1.0, phase.sample(rng)));
    let z = CVec::from_fn(m, |_, _| complex_gaussian(rng));
    let mu1 = CVec::from_fn(n, |_, _| complex_gaussian(rng));
    let mu2 = CVec::from_fn(m, |_, _| complex_gaussian(rng));
    Ok(Start { y, z, mu1, mu2 })
}

/// Run the sum-rate ADMM from the constructed feasible point, then split
/// the power in closed form and evaluate MRT at the final surface.
/// `rng` is only drawn from when `cfg.random_init` is set.
pub fn run_alg2<R: Rng>(
    cs: &ChannelSet,
    p_t: f64,
    sigma1_2: f64,
    sigma2_2: f64,
    cfg: &SumRateAdmmConfig,
    rng: &mut R,
) -> Result<SumRateOutcome> {
    check_inputs(p_t, sigma1_2, sigma2_2, cfg)?;
    let x0 = feasible_init(cs)?;
    run_alg2_from(cs, &x0, p_t, sigma1_2, sigma2_2, cfg, rng)
}

fn check_inputs(p_t: f64, sigma1_2: f64, sigma2_2: f64, cfg: &SumRateAdmmConfig) -> Result<()> {
    cfg.validate()?;
    if !(p_t > 0.0) || !(sigma1_2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power and noise must be > 0, got {p_t:e} and {sigma1_2:e}"
        )));
    }
    if sigma1_2 != sigma2_2 {
        return Err(Error::UnequalNoise(sigma1_2, sigma2_2));
    }
    Ok(())
}

/// As [`run_alg2`] from a caller-supplied point satisfying `h1 ⟂ h2`.
pub fn run_alg2_from<R: Rng>(
    cs: &ChannelSet,
    start: &RisVector,
    p_t: f64,
    sigma1_2: f64,
    sigma2_2: f64,
    cfg: &SumRateAdmmConfig,
    rng: &mut R,
) -> Result<SumRateOutcome> {
    check_inputs(p_t, sigma1_2, sigma2_2, cfg)?;
    if start.len() != cs.n() {
        return Err(Error::Dimension(format!(
            "start has length {}, expected {}",
            start.len(),
            cs.n()
        )));
    }
    let sigma2 = sigma1_2;
    let x0 = start.0.clone();
    let Start { mut y, mut z, mut mu1, mut mu2 } = initial_copies(cs, &x0, cfg.random_init, rng)?;
    let mut x = x0.clone();
    let (mut rho1, mut rho2) = (cfg.rho1_0, cfg.rho2_0);
    let mut xy_gap = (&x - &y).norm();
    let mut z_gap = (cs.effective_channel(User::Two, &x)? - &z).norm();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k = 0;

    while k < cfg.k_max {
        k += 1;
        let q = assemble_sumrate_x(
            cs,
            p_t,
            sigma2,
            SumRateXTerms { z: &z, y: &y, mu1: &mu1, mu2: &mu2, rho1, rho2 },
        )?;
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
        let y_next = y_update(&x, &mu1, rho1);
        let z_next = z_update(cs, &x, &mu2, rho2, p_t, sigma2, &z)?;
        let h2 = cs.effective_channel(User::Two, &x)?;
        mu1 += (&x - &y_next).scale(rho1);
        mu2 += (&h2 - &z_next).scale(rho2);
        let xy_next = (&x - &y_next).norm();
        let z_gap_next = (&h2 - &z_next).norm();
        let row = SumRateTraceRow {
            k,
            objective_ap: objective_ap(cs, &RisVector(x.clone()), p_t, sigma2)?,
            xy_gap: xy_next,
            z_gap: z_gap_next,
            y_step: (&y_next - &y).norm(),
            z_step: (&z_next - &z).norm(),
            rho1,
            rho2,
            branch,
        };
        y = y_next;
        z = z_next;
        if xy_next > 0.25 * xy_gap {
            rho1 *= cfg.delta1;
        }
        if z_gap_next > z_gap {
            rho2 *= cfg.delta2;
        }
        xy_gap = xy_next;
        z_gap = z_gap_next;
        let done = row.residual() <= cfg.eps;
        trace.push(row);
        if done {
            converged = true;
            break;
        }
    }

    let clipped = RisVector(x.clone()).clipped();
    let split = power_split(cs, &clipped, p_t, sigma2, sigma2)?;
    let (omega1, omega2) = split.omegas();
    let precoders = mrt_precoders(cs, &clipped, omega1, omega2, p_t)?;
    let qos = evaluate(cs, &precoders, &clipped, sigma2, sigma2)?;
    let kkt = kkt_residual_sumrate(cs, &clipped.0, Some(&z), &mu1, p_t, sigma2)?;
    Ok(SumRateOutcome {
        objective_ap: objective_ap(cs, &clipped, p_t, sigma2)?,
        orthogonality_residual: channel_orthogonality(cs, &clipped.0)?,
        x: clipped,
        x0: RisVector(x0),
        split,
        precoders,
        qos,
        state: SumRateState { x, y, z, mu1, mu2, rho1, rho2, k, converged, trace },
        kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gaussian_matrix, make_channel_set, stream_rng};
    use crate::config::ScenarioConfig;
    use crate::CMat;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cvec(seed: u64, len: usize) -> CVec {
        gaussian_matrix(&mut stream_rng(seed, 7, 11), len, 1).column(0).into_owned()
    }

    fn channels(seed: u64) -> ChannelSet {
        let mut cfg = ScenarioConfig::sumrate_paper();
        cfg.seed = seed;
        make_channel_set(&cfg, 0).unwrap()
    }

    fn grid_argmax(a1: f64, a2: f64, b1: f64, b2: f64) -> f64 {
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=10_000 {
            let t = i as f64 * 1e-4;
            let v = (b1 * (1.0 - t) + a1) * (b2 * t + a2);
            if v > best.0 {
                best = (v, t);
            }
        }
        best.1
    }

    #[test]
    fn power_split_examples() {
        let s = power_split_from_gains(1.0, 1.0, 2.0, 2.0).unwrap();
        assert_eq!(s, PowerSplit { t: 0.5, regime: SplitRegime::Interior });
        let s = power_split_from_gains(10.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(s, PowerSplit { t: 1.0, regime: SplitRegime::AllUser2 });
        let s = power_split_from_gains(1.0, 10.0, 1.0, 1.0).unwrap();
        assert_eq!(s, PowerSplit { t: 0.0, regime: SplitRegime::AllUser1 });
    }

    #[test]
    fn power_split_vanishing_channels() {
        assert_eq!(power_split_from_gains(1.0, 1.0, 0.0, 2.0).unwrap().regime, SplitRegime::AllUser2);
        assert_eq!(power_split_from_gains(1.0, 1.0, 2.0, 0.0).unwrap().regime, SplitRegime::AllUser1);
        assert!(matches!(
            power_split_from_gains(1.0, 1.0, 0.0, 0.0),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn power_split_matches_grid_on_random_gains() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let unit = Uniform::new(0.01, 3.0).unwrap();
        for _ in 0..1000 {
            let (a1, a2, b1, b2) =
                (unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
            let t = power_split_from_gains(a1, a2, b1, b2).unwrap().t;
            assert!((t - grid_argmax(a1, a2, b1, b2)).abs() <= 1e-3, "{a1} {a2} {b1} {b2}");
        }
    }

    #[test]
    fn objective_ap_examples() {
        let f = CMat::zeros(3, 2);
        let d1 = CVec::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let d2 = CVec::from_vec(vec![Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0)]);
        let g = CVec::zeros(3);
        let cs = ChannelSet::from_parts(f, d1, d2, g.clone(), g).unwrap();
        let x = RisVector::zeros(3);
        assert_eq!(objective_ap(&cs, &x, 1.0, 1.0).unwrap(), 5.0);
        assert_eq!(objective_ap(&cs, &x, 2.0, 0.0).unwrap(), 4.0);
    }

    /// Ratio terms `sigma^2 (P ||h_j||^2 + sigma^2) / ... ` dropped from the
    /// exact interior objective.
    #[test]
    fn dropped_ratio_terms_bounded_below() {
        let cs = channels(3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let phase = Uniform::new(0.0, std::f64::consts::TAU).unwrap();
        let radius = Uniform::new(0.0, 1.0).unwrap();
        for p_t in [1e-3, 1.0] {
            let sigma2 = 0.5;
            for _ in 0..500 {
                let x = CVec::from_fn(cs.n(), |_, _| {
                    Complex64::from_polar(radius.sample(&mut rng), phase.sample(&mut rng))
                });
                let (h1, h2) = cs.effective_channels(&x).unwrap();
                let (b1, b2) = (p_t * h1.norm_squared(), p_t * h2.norm_squared());
                let ratios = sigma2 * sigma2 * (b1 / b2 + b2 / b1);
                assert!(ratios >= 2.0 * sigma2 * sigma2 * (1.0 - 1e-12));
            }
        }
    }

    /// `h(z)` of the z-subproblem.
    fn h_value(c: f64, p: &CVec, z: &CVec) -> f64 {
        c / 2.0 * z.norm_squared() + z.dotc(p).re
    }

    #[test]
    fn z_update_zeroes_gradient_when_convex() {
        let cs = channels(5);
        let x = feasible_init(&cs).unwrap().0;
        let mu2 = cvec(1, cs.m());
        let (p_t, sigma2) = (1.0, 2e-15);
        let (c0, _) = z_coefficients(&cs, &x, &mu2, 1.0, p_t, sigma2).unwrap();
        let rho2 = 1.0 - c0 + 5.0;
        let (c, p) = z_coefficients(&cs, &x, &mu2, rho2, p_t, sigma2).unwrap();
        assert!(c > 0.0);
        let z = z_update(&cs, &x, &mu2, rho2, p_t, sigma2, &cvec(2, cs.m())).unwrap();
        let step = 1e-6;
        let mut grad = 0.0f64;
        for l in 0..cs.m() {
            for dir in [Complex64::new(1.0, 0.0), Complex64::i()] {
                let mut up = z.clone();
                let mut down = z.clone();
                up[l] += dir * step;
                down[l] -= dir * step;
                let g = (h_value(c, &p, &up) - h_value(c, &p, &down)) / (2.0 * step);
                grad = grad.max(g.abs());
            }
        }
        let scale = 1.0 + p.norm();
        assert!(grad / scale <= 1e-10, "{grad}");
        let exact = (z.scale(c) + &p).norm();
        assert!(exact <= 1e-12 * scale);
    }

    #[test]
    fn z_update_nonconvex_from_zero() {
        let cs = channels(6);
        let x = feasible_init(&cs).unwrap().0;
        let mu2 = cvec(3, cs.m());
        let (c, p) = z_coefficients(&cs, &x, &mu2, 1e-3, 1.0, 2e-15).unwrap();
        assert!(c < 0.0);
        let z = z_update(&cs, &x, &mu2, 1e-3, 1.0, 2e-15, &CVec::zeros(cs.m())).unwrap();
        assert_eq!(z, -p);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn z_step_descends_when_not_convex(seed in 0u64..1000, rho_exp in -3.0f64..1.0) {
            let cs = channels(seed % 7 + 1);
            let x = cvec(seed, cs.n()).unscale(4.0);
            let mu2 = cvec(seed + 1, cs.m());
            let z_prev = cvec(seed + 2, cs.m());
            let rho2 = 10f64.powf(rho_exp);
            let (p_t, sigma2) = (1.0, 1e-2);
            let (c, p) = z_coefficients(&cs, &x, &mu2, rho2, p_t, sigma2).unwrap();
            prop_assume!(c < 0.0);
            let z = z_update(&cs, &x, &mu2, rho2, p_t, sigma2, &z_prev).unwrap();
            prop_assert!(h_value(c, &p, &z) < h_value(c, &p, &z_prev));
        }

        #[test]
        fn power_split_in_unit_interval(a1 in 1e-6f64..10.0, a2 in 1e-6f64..10.0,
                                        b1 in 1e-6f64..10.0, b2 in 1e-6f64..10.0) {
            let s = power_split_from_gains(a1, a2, b1, b2).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.t));
            prop_assert_eq!(s.regime == SplitRegime::Interior, (a1 * b2 - a2 * b1).abs() <= b1 * b2);
        }
    }

    #[test]
    fn zero_surface_converges_at_once() {
        let (m, n) = (3, 8);
        let d1 = cvec(10, m);
        let mut d2 = cvec(11, m);
        d2 -= &d1 * (d1.dotc(&d2) / d1.norm_squared());
        let cs = ChannelSet::from_parts(CMat::zeros(n, m), d1.clone(), d2.clone(), cvec(12, n), cvec(13, n))
            .unwrap();
        let (p_t, sigma2) = (1.0, 0.1);
        let pull = 2.0 * p_t * (p_t * d1.norm_squared() + 2.0 * sigma2);
        let cfg = SumRateAdmmConfig { rho2_0: 1e4 * pull, random_init: false, ..Default::default() };
        let out = run_alg2_from(&cs, &RisVector::zeros(n), p_t, sigma2, sigma2, &cfg, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        assert!(out.state.converged);
        assert!(out.state.k <= 3, "{}", out.state.k);
        let expect = power_split_from_gains(sigma2, sigma2, p_t * d1.norm_squared(), p_t * d2.norm_squared()).unwrap();
        assert!((out.split.t - expect.t).abs() < 1e-12);
    }

    #[test]
    fn rejects_unequal_noise() {
        let cs = channels(1);
        let err = run_alg2(&cs, 1.0, 1e-3, 2e-3, &SumRateAdmmConfig::default(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(err.unwrap_err(), Error::UnequalNoise(1e-3, 2e-3));
    }

    #[test]
    fn homogeneous_kkt_is_zero() {
        let m = 2;
        let n = 4;
        let f = gaussian_matrix(&mut stream_rng(1, 0, 0), n, m);
        let cs = ChannelSet::from_parts(f, CVec::zeros(m), CVec::zeros(m), cvec(20, n), cvec(21, n)).unwrap();
        let x = CVec::zeros(n);
        let r = kkt_residual_sumrate(&cs, &x, Some(&CVec::zeros(m)), &CVec::zeros(n), 1.0, 1e-3).unwrap();
        assert_eq!(r.stationarity, 0.0);
        assert_eq!(r.consistency, Some(0.0));
        assert_eq!(r.constraint_residual, 0.0);
    }

    #[test]
    fn trace_invariants_on_paper_instance() {
        let cfg = ScenarioConfig::sumrate_paper();
        let cs = make_channel_set(&cfg, 0).unwrap();
        let out = run_alg2(&cs, cfg.p_t, cfg.sigma2, cfg.sigma2, &cfg.admm_sumrate, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let trace = &out.state.trace;
        assert_eq!(trace.len(), out.state.k);
        assert!(out.state.k <= cfg.admm_sumrate.k_max);
        for pair in trace.windows(2) {
            assert!(pair[1].rho1 >= pair[0].rho1);
            assert!(pair[1].rho2 >= pair[0].rho2);
        }
        assert!(out.x.is_feasible());
        let power = out.precoders.total_power();
        assert!((power - cfg.p_t).abs() <= 1e-10 * cfg.p_t);
    }
}
