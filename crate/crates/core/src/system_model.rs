//! SINR / rate evaluation, MRT precoding and the achievable upper bounds.

use crate::channel::ChannelSet;
use crate::linalg::inf_norm;
use crate::{CVec, Complex64, Error, Result, User};

/// Tolerance on `|x_l| <= 1` for a surface configuration to count as
/// feasible.
pub const MODULUS_TOL: f64 = 1e-9;

/// Reflection vector `x` (conjugated reflection coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct RisVector(pub CVec);

impl RisVector {
    pub fn zeros(n: usize) -> Self {
        Self(CVec::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        inf_norm(&self.0)
    }

    pub fn is_feasible(&self) -> bool {
        self.max_modulus() <= 1.0 + MODULUS_TOL
    }

    /// Elementwise projection onto the closed unit disc.
    pub fn clipped(&self) -> Self {
        Self(self.0.map(project_unit_disc))
    }
}

/// Closest point of the closed unit disc.
pub fn project_unit_disc(b: Complex64) -> Complex64 {
    let r = b.norm();
    if r <= 1.0 {
        b
    } else {
        b / r
    }
}

/// Precoding vectors of the two users.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    pub w1: CVec,
    pub w2: CVec,
}

impl Precoders {
    pub fn zeros(m: usize) -> Self {
        Self { w1: CVec::zeros(m), w2: CVec::zeros(m) }
    }

    pub fn get(&self, j: User) -> &CVec {
        match j {
            User::One => &self.w1,
            User::Two => &self.w2,
        }
    }

    pub fn total_power(&self) -> f64 {
        self.w1.norm_squared() + self.w2.norm_squared()
    }
}

/// Per-user quality of service of one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosReport {
    pub sinr1: f64,
    pub sinr2: f64,
    pub rate1: f64,
    pub rate2: f64,
    pub sum_rate: f64,
    pub interference1: f64,
    pub interference2: f64,
    /// `|h1^H h2| / (||h1|| ||h2||)`, zero when either channel vanishes.
    pub orthogonality_residual: f64,
}

impl QosReport {
    /// Evaluate from explicit equivalent channels.
    pub fn from_channels(
        h1: &CVec,
        h2: &CVec,
        prec: &Precoders,
        sigma1_2: f64,
        sigma2_2: f64,
    ) -> Result<Self> {
        if !(sigma1_2 > 0.0) || !(sigma2_2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise powers must be > 0, got {sigma1_2:e} and {sigma2_2:e}"
            )));
        }
        let m = h1.len();
        if h2.len() != m || prec.w1.len() != m || prec.w2.len() != m {
            return Err(Error::Dimension("channels and precoders must share length M".into()));
        }
        let signal1 = h1.dotc(&prec.w1).norm_sqr();
        let interference1 = h1.dotc(&prec.w2).norm_sqr();
        let signal2 = h2.dotc(&prec.w2).norm_sqr();
        let interference2 = h2.dotc(&prec.w1).norm_sqr();
        let sinr1 = signal1 / (interference1 + sigma1_2);
        let sinr2 = signal2 / (interference2 + sigma2_2);
        let rate1 = (1.0 + sinr1).log2();
        let rate2 = (1.0 + sinr2).log2();
        Ok(Self {
            sinr1,
            sinr2,
            rate1,
            rate2,
            sum_rate: rate1 + rate2,
            interference1,
            interference2,
            orthogonality_residual: orthogonality_residual(h1, h2),
        })
    }

    pub fn sinr(&self, j: User) -> f64 {
        match j {
            User::One => self.sinr1,
            User::Two => self.sinr2,
        }
    }

    pub fn weighted_sinr(&self, lambda: f64) -> f64 {
        lambda * self.sinr1 + (1.0 - lambda) * self.sinr2
    }
}

/// Normalised cross-correlation of the two equivalent channels.
pub fn orthogonality_residual(h1: &CVec, h2: &CVec) -> f64 {
    let denom = h1.norm() * h2.norm();
    if denom == 0.0 {
        0.0
    } else {
        h1.dotc(h2).norm() / denom
    }
}

/// SINRs, rates and interference of `(w1, w2, x)`.
pub fn evaluate(
    cs: &ChannelSet,
    prec: &Precoders,
    x: &RisVector,
    sigma1_2: f64,
    sigma2_2: f64,
) -> Result<QosReport> {
    let (h1, h2) = cs.effective_channels(&x.0)?;
    QosReport::from_channels(&h1, &h2, prec, sigma1_2, sigma2_2)
}

/// Unit-norm MRT direction `h / ||h||`.
pub fn mrt_direction(h: &CVec, user: User) -> Result<CVec> {
    let norm = h.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateChannel(user));
    }
    Ok(h.unscale(norm))
}

/// `w_j = omega_j sqrt(P_T) h_j / ||h_j||`. A user with zero power weight
/// gets a zero precoder and may have a vanishing channel.
pub fn mrt_precoders(
    cs: &ChannelSet,
    x: &RisVector,
    omega1: f64,
    omega2: f64,
    p_t: f64,
) -> Result<Precoders> {
    if omega1 * omega1 + omega2 * omega2 > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "power weights must satisfy omega1^2 + omega2^2 <= 1, got {omega1}, {omega2}"
        )));
    }
    let (h1, h2) = cs.effective_channels(&x.0)?;
    let amp = p_t.sqrt();
    let beam = |h: &CVec, omega: f64, user: User| -> Result<CVec> {
        if omega == 0.0 {
            return Ok(CVec::zeros(h.len()));
        }
        Ok(mrt_direction(h, user)? * Complex64::new(omega * amp, 0.0))
    };
    Ok(Precoders { w1: beam(&h1, omega1, User::One)?, w2: beam(&h2, omega2, User::Two)? })
}

/// `omega_j^2 P_T ||h_j||^2 / sigma_j^2`.
pub fn sinr_upper_bound(
    cs: &ChannelSet,
    x: &RisVector,
    omega_j: f64,
    p_t: f64,
    sigma_j2: f64,
    j: User,
) -> Result<f64> {
    let h = cs.effective_channel(j, &x.0)?;
    Ok(omega_j * omega_j * p_t * h.norm_squared() / sigma_j2)
}

/// `lambda ||h1||^2 + (1 - lambda) ||h2||^2`.
pub fn wsinr_surrogate_objective(cs: &ChannelSet, x: &RisVector, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let (h1, h2) = cs.effective_channels(&x.0)?;
    Ok(lambda * h1.norm_squared() + (1.0 - lambda) * h2.norm_squared())
}
