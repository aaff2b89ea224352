//! Channel generation and the equivalent-channel algebra.
//!
//! A [`ChannelSet`] holds one realisation of the BS-RIS matrix `F` (N x M),
//! the direct links `d_j` (length M) and the RIS-user links `g_j`
//! (length N). The reflected contribution of a surface configuration `x`
//! (the conjugated reflection coefficients) to user `j` is `F_j x` with the
//! cached `F_j = F^H Diag(g_j)`, so the equivalent channel is
//! `h_j = d_j + F_j x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{db_to_linear, LinkPathloss, ScenarioConfig};
use crate::{CMat, CVec, Complex64, Error, Result, User};

/// Stream tags of the five links. Fixed so that each link draw is
/// reproducible and independent of the others.
pub mod tags {
    pub const BS_RIS: u64 = 0x4252;
    pub const BS_USER1: u64 = 0x4431;
    pub const BS_USER2: u64 = 0x4432;
    pub const RIS_USER1: u64 = 0x4731;
    pub const RIS_USER2: u64 = 0x4732;
    pub const RANDOM_PHASE: u64 = 0x5048;
    pub const ADMM_INIT: u64 = 0x494e;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash `(seed, trial, tag)` into a sub-stream seed.
pub fn stream_seed(seed: u64, trial: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ tag)
}

/// Deterministic RNG for one `(seed, trial, tag)` triple.
pub fn stream_rng(seed: u64, trial: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, trial, tag))
}

/// One `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. `CN(0, 1)` entries, filled row-major.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let data: Vec<Complex64> = (0..rows * cols).map(|_| complex_gaussian(rng)).collect();
    CMat::from_row_slice(rows, cols, &data)
}

/// LoS and NLoS amplitudes `(sqrt(b/(1+b)), sqrt(1/(1+b)))` for a Rician
/// factor in dB.
pub fn rician_weights(beta_db: f64) -> (f64, f64) {
    let beta = db_to_linear(beta_db);
    ((beta / (1.0 + beta)).sqrt(), (1.0 / (1.0 + beta)).sqrt())
}

/// Normalised Rician link `sqrt(b/(1+b)) J + sqrt(1/(1+b)) G` with `J` the
/// all-ones matrix.
pub fn gen_rician<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, beta_db: f64) -> CMat {
    let (los, nlos) = rician_weights(beta_db);
    gaussian_matrix(rng, rows, cols).map(|g| g * nlos + los)
}

/// Pathloss-scaled link `kappa J + G`, `kappa = C d^(-rho)`. Only the LoS
/// part carries the pathloss.
pub fn gen_pathloss_rician<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    link: &LinkPathloss,
) -> CMat {
    let kappa = link.kappa();
    gaussian_matrix(rng, rows, cols).map(|g| g + kappa)
}

/// One channel realisation plus the cached reflected-channel operators.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    f: CMat,
    d1: CVec,
    d2: CVec,
    g1: CVec,
    g2: CVec,
    f1: CMat,
    f2: CMat,
}

impl ChannelSet {
    /// Assemble from raw links; `f` is N x M, `d_j` length M, `g_j` length N.
    pub fn from_parts(f: CMat, d1: CVec, d2: CVec, g1: CVec, g2: CVec) -> Result<Self> {
        let (n, m) = f.shape();
        if d1.len() != m || d2.len() != m {
            return Err(Error::Dimension(format!(
                "direct links must have length M={m}, got {} and {}",
                d1.len(),
                d2.len()
            )));
        }
        if g1.len() != n || g2.len() != n {
            return Err(Error::Dimension(format!(
                "RIS-user links must have length N={n}, got {} and {}",
                g1.len(),
                g2.len()
            )));
        }
        let f_h = f.adjoint();
        let reflect = |g: &CVec| {
            let mut out = f_h.clone();
            for (l, mut col) in out.column_iter_mut().enumerate() {
                col *= g[l];
            }
            out
        };
        let f1 = reflect(&g1);
        let f2 = reflect(&g2);
        Ok(Self { f, d1, d2, g1, g2, f1, f2 })
    }

    /// BS antennas.
    pub fn m(&self) -> usize {
        self.f.ncols()
    }

    /// RIS elements.
    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn bs_ris(&self) -> &CMat {
        &self.f
    }

    pub fn direct(&self, j: User) -> &CVec {
        match j {
            User::One => &self.d1,
            User::Two => &self.d2,
        }
    }

    pub fn ris_user(&self, j: User) -> &CVec {
        match j {
            User::One => &self.g1,
            User::Two => &self.g2,
        }
    }

    /// `F_j = F^H Diag(g_j)`, M x N.
    pub fn reflect(&self, j: User) -> &CMat {
        match j {
            User::One => &self.f1,
            User::Two => &self.f2,
        }
    }

    /// `h_j = d_j + F_j x`.
    pub fn effective_channel(&self, j: User, x: &CVec) -> Result<CVec> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "RIS vector has length {}, expected N={}",
                x.len(),
                self.n()
            )));
        }
        Ok(self.direct(j) + self.reflect(j) * x)
    }

    /// Both equivalent channels.
    pub fn effective_channels(&self, x: &CVec) -> Result<(CVec, CVec)> {
        Ok((self.effective_channel(User::One, x)?, self.effective_channel(User::Two, x)?))
    }

    /// Same realisation with the RIS removed (`F = 0`).
    pub fn without_ris(&self) -> Self {
        let (n, m) = self.f.shape();
        Self::from_parts(
            CMat::zeros(n, m),
            self.d1.clone(),
            self.d2.clone(),
            self.g1.clone(),
            self.g2.clone(),
        )
        .expect("shapes unchanged")
    }
}

/// Draw the channel set of trial `trial` for a scenario.
pub fn make_channel_set(cfg: &ScenarioConfig, trial: u64) -> Result<ChannelSet> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let draw = |tag: u64, rows: usize, cols: usize, beta_db: f64, pl: Option<LinkPathloss>| {
        let mut rng = stream_rng(cfg.seed, trial, tag);
        match pl {
            Some(link) => gen_pathloss_rician(&mut rng, rows, cols, &link),
            None => gen_rician(&mut rng, rows, cols, beta_db),
        }
    };
    let pl = cfg.pathloss;
    let r = cfg.rician;
    let f = draw(tags::BS_RIS, n, m, r.beta_br_db, pl.map(|p| p.bs_ris));
    let d1 = draw(tags::BS_USER1, m, 1, r.beta_bu_db, pl.map(|p| p.bs_user1));
    let d2 = draw(tags::BS_USER2, m, 1, r.beta_bu_db, pl.map(|p| p.bs_user2));
    let g1 = draw(tags::RIS_USER1, n, 1, r.beta_ru_db, pl.map(|p| p.ris_user1));
    let g2 = draw(tags::RIS_USER2, n, 1, r.beta_ru_db, pl.map(|p| p.ris_user2));
    ChannelSet::from_parts(f, d1.column(0).into(), d2.column(0).into(), g1.column(0).into(), g2.column(0).into())
}
