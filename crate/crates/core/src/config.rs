//! Scenario and solver parameters.

use crate::{Error, Result};

/// Convert a noise power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a decibel ratio to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Rician factors (dB) of the three link classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianFactors {
    /// BS to RIS.
    pub beta_br_db: f64,
    /// BS to users (direct links).
    pub beta_bu_db: f64,
    /// RIS to users.
    pub beta_ru_db: f64,
}

impl Default for RicianFactors {
    fn default() -> Self {
        Self { beta_br_db: 3.0, beta_bu_db: 3.0, beta_ru_db: 3.0 }
    }
}

/// Distance-dependent LoS scaling `kappa = C * d^(-rho)` of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPathloss {
    pub c_db: f64,
    pub rho: f64,
    pub distance: f64,
}

impl LinkPathloss {
    pub fn kappa(&self) -> f64 {
        db_to_linear(self.c_db) * self.distance.powf(-self.rho)
    }
}

/// Pathloss parameters of all five links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlossProfile {
    pub bs_ris: LinkPathloss,
    pub bs_user1: LinkPathloss,
    pub bs_user2: LinkPathloss,
    pub ris_user1: LinkPathloss,
    pub ris_user2: LinkPathloss,
}

impl PathlossProfile {
    /// BS, RIS and both users on one line: RIS at 200 m, users at 190 m and
    /// 210 m from the BS, i.e. 10 m from the RIS.
    pub fn collinear_default() -> Self {
        let bs_ris = LinkPathloss { c_db: -20.0, rho: 2.0, distance: 200.0 };
        let direct = |distance| LinkPathloss { c_db: -30.0, rho: 3.5, distance };
        let reflected = LinkPathloss { c_db: -20.0, rho: 2.0, distance: 10.0 };
        Self {
            bs_ris,
            bs_user1: direct(190.0),
            bs_user2: direct(210.0),
            ris_user1: reflected,
            ris_user2: reflected,
        }
    }
}

/// Tuning of the weighted-SINR ADMM loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub eps: f64,
    pub k_max: usize,
    pub rho0: f64,
    pub delta: f64,
    /// Draw `y0` and `mu0` at random instead of `y0 = x0`, `mu0 = 0`.
    pub random_init: bool,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { eps: 1e-5, k_max: 100, rho0: 1e-4, delta: 1.01, random_init: false }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        check_admm(self.eps, self.k_max)?;
        check_penalty("rho0", self.rho0, "delta", self.delta)
    }
}

/// Tuning of the sum-rate ADMM loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateAdmmConfig {
    pub eps: f64,
    pub k_max: usize,
    pub rho1_0: f64,
    pub rho2_0: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub random_init: bool,
}

impl Default for SumRateAdmmConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            k_max: 100,
            rho1_0: 0.01,
            rho2_0: 0.01,
            delta1: 5.0,
            delta2: 5.0,
            random_init: true,
        }
    }
}

impl SumRateAdmmConfig {
    pub fn validate(&self) -> Result<()> {
        check_admm(self.eps, self.k_max)?;
        check_penalty("rho1_0", self.rho1_0, "delta1", self.delta1)?;
        check_penalty("rho2_0", self.rho2_0, "delta2", self.delta2)
    }
}

fn check_admm(eps: f64, k_max: usize) -> Result<()> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
    }
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    Ok(())
}

fn check_penalty(rho_name: &str, rho: f64, delta_name: &str, delta: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("{rho_name} must be > 0, got {rho}")));
    }
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!("{delta_name} must be > 1, got {delta}")));
    }
    Ok(())
}

/// All parameters of one experiment scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// BS antennas.
    pub m: usize,
    /// RIS elements.
    pub n: usize,
    /// Total transmit power in watts.
    pub p_t: f64,
    /// Per-user noise power in watts.
    pub sigma2: f64,
    pub rician: RicianFactors,
    /// When present, every link is drawn as `kappa * J + G` instead of the
    /// normalised Rician mixture.
    pub pathloss: Option<PathlossProfile>,
    pub seed: u64,
    pub admm: AdmmConfig,
    pub admm_sumrate: SumRateAdmmConfig,
}

impl ScenarioConfig {
    /// Desk-scale weighted-SINR scenario.
    pub fn wsinr_small() -> Self {
        Self {
            m: 4,
            n: 16,
            p_t: 2.0,
            sigma2: dbm_to_watts(-80.0),
            rician: RicianFactors::default(),
            pathloss: None,
            seed: 1,
            admm: AdmmConfig { rho0: 60.0, delta: 1.15, ..AdmmConfig::default() },
            admm_sumrate: SumRateAdmmConfig::default(),
        }
    }

    /// The sum-rate scenario with collinear geometry and pathloss.
    pub fn sumrate_paper() -> Self {
        Self {
            m: 4,
            n: 10,
            p_t: 1.0,
            sigma2: dbm_to_watts(-117.0),
            rician: RicianFactors::default(),
            pathloss: Some(PathlossProfile::collinear_default()),
            seed: 1,
            admm: AdmmConfig::default(),
            admm_sumrate: SumRateAdmmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 || self.n < 1 {
            return Err(Error::InvalidParameter(format!(
                "m and n must be >= 1, got m={} n={}",
                self.m, self.n
            )));
        }
        if !(self.p_t > 0.0) || !self.p_t.is_finite() {
            return Err(Error::InvalidParameter(format!("p_t must be > 0, got {}", self.p_t)));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be > 0, got {}",
                self.sigma2
            )));
        }
        if let Some(pl) = &self.pathloss {
            for (name, link) in [
                ("bs_ris", pl.bs_ris),
                ("bs_user1", pl.bs_user1),
                ("bs_user2", pl.bs_user2),
                ("ris_user1", pl.ris_user1),
                ("ris_user2", pl.ris_user2),
            ] {
                if !(link.distance > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "pathloss.{name}.distance must be > 0"
                    )));
                }
            }
        }
        self.admm.validate()?;
        self.admm_sumrate.validate()
    }
}
