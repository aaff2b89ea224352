//! Joint precoder / reflecting-surface optimisation for a two-user MISO
//! downlink assisted by a reconfigurable intelligent surface (RIS).
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] draws Rician (optionally pathloss-scaled) channel sets and
//!   exposes the equivalent-channel algebra `h_j = d_j + F_j x`.
//! * [`system_model`] evaluates SINRs, rates, MRT precoders and the
//!   achievable upper bounds.
//! * [`qcqp`] solves the recurring x-subproblem: a quadratic objective under
//!   one complex quadratic equality, globally when the objective is convex
//!   and by a feasibility-preserving escape step otherwise.
//! * [`admm_wsinr`] and [`admm_sumrate`] are the two ADMM pipelines.
//! * [`baselines`] holds the comparison schemes (zero forcing, random and
//!   DFT phases with optimal fixed-surface precoding, WMMSE).

pub mod admm_sumrate;
pub mod admm_wsinr;
pub mod baselines;
pub mod channel;
pub mod config;
mod error;
pub mod linalg;
pub mod qcqp;
pub mod system_model;

pub use error::{Error, Result};

pub use nalgebra;
pub use num_complex::Complex64;

/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = nalgebra::DVector<Complex64>;

/// One of the two single-antenna users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum User {
    One,
    Two,
}

impl User {
    pub fn other(self) -> User {
        match self {
            User::One => User::Two,
            User::Two => User::One,
        }
    }

    /// 1-based index, as used in reports.
    pub fn index(self) -> usize {
        match self {
            User::One => 1,
            User::Two => 2,
        }
    }
}
