//! The three blocks of the alternating optimization.

pub mod bs;
pub mod sdr;
pub mod user;

pub use bs::{assemble_p21, solve_bs_positions, BsOutcome, P21Data, ScaSettings};
pub use sdr::{fill_power_budget, min_sinr_power, recover_rank_one, solve_beamforming_sdr, SdrOutcome};
pub use user::{
    path_covariance, solve_user_position, true_slack, user_surrogate, varsigma, varsigma_gradient, UserOutcome,
    UserStatus, UserSurrogate,
};
