//! Joint transmit beamforming and movable-antenna placement that minimizes the
//! Cramér-Rao bound on a target's direction in a multiuser ISAC downlink.
//!
//! The numeric core is generic over [`Real`] (`f32`/`f64`); the aliases at the
//! bottom of this file pin it to `f64`, which is what the solvers are tuned for.
//!
//! ```
//! use maisac::{Config, Scenario};
//! use rand::SeedableRng;
//!
//! let config = Config::default();
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let scenario: Scenario = maisac::model::draw_random_geometry(&config, &mut rng);
//! assert_eq!(scenario.users.len(), config.n_users);
//! ```

pub mod ao;
pub mod crb;
pub mod error;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;
pub mod subproblems;

pub use ao::{evaluate_final, init_state, run_algorithm1, AoMode, AoSettings};
pub use crb::{crb_expanded, crb_general, steering_context, CrbParams};
pub use error::{Error, Result};
pub use model::{sinr, AntennaLayout, BeamformingMatrix, SystemConfig, UserChannelGeometry};
pub use scalar::Real;
pub use solver::{SolveReport, SolveStatus};

pub type C64 = scalar::Cx<f64>;
pub type CMat64 = scalar::CMat<f64>;
pub type CVec64 = scalar::CVec<f64>;

pub type Config = model::SystemConfig<f64>;
pub type Geometry = model::UserChannelGeometry<f64>;
pub type Layout = model::AntennaLayout<f64>;
pub type Beamformer = model::BeamformingMatrix<f64>;
pub type Scenario = model::Scenario<f64>;
pub type Steering = crb::SteeringContext<f64>;
pub type Trace = ao::AoTrace<f64>;
pub type Summary = ao::FinalSummary<f64>;
