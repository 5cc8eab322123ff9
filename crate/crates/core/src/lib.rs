//! Event-driven simulation of finite spatial birth-and-death processes on ℝ^d.
//!
//! The crate is organised around the [`RateModel`] contract: a birth intensity
//! b(x, t, η) and a per-particle death rate d(x, t, η), plus the sup-bounds that
//! thinning needs. On top of it sit
//!
//! * [`engine`]: exact single-trajectory simulation (direct method for
//!   time-homogeneous models, thinning otherwise) and the pure-birth majorant,
//! * [`coupling`]: two processes on shared noise with pathwise inclusion,
//! * [`analytics`]: closed-form extinction and hitting probabilities of the
//!   aggregation comparison chain and trajectory statistics,
//! * [`chain`]: finite-kernel lumpability and ℤ₊ birth-death series,
//! * [`generator`]: Dynkin-residual checks of simulated paths against the generator,
//! * [`mc`]: seeded parallel Monte Carlo whose results do not depend on the worker count.
//!
//! ```
//! use sbdp_core::{simulate, LinearModel, Configuration, Point};
//!
//! let model = LinearModel::pure_death(1, 1.0).unwrap();
//! let alpha = Configuration::from_points([Point::from([0.2]), Point::from([0.7])]);
//! let traj = simulate(&model, &alpha, 100.0, 42).unwrap();
//! assert!(traj.final_configuration().unwrap().is_empty());
//! ```

pub mod analytics;
pub mod chain;
pub mod coupling;
pub mod engine;
pub mod error;
pub mod generator;
pub mod mc;
pub mod model;
pub mod models;
pub mod space;
pub mod stats;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Random source used throughout; substreams come from [`mc::substream`].
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use analytics::{
    chain_transition, death_count, extinction_probability, growth_statistic, hitting_probability, rho, ChainParams,
};
pub use chain::{is_lumpable, lump, pushforward_equivalence, series_extinction, FiniteKernel, Lumping};
pub use coupling::simulate_coupled;
pub use engine::{
    next_event_homogeneous, next_event_inhomogeneous, simulate, simulate_with_majorant, yule_mean, Event, EventKind,
    SimOptions, SimState, Step, Trajectory,
};
pub use error::{Error, Result};
pub use generator::{dynkin_residual, generator_apply_estimate, CylindricalFunctional};
pub use mc::{mc_parallel, substream, MCEstimate};
pub use model::{total_death_rate, RateModel};
pub use models::{
    aggregation_death_rate, comparison_model, AggregationModel, AggregationParams, ComparisonModel, ContactModel,
    DispersalKernel, LinearModel, Phi, TimeScaled,
};
pub use space::{restrict_count, Configuration, ParticleId, Point, Region};
