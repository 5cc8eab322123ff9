use thiserror::Error;

use crate::space::ParticleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point {0:?} is not a member of the configuration")]
    NotInConfiguration(Vec<f64>),

    #[error("particle {0} is not live")]
    UnknownParticle(ParticleId),

    #[error("non-finite {what} = {value} at t = {time}")]
    NonFiniteRate {
        what: &'static str,
        value: f64,
        time: f64,
    },

    /// A rate exceeded the bound the thinning envelope was built from.
    #[error(
        "envelope violated: {what} = {value} exceeds bound {bound} at t = {time} \
         (particle {particle:?}, point {point:?}, population {population})"
    )]
    EnvelopeViolation {
        what: &'static str,
        value: f64,
        bound: f64,
        time: f64,
        particle: Option<ParticleId>,
        point: Vec<f64>,
        population: usize,
    },

    #[error(
        "circuit breaker tripped after {events} events at t = {time} (population {population}); \
         the birth rate probably violates the sublinear growth bound c1*|eta| + c2"
    )]
    CircuitBreaker {
        events: u64,
        time: f64,
        population: usize,
    },

    /// The two processes of a coupling stopped being ordered on a visited state pair.
    #[error(
        "monotonicity violated at t = {time}: {what} (lower process {lower}, upper process {upper}) \
         at point {point:?}; lower population {lower_population}, upper population {upper_population}"
    )]
    MonotonicityViolation {
        what: &'static str,
        lower: f64,
        upper: f64,
        time: f64,
        point: Vec<f64>,
        lower_population: usize,
        upper_population: usize,
    },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("kernel is not lumpable: states {0} and {1} share a label but push forward differently")]
    NotLumpable(usize, usize),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("run {run} (substream {stream}) failed: {source}")]
    RunFailed {
        run: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },
}
