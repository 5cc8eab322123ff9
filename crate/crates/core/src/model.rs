//! The rate-model contract consumed by every simulator.

use crate::error::{Error, Result};
use crate::space::{Configuration, ParticleId, Point};
use crate::SimRng;

/// Birth intensity b(x, t, η) and per-particle death rate d(x, t, η) of a
/// spatial birth-and-death process on ℝ^d.
///
/// Implementations must keep
///
/// * `birth_mass(t, η) ≤ birth_sup_mass(η) ≤ c₁|η| + c₂`,
/// * `birth_density(x, t, ξ) ≤ birth_sup_density(x, η)` for every ξ ⊂ η,
/// * `0 ≤ death_rate ≤ death_sup()`.
///
/// The sup-bounds drive thinning and the pure-birth majorant, so a model that
/// understates them is rejected at runtime with [`Error::EnvelopeViolation`].
/// Time-homogeneous models can rely on the default sup methods.
pub trait RateModel: Send + Sync {
    fn dim(&self) -> usize;

    fn is_time_homogeneous(&self) -> bool {
        true
    }

    /// B(t, η) = ∫ b(x, t, η) dx.
    fn birth_mass(&self, t: f64, eta: &Configuration) -> f64;

    /// b(x, t, η).
    fn birth_density(&self, x: &Point, t: f64, eta: &Configuration) -> f64;

    /// Draw from the density b(·, t, η) / B(t, η). Only called when the mass is positive.
    fn sample_birth(&self, t: f64, eta: &Configuration, rng: &mut SimRng) -> Point;

    /// b̄(x, η), dominating b(x, s, ξ) for all s and ξ ⊂ η.
    fn birth_sup_density(&self, x: &Point, eta: &Configuration) -> f64 {
        self.birth_density(x, 0.0, eta)
    }

    /// ∫ b̄(x, η) dx.
    fn birth_sup_mass(&self, eta: &Configuration) -> f64 {
        self.birth_mass(0.0, eta)
    }

    /// Draw from b̄(·, η) normalised.
    fn sample_birth_sup(&self, eta: &Configuration, rng: &mut SimRng) -> Point {
        self.sample_birth(0.0, eta, rng)
    }

    /// d(x, t, η) for the live particle `id`.
    fn death_rate(&self, id: ParticleId, t: f64, eta: &Configuration) -> f64;

    /// d̄, bounding every death rate the model can produce.
    fn death_sup(&self) -> f64;

    /// (c₁, c₂) with `birth_sup_mass(η) ≤ c₁|η| + c₂`.
    fn growth_constants(&self) -> (f64, f64);
}

/// D(t, η) = Σ_{x∈η} d(x, t, η).
pub fn total_death_rate<M: RateModel + ?Sized>(model: &M, t: f64, eta: &Configuration) -> f64 {
    eta.ids().map(|id| model.death_rate(id, t, eta)).sum()
}

/// d(x, t, η) addressed by position rather than id.
pub fn death_rate_at<M: RateModel + ?Sized>(model: &M, x: &Point, t: f64, eta: &Configuration) -> Result<f64> {
    let id = eta
        .find_point(x)
        .ok_or_else(|| Error::NotInConfiguration(x.coords().to_vec()))?;
    Ok(model.death_rate(id, t, eta))
}

pub(crate) fn check_rate(what: &'static str, value: f64, time: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::NonFiniteRate { what, value, time })
    }
}

// Relative slack for envelope comparisons; sup bounds are often the same
// expression evaluated through a different code path.
pub(crate) const ENVELOPE_SLACK: f64 = 1e-12;

pub(crate) fn exceeds(value: f64, bound: f64) -> bool {
    value > bound * (1.0 + ENVELOPE_SLACK) + f64::MIN_POSITIVE
}

impl<M: RateModel + ?Sized> RateModel for std::sync::Arc<M> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn is_time_homogeneous(&self) -> bool {
        (**self).is_time_homogeneous()
    }
    fn birth_mass(&self, t: f64, eta: &Configuration) -> f64 {
        (**self).birth_mass(t, eta)
    }
    fn birth_density(&self, x: &Point, t: f64, eta: &Configuration) -> f64 {
        (**self).birth_density(x, t, eta)
    }
    fn sample_birth(&self, t: f64, eta: &Configuration, rng: &mut SimRng) -> Point {
        (**self).sample_birth(t, eta, rng)
    }
    fn birth_sup_density(&self, x: &Point, eta: &Configuration) -> f64 {
        (**self).birth_sup_density(x, eta)
    }
    fn birth_sup_mass(&self, eta: &Configuration) -> f64 {
        (**self).birth_sup_mass(eta)
    }
    fn sample_birth_sup(&self, eta: &Configuration, rng: &mut SimRng) -> Point {
        (**self).sample_birth_sup(eta, rng)
    }
    fn death_rate(&self, id: ParticleId, t: f64, eta: &Configuration) -> f64 {
        (**self).death_rate(id, t, eta)
    }
    fn death_sup(&self) -> f64 {
        (**self).death_sup()
    }
    fn growth_constants(&self) -> (f64, f64) {
        (**self).growth_constants()
    }
}
