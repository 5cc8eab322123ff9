use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::space::{Configuration, ParticleId, Point};
use crate::SimRng;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time-inhomogeneous wrapper: b(x, t, η) = f(t)·b₀(x, η) and d(x, t, η) = g(t)·d₀(x, η)
/// for a time-homogeneous base model, with 0 ≤ f ≤ `birth_sup` and 0 ≤ g ≤ `death_sup`.
#[derive(Clone)]
pub struct TimeScaled<M> {
    inner: M,
    birth_profile: Profile,
    birth_sup: f64,
    death_profile: Profile,
    death_sup: f64,
}

impl<M> fmt::Debug for TimeScaled<M> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeScaled")
            .field("birth_sup", &self.birth_sup)
            .field("death_sup", &self.death_sup)
            .finish_non_exhaustive()
    }
}

impl<M: RateModel> TimeScaled<M> {
    pub fn new(inner: M) -> Self {
        TimeScaled {
            inner,
            birth_profile: Arc::new(|_| 1.0),
            birth_sup: 1.0,
            death_profile: Arc::new(|_| 1.0),
            death_sup: 1.0,
        }
    }

    pub fn birth_profile(mut self, profile: impl Fn(f64) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !(sup >= 0.0 && sup.is_finite()) {
            return Err(Error::InvalidParameter(format!("birth profile bound {sup} must be finite and >= 0")));
        }
        self.birth_profile = Arc::new(profile);
        self.birth_sup = sup;
        Ok(self)
    }

    pub fn death_profile(mut self, profile: impl Fn(f64) -> f64 + Send + Sync + 'static, sup: f64) -> Result<Self> {
        if !(sup >= 0.0 && sup.is_finite()) {
            return Err(Error::InvalidParameter(format!("death profile bound {sup} must be finite and >= 0")));
        }
        self.death_profile = Arc::new(profile);
        self.death_sup = sup;
        Ok(self)
    }
}

impl<M: RateModel> RateModel for TimeScaled<M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn is_time_homogeneous(&self) -> bool {
        false
    }

    fn birth_mass(&self, t: f64, eta: &Configuration) -> f64 {
        (self.birth_profile)(t) * self.inner.birth_mass(t, eta)
    }

    fn birth_density(&self, x: &Point, t: f64, eta: &Configuration) -> f64 {
        (self.birth_profile)(t) * self.inner.birth_density(x, t, eta)
    }

    fn sample_birth(&self, t: f64, eta: &Configuration, rng: &mut SimRng) -> Point {
        self.inner.sample_birth(t, eta, rng)
    }

    fn birth_sup_density(&self, x: &Point, eta: &Configuration) -> f64 {
        self.birth_sup * self.inner.birth_sup_density(x, eta)
    }

    fn birth_sup_mass(&self, eta: &Configuration) -> f64 {
        self.birth_sup * self.inner.birth_sup_mass(eta)
    }

    fn sample_birth_sup(&self, eta: &Configuration, rng: &mut SimRng) -> Point {
        self.inner.sample_birth_sup(eta, rng)
    }

    fn death_rate(&self, id: ParticleId, t: f64, eta: &Configuration) -> f64 {
        (self.death_profile)(t) * self.inner.death_rate(id, t, eta)
    }

    fn death_sup(&self) -> f64 {
        self.death_sup * self.inner.death_sup()
    }

    fn growth_constants(&self) -> (f64, f64) {
        let (c1, c2) = self.inner.growth_constants();
        (self.birth_sup * c1, self.birth_sup * c2)
    }
}
