use rand::Rng;

use super::DispersalKernel;
use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::space::{Configuration, ParticleId, Point};
use crate::SimRng;

/// Contact process in the continuum: b(x, η) = λ Σ_{y∈η} k(x − y), d ≡ `death`.
///
/// `death = 0` gives the spatial pure-birth process whose population is a Yule process.
#[derive(Clone, Debug)]
pub struct ContactModel {
    dim: usize,
    lambda: f64,
    kernel: DispersalKernel,
    death: f64,
}

impl ContactModel {
    pub fn new(dim: usize, lambda: f64, kernel: DispersalKernel, death: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} must be finite and >= 0")));
        }
        if !(death >= 0.0 && death.is_finite()) {
            return Err(Error::InvalidParameter(format!("death rate {death} must be finite and >= 0")));
        }
        kernel.validate()?;
        Ok(ContactModel {
            dim,
            lambda,
            kernel,
            death,
        })
    }

    pub fn pure_birth(dim: usize, lambda: f64, kernel: DispersalKernel) -> Result<Self> {
        Self::new(dim, lambda, kernel, 0.0)
    }
}

impl RateModel for ContactModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn birth_mass(&self, _t: f64, eta: &Configuration) -> f64 {
        self.lambda * eta.len() as f64
    }

    fn birth_density(&self, x: &Point, _t: f64, eta: &Configuration) -> f64 {
        self.lambda * eta.points().map(|y| self.kernel.density_between(x, y)).sum::<f64>()
    }

    fn sample_birth(&self, _t: f64, eta: &Configuration, rng: &mut SimRng) -> Point {
        let parent = eta.get_index(rng.random_range(0..eta.len())).expect("non-empty").1;
        self.kernel.sample_around(parent, rng)
    }

    fn death_rate(&self, id: ParticleId, _t: f64, eta: &Configuration) -> f64 {
        if eta.contains_id(id) {
            self.death
        } else {
            0.0
        }
    }

    fn death_sup(&self) -> f64 {
        self.death
    }

    fn growth_constants(&self) -> (f64, f64) {
        (self.lambda, 0.0)
    }
}
