use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::space::{Configuration, ParticleId, Point, Region};
use crate::SimRng;

/// Non-interacting reference model: births uniform on a region with total mass
/// `immigration + per_capita·|η|`, every particle dies at the constant rate `death`.
///
/// With `immigration = 0` the empty configuration is absorbing; with `per_capita > 0`
/// and `death = 0` the population count is a Yule process.
#[derive(Clone, Debug)]
pub struct LinearModel {
    region: Region,
    region_volume: f64,
    immigration: f64,
    per_capita: f64,
    death: f64,
}

impl LinearModel {
    pub fn new(region: Region, immigration: f64, per_capita: f64, death: f64) -> Result<Self> {
        let region_volume = region.volume();
        if !(region_volume > 0.0 && region_volume.is_finite()) {
            return Err(Error::InvalidParameter(format!("region volume {region_volume} must be positive")));
        }
        for (name, v) in [("immigration", immigration), ("per_capita", per_capita), ("death", death)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} rate {v} must be finite and >= 0")));
            }
        }
        Ok(LinearModel {
            region,
            region_volume,
            immigration,
            per_capita,
            death,
        })
    }

    /// Pure birth with mass λ|η| on the unit cube.
    pub fn yule(dim: usize, lambda: f64) -> Result<Self> {
        Self::new(Region::unit_cube(dim), 0.0, lambda, 0.0)
    }

    /// Pure death at unit rate.
    pub fn pure_death(dim: usize, death: f64) -> Result<Self> {
        Self::new(Region::unit_cube(dim), 0.0, 0.0, death)
    }
}

impl RateModel for LinearModel {
    fn dim(&self) -> usize {
        self.region.dim()
    }

    fn birth_mass(&self, _t: f64, eta: &Configuration) -> f64 {
        self.immigration + self.per_capita * eta.len() as f64
    }

    fn birth_density(&self, x: &Point, t: f64, eta: &Configuration) -> f64 {
        if self.region.contains(x) {
            self.birth_mass(t, eta) / self.region_volume
        } else {
            0.0
        }
    }

    fn sample_birth(&self, _t: f64, _eta: &Configuration, rng: &mut SimRng) -> Point {
        self.region.sample(rng)
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
        (self.per_capita, self.immigration)
    }
}
