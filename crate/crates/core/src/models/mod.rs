//! Bundled rate models.

mod aggregation;
mod contact;
mod linear;
mod time_scaled;

pub use aggregation::{
    aggregation_death_rate, comparison_model, AggregationModel, AggregationParams, ComparisonModel, Phi,
};
pub use contact::ContactModel;
pub use linear::LinearModel;
pub use time_scaled::TimeScaled;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::space::{unit_ball_volume, Point};
use crate::SimRng;

/// Normalised offspring displacement density k(z), ∫ k = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DispersalKernel {
    /// Isotropic normal with per-axis standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Uniform on the closed ball of the given radius.
    UniformBall { radius: f64 },
}

impl DispersalKernel {
    pub fn validate(&self) -> Result<()> {
        let scale = match *self {
            DispersalKernel::Gaussian { sigma } => sigma,
            DispersalKernel::UniformBall { radius } => radius,
        };
        if scale.is_finite() && scale > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("kernel scale {scale} must be positive")))
        }
    }

    pub fn density_between(&self, x: &Point, parent: &Point) -> f64 {
        let r2 = x.dist2(parent);
        let d = x.dim() as i32;
        match *self {
            DispersalKernel::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                (-0.5 * r2 / s2).exp() / (2.0 * std::f64::consts::PI * s2).powf(d as f64 / 2.0)
            }
            DispersalKernel::UniformBall { radius } => {
                if r2 <= radius * radius {
                    1.0 / (unit_ball_volume(d as usize) * radius.powi(d))
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample_around(&self, parent: &Point, rng: &mut SimRng) -> Point {
        let d = parent.dim();
        let offset: Vec<f64> = match *self {
            DispersalKernel::Gaussian { sigma } => (0..d).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect(),
            DispersalKernel::UniformBall { radius } => loop {
                let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 0.0 {
                    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                    break g.into_iter().map(|v| r * v / n).collect();
                }
            },
        };
        Point::from_raw(parent.coords().iter().zip(offset).map(|(p, o)| p + o).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn uniform_ball_density_integrates_to_one_in_1d() {
        let k = DispersalKernel::UniformBall { radius: 0.5 };
        let o = Point::from([0.0]);
        assert!((k.density_between(&Point::from([0.2]), &o) - 1.0).abs() < 1e-15);
        assert_eq!(k.density_between(&Point::from([0.6]), &o), 0.0);
    }

    #[test]
    fn gaussian_offsets_have_expected_spread() {
        let k = DispersalKernel::Gaussian { sigma: 0.3 };
        let mut rng = SimRng::seed_from_u64(1);
        let o = Point::from([1.0, -1.0]);
        let n = 20_000;
        let mut s2 = 0.0;
        for _ in 0..n {
            s2 += k.sample_around(&o, &mut rng).dist2(&o);
        }
        // E|Z|² = 2σ² in two dimensions
        let mean = s2 / n as f64;
        assert!((mean - 0.18).abs() < 0.01, "{mean}");
    }
}
