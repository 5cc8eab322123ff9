//! The aggregation model, where crowding suppresses death, and its lower
//! comparison model with count-only rates on Λ.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::DispersalKernel;
use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::space::{Configuration, ParticleId, Point, Region};
use crate::SimRng;

/// Pair interaction φ ≥ 0, evaluated at differences x − y.
#[derive(Clone)]
pub enum Phi {
    Constant(f64),
    /// `height` for |z| ≤ `radius`, 0 beyond.
    Step { height: f64, radius: f64 },
    /// `height · exp(−|z|² / (2·scale²))`.
    Gaussian { height: f64, scale: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Constant(v) => write!(f, "Constant({v})"),
            Phi::Step { height, radius } => write!(f, "Step {{ height: {height}, radius: {radius} }}"),
            Phi::Gaussian { height, scale } => write!(f, "Gaussian {{ height: {height}, scale: {scale} }}"),
            Phi::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Phi {
    pub fn eval(&self, diff: &[f64]) -> f64 {
        match self {
            Phi::Custom(g) => g(diff),
            radial => radial.radial(diff.iter().map(|v| v * v).sum()),
        }
    }

    pub fn between(&self, x: &Point, y: &Point) -> f64 {
        match self {
            Phi::Custom(g) => {
                let diff: Vec<f64> = x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect();
                g(&diff)
            }
            radial => radial.radial(x.dist2(y)),
        }
    }

    fn radial(&self, r2: f64) -> f64 {
        match *self {
            Phi::Constant(v) => v,
            Phi::Step { height, radius } => {
                if r2 <= radius * radius {
                    height
                } else {
                    0.0
                }
            }
            Phi::Gaussian { height, scale } => height * (-0.5 * r2 / (scale * scale)).exp(),
            Phi::Custom(_) => unreachable!(),
        }
    }

    /// Lower bound of φ over |z| ≤ r, exact for the radial presets.
    fn radial_min_within(&self, r: f64) -> Option<f64> {
        match *self {
            Phi::Constant(v) => Some(v),
            Phi::Step { height, radius } => Some(if r <= radius { height } else { 0.0 }),
            Phi::Gaussian { height, scale } => Some(height * (-0.5 * r * r / (scale * scale)).exp()),
            Phi::Custom(_) => None,
        }
    }
}

/// Parameters of the aggregation death rate d(x, η) = exp(−Σ_y φ(x − y)).
#[derive(Clone, Debug)]
pub struct AggregationParams {
    pub phi: Phi,
    pub a: f64,
    /// Per-capita birth mass in Λ.
    pub c: f64,
    pub region: Region,
    /// Whether the interaction sum runs over all of η (true) or over η ∖ {x}.
    pub include_self: bool,
}

const PHI_SAMPLES: usize = 2000;

impl AggregationParams {
    /// Defaults: φ ≡ log a on all of ℝ^d and the self term included.
    pub fn new(a: f64, c: f64, region: Region) -> Self {
        AggregationParams {
            phi: Phi::Constant(a.ln()),
            a,
            c,
            region,
            include_self: true,
        }
    }

    /// Checks a > 1, c > 0, |Λ| > 0, φ ≥ 0 and inf_{x,y∈Λ} φ(x − y) ≥ log a.
    ///
    /// The infimum is exact for radial presets (via the diameter of Λ's bounding box) and
    /// checked on a fixed-seed sample of pairs for custom kernels.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.a > 1.0 && self.a.is_finite()) {
            problems.push(format!("a must exceed 1 (got {})", self.a));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            problems.push(format!("c must be positive (got {})", self.c));
        }
        let vol = self.region.volume();
        if !(vol > 0.0 && vol.is_finite()) {
            problems.push(format!("region volume must be positive (got {vol})"));
        }
        if let Phi::Step { height, radius } | Phi::Gaussian { height, scale: radius } = self.phi {
            if !(height >= 0.0 && radius > 0.0) {
                problems.push(format!("phi parameters must be nonnegative with positive width ({:?})", self.phi));
            }
        }
        if problems.is_empty() {
            let log_a = self.a.ln();
            let mut rng = SimRng::seed_from_u64(0x5eed_f00d);
            let mut inf = f64::INFINITY;
            for _ in 0..PHI_SAMPLES {
                let x = self.region.sample(&mut rng);
                let y = self.region.sample(&mut rng);
                let v = self.phi.between(&x, &y);
                if !(v >= 0.0) {
                    problems.push(format!("phi must be nonnegative (phi({:?}) = {v})", diff(&x, &y)));
                    break;
                }
                inf = inf.min(v);
            }
            if let Some(v) = self.phi.radial_min_within(self.region.diameter_bound()) {
                inf = inf.min(v);
            }
            // tolerate the rounding in ln
            if inf < log_a * (1.0 - 1e-12) {
                problems.push(format!("inf of phi over Lambda - Lambda is {inf}, below log a = {log_a}"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    /// Upper bound on the death rate: e^{−φ(0)} with the self term, 1 without.
    pub fn death_sup(&self) -> f64 {
        if self.include_self {
            (-self.phi.eval(&vec![0.0; self.region.dim()])).exp().min(1.0)
        } else {
            1.0
        }
    }

    fn death_rate_of(&self, id: ParticleId, x: &Point, eta: &Configuration) -> f64 {
        let s: f64 = eta
            .iter()
            .filter(|(other, _)| self.include_self || *other != id)
            .map(|(_, y)| self.phi.between(x, y))
            .sum();
        (-s).exp()
    }
}

fn diff(x: &Point, y: &Point) -> Vec<f64> {
    x.coords().iter().zip(y.coords()).map(|(a, b)| a - b).collect()
}

/// d(x, η) = exp(−Σ_{y∈S} φ(x − y)) with S = η, or η ∖ {x} when the self term is excluded.
pub fn aggregation_death_rate(params: &AggregationParams, x: &Point, eta: &Configuration) -> Result<f64> {
    let id = eta
        .find_point(x)
        .ok_or_else(|| Error::NotInConfiguration(x.coords().to_vec()))?;
    Ok(params.death_rate_of(id, x, eta))
}

/// Aggregation model: uniform births on Λ with mass c·|η ∩ Λ|, optionally plus
/// offspring dispersal λ·Σ_{y∈η} k(x − y); death rate from [`AggregationParams`].
#[derive(Clone, Debug)]
pub struct AggregationModel {
    params: AggregationParams,
    dispersal: Option<(f64, DispersalKernel)>,
    region_volume: f64,
}

impl AggregationModel {
    pub fn new(params: AggregationParams) -> Result<Self> {
        params.validate()?;
        let region_volume = params.region.volume();
        Ok(AggregationModel {
            params,
            dispersal: None,
            region_volume,
        })
    }

    /// Adds offspring dispersal at per-capita rate `lambda`.
    pub fn with_dispersal(mut self, lambda: f64, kernel: DispersalKernel) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("dispersal rate {lambda} must be >= 0")));
        }
        kernel.validate()?;
        self.dispersal = (lambda > 0.0).then_some((lambda, kernel));
        Ok(self)
    }

    pub fn params(&self) -> &AggregationParams {
        &self.params
    }

    fn uniform_mass(&self, eta: &Configuration) -> f64 {
        self.params.c * eta.count_in(&self.params.region) as f64
    }
}

impl RateModel for AggregationModel {
    fn dim(&self) -> usize {
        self.params.region.dim()
    }

    fn birth_mass(&self, _t: f64, eta: &Configuration) -> f64 {
        let spread = self.dispersal.map_or(0.0, |(lambda, _)| lambda * eta.len() as f64);
        self.uniform_mass(eta) + spread
    }

    fn birth_density(&self, x: &Point, _t: f64, eta: &Configuration) -> f64 {
        let uniform = if self.params.region.contains(x) {
            self.uniform_mass(eta) / self.region_volume
        } else {
            0.0
        };
        let spread = self.dispersal.map_or(0.0, |(lambda, k)| {
            lambda * eta.points().map(|y| k.density_between(x, y)).sum::<f64>()
        });
        uniform + spread
    }

    fn sample_birth(&self, t: f64, eta: &Configuration, rng: &mut SimRng) -> Point {
        let uniform = self.uniform_mass(eta);
        let total = self.birth_mass(t, eta);
        match self.dispersal {
            Some((_, kernel)) if rng.random::<f64>() * total >= uniform => {
                let parent = eta.get_index(rng.random_range(0..eta.len())).expect("non-empty").1;
                kernel.sample_around(parent, rng)
            }
            _ => self.params.region.sample(rng),
        }
    }

    fn death_rate(&self, id: ParticleId, _t: f64, eta: &Configuration) -> f64 {
        match eta.get(id) {
            Some(x) => self.params.death_rate_of(id, x, eta),
            None => 0.0,
        }
    }

    fn death_sup(&self) -> f64 {
        self.params.death_sup()
    }

    fn growth_constants(&self) -> (f64, f64) {
        (self.params.c + self.dispersal.map_or(0.0, |(l, _)| l), 0.0)
    }
}

/// The comparison model: b₁ uniform on Λ with mass c·|η ∩ Λ|, d₁(x, η) = a^{−|η|} on Λ,
/// both zero off Λ. On nested pairs η¹ ⊂ η² it sits below the aggregation model:
/// b₁(x, η¹) ≤ b(x, η²) and d₁(x, η¹) ≥ d(x, η²).
#[derive(Clone, Debug)]
pub struct ComparisonModel {
    a: f64,
    c: f64,
    region: Region,
    region_volume: f64,
}

/// Builds the comparison model sharing `params`' a, c and Λ.
pub fn comparison_model(params: &AggregationParams) -> Result<ComparisonModel> {
    ComparisonModel::new(params.a, params.c, params.region.clone())
}

impl ComparisonModel {
    pub fn new(a: f64, c: f64, region: Region) -> Result<Self> {
        let region_volume = region.volume();
        if !(region_volume > 0.0 && region_volume.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "comparison model needs a region of positive volume (got {region_volume})"
            )));
        }
        if !(a > 1.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must exceed 1 (got {a})")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("c must be positive (got {c})")));
        }
        Ok(ComparisonModel {
            a,
            c,
            region,
            region_volume,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn region(&self) -> &Region {
        &self.region
    }
}

impl RateModel for ComparisonModel {
    fn dim(&self) -> usize {
        self.region.dim()
    }

    fn birth_mass(&self, _t: f64, eta: &Configuration) -> f64 {
        self.c * eta.count_in(&self.region) as f64
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
        match eta.get(id) {
            Some(x) if self.region.contains(x) => self.a.powf(-(eta.len() as f64)),
            _ => 0.0,
        }
    }

    fn death_sup(&self) -> f64 {
        1.0 / self.a
    }

    fn growth_constants(&self) -> (f64, f64) {
        (self.c, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::total_death_rate;

    fn unit_params(a: f64) -> AggregationParams {
        AggregationParams::new(a, 1.0, Region::unit_cube(2))
    }

    #[test]
    fn death_rate_examples() {
        let mut p = unit_params(2.0);
        let x = Point::from([0.2, 0.3]);
        let single = Configuration::from_points([x.clone()]);

        p.include_self = false;
        assert_eq!(aggregation_death_rate(&p, &x, &single).unwrap(), 1.0);

        let pair = Configuration::from_points([x.clone(), Point::from([0.9, 0.9])]);
        assert!((aggregation_death_rate(&p, &x, &pair).unwrap() - 0.5).abs() < 1e-15);

        p.include_self = true;
        assert!((aggregation_death_rate(&p, &x, &single).unwrap() - 0.5).abs() < 1e-15);

        let stranger = Point::from([0.5, 0.5]);
        assert!(matches!(
            aggregation_death_rate(&p, &stranger, &single),
            Err(Error::NotInConfiguration(_))
        ));
    }

    #[test]
    fn total_death_rate_of_single_point_with_self_term() {
        let model = AggregationModel::new(unit_params(2.0)).unwrap();
        let eta = Configuration::from_points([Point::from([0.5, 0.5])]);
        assert!((total_death_rate(&model, 0.0, &eta) - 0.5).abs() < 1e-15);
        assert_eq!(total_death_rate(&model, 0.0, &Configuration::new()), 0.0);
    }

    #[test]
    fn comparison_model_examples() {
        let model = comparison_model(&unit_params(2.0)).unwrap();
        let eta = Configuration::from_points([
            Point::from([0.1, 0.1]),
            Point::from([0.2, 0.8]),
            Point::from([0.7, 0.4]),
            Point::from([3.0, 3.0]),
        ]);
        assert_eq!(model.birth_mass(0.0, &eta), 3.0);
        assert_eq!(model.birth_mass(0.0, &Configuration::new()), 0.0);

        let two = Configuration::from_points([Point::from([0.1, 0.1]), Point::from([0.5, 0.5])]);
        let id = two.ids().next().unwrap();
        assert_eq!(model.death_rate(id, 0.0, &two), 0.25);

        // off Λ nothing happens
        let outside = eta.ids().last().unwrap();
        assert_eq!(model.death_rate(outside, 0.0, &eta), 0.0);
        assert_eq!(model.birth_density(&Point::from([2.0, 0.0]), 0.0, &eta), 0.0);
    }

    #[test]
    fn comparison_rejects_degenerate_region() {
        let flat = Region::new_box(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        assert!(ComparisonModel::new(2.0, 1.0, flat).is_err());
    }

    #[test]
    fn validation_reports_every_problem() {
        let mut p = AggregationParams::new(0.5, -1.0, Region::unit_cube(1));
        p.phi = Phi::Constant(0.0);
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("a must exceed 1"), "{msg}");
        assert!(msg.contains("c must be positive"), "{msg}");
    }

    #[test]
    fn validation_checks_phi_floor_on_region() {
        let mut p = unit_params(2.0);
        // the unit square has diameter √2 > 1
        p.phi = Phi::Step { height: 1.0, radius: 1.0 };
        assert!(p.validate().is_err());
        p.phi = Phi::Step { height: 1.0, radius: 1.5 };
        assert!(p.validate().is_ok());
        p.phi = Phi::Custom(Arc::new(|z: &[f64]| if z[0] > 0.5 { 0.1 } else { 1.0 }));
        assert!(p.validate().is_err());
    }

    #[test]
    fn death_sup_bounds_rates() {
        let mut p = unit_params(3.0);
        assert!((p.death_sup() - 1.0 / 3.0).abs() < 1e-15);
        p.include_self = false;
        assert_eq!(p.death_sup(), 1.0);
    }

    #[test]
    fn dispersal_adds_mass_outside_region() {
        let model = AggregationModel::new(unit_params(2.0))
            .unwrap()
            .with_dispersal(0.5, DispersalKernel::Gaussian { sigma: 0.2 })
            .unwrap();
        let eta = Configuration::from_points([Point::from([0.5, 0.5]), Point::from([4.0, 4.0])]);
        assert!((model.birth_mass(0.0, &eta) - 2.0).abs() < 1e-15);
        assert!(model.birth_density(&Point::from([4.0, 4.1]), 0.0, &eta) > 0.0);
        assert_eq!(model.growth_constants(), (1.5, 0.0));
    }
}
