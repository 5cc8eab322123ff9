//! Dynkin-residual checks of simulated paths against the generator
//!
//! LF(η) = ∫ b(x, η)[F(η ∪ {x}) − F(η)] dx + Σ_{x∈η} d(x, η)[F(η ∖ {x}) − F(η)].
//!
//! For F with bounded increments, F(η_t) − F(η₀) − ∫₀ᵗ LF(η_s) ds is a martingale, so its mean
//! over independent runs must vanish.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;

use crate::engine::{SimOptions, Simulator, Step};
use crate::error::{Error, Result};
use crate::mc::{mc_collect, MCEstimate};
use crate::model::RateModel;
use crate::space::{Configuration, Point, Region};
use crate::SimRng;

type Evaluator = Arc<dyn Fn(&Configuration) -> f64 + Send + Sync>;

/// A functional F that depends on η only through η ∩ B(0, R) and whose single-point
/// increments are bounded by `increment_bound`.
#[derive(Clone)]
pub struct CylindricalFunctional {
    radius: f64,
    increment_bound: f64,
    eval: Evaluator,
}

impl fmt::Debug for CylindricalFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CylindricalFunctional")
            .field("radius", &self.radius)
            .field("increment_bound", &self.increment_bound)
            .finish_non_exhaustive()
    }
}

impl CylindricalFunctional {
    pub fn new(
        radius: f64,
        increment_bound: f64,
        eval: impl Fn(&Configuration) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be positive (got {radius})")));
        }
        if !(increment_bound > 0.0 && increment_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "increment bound must be positive (got {increment_bound})"
            )));
        }
        Ok(CylindricalFunctional {
            radius,
            increment_bound,
            eval: Arc::new(eval),
        })
    }

    /// F(η) = min(|η ∩ Λ|, cap).
    pub fn capped_count(region: Region, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter(format!("cap must be positive (got {cap})")));
        }
        let radius = region.max_norm_bound().max(f64::MIN_POSITIVE);
        Self::new(radius, 1.0, move |eta| (eta.count_in(&region) as f64).min(cap))
    }

    /// F(η) = |η| for every η, with R = ∞ replaced by `radius`; only meaningful when all
    /// particles stay inside B(0, R).
    pub fn count_within(radius: f64) -> Result<Self> {
        Self::new(radius, 1.0, move |eta| {
            eta.points().filter(|p| p.norm() <= radius).count() as f64
        })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(1.0, 1.0, move |_| value).expect("valid constant functional")
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn increment_bound(&self) -> f64 {
        self.increment_bound
    }

    pub fn eval(&self, eta: &Configuration) -> f64 {
        (self.eval)(eta)
    }

    /// Checks locality (a point beyond R never changes F) and the increment bound on every
    /// pair (η, x) from the samples.
    pub fn check_invariants(&self, etas: &[Configuration], points: &[Point]) -> Result<()> {
        for eta in etas {
            let base = self.eval(eta);
            let dim = eta.points().next().or(points.first()).map_or(1, Point::dim);
            let mut far = vec![0.0; dim];
            far[0] = 2.0 * self.radius + 1.0;
            let mut with_far = eta.clone();
            with_far.insert(Point::from_raw(far));
            if self.eval(&with_far) != base {
                return Err(Error::InvalidParameter(format!(
                    "functional changes when a point beyond radius {} is added",
                    self.radius
                )));
            }
            for x in points {
                let mut grown = eta.clone();
                grown.insert(x.clone());
                let inc = (self.eval(&grown) - base).abs();
                if inc > self.increment_bound {
                    return Err(Error::InvalidParameter(format!(
                        "increment {inc} at {:?} exceeds bound {}",
                        x.coords(),
                        self.increment_bound
                    )));
                }
            }
        }
        Ok(())
    }
}

/// (birth term, death term) of LF(η) at time t; the birth integral is averaged over `k`
/// draws from the model's birth sampler, the death sum is exact.
pub fn generator_terms<M: RateModel + ?Sized>(
    model: &M,
    f: &CylindricalFunctional,
    t: f64,
    eta: &Configuration,
    k: usize,
    rng: &mut SimRng,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidParameter("need at least one birth sample".into()));
    }
    let base = f.eval(eta);
    let mass = model.birth_mass(t, eta);
    let mut birth = 0.0;
    if mass > 0.0 {
        let mut scratch = eta.clone();
        let mut sum = 0.0;
        for _ in 0..k {
            let x = model.sample_birth(t, eta, rng);
            let id = scratch.insert(x);
            sum += f.eval(&scratch) - base;
            scratch.remove(id);
        }
        birth = mass * sum / k as f64;
    }
    let mut death = 0.0;
    let mut scratch = eta.clone();
    for (id, x) in eta.iter() {
        let d = model.death_rate(id, t, eta);
        if d > 0.0 {
            scratch.remove(id);
            death += d * (f.eval(&scratch) - base);
            scratch.insert_with_id(id, x.clone())?;
        }
    }
    Ok((birth, death))
}

/// Unbiased estimate of LF(η) at time t from `k` birth-sampler draws.
pub fn generator_apply_estimate<M: RateModel + ?Sized>(
    model: &M,
    f: &CylindricalFunctional,
    t: f64,
    eta: &Configuration,
    k: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let (b, d) = generator_terms(model, f, t, eta, k, rng)?;
    Ok(b + d)
}

/// Options for [`dynkin_residual`].
#[derive(Clone, Debug)]
pub struct DynkinOptions {
    /// Birth-sampler draws per inter-event segment.
    pub samples_per_segment: usize,
    /// Factor applied to the birth term of the compensator only. Anything but 1 makes the
    /// residual biased; used to check that the test has power.
    pub compensator_birth_scale: f64,
    pub workers: usize,
    pub sim: SimOptions,
}

impl Default for DynkinOptions {
    fn default() -> Self {
        DynkinOptions {
            samples_per_segment: 1,
            compensator_birth_scale: 1.0,
            workers: 1,
            sim: SimOptions::default(),
        }
    }
}

/// Residual F(η_T) − F(α) − ∫₀ᵀ LF(η_s) ds of one run; the integral is exact per segment
/// up to the birth-term sampling.
pub fn dynkin_run<M: RateModel + ?Sized>(
    model: &M,
    f: &CylindricalFunctional,
    alpha: &Configuration,
    horizon: f64,
    rng: &mut SimRng,
    opts: &DynkinOptions,
) -> Result<f64> {
    let sim_rng = SimRng::from_rng(&mut *rng);
    let mut est_rng = SimRng::from_rng(&mut *rng);
    let mut sim = Simulator::new(model, alpha.clone(), horizon, sim_rng, &opts.sim)?;
    let mut integral = 0.0;
    let mut t = 0.0;
    loop {
        let (b, d) = generator_terms(model, f, t, sim.configuration(), opts.samples_per_segment, &mut est_rng)?;
        let lf = opts.compensator_birth_scale * b + d;
        match sim.step()? {
            Step::Event(ev) => {
                integral += lf * (ev.time - t);
                t = ev.time;
            }
            Step::Absorbed | Step::Horizon => {
                integral += lf * (horizon - t);
                break;
            }
        }
    }
    Ok(f.eval(sim.configuration()) - f.eval(alpha) - integral)
}

/// Mean and SE of the Dynkin residual over `runs` seeded runs.
pub fn dynkin_residual<M: RateModel + ?Sized>(
    model: &M,
    f: &CylindricalFunctional,
    alpha: &Configuration,
    horizon: f64,
    runs: u64,
    seed: u64,
    opts: &DynkinOptions,
) -> Result<MCEstimate> {
    if !model.is_time_homogeneous() {
        return Err(Error::InvalidParameter(
            "the Dynkin check integrates the compensator exactly only for time-homogeneous models".into(),
        ));
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let samples = mc_collect(runs, seed, opts.workers, |_, rng| dynkin_run(model, f, alpha, horizon, rng, opts))?;
    Ok(MCEstimate::from_samples(&samples))
}
