//! Points, finite configurations and regions of ℝ^d.

use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::SimRng;

/// Stable particle identifier. Ids are handed out by a monotone counter and never reused.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParticleId(pub u64);

impl fmt::Display for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A location in ℝ^d with finite coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter("a point needs at least one coordinate".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coordinate {bad}")));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim.max(1)])
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Panics on non-finite input; use [`Point::new`] for untrusted coordinates.
impl<const N: usize> From<[f64; N]> for Point {
    fn from(coords: [f64; N]) -> Self {
        Point::new(coords.to_vec()).expect("finite coordinates")
    }
}

/// A finite configuration η: live particles keyed by id, in insertion order.
///
/// Removal uses swap semantics, so iteration order is a deterministic function of the
/// insert/remove history.
#[derive(Clone, Debug, Default)]
pub struct Configuration {
    particles: IndexMap<ParticleId, Point>,
    next_id: u64,
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.particles == other.particles
    }
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points<I: IntoIterator<Item = Point>>(points: I) -> Self {
        let mut eta = Self::new();
        for p in points {
            eta.insert(p);
        }
        eta
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// The id the next [`insert`](Self::insert) will assign.
    pub fn next_id(&self) -> ParticleId {
        ParticleId(self.next_id)
    }

    pub fn insert(&mut self, point: Point) -> ParticleId {
        let id = ParticleId(self.next_id);
        self.next_id += 1;
        self.particles.insert(id, point);
        id
    }

    /// Inserts under a caller-chosen id. Used when two configurations share an id space.
    pub fn insert_with_id(&mut self, id: ParticleId, point: Point) -> Result<()> {
        if self.particles.contains_key(&id) {
            return Err(Error::InvalidParameter(format!("particle {id} already live")));
        }
        self.next_id = self.next_id.max(id.0 + 1);
        self.particles.insert(id, point);
        Ok(())
    }

    /// Keeps the id counter at least at `next`, so ids issued elsewhere are never reissued here.
    pub fn reserve_ids_below(&mut self, next: ParticleId) {
        self.next_id = self.next_id.max(next.0);
    }

    pub fn remove(&mut self, id: ParticleId) -> Option<Point> {
        self.particles.swap_remove(&id)
    }

    pub fn get(&self, id: ParticleId) -> Option<&Point> {
        self.particles.get(&id)
    }

    pub fn contains_id(&self, id: ParticleId) -> bool {
        self.particles.contains_key(&id)
    }

    pub fn get_index(&self, index: usize) -> Option<(ParticleId, &Point)> {
        self.particles.get_index(index).map(|(id, p)| (*id, p))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParticleId, &Point)> + '_ {
        self.particles.iter().map(|(id, p)| (*id, p))
    }

    pub fn points(&self) -> impl Iterator<Item = &Point> + '_ {
        self.particles.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParticleId> + '_ {
        self.particles.keys().copied()
    }

    /// First particle sitting exactly at `x`.
    pub fn find_point(&self, x: &Point) -> Option<ParticleId> {
        self.iter().find(|(_, p)| *p == x).map(|(id, _)| id)
    }

    /// η ∩ Λ, keeping ids and the id counter.
    pub fn restrict(&self, region: &Region) -> Configuration {
        Configuration {
            particles: self
                .particles
                .iter()
                .filter(|(_, p)| region.contains(p))
                .map(|(id, p)| (*id, p.clone()))
                .collect(),
            next_id: self.next_id,
        }
    }

    /// Id-set inclusion.
    pub fn is_subset_of(&self, other: &Configuration) -> bool {
        self.particles.keys().all(|id| other.particles.contains_key(id))
    }

    pub fn count_in(&self, region: &Region) -> usize {
        restrict_count(self, region)
    }
}

/// |η ∩ Λ| under the region's (closed) membership test.
pub fn restrict_count(eta: &Configuration, region: &Region) -> usize {
    eta.points().filter(|p| region.contains(p)).count()
}

/// User-supplied region: membership, volume and a uniform sampler.
pub trait CustomRegion: Send + Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &Point) -> bool;
    fn volume(&self) -> f64;
    fn sample(&self, rng: &mut SimRng) -> Point;
    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>);
}

/// A measurable subset Λ ⊂ ℝ^d. Boxes and balls are closed.
#[derive(Clone)]
pub enum Region {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Custom(Arc<dyn CustomRegion>),
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Box { lo, hi } => f.debug_struct("Box").field("lo", lo).field("hi", hi).finish(),
            Region::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Region::Custom(r) => write!(f, "Custom(dim = {}, volume = {})", r.dim(), r.volume()),
        }
    }
}

impl Region {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParameter(format!(
                "box corners must have equal, positive dimension (got {} and {})",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("box corners must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::InvalidParameter(format!("box lo {lo:?} exceeds hi {hi:?}")));
        }
        Ok(Region::Box { lo, hi })
    }

    /// The unit cube [0, 1]^d.
    pub fn unit_cube(dim: usize) -> Self {
        Region::Box {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("ball center must be finite and non-empty".into()));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be >= 0")));
        }
        Ok(Region::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball { center, .. } => center.len(),
            Region::Custom(r) => r.dim(),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Region::Box { lo, hi } => x.dim() == lo.len()
                && x.coords().iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *l <= *v && *v <= *h),
            Region::Ball { center, radius } => {
                x.dim() == center.len()
                    && x.coords().iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                        <= radius * radius
            }
            Region::Custom(r) => r.contains(x),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| h - l).product(),
            Region::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
            Region::Custom(r) => r.volume(),
        }
    }

    /// Uniform draw from the region.
    pub fn sample(&self, rng: &mut SimRng) -> Point {
        match self {
            Region::Box { lo, hi } => Point::from_raw(
                lo.iter()
                    .zip(hi)
                    .map(|(l, h)| (l + (h - l) * rng.random::<f64>()).clamp(*l, *h))
                    .collect(),
            ),
            Region::Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = loop {
                    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > 0.0 {
                        break g.into_iter().map(|v| v / n).collect();
                    }
                };
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                let coords: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + r * u).collect();
                let p = Point::from_raw(coords);
                if self.contains(&p) {
                    p
                } else {
                    // rounding pushed the draw a hair outside the closed ball
                    Point::from_raw(center.clone())
                }
            }
            Region::Custom(r) => r.sample(rng),
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Region::Custom(r) => r.bounding_box(),
        }
    }

    /// Diameter of the bounding box; an upper bound on |x − y| for x, y ∈ Λ.
    pub fn diameter_bound(&self) -> f64 {
        match self {
            Region::Ball { radius, .. } => 2.0 * radius,
            _ => {
                let (lo, hi) = self.bounding_box();
                lo.iter().zip(&hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
            }
        }
    }

    /// Largest distance from the origin to a point of the bounding box.
    pub fn max_norm_bound(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn unit_ball_volume(d: usize) -> f64 {
    // V_d = V_{d-2} · 2π / d
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * std::f64::consts::PI / d as f64,
    }
}
