//! Monotone coupling of two birth-and-death processes on shared noise.
//!
//! Births of both processes are proposed from the upper model's envelope b̄₂(·, η²) and
//! share one uniform u: x joins process k iff u·b̄₂(x, η²) < b_k(x, s, ηᵏ). Deaths are
//! driven by one Poisson mark stream per particle, at rate d̄ with levels uniform on
//! [0, d̄): a mark (r, v) removes the particle from process k iff v < d_k(x, r, ηᵏ).
//! Under b₁(x, η¹) ≤ b₂(x, η²) and d₁(x, η¹) ≥ d₂(x, η²) for η¹ ⊂ η², a birth in 1
//! is a birth in 2 and a death in 2 of a particle alive in 1 is a death in 1, so
//! η¹_t ⊂ η²_t at all times. Each marginal has the law of the single-process engine.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use rand_distr::Exp1;

use crate::engine::{Event, EventKind, SimOptions, Trajectory};
use crate::error::{Error, Result};
use crate::mc::substream;
use crate::model::{check_rate, exceeds, RateModel};
use crate::space::{Configuration, ParticleId, Point};
use crate::SimRng;

/// Joint state of a coupled pair; `lower` ⊂ `upper` as id sets.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub t: f64,
    pub lower: Configuration,
    pub upper: Configuration,
}

/// The two coupled paths.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledTrajectories {
    pub lower: Trajectory,
    pub upper: Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
struct Time(f64);

impl Eq for Time {}

impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct MarkStream {
    rng: SimRng,
    next: f64,
}

/// Per-particle death marks, generated lazily from a substream keyed by particle id.
struct Marks {
    key: u64,
    rate: f64,
    streams: HashMap<ParticleId, MarkStream>,
    // ties broken by id, i.e. by birth order
    queue: BinaryHeap<Reverse<(Time, ParticleId)>>,
}

impl Marks {
    fn new(key: u64, rate: f64) -> Self {
        Marks {
            key,
            rate,
            streams: HashMap::new(),
            queue: BinaryHeap::new(),
        }
    }

    fn start(&mut self, id: ParticleId, from: f64) {
        if self.rate <= 0.0 {
            return;
        }
        let mut rng = substream(self.key, id.0);
        let e: f64 = rng.sample(Exp1);
        let next = from + e / self.rate;
        self.queue.push(Reverse((Time(next), id)));
        self.streams.insert(id, MarkStream { rng, next });
    }

    fn stop(&mut self, id: ParticleId) {
        self.streams.remove(&id);
    }

    /// Earliest pending mark of a particle that still has a stream.
    fn peek(&mut self) -> Option<(f64, ParticleId)> {
        while let Some(Reverse((Time(t), id))) = self.queue.peek().copied() {
            match self.streams.get(&id) {
                Some(s) if s.next == t => return Some((t, id)),
                _ => {
                    self.queue.pop();
                }
            }
        }
        None
    }

    /// Consumes the pending mark of `id`: returns its level and schedules the next one.
    fn fire(&mut self, id: ParticleId) -> f64 {
        self.queue.pop();
        let stream = self.streams.get_mut(&id).expect("live mark stream");
        let level = stream.rng.random::<f64>() * self.rate;
        let e: f64 = stream.rng.sample(Exp1);
        stream.next += e / self.rate;
        self.queue.push(Reverse((Time(stream.next), id)));
        level
    }
}

/// Simulates model₁ from α₁ and model₂ from α₂ ⊇ α₁ on shared noise up to `horizon`.
///
/// Returns `(lower, upper)` trajectories with a shared id space. Fails with
/// [`Error::MonotonicityViolation`] the first time a visited state pair breaks
/// b₁ ≤ b₂ or d₁ ≥ d₂.
pub fn simulate_coupled<M1, M2>(
    lower_model: &M1,
    upper_model: &M2,
    alpha_lower: &Configuration,
    alpha_upper: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<CoupledTrajectories>
where
    M1: RateModel + ?Sized,
    M2: RateModel + ?Sized,
{
    coupled_with(
        lower_model,
        upper_model,
        alpha_lower,
        alpha_upper,
        horizon,
        substream(seed, 0),
        &SimOptions::default(),
    )
}

pub fn coupled_with<M1, M2>(
    lower_model: &M1,
    upper_model: &M2,
    alpha_lower: &Configuration,
    alpha_upper: &Configuration,
    horizon: f64,
    mut rng: SimRng,
    opts: &SimOptions,
) -> Result<CoupledTrajectories>
where
    M1: RateModel + ?Sized,
    M2: RateModel + ?Sized,
{
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be finite and >= 0")));
    }
    for (id, x) in alpha_lower.iter() {
        if alpha_upper.get(id) != Some(x) {
            return Err(Error::InvalidParameter(format!(
                "initial configurations are not nested: particle {id} of the lower process is missing above"
            )));
        }
    }
    let death_env = check_rate("death sup", lower_model.death_sup().max(upper_model.death_sup()), 0.0)?;

    let mut state = CoupledState {
        t: 0.0,
        lower: alpha_lower.clone(),
        upper: alpha_upper.clone(),
    };
    let shared_next = state.lower.next_id().max(state.upper.next_id());
    state.lower.reserve_ids_below(shared_next);
    state.upper.reserve_ids_below(shared_next);

    let mut marks = Marks::new(rng.random(), death_env);
    for id in state.upper.ids() {
        marks.start(id, 0.0);
    }

    let mut lower_events = Vec::new();
    let mut upper_events = Vec::new();
    let mut count = 0u64;

    loop {
        let t = state.t;
        let birth_env = check_rate("birth sup mass", upper_model.birth_sup_mass(&state.upper), t)?;
        let next_birth = if birth_env > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / birth_env
        } else {
            f64::INFINITY
        };
        let next_mark = marks.peek();
        let mark_time = next_mark.map_or(f64::INFINITY, |(s, _)| s);
        let s = next_birth.min(mark_time);
        if s > horizon {
            break;
        }
        count += 1;
        if count > opts.max_events {
            return Err(Error::CircuitBreaker {
                events: count,
                time: s,
                population: state.upper.len(),
            });
        }
        state.t = s;

        if next_birth <= mark_time {
            let x = upper_model.sample_birth_sup(&state.upper, &mut rng);
            let bound = check_rate("birth sup density", upper_model.birth_sup_density(&x, &state.upper), s)?;
            let b2 = check_rate("birth density", upper_model.birth_density(&x, s, &state.upper), s)?;
            let b1 = check_rate("birth density", lower_model.birth_density(&x, s, &state.lower), s)?;
            if exceeds(b2, bound) {
                return Err(Error::EnvelopeViolation {
                    what: "upper birth density",
                    value: b2,
                    bound,
                    time: s,
                    particle: None,
                    point: x.coords().to_vec(),
                    population: state.upper.len(),
                });
            }
            if exceeds(b1, b2) {
                return Err(violation(&state, "birth density", b1, b2, &x));
            }
            let u = rng.random::<f64>() * bound;
            if u < b2 {
                let id = state.upper.insert(x.clone());
                state.lower.reserve_ids_below(state.upper.next_id());
                marks.start(id, s);
                if u < b1 {
                    state.lower.insert_with_id(id, x.clone())?;
                    lower_events.push(birth(s, id, x.clone()));
                }
                upper_events.push(birth(s, id, x));
            }
        } else {
            let (_, id) = next_mark.expect("mark pending");
            let level = marks.fire(id);
            let point = state.upper.get(id).expect("marked particle is live").clone();
            let d2 = check_rate("death rate", upper_model.death_rate(id, s, &state.upper), s)?;
            let in_lower = state.lower.contains_id(id);
            let d1 = if in_lower {
                check_rate("death rate", lower_model.death_rate(id, s, &state.lower), s)?
            } else {
                0.0
            };
            for (d, what) in [(d1, "lower death rate"), (d2, "upper death rate")] {
                if exceeds(d, death_env) {
                    return Err(Error::EnvelopeViolation {
                        what,
                        value: d,
                        bound: death_env,
                        time: s,
                        particle: Some(id),
                        point: point.coords().to_vec(),
                        population: state.upper.len(),
                    });
                }
            }
            if in_lower && exceeds(d2, d1) {
                return Err(violation(&state, "death rate (lower must be at least upper)", d1, d2, &point));
            }
            if in_lower && level < d1 {
                state.lower.remove(id);
                lower_events.push(death(s, id, point.clone()));
            }
            if level < d2 {
                state.upper.remove(id);
                marks.stop(id);
                upper_events.push(death(s, id, point));
            }
            if state.lower.contains_id(id) && !state.upper.contains_id(id) {
                return Err(Error::InvalidTrajectory(format!(
                    "inclusion broken at t = {s}: particle {id} alive only in the lower process"
                )));
            }
        }
    }

    Ok(CoupledTrajectories {
        lower: Trajectory {
            initial: alpha_lower.clone(),
            events: lower_events,
            horizon,
        },
        upper: Trajectory {
            initial: alpha_upper.clone(),
            events: upper_events,
            horizon,
        },
    })
}

fn birth(time: f64, particle: ParticleId, point: Point) -> Event {
    Event {
        time,
        kind: EventKind::Birth,
        particle,
        point,
    }
}

fn death(time: f64, particle: ParticleId, point: Point) -> Event {
    Event {
        time,
        kind: EventKind::Death,
        particle,
        point,
    }
}

fn violation(state: &CoupledState, what: &'static str, lower: f64, upper: f64, x: &Point) -> Error {
    Error::MonotonicityViolation {
        what,
        lower,
        upper,
        time: state.t,
        point: x.coords().to_vec(),
        lower_population: state.lower.len(),
        upper_population: state.upper.len(),
    }
}

/// Post-hoc audit of a coupled pair: number of event times at which the lower id set is not
/// contained in the upper one, plus violations of the birth/death implications.
pub fn inclusion_violations(pair: &CoupledTrajectories) -> Result<usize> {
    let mut times: Vec<f64> = pair
        .lower
        .events
        .iter()
        .chain(&pair.upper.events)
        .map(|e| e.time)
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut lower = pair.lower.initial.clone();
    let mut upper = pair.upper.initial.clone();
    let (mut i, mut j) = (0, 0);
    let mut bad = usize::from(!lower.is_subset_of(&upper));
    for t in times {
        let lower_now: Vec<&Event> = pair.lower.events[i..].iter().take_while(|e| e.time == t).collect();
        let upper_now: Vec<&Event> = pair.upper.events[j..].iter().take_while(|e| e.time == t).collect();
        for e in &lower_now {
            if e.kind == EventKind::Birth
                && !upper_now.iter().any(|u| u.kind == EventKind::Birth && u.particle == e.particle)
            {
                bad += 1;
            }
        }
        for u in &upper_now {
            if u.kind == EventKind::Death
                && lower.contains_id(u.particle)
                && !lower_now.iter().any(|e| e.kind == EventKind::Death && e.particle == u.particle)
            {
                bad += 1;
            }
        }
        for e in &lower_now {
            crate::engine::apply_event(&mut lower, e)?;
        }
        for e in &upper_now {
            crate::engine::apply_event(&mut upper, e)?;
        }
        i += lower_now.len();
        j += upper_now.len();
        if !lower.is_subset_of(&upper) {
            bad += 1;
        }
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;
    use crate::space::Region;

    #[test]
    fn diagonal_coupling_gives_identical_paths() {
        let model = LinearModel::new(Region::unit_cube(2), 0.3, 0.9, 0.6).unwrap();
        let alpha = Configuration::from_points([Point::from([0.2, 0.2]), Point::from([0.8, 0.3])]);
        let pair = simulate_coupled(&model, &model, &alpha, &alpha, 4.0, 11).unwrap();
        assert_eq!(pair.lower, pair.upper);
        assert!(!pair.lower.events.is_empty());
        assert_eq!(inclusion_violations(&pair).unwrap(), 0);
    }

    #[test]
    fn rejects_non_nested_start() {
        let model = LinearModel::yule(1, 1.0).unwrap();
        let lower = Configuration::from_points([Point::from([0.5])]);
        assert!(simulate_coupled(&model, &model, &lower, &Configuration::new(), 1.0, 0).is_err());
    }

    #[test]
    fn detects_reversed_death_order() {
        // lower dies slower than upper: d1 < d2 on the shared particle
        let slow = LinearModel::new(Region::unit_cube(1), 0.0, 0.0, 0.1).unwrap();
        let fast = LinearModel::new(Region::unit_cube(1), 0.0, 0.0, 1.0).unwrap();
        let alpha = Configuration::from_points([Point::from([0.5])]);
        let err = simulate_coupled(&slow, &fast, &alpha, &alpha, 50.0, 2).unwrap_err();
        assert!(matches!(err, Error::MonotonicityViolation { .. }), "{err}");
    }

    #[test]
    fn detects_reversed_birth_order() {
        let more = LinearModel::new(Region::unit_cube(1), 2.0, 0.0, 0.0).unwrap();
        let less = LinearModel::new(Region::unit_cube(1), 1.0, 0.0, 0.0).unwrap();
        let err = simulate_coupled(&more, &less, &Configuration::new(), &Configuration::new(), 50.0, 2).unwrap_err();
        assert!(matches!(err, Error::MonotonicityViolation { .. }), "{err}");
    }

    #[test]
    fn audit_flags_broken_pairs() {
        let alpha = Configuration::from_points([Point::from([0.5])]);
        let id = alpha.ids().next().unwrap();
        let upper = Trajectory {
            initial: alpha.clone(),
            events: vec![death(1.0, id, Point::from([0.5]))],
            horizon: 2.0,
        };
        let lower = Trajectory {
            initial: alpha,
            events: vec![],
            horizon: 2.0,
        };
        let pair = CoupledTrajectories { lower, upper };
        assert!(inclusion_violations(&pair).unwrap() >= 1);
    }
}
