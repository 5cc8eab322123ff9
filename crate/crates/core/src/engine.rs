//! Exact event-driven simulation of a single trajectory.
//!
//! Two samplers produce the next jump of η:
//!
//! * the direct method for time-homogeneous models: wait an Exp((B + D)(η)) time, then
//!   birth with probability B/(B + D), otherwise the death of x with probability d(x, η)/(B + D);
//! * thinning for time-dependent rates: candidates arrive at the constant envelope rate
//!   B̄(η) + |η|·d̄ and are accepted with probability b/b̄ (births) or d/d̄ (deaths).
//!
//! Both have the same law when rates do not depend on time. The state is piecewise
//! constant between events and the path is right-continuous.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::mc::substream;
use crate::model::{check_rate, exceeds, RateModel};
use crate::space::{Configuration, ParticleId, Point};
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Birth,
    Death,
}

/// One jump: a birth at `point` under a fresh id, or the death of a live particle.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub particle: ParticleId,
    pub point: Point,
}

/// Outcome of asking a sampler for the next jump.
#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Event(Event),
    /// All rates vanish; nothing will ever happen again.
    Absorbed,
    /// The next jump would fall after the horizon.
    Horizon,
}

/// Mutable state of one trajectory.
#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub eta: Configuration,
    pub rng: SimRng,
    scratch: Vec<f64>,
}

impl SimState {
    pub fn new(eta: Configuration, rng: SimRng) -> Self {
        SimState {
            t: 0.0,
            eta,
            rng,
            scratch: Vec::new(),
        }
    }

    /// Advances to the event time and applies the jump.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        apply_event(&mut self.eta, event)?;
        self.t = event.time;
        Ok(())
    }
}

pub(crate) fn apply_event(eta: &mut Configuration, event: &Event) -> Result<()> {
    match event.kind {
        EventKind::Birth => {
            if event.particle < eta.next_id() {
                return Err(Error::InvalidTrajectory(format!(
                    "birth at t = {} reuses id {}",
                    event.time, event.particle
                )));
            }
            eta.insert_with_id(event.particle, event.point.clone())
        }
        EventKind::Death => eta
            .remove(event.particle)
            .map(|_| ())
            .ok_or_else(|| Error::InvalidTrajectory(format!("death at t = {} of dead particle {}", event.time, event.particle))),
    }
}

fn exp_wait(rng: &mut SimRng, rate: f64) -> f64 {
    let e: f64 = rng.sample(Exp1);
    e / rate
}

/// Direct-method sampler for time-homogeneous models. Does not modify `state`.
pub fn next_event_homogeneous<M: RateModel + ?Sized>(model: &M, state: &mut SimState, horizon: f64) -> Result<Step> {
    let t = state.t;
    let birth = check_rate("birth mass", model.birth_mass(t, &state.eta), t)?;
    state.scratch.clear();
    let mut deaths = 0.0;
    for id in state.eta.ids() {
        let d = check_rate("death rate", model.death_rate(id, t, &state.eta), t)?;
        deaths += d;
        state.scratch.push(d);
    }
    let total = birth + deaths;
    if total <= 0.0 {
        return Ok(Step::Absorbed);
    }
    let time = t + exp_wait(&mut state.rng, total);
    if time > horizon {
        return Ok(Step::Horizon);
    }
    let u = state.rng.random::<f64>() * total;
    if u < birth {
        let point = model.sample_birth(t, &state.eta, &mut state.rng);
        return Ok(Step::Event(Event {
            time,
            kind: EventKind::Birth,
            particle: state.eta.next_id(),
            point,
        }));
    }
    // linear scan; rounding can leave u past the last positive rate
    let mut acc = birth;
    let mut chosen = None;
    for (i, d) in state.scratch.iter().enumerate() {
        if *d > 0.0 {
            chosen = Some(i);
            acc += d;
            if u < acc {
                break;
            }
        }
    }
    let index = chosen.expect("positive total death rate");
    let (particle, point) = state.eta.get_index(index).expect("index in range");
    Ok(Step::Event(Event {
        time,
        kind: EventKind::Death,
        particle,
        point: point.clone(),
    }))
}

/// Thinning sampler: candidates from the envelope B̄(η) + |η|·d̄, accepted with the rate
/// ratio at the candidate time. Does not modify `state` apart from its random stream.
///
/// Fails with [`Error::EnvelopeViolation`] if a rate exceeds its declared bound.
pub fn next_event_inhomogeneous<M: RateModel + ?Sized>(
    model: &M,
    state: &mut SimState,
    horizon: f64,
) -> Result<Step> {
    let eta = &state.eta;
    let birth_env = check_rate("birth sup mass", model.birth_sup_mass(eta), state.t)?;
    let death_env = check_rate("death sup", model.death_sup(), state.t)?;
    let n = eta.len();
    let envelope = birth_env + n as f64 * death_env;
    if envelope <= 0.0 {
        return Ok(Step::Absorbed);
    }
    let mut s = state.t;
    loop {
        s += exp_wait(&mut state.rng, envelope);
        if s > horizon {
            return Ok(Step::Horizon);
        }
        if state.rng.random::<f64>() * envelope < birth_env {
            let x = model.sample_birth_sup(eta, &mut state.rng);
            let bound = check_rate("birth sup density", model.birth_sup_density(&x, eta), s)?;
            let b = check_rate("birth density", model.birth_density(&x, s, eta), s)?;
            if exceeds(b, bound) {
                return Err(Error::EnvelopeViolation {
                    what: "birth density",
                    value: b,
                    bound,
                    time: s,
                    particle: None,
                    point: x.coords().to_vec(),
                    population: n,
                });
            }
            if state.rng.random::<f64>() * bound < b {
                return Ok(Step::Event(Event {
                    time: s,
                    kind: EventKind::Birth,
                    particle: eta.next_id(),
                    point: x,
                }));
            }
        } else {
            let (id, x) = eta.get_index(state.rng.random_range(0..n)).expect("index in range");
            let d = check_rate("death rate", model.death_rate(id, s, eta), s)?;
            if exceeds(d, death_env) {
                return Err(Error::EnvelopeViolation {
                    what: "death rate",
                    value: d,
                    bound: death_env,
                    time: s,
                    particle: Some(id),
                    point: x.coords().to_vec(),
                    population: n,
                });
            }
            if state.rng.random::<f64>() * death_env < d {
                return Ok(Step::Event(Event {
                    time: s,
                    kind: EventKind::Death,
                    particle: id,
                    point: x.clone(),
                }));
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Sampler {
    /// Direct method for time-homogeneous models, thinning otherwise.
    #[default]
    Auto,
    Direct,
    Thinning,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    /// Circuit breaker on the number of events in one trajectory.
    pub max_events: u64,
    pub sampler: Sampler,
}

pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_events: DEFAULT_MAX_EVENTS,
            sampler: Sampler::Auto,
        }
    }
}

/// Step-by-step driver over one trajectory, for callers that stop early.
pub struct Simulator<'m, M: ?Sized> {
    model: &'m M,
    state: SimState,
    horizon: f64,
    thinning: bool,
    max_events: u64,
    events: u64,
    done: bool,
}

impl<'m, M: RateModel + ?Sized> Simulator<'m, M> {
    pub fn new(model: &'m M, alpha: Configuration, horizon: f64, rng: SimRng, opts: &SimOptions) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!("horizon {horizon} must be finite and >= 0")));
        }
        if let Some(p) = alpha.points().find(|p| p.dim() != model.dim()) {
            return Err(Error::InvalidParameter(format!(
                "initial point {:?} has dimension {}, model has {}",
                p.coords(),
                p.dim(),
                model.dim()
            )));
        }
        let thinning = match opts.sampler {
            Sampler::Auto => !model.is_time_homogeneous(),
            Sampler::Direct => {
                if !model.is_time_homogeneous() {
                    return Err(Error::InvalidParameter(
                        "the direct sampler needs a time-homogeneous model".into(),
                    ));
                }
                false
            }
            Sampler::Thinning => true,
        };
        Ok(Simulator {
            model,
            state: SimState::new(alpha, rng),
            horizon,
            thinning,
            max_events: opts.max_events,
            events: 0,
            done: false,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn configuration(&self) -> &Configuration {
        &self.state.eta
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Draws and applies the next event. After `Absorbed` or `Horizon` every call repeats it.
    pub fn step(&mut self) -> Result<Step> {
        if self.done {
            return Ok(Step::Horizon);
        }
        let step = if self.thinning {
            next_event_inhomogeneous(self.model, &mut self.state, self.horizon)?
        } else {
            next_event_homogeneous(self.model, &mut self.state, self.horizon)?
        };
        match &step {
            Step::Event(ev) => {
                self.events += 1;
                if self.events > self.max_events {
                    return Err(Error::CircuitBreaker {
                        events: self.events,
                        time: ev.time,
                        population: self.state.eta.len(),
                    });
                }
                self.state.apply(ev)?;
            }
            Step::Absorbed | Step::Horizon => self.done = true,
        }
        Ok(step)
    }
}

/// Simulates on [0, `horizon`] from `alpha` using the given random stream.
pub fn simulate_with<M: RateModel + ?Sized>(
    model: &M,
    alpha: &Configuration,
    horizon: f64,
    rng: SimRng,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let mut sim = Simulator::new(model, alpha.clone(), horizon, rng, opts)?;
    let mut events = Vec::new();
    while let Step::Event(ev) = sim.step()? {
        events.push(ev);
    }
    Ok(Trajectory {
        initial: alpha.clone(),
        events,
        horizon,
    })
}

/// Simulates on [0, `horizon`]; deterministic in (model, α, horizon, seed).
pub fn simulate<M: RateModel + ?Sized>(model: &M, alpha: &Configuration, horizon: f64, seed: u64) -> Result<Trajectory> {
    simulate_with(model, alpha, horizon, substream(seed, 0), &SimOptions::default())
}

/// Simulates the pure-birth majorant η̄ (birth intensity b̄(·, η̄), no deaths) and, on the
/// same proposals, the true process η ⊂ η̄. Returns `(η, η̄)`.
///
/// A proposal x from b̄(·, η̄) joins η̄ unconditionally and η with probability
/// b(x, s, η)/b̄(x, η̄); deaths of η are thinned from rate d̄. Requires b̄ to be monotone
/// under inclusion, which is checked on every proposal.
pub fn simulate_with_majorant<M: RateModel + ?Sized>(
    model: &M,
    alpha: &Configuration,
    horizon: f64,
    seed: u64,
) -> Result<(Trajectory, Trajectory)> {
    majorant_with(model, alpha, horizon, substream(seed, 0), &SimOptions::default())
}

pub fn majorant_with<M: RateModel + ?Sized>(
    model: &M,
    alpha: &Configuration,
    horizon: f64,
    mut rng: SimRng,
    opts: &SimOptions,
) -> Result<(Trajectory, Trajectory)> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} must be finite and >= 0")));
    }
    let mut eta = alpha.clone();
    let mut bar = alpha.clone();
    let mut true_events = Vec::new();
    let mut bar_events = Vec::new();
    let death_env = check_rate("death sup", model.death_sup(), 0.0)?;
    let mut t = 0.0;
    let mut count = 0u64;
    loop {
        let birth_env = check_rate("birth sup mass", model.birth_sup_mass(&bar), t)?;
        let envelope = birth_env + eta.len() as f64 * death_env;
        if envelope <= 0.0 {
            break;
        }
        t += exp_wait(&mut rng, envelope);
        if t > horizon {
            break;
        }
        if rng.random::<f64>() * envelope < birth_env {
            let x = model.sample_birth_sup(&bar, &mut rng);
            let bound = check_rate("birth sup density", model.birth_sup_density(&x, &bar), t)?;
            let b = check_rate("birth density", model.birth_density(&x, t, &eta), t)?;
            if exceeds(b, bound) {
                return Err(Error::EnvelopeViolation {
                    what: "birth density against the majorant",
                    value: b,
                    bound,
                    time: t,
                    particle: None,
                    point: x.coords().to_vec(),
                    population: bar.len(),
                });
            }
            let accept = rng.random::<f64>() * bound < b;
            let id = bar.insert(x.clone());
            eta.reserve_ids_below(bar.next_id());
            if accept {
                eta.insert_with_id(id, x.clone())?;
                true_events.push(Event {
                    time: t,
                    kind: EventKind::Birth,
                    particle: id,
                    point: x.clone(),
                });
            }
            bar_events.push(Event {
                time: t,
                kind: EventKind::Birth,
                particle: id,
                point: x,
            });
        } else {
            let (id, x) = eta.get_index(rng.random_range(0..eta.len())).expect("index in range");
            let d = check_rate("death rate", model.death_rate(id, t, &eta), t)?;
            if exceeds(d, death_env) {
                return Err(Error::EnvelopeViolation {
                    what: "death rate",
                    value: d,
                    bound: death_env,
                    time: t,
                    particle: Some(id),
                    point: x.coords().to_vec(),
                    population: eta.len(),
                });
            }
            if rng.random::<f64>() * death_env < d {
                let point = x.clone();
                eta.remove(id);
                true_events.push(Event {
                    time: t,
                    kind: EventKind::Death,
                    particle: id,
                    point,
                });
            }
        }
        count += 1;
        if count > opts.max_events {
            return Err(Error::CircuitBreaker {
                events: count,
                time: t,
                population: bar.len(),
            });
        }
    }
    Ok((
        Trajectory {
            initial: alpha.clone(),
            events: true_events,
            horizon,
        },
        Trajectory {
            initial: alpha.clone(),
            events: bar_events,
            horizon,
        },
    ))
}

/// E|Y_t| = z₀·e^{λt} for a Yule process with per-capita rate λ.
pub fn yule_mean(z0: u64, lambda: f64, t: f64) -> f64 {
    z0 as f64 * (lambda * t).exp()
}

/// A realised path on [0, horizon]: the initial configuration and its jumps in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<Event>,
    pub horizon: f64,
}

impl Trajectory {
    /// Replays the events, calling `f(state_before, event)` for each, and returns the final
    /// configuration. Fails on dead-id deaths, reused birth ids, or out-of-order times.
    pub fn replay_with<F: FnMut(&Configuration, &Event)>(&self, mut f: F) -> Result<Configuration> {
        let mut eta = self.initial.clone();
        let mut last = 0.0;
        for ev in &self.events {
            if !(ev.time >= last) || ev.time > self.horizon {
                return Err(Error::InvalidTrajectory(format!(
                    "event time {} out of order (previous {last}, horizon {})",
                    ev.time, self.horizon
                )));
            }
            f(&eta, ev);
            apply_event(&mut eta, ev)?;
            last = ev.time;
        }
        Ok(eta)
    }

    pub fn validate(&self) -> Result<()> {
        self.replay_with(|_, _| ()).map(|_| ())
    }

    pub fn final_configuration(&self) -> Result<Configuration> {
        self.replay_with(|_, _| ())
    }

    /// η_t under the right-continuous convention (events at time ≤ t applied).
    pub fn configuration_at(&self, t: f64) -> Result<Configuration> {
        let mut eta = self.initial.clone();
        for ev in self.events.iter().take_while(|e| e.time <= t) {
            apply_event(&mut eta, ev)?;
        }
        Ok(eta)
    }

    /// Population after each event, starting with (0, |α|).
    pub fn population_path(&self) -> Vec<(f64, usize)> {
        let mut n = self.initial.len();
        let mut path = Vec::with_capacity(self.events.len() + 1);
        path.push((0.0, n));
        for ev in &self.events {
            match ev.kind {
                EventKind::Birth => n += 1,
                EventKind::Death => n -= 1,
            }
            path.push((ev.time, n));
        }
        path
    }

    pub fn births(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Birth).count()
    }

    pub fn deaths(&self) -> usize {
        self.events.len() - self.births()
    }
}
