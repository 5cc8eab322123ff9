//! Closed forms and Monte Carlo estimators for the aggregation comparison chain.
//!
//! From state i ≥ 1 the comparison chain steps up with probability c/(c + a^{−i}) and down
//! otherwise; 0 is a trap. With ρ_m(s) = c^{−(m−s)} a^{−(m−s)(m+s+1)/2} the probability of
//! ever reaching s from q > s is
//!
//! c_{q,s} = Σ_{j≥q} ρ_j(s) / (1 + Σ_{j≥s+1} ρ_j(s)),
//!
//! and the extinction probability is p_q = c_{q,0}.

use rand::Rng;
use rand_distr::{Exp1, Gamma, Poisson};

use crate::chain::{self, FiniteKernel, Lumping, SeriesExtinction};
use crate::engine::{EventKind, SimOptions, Simulator, Step, Trajectory};
use crate::error::{Error, Result};
use crate::mc::{mc_collect, pairwise_sum, MCEstimate};
use crate::model::RateModel;
use crate::space::{Configuration, Region};
use crate::SimRng;

/// Parameters of the comparison chain: per-capita birth c and crowding base a.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainParams {
    pub c: f64,
    pub a: f64,
}

impl ChainParams {
    pub fn new(c: f64, a: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(c > 0.0 && c.is_finite()) {
            problems.push(format!("c must be positive (got {c})"));
        }
        if !(a > 1.0 && a.is_finite()) {
            problems.push(format!("a must exceed 1 (got {a})"));
        }
        if problems.is_empty() {
            Ok(ChainParams { c, a })
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }
}

/// (p_up, p_down) from state i ≥ 1.
pub fn chain_transition(i: u64, params: &ChainParams) -> Result<(f64, f64)> {
    if i == 0 {
        return Err(Error::InvalidParameter("state 0 is a trap; transitions start at i = 1".into()));
    }
    let down = (-(i as f64) * params.a.ln()).exp();
    let total = params.c + down;
    Ok((params.c / total, down / total))
}

/// ln ρ_m(s) for m > s.
pub fn log_rho_shifted(m: u64, s: u64, params: &ChainParams) -> f64 {
    debug_assert!(m > s);
    let k = m - s;
    // k(m + s + 1) is always even
    let pairs = ((k as u128 * (m + s + 1) as u128) / 2) as f64;
    -(k as f64) * params.c.ln() - pairs * params.a.ln()
}

/// ln ρ_j = −j ln c − j(j+1)/2 · ln a.
pub fn log_rho(j: u64, params: &ChainParams) -> f64 {
    log_rho_shifted(j, 0, params)
}

/// ρ_j = c^{−j} a^{−j(j+1)/2}; may underflow to 0, see [`log_rho`].
pub fn rho(j: u64, params: &ChainParams) -> f64 {
    log_rho(j, params).exp()
}

fn log_hitting(q: u64, s: u64, params: &ChainParams) -> f64 {
    match chain::convergent_series_hitting(|m| log_rho_shifted(m, s, params), s + 1, q) {
        SeriesExtinction::Converged { log_probability, .. } => log_probability,
        // the ρ terms are eventually super-geometric for a > 1
        other => unreachable!("series for c = {}, a = {} did not converge: {other:?}", params.c, params.a),
    }
}

/// ln p_q; 0 for q = 0.
pub fn log_extinction_probability(q: u64, params: &ChainParams) -> f64 {
    if q == 0 {
        return 0.0;
    }
    log_hitting(q, 0, params)
}

/// p_q, the probability that the chain started at q is ever trapped at 0.
pub fn extinction_probability(q: u64, params: &ChainParams) -> f64 {
    log_extinction_probability(q, params).exp()
}

/// ln c_{q,s}.
pub fn log_hitting_probability(q: u64, s: u64, params: &ChainParams) -> Result<f64> {
    if q <= s {
        return Err(Error::InvalidParameter(format!("hitting target s = {s} must lie below q = {q}")));
    }
    Ok(log_hitting(q, s, params))
}

/// c_{q,s}, the probability that the chain started at q ever visits s < q.
pub fn hitting_probability(q: u64, s: u64, params: &ChainParams) -> Result<f64> {
    log_hitting_probability(q, s, params).map(f64::exp)
}

/// Smallest m₀ from which p_m ≤ C^{−m} for every m ≥ m₀, by the ratio argument:
/// once c·a^{q+1} ≥ 2 the tail is at most 2ρ_q, and 2ρ_q ≤ C^{−q} persists as soon as the
/// exponent gap −q ln C − ln ρ_q is at least ln 2 and non-decreasing.
pub fn decay_threshold(params: &ChainParams, base: f64) -> Result<u64> {
    if !(base > 1.0 && base.is_finite()) {
        return Err(Error::InvalidParameter(format!("decay base must exceed 1 (got {base})")));
    }
    let (lc, la, lb) = (params.c.ln(), params.a.ln(), base.ln());
    let slack = 1e-12;
    for q in 1..=1_000_000u64 {
        let qf = q as f64;
        let ratio_ok = lc + (qf + 1.0) * la >= 2f64.ln() - slack;
        let gap_grows = -lb + lc + (qf + 1.0) * la >= -slack;
        let gap = -qf * lb - log_rho(q, params);
        if ratio_ok && gap_grows && gap >= 2f64.ln() * (1.0 - slack) {
            return Ok(q);
        }
    }
    Err(Error::InvalidParameter(format!("no decay threshold below 10^6 for base {base}")))
}

/// Smallest state m with p_m ≤ `level`, used as a survival cap for Monte Carlo.
pub fn extinction_cap(params: &ChainParams, level: f64) -> u64 {
    hitting_cap(params, 0, level)
}

fn hitting_cap(params: &ChainParams, s: u64, level: f64) -> u64 {
    let target = level.ln();
    let mut m = s + 1;
    while log_hitting(m, s, params) > target {
        m += 1;
    }
    m
}

/// Options for [`estimate_extinction_mc`].
#[derive(Clone, Debug)]
pub struct ExtinctionOptions {
    pub workers: usize,
    /// A run whose Λ-population reaches this count is stopped and counted as surviving.
    pub stop_count: Option<usize>,
    /// Comparison-chain parameters for the truncation-bias diagnostics.
    pub chain: Option<ChainParams>,
    pub sim: SimOptions,
}

impl Default for ExtinctionOptions {
    fn default() -> Self {
        ExtinctionOptions {
            workers: 1,
            stop_count: None,
            chain: None,
            sim: SimOptions::default(),
        }
    }
}

/// Level below which the default stop count puts the extinction probability.
pub const DEFAULT_STOP_LEVEL: f64 = 1e-12;

/// Fraction of runs in which η_t ∩ Λ becomes empty by time T.
///
/// The model must not create particles in Λ once η ∩ Λ = ∅. With `opts.chain` set the
/// estimate carries `truncation_bias`, the mean of p_{|η∩Λ|} over runs still alive when
/// stopped (the extinction mass missed by stopping), and `truncation_bias_bound`, the same
/// with every survivor at the smallest surviving count.
pub fn estimate_extinction_mc<M: RateModel + ?Sized>(
    model: &M,
    alpha: &Configuration,
    lambda: &Region,
    runs: u64,
    horizon: f64,
    seed: u64,
    opts: &ExtinctionOptions,
) -> Result<MCEstimate> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let stop = opts
        .stop_count
        .or_else(|| opts.chain.map(|p| extinction_cap(&p, DEFAULT_STOP_LEVEL) as usize))
        .unwrap_or(usize::MAX);
    let ends = mc_collect(runs, seed, opts.workers, |_, rng| {
        extinction_run(model, alpha, lambda, horizon, stop, rng.clone(), &opts.sim)
    })?;
    let extinct = ends.iter().filter(|n| **n == 0).count() as u64;
    let mut est = MCEstimate::proportion(extinct, runs).with_extra("stop_count", stop as f64);
    if let Some(p) = opts.chain {
        let missed: Vec<f64> = ends
            .iter()
            .filter(|n| **n > 0)
            .map(|&n| extinction_probability(n as u64, &p))
            .collect();
        let bias = pairwise_sum(&missed) / runs as f64;
        let bound = ends
            .iter()
            .filter(|n| **n > 0)
            .min()
            .map_or(0.0, |&n| extinction_probability(n as u64, &p) * missed.len() as f64 / runs as f64);
        est = est
            .with_extra("closed_form", extinction_probability(alpha.count_in(lambda) as u64, &p))
            .with_extra("truncation_bias", bias)
            .with_extra("truncation_bias_bound", bound);
    }
    Ok(est)
}

/// Λ-population when the run stopped: 0 on extinction.
fn extinction_run<M: RateModel + ?Sized>(
    model: &M,
    alpha: &Configuration,
    lambda: &Region,
    horizon: f64,
    stop: usize,
    rng: SimRng,
    opts: &SimOptions,
) -> Result<usize> {
    let mut n = alpha.count_in(lambda);
    if n == 0 || n >= stop {
        return Ok(n);
    }
    let mut sim = Simulator::new(model, alpha.clone(), horizon, rng, opts)?;
    while let Step::Event(ev) = sim.step()? {
        if lambda.contains(&ev.point) {
            match ev.kind {
                EventKind::Birth => n += 1,
                EventKind::Death => n -= 1,
            }
            if n == 0 || n >= stop {
                break;
            }
        }
    }
    Ok(n)
}

/// Runs the embedded comparison chain from q until it visits s (success) or reaches the cap
/// where c_{cap,s} ≤ 10⁻¹². Carries the analytic `truncation_bias` of the cap.
pub fn estimate_hitting_mc(
    params: &ChainParams,
    q: u64,
    s: u64,
    runs: u64,
    seed: u64,
    workers: usize,
) -> Result<MCEstimate> {
    if q <= s {
        return Err(Error::InvalidParameter(format!("hitting target s = {s} must lie below q = {q}")));
    }
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let cap = hitting_cap(params, s, DEFAULT_STOP_LEVEL).max(q + 1);
    let hits = mc_collect(runs, seed, workers, |_, rng| {
        let mut i = q;
        while i != s && i < cap {
            let (up, _) = chain_transition(i, params)?;
            if rng.random::<f64>() < up {
                i += 1;
            } else {
                i -= 1;
            }
        }
        Ok(i == s)
    })?;
    let successes = hits.iter().filter(|h| **h).count() as u64;
    let runs_capped = runs - successes;
    let bias = hitting_probability(cap, s, params)? * runs_capped as f64 / runs as f64;
    Ok(MCEstimate::proportion(successes, runs)
        .with_extra("closed_form", hitting_probability(q, s, params)?)
        .with_extra("cap", cap as f64)
        .with_extra("truncation_bias", bias))
}

/// Embedded chain of the comparison model coarse-grained to two equal halves of Λ, on
/// states (n₁, n₂) with n₁ + n₂ ≤ `n_max`, together with the labelling by total count.
///
/// Births land in either half with probability p_up/2. The death probability p_down is split
/// in proportion to occupancy, the larger half taking fl(p_down·L/n) and the smaller half the
/// exact remainder, so each row pushes forward to the count chain without rounding. At
/// `n_max` the birth mass stays put and 0 is absorbing. States are ordered by total count,
/// then by n₁.
pub fn two_cell_chain(params: &ChainParams, n_max: u64) -> Result<(FiniteKernel, Lumping)> {
    let n_max = n_max as usize;
    let index = |n1: usize, n2: usize| {
        let n = n1 + n2;
        n * (n + 1) / 2 + n1
    };
    let states = (n_max + 1) * (n_max + 2) / 2;
    let mut data = vec![0.0; states * states];
    let mut labels = vec![0; states];
    for n in 0..=n_max {
        for n1 in 0..=n {
            let n2 = n - n1;
            let from = index(n1, n2);
            labels[from] = n;
            let row = &mut data[from * states..(from + 1) * states];
            if n == 0 {
                row[from] = 1.0;
                continue;
            }
            let (up, down) = chain_transition(n as u64, params)?;
            if n < n_max {
                row[index(n1 + 1, n2)] += up / 2.0;
                row[index(n1, n2 + 1)] += up / 2.0;
            } else {
                row[from] += up;
            }
            let large = n1.max(n2);
            let to_large = down * (large as f64 / n as f64);
            let to_small = down - to_large;
            let (d1, d2) = if n1 >= n2 { (to_large, to_small) } else { (to_small, to_large) };
            if n1 > 0 {
                row[index(n1 - 1, n2)] += d1;
            }
            if n2 > 0 {
                row[index(n1, n2 - 1)] += d2;
            }
        }
    }
    Ok((FiniteKernel::new(states, data)?, Lumping::new(labels)?))
}

/// The comparison chain on 0..=`n_max` with the birth mass at `n_max` kept in place.
pub fn truncated_count_chain(params: &ChainParams, n_max: u64) -> Result<FiniteKernel> {
    let n = n_max as usize + 1;
    let mut data = vec![0.0; n * n];
    data[0] = 1.0;
    for i in 1..n {
        let (up, down) = chain_transition(i as u64, params)?;
        data[i * n + i - 1] = down;
        if i + 1 < n {
            data[i * n + i + 1] = up;
        } else {
            data[i * n + i] = up;
        }
    }
    FiniteKernel::new(n, data)
}

/// One path of the continuous-time count process of the comparison model in Λ:
/// birth rate c·n, death rate n·a^{−n}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountRun {
    /// Count at T; a float because fast-forwarded counts can exceed u64.
    pub final_count: f64,
    /// Time of extinction, if it happened by the horizon.
    pub extinct_at: Option<f64>,
    /// Deaths after the count first reached the `watch` level.
    pub deaths_after_watch: u64,
    /// Whether the path was advanced as a Yule process from the fast-forward level.
    pub fast_forwarded: bool,
}

/// Simulates the count process from n₀ on [0, T].
///
/// With `fast_forward = Some(L)`, once the count reaches L ≥ 1 the remaining time is drawn
/// from the pure-birth (Yule) law: N_T − n ~ NegBin(n, e^{−c(T−t)}), via a Poisson–Gamma mixture.
/// Poisson layers with mean above 10¹⁵ are replaced by their mean (relative error ≤ 10⁻⁷).
/// Deaths after that point are ignored; their probability is at most
/// Σ_{i≥L} a^{−i}/(c + a^{−i}), see [`fast_forward_error`].
pub fn simulate_count_process(
    params: &ChainParams,
    n0: u64,
    horizon: f64,
    watch: u64,
    fast_forward: Option<u64>,
    rng: &mut SimRng,
) -> Result<CountRun> {
    let mut n = n0;
    let mut t = 0.0;
    let mut watching = n >= watch;
    let mut deaths_after_watch = 0;
    let la = params.a.ln();
    loop {
        if n == 0 {
            return Ok(CountRun {
                final_count: 0.0,
                extinct_at: Some(t),
                deaths_after_watch,
                fast_forwarded: false,
            });
        }
        if let Some(level) = fast_forward {
            if n >= level.max(1) {
                let remaining = horizon - t;
                let grow = (params.c * remaining).exp_m1();
                let mut extra = 0.0;
                if grow > 0.0 {
                    let gamma = Gamma::new(n as f64, grow).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    let mean: f64 = rng.sample(gamma);
                    if mean > 1e15 {
                        extra = mean.round();
                    } else if mean > 0.0 {
                        let pois = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                        extra = rng.sample(pois);
                    }
                }
                return Ok(CountRun {
                    final_count: n as f64 + extra,
                    extinct_at: None,
                    deaths_after_watch,
                    fast_forwarded: true,
                });
            }
        }
        let nf = n as f64;
        let down = (-nf * la).exp();
        let rate = nf * (params.c + down);
        let e: f64 = rng.sample(Exp1);
        t += e / rate;
        if t > horizon {
            return Ok(CountRun {
                final_count: n as f64,
                extinct_at: None,
                deaths_after_watch,
                fast_forwarded: false,
            });
        }
        if rng.random::<f64>() * (params.c + down) < params.c {
            n += 1;
        } else {
            n -= 1;
            if watching {
                deaths_after_watch += 1;
            }
        }
        watching |= n >= watch;
    }
}

/// Σ_{i≥L} a^{−i}/(c + a^{−i}): union bound on the probability of any death once the count
/// process has reached L, whatever happens afterwards.
pub fn fast_forward_error(params: &ChainParams, level: u64) -> f64 {
    let mut sum = 0.0;
    for i in level.max(1).. {
        let (_, down) = chain_transition(i, params).expect("i >= 1");
        sum += down;
        if down < 1e-18 * sum || down == 0.0 {
            break;
        }
    }
    sum
}

/// min over t ∈ {event times in [t_min, T]} ∪ {T} of ln(|η_t ∩ Λ| ∨ 1) − c·t, with η_t the
/// state right after the event.
pub fn growth_statistic(traj: &Trajectory, lambda: &Region, c: f64, t_min: f64) -> Result<f64> {
    if !(traj.horizon > t_min) {
        return Err(Error::InvalidParameter(format!(
            "horizon {} must exceed t_min = {t_min}",
            traj.horizon
        )));
    }
    let mut n = traj.initial.count_in(lambda);
    let stat = |n: usize, t: f64| (n.max(1) as f64).ln() - c * t;
    let mut best = f64::INFINITY;
    traj.replay_with(|_, ev| {
        if lambda.contains(&ev.point) {
            match ev.kind {
                EventKind::Birth => n += 1,
                EventKind::Death => n -= 1,
            }
        }
        if ev.time >= t_min {
            best = best.min(stat(n, ev.time));
        }
    })?;
    Ok(best.min(stat(n, traj.horizon)))
}

/// Number of deaths whose point lies in Λ.
pub fn death_count(traj: &Trajectory, lambda: &Region) -> usize {
    traj.events
        .iter()
        .filter(|e| e.kind == EventKind::Death && lambda.contains(&e.point))
        .count()
}

/// Deaths in Λ after |η ∩ Λ| first reaches `level`.
pub fn deaths_after_reaching(traj: &Trajectory, lambda: &Region, level: usize) -> Result<usize> {
    let mut n = traj.initial.count_in(lambda);
    let mut reached = n >= level;
    let mut deaths = 0;
    traj.replay_with(|_, ev| {
        if lambda.contains(&ev.point) {
            match ev.kind {
                EventKind::Birth => n += 1,
                EventKind::Death => {
                    n -= 1;
                    if reached {
                        deaths += 1;
                    }
                }
            }
        }
        reached |= n >= level;
    })?;
    Ok(deaths)
}
