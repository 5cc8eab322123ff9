//! Plain-text trajectory and kernel files.
//!
//! Trajectory lines are `time kind id x1 .. xd pop pop_in_region` with kind `B` or `D`.
//! Lines starting with `#` are comments, except `#! horizon T` and `#! init id x1 .. xd`,
//! which carry the horizon and the initial configuration.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};
use sbdp_core::{
    Configuration, Event, EventKind, FiniteKernel, ParticleId, Point, Region, Trajectory,
};

/// Shortest representation that parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn push_coords(out: &mut String, p: &Point) {
    for c in p.coords() {
        out.push(' ');
        out.push_str(&fmt_f64(*c));
    }
}

/// Serialises a trajectory; `header` lines are emitted as comments.
pub fn write_trajectory(traj: &Trajectory, region: &Region, header: &[String]) -> Result<String> {
    let mut out = String::new();
    for h in header {
        writeln!(out, "# {h}")?;
    }
    writeln!(out, "#! horizon {}", fmt_f64(traj.horizon))?;
    for (id, p) in traj.initial.iter() {
        write!(out, "#! init {}", id.0)?;
        push_coords(&mut out, p);
        out.push('\n');
    }
    let mut pop = traj.initial.len();
    let mut inside = traj.initial.count_in(region);
    for ev in &traj.events {
        let delta_in = region.contains(&ev.point) as usize;
        let kind = match ev.kind {
            EventKind::Birth => {
                pop += 1;
                inside += delta_in;
                'B'
            }
            EventKind::Death => {
                pop = pop
                    .checked_sub(1)
                    .ok_or_else(|| anyhow!("death at t = {} from an empty population", ev.time))?;
                inside = inside
                    .checked_sub(delta_in)
                    .ok_or_else(|| anyhow!("region count underflow at t = {}", ev.time))?;
                'D'
            }
        };
        write!(out, "{} {kind} {}", fmt_f64(ev.time), ev.particle.0)?;
        push_coords(&mut out, &ev.point);
        writeln!(out, " {pop} {inside}")?;
    }
    Ok(out)
}

fn parse_coords(fields: &[&str], lineno: usize) -> Result<Point> {
    let coords = fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .with_context(|| format!("line {lineno}: bad coordinate `{f}`"))
        })
        .collect::<Result<Vec<_>>>()?;
    Point::new(coords).map_err(|e| anyhow!("line {lineno}: {e}"))
}

/// A trajectory read back from disk, with the recorded population columns.
#[derive(Clone, Debug)]
pub struct RecordedTrajectory {
    pub trajectory: Trajectory,
    /// (population, population in region) after each event, as written.
    pub counts: Vec<(usize, usize)>,
}

pub fn read_trajectory(text: &str, dim: usize) -> Result<RecordedTrajectory> {
    let mut initial = Configuration::new();
    let mut horizon = None;
    let mut events = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix("#!") {
            let fields: Vec<&str> = meta.split_whitespace().collect();
            match fields.first() {
                Some(&"horizon") if fields.len() == 2 => {
                    horizon = Some(
                        fields[1]
                            .parse::<f64>()
                            .with_context(|| format!("line {lineno}: bad horizon"))?,
                    );
                }
                Some(&"init") if fields.len() == 2 + dim => {
                    let id: u64 = fields[1]
                        .parse()
                        .with_context(|| format!("line {lineno}: bad id"))?;
                    let p = parse_coords(&fields[2..], lineno)?;
                    initial
                        .insert_with_id(ParticleId(id), p)
                        .map_err(|e| anyhow!("line {lineno}: {e}"))?;
                }
                _ => bail!("line {lineno}: unrecognised directive `{line}`"),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 + dim {
            bail!(
                "line {lineno}: expected {} columns, found {}",
                5 + dim,
                fields.len()
            );
        }
        let time: f64 = fields[0]
            .parse()
            .with_context(|| format!("line {lineno}: bad time"))?;
        let kind = match fields[1] {
            "B" => EventKind::Birth,
            "D" => EventKind::Death,
            other => bail!("line {lineno}: event kind must be B or D, found `{other}`"),
        };
        let id: u64 = fields[2]
            .parse()
            .with_context(|| format!("line {lineno}: bad id"))?;
        let point = parse_coords(&fields[3..3 + dim], lineno)?;
        let pop: usize = fields[3 + dim]
            .parse()
            .with_context(|| format!("line {lineno}: bad population"))?;
        let inside: usize = fields[4 + dim]
            .parse()
            .with_context(|| format!("line {lineno}: bad region population"))?;
        events.push(Event {
            time,
            kind,
            particle: ParticleId(id),
            point,
        });
        counts.push((pop, inside));
    }
    let horizon = horizon.ok_or_else(|| anyhow!("missing `#! horizon` line"))?;
    Ok(RecordedTrajectory {
        trajectory: Trajectory {
            initial,
            events,
            horizon,
        },
        counts,
    })
}

/// Replays a recorded trajectory and checks every recorded count against the replay.
/// Returns the number of events checked.
pub fn validate_recorded(rec: &RecordedTrajectory, region: &Region) -> Result<usize> {
    let mut pop = rec.trajectory.initial.len();
    let mut inside = rec.trajectory.initial.count_in(region);
    let mut k = 0;
    let mut mismatch = None;
    rec.trajectory
        .replay_with(|_, ev| {
            let d_in = region.contains(&ev.point) as usize;
            match ev.kind {
                EventKind::Birth => {
                    pop += 1;
                    inside += d_in;
                }
                EventKind::Death => {
                    // a bad death is reported by the replay itself
                    pop = pop.wrapping_sub(1);
                    inside = inside.wrapping_sub(d_in);
                }
            }
            if mismatch.is_none() && rec.counts[k] != (pop, inside) {
                mismatch = Some((k, ev.time, rec.counts[k], (pop, inside)));
            }
            k += 1;
        })
        .map_err(|e| anyhow!("{e}"))?;
    if let Some((k, t, rec, replay)) = mismatch {
        bail!("event {k} at t = {t}: recorded counts {rec:?} but replay gives {replay:?}");
    }
    Ok(k)
}

pub fn write_kernel(q: &FiniteKernel) -> String {
    let mut out = format!("n={}\n", q.states());
    for row in q.rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn read_kernel(text: &str) -> Result<FiniteKernel> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| anyhow!("kernel file is empty"))?;
    let n: usize = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| anyhow!("line {hline}: expected header `n=<states>`, found `{header}`"))?;
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (lineno, line) in lines {
        let row = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .with_context(|| format!("line {lineno}: bad entry `{v}`"))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != n {
            bail!("line {lineno}: row has {} entries, expected {n}", row.len());
        }
        data.extend(row);
        rows += 1;
    }
    if rows != n {
        bail!("kernel declares n={n} but has {rows} rows");
    }
    FiniteKernel::new(n, data).map_err(|e| anyhow!("{e}"))
}
