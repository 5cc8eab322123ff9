//! Experiment configuration: a line-oriented `key = value` document with `[section]`
//! headers. Values use TOML syntax; the scanner itself tracks line numbers so that duplicate
//! keys can be reported with both locations and every violation is collected before failing.
//! The schema is documented in `docs/config.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sbdp_core::engine::DEFAULT_MAX_EVENTS;
use sbdp_core::{
    AggregationModel, AggregationParams, ComparisonModel, ContactModel, DispersalKernel,
    LinearModel, Phi, Point, RateModel, Region,
};

/// Every violation found in a configuration, in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Debug)]
struct Entry {
    value: toml::Value,
    line: usize,
}

const SCHEMA: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "preset",
            "dim",
            "a",
            "c",
            "include_self",
            "phi",
            "phi_height",
            "phi_radius",
            "phi_scale",
            "lambda",
            "kernel",
            "kernel_radius",
            "death",
            "c1",
            "c2",
        ],
    ),
    ("region", &["shape", "lo", "hi", "center", "radius"]),
    ("initial", &["points", "uniform"]),
    ("run", &["horizon", "runs", "seed", "workers", "max_events"]),
    ("simulate", &["write_trajectories"]),
    ("extinction", &["stop_count"]),
    ("couple", &["write_trajectories"]),
    ("dynkin", &["cap", "samples", "compensator_birth_scale"]),
    ("growth", &["t_min", "watch"]),
    (
        "lump",
        &["kernel", "labels", "initial_state", "n_max", "truncate"],
    ),
];

fn strip_comment(line: &str) -> &str {
    let mut in_str: Option<char> = None;
    for (i, ch) in line.char_indices() {
        match (in_str, ch) {
            (None, '#') => return &line[..i],
            (None, '"' | '\'') => in_str = Some(ch),
            (Some(q), c) if c == q => in_str = None,
            _ => {}
        }
    }
    line
}

fn bracket_balance(s: &str) -> i64 {
    let mut depth = 0;
    let mut in_str: Option<char> = None;
    for ch in s.chars() {
        match (in_str, ch) {
            (None, '[') => depth += 1,
            (None, ']') => depth -= 1,
            (None, '"' | '\'') => in_str = Some(ch),
            (Some(q), c) if c == q => in_str = None,
            _ => {}
        }
    }
    depth
}

fn scan(text: &str, errors: &mut Vec<String>) -> BTreeMap<(String, String), Entry> {
    let mut entries: BTreeMap<(String, String), Entry> = BTreeMap::new();
    let mut section: Option<String> = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    while let Some((lineno, raw)) = lines.next() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && !line.contains('=') {
            let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) else {
                errors.push(format!("line {lineno}: malformed section header `{line}`"));
                continue;
            };
            let name = name.trim();
            if SCHEMA.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                errors.push(format!("line {lineno}: unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!(
                "line {lineno}: expected `key = value`, found `{line}`"
            ));
            continue;
        };
        let key = key.trim();
        let mut value = value.trim().to_string();
        while bracket_balance(&value) > 0 {
            match lines.next() {
                Some((_, more)) => {
                    value.push(' ');
                    value.push_str(strip_comment(more).trim());
                }
                None => break,
            }
        }
        let Some(sec) = section.clone() else {
            errors.push(format!(
                "line {lineno}: key `{key}` appears outside a known section"
            ));
            continue;
        };
        let allowed = SCHEMA
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|(_, k)| *k)
            .unwrap_or(&[]);
        if !allowed.contains(&key) {
            errors.push(format!("line {lineno}: unknown key `{sec}.{key}`"));
            continue;
        }
        let parsed = match toml::Value::from_str(&value) {
            Ok(v) => v,
            Err(e) => {
                let msg = e.to_string();
                errors.push(format!(
                    "line {lineno}: cannot parse value of `{sec}.{key}` (`{value}`): {}",
                    msg.lines().next().unwrap_or("syntax error")
                ));
                continue;
            }
        };
        let k = (sec.clone(), key.to_string());
        if let Some(prev) = entries.get(&k) {
            errors.push(format!(
                "duplicate key `{sec}.{key}` at lines {} and {lineno}",
                prev.line
            ));
            continue;
        }
        entries.insert(
            k,
            Entry {
                value: parsed,
                line: lineno,
            },
        );
    }
    entries
}

/// Typed access to the scanned entries that remembers which keys were consumed.
struct Fields {
    entries: BTreeMap<(String, String), Entry>,
    taken: BTreeSet<(String, String)>,
    errors: Vec<String>,
}

impl Fields {
    fn raw(&mut self, sec: &str, key: &str) -> Option<(toml::Value, usize)> {
        let k = (sec.to_string(), key.to_string());
        let e = self.entries.get(&k)?.clone();
        self.taken.insert(k);
        Some((e.value, e.line))
    }

    fn bad(&mut self, sec: &str, key: &str, line: usize, what: &str, v: &toml::Value) {
        self.errors
            .push(format!("line {line}: `{sec}.{key}` = {v} {what}"));
    }

    fn f64(&mut self, sec: &str, key: &str) -> Option<f64> {
        let (v, line) = self.raw(sec, key)?;
        match v {
            toml::Value::Float(x) => Some(x),
            toml::Value::Integer(i) => Some(i as f64),
            other => {
                self.bad(sec, key, line, "must be a number", &other);
                None
            }
        }
    }

    fn u64(&mut self, sec: &str, key: &str) -> Option<u64> {
        let (v, line) = self.raw(sec, key)?;
        match v {
            toml::Value::Integer(i) if i >= 0 => Some(i as u64),
            other => {
                self.bad(sec, key, line, "must be a non-negative integer", &other);
                None
            }
        }
    }

    fn bool(&mut self, sec: &str, key: &str) -> Option<bool> {
        let (v, line) = self.raw(sec, key)?;
        match v {
            toml::Value::Boolean(b) => Some(b),
            other => {
                self.bad(sec, key, line, "must be true or false", &other);
                None
            }
        }
    }

    fn string(&mut self, sec: &str, key: &str) -> Option<String> {
        let (v, line) = self.raw(sec, key)?;
        match v {
            toml::Value::String(s) => Some(s),
            other => {
                self.bad(sec, key, line, "must be a string", &other);
                None
            }
        }
    }

    fn numbers(v: &toml::Value) -> Option<Vec<f64>> {
        v.as_array()?
            .iter()
            .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
            .collect()
    }

    fn vec_f64(&mut self, sec: &str, key: &str) -> Option<Vec<f64>> {
        let (v, line) = self.raw(sec, key)?;
        let out = Self::numbers(&v);
        if out.is_none() {
            self.bad(sec, key, line, "must be an array of numbers", &v);
        }
        out
    }

    fn vec_vec_f64(&mut self, sec: &str, key: &str) -> Option<Vec<Vec<f64>>> {
        let (v, line) = self.raw(sec, key)?;
        let out = v
            .as_array()
            .and_then(|rows| rows.iter().map(Self::numbers).collect());
        if out.is_none() {
            self.bad(sec, key, line, "must be an array of coordinate arrays", &v);
        }
        out
    }

    fn vec_usize(&mut self, sec: &str, key: &str) -> Option<Vec<usize>> {
        let (v, line) = self.raw(sec, key)?;
        let out = v.as_array().and_then(|xs| {
            xs.iter()
                .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                .collect()
        });
        if out.is_none() {
            self.bad(
                sec,
                key,
                line,
                "must be an array of non-negative integers",
                &v,
            );
        }
        out
    }

    fn checked<T: fmt::Display>(
        &mut self,
        sec: &str,
        key: &str,
        v: Option<T>,
        ok: impl Fn(&T) -> bool,
        what: &str,
    ) -> Option<T> {
        match v {
            Some(v) if !ok(&v) => {
                let line = self.line(sec, key).unwrap_or(0);
                self.error(format!("line {line}: `{sec}.{key}` = {v}: {what}"));
                None
            }
            v => v,
        }
    }

    fn f64_where(
        &mut self,
        sec: &str,
        key: &str,
        ok: impl Fn(&f64) -> bool,
        what: &str,
    ) -> Option<f64> {
        let v = self.f64(sec, key);
        self.checked(sec, key, v, ok, what)
    }

    fn u64_where(
        &mut self,
        sec: &str,
        key: &str,
        ok: impl Fn(&u64) -> bool,
        what: &str,
    ) -> Option<u64> {
        let v = self.u64(sec, key);
        self.checked(sec, key, v, ok, what)
    }

    fn line(&self, sec: &str, key: &str) -> Option<usize> {
        self.entries
            .get(&(sec.to_string(), key.to_string()))
            .map(|e| e.line)
    }

    fn present(&self, sec: &str, key: &str) -> bool {
        self.line(sec, key).is_some()
    }

    fn error(&mut self, msg: String) {
        self.errors.push(msg);
    }
}

/// Offspring dispersal kernel shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelShape {
    Gaussian,
    UniformBall,
}

#[derive(Clone, Debug)]
pub enum ModelSpec {
    Aggregation {
        params: AggregationParams,
        dispersal: Option<(f64, DispersalKernel)>,
    },
    Comparison {
        a: f64,
        c: f64,
    },
    PureBirth {
        c1: f64,
        c2: f64,
    },
    Contact {
        lambda: f64,
        kernel: DispersalKernel,
        death: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Points(Vec<Point>),
    /// n points uniform in Λ, drawn from a substream of the run seed.
    Uniform(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub horizon: Option<f64>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub workers: usize,
    pub max_events: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynkinSpec {
    pub cap: f64,
    pub samples: usize,
    pub compensator_birth_scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthSpec {
    pub t_min: f64,
    pub watch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LumpSpec {
    pub kernel: Option<PathBuf>,
    pub labels: Option<Vec<usize>>,
    /// Index of the starting state; the two-cell chain defaults to one particle in the first half.
    pub initial_state: Option<usize>,
    pub n_max: usize,
    /// Truncation level of the two-cell chain built when no kernel file is given.
    pub truncate: u64,
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub model: ModelSpec,
    pub region: Region,
    pub initial: InitialSpec,
    pub run: RunSpec,
    pub simulate_write_trajectories: bool,
    pub extinction_stop_count: Option<usize>,
    pub couple_write_trajectories: bool,
    pub dynkin: DynkinSpec,
    pub growth: GrowthSpec,
    pub lump: LumpSpec,
}

impl ModelSpec {
    pub fn preset(&self) -> &'static str {
        match self {
            ModelSpec::Aggregation { .. } => "aggregation",
            ModelSpec::Comparison { .. } => "comparison",
            ModelSpec::PureBirth { .. } => "pure-birth",
            ModelSpec::Contact { .. } => "contact",
        }
    }

    /// (c, a) of the comparison chain, for presets that have one.
    pub fn chain(&self) -> Option<(f64, f64)> {
        match self {
            ModelSpec::Aggregation { params, .. } => Some((params.c, params.a)),
            ModelSpec::Comparison { a, c } => Some((*c, *a)),
            _ => None,
        }
    }
}

impl ExperimentSpec {
    pub fn build_model(&self) -> sbdp_core::Result<Box<dyn RateModel>> {
        Ok(match &self.model {
            ModelSpec::Aggregation { params, dispersal } => {
                let mut m = AggregationModel::new(params.clone())?;
                if let Some((lambda, kernel)) = dispersal {
                    m = m.with_dispersal(*lambda, *kernel)?;
                }
                Box::new(m)
            }
            ModelSpec::Comparison { a, c } => {
                Box::new(ComparisonModel::new(*a, *c, self.region.clone())?)
            }
            ModelSpec::PureBirth { c1, c2 } => {
                Box::new(LinearModel::new(self.region.clone(), *c2, *c1, 0.0)?)
            }
            ModelSpec::Contact {
                lambda,
                kernel,
                death,
            } => Box::new(ContactModel::new(
                self.region.dim(),
                *lambda,
                *kernel,
                *death,
            )?),
        })
    }
}

fn parse_region(fields: &mut Fields, dim_hint: Option<usize>) -> Option<Region> {
    let shape = fields
        .string("region", "shape")
        .unwrap_or_else(|| "box".into());
    match shape.as_str() {
        "box" => {
            let lo = fields.vec_f64("region", "lo");
            let hi = fields.vec_f64("region", "hi");
            let dim = dim_hint
                .or(lo.as_ref().map(Vec::len))
                .or(hi.as_ref().map(Vec::len))
                .unwrap_or(2);
            let lo = lo.unwrap_or_else(|| vec![0.0; dim]);
            let hi = hi.unwrap_or_else(|| vec![1.0; dim]);
            if lo.len() != dim || hi.len() != dim {
                fields.error(format!(
                    "region corners have {} and {} coordinates but the model dimension is {dim}",
                    lo.len(),
                    hi.len()
                ));
                return None;
            }
            Region::new_box(lo, hi)
                .map_err(|e| fields.error(format!("region: {e}")))
                .ok()
        }
        "ball" => {
            let Some(center) = fields.vec_f64("region", "center") else {
                fields.error("region.center is required for a ball".into());
                return None;
            };
            let radius = fields.f64("region", "radius").unwrap_or(1.0);
            if let Some(d) = dim_hint.filter(|d| *d != center.len()) {
                fields.error(format!(
                    "region.center has {} coordinates but model.dim is {d}",
                    center.len()
                ));
                return None;
            }
            Region::new_ball(center, radius)
                .map_err(|e| fields.error(format!("region: {e}")))
                .ok()
        }
        other => {
            let line = fields.line("region", "shape").unwrap_or(0);
            fields.error(format!(
                "line {line}: `region.shape` = \"{other}\": expected \"box\" or \"ball\""
            ));
            None
        }
    }
}

fn parse_kernel(fields: &mut Fields) -> Option<DispersalKernel> {
    let shape = fields
        .string("model", "kernel")
        .unwrap_or_else(|| "uniform-ball".into());
    let radius = fields.f64("model", "kernel_radius").unwrap_or(0.1);
    let kernel = match shape.as_str() {
        "gaussian" => DispersalKernel::Gaussian { sigma: radius },
        "uniform-ball" => DispersalKernel::UniformBall { radius },
        other => {
            let line = fields.line("model", "kernel").unwrap_or(0);
            fields.error(format!(
                "line {line}: `model.kernel` = \"{other}\": expected \"gaussian\" or \"uniform-ball\""
            ));
            return None;
        }
    };
    kernel
        .validate()
        .map_err(|e| fields.error(format!("model.kernel_radius: {e}")))
        .ok()?;
    Some(kernel)
}

fn parse_model(fields: &mut Fields, region: &Region) -> Option<ModelSpec> {
    let Some(preset) = fields.string("model", "preset") else {
        if !fields.present("model", "preset") {
            fields.error(
                "model.preset is required (aggregation, comparison, pure-birth or contact)".into(),
            );
        }
        return None;
    };
    let rate = |x: &f64| *x >= 0.0 && x.is_finite();
    match preset.as_str() {
        "aggregation" => {
            let a = fields.f64("model", "a");
            let c = fields.f64("model", "c");
            if a.is_none() && !fields.present("model", "a") {
                fields.error("model.a is required for the aggregation preset".into());
            }
            if c.is_none() && !fields.present("model", "c") {
                fields.error("model.c is required for the aggregation preset".into());
            }
            let (a, c) = (a?, c?);
            let mut params = AggregationParams::new(a, c, region.clone());
            if let Some(b) = fields.bool("model", "include_self") {
                params.include_self = b;
            }
            let phi = fields
                .string("model", "phi")
                .unwrap_or_else(|| "constant".into());
            let height = fields.f64("model", "phi_height");
            params.phi = match phi.as_str() {
                "constant" => Phi::Constant(height.unwrap_or(a.ln())),
                "step" => Phi::Step {
                    height: height.unwrap_or(a.ln()),
                    radius: fields
                        .f64("model", "phi_radius")
                        .unwrap_or(region.diameter_bound()),
                },
                "gaussian" => Phi::Gaussian {
                    height: height.or_else(|| {
                        fields.error(
                            "model.phi_height is required for the gaussian interaction".into(),
                        );
                        None
                    })?,
                    scale: fields.f64("model", "phi_scale").unwrap_or(1.0),
                },
                other => {
                    let line = fields.line("model", "phi").unwrap_or(0);
                    fields.error(format!(
                        "line {line}: `model.phi` = \"{other}\": expected \"constant\", \"step\" or \"gaussian\""
                    ));
                    return None;
                }
            };
            if let Err(e) = params.validate() {
                fields.error(format!(
                    "aggregation model: {}",
                    strip_prefix(&e.to_string())
                ));
                return None;
            }
            let lambda = fields.f64_where("model", "lambda", rate, "must be >= 0");
            let dispersal = match lambda {
                Some(l) if l > 0.0 => Some((l, parse_kernel(fields)?)),
                _ => None,
            };
            Some(ModelSpec::Aggregation { params, dispersal })
        }
        "comparison" => {
            let a = fields.f64("model", "a");
            let c = fields.f64("model", "c");
            match (a, c) {
                (Some(a), Some(c)) => match ComparisonModel::new(a, c, region.clone()) {
                    Ok(_) => Some(ModelSpec::Comparison { a, c }),
                    Err(e) => {
                        fields.error(format!(
                            "comparison model: {}",
                            strip_prefix(&e.to_string())
                        ));
                        None
                    }
                },
                _ => {
                    fields
                        .error("model.a and model.c are required for the comparison preset".into());
                    None
                }
            }
        }
        "pure-birth" => {
            let c1 = fields.f64_where("model", "c1", rate, "must be >= 0");
            let c2 = fields.f64_where("model", "c2", rate, "must be >= 0");
            if !fields.present("model", "c1") {
                fields.error("model.c1 is required for the pure-birth preset".into());
            }
            Some(ModelSpec::PureBirth {
                c1: c1?,
                c2: c2.unwrap_or(0.0),
            })
        }
        "contact" => {
            let lambda = fields.f64_where("model", "lambda", rate, "must be >= 0");
            if !fields.present("model", "lambda") {
                fields.error("model.lambda is required for the contact preset".into());
            }
            let death = fields.f64_where("model", "death", rate, "must be >= 0");
            let kernel = parse_kernel(fields);
            Some(ModelSpec::Contact {
                lambda: lambda?,
                kernel: kernel?,
                death: death.unwrap_or(1.0),
            })
        }
        other => {
            let line = fields.line("model", "preset").unwrap_or(0);
            fields.error(format!(
                "line {line}: `model.preset` = \"{other}\": expected aggregation, comparison, pure-birth or contact"
            ));
            None
        }
    }
}

fn strip_prefix(msg: &str) -> &str {
    msg.strip_prefix("invalid parameter: ").unwrap_or(msg)
}

/// Parses and validates a configuration. Relative paths inside it resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ExperimentSpec, ConfigErrors> {
    let mut errors = Vec::new();
    let entries = scan(text, &mut errors);
    let mut fields = Fields {
        entries,
        taken: BTreeSet::new(),
        errors,
    };

    let dim = fields
        .u64_where("model", "dim", |d| *d >= 1, "must be >= 1")
        .map(|d| d as usize);
    let region = parse_region(&mut fields, dim);
    let model = region.as_ref().and_then(|r| parse_model(&mut fields, r));

    let initial = match (
        fields.present("initial", "points"),
        fields.present("initial", "uniform"),
    ) {
        (true, true) => {
            fields.error("set either initial.points or initial.uniform, not both".into());
            fields.raw("initial", "points");
            fields.raw("initial", "uniform");
            None
        }
        (true, false) => fields.vec_vec_f64("initial", "points").and_then(|pts| {
            let d = region.as_ref().map_or(2, Region::dim);
            let mut out = Vec::with_capacity(pts.len());
            for (i, p) in pts.into_iter().enumerate() {
                if p.len() != d {
                    fields.error(format!(
                        "initial.points[{i}] has {} coordinates, expected {d}",
                        p.len()
                    ));
                    return None;
                }
                match Point::new(p) {
                    Ok(p) => out.push(p),
                    Err(e) => {
                        fields.error(format!("initial.points[{i}]: {e}"));
                        return None;
                    }
                }
            }
            Some(InitialSpec::Points(out))
        }),
        (false, true) => fields
            .u64("initial", "uniform")
            .map(|n| InitialSpec::Uniform(n as usize)),
        (false, false) => Some(InitialSpec::Points(Vec::new())),
    };

    let horizon = fields.f64_where(
        "run",
        "horizon",
        |h| *h >= 0.0 && h.is_finite(),
        "must be finite and >= 0",
    );
    let runs = fields.u64_where("run", "runs", |r| *r >= 1, "must be >= 1");
    let seed = fields.u64("run", "seed");
    let workers = fields
        .u64_where("run", "workers", |w| *w >= 1, "must be >= 1")
        .unwrap_or(1) as usize;
    let max_events = fields
        .u64_where("run", "max_events", |m| *m >= 1, "must be >= 1")
        .unwrap_or(DEFAULT_MAX_EVENTS);

    let simulate_write_trajectories = fields
        .bool("simulate", "write_trajectories")
        .unwrap_or(true);
    let extinction_stop_count = fields
        .u64_where("extinction", "stop_count", |s| *s >= 1, "must be >= 1")
        .map(|s| s as usize);
    let couple_write_trajectories = fields.bool("couple", "write_trajectories").unwrap_or(true);

    let dynkin = DynkinSpec {
        cap: fields
            .f64_where("dynkin", "cap", |c| *c > 0.0, "must be > 0")
            .unwrap_or(1000.0),
        samples: fields
            .u64_where("dynkin", "samples", |s| *s >= 1, "must be >= 1")
            .unwrap_or(1) as usize,
        compensator_birth_scale: fields
            .f64_where(
                "dynkin",
                "compensator_birth_scale",
                |s| s.is_finite(),
                "must be finite",
            )
            .unwrap_or(1.0),
    };
    let growth = GrowthSpec {
        t_min: fields
            .f64_where("growth", "t_min", |t| *t >= 0.0, "must be >= 0")
            .unwrap_or(1.0),
        watch: fields
            .u64_where("growth", "watch", |w| *w >= 1, "must be >= 1")
            .unwrap_or(20) as usize,
    };
    let lump = LumpSpec {
        kernel: fields.string("lump", "kernel").map(|p| base_dir.join(p)),
        labels: fields.vec_usize("lump", "labels"),
        initial_state: fields.u64("lump", "initial_state").map(|s| s as usize),
        n_max: fields.u64("lump", "n_max").unwrap_or(20) as usize,
        truncate: fields
            .u64_where("lump", "truncate", |t| *t >= 1, "must be >= 1")
            .unwrap_or(40),
    };

    let untaken: Vec<((String, String), usize)> = fields
        .entries
        .iter()
        .filter(|(k, _)| !fields.taken.contains(*k))
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    let preset = model.as_ref().map_or("the selected", ModelSpec::preset);
    for ((sec, key), line) in untaken {
        fields.error(format!(
            "line {line}: `{sec}.{key}` does not apply to the {preset} preset"
        ));
    }

    if !fields.errors.is_empty() {
        return Err(ConfigErrors(fields.errors));
    }
    Ok(ExperimentSpec {
        model: model.expect("no errors"),
        region: region.expect("no errors"),
        initial: initial.expect("no errors"),
        run: RunSpec {
            horizon,
            runs,
            seed,
            workers,
            max_events,
        },
        simulate_write_trajectories,
        extinction_stop_count,
        couple_write_trajectories,
        dynkin,
        growth,
        lump,
    })
}
