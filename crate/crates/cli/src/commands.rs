use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use sbdp_core::analytics::{
    deaths_after_reaching, estimate_extinction_mc, growth_statistic, truncated_count_chain,
    two_cell_chain, ExtinctionOptions,
};
use sbdp_core::chain::{check_lumpability, LUMP_TOL};
use sbdp_core::coupling::{coupled_with, inclusion_violations};
use sbdp_core::engine::simulate_with;
use sbdp_core::generator::DynkinOptions;
use sbdp_core::mc::mc_collect;
use sbdp_core::{
    comparison_model, dynkin_residual, lump, pushforward_equivalence, substream, AggregationModel,
    ChainParams, Configuration, CylindricalFunctional, Lumping, MCEstimate, SimOptions, Trajectory,
    VERSION,
};

use crate::config::{parse_config, ExperimentSpec, InitialSpec, ModelSpec};
use crate::io::{
    fmt_f64, read_kernel, read_trajectory, validate_recorded, write_kernel, write_trajectory,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Simulate,
    Extinction,
    Couple,
    Lump,
    Dynkin,
    Growth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Extinction => "extinction",
            Command::Couple => "couple",
            Command::Lump => "lump",
            Command::Dynkin => "dynkin",
            Command::Growth => "growth",
        }
    }
}

/// Command-line values that take precedence over the configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<u64>,
    pub workers: Option<usize>,
}

/// Result of a command: the report, extra output files, and whether every invariant held.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: String,
    pub files: Vec<(String, String)>,
    pub ok: bool,
}

struct Report {
    text: String,
}

impl Report {
    fn new(cmd: Command, config_sha: &str, seed: Option<u64>) -> Self {
        let mut text = format!(
            "# sbdp {} report\nversion = {VERSION}\nconfig_sha256 = {config_sha}\n",
            cmd.name()
        );
        match seed {
            Some(s) => writeln!(text, "seed = {s}").unwrap(),
            None => text.push_str("seed = none\n"),
        }
        Report { text }
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        writeln!(self.text, "{key} = {value}").unwrap();
    }

    fn num(&mut self, key: &str, value: f64) {
        self.kv(key, fmt_f64(value));
    }

    fn section(&mut self, name: &str) {
        writeln!(self.text, "\n[{name}]").unwrap();
    }

    fn estimate(&mut self, est: &MCEstimate) {
        self.num("estimate", est.mean);
        match est.std_error {
            Some(se) => {
                self.num("std_error", se);
                self.num("ci95_lo", est.mean - 1.96 * se);
                self.num("ci95_hi", est.mean + 1.96 * se);
            }
            None => self.kv("std_error", "undefined"),
        }
        for (k, v) in &est.extra {
            self.num(k, *v);
        }
    }
}

struct RunContext<'a> {
    spec: &'a ExperimentSpec,
    sha: String,
    seed: Option<u64>,
    runs: Option<u64>,
    workers: usize,
    opts: SimOptions,
}

impl RunContext<'_> {
    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow!("a seed is required: set run.seed or pass --seed"))
    }

    fn runs(&self, default: Option<u64>) -> Result<u64> {
        self.runs
            .or(default)
            .ok_or_else(|| anyhow!("the number of runs is required: set run.runs or pass --runs"))
    }

    fn horizon(&self) -> Result<f64> {
        self.spec
            .run
            .horizon
            .ok_or_else(|| anyhow!("run.horizon is required for this command"))
    }

    fn alpha(&self) -> Result<Configuration> {
        Ok(match &self.spec.initial {
            InitialSpec::Points(pts) => Configuration::from_points(pts.iter().cloned()),
            InitialSpec::Uniform(n) => {
                let mut rng = substream(self.seed()?, u64::MAX);
                Configuration::from_points((0..*n).map(|_| self.spec.region.sample(&mut rng)))
            }
        })
    }

    fn chain(&self) -> Result<Option<ChainParams>> {
        self.spec
            .model
            .chain()
            .map(|(c, a)| ChainParams::new(c, a))
            .transpose()
            .map_err(|e| anyhow!("{e}"))
    }

    fn report(&self, cmd: Command) -> Report {
        let mut r = Report::new(cmd, &self.sha, self.seed);
        r.kv("preset", self.spec.model.preset());
        r
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses `config_text` and runs `cmd`. Relative paths in the config resolve against `base_dir`.
pub fn execute(
    cmd: Command,
    config_text: &str,
    base_dir: &Path,
    ov: &Overrides,
) -> Result<Outcome> {
    let spec = parse_config(config_text, base_dir)?;
    let workers = ov.workers.unwrap_or(spec.run.workers);
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let ctx = RunContext {
        spec: &spec,
        sha: sha256_hex(config_text.as_bytes()),
        seed: ov.seed.or(spec.run.seed),
        runs: ov.runs.or(spec.run.runs),
        workers,
        opts: SimOptions {
            max_events: spec.run.max_events,
            ..Default::default()
        },
    };
    match cmd {
        Command::Simulate => simulate_cmd(&ctx),
        Command::Extinction => extinction_cmd(&ctx),
        Command::Couple => couple_cmd(&ctx),
        Command::Lump => lump_cmd(&ctx),
        Command::Dynkin => dynkin_cmd(&ctx),
        Command::Growth => growth_cmd(&ctx),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sbdp_core::mc::pairwise_sum(xs) / xs.len() as f64
}

/// Writes a trajectory and checks that reading it back replays to the recorded counts.
fn emit_trajectory(
    ctx: &RunContext,
    traj: &Trajectory,
    name: String,
    header: Vec<String>,
    files: &mut Vec<(String, String)>,
) -> Result<()> {
    let text = write_trajectory(traj, &ctx.spec.region, &header)?;
    let rec = read_trajectory(&text, ctx.spec.region.dim())
        .with_context(|| format!("re-reading {name}"))?;
    validate_recorded(&rec, &ctx.spec.region).with_context(|| format!("validating {name}"))?;
    files.push((name, text));
    Ok(())
}

fn traj_header(ctx: &RunContext, cmd: Command, run: u64) -> Vec<String> {
    vec![
        format!("sbdp {} trajectory", cmd.name()),
        format!("version = {VERSION}"),
        format!("config_sha256 = {}", ctx.sha),
        format!("seed = {} run = {run}", ctx.seed.unwrap_or(0)),
        "columns: time kind id coords... population population_in_region".into(),
    ]
}

fn simulate_cmd(ctx: &RunContext) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let runs = ctx.runs(Some(1))?;
    let horizon = ctx.horizon()?;
    let model = ctx.spec.build_model()?;
    let alpha = ctx.alpha()?;
    let trajs = mc_collect(runs, seed, ctx.workers, |_, rng| {
        simulate_with(&*model, &alpha, horizon, rng.clone(), &ctx.opts)
    })?;
    let mut files = Vec::new();
    let (mut births, mut deaths) = (0usize, 0usize);
    let mut finals = Vec::with_capacity(trajs.len());
    let mut inside = Vec::with_capacity(trajs.len());
    for (i, traj) in trajs.iter().enumerate() {
        let end = traj.final_configuration()?;
        births += traj.births();
        deaths += traj.deaths();
        finals.push(end.len() as f64);
        inside.push(end.count_in(&ctx.spec.region) as f64);
        if ctx.spec.simulate_write_trajectories {
            let header = traj_header(ctx, Command::Simulate, i as u64);
            emit_trajectory(
                ctx,
                traj,
                format!("trajectory_{i:06}.txt"),
                header,
                &mut files,
            )?;
        }
    }
    let mut r = ctx.report(Command::Simulate);
    r.kv("runs", runs);
    r.num("horizon", horizon);
    r.kv("initial_population", alpha.len());
    r.section("summary");
    r.kv("births", births);
    r.kv("deaths", deaths);
    r.num("mean_final_population", mean(&finals));
    r.num("mean_final_population_in_region", mean(&inside));
    r.kv(
        "extinct_in_region",
        inside.iter().filter(|n| **n == 0.0).count(),
    );
    r.kv("trajectories_validated", files.len());
    Ok(Outcome {
        report: r.text,
        files,
        ok: true,
    })
}

fn extinction_cmd(ctx: &RunContext) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let runs = ctx.runs(None)?;
    let horizon = ctx.horizon()?;
    let model = ctx.spec.build_model()?;
    let alpha = ctx.alpha()?;
    let opts = ExtinctionOptions {
        workers: ctx.workers,
        stop_count: ctx.spec.extinction_stop_count,
        chain: ctx.chain()?,
        sim: ctx.opts,
    };
    let est = estimate_extinction_mc(
        &*model,
        &alpha,
        &ctx.spec.region,
        runs,
        horizon,
        seed,
        &opts,
    )?;
    let mut r = ctx.report(Command::Extinction);
    r.kv("runs", runs);
    r.num("horizon", horizon);
    r.kv(
        "initial_population_in_region",
        alpha.count_in(&ctx.spec.region),
    );
    r.section("summary");
    r.estimate(&est);
    if let (Some(cf), Some(_)) = (est.extra("closed_form"), est.std_error) {
        if let Some(z) = est.z_score(cf) {
            r.num("z_vs_closed_form", z);
        }
    }
    Ok(Outcome {
        report: r.text,
        files: Vec::new(),
        ok: true,
    })
}

fn couple_cmd(ctx: &RunContext) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let runs = ctx.runs(None)?;
    let horizon = ctx.horizon()?;
    let ModelSpec::Aggregation { params, dispersal } = &ctx.spec.model else {
        bail!(
            "couple pairs the comparison process with the aggregation process; use preset = \"aggregation\" (got {})",
            ctx.spec.model.preset()
        );
    };
    let lower = comparison_model(params)?;
    let mut upper = AggregationModel::new(params.clone())?;
    if let Some((l, k)) = dispersal {
        upper = upper.with_dispersal(*l, *k)?;
    }
    let alpha = ctx.alpha()?;
    let pairs = mc_collect(runs, seed, ctx.workers, |_, rng| {
        coupled_with(
            &lower,
            &upper,
            &alpha,
            &alpha,
            horizon,
            rng.clone(),
            &ctx.opts,
        )
    })?;
    let region = &ctx.spec.region;
    let mut files = Vec::new();
    let mut violations = 0;
    let (mut lo, mut up) = (Vec::new(), Vec::new());
    for (i, p) in pairs.iter().enumerate() {
        violations += inclusion_violations(p)?;
        lo.push(p.lower.final_configuration()?.count_in(region) as f64);
        up.push(p.upper.final_configuration()?.count_in(region) as f64);
        if ctx.spec.couple_write_trajectories {
            let header = traj_header(ctx, Command::Couple, i as u64);
            emit_trajectory(
                ctx,
                &p.lower,
                format!("pair_{i:06}_lower.txt"),
                header.clone(),
                &mut files,
            )?;
            emit_trajectory(
                ctx,
                &p.upper,
                format!("pair_{i:06}_upper.txt"),
                header,
                &mut files,
            )?;
        }
    }
    let mut r = ctx.report(Command::Couple);
    r.kv("runs", runs);
    r.num("horizon", horizon);
    r.kv("lower", "comparison");
    r.kv("upper", "aggregation");
    r.section("summary");
    r.kv("inclusion_violations", violations);
    r.num("mean_final_lower_in_region", mean(&lo));
    r.num("mean_final_upper_in_region", mean(&up));
    r.kv("extinct_lower", lo.iter().filter(|n| **n == 0.0).count());
    r.kv("extinct_upper", up.iter().filter(|n| **n == 0.0).count());
    Ok(Outcome {
        report: r.text,
        files,
        ok: violations == 0,
    })
}

fn lump_cmd(ctx: &RunContext) -> Result<Outcome> {
    let spec = &ctx.spec.lump;
    let mut r = ctx.report(Command::Lump);
    let mut count_chain = None;
    let (q, f, start) = match &spec.kernel {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading kernel {}", path.display()))?;
            let q =
                read_kernel(&text).with_context(|| format!("parsing kernel {}", path.display()))?;
            let labels = spec
                .labels
                .clone()
                .ok_or_else(|| anyhow!("lump.labels is required when lump.kernel is given"))?;
            let f = Lumping::new(labels)?;
            r.kv("source", "kernel file");
            r.kv("kernel_sha256", sha256_hex(text.as_bytes()));
            (q, f, spec.initial_state.unwrap_or(0))
        }
        None => {
            let Some(p) = ctx.chain()? else {
                bail!("without lump.kernel the two-cell chain needs the aggregation or comparison preset");
            };
            if spec.labels.is_some() {
                bail!("lump.labels only applies together with lump.kernel");
            }
            let (q, f) = two_cell_chain(&p, spec.truncate)?;
            count_chain = Some(truncated_count_chain(&p, spec.truncate)?);
            r.kv("source", "two-cell chain");
            r.kv("truncate", spec.truncate);
            // one particle in the first half
            (q, f, spec.initial_state.unwrap_or(2))
        }
    };
    if start >= q.states() {
        bail!(
            "lump.initial_state = {start} but the kernel has {} states",
            q.states()
        );
    }
    let report = check_lumpability(&q, &f, LUMP_TOL)?;
    r.kv("states", q.states());
    r.kv("labels", f.n_labels());
    r.kv("initial_state", start);
    r.kv("steps", spec.n_max);
    r.section("summary");
    r.kv("lumpable", report.pushforward_lumpable);
    r.kv("rows_equal", report.rows_equal);
    let mut files = Vec::new();
    if let Some((s, t)) = report.witness {
        r.kv("witness", format!("{s} {t}"));
    } else {
        let mut mu0 = vec![0.0; q.states()];
        mu0[start] = 1.0;
        r.num(
            "max_tv_discrepancy",
            pushforward_equivalence(&q, &f, &mu0, spec.n_max)?,
        );
        let lumped = lump(&q, &f)?;
        if let Some(cc) = &count_chain {
            let diff = lumped
                .rows()
                .zip(cc.rows())
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            r.num("max_diff_vs_count_chain", diff);
        }
        files.push(("lumped_kernel.txt".into(), write_kernel(&lumped)));
    }
    Ok(Outcome {
        report: r.text,
        files,
        ok: report.pushforward_lumpable,
    })
}

fn dynkin_cmd(ctx: &RunContext) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let runs = ctx.runs(None)?;
    let horizon = ctx.horizon()?;
    let model = ctx.spec.build_model()?;
    let alpha = ctx.alpha()?;
    let d = &ctx.spec.dynkin;
    let f = CylindricalFunctional::capped_count(ctx.spec.region.clone(), d.cap)?;
    let opts = DynkinOptions {
        samples_per_segment: d.samples,
        compensator_birth_scale: d.compensator_birth_scale,
        workers: ctx.workers,
        sim: ctx.opts,
    };
    let est = dynkin_residual(&*model, &f, &alpha, horizon, runs, seed, &opts)?;
    let mut r = ctx.report(Command::Dynkin);
    r.kv("runs", runs);
    r.num("horizon", horizon);
    r.kv(
        "functional",
        format!("min(count in region, {})", fmt_f64(d.cap)),
    );
    r.num("compensator_birth_scale", d.compensator_birth_scale);
    r.section("summary");
    r.estimate(&est);
    if let Some(z) = est.z_score(0.0) {
        r.num("z", z);
        r.kv("within_3se", z.abs() <= 3.0);
    }
    Ok(Outcome {
        report: r.text,
        files: Vec::new(),
        ok: true,
    })
}

fn growth_cmd(ctx: &RunContext) -> Result<Outcome> {
    let seed = ctx.seed()?;
    let runs = ctx.runs(None)?;
    let horizon = ctx.horizon()?;
    let model = ctx.spec.build_model()?;
    let alpha = ctx.alpha()?;
    let g = &ctx.spec.growth;
    let region = &ctx.spec.region;
    let c = model.growth_constants().0;
    let rows = mc_collect(runs, seed, ctx.workers, |_, rng| {
        let traj = simulate_with(&*model, &alpha, horizon, rng.clone(), &ctx.opts)?;
        let stat = growth_statistic(&traj, region, c, g.t_min)?;
        let late = deaths_after_reaching(&traj, region, g.watch)?;
        let end = traj.final_configuration()?.count_in(region);
        Ok((stat, late, end))
    })?;
    let stats: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut r = ctx.report(Command::Growth);
    r.kv("runs", runs);
    r.num("horizon", horizon);
    r.num("rate", c);
    r.num("t_min", g.t_min);
    r.kv("watch", g.watch);
    r.section("summary");
    r.num("mean_growth_statistic", mean(&stats));
    r.num(
        "min_growth_statistic",
        stats.iter().copied().fold(f64::INFINITY, f64::min),
    );
    r.kv(
        "extinct_in_region",
        rows.iter().filter(|r| r.2 == 0).count(),
    );
    r.kv(
        "runs_with_deaths_after_watch",
        rows.iter().filter(|r| r.1 > 0).count(),
    );
    r.kv(
        "deaths_after_watch",
        rows.iter().map(|r| r.1).sum::<usize>(),
    );
    Ok(Outcome {
        report: r.text,
        files: Vec::new(),
        ok: true,
    })
}
