use std::fs;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use sbdp_cli::{execute, Cli, ConfigErrors, Overrides};

fn run(cli: Cli) -> anyhow::Result<bool> {
    let text = fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let base = cli
        .config
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_default();
    let ov = Overrides {
        seed: cli.seed,
        runs: cli.runs,
        workers: cli.workers,
    };
    let outcome = execute(cli.command, &text, &base, &ov)?;
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("report.txt"), &outcome.report)?;
        for (name, content) in &outcome.files {
            fs::write(dir.join(name), content).with_context(|| format!("writing {name}"))?;
        }
    }
    print!("{}", outcome.report);
    if !outcome.ok {
        eprintln!("sbdp: invariant violated, see the summary above");
    }
    Ok(outcome.ok)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            if let Some(cfg) = e.downcast_ref::<ConfigErrors>() {
                eprint!("sbdp: {cfg}");
                return ExitCode::from(2);
            }
            eprintln!("sbdp: {e:#}");
            ExitCode::FAILURE
        }
    }
}
