use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sbdp");

const AGGREGATION: &str = r#"
[model]
preset = "aggregation"
a = 2
c = 0.4
phi = "gaussian"
phi_height = 2.0
phi_scale = 1.0

[initial]
uniform = 2

[run]
horizon = 3
runs = 40
seed = 11
"#;

const COMPARISON: &str = r#"
[model]
preset = "comparison"
a = 2
c = 1

[initial]
points = [[0.5, 0.5]]

[run]
horizon = 2
runs = 60
seed = 5

[lump]
truncate = 12
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn sbdp(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn run_into(cmd: &str, config: &Path, workers: &str, out: &Path) -> Output {
    let o = sbdp(&[cmd, "--config", config.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn every_subcommand_is_byte_identical_across_workers_and_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let agg = write(tmp.path(), "agg.toml", AGGREGATION);
    let cmp = write(tmp.path(), "cmp.toml", COMPARISON);
    for (cmd, cfg) in [
        ("simulate", &agg),
        ("extinction", &cmp),
        ("couple", &agg),
        ("lump", &cmp),
        ("dynkin", &cmp),
        ("growth", &cmp),
    ] {
        let mut seen = Vec::new();
        for (k, workers) in ["1", "8", "1"].iter().enumerate() {
            let out = tmp.path().join(format!("{cmd}_{k}"));
            let o = run_into(cmd, cfg, workers, &out);
            let contents = dir_contents(&out);
            assert_eq!(contents.iter().find(|(n, _)| n == "report.txt").unwrap().1, o.stdout);
            seen.push(contents);
        }
        assert!(seen.windows(2).all(|w| w[0] == w[1]), "{cmd} output differs between runs");
        let report = String::from_utf8(seen[0].iter().find(|(n, _)| n == "report.txt").unwrap().1.clone()).unwrap();
        assert!(report.contains("config_sha256 = "), "{report}");
        assert!(report.contains(&format!("version = {}", env!("CARGO_PKG_VERSION"))));
        assert!(!report.to_lowercase().contains("worker"));
    }
}

#[test]
fn written_trajectories_satisfy_the_format() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "agg.toml", AGGREGATION);
    let out = tmp.path().join("out");
    run_into("simulate", &cfg, "2", &out);
    let text = fs::read_to_string(out.join("trajectory_000003.txt")).unwrap();
    let rec = sbdp_cli::io::read_trajectory(&text, 2).unwrap();
    assert_eq!(rec.trajectory.initial.len(), 2);
    sbdp_cli::io::validate_recorded(&rec, &sbdp_core::Region::unit_cube(2)).unwrap();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 7, "{line}");
        assert!(cols[1] == "B" || cols[1] == "D");
    }
}

#[test]
fn seed_override_changes_output_and_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cmp.toml", COMPARISON);
    let a = sbdp(&["extinction", "--config", cfg.to_str().unwrap(), "--seed", "99", "--runs", "500"]);
    let b = sbdp(&["extinction", "--config", cfg.to_str().unwrap(), "--runs", "500"]);
    let a = String::from_utf8(a.stdout).unwrap();
    let b = String::from_utf8(b.stdout).unwrap();
    assert!(a.contains("seed = 99") && b.contains("seed = 5"));
    assert_ne!(a, b);
}

#[test]
fn config_errors_exit_with_status_2_and_list_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.toml",
        "[model]\npreset = \"aggregation\"\na = 0.5\nc = 1\n[run]\nseed = 1\nseed = 2\n",
    );
    let o = sbdp(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("a must exceed 1"), "{err}");
    assert!(err.contains("duplicate key `run.seed` at lines 6 and 7"), "{err}");
}

#[test]
fn missing_seed_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "noseed.toml", &COMPARISON.replace("seed = 5", ""));
    let o = sbdp(&["dynkin", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed is required"));
}

#[test]
fn non_lumpable_kernel_exits_nonzero_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "k.txt", "n=3\n0.5 0.25 0.25\n0.3 0.4 0.3\n0.2 0.2 0.6\n");
    let cfg = write(
        tmp.path(),
        "lump.toml",
        "[model]\npreset = \"comparison\"\na = 2\nc = 1\n[lump]\nkernel = \"k.txt\"\nlabels = [0, 1, 1]\n",
    );
    let o = sbdp(&["lump", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("lumpable = false") && report.contains("witness = 1 2"), "{report}");
}

#[test]
fn two_cell_chain_lumps_onto_the_count_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cmp.toml", COMPARISON);
    let out = tmp.path().join("out");
    let o = run_into("lump", &cfg, "1", &out);
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("lumpable = true"), "{report}");
    assert!(report.contains("max_diff_vs_count_chain = 0\n"), "{report}");
    let lumped = sbdp_cli::io::read_kernel(&fs::read_to_string(out.join("lumped_kernel.txt")).unwrap()).unwrap();
    assert_eq!(lumped.states(), 13);
}

#[test]
fn couple_refuses_presets_without_an_upper_process() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cmp.toml", COMPARISON);
    let o = sbdp(&["couple", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("aggregation"));
}
