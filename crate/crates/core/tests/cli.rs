//! End-to-end runs of the command line front end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ceasefire::cli::{self, Config};
use ceasefire::langevin_core::{self as lc, TwoModeParams};
use tempfile::TempDir;

const SMALL: &str = r#"
[two_mode]
kappa_m = 19.0
g = 110.0
h = 110.0

[sweep]
omega_max = 100.0
omega_points = 21
g_grid = [20.0, 110.0]
ratio_grid = [10.0, 20.0, 40.0]
c_grid = [0.0, 0.5, 1.0, 2.0]
mismatch_ratios = [0.99, 1.0, 1.01]
"#;

fn ceasefire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceasefire"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, command: &str, config: &str) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    ceasefire(&[
        command,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

/// Data rows of a CSV table as numbers, skipping the `#` header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn two_mode_zero_row_is_the_library_value() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "two-mode", SMALL);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = dir.path().join("out/visibility.csv");
    let header = fs::read_to_string(&table).unwrap().lines().next().unwrap().to_string();
    assert!(header.starts_with("# omega:kappa_l,alpha_cf:1"), "{header}");
    let zero = rows(&table).into_iter().find(|r| r[0] == 0.0).unwrap();
    let p = TwoModeParams::new(19.0, 110.0, 110.0).unwrap();
    let want = lc::alpha_ceasefire(0.0, &p).unwrap();
    assert!((zero[1] / want - 1.0).abs() < 1e-15, "{} vs {want}", zero[1]);
}

#[test]
fn critical_swap_cooperativity_gives_no_reflection() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "mismatch", SMALL);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cell = rows(&dir.path().join("out/mismatch_map.csv"))
        .into_iter()
        .find(|r| r[0] == 1.0 && r[1] == 0.0)
        .unwrap();
    assert_eq!(cell[4], 0.0);
}

#[test]
fn missing_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "two-mode", "[two_mode]\ng = 110.0\nh = 110.0\n");
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kappa_m"));
}

#[test]
fn missing_section_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), "circuit", SMALL);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("circuit"));
}

#[test]
fn past_threshold_is_a_numerical_error() {
    let dir = TempDir::new().unwrap();
    let cfg = SMALL.replace("h = 110.0", "h = 120.0");
    let o = run_in(dir.path(), "two-mode", &cfg);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.toml");
    fs::write(&cfg, SMALL).unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let o = ceasefire(&[
        "two-mode",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    for command in ["two-mode", "scan-map", "mismatch"] {
        let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
        assert!(run_in(a.path(), command, SMALL).status.success());
        assert!(run_in(b.path(), command, SMALL).status.success());
        let mut names: Vec<_> = fs::read_dir(a.path().join("out"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|n| n != "manifest.json")
            .collect();
        names.sort();
        assert!(names.len() >= 2);
        for n in names {
            let x = fs::read(a.path().join("out").join(&n)).unwrap();
            let y = fs::read(b.path().join("out").join(&n)).unwrap();
            assert!(x == y, "{command}: {n:?} differs");
        }
    }
}

#[test]
fn manifest_lists_non_empty_outputs_and_echoes_the_config() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), "scan-map", SMALL).status.success());
    let out = dir.path().join("out");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "scan-map");
    for f in m["outputs"].as_array().unwrap() {
        let path = Path::new(f["path"].as_str().unwrap());
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            out.join(path.file_name().unwrap())
        };
        assert!(fs::metadata(&path).unwrap().len() > 0, "{}", path.display());
    }
    let echoed: Config = serde_json::from_value(m["parameters"].clone()).unwrap();
    assert_eq!(echoed, cli::parse_config(SMALL).unwrap());
    assert_eq!(m["config_digest"], cli::config_digest(&echoed).unwrap());

    // every ridge row can be recomputed from the echoed parameters
    let map = ceasefire::scanrate::enhancement_map(&echoed.sweep.g_grid, &echoed.sweep.ratio_grid).unwrap();
    for (row, want) in rows(&out.join("ridge.csv")).iter().zip(&map.ridge) {
        assert_eq!(row[..3], [want.g, want.ratio_opt, want.e_opt]);
    }
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(ceasefire(&["--help"]).status.code(), Some(0));
    assert_eq!(ceasefire(&["no-such-command"]).status.code(), Some(1));
}
