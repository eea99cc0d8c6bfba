use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

use atom_diode::{presets, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atom-diode"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn key_values(o: &Output) -> HashMap<String, String> {
    stdout(o)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("atom-diode-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// A preset with its sweep shrunk to a 2×2 grid.
fn small_sweep_config(preset: &str) -> PathBuf {
    let mut cfg = presets::by_name(preset).unwrap();
    let spec = cfg.sweep.as_mut().unwrap();
    spec.w_count = 2;
    spec.theta_count = 2;
    spec.theta_min_deg = -40.0;
    spec.theta_max_deg = 40.0;
    let path = scratch(&format!("{preset}-2x2.ini"));
    fs::write(&path, cfg.emit()).unwrap();
    path
}

const ZERO_FIELDS: &str = "\
[scheme]
kind = two-level

[mirror_ground]
peak = 0
center_um = 50
width_um = 15

[mirror_excited]
peak = 0
center_um = -50
width_um = 15

[pump]
peak = 0
center_um = 0
width_um = 15
v0_cm_s = 3
";

#[test]
fn zero_fields_transmit_everything() {
    let path = scratch("zero.ini");
    fs::write(&path, ZERO_FIELDS).unwrap();
    let o = run(&["solve", "--config", path.to_str().unwrap(), "--w", "7", "--theta", "-20"]);
    assert!(o.status.success());
    let kv = key_values(&o);
    assert_eq!(kv["P_T_1"], "1");
    assert_eq!(kv["verdict"], "other");
}

#[test]
fn fig3b_solve_examples() {
    let o = run(&["solve", "--preset", "fig3b", "--w", "-20", "--theta", "0"]);
    assert!(o.status.success());
    assert_eq!(key_values(&o)["verdict"], "full-reflection");
    let o = run(&["solve", "--preset", "fig3b", "--w", "10", "--theta", "45"]);
    assert_eq!(key_values(&o)["verdict"], "full-transmission-2");
}

#[test]
fn solve_prints_nine_significant_digits() {
    let o = run(&["solve", "--preset", "fig3b", "--w", "10", "--theta", "45"]);
    let p: String = key_values(&o)["P_T_2"].clone();
    let digits = p.trim_start_matches("0.").chars().filter(char::is_ascii_digit).count();
    assert!(digits <= 9, "{p}");
}

#[test]
fn combined_verdict_is_reported_for_quench_presets() {
    let o = run(&["solve", "--preset", "fig5", "--w", "10", "--theta", "0"]);
    assert_eq!(key_values(&o)["combined"], "diode-works");
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["solve", "--preset", "nope", "--w", "1", "--theta", "0"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--preset", "fig3b"]).status.code(), Some(1));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(
        run(&["solve", "--preset", "fig3b", "--w", "5", "--theta", "0", "--threshold", "2"]).status.code(),
        Some(1)
    );
    // grazing incidence is a numerical failure
    assert_eq!(run(&["solve", "--preset", "fig3b", "--w", "0.01", "--theta", "0"]).status.code(), Some(2));
    let bad = scratch("bad.ini");
    fs::write(&bad, "[scheme]\nkind = two-level\ncolour = red\n").unwrap();
    assert_eq!(run(&["solve", "--config", bad.to_str().unwrap(), "--w", "1", "--theta", "0"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

fn boundary_rows(preset: &str) -> Vec<Vec<String>> {
    let o = run(&["boundaries", "--preset", preset]);
    assert!(o.status.success());
    stdout(&o)
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

#[test]
fn boundaries_match_the_worked_examples() {
    let rows = boundary_rows("fig3b");
    let last = rows.last().unwrap();
    assert_eq!(last[0], "90");
    let v: f64 = last[2].parse().unwrap();
    assert!((v - 16.5).abs() < 0.05, "{v}");
    // rbound is even in the angle
    for (a, b) in rows.iter().zip(rows.iter().rev()) {
        assert_eq!(a[1], b[1]);
    }
    let rows = boundary_rows("fig7b");
    let v: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert!((v - 17.5).abs() < 0.05, "{v}");
}

#[test]
fn reduced_config_parses_and_solves() {
    let out = scratch("reduced.ini");
    let o = run(&["reduce", "--preset", "reduce-demo", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let cfg = RunConfig::parse(&text).unwrap();
    let pump = cfg.pump.unwrap();
    assert!((pump.v0_cm_s - 1.0).abs() < 1e-12);
    assert!(String::from_utf8(o.stderr).unwrap().contains("validity_ratio="));
    let o = run(&["solve", "--config", out.to_str().unwrap(), "--w", "8", "--theta", "10"]);
    assert!(o.status.success());
}

#[test]
fn reduce_rejects_zero_pump_detuning() {
    let mut cfg = presets::reduce_demo();
    cfg.pump.as_mut().unwrap().dv_cm_s = 0.0;
    let path = scratch("resonant.ini");
    fs::write(&path, cfg.emit()).unwrap();
    let o = run(&["reduce", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn small_sweep_is_fast_and_repeatable() {
    let cfg = small_sweep_config("fig3b");
    let a = scratch("a.tsv");
    let b = scratch("b.tsv");
    let start = Instant::now();
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    assert!(o.status.success());
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert!(String::from_utf8(o.stderr).unwrap().contains("4/4"));
    let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert!(o.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let diagram = atom_diode::sweep::read_diagram(&a).unwrap();
    assert_eq!(diagram.cells.len(), 4);
}

#[test]
fn every_figure_preset_sweeps() {
    for name in ["fig3a", "fig3b", "fig4a", "fig4b", "fig4c", "fig5", "fig7a", "fig7b", "fig8"] {
        let cfg = small_sweep_config(name);
        let out = scratch(&format!("{name}.tsv"));
        let o = run(&["sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(atom_diode::sweep::read_diagram(&out).unwrap().cells.len(), 4, "{name}");
    }
}

#[test]
fn sweep_threshold_flag_overrides_the_config() {
    let cfg = small_sweep_config("fig3b");
    let out = scratch("threshold.tsv");
    let o = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threshold", "0.2",
    ]);
    assert!(o.status.success());
    assert_eq!(atom_diode::sweep::read_diagram(&out).unwrap().spec.threshold, 0.2);
}

#[test]
fn sweep_fails_when_most_cells_fail() {
    let mut cfg = presets::fig3b();
    let spec = cfg.sweep.as_mut().unwrap();
    spec.w_count = 2;
    spec.theta_count = 2;
    // a step far above the phase limit makes every solve an invalid grid
    cfg.solver.step_nm = Some(1e4);
    let path = scratch("coarse.ini");
    fs::write(&path, cfg.emit()).unwrap();
    let out = scratch("coarse.tsv");
    let o = run(&["sweep", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    // the diagram is still written, with failed cells marked
    let d = atom_diode::sweep::read_diagram(&out).unwrap();
    assert!(d.cells.iter().all(|c| c.code.as_char() == 'X'));
}

#[test]
fn sweep_without_spec_is_a_usage_error() {
    let path = scratch("nosweep.ini");
    fs::write(&path, ZERO_FIELDS).unwrap();
    assert_eq!(run(&["sweep", "--config", path.to_str().unwrap()]).status.code(), Some(1));
}
