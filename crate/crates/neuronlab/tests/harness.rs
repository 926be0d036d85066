use std::fs;
use std::path::Path;
use std::process::Command;

use neuronlab::{
    emit_plot_data, names, run::load_trajectories, run_experiment, ExperimentSpec, HarnessError,
};

fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn small(name: &str, out: &Path, sets: &[&str]) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(name).unwrap();
    spec.out_root = out.to_path_buf();
    spec.apply_overrides(sets).unwrap();
    spec
}

#[test]
fn registry_has_the_twelve_experiments() {
    let mut n = names();
    n.sort();
    assert_eq!(
        n,
        vec![
            "fig1",
            "lem51_init_prob",
            "lem61_angle",
            "lem62_norm_region",
            "lemB1_pie_slice",
            "sec32_variance",
            "thm31_failure",
            "thm33_strict_rate",
            "thm42_correlation",
            "thm53_gd_rate",
            "thm53_sgd",
            "thm63_flow_rate",
        ]
    );
}

#[test]
fn unknown_names_and_keys_are_rejected() {
    assert!(matches!(ExperimentSpec::new("fig2"), Err(HarnessError::UnknownExperiment(_))));
    let mut spec = ExperimentSpec::new("fig1").unwrap();
    assert!(matches!(spec.set("learning_rate", "1"), Err(HarnessError::UnknownSetting { .. })));
    assert!(matches!(spec.set("trials", "many"), Err(HarnessError::InvalidSetting { .. })));
}

#[test]
fn misspelled_activation_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small("thm42_correlation", dir.path(), &["act=rleu", "trials=1"]);
    let err = run_experiment(&spec).unwrap_err();
    assert!(err.to_string().contains("rleu"), "{err}");
    assert!(!spec.run_dir().exists());
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ndim = 3\nsamples=1000\ntrials = 2\n").unwrap();
    let mut spec = ExperimentSpec::new("lem62_norm_region").unwrap();
    spec.apply_config(&cfg).unwrap();
    spec.apply_overrides(&["samples=2000"]).unwrap();
    assert_eq!(spec.settings.raw("dim").unwrap(), "3");
    assert_eq!(spec.settings.raw("samples").unwrap(), "2000");
    assert_eq!(spec.trials, 2);

    fs::write(&cfg, "dim\n").unwrap();
    assert!(matches!(spec.apply_config(&cfg), Err(HarnessError::Config { line: 1, .. })));
}

#[test]
fn runs_are_reproducible_and_relocatable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sets = ["trials=3", "steps=40", "seed=5"];
    let ma = run_experiment(&small("thm53_gd_rate", a.path(), &sets)).unwrap();
    let mb = run_experiment(&small("thm53_gd_rate", b.path(), &sets)).unwrap();
    assert_eq!(ma, mb);
    assert!(ma.passed());
    let ta = tree(a.path());
    assert_eq!(ta, tree(b.path()));
    let manifest = ta.iter().find(|(p, _)| p.ends_with("manifest.txt")).unwrap();
    let text = String::from_utf8(manifest.1.clone()).unwrap();
    assert!(!text.contains(&a.path().display().to_string()));
    assert!(text.contains("file trajectory_2.csv"));

    let other = run_experiment(&small("thm53_gd_rate", b.path(), &["trials=3", "steps=40", "seed=6"])).unwrap();
    assert_ne!(other.reports, ma.reports);
}

#[test]
fn rerun_replaces_the_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small("thm53_gd_rate", dir.path(), &["trials=3", "steps=10"]);
    run_experiment(&spec).unwrap();
    let spec = small("thm53_gd_rate", dir.path(), &["trials=1", "steps=10"]);
    let m = run_experiment(&spec).unwrap();
    assert!(!spec.run_dir().join("trajectory_2.csv").exists());
    assert_eq!(m.files.len(), 2);
}

#[test]
fn small_fig1_writes_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small("fig1", dir.path(), &["horizon=60", "samples=2000", "grid=5", "stride=1"]);
    let m = run_experiment(&spec).unwrap();
    assert_eq!(m.reports.len(), 6);
    let run_dir = spec.run_dir();
    let grid = fs::read_to_string(run_dir.join("loss_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 26);
    assert!(grid.starts_with("w0,w1,loss\n"));

    let trajs = load_trajectories(&run_dir).unwrap();
    assert_eq!(trajs.len(), 3);
    assert_eq!(trajs[0].len(), 61);
    let plots = emit_plot_data(&run_dir, &trajs).unwrap();
    assert_eq!(plots.len(), 6);
    let angle = fs::read_to_string(run_dir.join("angle_2.csv")).unwrap();
    assert!(angle.starts_with("iter,angle_rad\n0,3.14159"));
    let path = fs::read_to_string(run_dir.join("path_0.csv")).unwrap();
    assert!(path.starts_with("iter,w0,w1\n0,-1.0000000000000000e0,1.0000000000000000e0\n"));
}

#[test]
fn every_experiment_runs_with_tiny_settings() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[(&str, &[&str])] = &[
        ("thm31_failure", &["dim=8", "horizon=50", "trials=4", "save_trajectories=1"]),
        ("thm33_strict_rate", &["atoms=200", "steps=20", "trials=2"]),
        ("thm42_correlation", &["samples=20000", "trials=2"]),
        ("lemB1_pie_slice", &["alphas=1", "deltas=pi/2", "directions=8", "radial_nodes=16", "angular_nodes=32"]),
        ("lem51_init_prob", &["dims=5", "draws=2000"]),
        ("thm53_gd_rate", &["steps=20", "trials=2"]),
        ("thm53_sgd", &["eta=0.05", "max_iterations=200", "trials=2"]),
        ("lem61_angle", &["t_max=2", "trials=2"]),
        ("lem62_norm_region", &["samples=20000", "trials=2"]),
        ("thm63_flow_rate", &["t_max=2", "trials=2"]),
        ("sec32_variance", &["dims=3,4", "targets=10", "samples=5000"]),
        ("fig1", &["trials=1", "horizon=20", "samples=1000", "grid=0"]),
    ];
    assert_eq!(cases.len(), names().len());
    for (name, sets) in cases {
        let spec = small(name, dir.path(), sets);
        let m = run_experiment(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!m.reports.is_empty(), "{name}");
        assert!(spec.run_dir().join("manifest.txt").exists());
        assert!(spec.run_dir().join("reports.txt").exists());
    }
}

#[test]
fn builtin_fig1_defaults_are_pinned() {
    let spec = ExperimentSpec::new("fig1").unwrap();
    assert_eq!(spec.trials, 3);
    assert_eq!(spec.settings.raw("inits").unwrap(), "-1,1;-1,0.5;-1,0");
    assert_eq!(spec.settings.raw("target_dist").unwrap(), "0.01");
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neuronlab"))
}

#[test]
fn cli_list_and_errors() {
    let out = cli().arg("list").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 12);

    let out = cli().args(["run", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown experiment"));

    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["--out", dir.path().to_str().unwrap(), "run", "thm42_correlation", "--set", "act=rleu"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_run_writes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli()
        .args(["--out", dir.path().to_str().unwrap(), "run", "thm53_gd_rate", "--seed", "3", "--trials", "2"])
        .args(["--set", "steps=30"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("PASS thm53_gd_rate (2 of 2 reports passed)"));
    assert!(dir.path().join("thm53_gd_rate/3/trajectory_1.csv").exists());

    let out = cli()
        .args(["--out", dir.path().to_str().unwrap(), "run", "lem51_init_prob", "--set", "dims=20"])
        .args(["--set", "draws=20000"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
