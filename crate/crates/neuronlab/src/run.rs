//! Running a registered experiment and writing its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use neuronlab_core::{TheoremReport, Trajectory};

use crate::error::{io_err, HarnessError, Result};
use crate::experiments::{Context, Outcome};
use crate::registry::{self, Entry};
use crate::settings::{parse_override, read_config, Settings};

/// Output root when `NEURONLAB_OUT` is unset.
pub const DEFAULT_OUT: &str = "out";

pub fn default_out_root() -> PathBuf {
    std::env::var_os("NEURONLAB_OUT").map_or_else(|| PathBuf::from(DEFAULT_OUT), PathBuf::from)
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    pub out_root: PathBuf,
    pub settings: Settings,
}

impl ExperimentSpec {
    /// Registry defaults for `name`.
    pub fn new(name: &str) -> Result<Self> {
        let entry = entry(name)?;
        Ok(Self {
            name: name.to_string(),
            trials: entry.trials,
            seed: 0,
            out_root: default_out_root(),
            settings: Settings::from_pairs(entry.defaults),
        })
    }

    /// Overrides one setting. `trials` and `seed` are accepted as keys too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |reason: &str| HarnessError::InvalidSetting {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.to_string(),
        };
        match key {
            "trials" => self.trials = value.parse().map_err(|_| bad("not a count"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("not an unsigned integer"))?,
            _ if self.settings.contains(key) => self.settings.insert(key, value),
            _ => {
                return Err(HarnessError::UnknownSetting {
                    experiment: self.name.clone(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    pub fn apply_config(&mut self, path: &Path) -> Result<()> {
        for (k, v) in read_config(path)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = parse_override(o.as_ref())?;
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_root.join(&self.name).join(self.seed.to_string())
    }
}

fn entry(name: &str) -> Result<&'static Entry> {
    registry::lookup(name).ok_or_else(|| HarnessError::UnknownExperiment(name.to_string()))
}

/// What a run produced, with paths relative to the run directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub settings: Vec<(String, String)>,
    pub reports: Vec<TheoremReport>,
    pub files: Vec<PathBuf>,
}

impl RunManifest {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.name);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.settings {
            let _ = writeln!(s, "setting {k} = {v}");
        }
        let passed = self.reports.iter().filter(|r| r.passed).count();
        let _ = writeln!(s, "reports = {} passed of {}", passed, self.reports.len());
        for f in &self.files {
            let _ = writeln!(s, "file {}", f.display());
        }
        s
    }
}

/// Runs the experiment, then replaces `<out_root>/<name>/<seed>/` with
/// trajectories, tables, `reports.txt` and `manifest.txt`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunManifest> {
    let entry = entry(&spec.name)?;
    if spec.trials == 0 {
        return Err(HarnessError::InvalidSetting {
            key: "trials".into(),
            value: "0".into(),
            reason: "must be at least 1".into(),
        });
    }
    let ctx = Context {
        settings: &spec.settings,
        trials: spec.trials,
        seed: spec.seed,
    };
    let outcome = (entry.runner)(&ctx)?;
    write_run(spec, &outcome)
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io_err(&path))?;
    files.push(PathBuf::from(name));
    Ok(())
}

fn write_run(spec: &ExperimentSpec, outcome: &Outcome) -> Result<RunManifest> {
    let dir = spec.run_dir();
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut files = Vec::new();
    for (k, t) in outcome.trajectories.iter().enumerate() {
        write_file(&dir, &format!("trajectory_{k}.csv"), &t.to_csv(), &mut files)?;
    }
    for (name, contents) in &outcome.tables {
        write_file(&dir, name, contents, &mut files)?;
    }
    let mut reports = String::new();
    for r in &outcome.reports {
        let _ = writeln!(reports, "{r}");
    }
    write_file(&dir, "reports.txt", &reports, &mut files)?;

    let manifest = RunManifest {
        name: spec.name.clone(),
        seed: spec.seed,
        trials: spec.trials,
        settings: spec.settings.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        reports: outcome.reports.clone(),
        files,
    };
    let tmp = dir.join("manifest.txt.tmp");
    let path = dir.join("manifest.txt");
    fs::write(&tmp, manifest.to_text()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Writes `angle_<k>.csv` (`iter,angle_rad`) and, for two-dimensional runs,
/// `path_<k>.csv` (`iter,w0,w1`) for each trajectory. Returns the new paths.
pub fn emit_plot_data(dir: &Path, trajectories: &[Trajectory]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut out = Vec::new();
    for (k, t) in trajectories.iter().enumerate() {
        let mut angle = String::from("iter,angle_rad\n");
        for e in &t.entries {
            match e.angle {
                Some(a) => {
                    let _ = writeln!(angle, "{},{a:.16e}", e.time);
                }
                None => {
                    let _ = writeln!(angle, "{},undef", e.time);
                }
            }
        }
        let p = dir.join(format!("angle_{k}.csv"));
        fs::write(&p, angle).map_err(io_err(&p))?;
        out.push(p);
        if t.entries.first().is_some_and(|e| e.w.len() == 2) {
            let mut path = String::from("iter,w0,w1\n");
            for e in &t.entries {
                let _ = writeln!(path, "{},{:.16e},{:.16e}", e.time, e.w[0], e.w[1]);
            }
            let p = dir.join(format!("path_{k}.csv"));
            fs::write(&p, path).map_err(io_err(&p))?;
            out.push(p);
        }
    }
    Ok(out)
}

/// Reads back the trajectories of a finished run.
pub fn load_trajectories(dir: &Path) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for k in 0.. {
        let p = dir.join(format!("trajectory_{k}.csv"));
        if !p.exists() {
            break;
        }
        let text = fs::read_to_string(&p).map_err(io_err(&p))?;
        out.push(Trajectory::from_csv(&text)?);
    }
    Ok(out)
}

/// Runs `fig1` with its defaults and writes the plot files next to it.
pub fn builtin_fig1(out_root: &Path, seed: u64) -> Result<(RunManifest, Vec<PathBuf>)> {
    let mut spec = ExperimentSpec::new("fig1")?;
    spec.out_root = out_root.to_path_buf();
    spec.seed = seed;
    let manifest = run_experiment(&spec)?;
    let dir = spec.run_dir();
    let plots = emit_plot_data(&dir, &load_trajectories(&dir)?)?;
    Ok((manifest, plots))
}
