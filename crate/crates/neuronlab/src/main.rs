use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use neuronlab::{emit_plot_data, run::load_trajectories, run_experiment, ExperimentSpec, RunManifest, REGISTRY};

#[derive(Parser)]
#[command(name = "neuronlab", version, about = "Single-neuron learning experiments")]
struct Cli {
    /// Output root (defaults to $NEURONLAB_OUT, then ./out)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment
    Run {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// key=value override, repeatable
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// File of key=value lines; --set and flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write angle and path CSVs for plotting
        #[arg(long)]
        plot: bool,
    },
    /// List experiments
    List,
    /// Run every experiment with its defaults
    CheckAll {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_manifest(m: &RunManifest) {
    for r in &m.reports {
        println!("{r}");
    }
    println!(
        "{} {} ({} of {} reports passed)",
        if m.passed() { "PASS" } else { "FAIL" },
        m.name,
        m.reports.iter().filter(|r| r.passed).count(),
        m.reports.len()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> neuronlab::Result<bool> {
    match cli.command {
        Command::List => {
            for e in REGISTRY {
                println!("{:<20} {}", e.name, e.summary);
            }
            Ok(true)
        }
        Command::Run {
            name,
            seed,
            trials,
            set,
            config,
            plot,
        } => {
            let mut spec = ExperimentSpec::new(&name)?;
            if let Some(out) = &cli.out {
                spec.out_root = out.clone();
            }
            if let Some(path) = &config {
                spec.apply_config(path)?;
            }
            spec.apply_overrides(&set)?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            let m = run_experiment(&spec)?;
            if plot {
                let dir = spec.run_dir();
                emit_plot_data(&dir, &load_trajectories(&dir)?)?;
            }
            print_manifest(&m);
            println!("wrote {}", spec.run_dir().display());
            Ok(m.passed())
        }
        Command::CheckAll { seed } => {
            let mut all = true;
            for e in REGISTRY {
                let mut spec = ExperimentSpec::new(e.name)?;
                spec.seed = seed;
                if let Some(out) = &cli.out {
                    spec.out_root = out.clone();
                }
                let m = run_experiment(&spec)?;
                print_manifest(&m);
                all &= m.passed();
            }
            Ok(all)
        }
    }
}
