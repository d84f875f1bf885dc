use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmtab::dataset::{generate_synthetic, SynthSpec};
use swarmtab::experiment::{
    load_config_dir, load_model, parse_config, run_experiment, run_matrix, write_atomic, ExperimentError,
};

#[derive(Parser)]
#[command(name = "swarmtab", version, about = "Feature selection and tabular classification experiments")]
struct Cli {
    /// Worker threads; defaults to every available core.
    #[arg(long, env = "SWARMTAB_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate one configured pipeline and write its report and model.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `evaluation.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every `*.json` config in a directory and write a combined table.
    Matrix {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value = "matrix-out")]
        out: PathBuf,
    },
    /// Write a synthetic dataset with planted informative features as CSV.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the manifest summary of a saved model.
    Inspect {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut config = parse_config(&config)?;
            if let Some(seed) = seed {
                config.evaluation.seed = seed;
            }
            if let Some(out) = out {
                config.output_dir = out;
            }
            let report = run_experiment(&config)?;
            let m = &report.aggregate.mean;
            println!(
                "{}: accuracy {:.4} precision {:.4} recall {:.4} f1 {:.4} auc {:.4} ({:.1}s)",
                report.method, m.accuracy, m.precision, m.recall, m.f1, m.auc, report.timings.total_secs
            );
            println!("outputs in {}", config.output_dir.display());
            Ok(())
        }
        Command::Matrix { configs, out } => {
            let configs = load_config_dir(&configs)?;
            let report = run_matrix(&configs, &out)?;
            for row in &report.rows {
                match (&row.mean, &row.error) {
                    (Some(m), _) => println!("{:<24} {:<28} f1 {:.4} auc {:.4}", row.name, row.method, m.f1, m.auc),
                    (None, e) => println!("{:<24} {:<28} FAILED: {}", row.name, row.method, e.as_deref().unwrap_or("")),
                }
            }
            println!("combined table in {}", out.join("matrix.csv").display());
            match report.failures() {
                0 => Ok(()),
                failed => Err(ExperimentError::PartialFailure {
                    failed,
                    total: report.rows.len(),
                }),
            }
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", spec.display())))?;
            let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
            let (ds, planted) = generate_synthetic(&spec).map_err(|e| ExperimentError::Config(e.to_string()))?;
            let mut buf = Vec::new();
            ds.write_csv(&mut buf).map_err(|e| ExperimentError::Data(e.to_string()))?;
            write_atomic(&out, &buf).map_err(|source| ExperimentError::Io {
                path: out.display().to_string(),
                source,
            })?;
            let names = ds.feature_names();
            let planted: Vec<&str> = planted.iter().map(|&j| names[j].as_str()).collect();
            println!("wrote {} rows to {}", ds.n_rows(), out.display());
            println!("planted features: {}", planted.join(", "));
            Ok(())
        }
        Command::Inspect { model } => {
            let artifact = load_model(&model).map_err(|e| ExperimentError::Data(e.to_string()))?;
            let text = serde_json::to_string_pretty(&artifact.describe()).expect("json value");
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: cannot size thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
