use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tactile_cs_cli::commands::{self, Report};
use tactile_cs_cli::{CliError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "tactile-cs",
    version,
    about = "Compressed sensing and compressed learning for tactile arrays"
)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Simulate a 64x64 array over 256 mm.
    #[arg(long, global = true)]
    large: bool,

    /// Override a config field, e.g. `--set acquisition.ratios=[4]`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,

    /// Print the resolved config and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate true and sensor trajectories.
    Simulate,
    /// Generate one observation per (object, perturbation).
    Observe,
    /// Compress a frame sequence.
    Measure {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        operator: Option<String>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Reconstruct frames from a measurement file.
    Reconstruct {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// PSNR and timing over objects, operators, ratios and iteration counts.
    BenchAcquisition,
    /// Accuracy against signal size and training size.
    BenchClassification,
    /// Brute-force restricted isometry constants for small operators.
    RipReport,
    /// Approximate sparsity of true trajectories per basis.
    SparsityTable,
    /// Cross-validate and save a classifier.
    Train {
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Classify observations with a saved model.
    Classify {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        observations: Option<PathBuf>,
    },
}

fn json_str(v: &str) -> String {
    serde_json::Value::String(v.to_string()).to_string()
}

fn path_override(key: &str, p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| format!("{key}={}", json_str(&p.to_string_lossy())))
}

impl Cli {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut overrides = Vec::new();
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            overrides.push(format!("output_dir={}", json_str(&o.to_string_lossy())));
        }
        if self.large {
            overrides.push("large_array=true".into());
        }
        match &self.command {
            Command::Measure { input, operator, m } => {
                overrides.extend(path_override("measure.input", input));
                overrides.extend(operator.as_ref().map(|o| format!("measure.operator={}", json_str(o))));
                overrides.extend(m.map(|m| format!("measure.m={m}")));
            }
            Command::Reconstruct {
                input,
                truth,
                lambda,
                iterations,
            } => {
                overrides.extend(path_override("reconstruct.input", input));
                overrides.extend(path_override("reconstruct.truth", truth));
                overrides.extend(lambda.map(|l| format!("reconstruct.lambda={l}")));
                overrides.extend(iterations.map(|i| format!("reconstruct.iterations={i}")));
            }
            Command::Train { observations } => {
                overrides.extend(path_override("train.observations", observations));
            }
            Command::Classify { model, observations } => {
                overrides.extend(path_override("classify.model", model));
                overrides.extend(path_override("classify.observations", observations));
            }
            _ => {}
        }
        overrides.extend(self.overrides.iter().cloned());
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

fn run(cli: &Cli) -> Result<Option<Report>, CliError> {
    let cfg = cli.resolve()?;
    if cli.dump_config {
        println!("{}", cfg.to_json());
        return Ok(None);
    }
    let report = match cli.command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Observe => commands::observe(&cfg)?,
        Command::Measure { .. } => commands::measure(&cfg)?,
        Command::Reconstruct { .. } => commands::reconstruct(&cfg)?,
        Command::BenchAcquisition => commands::bench_acquisition(&cfg)?.0,
        Command::BenchClassification => commands::bench_classification(&cfg)?.report,
        Command::RipReport => commands::rip_report(&cfg)?.0,
        Command::SparsityTable => commands::sparsity_table(&cfg)?.0,
        Command::Train { .. } => commands::train(&cfg)?,
        Command::Classify { .. } => commands::classify(&cfg)?,
    };
    Ok(Some(report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Some(report)) => {
            let mut out = std::io::stdout().lock();
            let _ = report.lines.iter().try_for_each(|line| writeln!(out, "{line}"));
            let _ =
                report.manifest.artifacts.iter().try_for_each(|a| {
                    writeln!(out, "wrote {} ({} bytes, sha256 {})", a.path, a.bytes, &a.sha256[..16])
                });
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
