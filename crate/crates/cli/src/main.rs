use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use superconv::harness::{
    compare, range_test, run_limited_data_sweep, train, Comparison, ExperimentConfig, SweepReport, DEFAULT_TRIALS,
};
use superconv::Error;

/// Environment variable that redirects every output file into one
/// directory, keeping file names.
const OUTPUT_DIR_ENV: &str = "SUPERCONV_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "superconv", version, about = "Cyclical learning-rate experiments on small dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one config and log every iteration.
    Train {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// LR range test from the config's [range_test] section.
    RangeTest {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run two configs over several seeds and report the accuracy gap.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the config's schedule with its [sweep.baseline] at shrinking
    /// per-class training sizes.
    SweepLimitedData {
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train with the learning-rate estimator switched on.
    EstimateLr {
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "validation" => 2,
        "consistency" => 3,
        "format" => 4,
        "insufficient-data" => 5,
        "numeric" => 6,
        "divergence" => 7,
        _ => 8,
    }
}

fn output_path(flag: Option<PathBuf>, configured: Option<&Path>, default_name: String) -> PathBuf {
    let path = flag
        .or_else(|| configured.map(Path::to_path_buf))
        .unwrap_or_else(|| Path::new("runs").join(default_name));
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir).join(path.file_name().unwrap_or(path.as_os_str())),
        None => path,
    }
}

fn create(path: &Path) -> Result<fs::File, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes the JSON summary next to the CSV and echoes it on stdout.
fn emit_summary<T: Serialize>(csv_path: &Path, summary: &T) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(summary).expect("summaries serialize");
    let path = csv_path.with_extension("json");
    fs::write(&path, format!("{text}\n")).map_err(|e| Error::io(&path, e))?;
    println!("{text}");
    Ok(())
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::from_file(path)
}

fn run_train(config: &Path, output: Option<PathBuf>, seed: Option<u64>, force_estimator: bool) -> Result<(), Error> {
    let mut cfg = load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let suffix = if force_estimator { "-estimate" } else { "" };
    if force_estimator {
        cfg.estimator.enabled = true;
    }
    let path = output_path(output, cfg.output.as_deref(), format!("{}{suffix}.csv", cfg.name));
    let log = train(&cfg)?;
    log.write_csv(create(&path)?)?;
    emit_summary(&path, &log.summary)?;
    if log.summary.diverged {
        let last = log.records.last();
        return Err(Error::Diverged {
            iteration: last.map_or(0, |r| r.iteration),
            loss: last.map_or(f64::NAN, |r| r.train_loss),
        });
    }
    Ok(())
}

fn write_comparison_rows<W: Write>(w: &mut csv::Writer<W>, per_class: Option<usize>, c: &Comparison) -> Result<(), Error> {
    for arm in [&c.a, &c.b] {
        for t in &arm.trials {
            let mut row = Vec::with_capacity(6);
            if let Some(p) = per_class {
                row.push(p.to_string());
            }
            row.extend([
                arm.name.clone(),
                t.seed.to_string(),
                format!("{:?}", t.final_test_accuracy),
                format!("{:?}", t.best_test_accuracy),
                t.diverged.to_string(),
            ]);
            w.write_record(&row)?;
        }
    }
    Ok(())
}

const TRIAL_COLUMNS: [&str; 5] = ["arm", "seed", "final_test_accuracy", "best_test_accuracy", "diverged"];

fn run_compare(a: &Path, b: &Path, trials: usize, output: Option<PathBuf>) -> Result<(), Error> {
    let ca = load(a)?;
    let cb = load(b)?;
    let path = output_path(output, None, format!("{}-vs-{}.csv", ca.name, cb.name));
    let report = compare(&ca, &cb, trials)?;
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(TRIAL_COLUMNS)?;
    write_comparison_rows(&mut w, None, &report)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    emit_summary(&path, &report)
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    sizes: Vec<usize>,
    gaps: Vec<Option<f64>>,
    report: &'a SweepReport,
}

fn run_sweep(config: &Path, sizes: Vec<usize>, trials: Option<usize>, output: Option<PathBuf>) -> Result<(), Error> {
    let cfg = load(config)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Validation("config has no [sweep] section".into()))?;
    let sizes = if sizes.is_empty() { sweep.sizes.clone() } else { sizes };
    let trials = trials.or(sweep.trials).unwrap_or(DEFAULT_TRIALS);
    let path = output_path(output, cfg.output.as_deref(), format!("{}-sweep.csv", cfg.name));
    let report = run_limited_data_sweep(&cfg, &sizes, trials)?;
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(std::iter::once("per_class").chain(TRIAL_COLUMNS))?;
    for p in &report.points {
        write_comparison_rows(&mut w, Some(p.per_class), &p.comparison)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    emit_summary(
        &path,
        &SweepSummary {
            sizes,
            gaps: report.gaps(),
            report: &report,
        },
    )
}

fn run_range_test(config: &Path, output: Option<PathBuf>) -> Result<(), Error> {
    let cfg = load(config)?;
    let path = output_path(output, cfg.output.as_deref(), format!("{}-range.csv", cfg.name));
    let outcome = range_test(&cfg)?;
    outcome.report.write_csv(create(&path)?)?;
    emit_summary(&path, &outcome.summary(&cfg))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { config, output, seed } => run_train(&config, output, seed, false),
        Command::EstimateLr { config, output } => run_train(&config, output, None, true),
        Command::RangeTest { config, output } => run_range_test(&config, output),
        Command::Compare {
            config_a,
            config_b,
            trials,
            output,
        } => run_compare(&config_a, &config_b, trials, output),
        Command::SweepLimitedData {
            config,
            sizes,
            trials,
            output,
        } => run_sweep(&config, sizes, trials, output),
    }
}

#[derive(Serialize)]
struct ErrorReport {
    category: &'static str,
    message: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport {
                category: e.category(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::json!({ "error": report }));
            ExitCode::from(exit_code(&e))
        }
    }
}
