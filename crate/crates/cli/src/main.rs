use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noteprobe_core::corpus::{generate_synthetic_corpus, save_corpus, SyntheticProfile};
use noteprobe_core::inference::conformance::run_conformance;
use noteprobe_core::inference::ModelEndpoint;
use noteprobe_core::perturb::{builtin, characteristic_dir};
use noteprobe_core::pipeline::{self, RunConfig, SELFTEST_NOTES};
use noteprobe_core::{Error, Execution, Result};

/// Behavioral testing of clinical outcome prediction models.
#[derive(Parser)]
#[command(name = "noteprobe", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SELFTEST_NOTES)]
        notes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON generator profile; defaults are used for missing fields.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Print a built-in characteristic spec as JSON, as a starting point
    /// for custom specs.
    DumpSpec { name: String },
    /// Write one altered dataset per test group.
    Generate(Common),
    /// Predict every altered sample.
    Predict(Common),
    /// Aggregate predictions into group means and deviations.
    Analyze(Common),
    /// Observed label prevalence per group in the unaltered corpus.
    Baseline(Common),
    /// Render heatmaps, tables and plots from an analysis.
    Report(Common),
    /// generate, predict, baseline, analyze and report in one go.
    Run(Common),
    /// Recover known injected biases of mock models on a synthetic corpus.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SELFTEST_NOTES)]
        notes: usize,
        /// Keep the artifacts here instead of a temporary directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Check a model server against the wire protocol.
    Conformance {
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        timeout_ms: Option<u64>,
        #[arg(long, env = "NOTEPROBE_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

#[derive(Args, Default)]
struct Common {
    /// JSON file with any of the options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Notes JSONL file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON array fixing the label vocabulary.
    #[arg(long)]
    vocabulary: Option<PathBuf>,
    /// Built-in characteristic: gender, age or ethnicity.
    #[arg(long)]
    characteristic: Option<String>,
    /// Characteristic spec file; overrides --characteristic.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Base URL of a model server.
    #[arg(long)]
    endpoint: Option<String>,
    /// Precomputed predictions JSONL.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Mock lexical model JSON.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Heatmap rows: the k most frequent labels.
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent requests to the model server.
    #[arg(long)]
    max_parallel: Option<usize>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Label for the group table; repeatable.
    #[arg(long = "table-label")]
    table_labels: Vec<String>,
    /// Run data-parallel stages on one thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long, env = "NOTEPROBE_TOKEN", hide_env_values = true)]
    token: Option<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let flags = RunConfig {
            input: self.input.clone(),
            vocabulary: self.vocabulary.clone(),
            characteristic: self.characteristic.clone(),
            spec: self.spec.clone(),
            endpoint: self.endpoint.clone(),
            predictions: self.predictions.clone(),
            mock: self.mock.clone(),
            out: self.out.clone(),
            top_k: self.top_k,
            seed: self.seed,
            max_parallel: self.max_parallel,
            timeout_ms: self.timeout_ms,
            table_labels: (!self.table_labels.is_empty()).then(|| self.table_labels.clone()),
        };
        Ok(match &self.config {
            Some(path) => RunConfig::load(path)?.overlay(flags),
            None => flags,
        })
    }

    fn exec(&self) -> Execution {
        execution(self.sequential)
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::default()
    }
}

fn dataset_dir(cfg: &RunConfig) -> Result<PathBuf> {
    Ok(characteristic_dir(cfg.out_dir()?, &cfg.characteristic_name()?))
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{} does not exist; run generate first",
            dir.display()
        )))
    }
}

/// Exit code 1 is reserved for a failed self-test.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth {
            out,
            notes,
            seed,
            profile,
        } => {
            let profile = match profile {
                Some(p) => {
                    let raw = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
                    serde_json::from_str(&raw).map_err(|e| Error::Parse {
                        path: p,
                        line: e.line(),
                        message: e.to_string(),
                    })?
                }
                None => SyntheticProfile::default(),
            };
            let corpus = generate_synthetic_corpus(seed, notes, &profile)?;
            save_corpus(&corpus, &out)?;
            println!("wrote {} notes to {}", corpus.len(), out.display());
        }
        Command::DumpSpec { name } => println!("{}", builtin::builtin(&name)?.to_json_pretty()),
        Command::Generate(c) => {
            let cfg = c.config()?;
            let dataset = pipeline::generate(&cfg.corpus()?, &cfg.characteristic_spec()?, cfg.out_dir()?, c.exec())?;
            println!(
                "{}: {} groups, {} notes per group, {} excluded",
                dataset.characteristic,
                dataset.groups.len(),
                dataset.cohort_size(),
                dataset.excluded.len()
            );
        }
        Command::Predict(c) => {
            let cfg = c.config()?;
            let dir = dataset_dir(&cfg)?;
            require_dir(&dir)?;
            let source = cfg.model_source(c.token.clone())?;
            let records = pipeline::predict(&dir, &source, c.exec())?;
            println!("wrote {} predictions to {}", records.len(), dir.join(pipeline::PREDICTIONS_DIR).display());
        }
        Command::Analyze(c) => {
            let cfg = c.config()?;
            let dir = dataset_dir(&cfg)?;
            require_dir(&dir)?;
            let file = pipeline::analyze(&dir)?;
            println!(
                "{}: {} groups x {} labels over {} notes",
                file.characteristic,
                file.groups.len(),
                file.labels.len(),
                file.cohort_size
            );
        }
        Command::Baseline(c) => {
            let cfg = c.config()?;
            let dir = dataset_dir(&cfg)?;
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
            let dist = pipeline::baseline(&cfg.corpus()?, &cfg.characteristic_spec()?, &dir, c.exec())?;
            for (g, n) in dist.groups.iter().zip(&dist.group_sizes) {
                println!("{g}: {n} notes");
            }
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            let dir = dataset_dir(&cfg)?;
            for path in pipeline::report(&dir, &cfg.report_options())? {
                println!("{}", path.display());
            }
        }
        Command::Run(c) => {
            let cfg = c.config()?;
            let summary = pipeline::run_full(
                &cfg.corpus()?,
                &cfg.characteristic_spec()?,
                &cfg.model_source(c.token.clone())?,
                cfg.out_dir()?,
                &cfg.report_options(),
                c.exec(),
            )?;
            println!(
                "{}: {} groups over {} notes ({} excluded) -> {}",
                summary.analysis.characteristic,
                summary.analysis.groups.len(),
                summary.analysis.cohort_size,
                summary.excluded,
                summary.dir.display()
            );
        }
        Command::Selftest {
            seed,
            notes,
            out,
            sequential,
        } => {
            let (dir, temporary) = match out {
                Some(dir) => (dir, false),
                None => (
                    std::env::temp_dir().join(format!("noteprobe-selftest-{}", std::process::id())),
                    true,
                ),
            };
            let result = pipeline::selftest(seed, notes, &dir, execution(sequential));
            if temporary {
                let _ = std::fs::remove_dir_all(&dir);
            }
            let report = result?;
            print!("{}", report.render());
            if !report.passed() {
                return Ok(1);
            }
        }
        Command::Conformance {
            endpoint,
            timeout_ms,
            token,
        } => {
            let mut ep = ModelEndpoint::new(endpoint);
            if let Some(ms) = timeout_ms {
                ep.timeout_ms = ms;
            }
            ep.bearer_token = token;
            let report = run_conformance(&ep)?;
            print!("{}", report.render());
            if !report.passed() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
