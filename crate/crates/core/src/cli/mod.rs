//! Command-line orchestration: every command that produces results writes
//! a fresh run directory with a manifest that is enough to replay it.

pub mod compare;
pub mod corpus;
pub mod runs;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::forecaster::{Arch, LstmForecaster, TrainConfig};
use crate::kpi::{aggregate, render_report};
use crate::scenario::{Scenario, SuiteConfig};

pub use compare::{compare_suite, execute_compare, CompareOutcome, CompareRow};
pub use corpus::{
    corpus_inputs, execute_generate, execute_train, fit, forecast_after, generate_corpus, load_corpus, CorpusConfig,
    TrainOutput, TrainReport,
};
pub use runs::{execute_run, new_run_dir, replay, report_dir, simulate, ControllerSpec, RunManifest, RunOutput};

#[derive(Debug, Parser)]
#[command(name = "ricsim", version, about = "Urban 5G cell simulator and proactive power-control agent")]
pub struct Cli {
    /// Overrides the scenario seed (and the training seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scenario TOML; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// No progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fixed-power corpus plus feed-derived context for training.
    Generate {
        #[arg(long, default_value_t = 60)]
        days: u32,
        #[arg(long)]
        event_probability: Option<f64>,
        #[arg(long)]
        rain_probability: Option<f64>,
    },
    /// Trains the load forecaster on a generated corpus.
    Train(TrainArgs),
    /// Runs one controller over the scenario.
    Run {
        /// fixed, reactive, proactive or proactive:<persona>
        #[arg(long, default_value = "proactive")]
        controller: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Runs all controllers over a randomized event-day suite.
    Compare {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 15)]
        days: usize,
        #[arg(long)]
        rain_probability: Option<f64>,
        #[arg(long)]
        mmwave_probability: Option<f64>,
        #[arg(long)]
        persona: Option<String>,
    },
    /// Re-executes a run from its manifest and checks the output bytes.
    Replay { manifest: PathBuf },
    /// Recomputes KPIs for run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
    /// Load forecast past the end of a corpus, as CSV.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        context: PathBuf,
        #[arg(long, default_value_t = 10080, allow_negative_numbers = true)]
        horizon: i64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Mock feed reports and their validation.
    Feeds {
        #[command(subcommand)]
        action: FeedsAction,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub context: PathBuf,
    /// TOML with any training hyperparameters.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    #[arg(long)]
    pub epochs_max: Option<usize>,
    #[arg(long)]
    pub sample_stride: Option<usize>,
    #[arg(long)]
    pub validation_stride: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub window: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum FeedsAction {
    /// Every source's raw reports for each scenario tick, as JSON lines.
    Dump {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Validates a JSON-lines report file.
    Validate { reports: PathBuf },
}

fn load_scenario(cli: &Cli) -> Result<Scenario> {
    let mut s = match &cli.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = cli.seed {
        s.sim.rng_seed = seed;
    }
    s.validate()?;
    Ok(s)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::file(path, e))
}

fn sink(output: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).map_err(|e| Error::file(p, e))?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Parses `args` (program name first) and executes the command.
pub fn run_cli<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(());
        }
        Err(e) => return Err(Error::InvalidConfig(e.to_string())),
    };
    let command_line: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    execute(&cli, command_line)
}

pub fn execute(cli: &Cli, command_line: Vec<String>) -> Result<()> {
    let progress = |msg: &str| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::Generate {
            days,
            event_probability,
            rain_probability,
        } => {
            let scenario = load_scenario(cli)?;
            let mut cfg = CorpusConfig::default();
            cfg.event_probability = event_probability.unwrap_or(cfg.event_probability);
            cfg.rain_probability = rain_probability.unwrap_or(cfg.rain_probability);
            progress(&format!("generating {days} days"));
            let dir = execute_generate(&cli.out, &scenario, *days, &cfg, command_line)?;
            writeln!(stdout, "{}", dir.display())?;
        }
        Command::Train(a) => {
            let mut cfg: TrainConfig = match &a.train_config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
                    toml::from_str(&text).map_err(|e| Error::ScenarioParse(e.to_string()))?
                }
                None => TrainConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            cfg.epochs_max = a.epochs_max.unwrap_or(cfg.epochs_max);
            cfg.sample_stride = a.sample_stride.unwrap_or(cfg.sample_stride);
            cfg.validation_stride = a.validation_stride.unwrap_or(cfg.validation_stride);
            cfg.early_stopping_patience = a.patience.unwrap_or(cfg.early_stopping_patience);
            let mut arch = Arch::default();
            arch.window = a.window.unwrap_or(arch.window);
            progress("training");
            let o = execute_train(&cli.out, &a.corpus, &a.context, arch, &cfg, command_line)?;
            writeln!(stdout, "{}", o.dir.display())?;
            writeln!(stdout, "{}", serde_json::to_string(&o.report)?)?;
        }
        Command::Run { controller, model } => {
            let scenario = load_scenario(cli)?;
            let spec = ControllerSpec::parse(controller, scenario.persona.name)?;
            let bytes = match model {
                Some(p) => Some(read(p)?),
                None => None,
            };
            progress(&format!("running {}", spec.label()));
            let o = execute_run(&cli.out, &scenario, spec, bytes.as_deref(), command_line)?;
            writeln!(stdout, "{}", o.dir.display())?;
            writeln!(stdout, "{}", serde_json::to_string(&o.kpi)?)?;
        }
        Command::Compare {
            model,
            days,
            rain_probability,
            mmwave_probability,
            persona,
        } => {
            let scenario = load_scenario(cli)?;
            let mut cfg = SuiteConfig {
                days: *days,
                ..Default::default()
            };
            cfg.rain_probability = rain_probability.unwrap_or(cfg.rain_probability);
            cfg.mmwave_probability = mmwave_probability.unwrap_or(cfg.mmwave_probability);
            let persona = match persona {
                Some(p) => p.parse()?,
                None => scenario.persona.name,
            };
            let bytes = read(model)?;
            let seed = scenario.sim.rng_seed;
            let (dir, outcome) =
                execute_compare(&cli.out, &scenario, seed, &cfg, &bytes, persona, command_line, progress)?;
            write!(stdout, "{}", compare::render_table(&outcome))?;
            writeln!(stdout, "{}", dir.display())?;
        }
        Command::Replay { manifest } => {
            let dir = replay(manifest, &cli.out)?;
            writeln!(stdout, "replay identical: {}", dir.display())?;
        }
        Command::Report { runs } => {
            let reports = runs.iter().map(|d| report_dir(d)).collect::<Result<Vec<_>>>()?;
            let agg = if reports.len() >= 2 { Some(aggregate(&reports)?) } else { None };
            write!(stdout, "{}", render_report(&reports, agg.as_ref())?)?;
        }
        Command::Forecast {
            model,
            corpus,
            context,
            horizon,
            output,
        } => {
            let scenario = load_scenario(cli)?;
            let model = LstmForecaster::from_archive(&read(model)?)?;
            let (rows, contexts) = load_corpus(corpus, context)?;
            let f = forecast_after(&model, &rows, &contexts, &scenario, *horizon)?;
            f.write_csv(sink(output)?)?;
        }
        Command::Feeds { action } => match action {
            FeedsAction::Dump { output } => {
                let scenario = load_scenario(cli)?;
                let n = corpus::dump_feeds(&scenario, sink(output)?)?;
                progress(&format!("{n} reports"));
            }
            FeedsAction::Validate { reports } => {
                let reports = corpus::read_report_file(reports)?;
                let validated = corpus::validate_reports(&reports)?;
                let rejected: usize = validated.iter().map(|v| v.rejected_sources.len()).sum();
                for v in &validated {
                    writeln!(stdout, "{}", serde_json::to_string(v)?)?;
                }
                progress(&format!("{} signals, {rejected} rejected reports", validated.len()));
            }
        },
    }
    stdout.flush()?;
    Ok(())
}
