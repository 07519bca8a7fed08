use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqlhard::generate::FailurePolicy;
use sqlhard::http::EndpointConfig;
use sqlhard::pipeline::{
    self, Context, GeneratorChoice, PipelineConfig, PipelineError, PredictorChoice, ScorerChoice,
};

/// Hardness-prompted text-to-SQL pipeline and evaluation.
#[derive(Parser)]
#[command(name = "sqlhard", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the dataset and write examples.jsonl.
    Ingest(Opts),
    /// Rank schema items per question and write refined.jsonl.
    Refine(Opts),
    /// Label gold SQL by hardness, print the distribution, write labels.jsonl.
    Label(Opts),
    /// Predict hardness and write composed prompts to prompts.jsonl.
    Compose(Opts),
    /// Produce predictions.jsonl from the prompts.
    Generate(Opts),
    /// Score predictions with EM and EX and write the report.
    Evaluate {
        #[command(flatten)]
        opts: Opts,
        /// Prediction file to score instead of the `generate` output.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Predictor accuracy against gold levels, refined vs full schema.
    Ablate(Opts),
    /// Print the saved report tables.
    Report(Opts),
    /// Every stage from ingest to evaluate.
    Run(Opts),
    /// Print the effective configuration and its fingerprint.
    Config(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScorerKind {
    Lexical,
    Endpoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorKind {
    Oracle,
    Heuristic,
    Endpoint,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorKind {
    GoldEcho,
    Replay,
    Endpoint,
}

/// Overrides applied on top of the configuration file.
#[derive(Args, Clone)]
struct Opts {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    db_root: Option<PathBuf>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Keep only the first N examples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    k_tables: Option<usize>,
    #[arg(long)]
    k_cols: Option<usize>,
    /// Append foreign-key segments to serialized schemas.
    #[arg(long)]
    include_fk: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Per-query execution timeout.
    #[arg(long)]
    exec_timeout_ms: Option<u64>,
    /// Emit `SELECT 1` for failed generations instead of aborting.
    #[arg(long)]
    placeholder_on_failure: bool,
    #[arg(long, value_enum)]
    scorer: Option<ScorerKind>,
    #[arg(long)]
    scorer_url: Option<String>,
    #[arg(long, value_enum)]
    predictor: Option<PredictorKind>,
    #[arg(long)]
    predictor_url: Option<String>,
    #[arg(long, value_enum)]
    generator: Option<GeneratorKind>,
    #[arg(long)]
    generator_url: Option<String>,
    /// Prediction file for the replay generator.
    #[arg(long)]
    replay: Option<PathBuf>,
}

fn endpoint(url: Option<&String>, slot: &str) -> Result<EndpointConfig, PipelineError> {
    url.map(EndpointConfig::new)
        .ok_or_else(|| PipelineError::Config(format!("--{slot}=endpoint needs --{slot}-url")))
}

impl Opts {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(
            dataset,
            tables,
            db_root,
            output_dir,
            k_tables,
            k_cols,
            threads,
            exec_timeout_ms
        );
        if self.limit.is_some() {
            c.limit = self.limit;
        }
        if self.include_fk {
            c.include_fk = true;
        }
        if self.placeholder_on_failure {
            c.on_failure = FailurePolicy::Placeholder;
        }
        match self.scorer {
            Some(ScorerKind::Lexical) => c.scorer = ScorerChoice::Lexical,
            Some(ScorerKind::Endpoint) => {
                c.scorer = ScorerChoice::Endpoint(endpoint(self.scorer_url.as_ref(), "scorer")?)
            }
            None => {}
        }
        match self.predictor {
            Some(PredictorKind::Oracle) => c.predictor = PredictorChoice::Oracle,
            Some(PredictorKind::Heuristic) => {
                c.predictor = PredictorChoice::Heuristic {
                    rules: Default::default(),
                }
            }
            Some(PredictorKind::Endpoint) => {
                c.predictor =
                    PredictorChoice::Endpoint(endpoint(self.predictor_url.as_ref(), "predictor")?)
            }
            None => {}
        }
        match (self.generator, &self.replay) {
            (Some(GeneratorKind::GoldEcho), _) => c.generator = GeneratorChoice::GoldEcho,
            (Some(GeneratorKind::Replay), None) => {
                return Err(PipelineError::Config(
                    "--generator=replay needs --replay".into(),
                ))
            }
            (Some(GeneratorKind::Replay) | None, Some(path)) => {
                c.generator = GeneratorChoice::Replay { path: path.clone() }
            }
            (Some(GeneratorKind::Endpoint), _) => {
                c.generator =
                    GeneratorChoice::Endpoint(endpoint(self.generator_url.as_ref(), "generator")?)
            }
            (None, None) => {}
        }
        c.validate()?;
        Ok(c)
    }

    fn context(&self) -> Result<Context, PipelineError> {
        Context::new(self.config()?)
    }
}

/// Exit status: 0 success, 3 when the report covers placeholder predictions.
fn run(command: Command) -> Result<u8, PipelineError> {
    match command {
        Command::Ingest(o) => {
            let examples = pipeline::ingest(&o.context()?)?;
            println!("{} examples", examples.len());
        }
        Command::Refine(o) => {
            let records = pipeline::refine_stage(&o.context()?)?;
            println!("{} refined schemas", records.len());
        }
        Command::Label(o) => {
            let dist = pipeline::label_stage(&o.context()?)?;
            println!("{dist}");
        }
        Command::Compose(o) => {
            let records = pipeline::compose_stage(&o.context()?)?;
            println!("{} prompts", records.len());
        }
        Command::Generate(o) => {
            let records = pipeline::generate_stage(&o.context()?)?;
            println!("{} predictions", records.len());
        }
        Command::Evaluate { opts, predictions } => {
            let result = pipeline::evaluate_stage(&opts.context()?, predictions.as_deref())?;
            print!("{}", result.report);
            return Ok(partial(result.placeholders));
        }
        Command::Run(o) => {
            let result = pipeline::run_pipeline(o.config()?)?;
            print!("{}", result.report);
            return Ok(partial(result.placeholders));
        }
        Command::Ablate(o) => {
            let report = pipeline::run_ablation(&o.context()?)?;
            print!("{}", report.to_table());
        }
        Command::Report(o) => {
            print!("{}", pipeline::report_stage(&o.config()?.output_dir)?);
        }
        Command::Config(o) => {
            let c = o.config()?;
            print!("{}", c.to_toml());
            println!("# fingerprint {}", c.fingerprint());
        }
    }
    Ok(0)
}

fn partial(placeholders: usize) -> u8 {
    if placeholders > 0 {
        log::warn!("{placeholders} predictions were placeholders");
        3
    } else {
        0
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
