use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use valcon_cli::config::{load_config, Overrides};
use valcon_cli::error::Result;
use valcon_cli::{analyze, generate, judge, report, simulate, survey};

#[derive(Parser)]
#[command(
    name = "valcon",
    version,
    about = "Measure the value consistency of question-answering agents"
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, default_value = "valcon.toml", value_name = "PATH")]
    config: PathBuf,
    /// Offer an explicit abstain option on every probe.
    #[arg(long, global = true)]
    abstain: bool,
    /// Prepend the worked example to multiple-choice prompts.
    #[arg(long, global = true)]
    in_context_example: bool,
    /// Restrict probing to one use case, or "both".
    #[arg(long, global = true, value_name = "multiple_choice|open_ended|both")]
    use_case: Option<String>,
    /// Comma-separated language codes to survey (eng, chi, ger, jpn).
    #[arg(long, global = true, value_delimiter = ',', value_name = "CODES")]
    languages: Option<Vec<String>>,
    /// Condition every probe on one named value.
    #[arg(long, global = true, value_name = "VALUE")]
    value_condition: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a question corpus with a prompted model
    Generate,
    /// Probe every configured subject over the corpus
    Survey,
    /// Map surveyed generations onto stances with judge models
    Judge,
    /// Score consistency measures from the survey log (offline)
    Analyze {
        /// Also tabulate normalized entropy per paraphrase group.
        #[arg(long)]
        entropy: bool,
    },
    /// Run the whole pipeline against a synthetic respondent
    Simulate,
    /// Draw bar-chart figures from previously written score tables
    Report,
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(&cli.config)?;
    cfg.apply(&Overrides {
        abstain: cli.abstain,
        in_context_example: cli.in_context_example,
        use_case: cli.use_case.clone(),
        languages: cli.languages.clone(),
        value_condition: cli.value_condition.clone(),
    })?;
    match &cli.command {
        Command::Generate => generate::run(&cfg),
        Command::Survey => survey::run(&cfg),
        Command::Judge => judge::run(&cfg),
        Command::Analyze { entropy } => analyze::run(&cfg, *entropy),
        Command::Simulate => simulate::run(&cfg),
        Command::Report => report::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
