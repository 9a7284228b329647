//! `teamfp`: run team fictitious play experiments and write CSV results.
//!
//! Exit codes: 0 success, 1 runtime failure or failed validation, 2 unusable
//! game or configuration, 3 step-size schedule rejected.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teamfp_core::beliefs::StepSchedule;
use teamfp_core::dynamics::Variant;

#[derive(Parser, Debug)]
#[command(name = "teamfp", version, about = "Team fictitious play and baseline learning dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run independent trials of a learning dynamic on a normal-form team game.
    Run(RunArgs),
    /// Run Team-FP on a finite-horizon Markov team game.
    RunMg(RunMgArgs),
    /// Check the potential and zero-sum properties of a game file.
    Validate(ValidateArgs),
    /// Team-Nash gap of a belief profile.
    Tng(TngArgs),
    /// Generate a game from a generator spec.
    Gen(GenArgs),
    /// Run every combination of temperatures, revision probabilities and variants.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Clone)]
struct GameSource {
    /// Game file (JSON).
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    game: Option<PathBuf>,
    /// Generator spec: a JSON file or inline JSON object.
    #[arg(long)]
    gen: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Smoothing temperature.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    /// Per-agent revision probability of the independent variant.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    /// Number of independent trials.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Sample metrics every this many iterations (or episodes).
    #[arg(long, default_value_t = 100)]
    stride: u64,
    /// Base seed; trial t uses seed XOR t.
    #[arg(long, env = "TEAMFP_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads for trials.
    #[arg(long)]
    jobs: Option<usize>,
    /// Run trials one after another.
    #[arg(long)]
    sequential: bool,
    /// Step sizes: harmonic, harmonic-offset:N, power:P, constant:C or table:a,b,...
    #[arg(long, default_value = "harmonic", value_parser = parse_schedule)]
    schedule: StepSchedule,
    /// Accept a schedule that fails the step-size checks.
    #[arg(long)]
    unsafe_schedule: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: GameSource,
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "team-fp", value_parser = parse_variant)]
    variant: Variant,
    /// MWU learning rate.
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 100_000)]
    iterations: u64,
    /// Long-format CSV path; the aggregate goes to <stem>_aggregate.csv.
    #[arg(long)]
    out: PathBuf,
    /// JSON file fixing every team but one to a stationary strategy.
    #[arg(long)]
    opponent_stationary: Option<PathBuf>,
    /// Drive responses by the team potential instead of agent payoffs.
    #[arg(long)]
    potential_payoffs: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Knowledge {
    ModelBased,
    ModelFree,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum QStart {
    Zero,
    Reward,
}

#[derive(Args, Debug)]
struct RunMgArgs {
    #[command(flatten)]
    source: GameSource,
    #[command(flatten)]
    common: Common,
    /// team-fp or independent-team-fp.
    #[arg(long, default_value = "team-fp", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value_t = 10_000)]
    episodes: u64,
    #[arg(long, value_enum, default_value_t = Knowledge::ModelBased)]
    model: Knowledge,
    /// Initial Q-tables.
    #[arg(long, value_enum, default_value_t = QStart::Zero)]
    q_init: QStart,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Game or Markov game file.
    game: PathBuf,
    /// Largest joint-action count checked exhaustively.
    #[arg(long, default_value_t = teamfp_core::game::DEFAULT_VALIDATION_CAP)]
    cap: u128,
}

#[derive(Args, Debug)]
struct TngArgs {
    game: PathBuf,
    /// JSON file `{"beliefs": [[...], ...]}`.
    beliefs: PathBuf,
    /// Also report the Lyapunov value at this temperature.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Generator spec: a JSON file or inline JSON object.
    spec: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: GameSource,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    taus: Vec<f64>,
    /// Only used by independent-team-fp.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "team-fp", value_parser = parse_variant)]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 0.05)]
    eta: f64,
    #[arg(long, default_value_t = 100_000)]
    iterations: u64,
    /// Directory for per-combination CSVs and sweep_summary.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_schedule(s: &str) -> Result<StepSchedule, String> {
    s.parse().map_err(|e: teamfp_core::Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: teamfp_core::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::RunMg(a) => commands::run_mg(a),
        Command::Validate(a) => commands::validate(a),
        Command::Tng(a) => commands::tng(a),
        Command::Gen(a) => commands::gen(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
