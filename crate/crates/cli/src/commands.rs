use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use teamfp_core::beliefs::{check_schedule, Certification, StepSchedule};
use teamfp_core::dynamics::{DynamicsConfig, OpponentMode, UpdateRule, Variant};
use teamfp_core::game::{
    validate_potential_with_cap, validate_zero_sum_with_cap, CheckMethod, MultiTeamGame, PayoffSource,
    ValidationReport,
};
use teamfp_core::gamegen::{GenSpec, Generated};
use teamfp_core::io::{self, GameFile, Table};
use teamfp_core::markov::{MarkovTeamGame, MgConfig, ModelKnowledge, QInit};
use teamfp_core::metrics::{lyapunov, tng as team_nash_gap};
use teamfp_core::trials::{run_mg_trials, run_trials, TrialPlan};

use crate::{Common, GameSource, GenArgs, Knowledge, QStart, RunArgs, RunMgArgs, SweepArgs, TngArgs, ValidateArgs};

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<(), Failure>;

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn read_spec(text: &str) -> anyhow::Result<GenSpec> {
    let json = if text.trim_start().starts_with('{') {
        text.to_string()
    } else {
        fs::read_to_string(text).with_context(|| format!("cannot read generator spec {text}"))?
    };
    serde_json::from_str(&json).context("invalid generator spec")
}

fn load_game(source: &GameSource) -> Result<MultiTeamGame, Failure> {
    match (&source.game, &source.gen) {
        (Some(path), _) => io::load_game(path)
            .with_context(|| format!("cannot load game {}", path.display()))
            .map_err(input),
        (None, Some(spec)) => read_spec(spec).and_then(|s| Ok(s.build_game()?)).map_err(input),
        (None, None) => Err(input(anyhow!("pass --game or --gen"))),
    }
}

fn load_markov(source: &GameSource) -> Result<MarkovTeamGame, Failure> {
    match (&source.game, &source.gen) {
        (Some(path), _) => io::load_markov(path)
            .with_context(|| format!("cannot load Markov game {}", path.display()))
            .map_err(input),
        (None, Some(spec)) => read_spec(spec).and_then(|s| Ok(s.build_markov()?)).map_err(input),
        (None, None) => Err(input(anyhow!("pass --game or --gen"))),
    }
}

/// Rejects schedules failing the finite-prefix checks unless overridden, and
/// warns when the asymptotic conditions are known to fail.
fn check_steps(schedule: &StepSchedule, horizon: u64, allow_unsafe: bool) -> Outcome {
    let report = check_schedule(schedule, horizon.max(2)).map_err(input)?;
    if let Certification::Violated(reason) = &report.asymptotic {
        eprintln!("warning: schedule {schedule}: {reason}");
    }
    if !report.passes_prefix() {
        let msg = format!(
            "schedule {schedule} fails the step-size checks (in [0,1]: {}, nonincreasing: {}, difference condition: {})",
            report.in_unit_interval, report.nonincreasing, report.difference_condition
        );
        if allow_unsafe {
            eprintln!("warning: {msg}");
        } else {
            return Err(Failure { code: 3, error: anyhow!("{msg}; pass --unsafe-schedule to run anyway") });
        }
    }
    Ok(())
}

fn plan(common: &Common) -> TrialPlan {
    TrialPlan { trials: common.trials, jobs: common.jobs, sequential: common.sequential }
}

fn dynamics_config(common: &Common, variant: Variant, eta: f64, iterations: u64, tau: f64, delta: f64) -> DynamicsConfig {
    DynamicsConfig {
        tau,
        delta,
        eta,
        schedule: common.schedule.clone(),
        variant,
        seed: common.seed,
        iterations,
        stride: common.stride,
        ..Default::default()
    }
}

fn final_mean(table: &Table) -> anyhow::Result<(f64, f64)> {
    let agg = table.aggregate()?;
    let last = agg.last().ok_or_else(|| anyhow!("no samples"))?;
    Ok((last.mean[0], last.std[0]))
}

pub fn run(args: RunArgs) -> Outcome {
    let game = load_game(&args.source)?;
    let mut config = dynamics_config(&args.common, args.variant, args.eta, args.iterations, args.common.tau, args.common.delta);
    if args.potential_payoffs {
        config.payoff_source = PayoffSource::Potential;
    }
    config.validate().map_err(input)?;
    if args.common.trials == 0 {
        return Err(input(anyhow!("--trials must be at least 1")));
    }
    check_steps(&config.schedule, config.iterations, args.common.unsafe_schedule)?;
    let mode = match &args.opponent_stationary {
        Some(path) => io::load_stationary(path, game.structure())
            .with_context(|| format!("cannot load stationary strategies {}", path.display()))
            .map_err(input)?,
        None => OpponentMode::SelfPlay,
    };
    let records = run_trials(&game, &config, &mode, plan(&args.common)).map_err(input)?;
    let table = Table::from_runs(&records, game.num_teams());
    let agg = io::write_outputs(&args.out, &table).map_err(runtime)?;
    let (mean, std) = final_mean(&table).map_err(runtime)?;
    let s = game.structure();
    let bound = match mode {
        OpponentMode::Stationary { learner, .. } => args.common.tau * (s.joint_count(learner) as f64).ln(),
        OpponentMode::SelfPlay => args.common.tau * s.ln_total_actions(),
    };
    println!("wrote {} and {}", args.out.display(), agg.display());
    println!("final TNG: mean {mean} std {std} (tau*ln|A| = {bound})");
    Ok(())
}

pub fn run_mg(args: RunMgArgs) -> Outcome {
    let mg = load_markov(&args.source)?;
    let rule = match args.variant {
        Variant::TeamFp => UpdateRule::Coordinated,
        Variant::IndependentTeamFp => UpdateRule::Independent { delta: args.common.delta },
        other => return Err(input(anyhow!("variant {other} is not available for Markov games"))),
    };
    let config = MgConfig {
        tau: args.common.tau,
        rule,
        schedule: args.common.schedule.clone(),
        knowledge: match args.model {
            Knowledge::ModelBased => ModelKnowledge::ModelBased,
            Knowledge::ModelFree => ModelKnowledge::ModelFree,
        },
        q_init: match args.q_init {
            QStart::Zero => QInit::Zero,
            QStart::Reward => QInit::Reward,
        },
        seed: args.common.seed,
        episodes: args.episodes,
        stride: args.common.stride,
    };
    config.validate().map_err(input)?;
    check_steps(&config.schedule, config.episodes, args.common.unsafe_schedule)?;
    let records = run_mg_trials(&mg, &config, plan(&args.common)).map_err(input)?;
    let table = Table::from_mg_runs(&records, mg.structure().num_teams());
    let agg = io::write_outputs(&args.out, &table).map_err(runtime)?;
    let (mean, std) = final_mean(&table).map_err(runtime)?;
    println!("wrote {} and {}", args.out.display(), agg.display());
    println!("final Markov-game TNG: mean {mean} std {std}");
    Ok(())
}

fn describe(name: &str, report: &teamfp_core::Result<ValidationReport>) -> bool {
    match report {
        Ok(r) if r.is_ok() => {
            let how = match r.method {
                CheckMethod::Exhaustive => "exhaustive",
                CheckMethod::Pairwise => "pairwise tables",
            };
            println!("{name}: ok ({how}, {} checks)", r.checked);
            true
        }
        Ok(r) => {
            println!(
                "{name}: {} violations, max discrepancy {}",
                r.total_violations, r.max_discrepancy
            );
            for v in r.violations.iter().take(10) {
                println!("  {v}");
            }
            false
        }
        Err(e) => {
            println!("{name}: not checked ({e})");
            true
        }
    }
}

fn validate_one(game: &MultiTeamGame, cap: u128, prefix: &str) -> bool {
    let potential = describe(&format!("{prefix}potential"), &validate_potential_with_cap(game, cap));
    let zero_sum_ok = describe(&format!("{prefix}zero-sum"), &validate_zero_sum_with_cap(game, cap));
    if !game.is_declared_zero_sum() {
        println!("{prefix}declared general-sum; the zero-sum check is informational");
    }
    potential && (zero_sum_ok || !game.is_declared_zero_sum())
}

pub fn validate(args: ValidateArgs) -> Outcome {
    let file = io::load_any(&args.game)
        .with_context(|| format!("cannot load {}", args.game.display()))
        .map_err(input)?;
    let ok = match &file {
        GameFile::Game(g) => {
            println!("phi_bar: {}", g.phi_bar());
            validate_one(g, args.cap, "")
        }
        GameFile::Markov(mg) => mg
            .stages()
            .iter()
            .enumerate()
            // Every stage is reported, so no short-circuiting here.
            .map(|(s, g)| validate_one(g, args.cap, &format!("state {s} ")))
            .filter(|ok| !ok)
            .count()
            == 0,
    };
    if ok {
        Ok(())
    } else {
        Err(runtime(anyhow!("validation failed")))
    }
}

pub fn tng(args: TngArgs) -> Outcome {
    let game = io::load_game(&args.game)
        .with_context(|| format!("cannot load game {}", args.game.display()))
        .map_err(input)?;
    let beliefs = io::load_beliefs(&args.beliefs, game.structure())
        .with_context(|| format!("cannot load beliefs {}", args.beliefs.display()))
        .map_err(input)?;
    let gap = team_nash_gap(&game, &beliefs).map_err(input)?;
    let mut out = serde_json::json!({ "tng_team": gap.per_team, "tng_total": gap.total });
    if let Some(tau) = args.tau {
        out["lyapunov"] = lyapunov(&game, &beliefs, tau).map_err(input)?.into();
    }
    println!("{out}");
    Ok(())
}

pub fn gen(args: GenArgs) -> Outcome {
    let spec = read_spec(&args.spec).map_err(input)?;
    match spec.build().map_err(input)? {
        Generated::Game(g) => {
            io::save_game(&args.out, &g).map_err(runtime)?;
            println!("phi_bar: {}", g.phi_bar());
        }
        Generated::Markov(mg) => {
            io::save_markov(&args.out, &mg).map_err(runtime)?;
            let bar = mg.stages().iter().map(MultiTeamGame::phi_bar).fold(0.0, f64::max);
            println!("phi_bar: {bar}");
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn sweep_file(dir: &Path, variant: Variant, tau: f64, delta: Option<f64>) -> PathBuf {
    let name = match delta {
        Some(d) => format!("{variant}_tau{tau}_delta{d}.csv"),
        None => format!("{variant}_tau{tau}.csv"),
    };
    dir.join(name)
}

pub fn sweep(args: SweepArgs) -> Outcome {
    let game = load_game(&args.source)?;
    if args.common.trials == 0 {
        return Err(input(anyhow!("--trials must be at least 1")));
    }
    check_steps(&args.common.schedule, args.iterations, args.common.unsafe_schedule)?;
    let mut combos = Vec::new();
    for &variant in &args.variants {
        for &tau in &args.taus {
            if variant == Variant::IndependentTeamFp {
                combos.extend(args.deltas.iter().map(|&d| (variant, tau, Some(d))));
            } else {
                combos.push((variant, tau, None));
            }
        }
    }
    for &(variant, tau, delta) in &combos {
        dynamics_config(&args.common, variant, args.eta, args.iterations, tau, delta.unwrap_or(args.common.delta))
            .validate()
            .map_err(input)?;
    }
    fs::create_dir_all(&args.out_dir).map_err(runtime)?;
    let mut summary = vec!["variant,tau,delta,final_tng_mean,final_tng_std,file".to_string()];
    for (variant, tau, delta) in combos {
        let config = dynamics_config(&args.common, variant, args.eta, args.iterations, tau, delta.unwrap_or(args.common.delta));
        let records = run_trials(&game, &config, &OpponentMode::SelfPlay, plan(&args.common)).map_err(input)?;
        let table = Table::from_runs(&records, game.num_teams());
        let path = sweep_file(&args.out_dir, variant, tau, delta);
        io::write_outputs(&path, &table).map_err(runtime)?;
        let (mean, std) = final_mean(&table).map_err(runtime)?;
        let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let delta = delta.map(|d| d.to_string()).unwrap_or_default();
        println!("{variant} tau={tau} delta={delta}: final TNG mean {mean} std {std}");
        summary.push(format!("{variant},{tau},{delta},{mean},{std},{file}"));
    }
    let path = args.out_dir.join("sweep_summary.csv");
    fs::write(&path, summary.join("\n") + "\n").map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}
