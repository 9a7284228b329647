//! Independent trials of a run.
//!
//! Trial `t` uses seed `seed ^ t`, so results do not depend on scheduling.
//! With the `parallel` feature trials run on a rayon pool; results are always
//! returned in trial order.

use crate::dynamics::{run, DynamicsConfig, OpponentMode, RunRecord};
use crate::error::{Error, Result};
use crate::game::MultiTeamGame;
use crate::markov::{run_mg, MarkovTeamGame, MgConfig, MgRunRecord};

/// Seed of trial `trial` under base seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

/// How many trials to run and on how many threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialPlan {
    pub trials: usize,
    /// Worker threads; `None` uses the global pool. Ignored without `parallel`.
    pub jobs: Option<usize>,
    /// Force the sequential path even when `parallel` is enabled.
    pub sequential: bool,
}

impl TrialPlan {
    pub fn new(trials: usize) -> Self {
        Self { trials, jobs: None, sequential: false }
    }

    pub fn sequential(trials: usize) -> Self {
        Self { trials, jobs: None, sequential: true }
    }

    fn check(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("at least one trial is required".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Parameter("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Evaluates `f(0..trials)` and returns the results in trial order.
pub fn map_trials<T, F>(plan: TrialPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    plan.check()?;
    if plan.sequential || plan.trials == 1 {
        return (0..plan.trials).map(f).collect();
    }
    parallel_map(plan, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(plan: TrialPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let work = || (0..plan.trials).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match plan.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(plan: TrialPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..plan.trials).map(f).collect()
}

pub fn run_trials(
    game: &MultiTeamGame,
    config: &DynamicsConfig,
    mode: &OpponentMode,
    plan: TrialPlan,
) -> Result<Vec<RunRecord>> {
    config.validate()?;
    map_trials(plan, |trial| {
        let cfg = DynamicsConfig { seed: trial_seed(config.seed, trial), ..config.clone() };
        let mut record = run(game, &cfg, mode)?;
        record.trial = trial;
        Ok(record)
    })
}

pub fn run_mg_trials(mg: &MarkovTeamGame, config: &MgConfig, plan: TrialPlan) -> Result<Vec<MgRunRecord>> {
    config.validate()?;
    map_trials(plan, |trial| {
        let cfg = MgConfig { seed: trial_seed(config.seed, trial), ..config.clone() };
        let mut record = run_mg(mg, &cfg)?;
        record.trial = trial;
        Ok(record)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TeamStructure;
    use crate::gamegen::{random_zsptg, DEFAULT_RANGE};

    #[test]
    fn parallel_matches_sequential() {
        let game = random_zsptg(&TeamStructure::uniform(2, 2, 2).unwrap(), DEFAULT_RANGE, false, 3).unwrap();
        let config = DynamicsConfig { iterations: 500, stride: 50, seed: 11, ..Default::default() };
        let par = run_trials(&game, &config, &OpponentMode::SelfPlay, TrialPlan { trials: 4, jobs: Some(2), sequential: false }).unwrap();
        let seq = run_trials(&game, &config, &OpponentMode::SelfPlay, TrialPlan::sequential(4)).unwrap();
        assert_eq!(par, seq);
        assert_eq!(par.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(par[3].seed, 11 ^ 3);
        assert_ne!(par[0].rows, par[1].rows);
    }

    #[test]
    fn rejects_empty_plans() {
        assert!(map_trials(TrialPlan::new(0), Ok).is_err());
        assert!(map_trials(TrialPlan { trials: 2, jobs: Some(0), sequential: false }, Ok).is_err());
        assert_eq!(map_trials(TrialPlan::new(3), Ok).unwrap(), vec![0, 1, 2]);
    }
}
