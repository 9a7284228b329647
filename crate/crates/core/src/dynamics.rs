//! Learning dynamics on multi-team games.
//!
//! Team-FP: every team's members respond to their teammates' previous actions
//! and to the other teams' empirical beliefs, with exactly one member per team
//! revising per step (log-linear inertia). Independent Team-FP lets every member
//! revise with probability `delta`. SFP and MWU are the agent-level baselines.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beliefs::{check_simplex, marginalize, product_distribution, update_belief, BeliefProfile, StepSchedule};
use crate::error::{Error, Result};
use crate::game::{MultiTeamGame, PayoffSource, TeamStructure};
use crate::metrics::{check_tau, metrics_row, MetricsRow};

/// The generator behind every simulation: ChaCha with 8 rounds, a
/// counter-based stream cipher, seeded through `seed_from_u64`.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Softmax of `q / tau`: the maximizer of `q . mu + tau H(mu)` over the simplex.
pub fn smoothed_best_response(q: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_tau(tau)?;
    if q.is_empty() {
        return Err(Error::Dimension("empty payoff vector".into()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("non-finite payoff".into()));
    }
    let mut out = Vec::with_capacity(q.len());
    softmax_into(q, tau, &mut out);
    Ok(out)
}

pub(crate) fn softmax_into(q: &[f64], tau: f64, out: &mut Vec<f64>) {
    let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(q.iter().map(|v| ((v - top) / tau).exp()));
    let total: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Inverse-CDF draw from `probs` using one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    TeamFp,
    IndependentTeamFp,
    Sfp,
    Mwu,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::TeamFp, Variant::IndependentTeamFp, Variant::Sfp, Variant::Mwu];

    pub fn name(self) -> &'static str {
        match self {
            Variant::TeamFp => "team-fp",
            Variant::IndependentTeamFp => "independent-team-fp",
            Variant::Sfp => "sfp",
            Variant::Mwu => "mwu",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown variant {s:?}")))
    }
}

/// How team members revise actions in one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    /// One uniformly chosen member per team.
    Coordinated,
    /// Every member independently with probability `delta`.
    Independent { delta: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialBeliefs {
    #[default]
    Uniform,
    /// Point mass on joint action 0.
    PointMass,
    /// One distribution per team.
    Explicit(Vec<Vec<f64>>),
}

impl InitialBeliefs {
    pub fn build(&self, structure: &TeamStructure) -> Result<BeliefProfile> {
        match self {
            InitialBeliefs::Uniform => Ok(BeliefProfile::uniform(structure)),
            InitialBeliefs::PointMass => Ok(BeliefProfile::point_mass(structure)),
            InitialBeliefs::Explicit(v) => BeliefProfile::from_vectors(structure, v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub tau: f64,
    /// Revision probability for Independent Team-FP.
    pub delta: f64,
    /// MWU learning rate.
    pub eta: f64,
    pub schedule: StepSchedule,
    pub variant: Variant,
    pub seed: u64,
    pub iterations: u64,
    /// Metrics are sampled every `stride` iterations.
    pub stride: u64,
    pub payoff_source: PayoffSource,
    pub initial_beliefs: InitialBeliefs,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            delta: 0.5,
            eta: 0.05,
            schedule: StepSchedule::Harmonic,
            variant: Variant::TeamFp,
            seed: 0,
            iterations: 100_000,
            stride: 100,
            payoff_source: PayoffSource::Agent,
            initial_beliefs: InitialBeliefs::Uniform,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Parameter(format!("eta must be positive, got {}", self.eta)));
        }
        if self.stride == 0 {
            return Err(Error::Parameter("stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn update_rule(&self) -> UpdateRule {
        match self.variant {
            Variant::IndependentTeamFp => UpdateRule::Independent { delta: self.delta },
            _ => UpdateRule::Coordinated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpponentMode {
    SelfPlay,
    /// Only team `learner` learns; every other team `l` plays `strategies[l]`
    /// forever. The learner's own entry is ignored.
    Stationary { learner: usize, strategies: Vec<Vec<f64>> },
}

#[derive(Debug, Clone)]
enum VariantState {
    Team,
    Sfp {
        /// Empirical average of each agent's actions, by global agent id.
        marginals: Vec<Vec<f64>>,
    },
    Mwu {
        log_weights: Vec<Vec<f64>>,
        strategies: Vec<Vec<f64>>,
        averages: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct DynamicsState {
    k: u64,
    /// Last joint action of every team.
    last: Vec<usize>,
    /// Beliefs about every team; for SFP and MWU the product of member
    /// averages, refreshed every step.
    beliefs: BeliefProfile,
    rng: SimRng,
    learner: Option<usize>,
    extra: VariantState,
}

impl DynamicsState {
    pub fn new(game: &MultiTeamGame, config: &DynamicsConfig, mode: &OpponentMode) -> Result<Self> {
        config.validate()?;
        let s = game.structure();
        let mut beliefs = config.initial_beliefs.build(s)?;
        let learner = match mode {
            OpponentMode::SelfPlay => None,
            OpponentMode::Stationary { learner, strategies } => {
                s.check_team(*learner)?;
                if strategies.len() != s.num_teams() {
                    return Err(Error::Dimension(format!(
                        "{} stationary strategies for {} teams",
                        strategies.len(),
                        s.num_teams()
                    )));
                }
                for (l, v) in strategies.iter().enumerate().filter(|(l, _)| l != learner) {
                    if v.len() != s.joint_count(l) {
                        return Err(Error::Dimension(format!(
                            "stationary strategy of team {l} has length {}, expected {}",
                            v.len(),
                            s.joint_count(l)
                        )));
                    }
                    check_simplex(v)?;
                    beliefs.set_team(l, v.clone());
                }
                Some(*learner)
            }
        };
        let marginals = || -> Result<Vec<Vec<f64>>> {
            let mut out = Vec::with_capacity(s.num_agents());
            for m in 0..s.num_teams() {
                for j in 0..s.team_size(m) {
                    out.push(marginalize(s, m, beliefs.team(m), &[j])?);
                }
            }
            Ok(out)
        };
        let extra = match config.variant {
            Variant::TeamFp | Variant::IndependentTeamFp => VariantState::Team,
            Variant::Sfp => VariantState::Sfp { marginals: marginals()? },
            Variant::Mwu => {
                let strategies = marginals()?;
                if strategies.iter().flatten().any(|&p| p <= 0.0) {
                    return Err(Error::Parameter(
                        "MWU needs initial strategies with full support".into(),
                    ));
                }
                VariantState::Mwu {
                    log_weights: strategies.iter().map(|x| x.iter().map(|p| p.ln()).collect()).collect(),
                    averages: strategies.clone(),
                    strategies,
                }
            }
        };
        let mut state = Self {
            k: 0,
            last: vec![0; s.num_teams()],
            beliefs,
            rng: rng_from_seed(config.seed),
            learner,
            extra,
        };
        state.refresh_product_beliefs(s);
        Ok(state)
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    pub fn last_actions(&self) -> &[usize] {
        &self.last
    }

    /// The strategy profile the metrics are evaluated on.
    pub fn beliefs(&self) -> &BeliefProfile {
        &self.beliefs
    }

    /// Per-agent empirical averages (SFP) or current mixed strategies (MWU).
    pub fn agent_strategies(&self) -> Option<&[Vec<f64>]> {
        match &self.extra {
            VariantState::Team => None,
            VariantState::Sfp { marginals } => Some(marginals),
            VariantState::Mwu { strategies, .. } => Some(strategies),
        }
    }

    /// Running averages of the MWU strategies.
    pub fn agent_averages(&self) -> Option<&[Vec<f64>]> {
        match &self.extra {
            VariantState::Mwu { averages, .. } => Some(averages),
            _ => None,
        }
    }

    fn acting_teams(&self, num_teams: usize) -> std::ops::Range<usize> {
        match self.learner {
            Some(m) => m..m + 1,
            None => 0..num_teams,
        }
    }

    fn refresh_product_beliefs(&mut self, s: &TeamStructure) {
        let per_agent = match &self.extra {
            VariantState::Team => return,
            VariantState::Sfp { marginals } => marginals,
            VariantState::Mwu { averages, .. } => averages,
        };
        for m in self.acting_teams(s.num_teams()) {
            let members: Vec<&[f64]> = (0..s.team_size(m)).map(|j| &per_agent[s.agent_id(m, j)][..]).collect();
            self.beliefs.set_team(m, product_distribution(s, m, &members));
        }
    }
}

/// Plays one stage for the teams in `teams`, revising `last` in place.
///
/// `payoff(m, j, previous, out)` must write member `j`'s payoff vector with
/// teammates fixed at `previous`, team `m`'s joint action before this stage.
/// Teams are visited in order and members within a team in order; the
/// generator is consumed in that order only.
pub fn play_stage<R, F>(
    structure: &TeamStructure,
    rule: UpdateRule,
    teams: impl IntoIterator<Item = usize>,
    last: &mut [usize],
    tau: f64,
    rng: &mut R,
    mut payoff: F,
) where
    R: Rng + ?Sized,
    F: FnMut(usize, usize, usize, &mut Vec<f64>),
{
    let mut q = Vec::new();
    let mut probs = Vec::new();
    for m in teams {
        let previous = last[m];
        match rule {
            UpdateRule::Coordinated => {
                let j = rng.gen_range(0..structure.team_size(m));
                payoff(m, j, previous, &mut q);
                softmax_into(&q, tau, &mut probs);
                let x = sample_index(&probs, rng);
                last[m] = structure.with_agent_action(m, previous, j, x);
            }
            UpdateRule::Independent { delta } => {
                let mut next = previous;
                for j in 0..structure.team_size(m) {
                    if rng.gen::<f64>() < delta {
                        payoff(m, j, previous, &mut q);
                        softmax_into(&q, tau, &mut probs);
                        let x = sample_index(&probs, rng);
                        next = structure.with_agent_action(m, next, j, x);
                    }
                }
                last[m] = next;
            }
        }
    }
}

fn team_step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig, rule: UpdateRule) {
    let s = game.structure();
    let teams = state.acting_teams(s.num_teams());
    let beliefs = &state.beliefs;
    play_stage(s, rule, teams.clone(), &mut state.last, config.tau, &mut state.rng, |m, j, prev, out| {
        game.agent_payoff_into(m, j, prev, beliefs.teams(), config.payoff_source, out)
    });
    // A lone team has no outside observers.
    if s.num_teams() > 1 {
        let alpha = config.schedule.alpha(state.k);
        for m in teams {
            state
                .beliefs
                .update(m, state.last[m], alpha)
                .expect("schedule validated to stay in [0, 1]");
        }
    }
    state.k += 1;
}

/// Classical Team-FP: one uniformly chosen member of each team resamples from
/// its smoothed best response; then every team's belief absorbs its realized
/// joint action.
pub fn team_fp_step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig) {
    team_step(game, state, config, UpdateRule::Coordinated)
}

/// Independent Team-FP: each member resamples with probability `delta`,
/// responding to its teammates' previous-stage actions.
pub fn independent_team_fp_step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig) {
    team_step(game, state, config, UpdateRule::Independent { delta: config.delta })
}

/// Expected payoff of each of agent `j`'s actions when teammates play the
/// product of `member_strategies` and other teams play `team_strategies`.
fn agent_expected_payoff(
    game: &MultiTeamGame,
    m: usize,
    j: usize,
    values: &[f64],
    member_strategies: &[&[f64]],
) -> Vec<f64> {
    let s = game.structure();
    let ones = vec![1.0; s.action_count(m, j)];
    let mut members = member_strategies.to_vec();
    members[j] = &ones;
    let weights = product_distribution(s, m, &members);
    let mut q = vec![0.0; s.action_count(m, j)];
    for (x, (&v, &w)) in values.iter().zip(&weights).enumerate() {
        q[s.agent_action(m, x, j)] += v * w;
    }
    q
}

/// Payoff vectors of every acting agent against product strategies.
fn agent_payoffs_vs_products(
    game: &MultiTeamGame,
    state: &DynamicsState,
    per_agent: &[Vec<f64>],
    team_strategies: &[Vec<f64>],
    source: PayoffSource,
) -> Vec<(usize, usize, Vec<f64>)> {
    let s = game.structure();
    let identical = source == PayoffSource::Potential || game.payoffs().is_none();
    let mut out = Vec::new();
    for m in state.acting_teams(s.num_teams()) {
        let members: Vec<&[f64]> = (0..s.team_size(m)).map(|j| &per_agent[s.agent_id(m, j)][..]).collect();
        let shared = identical.then(|| game.team_values_unchecked(m, team_strategies));
        for j in 0..s.team_size(m) {
            let own;
            let values = match &shared {
                Some(v) => v,
                None => {
                    own = game.agent_team_values(m, j, team_strategies, source);
                    &own
                }
            };
            out.push((m, j, agent_expected_payoff(game, m, j, values, &members)));
        }
    }
    out
}

/// Smoothed fictitious play: every agent tracks the empirical average of every
/// other agent's actions and plays a fresh draw from its smoothed best
/// response to their product each step.
pub fn sfp_step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig) {
    let s = game.structure();
    let VariantState::Sfp { marginals } = &state.extra else {
        panic!("sfp_step on a state built for {:?}", config.variant);
    };
    let payoffs = agent_payoffs_vs_products(game, state, marginals, state.beliefs.teams(), config.payoff_source);
    let mut actions = Vec::with_capacity(payoffs.len());
    let mut probs = Vec::new();
    for (m, j, q) in &payoffs {
        softmax_into(q, config.tau, &mut probs);
        let x = sample_index(&probs, &mut state.rng);
        actions.push((*m, *j, x));
    }
    let alpha = config.schedule.alpha(state.k);
    let VariantState::Sfp { marginals } = &mut state.extra else { unreachable!() };
    for (m, j, x) in actions {
        state.last[m] = s.with_agent_action(m, state.last[m], j, x);
        update_belief(&mut marginals[s.agent_id(m, j)], x, alpha).expect("step size in [0, 1]");
    }
    state.refresh_product_beliefs(s);
    state.k += 1;
}

/// Full-information multiplicative weights: `x_{k+1}(a) ~ x_k(a) exp(eta q_k(a))`
/// against every other agent's current mixed strategy. Metrics use the
/// product of the running averages.
pub fn mwu_step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig) {
    let s = game.structure();
    let k = state.k;
    let VariantState::Mwu { strategies, averages, .. } = &mut state.extra else {
        panic!("mwu_step on a state built for {:?}", config.variant);
    };
    let weight = 1.0 / (k as f64 + 1.0);
    for (avg, x) in averages.iter_mut().zip(strategies.iter()) {
        for (a, p) in avg.iter_mut().zip(x) {
            *a += (p - *a) * weight;
        }
    }
    let VariantState::Mwu { strategies, .. } = &state.extra else { unreachable!() };
    let mut current = state.beliefs.clone();
    for m in state.acting_teams(s.num_teams()) {
        let members: Vec<&[f64]> = (0..s.team_size(m)).map(|j| &strategies[s.agent_id(m, j)][..]).collect();
        current.set_team(m, product_distribution(s, m, &members));
    }
    let payoffs = agent_payoffs_vs_products(game, state, strategies, current.teams(), config.payoff_source);
    let VariantState::Mwu { log_weights, strategies, .. } = &mut state.extra else { unreachable!() };
    for (m, j, q) in payoffs {
        let id = s.agent_id(m, j);
        for (w, v) in log_weights[id].iter_mut().zip(&q) {
            *w += config.eta * v;
        }
        let mut x = Vec::new();
        softmax_into(&log_weights[id], 1.0, &mut x);
        strategies[id] = x;
    }
    state.refresh_product_beliefs(s);
    state.k += 1;
}

/// Advances `state` by one iteration of `config.variant`.
pub fn step(game: &MultiTeamGame, state: &mut DynamicsState, config: &DynamicsConfig) {
    match config.variant {
        Variant::TeamFp => team_fp_step(game, state, config),
        Variant::IndependentTeamFp => independent_team_fp_step(game, state, config),
        Variant::Sfp => sfp_step(game, state, config),
        Variant::Mwu => mwu_step(game, state, config),
    }
}

/// Sampled metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trial: usize,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
}

impl RunRecord {
    /// Mean total gap over the last `fraction` of the sampled rows (at least one row).
    pub fn tail_mean_tng(&self, fraction: f64) -> f64 {
        self.tail_mean(fraction, |r| r.tng_total)
    }

    /// Mean of `f` over the last `fraction` of the sampled rows.
    pub fn tail_mean(&self, fraction: f64, f: impl Fn(&MetricsRow) -> f64) -> f64 {
        let n = self.rows.len();
        let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n.max(1));
        let tail = &self.rows[n - take..];
        tail.iter().map(f).sum::<f64>() / take as f64
    }
}

/// Runs `config.iterations` steps, sampling metrics at iteration 0, every
/// `config.stride` iterations and at the final iteration.
pub fn run(game: &MultiTeamGame, config: &DynamicsConfig, mode: &OpponentMode) -> Result<RunRecord> {
    let mut state = DynamicsState::new(game, config, mode)?;
    let sample = |state: &DynamicsState| metrics_row(game, state.beliefs(), config.tau, state.iteration());
    let mut rows = vec![sample(&state)?];
    while state.iteration() < config.iterations {
        step(game, &mut state, config);
        if state.iteration() % config.stride == 0 || state.iteration() == config.iterations {
            rows.push(sample(&state)?);
        }
    }
    Ok(RunRecord {
        trial: 0,
        seed: config.seed,
        rows,
    })
}
