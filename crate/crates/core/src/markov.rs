//! Finite-horizon multi-team Markov games and Team-FP on them.
//!
//! Stages are 0-based here: `h = 0` is the first stage and `h = H - 1` the
//! last. A full joint action `a` is one integer in mixed radix over the teams'
//! joint indices, team 0 least significant.

use crate::beliefs::{check_simplex, BeliefProfile, StepSchedule};
use crate::dynamics::{play_stage, rng_from_seed, sample_index, SimRng, UpdateRule};
use crate::error::{Error, Result};
use crate::game::{validate_potential, validate_zero_sum, MultiTeamGame, TeamStructure};
use crate::metrics::{check_tau, TeamNashGap};

/// Largest `|A|` for which Q-tables and kernels are stored densely.
pub const MAX_DENSE_JOINT: usize = 1 << 16;
const KERNEL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MarkovTeamGame {
    horizon: usize,
    num_states: usize,
    initial: Vec<f64>,
    /// `kernel[(s * |A| + a) * |S| + next]`.
    kernel: Vec<f64>,
    stages: Vec<MultiTeamGame>,
    structure: TeamStructure,
    strides: Vec<usize>,
    joint_total: usize,
    /// `potentials[s][m * |A| + a] = phi^m(s, a)`.
    potentials: Vec<Vec<f64>>,
    /// `rewards[s][i * |A| + a] = r^i(s, a)` by global agent id.
    rewards: Vec<Vec<f64>>,
}

impl MarkovTeamGame {
    /// `kernel[s][a]` is the next-state distribution after joint action `a` in
    /// state `s`; `stages[s]` is the stage game of state `s`.
    pub fn new(
        horizon: usize,
        initial: Vec<f64>,
        kernel: Vec<Vec<Vec<f64>>>,
        stages: Vec<MultiTeamGame>,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Model("horizon must be at least 1".into()));
        }
        let num_states = initial.len();
        if num_states == 0 {
            return Err(Error::Model("at least one state is required".into()));
        }
        check_simplex(&initial).map_err(|e| Error::Model(format!("initial distribution: {e}")))?;
        if (initial.iter().sum::<f64>() - 1.0).abs() > KERNEL_TOLERANCE {
            return Err(Error::Model("initial distribution does not sum to 1".into()));
        }
        if stages.len() != num_states || kernel.len() != num_states {
            return Err(Error::Model(format!(
                "{num_states} states but {} stage games and {} kernel blocks",
                stages.len(),
                kernel.len()
            )));
        }
        let structure = stages[0].structure().clone();
        if stages.iter().any(|g| g.structure() != &structure) {
            return Err(Error::Model("stage games must share one team structure".into()));
        }
        let mut strides = Vec::with_capacity(structure.num_teams());
        let mut joint_total: usize = 1;
        for &count in structure.joint_counts() {
            strides.push(joint_total);
            joint_total = joint_total
                .checked_mul(count)
                .filter(|&n| n <= MAX_DENSE_JOINT)
                .ok_or_else(|| Error::Model(format!("more than {MAX_DENSE_JOINT} joint actions")))?;
        }
        let mut flat = Vec::with_capacity(num_states * joint_total * num_states);
        for (s, rows) in kernel.iter().enumerate() {
            if rows.len() != joint_total {
                return Err(Error::Model(format!(
                    "state {s} has {} kernel rows, expected {joint_total}",
                    rows.len()
                )));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != num_states
                    || row.iter().any(|&p| !(p >= 0.0))
                    || (row.iter().sum::<f64>() - 1.0).abs() > KERNEL_TOLERANCE
                {
                    return Err(Error::Model(format!("kernel row ({s}, {a}) is not a distribution")));
                }
                flat.extend_from_slice(row);
            }
        }
        for (s, stage) in stages.iter().enumerate() {
            let potential = validate_potential(stage)?;
            if !potential.is_ok() {
                return Err(Error::Model(format!("stage game {s} violates the potential property")));
            }
            if stage.is_declared_zero_sum() && !validate_zero_sum(stage)?.is_ok() {
                return Err(Error::Model(format!("stage game {s} is not zero-sum")));
            }
        }
        let mut mg = Self {
            horizon,
            num_states,
            initial,
            kernel: flat,
            stages,
            structure,
            strides,
            joint_total,
            potentials: Vec::new(),
            rewards: Vec::new(),
        };
        mg.tabulate();
        Ok(mg)
    }

    fn tabulate(&mut self) {
        let t = self.structure.num_teams();
        let n = self.joint_total;
        let mut profile = vec![0; t];
        for stage in &self.stages {
            let mut potentials = vec![0.0; t * n];
            let mut rewards = vec![0.0; self.structure.num_agents() * n];
            for a in 0..n {
                self.split_into(a, &mut profile);
                for m in 0..t {
                    potentials[m * n + a] = stage.phi_unchecked(m, &profile);
                    for j in 0..self.structure.team_size(m) {
                        let i = self.structure.agent_id(m, j);
                        rewards[i * n + a] = stage.utility_unchecked(m, j, &profile);
                    }
                }
            }
            self.potentials.push(potentials);
            self.rewards.push(rewards);
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn structure(&self) -> &TeamStructure {
        &self.structure
    }

    pub fn joint_total(&self) -> usize {
        self.joint_total
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn stage(&self, s: usize) -> &MultiTeamGame {
        &self.stages[s]
    }

    pub fn stages(&self) -> &[MultiTeamGame] {
        &self.stages
    }

    /// `p(. | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.joint_total + a) * self.num_states;
        &self.kernel[start..start + self.num_states]
    }

    pub fn phi(&self, s: usize, m: usize, a: usize) -> f64 {
        self.potentials[s][m * self.joint_total + a]
    }

    /// `r^i(s, a)` for global agent `i`.
    pub fn reward(&self, s: usize, agent: usize, a: usize) -> f64 {
        self.rewards[s][agent * self.joint_total + a]
    }

    /// Index of the pair `(s, h)` in per-stage tables.
    pub fn stage_index(&self, s: usize, h: usize) -> usize {
        s * self.horizon + h
    }

    pub fn num_stage_pairs(&self) -> usize {
        self.num_states * self.horizon
    }

    pub fn join(&self, team_actions: &[usize]) -> usize {
        team_actions.iter().zip(&self.strides).map(|(x, s)| x * s).sum()
    }

    pub fn split_into(&self, a: usize, out: &mut [usize]) {
        for (m, o) in out.iter_mut().enumerate() {
            *o = (a / self.strides[m]) % self.structure.joint_count(m);
        }
    }

    /// `(offset, weight)` for every joint action of the teams other than `m`,
    /// with weights from `profile`.
    fn opponent_terms(&self, profile: &BeliefProfile, m: usize) -> Vec<(usize, f64)> {
        let mut terms = vec![(0usize, 1.0f64)];
        for l in (0..self.structure.num_teams()).filter(|&l| l != m) {
            let pi = profile.team(l);
            let mut next = Vec::with_capacity(terms.len() * pi.len());
            for (y, &p) in pi.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                next.extend(terms.iter().map(|&(o, w)| (o + y * self.strides[l], w * p)));
            }
            terms = next;
        }
        terms
    }

    /// `sum_{a^{-m}} table[a^m, a^{-m}] prod_l pi^l(a^l)` for one own joint action.
    fn expect_vs_opponents(&self, table: &[f64], own: usize, m: usize, terms: &[(usize, f64)]) -> f64 {
        let base = own * self.strides[m];
        terms.iter().map(|&(o, w)| table[base + o] * w).sum()
    }

    fn check_profiles(&self, strategies: &[BeliefProfile]) -> Result<()> {
        if strategies.len() != self.num_stage_pairs() {
            return Err(Error::Dimension(format!(
                "{} stage strategies for {} (state, stage) pairs",
                strategies.len(),
                self.num_stage_pairs()
            )));
        }
        for p in strategies {
            if p.teams().len() != self.structure.num_teams() {
                return Err(Error::Dimension("strategy profile has the wrong team count".into()));
            }
            for (m, v) in p.teams().iter().enumerate() {
                if v.len() != self.structure.joint_count(m) {
                    return Err(Error::Dimension(format!(
                        "strategy of team {m} has length {}, expected {}",
                        v.len(),
                        self.structure.joint_count(m)
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Optimal deterministic Markov deviation of one team.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// `U^m*`, the optimal expected cumulative potential.
    pub value: f64,
    /// Maximizing team joint action for every `(s, h)`, ties to the lowest index.
    pub strategy: Vec<usize>,
    /// `V_h(s)` indexed like `strategy`.
    pub values: Vec<f64>,
}

/// Backward induction for team `m` against the fixed Markov strategies of the
/// other teams in `strategies` (indexed by [`MarkovTeamGame::stage_index`]).
pub fn best_response_dp(mg: &MarkovTeamGame, strategies: &[BeliefProfile], m: usize) -> Result<BestResponse> {
    mg.structure.check_team(m)?;
    mg.check_profiles(strategies)?;
    let n = mg.joint_total;
    let h_len = mg.horizon;
    let mut values = vec![0.0; mg.num_stage_pairs()];
    let mut strategy = vec![0; mg.num_stage_pairs()];
    let mut q = vec![0.0; n];
    for h in (0..h_len).rev() {
        for s in 0..mg.num_states {
            for (a, slot) in q.iter_mut().enumerate() {
                let mut v = mg.phi(s, m, a);
                if h + 1 < h_len {
                    v += mg
                        .transition(s, a)
                        .iter()
                        .enumerate()
                        .map(|(next, p)| p * values[mg.stage_index(next, h + 1)])
                        .sum::<f64>();
                }
                *slot = v;
            }
            let idx = mg.stage_index(s, h);
            let terms = mg.opponent_terms(&strategies[idx], m);
            let mut best = (0, f64::NEG_INFINITY);
            for own in 0..mg.structure.joint_count(m) {
                let v = mg.expect_vs_opponents(&q, own, m, &terms);
                if v > best.1 {
                    best = (own, v);
                }
            }
            strategy[idx] = best.0;
            values[idx] = best.1;
        }
    }
    let value = (0..mg.num_states)
        .map(|s| mg.initial[s] * values[mg.stage_index(s, 0)])
        .sum();
    Ok(BestResponse { value, strategy, values })
}

/// `U^m(pi)` for every team, by rolling the state distribution forward.
pub fn policy_values(mg: &MarkovTeamGame, strategies: &[BeliefProfile]) -> Result<Vec<f64>> {
    mg.check_profiles(strategies)?;
    let t = mg.structure.num_teams();
    let n = mg.joint_total;
    let mut dist = mg.initial.clone();
    let mut totals = vec![0.0; t];
    let mut parts = vec![0; t];
    for h in 0..mg.horizon {
        let mut next = vec![0.0; mg.num_states];
        for s in 0..mg.num_states {
            if dist[s] == 0.0 {
                continue;
            }
            let profile = &strategies[mg.stage_index(s, h)];
            for a in 0..n {
                mg.split_into(a, &mut parts);
                let w: f64 = parts.iter().enumerate().map(|(m, &x)| profile.team(m)[x]).product();
                if w == 0.0 {
                    continue;
                }
                let mass = dist[s] * w;
                for (m, total) in totals.iter_mut().enumerate() {
                    *total += mass * mg.phi(s, m, a);
                }
                for (slot, p) in next.iter_mut().zip(mg.transition(s, a)) {
                    *slot += mass * p;
                }
            }
        }
        dist = next;
    }
    Ok(totals)
}

/// Team-Nash gap of a Markov strategy profile against deterministic Markov deviations.
pub fn mg_tng(mg: &MarkovTeamGame, strategies: &[BeliefProfile]) -> Result<TeamNashGap> {
    let current = policy_values(mg, strategies)?;
    let per_team = (0..mg.structure.num_teams())
        .map(|m| Ok(best_response_dp(mg, strategies, m)?.value - current[m]))
        .collect::<Result<Vec<f64>>>()?;
    let total = per_team.iter().sum();
    Ok(TeamNashGap { per_team, total })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKnowledge {
    /// Agents know `p` and `r` and back up expected continuation values.
    ModelBased,
    /// Agents see only the realized trajectory and rewards.
    ModelFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QInit {
    #[default]
    Zero,
    /// `Q^i(s, h, a) = r^i(s, a)` at every stage.
    Reward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgConfig {
    pub tau: f64,
    pub rule: UpdateRule,
    pub schedule: StepSchedule,
    pub knowledge: ModelKnowledge,
    pub q_init: QInit,
    pub seed: u64,
    pub episodes: u64,
    pub stride: u64,
}

impl Default for MgConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            rule: UpdateRule::Coordinated,
            schedule: StepSchedule::Harmonic,
            knowledge: ModelKnowledge::ModelBased,
            q_init: QInit::Zero,
            seed: 0,
            episodes: 10_000,
            stride: 100,
        }
    }
}

impl MgConfig {
    pub fn validate(&self) -> Result<()> {
        check_tau(self.tau)?;
        if let UpdateRule::Independent { delta } = self.rule {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
            }
        }
        if self.stride == 0 {
            return Err(Error::Parameter("stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// One realized stage of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub state: usize,
    /// Full joint action.
    pub action: usize,
}

/// Everything the agents carry across episodes.
#[derive(Debug, Clone)]
pub struct MgLearnerState {
    k: u64,
    /// Beliefs about every team at every `(s, h)`.
    beliefs: Vec<BeliefProfile>,
    /// Last team joint actions at every `(s, h)`.
    last: Vec<Vec<usize>>,
    /// `q[i][(s, h) * |A| + a]` by global agent id.
    q: Vec<Vec<f64>>,
    visits: Vec<u64>,
    action_visits: Vec<u64>,
    rng: SimRng,
}

impl MgLearnerState {
    pub fn new(mg: &MarkovTeamGame, config: &MgConfig) -> Result<Self> {
        config.validate()?;
        let pairs = mg.num_stage_pairs();
        let n = mg.joint_total;
        let q = (0..mg.structure.num_agents())
            .map(|i| {
                let mut table = vec![0.0; pairs * n];
                if config.q_init == QInit::Reward {
                    for s in 0..mg.num_states {
                        for h in 0..mg.horizon {
                            let base = mg.stage_index(s, h) * n;
                            for a in 0..n {
                                table[base + a] = mg.reward(s, i, a);
                            }
                        }
                    }
                }
                table
            })
            .collect();
        Ok(Self {
            k: 0,
            beliefs: vec![BeliefProfile::uniform(&mg.structure); pairs],
            last: vec![vec![0; mg.structure.num_teams()]; pairs],
            q,
            visits: vec![0; pairs],
            action_visits: vec![0; pairs * n],
            rng: rng_from_seed(config.seed),
        })
    }

    pub fn episodes(&self) -> u64 {
        self.k
    }

    /// Beliefs indexed by [`MarkovTeamGame::stage_index`]; also the strategy
    /// profile the gap is evaluated on.
    pub fn beliefs(&self) -> &[BeliefProfile] {
        &self.beliefs
    }

    pub fn last_actions(&self, stage_index: usize) -> &[usize] {
        &self.last[stage_index]
    }

    pub fn q(&self, agent: usize) -> &[f64] {
        &self.q[agent]
    }

    /// `c_k(s, h)`, visits strictly before the current episode.
    pub fn visits(&self) -> &[u64] {
        &self.visits
    }

    /// `c_k(s, h, a)`, indexed `(s, h) * |A| + a`.
    pub fn action_visits(&self) -> &[u64] {
        &self.action_visits
    }
}

fn sample_state(dist: &[f64], rng: &mut SimRng) -> usize {
    if dist.len() == 1 {
        0
    } else {
        sample_index(dist, rng)
    }
}

/// Plays one episode and applies the Team-FP belief and Q updates. Returns the
/// realized trajectory.
pub fn run_episode(mg: &MarkovTeamGame, st: &mut MgLearnerState, config: &MgConfig) -> Vec<Step> {
    let s_ = &mg.structure;
    let n = mg.joint_total;
    let teams = s_.num_teams();
    let mut trajectory = Vec::with_capacity(mg.horizon);
    let mut state = sample_state(&mg.initial, &mut st.rng);
    for h in 0..mg.horizon {
        let idx = mg.stage_index(state, h);
        let profile = &st.beliefs[idx];
        let q = &st.q;
        let terms: Vec<Vec<(usize, f64)>> = (0..teams).map(|m| mg.opponent_terms(profile, m)).collect();
        play_stage(s_, config.rule, 0..teams, &mut st.last[idx], config.tau, &mut st.rng, |m, j, prev, out| {
            let table = &q[s_.agent_id(m, j)][idx * n..(idx + 1) * n];
            out.clear();
            for x in 0..s_.action_count(m, j) {
                let own = s_.with_agent_action(m, prev, j, x);
                out.push(mg.expect_vs_opponents(table, own, m, &terms[m]));
            }
        });
        let action = mg.join(&st.last[idx]);
        trajectory.push(Step { state, action });
        if h + 1 < mg.horizon {
            state = sample_state(mg.transition(state, action), &mut st.rng);
        }
    }

    // v_k^i(s, h) at every pair, from the current Q, beliefs and own-team actions.
    let pairs = mg.num_stage_pairs();
    let agents = s_.num_agents();
    let mut v = vec![0.0; agents * pairs];
    for idx in 0..pairs {
        for m in 0..teams {
            let terms = mg.opponent_terms(&st.beliefs[idx], m);
            let own = st.last[idx][m];
            for j in 0..s_.team_size(m) {
                let i = s_.agent_id(m, j);
                v[i * pairs + idx] = mg.expect_vs_opponents(&st.q[i][idx * n..(idx + 1) * n], own, m, &terms);
            }
        }
    }

    for (h, step) in trajectory.iter().enumerate() {
        let idx = mg.stage_index(step.state, h);
        let alpha = config.schedule.alpha(st.visits[idx]);
        let last_stage = h + 1 == mg.horizon;
        match config.knowledge {
            ModelKnowledge::ModelBased => {
                for i in 0..agents {
                    let table = &mut st.q[i][idx * n..(idx + 1) * n];
                    for (a, entry) in table.iter_mut().enumerate() {
                        let mut target = mg.reward(step.state, i, a);
                        if !last_stage {
                            target += mg
                                .transition(step.state, a)
                                .iter()
                                .enumerate()
                                .map(|(next, p)| p * v[i * pairs + mg.stage_index(next, h + 1)])
                                .sum::<f64>();
                        }
                        *entry += alpha * (target - *entry);
                    }
                }
            }
            ModelKnowledge::ModelFree => {
                let slot = idx * n + step.action;
                let alpha_a = config.schedule.alpha(st.action_visits[slot]);
                for i in 0..agents {
                    let mut target = mg.reward(step.state, i, step.action);
                    if !last_stage {
                        let next = trajectory[h + 1].state;
                        target += v[i * pairs + mg.stage_index(next, h + 1)];
                    }
                    let entry = &mut st.q[i][slot];
                    *entry += alpha_a * (target - *entry);
                }
                st.action_visits[slot] += 1;
            }
        }
        if teams > 1 {
            for m in 0..teams {
                let observed = st.last[idx][m];
                st.beliefs[idx]
                    .update(m, observed, alpha)
                    .expect("schedule validated to stay in [0, 1]");
            }
        }
        st.visits[idx] += 1;
    }
    st.k += 1;
    trajectory
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgMetricsRow {
    pub episode: u64,
    pub tng_team: Vec<f64>,
    pub tng_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgRunRecord {
    pub trial: usize,
    pub seed: u64,
    pub rows: Vec<MgMetricsRow>,
}

/// Runs `config.episodes` episodes, sampling the Markov-game gap of the
/// current beliefs at episode 0, every `stride` episodes and at the end.
pub fn run_mg(mg: &MarkovTeamGame, config: &MgConfig) -> Result<MgRunRecord> {
    let mut st = MgLearnerState::new(mg, config)?;
    let sample = |st: &MgLearnerState| -> Result<MgMetricsRow> {
        let gap = mg_tng(mg, &st.beliefs)?;
        Ok(MgMetricsRow {
            episode: st.k,
            tng_team: gap.per_team,
            tng_total: gap.total,
        })
    };
    let mut rows = vec![sample(&st)?];
    while st.k < config.episodes {
        run_episode(mg, &mut st, config);
        if st.k % config.stride == 0 || st.k == config.episodes {
            rows.push(sample(&st)?);
        }
    }
    Ok(MgRunRecord {
        trial: 0,
        seed: config.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Matrix;

    /// Two states, one binary agent per team, deterministic cycle 0 -> 1 -> 0.
    fn cycle_game(horizon: usize) -> MarkovTeamGame {
        let s = TeamStructure::new(vec![vec![2], vec![2]]).unwrap();
        let stage = |scale: f64| {
            let phi = Matrix::new(2, 2, vec![scale, -scale, 0.5 * scale, 2.0 * scale]).unwrap();
            MultiTeamGame::new(s.clone(), vec![(0, 1, phi.clone()), (1, 0, phi.transpose().neg())]).unwrap()
        };
        let kernel = vec![vec![vec![0.0, 1.0]; 4], vec![vec![1.0, 0.0]; 4]];
        MarkovTeamGame::new(horizon, vec![1.0, 0.0], kernel, vec![stage(1.0), stage(3.0)]).unwrap()
    }

    #[test]
    fn rejects_bad_models() {
        let mg = cycle_game(2);
        let stages = mg.stages().to_vec();
        let kernel = vec![vec![vec![0.0, 1.0]; 4], vec![vec![1.0, 0.0]; 4]];
        assert!(MarkovTeamGame::new(0, vec![1.0, 0.0], kernel.clone(), stages.clone()).is_err());
        assert!(MarkovTeamGame::new(2, vec![0.6, 0.6], kernel.clone(), stages.clone()).is_err());
        let mut bad = kernel.clone();
        bad[0][1] = vec![0.5, 0.6];
        assert!(MarkovTeamGame::new(2, vec![1.0, 0.0], bad, stages.clone()).is_err());
        assert!(MarkovTeamGame::new(2, vec![1.0, 0.0], kernel[..1].to_vec(), stages).is_err());
    }

    #[test]
    fn joint_indexing_is_team_major() {
        let mg = cycle_game(2);
        assert_eq!(mg.join(&[1, 0]), 1);
        assert_eq!(mg.join(&[0, 1]), 2);
        let mut parts = [0; 2];
        mg.split_into(3, &mut parts);
        assert_eq!(parts, [1, 1]);
        assert_eq!(mg.phi(1, 0, mg.join(&[1, 1])), 6.0);
        assert_eq!(mg.phi(1, 1, mg.join(&[1, 1])), -6.0);
    }

    #[test]
    fn single_stage_best_response_matches_stage_gap() {
        let mg = cycle_game(1);
        let profile = BeliefProfile::from_vectors(mg.structure(), vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let strategies = vec![profile.clone(), profile.clone()];
        let br = best_response_dp(&mg, &strategies, 0).unwrap();
        let b = mg.stage(0).team_values(0, profile.teams()).unwrap();
        assert!((br.value - b.iter().cloned().fold(f64::MIN, f64::max)).abs() < 1e-12);
        let gap = mg_tng(&mg, &strategies).unwrap();
        let stage_gap = crate::metrics::tng(mg.stage(0), &profile).unwrap();
        for m in 0..2 {
            assert!((gap.per_team[m] - stage_gap.per_team[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn model_based_update_moves_toward_backup() {
        let mg = cycle_game(2);
        let config = MgConfig { episodes: 1, ..Default::default() };
        let mut st = MgLearnerState::new(&mg, &config).unwrap();
        let traj = run_episode(&mg, &mut st, &config);
        assert_eq!(traj.iter().map(|s| s.state).collect::<Vec<_>>(), vec![0, 1]);
        // Q starts at zero so v = 0 and the first (alpha_0 = 1) update copies r.
        let n = mg.joint_total();
        for a in 0..n {
            assert_eq!(st.q(0)[mg.stage_index(0, 0) * n + a], mg.reward(0, 0, a));
            assert_eq!(st.q(0)[mg.stage_index(1, 1) * n + a], mg.reward(1, 0, a));
        }
        assert!(st.q(0)[mg.stage_index(1, 0) * n..(mg.stage_index(1, 0) + 1) * n].iter().all(|&x| x == 0.0));

        // Second episode: (0, 0) backs up r(0, a) + v(1, 1) with alpha_1 = 1/2.
        let before = st.q(0).to_vec();
        let idx11 = mg.stage_index(1, 1);
        let profile = st.beliefs()[idx11].clone();
        let own = st.last_actions(idx11)[0];
        let v11: f64 = (0..2).map(|y| before[idx11 * n + mg.join(&[own, y])] * profile.team(1)[y]).sum();
        run_episode(&mg, &mut st, &config);
        for a in 0..n {
            let q0 = before[a];
            let expected = q0 + 0.5 * (mg.reward(0, 0, a) + v11 - q0);
            assert!((st.q(0)[a] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_keep_zero_q() {
        let s = TeamStructure::new(vec![vec![2, 2], vec![2]]).unwrap();
        let zero = MultiTeamGame::zero(s);
        let mg = MarkovTeamGame::new(3, vec![0.5, 0.5], vec![vec![vec![0.5, 0.5]; 8]; 2], vec![zero.clone(), zero])
            .unwrap();
        for knowledge in [ModelKnowledge::ModelBased, ModelKnowledge::ModelFree] {
            let config = MgConfig { knowledge, episodes: 50, stride: 10, ..Default::default() };
            let mut st = MgLearnerState::new(&mg, &config).unwrap();
            for _ in 0..50 {
                run_episode(&mg, &mut st, &config);
            }
            assert!(st.q.iter().flatten().all(|&x| x == 0.0));
            let record = run_mg(&mg, &config).unwrap();
            assert!(record.rows.iter().all(|r| r.tng_total.abs() < 1e-12));
        }
    }

    #[test]
    fn model_free_unvisited_entries_keep_initialization() {
        let mg = cycle_game(2);
        let config = MgConfig {
            knowledge: ModelKnowledge::ModelFree,
            q_init: QInit::Reward,
            ..Default::default()
        };
        let mut st = MgLearnerState::new(&mg, &config).unwrap();
        let init = st.q(0).to_vec();
        let traj = run_episode(&mg, &mut st, &config);
        let n = mg.joint_total();
        for (h, step) in traj.iter().enumerate() {
            let idx = mg.stage_index(step.state, h);
            for a in 0..n {
                if a != step.action {
                    assert_eq!(st.q(0)[idx * n + a], init[idx * n + a]);
                }
            }
        }
        // State 1 is never visited at stage 0.
        let idx10 = mg.stage_index(1, 0);
        assert_eq!(&st.q(0)[idx10 * n..(idx10 + 1) * n], &init[idx10 * n..(idx10 + 1) * n]);
    }
}
