//! Seeded generators for the experiment families.
//!
//! Every generator draws from one ChaCha stream seeded with the given seed, so
//! outputs are reproducible across platforms.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{rng_from_seed, SimRng};
use crate::error::{Error, Result};
use crate::game::{AgentPayoff, Matrix, MultiTeamGame, TeamStructure};
use crate::markov::MarkovTeamGame;

pub const DEFAULT_RANGE: (f64, f64) = (-1.0, 1.0);

fn uniform_in(rng: &mut SimRng, (low, high): (f64, f64)) -> f64 {
    low + (high - low) * rng.gen::<f64>()
}

fn random_matrix(rng: &mut SimRng, rows: usize, cols: usize, range: (f64, f64)) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| uniform_in(rng, range))
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0.is_finite() && range.1.is_finite() && range.0 <= range.1) {
        return Err(Error::Parameter(format!("invalid entry range [{}, {}]", range.0, range.1)));
    }
    Ok(())
}

/// Index of team joint action `r` with agent `j`'s coordinate removed.
fn without_agent(s: &TeamStructure, m: usize, r: usize, j: usize) -> usize {
    let mut idx = 0;
    let mut radix = 1;
    for (k, x) in s.decode(m, r).into_iter().enumerate() {
        if k != j {
            idx += x * radix;
            radix *= s.action_count(m, k);
        }
    }
    idx
}

fn zsptg_with(rng: &mut SimRng, s: &TeamStructure, range: (f64, f64), dummy: bool) -> Result<MultiTeamGame> {
    check_range(range)?;
    let t = s.num_teams();
    let mut tables = Vec::with_capacity(t * t.saturating_sub(1));
    for m in 0..t {
        for l in m + 1..t {
            let phi = random_matrix(rng, s.joint_count(m), s.joint_count(l), range);
            tables.push((l, m, phi.transpose().neg()));
            tables.push((m, l, phi));
        }
    }
    let game = MultiTeamGame::new(s.clone(), tables)?;
    if !dummy || t < 2 {
        return Ok(game);
    }
    // u^{il} = Phi^{ml} + d^{il} where d^{il} ignores agent i's own action. The
    // T - 1 tables are scaled so the summed term stays in [-1, 1].
    let scale = 1.0 / (t - 1) as f64;
    let mut payoffs = Vec::with_capacity(s.num_agents());
    for m in 0..t {
        for j in 0..s.team_size(m) {
            let others = s.joint_count(m) / s.action_count(m, j);
            let tables = (0..t)
                .map(|l| {
                    if l == m {
                        return None;
                    }
                    let base = game.potential(m, l).expect("every pair is drawn");
                    let d = random_matrix(rng, others, s.joint_count(l), (-scale, scale));
                    Some(Matrix::from_fn(base.rows(), base.cols(), |r, c| {
                        base.get(r, c) + d.get(without_agent(s, m, r, j), c)
                    }))
                })
                .collect();
            payoffs.push(AgentPayoff { tables });
        }
    }
    game.with_payoffs(payoffs)
}

/// Random zero-sum potential team game with i.i.d. uniform pairwise tables.
///
/// With `dummy`, every agent's payoff is its team potential plus a term in
/// `[-1, 1]` that does not depend on the agent's own action.
pub fn random_zsptg(structure: &TeamStructure, range: (f64, f64), dummy: bool, seed: u64) -> Result<MultiTeamGame> {
    zsptg_with(&mut rng_from_seed(seed), structure, range, dummy)
}

/// One undirected interaction with both endpoints' local payoff terms.
///
/// `forward[x_a][x_b]` is agent `a`'s term, `backward[x_b][x_a]` agent `b`'s.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub forward: Matrix,
    pub backward: Matrix,
}

/// Agents (global ids) on a graph. The local payoff of agent `i` is the sum of
/// its terms over incident edges, so it depends on neighbors' actions only.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub structure: TeamStructure,
    pub edges: Vec<Edge>,
}

impl Network {
    fn check(&self) -> Result<()> {
        let s = &self.structure;
        let n = s.num_agents();
        let actions = |i: usize| {
            let (m, j) = s.locate(i).expect("checked");
            s.action_count(m, j)
        };
        for e in &self.edges {
            if e.a >= n || e.b >= n || e.a == e.b {
                return Err(Error::Structure(format!("edge ({}, {}) does not join two agents", e.a, e.b)));
            }
            let (ra, rb) = (actions(e.a), actions(e.b));
            if (e.forward.rows(), e.forward.cols()) != (ra, rb) || (e.backward.rows(), e.backward.cols()) != (rb, ra) {
                return Err(Error::Dimension(format!("local payoff tables of edge ({}, {}) have the wrong shape", e.a, e.b)));
            }
        }
        Ok(())
    }

    /// Sum of agent `i`'s incident terms at a profile of per-agent actions.
    fn local(&self, i: usize, actions: &[usize]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                if e.a == i {
                    e.forward.get(actions[e.a], actions[e.b])
                } else if e.b == i {
                    e.backward.get(actions[e.b], actions[e.a])
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Compiles a networked game into pairwise team potentials.
///
/// For two teams, `phi^m` is the sum of team `m`'s local payoffs minus the
/// opponents', and agent `i` earns the signed local payoffs of its closed
/// neighborhood. For more teams, each cross-team edge enters only the table of
/// the pair it joins, an intra-team edge is split evenly over the team's
/// `T - 1` pairs, and agents' payoffs are the team potential.
pub fn networked_game(net: &Network) -> Result<MultiTeamGame> {
    net.check()?;
    let s = &net.structure;
    let t = s.num_teams();
    if t == 2 {
        return two_team_network(net);
    }
    let mut tables: Vec<Option<Matrix>> = vec![None; t * t];
    let loc = |i: usize| s.locate(i).expect("checked");
    for e in &net.edges {
        let ((ma, ja), (mb, jb)) = (loc(e.a), loc(e.b));
        if ma != mb {
            let table = tables[ma * t + mb].get_or_insert_with(|| Matrix::zeros(s.joint_count(ma), s.joint_count(mb)));
            for r in 0..s.joint_count(ma) {
                let xa = s.agent_action(ma, r, ja);
                for c in 0..s.joint_count(mb) {
                    let xb = s.agent_action(mb, c, jb);
                    table.add_to(r, c, e.forward.get(xa, xb) - e.backward.get(xb, xa));
                }
            }
        } else if t > 1 {
            let share = 1.0 / (t - 1) as f64;
            for l in (0..t).filter(|&l| l != ma) {
                let table = tables[ma * t + l].get_or_insert_with(|| Matrix::zeros(s.joint_count(ma), s.joint_count(l)));
                for r in 0..s.joint_count(ma) {
                    let (xa, xb) = (s.agent_action(ma, r, ja), s.agent_action(ma, r, jb));
                    let v = share * (e.forward.get(xa, xb) + e.backward.get(xb, xa));
                    for c in 0..s.joint_count(l) {
                        table.add_to(r, c, v);
                    }
                }
            }
        }
    }
    // Mirror every (m, l), m < l, into (l, m) with the opposite sign.
    let mut out = Vec::new();
    for m in 0..t {
        for l in m + 1..t {
            let upper = tables[m * t + l].take();
            let lower = tables[l * t + m].take();
            let phi = match (upper, lower) {
                (None, None) => continue,
                (Some(u), None) => u,
                (None, Some(w)) => w.transpose().neg(),
                (Some(u), Some(w)) => {
                    let wt = w.transpose();
                    Matrix::from_fn(u.rows(), u.cols(), |r, c| u.get(r, c) - wt.get(r, c))
                }
            };
            out.push((l, m, phi.transpose().neg()));
            out.push((m, l, phi));
        }
    }
    MultiTeamGame::new(s.clone(), out)
}

fn two_team_network(net: &Network) -> Result<MultiTeamGame> {
    let s = &net.structure;
    let n = s.num_agents();
    let (rows, cols) = (s.joint_count(0), s.joint_count(1));
    let team_of: Vec<usize> = (0..n).map(|i| s.locate(i).expect("in range").0).collect();
    let mut neighbors = vec![vec![false; n]; n];
    for (i, row) in neighbors.iter_mut().enumerate() {
        row[i] = true;
    }
    for e in &net.edges {
        neighbors[e.a][e.b] = true;
        neighbors[e.b][e.a] = true;
    }
    let mut phi = Matrix::zeros(rows, cols);
    let mut agent_tables: Vec<Matrix> = (0..n).map(|i| Matrix::zeros(s.joint_count(team_of[i]), s.joint_count(1 - team_of[i]))).collect();
    let mut actions = vec![0; n];
    let mut local = vec![0.0; n];
    for r in 0..rows {
        for c in 0..cols {
            for (m, idx) in [(0, r), (1, c)] {
                for (j, x) in s.decode(m, idx).into_iter().enumerate() {
                    actions[s.agent_id(m, j)] = x;
                }
            }
            for (i, v) in local.iter_mut().enumerate() {
                *v = net.local(i, &actions);
            }
            let value: f64 = (0..n).map(|i| if team_of[i] == 0 { local[i] } else { -local[i] }).sum();
            phi.set(r, c, value);
            for i in 0..n {
                let u: f64 = (0..n)
                    .filter(|&k| neighbors[i][k])
                    .map(|k| if team_of[k] == team_of[i] { local[k] } else { -local[k] })
                    .sum();
                if team_of[i] == 0 {
                    agent_tables[i].set(r, c, u);
                } else {
                    agent_tables[i].set(c, r, u);
                }
            }
        }
    }
    let payoffs = agent_tables
        .into_iter()
        .enumerate()
        .map(|(i, table)| {
            let mut tables = vec![None, None];
            tables[1 - team_of[i]] = Some(table);
            AgentPayoff { tables }
        })
        .collect();
    MultiTeamGame::new(s.clone(), vec![(1, 0, phi.transpose().neg()), (0, 1, phi)])?.with_payoffs(payoffs)
}

/// Random graph where each pair of agents is joined with probability
/// `edge_prob`, with local payoff terms uniform in `range`.
pub fn random_network(structure: &TeamStructure, edge_prob: f64, range: (f64, f64), seed: u64) -> Result<Network> {
    check_range(range)?;
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Parameter(format!("edge probability {edge_prob} outside [0, 1]")));
    }
    let mut rng = rng_from_seed(seed);
    let n = structure.num_agents();
    let actions: Vec<usize> = (0..n)
        .map(|i| {
            let (m, j) = structure.locate(i).expect("in range");
            structure.action_count(m, j)
        })
        .collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen::<f64>() < edge_prob {
                let forward = random_matrix(&mut rng, actions[a], actions[b], range);
                let backward = random_matrix(&mut rng, actions[b], actions[a], range);
                edges.push(Edge { a, b, forward, backward });
            }
        }
    }
    Ok(Network { structure: structure.clone(), edges })
}

/// Edge probability of the sparse large-scale network.
pub const LARGE_NETWORK_EDGE_PROB: f64 = 0.1;

/// Three teams of nine binary agents on a sparse random graph.
pub fn large_network(seed: u64) -> Result<MultiTeamGame> {
    let s = TeamStructure::uniform(3, 9, 2)?;
    networked_game(&random_network(&s, LARGE_NETWORK_EDGE_PROB, DEFAULT_RANGE, seed)?)
}

/// Airport security game. Team 0 is the chief with `gates + 1` actions
/// (action 0 defends nothing, `g` defends gate `g`); team 1 holds the
/// intruders, each with `gates + 1` actions (0 is idle).
///
/// Intruder `i` earns `g_i = +1` on an undefended gate, `-1` on the defended
/// one and 0 when idle. The attackers' potential is `sum_i g_i` plus the cost
/// `c` whenever the chief defends, the chief's is its negation.
pub fn airport_game(gates: usize, intruders: usize, cost: f64) -> Result<MultiTeamGame> {
    if gates == 0 || intruders == 0 || !(cost >= 0.0 && cost.is_finite()) {
        return Err(Error::Parameter("airport game needs gates >= 1, intruders >= 1, cost >= 0".into()));
    }
    let s = TeamStructure::new(vec![vec![gates + 1], vec![gates + 1; intruders]])?;
    let gain = |attack: usize, defend: usize| match (attack, defend) {
        (0, _) => 0.0,
        (a, d) if a == d => -1.0,
        _ => 1.0,
    };
    let attackers = s.joint_count(1);
    let chief = s.joint_count(0);
    let phi_attack = Matrix::from_fn(attackers, chief, |r, d| {
        let total: f64 = s.decode(1, r).into_iter().map(|a| gain(a, d)).sum();
        total + if d == 0 { 0.0 } else { cost }
    });
    let phi_chief = phi_attack.transpose().neg();
    let mut payoffs = vec![AgentPayoff { tables: vec![None, Some(phi_chief.clone())] }];
    for j in 0..intruders {
        let table = Matrix::from_fn(attackers, chief, |r, d| gain(s.agent_action(1, r, j), d));
        payoffs.push(AgentPayoff { tables: vec![Some(table), None] });
    }
    MultiTeamGame::new(s, vec![(0, 1, phi_chief), (1, 0, phi_attack)])?.with_payoffs(payoffs)
}

/// General-sum game: a single two-action agent with a random reward table
/// against three binary agents sharing a random potential.
pub fn two_by_n_game(range: (f64, f64), seed: u64) -> Result<MultiTeamGame> {
    check_range(range)?;
    let mut rng = rng_from_seed(seed);
    let s = TeamStructure::new(vec![vec![2], vec![2, 2, 2]])?;
    let single = random_matrix(&mut rng, 2, 8, range);
    let team = random_matrix(&mut rng, 8, 2, range);
    Ok(MultiTeamGame::new(s, vec![(0, 1, single), (1, 0, team)])?.with_zero_sum(false))
}

/// Two teams of four binary agents with one shared random potential.
pub fn potential_of_potentials(range: (f64, f64), seed: u64) -> Result<MultiTeamGame> {
    check_range(range)?;
    let mut rng = rng_from_seed(seed);
    let s = TeamStructure::uniform(2, 4, 2)?;
    let p = random_matrix(&mut rng, 16, 16, range);
    Ok(MultiTeamGame::new(s, vec![(1, 0, p.transpose()), (0, 1, p)])?.with_zero_sum(false))
}

/// Markov game with random zero-sum stage games, kernel rows drawn from the
/// flat Dirichlet distribution and a uniform initial state.
pub fn random_mg(structure: &TeamStructure, states: usize, horizon: usize, seed: u64) -> Result<MarkovTeamGame> {
    if states == 0 {
        return Err(Error::Parameter("at least one state is required".into()));
    }
    let mut rng = rng_from_seed(seed);
    let stages = (0..states)
        .map(|_| zsptg_with(&mut rng, structure, DEFAULT_RANGE, false))
        .collect::<Result<Vec<_>>>()?;
    let joint: usize = structure.joint_counts().iter().product();
    let kernel = (0..states)
        .map(|_| {
            (0..joint)
                .map(|_| {
                    let w: Vec<f64> = (0..states).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                    let total: f64 = w.iter().sum();
                    w.into_iter().map(|x| x / total).collect()
                })
                .collect()
        })
        .collect();
    MarkovTeamGame::new(horizon, vec![1.0 / states as f64; states], kernel, stages)
}

fn default_range() -> (f64, f64) {
    DEFAULT_RANGE
}

fn default_edge_prob() -> f64 {
    LARGE_NETWORK_EDGE_PROB
}

fn default_gates() -> usize {
    6
}

fn default_intruders() -> usize {
    3
}

fn default_cost() -> f64 {
    0.2
}

/// Serializable description of a generated game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenSpec {
    RandomZsptg {
        teams: usize,
        agents: usize,
        actions: usize,
        #[serde(default = "default_range")]
        range: (f64, f64),
        #[serde(default)]
        dummy: bool,
        seed: u64,
    },
    Networked {
        teams: usize,
        agents: usize,
        actions: usize,
        edge_prob: f64,
        #[serde(default = "default_range")]
        range: (f64, f64),
        seed: u64,
    },
    LargeNetwork {
        #[serde(default = "default_edge_prob")]
        edge_prob: f64,
        seed: u64,
    },
    Airport {
        #[serde(default = "default_gates")]
        gates: usize,
        #[serde(default = "default_intruders")]
        intruders: usize,
        #[serde(default = "default_cost")]
        cost: f64,
    },
    TwoByN {
        #[serde(default = "default_range")]
        range: (f64, f64),
        seed: u64,
    },
    PotentialOfPotentials {
        #[serde(default = "default_range")]
        range: (f64, f64),
        seed: u64,
    },
    RandomMg {
        teams: usize,
        agents: usize,
        actions: usize,
        states: usize,
        horizon: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub enum Generated {
    Game(MultiTeamGame),
    Markov(MarkovTeamGame),
}

impl GenSpec {
    pub fn build(&self) -> Result<Generated> {
        Ok(match *self {
            GenSpec::RandomZsptg { teams, agents, actions, range, dummy, seed } => {
                Generated::Game(random_zsptg(&TeamStructure::uniform(teams, agents, actions)?, range, dummy, seed)?)
            }
            GenSpec::Networked { teams, agents, actions, edge_prob, range, seed } => {
                let s = TeamStructure::uniform(teams, agents, actions)?;
                Generated::Game(networked_game(&random_network(&s, edge_prob, range, seed)?)?)
            }
            GenSpec::LargeNetwork { edge_prob, seed } => {
                let s = TeamStructure::uniform(3, 9, 2)?;
                Generated::Game(networked_game(&random_network(&s, edge_prob, DEFAULT_RANGE, seed)?)?)
            }
            GenSpec::Airport { gates, intruders, cost } => Generated::Game(airport_game(gates, intruders, cost)?),
            GenSpec::TwoByN { range, seed } => Generated::Game(two_by_n_game(range, seed)?),
            GenSpec::PotentialOfPotentials { range, seed } => Generated::Game(potential_of_potentials(range, seed)?),
            GenSpec::RandomMg { teams, agents, actions, states, horizon, seed } => {
                Generated::Markov(random_mg(&TeamStructure::uniform(teams, agents, actions)?, states, horizon, seed)?)
            }
        })
    }

    /// Builds a normal-form game, rejecting Markov families.
    pub fn build_game(&self) -> Result<MultiTeamGame> {
        match self.build()? {
            Generated::Game(g) => Ok(g),
            Generated::Markov(_) => Err(Error::Parameter("this family generates a Markov game".into())),
        }
    }

    pub fn build_markov(&self) -> Result<MarkovTeamGame> {
        match self.build()? {
            Generated::Markov(g) => Ok(g),
            Generated::Game(_) => Err(Error::Parameter("this family generates a normal-form game".into())),
        }
    }
}
