//! Multi-team games with pairwise-separable team potentials.
//!
//! Team `m`'s potential is `phi^m(a) = sum_{l != m} Phi^{ml}[a^m, a^l]`, stored as
//! one dense matrix per ordered team pair. Agent payoffs are optional; when they
//! are absent every member of team `m` is paid `phi^m`.

mod coarsen;
mod matrix;
mod structure;
mod validate;

pub use coarsen::{coarsen_game, CoarsenedGame};
pub use matrix::Matrix;
pub use structure::TeamStructure;
pub use validate::{
    validate_potential, validate_potential_with_cap, validate_zero_sum, validate_zero_sum_with_cap,
    zero_sum_pointwise, CheckMethod, ValidationReport, Violation, DEFAULT_VALIDATION_CAP,
    VALIDATION_TOLERANCE,
};

use crate::error::{Error, Result};

/// Which tables drive an agent's payoff evaluation.
///
/// Smoothed best responses are identical under both choices on a valid potential
/// team game, since the two payoff vectors differ by a term constant in the
/// agent's own action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PayoffSource {
    /// Use per-agent payoff tables when the game carries them.
    #[default]
    Agent,
    /// Always use the team potential.
    Potential,
}

/// Payoff tables `u^{il}` of one agent, indexed by opponent team `l`.
///
/// The entry for the agent's own team is ignored; `None` means an all-zero table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPayoff {
    pub tables: Vec<Option<Matrix>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiTeamGame {
    structure: TeamStructure,
    /// `potentials[m * T + l]`, `None` on the diagonal and for all-zero pairs.
    potentials: Vec<Option<Matrix>>,
    /// One entry per global agent id.
    payoffs: Option<Vec<AgentPayoff>>,
    zero_sum: bool,
}

impl MultiTeamGame {
    /// Builds a game from `(m, l, Phi^{ml})` triples. Pairs not listed are zero.
    pub fn new(structure: TeamStructure, potentials: Vec<(usize, usize, Matrix)>) -> Result<Self> {
        let t = structure.num_teams();
        let mut slots: Vec<Option<Matrix>> = vec![None; t * t];
        for (m, l, table) in potentials {
            structure.check_team(m)?;
            structure.check_team(l)?;
            if m == l {
                return Err(Error::Dimension(format!(
                    "potential table for team {m} against itself"
                )));
            }
            check_table(&structure, m, l, &table)?;
            slots[m * t + l] = Some(table);
        }
        Ok(Self {
            structure,
            potentials: slots,
            payoffs: None,
            zero_sum: true,
        })
    }

    /// All-zero game over `structure`.
    pub fn zero(structure: TeamStructure) -> Self {
        let t = structure.num_teams();
        Self {
            structure,
            potentials: vec![None; t * t],
            payoffs: None,
            zero_sum: true,
        }
    }

    /// Attaches per-agent payoff tables, one entry per global agent id.
    pub fn with_payoffs(mut self, payoffs: Vec<AgentPayoff>) -> Result<Self> {
        let s = &self.structure;
        if payoffs.len() != s.num_agents() {
            return Err(Error::Dimension(format!(
                "{} payoff entries for {} agents",
                payoffs.len(),
                s.num_agents()
            )));
        }
        for (agent, payoff) in payoffs.iter().enumerate() {
            let (m, _) = s.locate(agent).expect("agent id in range");
            if payoff.tables.len() != s.num_teams() {
                return Err(Error::Dimension(format!(
                    "agent {agent} has {} payoff tables for {} teams",
                    payoff.tables.len(),
                    s.num_teams()
                )));
            }
            for (l, table) in payoff.tables.iter().enumerate() {
                if let Some(table) = table {
                    if l == m {
                        return Err(Error::Dimension(format!(
                            "agent {agent} has a payoff table against its own team"
                        )));
                    }
                    check_table(s, m, l, table)?;
                }
            }
        }
        self.payoffs = Some(payoffs);
        Ok(self)
    }

    /// Declares whether the game is meant to be zero-sum across teams.
    pub fn with_zero_sum(mut self, zero_sum: bool) -> Self {
        self.zero_sum = zero_sum;
        self
    }

    pub fn structure(&self) -> &TeamStructure {
        &self.structure
    }

    pub fn num_teams(&self) -> usize {
        self.structure.num_teams()
    }

    pub fn is_declared_zero_sum(&self) -> bool {
        self.zero_sum
    }

    pub fn payoffs(&self) -> Option<&[AgentPayoff]> {
        self.payoffs.as_deref()
    }

    /// `Phi^{ml}`, or `None` when the pair is all-zero.
    pub fn potential(&self, m: usize, l: usize) -> Option<&Matrix> {
        self.potentials[m * self.num_teams() + l].as_ref()
    }

    /// Table used for agent `j` of team `m` against team `l` under `source`.
    pub fn payoff_table(&self, m: usize, j: usize, l: usize, source: PayoffSource) -> Option<&Matrix> {
        match (&self.payoffs, source) {
            (Some(payoffs), PayoffSource::Agent) => {
                payoffs[self.structure.agent_id(m, j)].tables[l].as_ref()
            }
            _ => self.potential(m, l),
        }
    }

    /// `max |Phi^{ml}(a)|` over all pairs and entries.
    pub fn phi_bar(&self) -> f64 {
        self.potentials
            .iter()
            .flatten()
            .map(Matrix::max_abs)
            .fold(0.0, f64::max)
    }

    fn check_joint_profile(&self, joint: &[usize]) -> Result<()> {
        if joint.len() != self.num_teams() {
            return Err(Error::Dimension(format!(
                "{} team actions for {} teams",
                joint.len(),
                self.num_teams()
            )));
        }
        for (m, &x) in joint.iter().enumerate() {
            self.structure.check_joint(m, x)?;
        }
        Ok(())
    }

    /// `phi^m(a)` at a pure profile given as one joint-action index per team.
    pub fn phi(&self, m: usize, joint: &[usize]) -> Result<f64> {
        self.structure.check_team(m)?;
        self.check_joint_profile(joint)?;
        Ok(self.phi_unchecked(m, joint))
    }

    pub(crate) fn phi_unchecked(&self, m: usize, joint: &[usize]) -> f64 {
        (0..self.num_teams())
            .filter(|&l| l != m)
            .filter_map(|l| self.potential(m, l).map(|t| t.get(joint[m], joint[l])))
            .sum()
    }

    /// `u^i(a)` for agent `j` of team `m` at a pure profile.
    pub fn utility(&self, m: usize, j: usize, joint: &[usize]) -> Result<f64> {
        self.check_joint_profile(joint)?;
        Ok(self.utility_unchecked(m, j, joint))
    }

    pub(crate) fn utility_unchecked(&self, m: usize, j: usize, joint: &[usize]) -> f64 {
        (0..self.num_teams())
            .filter(|&l| l != m)
            .filter_map(|l| {
                self.payoff_table(m, j, l, PayoffSource::Agent)
                    .map(|t| t.get(joint[m], joint[l]))
            })
            .sum()
    }

    fn check_beliefs(&self, m: usize, beliefs: &[Vec<f64>]) -> Result<()> {
        if beliefs.len() != self.num_teams() {
            return Err(Error::Dimension(format!(
                "{} belief vectors for {} teams",
                beliefs.len(),
                self.num_teams()
            )));
        }
        for (l, b) in beliefs.iter().enumerate() {
            if l != m && b.len() != self.structure.joint_count(l) {
                return Err(Error::Dimension(format!(
                    "belief about team {l} has length {}, expected {}",
                    b.len(),
                    self.structure.joint_count(l)
                )));
            }
        }
        Ok(())
    }

    /// `phi^m(a^m, pi^{-m})` for a single own joint action. The entry of
    /// `beliefs` at position `m` is ignored.
    pub fn phi_vs_beliefs(&self, m: usize, own: usize, beliefs: &[Vec<f64>]) -> Result<f64> {
        self.structure.check_joint(m, own)?;
        self.check_beliefs(m, beliefs)?;
        Ok((0..self.num_teams())
            .filter(|&l| l != m)
            .filter_map(|l| self.potential(m, l).map(|t| t.row_dot(own, &beliefs[l])))
            .sum())
    }

    /// `b^m = sum_{l != m} Phi^{ml} pi^l`, the potential of every own joint
    /// action against the other teams' beliefs.
    pub fn team_values(&self, m: usize, beliefs: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.structure.check_team(m)?;
        self.check_beliefs(m, beliefs)?;
        Ok(self.team_values_unchecked(m, beliefs))
    }

    pub(crate) fn team_values_unchecked(&self, m: usize, beliefs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.structure.joint_count(m)];
        for l in (0..self.num_teams()).filter(|&l| l != m) {
            if let Some(t) = self.potential(m, l) {
                t.mul_vec_add(&beliefs[l], &mut out);
            }
        }
        out
    }

    /// Same as [`team_values`](Self::team_values) but through agent `j`'s payoff
    /// tables under `source`.
    pub(crate) fn agent_team_values(
        &self,
        m: usize,
        j: usize,
        beliefs: &[Vec<f64>],
        source: PayoffSource,
    ) -> Vec<f64> {
        let mut out = vec![0.0; self.structure.joint_count(m)];
        for l in (0..self.num_teams()).filter(|&l| l != m) {
            if let Some(t) = self.payoff_table(m, j, l, source) {
                t.mul_vec_add(&beliefs[l], &mut out);
            }
        }
        out
    }

    /// `u^i(., a^{-i}, pi^{-m})` over agent `j`'s actions, with teammates fixed
    /// at their actions in `last` (team `m`'s joint index).
    pub fn agent_payoff_vs(
        &self,
        m: usize,
        j: usize,
        last: usize,
        beliefs: &[Vec<f64>],
        source: PayoffSource,
    ) -> Result<Vec<f64>> {
        self.structure.check_joint(m, last)?;
        if j >= self.structure.team_size(m) {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: j,
                size: self.structure.team_size(m),
            });
        }
        self.check_beliefs(m, beliefs)?;
        let mut out = Vec::new();
        self.agent_payoff_into(m, j, last, beliefs, source, &mut out);
        Ok(out)
    }

    pub(crate) fn agent_payoff_into(
        &self,
        m: usize,
        j: usize,
        last: usize,
        beliefs: &[Vec<f64>],
        source: PayoffSource,
        out: &mut Vec<f64>,
    ) {
        let s = &self.structure;
        out.clear();
        for x in 0..s.action_count(m, j) {
            let own = s.with_agent_action(m, last, j, x);
            let v = (0..self.num_teams())
                .filter(|&l| l != m)
                .filter_map(|l| self.payoff_table(m, j, l, source).map(|t| t.row_dot(own, &beliefs[l])))
                .sum();
            out.push(v);
        }
    }
}

fn check_table(s: &TeamStructure, m: usize, l: usize, table: &Matrix) -> Result<()> {
    if table.rows() != s.joint_count(m) || table.cols() != s.joint_count(l) {
        return Err(Error::Dimension(format!(
            "table for teams ({m},{l}) is {}x{}, expected {}x{}",
            table.rows(),
            table.cols(),
            s.joint_count(m),
            s.joint_count(l)
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn matching_pennies() -> MultiTeamGame {
        let s = TeamStructure::new(vec![vec![2], vec![2]]).unwrap();
        let phi = Matrix::new(2, 2, vec![1., -1., -1., 1.]).unwrap();
        let back = phi.transpose().neg();
        MultiTeamGame::new(s, vec![(0, 1, phi), (1, 0, back)]).unwrap()
    }

    #[test]
    fn phi_of_zero_game_is_zero() {
        let g = MultiTeamGame::zero(TeamStructure::uniform(3, 2, 2).unwrap());
        assert_eq!(g.phi(1, &[3, 0, 2]).unwrap(), 0.0);
    }

    #[test]
    fn phi_reads_single_entry_and_sums_to_zero() {
        let g = matching_pennies();
        assert_eq!(g.phi(0, &[0, 0]).unwrap(), 1.0);
        assert_eq!(g.phi(0, &[0, 0]).unwrap() + g.phi(1, &[0, 0]).unwrap(), 0.0);
        assert!(g.phi(0, &[2, 0]).is_err());
        assert!(g.phi(0, &[0]).is_err());
    }

    #[test]
    fn phi_against_beliefs() {
        let g = matching_pennies();
        let uniform = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        assert_eq!(g.team_values(0, &uniform).unwrap(), vec![0.0, 0.0]);
        let point = vec![vec![0.5, 0.5], vec![1.0, 0.0]];
        assert_eq!(g.team_values(0, &point).unwrap(), vec![1.0, -1.0]);
        assert_eq!(g.phi_vs_beliefs(0, 1, &point).unwrap(), -1.0);
        assert!(g.team_values(0, &[vec![1.0], vec![1.0]]).is_err());
        let zero = MultiTeamGame::zero(g.structure().clone());
        assert_eq!(zero.team_values(1, &point).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn agent_payoff_of_single_agent_team_is_team_values() {
        let g = matching_pennies();
        let beliefs = vec![vec![0.3, 0.7], vec![0.2, 0.8]];
        for m in 0..2 {
            let v = g.agent_payoff_vs(m, 0, 0, &beliefs, PayoffSource::Agent).unwrap();
            assert_eq!(v, g.team_values(m, &beliefs).unwrap());
        }
    }

    #[test]
    fn agent_payoff_slices_the_team_potential() {
        let s = TeamStructure::new(vec![vec![2, 3], vec![2]]).unwrap();
        let phi = Matrix::from_fn(6, 2, |r, c| (r * 2 + c) as f64);
        let g = MultiTeamGame::new(s.clone(), vec![(0, 1, phi.clone()), (1, 0, phi.transpose().neg())])
            .unwrap();
        let beliefs = vec![vec![1.0 / 6.0; 6], vec![0.25, 0.75]];
        let last = s.encode(0, &[1, 2]).unwrap();
        let v = g.agent_payoff_vs(0, 1, last, &beliefs, PayoffSource::Agent).unwrap();
        let b = g.team_values(0, &beliefs).unwrap();
        for x in 0..3 {
            assert_eq!(v[x], b[s.encode(0, &[1, x]).unwrap()]);
        }
    }

    #[test]
    fn rejects_mismatched_tables() {
        let s = TeamStructure::new(vec![vec![2], vec![3]]).unwrap();
        assert!(MultiTeamGame::new(s.clone(), vec![(0, 1, Matrix::zeros(2, 2))]).is_err());
        assert!(MultiTeamGame::new(s.clone(), vec![(0, 0, Matrix::zeros(2, 2))]).is_err());
        assert!(MultiTeamGame::new(s, vec![(0, 1, Matrix::zeros(2, 3))]).is_ok());
    }
}
