use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Teams and the action-set size of each of their agents.
///
/// A team's joint action is stored as a single mixed-radix integer with the
/// first agent of the team as the least significant digit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct TeamStructure {
    action_counts: Vec<Vec<usize>>,
    strides: Vec<Vec<usize>>,
    joint_counts: Vec<usize>,
    agent_offsets: Vec<usize>,
}

impl TeamStructure {
    pub fn new(action_counts: Vec<Vec<usize>>) -> Result<Self> {
        if action_counts.is_empty() {
            return Err(Error::Structure("at least one team is required".into()));
        }
        let mut strides = Vec::with_capacity(action_counts.len());
        let mut joint_counts = Vec::with_capacity(action_counts.len());
        let mut agent_offsets = Vec::with_capacity(action_counts.len());
        let mut offset = 0;
        for (m, team) in action_counts.iter().enumerate() {
            if team.is_empty() {
                return Err(Error::Structure(format!("team {m} has no agents")));
            }
            let mut team_strides = Vec::with_capacity(team.len());
            let mut joint: usize = 1;
            for (j, &count) in team.iter().enumerate() {
                if count == 0 {
                    return Err(Error::Structure(format!(
                        "agent {j} of team {m} has an empty action set"
                    )));
                }
                team_strides.push(joint);
                joint = joint.checked_mul(count).ok_or_else(|| {
                    Error::Structure(format!("joint-action count of team {m} overflows"))
                })?;
            }
            strides.push(team_strides);
            joint_counts.push(joint);
            agent_offsets.push(offset);
            offset += team.len();
        }
        Ok(Self {
            action_counts,
            strides,
            joint_counts,
            agent_offsets,
        })
    }

    /// `teams` teams of `agents` agents, each with `actions` actions.
    pub fn uniform(teams: usize, agents: usize, actions: usize) -> Result<Self> {
        Self::new(vec![vec![actions; agents]; teams])
    }

    pub fn num_teams(&self) -> usize {
        self.action_counts.len()
    }

    pub fn team_size(&self, m: usize) -> usize {
        self.action_counts[m].len()
    }

    pub fn num_agents(&self) -> usize {
        self.action_counts.iter().map(Vec::len).sum()
    }

    pub fn action_count(&self, m: usize, j: usize) -> usize {
        self.action_counts[m][j]
    }

    pub fn action_counts(&self, m: usize) -> &[usize] {
        &self.action_counts[m]
    }

    pub fn teams(&self) -> &[Vec<usize>] {
        &self.action_counts
    }

    pub fn joint_count(&self, m: usize) -> usize {
        self.joint_counts[m]
    }

    pub fn joint_counts(&self) -> &[usize] {
        &self.joint_counts
    }

    /// Product of all teams' joint-action counts, i.e. `|A|`.
    pub fn total_joint_count(&self) -> u128 {
        self.joint_counts.iter().map(|&c| c as u128).product()
    }

    /// `ln |A| = sum_i ln |A^i|` over every agent of every team.
    pub fn ln_total_actions(&self) -> f64 {
        self.action_counts
            .iter()
            .flatten()
            .map(|&c| (c as f64).ln())
            .sum()
    }

    /// Global agent id of member `j` of team `m`.
    pub fn agent_id(&self, m: usize, j: usize) -> usize {
        self.agent_offsets[m] + j
    }

    /// Inverse of [`agent_id`](Self::agent_id).
    pub fn locate(&self, agent: usize) -> Option<(usize, usize)> {
        let m = self.agent_offsets.partition_point(|&o| o <= agent).checked_sub(1)?;
        let j = agent - self.agent_offsets[m];
        (j < self.team_size(m)).then_some((m, j))
    }

    pub fn check_team(&self, m: usize) -> Result<()> {
        if m < self.num_teams() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "team",
                index: m,
                size: self.num_teams(),
            })
        }
    }

    pub fn check_joint(&self, m: usize, index: usize) -> Result<()> {
        self.check_team(m)?;
        if index < self.joint_counts[m] {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "joint action",
                index,
                size: self.joint_counts[m],
            })
        }
    }

    pub fn encode(&self, m: usize, actions: &[usize]) -> Result<usize> {
        self.check_team(m)?;
        let counts = &self.action_counts[m];
        if actions.len() != counts.len() {
            return Err(Error::Dimension(format!(
                "team {m} has {} agents, got {} actions",
                counts.len(),
                actions.len()
            )));
        }
        let mut index = 0;
        for (j, (&a, &count)) in actions.iter().zip(counts).enumerate().rev() {
            if a >= count {
                return Err(Error::IndexOutOfRange {
                    what: "agent action",
                    index: a,
                    size: count,
                });
            }
            index += a * self.strides[m][j];
        }
        Ok(index)
    }

    pub fn decode(&self, m: usize, index: usize) -> Vec<usize> {
        (0..self.team_size(m))
            .map(|j| self.agent_action(m, index, j))
            .collect()
    }

    /// Action of member `j` inside team joint action `index`.
    #[inline]
    pub fn agent_action(&self, m: usize, index: usize, j: usize) -> usize {
        (index / self.strides[m][j]) % self.action_counts[m][j]
    }

    /// Joint action `index` with member `j`'s action replaced by `action`.
    #[inline]
    pub fn with_agent_action(&self, m: usize, index: usize, j: usize, action: usize) -> usize {
        let stride = self.strides[m][j];
        let current = (index / stride) % self.action_counts[m][j];
        index - current * stride + action * stride
    }
}

impl TryFrom<Vec<Vec<usize>>> for TeamStructure {
    type Error = Error;

    fn try_from(value: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TeamStructure> for Vec<Vec<usize>> {
    fn from(value: TeamStructure) -> Self {
        value.action_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_structures() {
        assert!(TeamStructure::new(vec![]).is_err());
        assert!(TeamStructure::new(vec![vec![]]).is_err());
        assert!(TeamStructure::new(vec![vec![2, 0]]).is_err());
    }

    #[test]
    fn joint_counts_are_products() {
        let s = TeamStructure::new(vec![vec![2, 3], vec![4], vec![2, 2, 2]]).unwrap();
        assert_eq!(s.joint_counts(), &[6, 4, 8]);
        assert_eq!(s.total_joint_count(), 192);
        assert!((s.ln_total_actions() - 192f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn least_significant_agent_first() {
        let s = TeamStructure::new(vec![vec![2, 3]]).unwrap();
        assert_eq!(s.encode(0, &[1, 0]).unwrap(), 1);
        assert_eq!(s.encode(0, &[0, 1]).unwrap(), 2);
        assert_eq!(s.decode(0, 5), vec![1, 2]);
        assert_eq!(s.with_agent_action(0, 5, 1, 0), 1);
        assert!(s.encode(0, &[2, 0]).is_err());
        assert!(s.encode(0, &[0]).is_err());
    }

    #[test]
    fn decode_encode_is_identity_exhaustively() {
        let s = TeamStructure::new(vec![vec![2; 16], vec![3, 5, 7]]).unwrap();
        for m in 0..s.num_teams() {
            for x in 0..s.joint_count(m) {
                let actions = s.decode(m, x);
                for (j, &a) in actions.iter().enumerate() {
                    assert!(a < s.action_count(m, j));
                }
                assert_eq!(s.encode(m, &actions).unwrap(), x);
            }
        }
    }

    #[test]
    fn locate_inverts_agent_id() {
        let s = TeamStructure::new(vec![vec![2, 2], vec![2], vec![2, 2, 2]]).unwrap();
        for m in 0..3 {
            for j in 0..s.team_size(m) {
                assert_eq!(s.locate(s.agent_id(m, j)), Some((m, j)));
            }
        }
        assert_eq!(s.locate(6), None);
    }
}
