use super::{Matrix, MultiTeamGame, TeamStructure};
use crate::error::{Error, Result};

/// A game whose agents are groups of the original team members.
#[derive(Debug, Clone)]
pub struct CoarsenedGame {
    pub game: MultiTeamGame,
    /// `to_original[m][x]` is the original joint index of coarse joint index `x`.
    pub to_original: Vec<Vec<usize>>,
}

/// Merges each group of teammates into one super-agent whose action set is the
/// product of its members' action sets.
///
/// `grouping[m]` partitions the member indices of team `m`; inside a group the
/// first listed member is the least significant digit. Super-agents are paid
/// their team potential, so agent payoff tables are dropped.
pub fn coarsen_game(game: &MultiTeamGame, grouping: &[Vec<Vec<usize>>]) -> Result<CoarsenedGame> {
    let s = game.structure();
    if grouping.len() != s.num_teams() {
        return Err(Error::Partition(format!(
            "{} team groupings for {} teams",
            grouping.len(),
            s.num_teams()
        )));
    }
    let mut coarse_counts = Vec::with_capacity(s.num_teams());
    for (m, groups) in grouping.iter().enumerate() {
        let mut seen = vec![false; s.team_size(m)];
        let mut counts = Vec::with_capacity(groups.len());
        for group in groups {
            if group.is_empty() {
                return Err(Error::Partition(format!("empty group in team {m}")));
            }
            let mut count: usize = 1;
            for &j in group {
                if j >= seen.len() || seen[j] {
                    return Err(Error::Partition(format!(
                        "member {j} of team {m} is missing or listed twice"
                    )));
                }
                seen[j] = true;
                count *= s.action_count(m, j);
            }
            counts.push(count);
        }
        if let Some(j) = seen.iter().position(|&x| !x) {
            return Err(Error::Partition(format!("member {j} of team {m} is in no group")));
        }
        coarse_counts.push(counts);
    }
    let coarse = TeamStructure::new(coarse_counts)?;

    let mut to_original = Vec::with_capacity(s.num_teams());
    for (m, groups) in grouping.iter().enumerate() {
        let mut map = Vec::with_capacity(coarse.joint_count(m));
        let mut actions = vec![0; s.team_size(m)];
        for x in 0..coarse.joint_count(m) {
            for (g, group) in groups.iter().enumerate() {
                let mut digit = coarse.agent_action(m, x, g);
                for &j in group {
                    let count = s.action_count(m, j);
                    actions[j] = digit % count;
                    digit /= count;
                }
            }
            map.push(s.encode(m, &actions)?);
        }
        to_original.push(map);
    }

    let t = s.num_teams();
    let mut potentials = Vec::new();
    for m in 0..t {
        for l in (0..t).filter(|&l| l != m) {
            if let Some(table) = game.potential(m, l) {
                let (rows, cols) = (&to_original[m], &to_original[l]);
                potentials.push((
                    m,
                    l,
                    Matrix::from_fn(rows.len(), cols.len(), |r, c| table.get(rows[r], cols[c])),
                ));
            }
        }
    }
    let coarse_game = MultiTeamGame::new(coarse, potentials)?.with_zero_sum(game.is_declared_zero_sum());
    Ok(CoarsenedGame {
        game: coarse_game,
        to_original,
    })
}
