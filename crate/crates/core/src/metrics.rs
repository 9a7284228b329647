//! Team-Nash gap and the entropy-regularized Lyapunov diagnostic.
//!
//! Both are exact: `phi^m(., pi^{-m})` is linear in team `m`'s strategy, so its
//! maximum over the simplex sits at a pure joint action and only
//! `b^m = sum_{l != m} Phi^{ml} pi^l` is needed.

use crate::beliefs::BeliefProfile;
use crate::error::{Error, Result};
use crate::game::MultiTeamGame;

#[derive(Debug, Clone, PartialEq)]
pub struct TeamNashGap {
    pub per_team: Vec<f64>,
    pub total: f64,
}

/// One sampled point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub tng_team: Vec<f64>,
    pub tng_total: f64,
    pub lyapunov: f64,
    /// Natural-log entropy of each team's belief.
    pub entropy: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `tau * ln sum exp(v / tau)`, stabilized by the maximum.
pub fn soft_max_value(v: &[f64], tau: f64) -> f64 {
    let top = max(v);
    let sum: f64 = v.iter().map(|x| ((x - top) / tau).exp()).sum();
    top + tau * sum.ln()
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn all_team_values(game: &MultiTeamGame, beliefs: &BeliefProfile) -> Result<Vec<Vec<f64>>> {
    (0..game.num_teams())
        .map(|m| {
            if beliefs.team(m).len() != game.structure().joint_count(m) {
                return Err(Error::Dimension(format!(
                    "belief about team {m} has length {}, expected {}",
                    beliefs.team(m).len(),
                    game.structure().joint_count(m)
                )));
            }
            game.team_values(m, beliefs.teams())
        })
        .collect()
}

fn gap_from_values(values: &[Vec<f64>], beliefs: &BeliefProfile) -> TeamNashGap {
    let per_team: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(m, b)| max(b) - dot(beliefs.team(m), b))
        .collect();
    let total = per_team.iter().sum();
    TeamNashGap { per_team, total }
}

/// `TNG^m(pi) = max_x b^m(x) - pi^m . b^m` for every team, and their sum.
pub fn tng(game: &MultiTeamGame, beliefs: &BeliefProfile) -> Result<TeamNashGap> {
    let values = all_team_values(game, beliefs)?;
    Ok(gap_from_values(&values, beliefs))
}

/// `L(pi) = sum_m max_mu { phi^m(mu, pi^{-m}) + tau H(mu) } = sum_m tau ln sum exp(b^m / tau)`.
pub fn lyapunov(game: &MultiTeamGame, beliefs: &BeliefProfile, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    let values = all_team_values(game, beliefs)?;
    Ok(values.iter().map(|b| soft_max_value(b, tau)).sum())
}

/// Computes every metric with a single pass over the potential tables.
pub fn metrics_row(game: &MultiTeamGame, beliefs: &BeliefProfile, tau: f64, iteration: u64) -> Result<MetricsRow> {
    check_tau(tau)?;
    let values = all_team_values(game, beliefs)?;
    let gap = gap_from_values(&values, beliefs);
    Ok(MetricsRow {
        iteration,
        tng_team: gap.per_team,
        tng_total: gap.total,
        lyapunov: values.iter().map(|b| soft_max_value(b, tau)).sum(),
        entropy: beliefs.teams().iter().map(|p| entropy(p)).collect(),
    })
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("temperature must be positive, got {tau}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Matrix, TeamStructure};

    fn pennies() -> MultiTeamGame {
        let s = TeamStructure::new(vec![vec![2], vec![2]]).unwrap();
        let phi = Matrix::new(2, 2, vec![1., -1., -1., 1.]).unwrap();
        MultiTeamGame::new(s, vec![(0, 1, phi.clone()), (1, 0, phi.transpose().neg())]).unwrap()
    }

    #[test]
    fn zero_game_has_zero_gap_and_entropy_lyapunov() {
        let s = TeamStructure::new(vec![vec![2, 2], vec![3]]).unwrap();
        let g = MultiTeamGame::zero(s.clone());
        let pi = BeliefProfile::point_mass(&s);
        let gap = tng(&g, &pi).unwrap();
        assert_eq!(gap.total, 0.0);
        let l = lyapunov(&g, &pi, 0.3).unwrap();
        assert!((l - 0.3 * (4f64.ln() + 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn pennies_uniform_and_point_mass() {
        let g = pennies();
        let s = g.structure().clone();
        let uniform = BeliefProfile::uniform(&s);
        assert_eq!(tng(&g, &uniform).unwrap().total, 0.0);
        assert!((lyapunov(&g, &uniform, 0.1).unwrap() - 0.2 * 2f64.ln()).abs() < 1e-12);
        assert!((lyapunov(&g, &uniform, 0.1).unwrap() - 0.13863).abs() < 1e-5);

        let point = BeliefProfile::point_mass(&s);
        let gap = tng(&g, &point).unwrap();
        assert_eq!(gap.per_team, vec![0.0, 2.0]);
        assert_eq!(gap.total, 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = pennies();
        let s = g.structure().clone();
        assert!(lyapunov(&g, &BeliefProfile::uniform(&s), 0.0).is_err());
        let other = TeamStructure::new(vec![vec![3], vec![2]]).unwrap();
        assert!(tng(&g, &BeliefProfile::uniform(&other)).is_err());
    }

    #[test]
    fn soft_max_is_stable() {
        let v = [1000.0, 999.0];
        let s = soft_max_value(&v, 0.01);
        assert!((s - 1000.0).abs() < 1e-10);
        assert!(s.is_finite());
    }
}
