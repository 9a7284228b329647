//! Brute-force checks of the potential and zero-sum axioms.

use std::fmt;

use super::MultiTeamGame;
use crate::error::{Error, Result};

pub const VALIDATION_TOLERANCE: f64 = 1e-9;
/// Largest `|A|` the exhaustive checks will enumerate.
pub const DEFAULT_VALIDATION_CAP: u128 = 1 << 20;
const MAX_RECORDED: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `u^i` and `phi^m` change by different amounts under a unilateral deviation.
    Potential {
        profile: Vec<usize>,
        team: usize,
        agent: usize,
        deviation: usize,
        discrepancy: f64,
    },
    /// `sum_m phi^m(a) != 0` at a pure profile.
    ZeroSumPoint { profile: Vec<usize>, discrepancy: f64 },
    /// `Phi^{lm}[y, x] + Phi^{ml}[x, y] != 0`.
    ZeroSumPair {
        team: usize,
        opponent: usize,
        row: usize,
        col: usize,
        discrepancy: f64,
    },
}

impl Violation {
    pub fn discrepancy(&self) -> f64 {
        match self {
            Violation::Potential { discrepancy, .. }
            | Violation::ZeroSumPoint { discrepancy, .. }
            | Violation::ZeroSumPair { discrepancy, .. } => *discrepancy,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Potential {
                profile,
                team,
                agent,
                deviation,
                discrepancy,
            } => write!(
                f,
                "potential: team {team} agent {agent} deviating to {deviation} at {profile:?}: |du - dphi| = {discrepancy:e}"
            ),
            Violation::ZeroSumPoint { profile, discrepancy } => {
                write!(f, "zero-sum: sum of potentials at {profile:?} is {discrepancy:e}")
            }
            Violation::ZeroSumPair {
                team,
                opponent,
                row,
                col,
                discrepancy,
            } => write!(
                f,
                "zero-sum: Phi^({team},{opponent})[{row},{col}] + Phi^({opponent},{team})[{col},{row}] = {discrepancy:e}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMethod {
    Exhaustive,
    /// Pairwise antisymmetry of the potential tables.
    Pairwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub method: CheckMethod,
    pub checked: u64,
    pub total_violations: u64,
    pub max_discrepancy: f64,
    /// The first few violations found.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn new(method: CheckMethod) -> Self {
        Self {
            method,
            checked: 0,
            total_violations: 0,
            max_discrepancy: 0.0,
            violations: Vec::new(),
        }
    }

    fn record(&mut self, v: Violation) {
        self.total_violations += 1;
        self.max_discrepancy = self.max_discrepancy.max(v.discrepancy());
        if self.violations.len() < MAX_RECORDED {
            self.violations.push(v);
        }
    }

    pub fn is_ok(&self) -> bool {
        self.total_violations == 0
    }
}

fn check_cap(game: &MultiTeamGame, cap: u128) -> Result<()> {
    let count = game.structure().total_joint_count();
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(())
}

/// Calls `f` on every pure profile (one joint index per team).
fn for_each_profile(counts: &[usize], mut f: impl FnMut(&[usize])) {
    let mut profile = vec![0; counts.len()];
    loop {
        f(&profile);
        let mut t = 0;
        loop {
            if t == counts.len() {
                return;
            }
            profile[t] += 1;
            if profile[t] < counts[t] {
                break;
            }
            profile[t] = 0;
            t += 1;
        }
    }
}

pub fn validate_potential(game: &MultiTeamGame) -> Result<ValidationReport> {
    validate_potential_with_cap(game, DEFAULT_VALIDATION_CAP)
}

/// Checks `u^i(x, a^{-i}) - u^i(a) = phi^m(x, a^{-i}) - phi^m(a)` for every agent,
/// every deviation and every pure profile.
pub fn validate_potential_with_cap(game: &MultiTeamGame, cap: u128) -> Result<ValidationReport> {
    check_cap(game, cap)?;
    let s = game.structure();
    let mut report = ValidationReport::new(CheckMethod::Exhaustive);
    let mut deviated = vec![0; s.num_teams()];
    for_each_profile(s.joint_counts(), |profile| {
        deviated.copy_from_slice(profile);
        for m in 0..s.num_teams() {
            let phi = game.phi_unchecked(m, profile);
            for j in 0..s.team_size(m) {
                let u = game.utility_unchecked(m, j, profile);
                for x in 0..s.action_count(m, j) {
                    deviated[m] = s.with_agent_action(m, profile[m], j, x);
                    let du = game.utility_unchecked(m, j, &deviated) - u;
                    let dphi = game.phi_unchecked(m, &deviated) - phi;
                    report.checked += 1;
                    let gap = (du - dphi).abs();
                    if !(gap <= VALIDATION_TOLERANCE) {
                        report.record(Violation::Potential {
                            profile: profile.to_vec(),
                            team: m,
                            agent: j,
                            deviation: x,
                            discrepancy: gap,
                        });
                    }
                }
                deviated[m] = profile[m];
            }
        }
    });
    Ok(report)
}

/// Checks `sum_m phi^m(a) = 0` at every pure profile.
pub fn zero_sum_pointwise(game: &MultiTeamGame, cap: u128) -> Result<ValidationReport> {
    check_cap(game, cap)?;
    let s = game.structure();
    let mut report = ValidationReport::new(CheckMethod::Exhaustive);
    for_each_profile(s.joint_counts(), |profile| {
        let total: f64 = (0..s.num_teams()).map(|m| game.phi_unchecked(m, profile)).sum();
        report.checked += 1;
        if !(total.abs() <= VALIDATION_TOLERANCE) {
            report.record(Violation::ZeroSumPoint {
                profile: profile.to_vec(),
                discrepancy: total.abs(),
            });
        }
    });
    Ok(report)
}

fn zero_sum_pairwise(game: &MultiTeamGame) -> ValidationReport {
    let s = game.structure();
    let mut report = ValidationReport::new(CheckMethod::Pairwise);
    for m in 0..s.num_teams() {
        for l in m + 1..s.num_teams() {
            let forward = game.potential(m, l);
            let backward = game.potential(l, m);
            for x in 0..s.joint_count(m) {
                for y in 0..s.joint_count(l) {
                    let sum = forward.map_or(0.0, |t| t.get(x, y)) + backward.map_or(0.0, |t| t.get(y, x));
                    report.checked += 1;
                    if !(sum.abs() <= VALIDATION_TOLERANCE) {
                        report.record(Violation::ZeroSumPair {
                            team: m,
                            opponent: l,
                            row: x,
                            col: y,
                            discrepancy: sum.abs(),
                        });
                    }
                }
            }
        }
    }
    report
}

pub fn validate_zero_sum(game: &MultiTeamGame) -> Result<ValidationReport> {
    validate_zero_sum_with_cap(game, DEFAULT_VALIDATION_CAP)
}

/// Zero-sum check.
///
/// `Phi^{lm} = -(Phi^{ml})^T` for every pair implies `sum_m phi^m(a) = 0` at
/// every profile, because the pairwise terms cancel one pair at a time. That
/// matrix check runs first and needs no enumeration. The converse does not
/// hold with three or more teams, so when it fails the exhaustive pointwise
/// check decides, provided `|A|` is within `cap`. Above the cap the pairwise
/// violations are reported as-is.
pub fn validate_zero_sum_with_cap(game: &MultiTeamGame, cap: u128) -> Result<ValidationReport> {
    let pairwise = zero_sum_pairwise(game);
    if pairwise.is_ok() || game.structure().total_joint_count() > cap {
        return Ok(pairwise);
    }
    zero_sum_pointwise(game, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AgentPayoff, Matrix, TeamStructure};

    fn pennies(sign: f64) -> MultiTeamGame {
        let s = TeamStructure::new(vec![vec![2], vec![2]]).unwrap();
        let phi = Matrix::new(2, 2, vec![1., -1., -1., 1.]).unwrap();
        let back = Matrix::from_fn(2, 2, |r, c| sign * phi.get(c, r));
        MultiTeamGame::new(s, vec![(0, 1, phi), (1, 0, back)]).unwrap()
    }

    #[test]
    fn antisymmetric_pair_is_zero_sum() {
        let report = validate_zero_sum(&pennies(-1.0)).unwrap();
        assert!(report.is_ok());
        assert_eq!(report.method, CheckMethod::Pairwise);
    }

    #[test]
    fn symmetric_pair_is_not_zero_sum() {
        let report = validate_zero_sum(&pennies(1.0)).unwrap();
        assert!(!report.is_ok());
        assert_eq!(report.method, CheckMethod::Exhaustive);
        assert_eq!(report.total_violations, 4);
    }

    #[test]
    fn identical_interest_is_potential() {
        let s = TeamStructure::new(vec![vec![2, 3], vec![2, 2]]).unwrap();
        let phi = Matrix::from_fn(6, 4, |r, c| (r as f64) * 0.3 - (c as f64) * 0.7);
        let g = MultiTeamGame::new(s, vec![(0, 1, phi.clone()), (1, 0, phi.transpose().neg())]).unwrap();
        assert!(validate_potential(&g).unwrap().is_ok());
    }

    #[test]
    fn own_action_independent_offsets_and_perturbations() {
        // Team 0: two binary agents; team 1: one binary agent.
        let s = TeamStructure::new(vec![vec![2, 2], vec![2]]).unwrap();
        let phi = Matrix::from_fn(4, 2, |r, c| ((r * 3 + c * 5) % 7) as f64 / 7.0);
        let g = MultiTeamGame::new(s.clone(), vec![(0, 1, phi.clone()), (1, 0, phi.transpose().neg())])
            .unwrap();
        // Agent (0,0): phi plus a term depending on the teammate's action and team 1 only.
        let offset0 = Matrix::from_fn(4, 2, |r, c| phi.get(r, c) + (s.agent_action(0, r, 1) as f64) * 0.5 - c as f64);
        let offset1 = Matrix::from_fn(4, 2, |r, c| phi.get(r, c) + 2.0 * s.agent_action(0, r, 0) as f64 + c as f64);
        let payoffs = vec![
            AgentPayoff { tables: vec![None, Some(offset0.clone())] },
            AgentPayoff { tables: vec![None, Some(offset1)] },
            AgentPayoff { tables: vec![Some(phi.transpose().neg()), None] },
        ];
        let valid = g.clone().with_payoffs(payoffs.clone()).unwrap();
        assert!(validate_potential(&valid).unwrap().is_ok());

        let mut broken = payoffs;
        let mut t = offset0;
        t.add_to(3, 1, 1.0);
        broken[0].tables[1] = Some(t);
        let report = validate_potential(&g.with_payoffs(broken).unwrap()).unwrap();
        assert!(!report.is_ok());
        assert!((report.max_discrepancy - 1.0).abs() < 1e-12);
        let hit = report.violations.iter().any(|v| {
            matches!(v, Violation::Potential { profile, team: 0, agent: 0, .. } if profile[1] == 1
                && (profile[0] == 3 || s.with_agent_action(0, profile[0], 0, 1) == 3))
        });
        assert!(hit, "{:?}", report.violations);
    }

    #[test]
    fn cap_is_enforced() {
        let g = MultiTeamGame::zero(TeamStructure::uniform(2, 11, 2).unwrap());
        assert!(matches!(validate_potential(&g), Err(Error::CapExceeded { .. })));
        assert!(validate_potential_with_cap(&g, 1 << 22).is_ok());
        // A zero game passes the pairwise check without enumeration.
        assert!(validate_zero_sum(&g).unwrap().is_ok());
    }
}
