//! Team belief profiles, the empirical-average update and step-size schedules.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::TeamStructure;

const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// One distribution per team over that team's joint actions. All observers
/// outside a team start from the same belief and use the same step sizes, so
/// they hold identical beliefs at every step and one copy per team suffices.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefProfile {
    teams: Vec<Vec<f64>>,
}

impl BeliefProfile {
    pub fn uniform(structure: &TeamStructure) -> Self {
        Self {
            teams: structure
                .joint_counts()
                .iter()
                .map(|&n| vec![1.0 / n as f64; n])
                .collect(),
        }
    }

    /// Point mass on joint action 0 of every team.
    pub fn point_mass(structure: &TeamStructure) -> Self {
        Self {
            teams: structure
                .joint_counts()
                .iter()
                .map(|&n| {
                    let mut v = vec![0.0; n];
                    v[0] = 1.0;
                    v
                })
                .collect(),
        }
    }

    pub fn from_vectors(structure: &TeamStructure, teams: Vec<Vec<f64>>) -> Result<Self> {
        if teams.len() != structure.num_teams() {
            return Err(Error::Dimension(format!(
                "{} belief vectors for {} teams",
                teams.len(),
                structure.num_teams()
            )));
        }
        for (m, v) in teams.iter().enumerate() {
            if v.len() != structure.joint_count(m) {
                return Err(Error::Dimension(format!(
                    "belief about team {m} has length {}, expected {}",
                    v.len(),
                    structure.joint_count(m)
                )));
            }
            check_simplex(v)?;
        }
        Ok(Self { teams })
    }

    pub fn teams(&self) -> &[Vec<f64>] {
        &self.teams
    }

    pub fn team(&self, m: usize) -> &[f64] {
        &self.teams[m]
    }

    pub fn set_team(&mut self, m: usize, belief: Vec<f64>) {
        debug_assert_eq!(belief.len(), self.teams[m].len());
        self.teams[m] = belief;
    }

    pub fn update(&mut self, m: usize, observed: usize, alpha: f64) -> Result<()> {
        update_belief(&mut self.teams[m], observed, alpha)
    }

    pub fn into_vectors(self) -> Vec<Vec<f64>> {
        self.teams
    }
}

/// Errors unless `v` is a probability vector within 1e-9.
pub fn check_simplex(v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Dimension("empty distribution".into()));
    }
    if v.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Parameter(format!("distribution has a negative or non-finite entry: {v:?}")));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Parameter(format!("distribution sums to {total}, not 1")));
    }
    Ok(())
}

fn check_step(pi: &[f64], observed: usize, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::StepSize(alpha));
    }
    if observed >= pi.len() {
        return Err(Error::IndexOutOfRange {
            what: "observed joint action",
            index: observed,
            size: pi.len(),
        });
    }
    Ok(())
}

/// `pi <- (1 - alpha) pi + alpha onehot(observed)` without renormalization.
pub fn update_belief_raw(pi: &mut [f64], observed: usize, alpha: f64) -> Result<()> {
    check_step(pi, observed, alpha)?;
    let keep = 1.0 - alpha;
    for p in pi.iter_mut() {
        *p *= keep;
    }
    pi[observed] += alpha;
    Ok(())
}

/// `pi <- (1 - alpha) pi + alpha onehot(observed)`, renormalized to cancel
/// rounding drift.
pub fn update_belief(pi: &mut [f64], observed: usize, alpha: f64) -> Result<()> {
    update_belief_raw(pi, observed, alpha)?;
    let total: f64 = pi.iter().sum();
    if total != 1.0 {
        for p in pi.iter_mut() {
            *p /= total;
        }
    }
    Ok(())
}

/// Marginal of a team belief over the member subset `subset`.
///
/// The result is indexed in mixed radix over `subset` in the order given, first
/// listed member least significant.
pub fn marginalize(structure: &TeamStructure, m: usize, pi: &[f64], subset: &[usize]) -> Result<Vec<f64>> {
    structure.check_team(m)?;
    if subset.is_empty() {
        return Err(Error::Parameter("marginal over an empty agent subset".into()));
    }
    if pi.len() != structure.joint_count(m) {
        return Err(Error::Dimension(format!(
            "belief has length {}, team {m} has {} joint actions",
            pi.len(),
            structure.joint_count(m)
        )));
    }
    let mut seen = vec![false; structure.team_size(m)];
    for &j in subset {
        if j >= seen.len() || seen[j] {
            return Err(Error::Parameter(format!("agent {j} repeated or not in team {m}")));
        }
        seen[j] = true;
    }
    let size: usize = subset.iter().map(|&j| structure.action_count(m, j)).product();
    let mut out = vec![0.0; size];
    for (x, &p) in pi.iter().enumerate() {
        out[project(structure, m, x, subset)] += p;
    }
    Ok(out)
}

/// Index of the restriction of team joint action `x` to `subset`.
pub fn project(structure: &TeamStructure, m: usize, x: usize, subset: &[usize]) -> usize {
    let mut index = 0;
    let mut stride = 1;
    for &j in subset {
        index += structure.agent_action(m, x, j) * stride;
        stride *= structure.action_count(m, j);
    }
    index
}

/// Product distribution over a team's joint actions from per-member marginals.
pub fn product_distribution(structure: &TeamStructure, m: usize, marginals: &[&[f64]]) -> Vec<f64> {
    debug_assert_eq!(marginals.len(), structure.team_size(m));
    let mut out = Vec::with_capacity(structure.joint_count(m));
    out.push(1.0);
    for marginal in marginals {
        let prev = std::mem::take(&mut out);
        out.reserve(prev.len() * marginal.len());
        for &q in marginal.iter() {
            out.extend(prev.iter().map(|&p| p * q));
        }
    }
    out
}

/// Step sizes `alpha_k` for the belief update.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StepSchedule {
    /// `1 / (k + 1)`: plain empirical averages.
    #[default]
    Harmonic,
    /// `1 / (k + 1 + offset)`.
    HarmonicOffset { offset: u64 },
    /// `(k + 1)^(-exponent)`.
    Power { exponent: f64 },
    Constant(f64),
    /// Explicit values; the last entry repeats past the end.
    Table(Vec<f64>),
}

impl StepSchedule {
    pub fn alpha(&self, k: u64) -> f64 {
        match self {
            StepSchedule::Harmonic => 1.0 / (k as f64 + 1.0),
            StepSchedule::HarmonicOffset { offset } => 1.0 / (k as f64 + 1.0 + *offset as f64),
            StepSchedule::Power { exponent } => (k as f64 + 1.0).powf(-exponent),
            StepSchedule::Constant(c) => *c,
            StepSchedule::Table(values) => match values.get(k as usize) {
                Some(v) => *v,
                None => values.last().copied().unwrap_or(0.0),
            },
        }
    }
}

impl fmt::Display for StepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSchedule::Harmonic => write!(f, "harmonic"),
            StepSchedule::HarmonicOffset { offset } => write!(f, "harmonic-offset:{offset}"),
            StepSchedule::Power { exponent } => write!(f, "power:{exponent}"),
            StepSchedule::Constant(c) => write!(f, "constant:{c}"),
            StepSchedule::Table(values) => write!(f, "table({} entries)", values.len()),
        }
    }
}

impl FromStr for StepSchedule {
    type Err = Error;

    /// `harmonic`, `harmonic-offset:<n>`, `power:<p>`, `constant:<c>` or
    /// `table:<a0>,<a1>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unrecognized step schedule {s:?}"));
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("harmonic", None) => Ok(StepSchedule::Harmonic),
            ("harmonic-offset", Some(a)) => Ok(StepSchedule::HarmonicOffset {
                offset: a.parse().map_err(|_| bad())?,
            }),
            ("power", Some(a)) => Ok(StepSchedule::Power {
                exponent: a.parse().map_err(|_| bad())?,
            }),
            ("constant", Some(a)) => Ok(StepSchedule::Constant(a.parse().map_err(|_| bad())?)),
            ("table", Some(a)) => a
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()
                .map(StepSchedule::Table),
            _ => Err(bad()),
        }
    }
}

/// Status of the conditions that cannot be checked on a finite prefix
/// (`alpha_k -> 0`, `sum alpha = inf`, `sum alpha^2 < inf`, `alpha_k / alpha_{k+1} -> 1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Certification {
    Certified,
    Violated(String),
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    pub prefix_len: u64,
    pub in_unit_interval: bool,
    pub nonincreasing: bool,
    /// `alpha_k - alpha_{k+1} >= alpha_k alpha_{k+1}` on the prefix.
    pub difference_condition: bool,
    /// `alpha_{N-1} / alpha_N`.
    pub tail_ratio: f64,
    pub asymptotic: Certification,
}

impl ScheduleReport {
    pub fn passes_prefix(&self) -> bool {
        self.in_unit_interval && self.nonincreasing && self.difference_condition
    }

    pub fn is_ok(&self) -> bool {
        self.passes_prefix() && !matches!(self.asymptotic, Certification::Violated(_))
    }
}

/// Checks the step-size conditions on `alpha_0 .. alpha_{n-1}` and certifies
/// the asymptotic ones for the built-in families.
pub fn check_schedule(schedule: &StepSchedule, n: u64) -> Result<ScheduleReport> {
    if n < 2 {
        return Err(Error::Parameter("schedule prefix must have at least 2 entries".into()));
    }
    let mut in_unit_interval = true;
    let mut nonincreasing = true;
    let mut difference_condition = true;
    for k in 0..n {
        let a = schedule.alpha(k);
        if !(0.0..=1.0).contains(&a) {
            in_unit_interval = false;
        }
        if k + 1 < n {
            let next = schedule.alpha(k + 1);
            if next > a {
                nonincreasing = false;
            }
            if a - next < a * next - 1e-12 {
                difference_condition = false;
            }
        }
    }
    let tail_ratio = schedule.alpha(n - 1) / schedule.alpha(n);
    let asymptotic = match schedule {
        StepSchedule::Harmonic | StepSchedule::HarmonicOffset { .. } => Certification::Certified,
        StepSchedule::Power { exponent } => {
            let p = *exponent;
            if p == 1.0 {
                Certification::Certified
            } else if p <= 0.0 {
                Certification::Violated("step sizes do not decay to zero".into())
            } else if p <= 0.5 {
                Certification::Violated("sum of squared step sizes diverges".into())
            } else if p < 1.0 {
                Certification::Violated(
                    "alpha_k - alpha_(k+1) >= alpha_k alpha_(k+1) fails for large k".into(),
                )
            } else {
                Certification::Violated("sum of step sizes converges".into())
            }
        }
        StepSchedule::Constant(_) => Certification::Violated("step sizes do not decay to zero".into()),
        StepSchedule::Table(_) => Certification::Unverifiable,
    };
    Ok(ScheduleReport {
        prefix_len: n,
        in_unit_interval,
        nonincreasing,
        difference_condition,
        tail_ratio,
        asymptotic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_and_null_steps() {
        let mut pi = vec![0.2, 0.3, 0.5];
        update_belief(&mut pi, 1, 1.0).unwrap();
        assert_eq!(pi, vec![0.0, 1.0, 0.0]);
        let mut pi = vec![0.2, 0.3, 0.5];
        update_belief(&mut pi, 2, 0.0).unwrap();
        assert_eq!(pi, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn rejects_bad_step_and_index() {
        let mut pi = vec![0.5, 0.5];
        assert!(matches!(update_belief(&mut pi, 0, 1.5), Err(Error::StepSize(_))));
        assert!(matches!(update_belief(&mut pi, 0, -0.1), Err(Error::StepSize(_))));
        assert!(update_belief(&mut pi, 2, 0.5).is_err());
    }

    #[test]
    fn harmonic_steps_give_empirical_average() {
        let mut pi = vec![0.5, 0.5];
        for (k, &obs) in [0usize, 1, 0].iter().enumerate() {
            update_belief(&mut pi, obs, StepSchedule::Harmonic.alpha(k as u64)).unwrap();
        }
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_of_full_set_and_of_uniform() {
        let s = TeamStructure::new(vec![vec![2, 3, 2]]).unwrap();
        let pi: Vec<f64> = (0..12).map(|i| (i + 1) as f64 / 78.0).collect();
        assert_eq!(marginalize(&s, 0, &pi, &[0, 1, 2]).unwrap(), pi);
        let uniform = vec![1.0 / 12.0; 12];
        let m = marginalize(&s, 0, &uniform, &[1]).unwrap();
        for p in m {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(marginalize(&s, 0, &pi, &[]).is_err());
        assert!(marginalize(&s, 0, &pi, &[0, 0]).is_err());
        assert!(marginalize(&s, 0, &pi, &[3]).is_err());
    }

    #[test]
    fn marginal_order_follows_subset() {
        let s = TeamStructure::new(vec![vec![2, 3]]).unwrap();
        let mut pi = vec![0.0; 6];
        pi[s.encode(0, &[1, 2]).unwrap()] = 1.0;
        let m = marginalize(&s, 0, &pi, &[1, 0]).unwrap();
        assert_eq!(m[2 + 3], 1.0);
    }

    #[test]
    fn product_distribution_matches_encoding() {
        let s = TeamStructure::new(vec![vec![2, 3]]).unwrap();
        let a = [0.25, 0.75];
        let b = [0.5, 0.3, 0.2];
        let p = product_distribution(&s, 0, &[&a, &b]);
        for x in 0..6 {
            let d = s.decode(0, x);
            assert!((p[x] - a[d[0]] * b[d[1]]).abs() < 1e-15);
        }
    }

    #[test]
    fn harmonic_schedule_meets_difference_condition_with_equality() {
        let report = check_schedule(&StepSchedule::Harmonic, 1000).unwrap();
        assert!(report.is_ok());
        assert_eq!(report.asymptotic, Certification::Certified);
        for k in 0..1000u64 {
            let (a, b) = (StepSchedule::Harmonic.alpha(k), StepSchedule::Harmonic.alpha(k + 1));
            assert!((a - b - a * b).abs() < 1e-15);
        }
        assert!((report.tail_ratio - 1001.0 / 1000.0).abs() < 1e-12);
    }

    #[test]
    fn constant_schedule_fails() {
        let report = check_schedule(&StepSchedule::Constant(0.5), 100).unwrap();
        assert!(!report.difference_condition);
        assert!(!report.passes_prefix());
        assert!(matches!(report.asymptotic, Certification::Violated(_)));
    }

    #[test]
    fn inverse_square_schedule_is_not_certified() {
        let report = check_schedule(&StepSchedule::Power { exponent: 2.0 }, 100).unwrap();
        assert!(report.passes_prefix());
        assert!(matches!(report.asymptotic, Certification::Violated(ref r) if r.contains("converges")));
        assert!(!report.is_ok());
    }

    #[test]
    fn tables_are_unverifiable() {
        let report = check_schedule(&StepSchedule::Table(vec![1.0, 0.5, 0.25]), 10).unwrap();
        assert_eq!(report.asymptotic, Certification::Unverifiable);
        assert!(check_schedule(&StepSchedule::Harmonic, 1).is_err());
        assert!(!check_schedule(&StepSchedule::Table(vec![1.5]), 4).unwrap().in_unit_interval);
    }

    #[test]
    fn parses_schedules() {
        assert_eq!("harmonic".parse::<StepSchedule>().unwrap(), StepSchedule::Harmonic);
        assert_eq!(
            "harmonic-offset:3".parse::<StepSchedule>().unwrap(),
            StepSchedule::HarmonicOffset { offset: 3 }
        );
        assert_eq!("constant:0.5".parse::<StepSchedule>().unwrap(), StepSchedule::Constant(0.5));
        assert_eq!(
            "table:1,0.5".parse::<StepSchedule>().unwrap(),
            StepSchedule::Table(vec![1.0, 0.5])
        );
        assert!("geometric".parse::<StepSchedule>().is_err());
    }
}
