//! Game files and CSV output.
//!
//! Games are JSON documents tagged `"format": "teamfp-game/1"`:
//!
//! ```json
//! {
//!   "format": "teamfp-game/1",
//!   "teams": [[2, 2], [2]],
//!   "zero_sum": true,
//!   "potentials": [
//!     {"team": 0, "opponent": 1, "data": [[1, -1], [0, 2], [3, 1], [-1, 0]]},
//!     {"team": 1, "opponent": 0, "csv": "phi10.csv"}
//!   ],
//!   "payoffs": [{"agent": 0, "tables": [{"opponent": 1, "data": [[...]]}]}]
//! }
//! ```
//!
//! `teams` lists each team's per-agent action counts. Tables are rows of team
//! `team`'s joint actions against columns of `opponent`'s, either inline or as
//! a headerless CSV path relative to the document. Missing pairs are zero.
//! `payoffs` is optional; agents not listed earn their team potential.
//!
//! Markov games use `"format": "teamfp-mg/1"` with `horizon`, `initial`,
//! `kernel[s][a][next]` and one embedded game document per state in `stages`.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beliefs::BeliefProfile;
use crate::dynamics::{OpponentMode, RunRecord};
use crate::error::{Error, Result};
use crate::game::{AgentPayoff, Matrix, MultiTeamGame, TeamStructure};
use crate::markov::{MarkovTeamGame, MgRunRecord};

pub const GAME_FORMAT: &str = "teamfp-game/1";
pub const MG_FORMAT: &str = "teamfp-mg/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    team: usize,
    opponent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffTableDoc {
    opponent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffDoc {
    agent: usize,
    tables: Vec<PayoffTableDoc>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDoc {
    format: String,
    teams: Vec<Vec<usize>>,
    #[serde(default = "yes")]
    zero_sum: bool,
    #[serde(default)]
    potentials: Vec<TableDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payoffs: Option<Vec<PayoffDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MgDoc {
    format: String,
    horizon: usize,
    initial: Vec<f64>,
    kernel: Vec<Vec<Vec<f64>>>,
    stages: Vec<GameDoc>,
}

fn matrix_from(data: Option<Vec<Vec<f64>>>, csv: Option<PathBuf>, base: Option<&Path>) -> Result<Matrix> {
    match (data, csv) {
        (Some(rows), None) => {
            let r = rows.len();
            let c = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|row| row.len() != c) {
                return Err(Error::Format("ragged table rows".into()));
            }
            Matrix::new(r, c, rows.into_iter().flatten().collect())
        }
        (None, Some(path)) => {
            let path = match base {
                Some(dir) if path.is_relative() => dir.join(path),
                _ => path,
            };
            Matrix::from_csv_reader(File::open(&path)?)
        }
        _ => Err(Error::Format("a table needs exactly one of `data` or `csv`".into())),
    }
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn check_format(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Format(format!("expected format {expected:?}, found {found:?}")));
    }
    Ok(())
}

fn game_from_doc(doc: GameDoc, base: Option<&Path>) -> Result<MultiTeamGame> {
    check_format(&doc.format, GAME_FORMAT)?;
    let s = TeamStructure::new(doc.teams)?;
    let mut tables = Vec::with_capacity(doc.potentials.len());
    for t in doc.potentials {
        tables.push((t.team, t.opponent, matrix_from(t.data, t.csv, base)?));
    }
    let game = MultiTeamGame::new(s.clone(), tables)?.with_zero_sum(doc.zero_sum);
    let Some(docs) = doc.payoffs else {
        return Ok(game);
    };
    let mut payoffs: Vec<Option<AgentPayoff>> = vec![None; s.num_agents()];
    for p in docs {
        let slot = payoffs.get_mut(p.agent).ok_or(Error::IndexOutOfRange {
            what: "agent",
            index: p.agent,
            size: s.num_agents(),
        })?;
        if slot.is_some() {
            return Err(Error::Format(format!("agent {} listed twice", p.agent)));
        }
        let mut tables = vec![None; s.num_teams()];
        for t in p.tables {
            s.check_team(t.opponent)?;
            tables[t.opponent] = Some(matrix_from(t.data, t.csv, base)?);
        }
        *slot = Some(AgentPayoff { tables });
    }
    let payoffs = payoffs
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.unwrap_or_else(|| {
                let (m, _) = s.locate(i).expect("agent id in range");
                AgentPayoff {
                    tables: (0..s.num_teams()).map(|l| game.potential(m, l).cloned()).collect(),
                }
            })
        })
        .collect();
    game.with_payoffs(payoffs)
}

fn doc_from_game(game: &MultiTeamGame) -> GameDoc {
    let s = game.structure();
    let t = s.num_teams();
    let mut potentials = Vec::new();
    for m in 0..t {
        for l in (0..t).filter(|&l| l != m) {
            if let Some(table) = game.potential(m, l) {
                potentials.push(TableDoc { team: m, opponent: l, data: Some(rows_of(table)), csv: None });
            }
        }
    }
    let payoffs = game.payoffs().map(|ps| {
        ps.iter()
            .enumerate()
            .map(|(agent, p)| PayoffDoc {
                agent,
                tables: p
                    .tables
                    .iter()
                    .enumerate()
                    .filter_map(|(l, t)| t.as_ref().map(|t| PayoffTableDoc { opponent: l, data: Some(rows_of(t)), csv: None }))
                    .collect(),
            })
            .collect()
    });
    GameDoc {
        format: GAME_FORMAT.into(),
        teams: s.teams().to_vec(),
        zero_sum: game.is_declared_zero_sum(),
        potentials,
        payoffs,
    }
}

/// Parses a game document; relative CSV paths resolve against `base`.
pub fn game_from_json(text: &str, base: Option<&Path>) -> Result<MultiTeamGame> {
    game_from_doc(serde_json::from_str(text)?, base)
}

pub fn game_to_json(game: &MultiTeamGame) -> Result<String> {
    Ok(serde_json::to_string_pretty(&doc_from_game(game))?)
}

pub fn markov_from_json(text: &str, base: Option<&Path>) -> Result<MarkovTeamGame> {
    let doc: MgDoc = serde_json::from_str(text)?;
    check_format(&doc.format, MG_FORMAT)?;
    let stages = doc
        .stages
        .into_iter()
        .map(|g| game_from_doc(g, base))
        .collect::<Result<Vec<_>>>()?;
    MarkovTeamGame::new(doc.horizon, doc.initial, doc.kernel, stages)
}

pub fn markov_to_json(mg: &MarkovTeamGame) -> Result<String> {
    let n = mg.joint_total();
    let doc = MgDoc {
        format: MG_FORMAT.into(),
        horizon: mg.horizon(),
        initial: mg.initial().to_vec(),
        kernel: (0..mg.num_states())
            .map(|s| (0..n).map(|a| mg.transition(s, a).to_vec()).collect())
            .collect(),
        stages: mg.stages().iter().map(doc_from_game).collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Either kind of game document.
#[derive(Debug, Clone)]
pub enum GameFile {
    Game(MultiTeamGame),
    Markov(MarkovTeamGame),
}

#[derive(Deserialize)]
struct FormatTag {
    format: String,
}

/// Loads a game or Markov game, dispatching on the `format` tag.
pub fn load_any(path: &Path) -> Result<GameFile> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent();
    let tag: FormatTag = serde_json::from_str(&text)?;
    match tag.format.as_str() {
        GAME_FORMAT => Ok(GameFile::Game(game_from_json(&text, base)?)),
        MG_FORMAT => Ok(GameFile::Markov(markov_from_json(&text, base)?)),
        other => Err(Error::Format(format!("unknown format {other:?}"))),
    }
}

pub fn load_game(path: &Path) -> Result<MultiTeamGame> {
    game_from_json(&std::fs::read_to_string(path)?, path.parent())
}

pub fn load_markov(path: &Path) -> Result<MarkovTeamGame> {
    markov_from_json(&std::fs::read_to_string(path)?, path.parent())
}

pub fn save_game(path: &Path, game: &MultiTeamGame) -> Result<()> {
    std::fs::write(path, game_to_json(game)?)?;
    Ok(())
}

pub fn save_markov(path: &Path, mg: &MarkovTeamGame) -> Result<()> {
    std::fs::write(path, markov_to_json(mg)?)?;
    Ok(())
}

/// Reads a headerless CSV matrix from disk.
pub fn load_matrix_csv(path: &Path) -> Result<Matrix> {
    Matrix::from_csv_reader(BufReader::new(File::open(path)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BeliefsDoc {
    beliefs: Vec<Vec<f64>>,
}

/// `{"beliefs": [[...], [...]]}`, one distribution per team.
pub fn beliefs_from_json(text: &str, structure: &TeamStructure) -> Result<BeliefProfile> {
    let doc: BeliefsDoc = serde_json::from_str(text)?;
    BeliefProfile::from_vectors(structure, doc.beliefs)
}

pub fn load_beliefs(path: &Path, structure: &TeamStructure) -> Result<BeliefProfile> {
    beliefs_from_json(&std::fs::read_to_string(path)?, structure)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum StationaryEntry {
    Vector(Vec<f64>),
    Named(String),
    Skip(()),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StationaryDoc {
    learner: usize,
    beliefs: Vec<StationaryEntry>,
}

/// `{"learner": m, "beliefs": [...]}` where each entry is a distribution,
/// `"uniform"`, or `null` (allowed only at the learner's position).
pub fn stationary_from_json(text: &str, structure: &TeamStructure) -> Result<OpponentMode> {
    let doc: StationaryDoc = serde_json::from_str(text)?;
    structure.check_team(doc.learner)?;
    if doc.beliefs.len() != structure.num_teams() {
        return Err(Error::Dimension(format!(
            "{} stationary strategies for {} teams",
            doc.beliefs.len(),
            structure.num_teams()
        )));
    }
    let mut strategies = BeliefProfile::uniform(structure).into_vectors();
    for (l, entry) in doc.beliefs.into_iter().enumerate() {
        match entry {
            StationaryEntry::Vector(v) => strategies[l] = v,
            StationaryEntry::Named(name) if name == "uniform" => {}
            StationaryEntry::Named(name) => return Err(Error::Format(format!("unknown strategy {name:?}"))),
            StationaryEntry::Skip(()) if l == doc.learner => {}
            StationaryEntry::Skip(()) => return Err(Error::Format(format!("team {l} has no stationary strategy"))),
        }
    }
    // Validates every opponent vector.
    BeliefProfile::from_vectors(structure, strategies.clone())?;
    Ok(OpponentMode::Stationary { learner: doc.learner, strategies })
}

pub fn load_stationary(path: &Path, structure: &TeamStructure) -> Result<OpponentMode> {
    stationary_from_json(&std::fs::read_to_string(path)?, structure)
}

/// Trial-indexed series sharing one column layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `iteration` or `episode`.
    pub index_name: &'static str,
    pub columns: Vec<String>,
    pub trials: Vec<TrialSeries>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSeries {
    pub trial: usize,
    pub rows: Vec<(u64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub index: u64,
    pub n: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation, 0 for a single trial.
    pub std: Vec<f64>,
}

pub fn metric_columns(teams: usize) -> Vec<String> {
    let mut cols = vec!["tng_total".to_string()];
    cols.extend((0..teams).map(|m| format!("tng_team_{m}")));
    cols.push("lyapunov".into());
    cols
}

pub fn mg_columns(teams: usize) -> Vec<String> {
    let mut cols = vec!["mg_tng_total".to_string()];
    cols.extend((0..teams).map(|m| format!("mg_tng_team_{m}")));
    cols
}

impl Table {
    pub fn from_runs(records: &[RunRecord], teams: usize) -> Self {
        Self {
            index_name: "iteration",
            columns: metric_columns(teams),
            trials: records
                .iter()
                .map(|r| TrialSeries {
                    trial: r.trial,
                    rows: r
                        .rows
                        .iter()
                        .map(|row| {
                            let mut v = vec![row.tng_total];
                            v.extend_from_slice(&row.tng_team);
                            v.push(row.lyapunov);
                            (row.iteration, v)
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_mg_runs(records: &[MgRunRecord], teams: usize) -> Self {
        Self {
            index_name: "episode",
            columns: mg_columns(teams),
            trials: records
                .iter()
                .map(|r| TrialSeries {
                    trial: r.trial,
                    rows: r
                        .rows
                        .iter()
                        .map(|row| {
                            let mut v = vec![row.tng_total];
                            v.extend_from_slice(&row.tng_team);
                            (row.episode, v)
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Long format: `<index>,trial,<columns...>`, one line per trial and sample.
    pub fn write_long<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.index_name.to_string(), "trial".into()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for series in &self.trials {
            for (index, values) in &series.rows {
                let mut record = vec![index.to_string(), series.trial.to_string()];
                record.extend(values.iter().map(fmt_float));
                w.write_record(&record)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Mean and sample standard deviation across trials at every sampled index.
    pub fn aggregate(&self) -> Result<Vec<AggregateRow>> {
        let Some(first) = self.trials.first() else {
            return Ok(Vec::new());
        };
        if self
            .trials
            .iter()
            .any(|t| t.rows.len() != first.rows.len() || t.rows.iter().zip(&first.rows).any(|(a, b)| a.0 != b.0))
        {
            return Err(Error::Dimension("trials were sampled on different grids".into()));
        }
        let n = self.trials.len();
        Ok((0..first.rows.len())
            .map(|r| {
                let cols = self.columns.len();
                let mean: Vec<f64> = (0..cols)
                    .map(|c| self.trials.iter().map(|t| t.rows[r].1[c]).sum::<f64>() / n as f64)
                    .collect();
                let std = (0..cols)
                    .map(|c| {
                        if n < 2 {
                            return 0.0;
                        }
                        let ss: f64 = self.trials.iter().map(|t| (t.rows[r].1[c] - mean[c]).powi(2)).sum();
                        (ss / (n - 1) as f64).sqrt()
                    })
                    .collect();
                AggregateRow { index: first.rows[r].0, n, mean, std }
            })
            .collect())
    }

    /// `<index>,trials,<col>_mean,<col>_std,...`.
    pub fn write_aggregate<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.index_name.to_string(), "trials".into()];
        for c in &self.columns {
            header.push(format!("{c}_mean"));
            header.push(format!("{c}_std"));
        }
        w.write_record(&header)?;
        for row in self.aggregate()? {
            let mut record = vec![row.index.to_string(), row.n.to_string()];
            for (m, s) in row.mean.iter().zip(&row.std) {
                record.push(fmt_float(m));
                record.push(fmt_float(s));
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
fn fmt_float(x: &f64) -> String {
    format!("{x:?}")
}

/// `<stem>_aggregate.csv` next to `path`.
pub fn aggregate_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}_aggregate.csv"))
}

/// Writes the long CSV to `path` and the aggregate CSV beside it.
pub fn write_outputs(path: &Path, table: &Table) -> Result<PathBuf> {
    table.write_long(std::io::BufWriter::new(File::create(path)?))?;
    let agg = aggregate_path(path);
    table.write_aggregate(std::io::BufWriter::new(File::create(&agg)?))?;
    Ok(agg)
}

/// Rows of `team,iteration,p_0,p_1,...`, one per team.
pub fn write_beliefs_csv<W: Write>(out: W, iteration: u64, beliefs: &BeliefProfile) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    for (m, pi) in beliefs.teams().iter().enumerate() {
        let mut record = vec![m.to_string(), iteration.to_string()];
        record.extend(pi.iter().map(fmt_float));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
