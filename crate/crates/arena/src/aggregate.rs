//! Summary rows over run records, and their CSV/JSON exports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use econ_arena_core::metrics::{summarize, MetricsError, SeatOutcome};
use serde::{Deserialize, Serialize};

use crate::log::RunRecord;
use crate::roster::Environment;
use crate::sampling::Group;

/// One row per (agent, environment, game, group) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub agent_name: String,
    pub environment: Environment,
    pub game: String,
    pub group: Option<Group>,
    pub n_sessions: usize,
    pub n_runs: usize,
    pub mean_payoff: Option<f64>,
    pub payoff_ratio: Option<f64>,
    pub mean_deviation: Option<f64>,
    pub rule_break_pct: f64,
    pub win_rate: Option<f64>,
    pub completed: bool,
}

/// One seat's action path through a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub session_id: usize,
    pub seat: usize,
    pub agent_name: String,
    pub run_index: usize,
    pub action: Option<f64>,
    pub deviation: Option<f64>,
    pub payoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub agent_name: String,
    pub environment: Environment,
    pub game: String,
    pub group: Option<Group>,
    pub session_id: usize,
    pub run_index: usize,
    pub seat: usize,
    pub deviation: f64,
}

type CellKey = (String, Environment, String, Option<Group>);

#[derive(Default)]
struct Cell {
    outcomes: Vec<SeatOutcome>,
    sessions: BTreeSet<usize>,
    runs: BTreeSet<(usize, usize)>,
}

pub fn aggregate(records: &[RunRecord]) -> Result<Vec<SummaryRow>, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut cells: BTreeMap<CellKey, Cell> = BTreeMap::new();
    for r in records {
        for s in &r.seats {
            let key = (s.agent_name.clone(), r.environment, r.game_name().to_string(), r.group);
            let cell = cells.entry(key).or_default();
            cell.outcomes.push(r.seat_outcome(s.seat));
            cell.sessions.insert(r.session_id);
            cell.runs.insert((r.session_id, r.run_index));
        }
    }
    cells
        .into_iter()
        .map(|((agent_name, environment, game, group), cell)| {
            let m = summarize(&agent_name, &cell.outcomes)?;
            Ok(SummaryRow {
                agent_name,
                environment,
                game,
                group,
                n_sessions: cell.sessions.len(),
                n_runs: cell.runs.len(),
                mean_payoff: m.mean_payoff,
                payoff_ratio: m.payoff_ratio,
                mean_deviation: m.mean_deviation,
                rule_break_pct: m.rule_break_pct,
                win_rate: m.win_rate,
                completed: m.completed,
            })
        })
        .collect()
}

pub fn convergence_series(records: &[RunRecord]) -> Vec<ConvergencePoint> {
    let mut points: Vec<ConvergencePoint> = records
        .iter()
        .flat_map(|r| {
            r.seats.iter().map(move |s| ConvergencePoint {
                session_id: r.session_id,
                seat: s.seat,
                agent_name: s.agent_name.clone(),
                run_index: r.run_index,
                action: s.action,
                deviation: r.result.deviations.get(s.seat).copied().flatten(),
                payoff: r.result.payoffs.get(s.seat).copied().flatten(),
            })
        })
        .collect();
    points.sort_by_key(|p| (p.session_id, p.seat, p.run_index));
    points
}

pub fn deviation_samples(records: &[RunRecord]) -> Vec<DeviationSample> {
    let mut out = Vec::new();
    for r in records {
        for s in &r.seats {
            let o = r.seat_outcome(s.seat);
            if let (None, true, Some(d)) = (o.fault, o.run_valid, o.deviation) {
                out.push(DeviationSample {
                    agent_name: s.agent_name.clone(),
                    environment: r.environment,
                    game: r.game_name().to_string(),
                    group: r.group,
                    session_id: r.session_id,
                    run_index: r.run_index,
                    seat: s.seat,
                    deviation: d,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    /// Pretty JSON array of rows.
    Json,
}

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "agent_name",
    "environment",
    "game",
    "group",
    "n_sessions",
    "n_runs",
    "mean_payoff",
    "payoff_ratio",
    "mean_deviation",
    "rule_break_pct",
    "win_rate",
    "completed",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn group_cell(g: Option<Group>) -> String {
    g.map(|g| g.to_string()).unwrap_or_default()
}

/// Two-decimal percentage, as shown in report tables.
pub fn format_pct(x: f64) -> String {
    format!("{x:.2}")
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.agent_name.clone(),
            r.environment.as_str().to_string(),
            r.game.clone(),
            group_cell(r.group),
            r.n_sessions.to_string(),
            r.n_runs.to_string(),
            opt(r.mean_payoff),
            opt(r.payoff_ratio),
            opt(r.mean_deviation),
            r.rule_break_pct.to_string(),
            opt(r.win_rate),
            r.completed.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub fn convergence_csv(points: &[ConvergencePoint]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["session_id", "seat", "agent_name", "run_index", "action", "deviation", "payoff"])?;
    for p in points {
        w.write_record([
            p.session_id.to_string(),
            p.seat.to_string(),
            p.agent_name.clone(),
            p.run_index.to_string(),
            opt(p.action),
            opt(p.deviation),
            opt(p.payoff),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

pub fn deviations_csv(samples: &[DeviationSample]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["agent_name", "environment", "game", "group", "session_id", "run_index", "seat", "deviation"])?;
    for s in samples {
        w.write_record([
            s.agent_name.clone(),
            s.environment.as_str().to_string(),
            s.game.clone(),
            group_cell(s.group),
            s.session_id.to_string(),
            s.run_index.to_string(),
            s.seat.to_string(),
            s.deviation.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad summary file: {0}")]
    Parse(String),
}

/// Sibling path: `summary.csv` becomes `summary.<suffix>.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "summary".into());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

/// Writes the summary to `out` plus, next to it, the convergence series
/// and deviation samples as CSV. Returns the paths written.
pub fn export(records: &[RunRecord], rows: &[SummaryRow], out: &Path, format: ExportFormat) -> Result<Vec<PathBuf>, ExportError> {
    let write = |path: PathBuf, body: String| {
        std::fs::write(&path, body).map_err(|source| ExportError::Io { path: path.clone(), source })?;
        Ok::<_, ExportError>(path)
    };
    let summary = match format {
        ExportFormat::Csv => summary_csv(rows)?,
        ExportFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
    };
    Ok(vec![
        write(out.to_path_buf(), summary)?,
        write(sibling(out, "convergence"), convergence_csv(&convergence_series(records))?)?,
        write(sibling(out, "deviations"), deviations_csv(&deviation_samples(records))?)?,
    ])
}

fn parse_opt(field: &str) -> Result<Option<f64>, ExportError> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| ExportError::Parse(format!("not a number: {field:?}")))
}

/// Reads a summary written by [`export`], CSV or JSON.
pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, ExportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExportError::Io { path: path.to_path_buf(), source })?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| ExportError::Parse(e.to_string()));
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != SUMMARY_COLUMNS {
        return Err(ExportError::Parse(format!("unexpected columns {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let f = |i: usize| rec.get(i).unwrap_or_default();
        let bad = |what: &str| ExportError::Parse(format!("bad {what} in line {:?}", rec.position().map(|p| p.line())));
        rows.push(SummaryRow {
            agent_name: f(0).to_string(),
            environment: serde_json::from_value(serde_json::Value::from(f(1))).map_err(|_| bad("environment"))?,
            game: f(2).to_string(),
            group: match f(3) {
                "" => None,
                g => Some(serde_json::from_value(serde_json::Value::from(g)).map_err(|_| bad("group"))?),
            },
            n_sessions: f(4).parse().map_err(|_| bad("n_sessions"))?,
            n_runs: f(5).parse().map_err(|_| bad("n_runs"))?,
            mean_payoff: parse_opt(f(6))?,
            payoff_ratio: parse_opt(f(7))?,
            mean_deviation: parse_opt(f(8))?,
            rule_break_pct: f(9).parse().map_err(|_| bad("rule_break_pct"))?,
            win_rate: parse_opt(f(10))?,
            completed: f(11).parse().map_err(|_| bad("completed"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> SummaryRow {
        SummaryRow {
            agent_name: "a, \"quoted\"".into(),
            environment: Environment::Melee,
            game: "beauty_contest".into(),
            group: Some(Group::M),
            n_sessions: 3,
            n_runs: 3,
            mean_payoff: Some(0.1 + 0.2),
            payoff_ratio: None,
            mean_deviation: Some(1.0 / 3.0),
            rule_break_pct: 2.0 / 3.0,
            win_rate: Some(0.5),
            completed: true,
        }
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(format_pct(2.0 / 3.0), "0.67");
        assert_eq!(format_pct(100.0), "100.00");
        assert_eq!(format_pct(0.0), "0.00");
    }

    #[test]
    fn one_row_csv() {
        let text = summary_csv(&[row()]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], SUMMARY_COLUMNS.join(","));
        assert!(lines[1].contains(&format!(",{},", 2.0 / 3.0)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, summary_csv(&[row()]).unwrap()).unwrap();
        assert_eq!(read_summary(&path).unwrap(), vec![row()]);
    }

    #[test]
    fn sibling_names() {
        assert_eq!(sibling(Path::new("/x/summary.csv"), "convergence"), PathBuf::from("/x/summary.convergence.csv"));
    }
}
