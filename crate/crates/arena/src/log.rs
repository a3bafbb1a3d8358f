//! Line-delimited JSON run logs, one file per session.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use econ_arena_core::agents::ResponseViolation;
use econ_arena_core::game::{GameSpec, RunResult};
use econ_arena_core::metrics::{FaultClass, MetricsSummary, SeatOutcome};
use econ_arena_core::prompts::{HistoryEntry, PlayerRecord, Variant};
use serde::{Deserialize, Serialize};

use crate::roster::Environment;
use crate::sampling::Group;

/// Responses longer than this are cut when truncation is enabled.
pub const TRUNCATE_BYTES: usize = 8 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub variant: Variant,
    pub system: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderFault {
    pub class: String,
    pub message: String,
}

/// One seat's turn in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatRecord {
    pub seat: usize,
    pub agent_name: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PromptRecord>,
    pub raw_response: Option<String>,
    #[serde(default)]
    pub response_truncated: bool,
    /// Number found in the reply, even if the game rules rejected it.
    pub parsed_action: Option<f64>,
    /// Action that entered resolution.
    pub action: Option<f64>,
    pub violation: Option<ResponseViolation>,
    pub provider_fault: Option<ProviderFault>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attempts: Option<u32>,
}

impl SeatRecord {
    pub fn fault(&self) -> Option<FaultClass> {
        if self.provider_fault.is_some() {
            Some(FaultClass::Provider)
        } else if self.violation.is_some() {
            Some(FaultClass::RuleBreak)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub session_id: usize,
    pub run_index: usize,
    pub config_digest: String,
    pub environment: Environment,
    pub group: Option<Group>,
    pub spec: GameSpec,
    pub seats: Vec<SeatRecord>,
    pub result: RunResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
}

impl RunRecord {
    pub fn game_name(&self) -> &'static str {
        self.spec.kind().as_str()
    }

    pub fn seat_outcome(&self, seat: usize) -> SeatOutcome {
        let r = &self.result;
        SeatOutcome {
            fault: self.seats[seat].fault(),
            run_valid: r.valid,
            action: self.seats[seat].action,
            payoff: r.payoffs.get(seat).copied().flatten(),
            ne_payoff: r.ne_payoffs.get(seat).copied().unwrap_or(0.0),
            deviation: r.deviations.get(seat).copied().flatten(),
            won: r.is_winner(seat),
        }
    }

    /// What later runs of the session get to see about this one.
    pub fn history_entry(&self) -> HistoryEntry {
        let auction = self.spec.auction_params();
        HistoryEntry {
            run: self.run_index,
            players: self
                .seats
                .iter()
                .map(|s| PlayerRecord {
                    id: s.seat,
                    action: s.action,
                    private_value: auction.map(|p| p.private_values[s.seat]),
                    payoff: auction.and(self.result.payoffs.get(s.seat).copied().flatten()),
                })
                .collect(),
        }
    }
}

/// Per-session summary written next to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub config_digest: String,
    pub session_id: usize,
    pub group: Option<Group>,
    pub resolved_spec: GameSpec,
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<MetricsSummary>,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: corrupt record: {message}")]
    CorruptRecord { path: PathBuf, line: usize, message: String },
    #[error("no run logs found in {0}")]
    Empty(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LogError + '_ {
    move |source| LogError::Io { path: path.to_path_buf(), source }
}

pub fn session_log_path(dir: &Path, session_id: usize) -> PathBuf {
    dir.join(format!("session-{session_id:04}.jsonl"))
}

pub fn session_summary_path(dir: &Path, session_id: usize) -> PathBuf {
    dir.join(format!("session-{session_id:04}.summary.json"))
}

/// Append-only writer for one session's log.
pub struct LogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LogWriter {
    pub fn create(dir: &Path, session_id: usize) -> Result<Self, LogError> {
        let path = session_log_path(dir, session_id);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(LogWriter { out: BufWriter::new(file), path })
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<(), LogError> {
        let line = serde_json::to_string(record).expect("run records serialize");
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(io_err(&self.path))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

pub fn write_session_summary(dir: &Path, log: &SessionLog) -> Result<(), LogError> {
    #[derive(Serialize)]
    struct Summary<'a> {
        config_digest: &'a str,
        session_id: usize,
        group: Option<Group>,
        resolved_spec: &'a GameSpec,
        runs: usize,
        summaries: &'a [MetricsSummary],
    }
    let path = session_summary_path(dir, log.session_id);
    let body = serde_json::to_string_pretty(&Summary {
        config_digest: &log.config_digest,
        session_id: log.session_id,
        group: log.group,
        resolved_spec: &log.resolved_spec,
        runs: log.runs.len(),
        summaries: &log.summaries,
    })
    .expect("summaries serialize");
    std::fs::write(&path, body + "\n").map_err(io_err(&path))
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub records: Vec<RunRecord>,
    pub warnings: Vec<String>,
}

/// Reads one session file. A final line without a terminating newline that
/// fails to parse is treated as an interrupted write and skipped.
pub fn read_log_file(path: &Path) -> Result<ReadOutcome, LogError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = ReadOutcome::default();
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => out.records.push(r),
            Err(e) if i + 1 == lines.len() && !complete => {
                let msg = format!("{}:{}: skipping partial trailing record ({e})", path.display(), i + 1);
                tracing::warn!("{msg}");
                out.warnings.push(msg);
            }
            Err(e) => {
                return Err(LogError::CorruptRecord { path: path.to_path_buf(), line: i + 1, message: e.to_string() })
            }
        }
    }
    Ok(out)
}

/// Reads every session log in `dir`, in session order.
pub fn read_runs(dir: &Path) -> Result<ReadOutcome, LogError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "jsonl")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("session-"))
        })
        .collect();
    if files.is_empty() {
        return Err(LogError::Empty(dir.to_path_buf()));
    }
    files.sort();
    let mut all = ReadOutcome::default();
    for f in files {
        let part = read_log_file(&f)?;
        all.records.extend(part.records);
        all.warnings.extend(part.warnings);
    }
    all.records.sort_by_key(|r| (r.session_id, r.run_index));
    Ok(all)
}

pub fn truncate_response(text: String, enabled: bool) -> (String, bool) {
    if !enabled || text.len() <= TRUNCATE_BYTES {
        return (text, false);
    }
    let mut cut = TRUNCATE_BYTES;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    (text[..cut].to_string(), true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_respects_char_boundaries() {
        let long = "é".repeat(TRUNCATE_BYTES);
        let (cut, truncated) = truncate_response(long.clone(), true);
        assert!(truncated);
        assert!(cut.len() <= TRUNCATE_BYTES && cut.chars().all(|c| c == 'é'));
        assert_eq!(truncate_response(long.clone(), false), (long, false));
        assert_eq!(truncate_response("short".into(), true), ("short".into(), false));
    }
}
