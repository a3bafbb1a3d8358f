use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::PromptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryLevel {
    #[default]
    None,
    /// Actions only.
    Partial,
    /// Actions, private values and payoffs.
    Full,
}

/// One seat's line in a past run. `action` is `None` when the seat broke the
/// rules that run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub id: usize,
    pub action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 1-based run index within the session.
    pub run: usize,
    pub players: Vec<PlayerRecord>,
}

/// The past runs revealed to agents, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryView {
    pub level: HistoryLevel,
    pub max_runs: usize,
    entries: Vec<HistoryEntry>,
}

impl HistoryView {
    pub fn new(level: HistoryLevel, max_runs: usize) -> Self {
        HistoryView { level, max_runs, entries: Vec::new() }
    }

    /// Records a finished run. The view keeps at most `max_runs` entries and
    /// drops anything a Partial view must not reveal.
    pub fn push(&mut self, mut entry: HistoryEntry) {
        if self.level == HistoryLevel::None || self.max_runs == 0 {
            return;
        }
        if self.level == HistoryLevel::Partial {
            for p in &mut entry.players {
                p.private_value = None;
                p.payoff = None;
            }
        }
        self.entries.insert(0, entry);
        self.entries.truncate(self.max_runs);
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

fn round2(x: f64) -> Value {
    let r = (x * 100.0).round() / 100.0;
    Value::from(if r == 0.0 { 0.0 } else { r })
}

/// Renders the view as a JSON array of runs (most recent first), each
/// listing every player's id and action plus, for Full views, private value
/// and payoff. Numbers are rounded to two decimals.
pub fn serialize_history(view: &HistoryView) -> Result<String, PromptError> {
    if view.entries.is_empty() {
        return Err(PromptError::EmptyHistory);
    }
    let full = view.level == HistoryLevel::Full;
    let runs: Vec<Value> = view
        .entries
        .iter()
        .map(|entry| {
            let players: Vec<Value> = entry
                .players
                .iter()
                .map(|p| {
                    let mut m = Map::new();
                    m.insert("id".into(), Value::from(p.id));
                    m.insert("action".into(), p.action.map_or(Value::Null, round2));
                    if full {
                        if let Some(v) = p.private_value {
                            m.insert("private_value".into(), round2(v));
                        }
                        if let Some(u) = p.payoff {
                            m.insert("payoff".into(), round2(u));
                        }
                    }
                    Value::Object(m)
                })
                .collect();
            let mut run = Map::new();
            run.insert("run".into(), Value::from(entry.run));
            run.insert("players".into(), Value::Array(players));
            Value::Object(run)
        })
        .collect();
    Ok(Value::Array(runs).to_string())
}
