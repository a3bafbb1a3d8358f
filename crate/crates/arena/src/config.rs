//! TOML experiment configuration: parsing, defaulting, validation and the
//! config digest.

use std::path::{Path, PathBuf};
use std::time::Duration;

use econ_arena_core::agents::{AgentDescriptor, ProviderConfig, Strategy};
use econ_arena_core::game::{BeautyContestParams, Multiplier};
use econ_arena_core::prompts::{HistoryLevel, Locale, TemplatePack};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::roster::{build_roster, Environment};
use crate::sampling::{GameTemplate, Group};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
}

fn schema<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Schema { path: path.into(), message: message.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPolicy {
    pub level: HistoryLevel,
    pub max_runs: usize,
}

/// A validated, fully defaulted experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub environment: Environment,
    /// One descriptor per seat, in seat order.
    pub roster: Vec<AgentDescriptor>,
    /// Sessions per group (or in total when no group is set).
    pub sessions: usize,
    pub runs_per_session: usize,
    pub seed: u64,
    pub cot: bool,
    pub workers: usize,
    pub run_budget_secs: f64,
    pub truncate_responses: bool,
    pub timestamps: bool,
    pub record_prompts: bool,
    pub templates_dir: Option<PathBuf>,
    pub history: HistoryPolicy,
    pub game: GameTemplate,
    /// Sampling groups, swept in order; empty for a fixed game.
    pub groups: Vec<Group>,
}

/// One planned session: its global index and sampling group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionPlan {
    pub index: usize,
    pub group: Option<Group>,
}

impl SessionConfig {
    pub fn plan(&self) -> Vec<SessionPlan> {
        let groups: Vec<Option<Group>> =
            if self.groups.is_empty() { vec![None] } else { self.groups.iter().copied().map(Some).collect() };
        groups
            .into_iter()
            .flat_map(|group| (0..self.sessions).map(move |s| (group, s)))
            .enumerate()
            .map(|(index, (group, _))| SessionPlan { index, group })
            .collect()
    }

    pub fn run_budget(&self) -> Duration {
        Duration::from_secs_f64(self.run_budget_secs)
    }

    pub fn template_pack(&self) -> Result<TemplatePack, ConfigError> {
        match &self.templates_dir {
            None => Ok(TemplatePack::english()),
            Some(dir) => {
                let locale = Locale::Custom(dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
                TemplatePack::from_dir(dir, locale).map_err(|e| ConfigError::Schema {
                    path: "session.templates_dir".into(),
                    message: e.to_string(),
                })
            }
        }
    }

    /// SHA-256 over the canonical JSON form of the resolved config.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = canonical_json(&value);
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Every LLM agent's key variable must be set before a real run starts.
    pub fn check_credentials(&self) -> Result<(), ConfigError> {
        for (i, agent) in self.roster.iter().enumerate() {
            if let Strategy::Llm(p) = &agent.strategy {
                if let Some(var) = &p.api_key_env {
                    if std::env::var_os(var).is_none() {
                        return schema(
                            format!("agents[{}].api_key_env", i),
                            format!("environment variable {var} for agent {:?} is not set", agent.name),
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

/// JSON with object keys sorted at every level.
fn canonical_json(value: &Value) -> String {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", Value::from(k.as_str()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    session: RawSession,
    game: RawGame,
    history: Option<RawHistory>,
    #[serde(default)]
    agents: Vec<RawAgent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSession {
    environment: Environment,
    sessions: Option<usize>,
    runs_per_session: Option<usize>,
    seed: Option<u64>,
    cot: Option<bool>,
    workers: Option<usize>,
    run_budget_secs: Option<f64>,
    truncate_responses: Option<bool>,
    timestamps: Option<bool>,
    record_prompts: Option<bool>,
    templates_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    beauty_contest: Option<RawBeautyContest>,
    auction: Option<RawAuction>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeautyContest {
    players: Option<usize>,
    lower: Option<f64>,
    upper: Option<f64>,
    multiplier_num: Option<u32>,
    multiplier_den: Option<u32>,
    prize: Option<f64>,
    group: Option<OneOrMany<Group>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAuction {
    bidders: Option<usize>,
    assets: Option<OneOrMany<f64>>,
    private_values: Option<Vec<f64>>,
    value_mean: Option<f64>,
    value_std: Option<f64>,
    entrance_fee: Option<f64>,
    group: Option<OneOrMany<Group>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistory {
    level: HistoryLevel,
    max_runs: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: String,
    kind: String,
    k: Option<u32>,
    value: Option<f64>,
    actions: Option<Vec<f64>>,
    responses: Option<Vec<String>>,
    endpoint_url: Option<String>,
    model_id: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    timeout_secs: Option<f64>,
    max_transport_retries: Option<u32>,
    initial_backoff_ms: Option<u64>,
}

pub const DEFAULT_MAX_HISTORY_RUNS: usize = 3;
const DEFAULT_RUN_BUDGET_SECS: f64 = 120.0;
const DEFAULT_TIMEOUT_SECS: f64 = 60.0;
const DEFAULT_RETRIES: u32 = 3;
const DEFAULT_BACKOFF_MS: u64 = 500;

impl RawAgent {
    fn set_fields(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        macro_rules! check {
            ($($f:ident),*) => { $( if self.$f.is_some() { set.push(stringify!($f)); } )* };
        }
        check!(
            k, value, actions, responses, endpoint_url, model_id, api_key_env, temperature, timeout_secs,
            max_transport_retries, initial_backoff_ms
        );
        set
    }

    fn into_descriptor(self, path: &str) -> Result<AgentDescriptor, ConfigError> {
        let allowed: &[&str] = match self.kind.as_str() {
            "llm" => &[
                "endpoint_url",
                "model_id",
                "api_key_env",
                "temperature",
                "timeout_secs",
                "max_transport_retries",
                "initial_backoff_ms",
            ],
            "level_k" => &["k"],
            "constant" => &["value"],
            "replay" => &["actions"],
            "mock" => &["responses"],
            "rational" | "random" | "always_violate" => &[],
            other => return schema(format!("{path}.kind"), format!("unknown agent kind {other:?}")),
        };
        if let Some(extra) = self.set_fields().into_iter().find(|f| !allowed.contains(f)) {
            return schema(format!("{path}.{extra}"), format!("not allowed for kind {:?}", self.kind));
        }
        let required = |field: &str, present: bool| {
            if present { Ok(()) } else { schema(format!("{path}.{field}"), format!("required for kind {:?}", self.kind)) }
        };
        let strategy = match self.kind.as_str() {
            "llm" => {
                required("endpoint_url", self.endpoint_url.is_some())?;
                required("model_id", self.model_id.is_some())?;
                let temperature = self.temperature.unwrap_or(0.0);
                if !(temperature.is_finite() && temperature >= 0.0) {
                    return schema(format!("{path}.temperature"), "must be >= 0");
                }
                let timeout = self.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
                let Ok(timeout) = Duration::try_from_secs_f64(timeout).map(|d| d.max(Duration::from_millis(1))) else {
                    return schema(format!("{path}.timeout_secs"), "must be a positive number of seconds");
                };
                Strategy::Llm(ProviderConfig {
                    endpoint_url: self.endpoint_url.unwrap_or_default(),
                    model_id: self.model_id.unwrap_or_default(),
                    api_key_env: self.api_key_env,
                    temperature,
                    timeout,
                    max_transport_retries: self.max_transport_retries.unwrap_or(DEFAULT_RETRIES),
                    initial_backoff_ms: self.initial_backoff_ms.unwrap_or(DEFAULT_BACKOFF_MS),
                })
            }
            "level_k" => {
                required("k", self.k.is_some())?;
                let k = self.k.unwrap_or_default();
                if k < 1 {
                    return schema(format!("{path}.k"), "level-k agents need k >= 1");
                }
                Strategy::LevelK { k }
            }
            "constant" => {
                required("value", self.value.is_some_and(f64::is_finite))?;
                Strategy::Constant { value: self.value.unwrap_or_default() }
            }
            "replay" => {
                required("actions", self.actions.as_ref().is_some_and(|a| !a.is_empty()))?;
                Strategy::Replay { actions: self.actions.unwrap_or_default() }
            }
            "mock" => {
                required("responses", self.responses.as_ref().is_some_and(|r| !r.is_empty()))?;
                Strategy::Mock { responses: self.responses.unwrap_or_default() }
            }
            "rational" => Strategy::Rational,
            "random" => Strategy::Random,
            _ => Strategy::AlwaysViolate,
        };
        if self.name.trim().is_empty() {
            return schema(format!("{path}.name"), "must not be empty");
        }
        Ok(AgentDescriptor::new(self.name, strategy))
    }
}

fn positive(path: &str, x: Option<usize>, default: usize) -> Result<usize, ConfigError> {
    match x.unwrap_or(default) {
        0 => schema(path, "must be at least 1"),
        n => Ok(n),
    }
}

pub fn parse_config(text: &str) -> Result<SessionConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    resolve(raw)
}

pub fn load_config(path: &Path) -> Result<SessionConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &cfg.templates_dir {
        if dir.is_relative() {
            cfg.templates_dir = Some(path.parent().unwrap_or(Path::new(".")).join(dir));
        }
        cfg.template_pack()?;
    }
    Ok(cfg)
}

fn resolve(raw: RawConfig) -> Result<SessionConfig, ConfigError> {
    let s = raw.session;
    let Some(seed) = s.seed else {
        return schema("session.seed", "a seed is required");
    };
    let sessions = positive("session.sessions", s.sessions, 1)?;
    let runs_per_session = positive("session.runs_per_session", s.runs_per_session, 1)?;
    let workers = positive("session.workers", s.workers, 1)?;
    let run_budget_secs = s.run_budget_secs.unwrap_or(DEFAULT_RUN_BUDGET_SECS);
    if !(run_budget_secs.is_finite() && run_budget_secs > 0.0) {
        return schema("session.run_budget_secs", "must be positive");
    }

    let history = match raw.history {
        None => HistoryPolicy { level: HistoryLevel::None, max_runs: DEFAULT_MAX_HISTORY_RUNS },
        Some(h) => HistoryPolicy {
            level: h.level,
            max_runs: positive("history.max_runs", h.max_runs, DEFAULT_MAX_HISTORY_RUNS)?,
        },
    };
    if history.level != HistoryLevel::None && runs_per_session < 2 {
        return schema(
            "session.runs_per_session",
            format!("history level {:?} needs at least 2 runs per session", history.level),
        );
    }

    let agents = raw
        .agents
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.into_descriptor(&format!("agents[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    if agents.is_empty() {
        return schema("agents", "at least one agent is required");
    }

    let (game_path, requested_players) = match (&raw.game.beauty_contest, &raw.game.auction) {
        (Some(bc), None) => ("game.beauty_contest", bc.players),
        (None, Some(a)) => ("game.auction", a.bidders.or(a.private_values.as_ref().map(Vec::len))),
        (Some(_), Some(_)) => return schema("game", "configure exactly one of beauty_contest or auction"),
        (None, None) => return schema("game", "missing [game.beauty_contest] or [game.auction]"),
    };
    let roster = build_roster(s.environment, &agents, requested_players)
        .or_else(|e| schema("agents", e.0))?;
    let n = roster.len();

    let (game, groups) = match (raw.game.beauty_contest, raw.game.auction) {
        (Some(bc), _) => beauty_template(bc, n, game_path)?,
        (_, Some(a)) => auction_template(a, n, game_path)?,
        _ => unreachable!("checked above"),
    };

    Ok(SessionConfig {
        environment: s.environment,
        roster,
        sessions,
        runs_per_session,
        seed,
        cot: s.cot.unwrap_or(false),
        workers,
        run_budget_secs,
        truncate_responses: s.truncate_responses.unwrap_or(false),
        timestamps: s.timestamps.unwrap_or(true),
        record_prompts: s.record_prompts.unwrap_or(true),
        templates_dir: s.templates_dir,
        history,
        game,
        groups,
    })
}

fn groups_of(field: Option<OneOrMany<Group>>, path: &str) -> Result<Vec<Group>, ConfigError> {
    let groups = field.map(OneOrMany::into_vec).unwrap_or_default();
    let mut seen = groups.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != groups.len() {
        return schema(format!("{path}.group"), "groups must not repeat");
    }
    Ok(groups)
}

fn beauty_template(bc: RawBeautyContest, n: usize, path: &str) -> Result<(GameTemplate, Vec<Group>), ConfigError> {
    let groups = groups_of(bc.group, path)?;
    if !groups.is_empty() && bc.upper.is_some() {
        return schema(format!("{path}.upper"), "the upper bound is sampled when a group is set");
    }
    let multiplier = match (bc.multiplier_num, bc.multiplier_den) {
        (None, None) => Multiplier::TWO_THIRDS,
        (Some(num), Some(den)) => {
            Multiplier::new(num, den).or_else(|e| schema(format!("{path}.multiplier_num"), e.to_string()))?
        }
        _ => return schema(format!("{path}.multiplier_den"), "set both multiplier_num and multiplier_den"),
    };
    // With a group the placeholder upper bound is replaced per session.
    let upper = bc.upper.unwrap_or(100.0);
    let params = BeautyContestParams::new(bc.lower.unwrap_or(0.0), upper, multiplier, bc.prize.unwrap_or(1.0))
        .or_else(|e| schema(path, e.to_string()))?;
    if !groups.is_empty() && params.lower >= 10.0 {
        return schema(format!("{path}.lower"), "must be below every group's upper bound");
    }
    Ok((GameTemplate::BeautyContest { players: n, params }, groups))
}

fn auction_template(a: RawAuction, n: usize, path: &str) -> Result<(GameTemplate, Vec<Group>), ConfigError> {
    let groups = groups_of(a.group, path)?;
    let entrance_fee = a.entrance_fee.unwrap_or(0.0);
    if !(entrance_fee.is_finite() && entrance_fee >= 0.0) {
        return schema(format!("{path}.entrance_fee"), "must be >= 0");
    }
    if !groups.is_empty() {
        for (field, set) in [
            ("assets", a.assets.is_some()),
            ("private_values", a.private_values.is_some()),
            ("value_mean", a.value_mean.is_some()),
            ("value_std", a.value_std.is_some()),
        ] {
            if set {
                return schema(format!("{path}.{field}"), "determined by the group; remove it or the group");
            }
        }
        let template = GameTemplate::SecondPriceAuction {
            bidders: n,
            assets: vec![0.0; n],
            private_values: None,
            value_mean: None,
            value_std: None,
            entrance_fee,
        };
        return Ok((template, groups));
    }

    let assets = match a.assets.map(OneOrMany::into_vec) {
        None => vec![100.0; n],
        Some(v) if v.len() == 1 => vec![v[0]; n],
        Some(v) if v.len() == n => v,
        Some(v) => return schema(format!("{path}.assets"), format!("{} values for {n} bidders", v.len())),
    };
    if let Some((i, a)) = assets.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
        return schema(format!("{path}.assets[{i}]"), format!("must be positive, got {a}"));
    }
    match (&a.private_values, a.value_mean, a.value_std) {
        (Some(v), None, None) => {
            if v.len() != n {
                return schema(format!("{path}.private_values"), format!("{} values for {n} bidders", v.len()));
            }
            econ_arena_core::game::AuctionParams::new(assets.clone(), v.clone(), entrance_fee)
                .or_else(|e| schema(format!("{path}.private_values"), e.to_string()))?;
        }
        (None, Some(mean), Some(std)) => {
            if !(mean.is_finite() && std.is_finite() && std >= 0.0) {
                return schema(format!("{path}.value_std"), "need a finite mean and std >= 0");
            }
        }
        (Some(_), _, _) => {
            return schema(format!("{path}.value_mean"), "give either private_values or value_mean/value_std")
        }
        _ => {
            return schema(
                format!("{path}.private_values"),
                "give private_values, value_mean and value_std, or a group",
            )
        }
    }
    let template = GameTemplate::SecondPriceAuction {
        bidders: n,
        assets,
        private_values: a.private_values,
        value_mean: a.value_mean,
        value_std: a.value_std,
        entrance_fee,
    };
    Ok((template, Vec::new()))
}
