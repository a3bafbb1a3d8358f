//! Agent descriptors and the built-in (non-LLM) strategies.
//!
//! Remote LLM agents are described here but dispatched by the host, which owns
//! the HTTP client. Every other kind answers by synthesizing a compliant
//! response document, so its action travels through the same parser as a
//! model's reply.

mod parse;

pub use parse::{parse_response, ParsedResponse, ResponseSchema, ResponseViolation};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::time::Duration;

use crate::game::{nash_profile, BeautyContestParams, Game, GameSpec};

/// Connection settings for a chat-completion endpoint. The API key itself is
/// read from `api_key_env` at call time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub endpoint_url: String,
    pub model_id: String,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    #[serde(rename = "timeout_secs", with = "secs")]
    pub timeout: Duration,
    pub max_transport_retries: u32,
    pub initial_backoff_ms: u64,
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Llm(ProviderConfig),
    /// Plays the Nash equilibrium action.
    Rational,
    LevelK { k: u32 },
    Constant { value: f64 },
    /// Uniform over the valid action range, from the session's seeded generator.
    Random,
    /// Replays numeric actions by run index, cycling.
    Replay { actions: Vec<f64> },
    /// Replays raw response texts by run index, cycling.
    Mock { responses: Vec<String> },
    /// Always answers outside the valid range.
    AlwaysViolate,
}

impl Strategy {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Strategy::Llm(_) => "llm",
            Strategy::Rational => "rational",
            Strategy::LevelK { .. } => "level_k",
            Strategy::Constant { .. } => "constant",
            Strategy::Random => "random",
            Strategy::Replay { .. } => "replay",
            Strategy::Mock { .. } => "mock",
            Strategy::AlwaysViolate => "always_violate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub name: String,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl AgentDescriptor {
    pub fn new(name: impl Into<String>, strategy: Strategy) -> Self {
        AgentDescriptor { name: name.into(), strategy }
    }

    pub fn rational() -> Self {
        AgentDescriptor::new("rational", Strategy::Rational)
    }

    pub fn is_llm(&self) -> bool {
        matches!(self.strategy, Strategy::Llm(_))
    }
}

/// Equilibrium action for a seat.
pub fn rational_action(spec: &GameSpec, seat: usize) -> f64 {
    nash_profile(spec)[seat]
}

/// Level-k guess: level 0 anchors at the midpoint of the range, each further
/// level scales by `p`; clamped to the range.
pub fn level_k_action(k: u32, params: &BeautyContestParams) -> f64 {
    let midpoint = (params.lower + params.upper) / 2.0;
    let p = params.multiplier.as_f64();
    let guess = midpoint * p.powi(k as i32);
    guess.clamp(params.lower, params.upper)
}

/// What a scripted agent knows when answering.
#[derive(Debug, Clone, Copy)]
pub struct TurnContext<'a> {
    pub spec: &'a GameSpec,
    pub seat: usize,
    /// 1-based run index within the session.
    pub run_index: usize,
    pub previous_action: Option<f64>,
    pub previous_payoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("agent {0:?} is a remote model and cannot answer locally")]
    RemoteAgent(String),
    #[error("agent {0:?} has an empty script")]
    EmptyScript(String),
}

/// The action a built-in strategy chooses this turn.
pub fn scripted_action<R: Rng + ?Sized>(
    agent: &AgentDescriptor,
    ctx: &TurnContext<'_>,
    rng: &mut R,
) -> Result<f64, AgentError> {
    let spec = ctx.spec;
    let action = match &agent.strategy {
        Strategy::Rational => rational_action(spec, ctx.seat),
        Strategy::LevelK { k } => match spec.game() {
            Game::BeautyContest(p) => level_k_action(*k, p),
            // Truthful bidding is dominant, so every reasoning level bids its value.
            Game::SecondPriceAuction(_) => rational_action(spec, ctx.seat),
        },
        Strategy::Constant { value } => *value,
        Strategy::Random => {
            let (lo, hi) = spec.action_range(ctx.seat);
            rng.random_range(lo..=hi)
        }
        Strategy::Replay { actions } => {
            if actions.is_empty() {
                return Err(AgentError::EmptyScript(agent.name.clone()));
            }
            actions[(ctx.run_index.max(1) - 1) % actions.len()]
        }
        Strategy::AlwaysViolate => 2.0 * spec.action_range(ctx.seat).1,
        Strategy::Mock { .. } | Strategy::Llm(_) => return Err(AgentError::RemoteAgent(agent.name.clone())),
    };
    Ok(action)
}

fn is_numeric_key(key: &str) -> bool {
    matches!(
        key,
        "answer" | "bid" | "popular answer" | "previous answer" | "previous bid" | "previous payoff"
    )
}

/// Builds a response document for `action` filling every key of `schema`.
pub fn render_response(action: f64, ctx: &TurnContext<'_>, schema: &ResponseSchema, agent: &str) -> String {
    let mut doc = Map::new();
    for key in &schema.keys {
        let value = if *key == schema.action_key || key == "popular answer" {
            Value::from(action)
        } else if key.starts_with("previous") && key != "previous payoff" {
            Value::from(ctx.previous_action.unwrap_or(action))
        } else if key == "previous payoff" {
            Value::from(ctx.previous_payoff.unwrap_or(0.0))
        } else if is_numeric_key(key) {
            Value::from(action)
        } else {
            Value::from(format!("{agent} plays a fixed strategy"))
        };
        doc.insert(key.clone(), value);
    }
    if !doc.contains_key(&schema.action_key) {
        doc.insert(schema.action_key.clone(), Value::from(action));
    }
    Value::Object(doc).to_string()
}

/// Raw reply text of a non-LLM agent.
pub fn scripted_reply<R: Rng + ?Sized>(
    agent: &AgentDescriptor,
    ctx: &TurnContext<'_>,
    schema: &ResponseSchema,
    rng: &mut R,
) -> Result<String, AgentError> {
    if let Strategy::Mock { responses } = &agent.strategy {
        if responses.is_empty() {
            return Err(AgentError::EmptyScript(agent.name.clone()));
        }
        return Ok(responses[(ctx.run_index.max(1) - 1) % responses.len()].clone());
    }
    let action = scripted_action(agent, ctx, rng)?;
    Ok(render_response(action, ctx, schema, &agent.name))
}
