use econ_arena_core::agents::{AgentDescriptor, Strategy};
use econ_arena_core::prompts::PromptEnv;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of seats in the rational environment: one subject and four
/// equilibrium players.
pub const RATIONAL_SEATS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Melee,
    Rational,
    SelfCompete,
    Senior,
}

impl Environment {
    pub fn as_str(self) -> &'static str {
        match self {
            Environment::Melee => "melee",
            Environment::Rational => "rational",
            Environment::SelfCompete => "self_compete",
            Environment::Senior => "senior",
        }
    }

    pub fn prompt_env(self) -> PromptEnv {
        match self {
            Environment::Rational => PromptEnv::Rational,
            Environment::SelfCompete => PromptEnv::SelfCompete,
            Environment::Melee | Environment::Senior => PromptEnv::Melee,
        }
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("roster mismatch: {0}")]
pub struct RosterMismatch(pub String);

fn is_rational(a: &AgentDescriptor) -> bool {
    matches!(a.strategy, Strategy::Rational)
}

/// Expands the configured agents into one descriptor per seat.
///
/// `players` is the seat count requested by the game section, if any.
pub fn build_roster(
    env: Environment,
    agents: &[AgentDescriptor],
    players: Option<usize>,
) -> Result<Vec<AgentDescriptor>, RosterMismatch> {
    let mismatch = |msg: String| Err(RosterMismatch(msg));
    let roster = match env {
        Environment::Melee | Environment::Senior => agents.to_vec(),
        Environment::Rational => {
            let subjects: Vec<&AgentDescriptor> = agents.iter().filter(|a| !is_rational(a)).collect();
            let rationals = agents.len() - subjects.len();
            match (subjects.as_slice(), rationals) {
                ([subject], 0) | ([subject], 4) => {
                    let mut seats = vec![(*subject).clone()];
                    seats.extend((1..RATIONAL_SEATS).map(|_| AgentDescriptor::rational()));
                    seats
                }
                _ => {
                    return mismatch(format!(
                        "rational environment needs one non-rational agent (optionally with 4 rational ones), got {} non-rational and {rationals} rational",
                        subjects.len()
                    ))
                }
            }
        }
        Environment::SelfCompete => {
            let Some(first) = agents.first() else {
                return mismatch("self-compete needs an agent".into());
            };
            if agents.iter().any(|a| a != first) {
                return mismatch("self-compete roster entries must all be the same agent".into());
            }
            let n = players.unwrap_or(if agents.len() > 1 { agents.len() } else { RATIONAL_SEATS });
            if agents.len() > 1 && agents.len() != n {
                return mismatch(format!("{} agents listed for {n} seats", agents.len()));
            }
            vec![first.clone(); n]
        }
    };
    if roster.len() < 2 {
        return mismatch(format!("a game needs at least 2 seats, roster has {}", roster.len()));
    }
    if let Some(n) = players {
        if n != roster.len() {
            return mismatch(format!("game has {n} seats but the {env} roster has {}", roster.len()));
        }
    }
    Ok(roster)
}
