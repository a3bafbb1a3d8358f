//! Game definitions, metrics, agent strategies and prompt rendering for
//! evaluating language-model agents in multi-agent economic games.

pub mod agents;
pub mod game;
pub mod metrics;
pub mod prompts;
