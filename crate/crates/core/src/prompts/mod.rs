//! Prompt rendering from template packs.
//!
//! A turn's user message is the game's rule block followed by an output
//! instruction. Follow-up turns (run 2 onwards with history enabled) swap the
//! output instruction for the history template, which embeds the serialized
//! past runs. Every turn is a fresh single prompt.

mod history;
mod template;

pub use history::{serialize_history, HistoryEntry, HistoryLevel, HistoryView, PlayerRecord};
pub use template::{Locale, Template, TemplatePack, Variant};

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::agents::ResponseSchema;
use crate::game::{AuctionParams, BeautyContestParams, Game, GameKind, GameSpec, Multiplier};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("malformed template: {0}")]
    Template(String),
    #[error("unknown placeholder {{{0}}}")]
    UnknownPlaceholder(String),
    #[error("follow-up turn requested without history entries")]
    MissingHistory,
    #[error("history view has no entries")]
    EmptyHistory,
    #[error("seat {seat} out of range for {players} players")]
    SeatOutOfRange { seat: usize, players: usize },
}

/// Environment as far as the prompt is concerned: only the rational
/// environment changes the text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptEnv {
    Melee,
    Rational,
    SelfCompete,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions<'a> {
    pub cot: bool,
    pub history: Option<&'a HistoryView>,
    /// 1-based run index within the session.
    pub run_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub schema: ResponseSchema,
    pub variant: Variant,
    pub locale: Locale,
}

/// Formats a number as an integer when it is one, otherwise with at most two
/// decimals.
pub fn format_number(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    if r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{}", r as i64)
    } else {
        let s = format!("{r:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn multiplier_words(m: Multiplier) -> String {
    match (m.num(), m.den()) {
        (2, 3) => "two thirds".to_string(),
        (1, 2) => "half".to_string(),
        (n, d) => format!("{n}/{d}"),
    }
}

fn english() -> &'static TemplatePack {
    static PACK: OnceLock<TemplatePack> = OnceLock::new();
    PACK.get_or_init(TemplatePack::english)
}

/// Key list of a built-in English template.
pub fn response_schema(game: GameKind, variant: Variant) -> ResponseSchema {
    english().get(game, variant).schema.clone()
}

fn is_follow_up(opts: &RenderOptions<'_>) -> Result<Option<String>, PromptError> {
    match opts.history {
        Some(view) if view.level != HistoryLevel::None && opts.run_index > 1 => {
            if view.is_empty() {
                return Err(PromptError::MissingHistory);
            }
            serialize_history(view).map(Some)
        }
        _ => Ok(None),
    }
}

fn compose(
    pack: &TemplatePack,
    game: GameKind,
    env: PromptEnv,
    opts: &RenderOptions<'_>,
    vars: &mut Vec<(&'static str, String)>,
) -> Result<PromptBundle, PromptError> {
    let rules_variant = if env == PromptEnv::Rational { Variant::Rational } else { Variant::Base };
    let rules_t = pack.get(game, rules_variant);
    let history = is_follow_up(opts)?;
    let output_t = match (&history, opts.cot) {
        (Some(_), _) => pack.get(game, Variant::History),
        (None, true) => pack.get(game, Variant::Cot),
        (None, false) => rules_t,
    };
    if let Some(h) = history {
        vars.push(("historical information", h));
    }
    let output_section = if output_t.variant == Variant::History { "FOLLOWUP" } else { "OUTPUT" };
    let rules = rules_t.render("RULES", vars)?;
    let output = output_t.render(output_section, vars)?;
    Ok(PromptBundle {
        system: output_t.render("SYSTEM", vars)?,
        user: format!("{rules}\n\n{output}"),
        schema: output_t.schema.clone(),
        variant: output_t.variant,
        locale: pack.locale.clone(),
    })
}

pub fn render_beauty_contest(
    pack: &TemplatePack,
    params: &BeautyContestParams,
    players: usize,
    seat: usize,
    env: PromptEnv,
    opts: &RenderOptions<'_>,
) -> Result<PromptBundle, PromptError> {
    if seat >= players {
        return Err(PromptError::SeatOutOfRange { seat, players });
    }
    let mut vars = vec![
        ("number of players", players.to_string()),
        ("lower bound", format_number(params.lower)),
        ("upper bound", format_number(params.upper)),
        ("multiplier", multiplier_words(params.multiplier)),
        ("number of runs", opts.run_index.saturating_sub(1).to_string()),
        ("ID of the player", seat.to_string()),
    ];
    compose(pack, GameKind::BeautyContest, env, opts, &mut vars)
}

pub fn render_auction(
    pack: &TemplatePack,
    params: &AuctionParams,
    seat: usize,
    env: PromptEnv,
    opts: &RenderOptions<'_>,
) -> Result<PromptBundle, PromptError> {
    let players = params.bidders();
    if seat >= players {
        return Err(PromptError::SeatOutOfRange { seat, players });
    }
    let mut vars = vec![
        ("number of bidders", players.to_string()),
        ("private value of the bidder", format_number(params.private_values[seat])),
        ("assets of the bidder", format_number(params.assets[seat])),
        ("number of runs", opts.run_index.saturating_sub(1).to_string()),
        ("ID of the bidder", seat.to_string()),
    ];
    compose(pack, GameKind::SecondPriceAuction, env, opts, &mut vars)
}

pub fn render_prompt(
    pack: &TemplatePack,
    spec: &GameSpec,
    seat: usize,
    env: PromptEnv,
    opts: &RenderOptions<'_>,
) -> Result<PromptBundle, PromptError> {
    match spec.game() {
        Game::BeautyContest(p) => render_beauty_contest(pack, p, spec.players(), seat, env, opts),
        Game::SecondPriceAuction(p) => render_auction(pack, p, seat, env, opts),
    }
}
