//! Template assets: a metadata header line, then `[SECTION]` blocks whose
//! bodies may contain `{placeholder}` markers.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::agents::ResponseSchema;
use crate::game::GameKind;

/// Which template of a game's pack is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Base,
    Rational,
    Cot,
    History,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Base, Variant::Rational, Variant::Cot, Variant::History];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Rational => "rational",
            Variant::Cot => "cot",
            Variant::History => "history",
        }
    }

    fn required_sections(self) -> &'static [&'static str] {
        match self {
            Variant::Base | Variant::Rational => &["SYSTEM", "RULES", "OUTPUT"],
            Variant::Cot => &["SYSTEM", "OUTPUT"],
            Variant::History => &["SYSTEM", "FOLLOWUP"],
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locale {
    En,
    Custom(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub game: GameKind,
    pub variant: Variant,
    pub schema: ResponseSchema,
    sections: HashMap<String, String>,
}

impl Template {
    pub fn parse(text: &str) -> Result<Self, PromptError> {
        let bad = |msg: String| PromptError::Template(msg);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty template".into()))?;
        let meta = header
            .strip_prefix("#!")
            .ok_or_else(|| bad(format!("missing metadata header, got {header:?}")))?;
        let fields: HashMap<&str, &str> = meta
            .split(';')
            .filter_map(|f| f.trim().split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let field = |k: &str| fields.get(k).copied().ok_or_else(|| bad(format!("header lacks {k:?}")));

        let game = match field("game")? {
            "beauty_contest" => GameKind::BeautyContest,
            "second_price_auction" => GameKind::SecondPriceAuction,
            other => return Err(bad(format!("unknown game {other:?}"))),
        };
        let variant = match field("variant")? {
            "base" => Variant::Base,
            "rational" => Variant::Rational,
            "cot" => Variant::Cot,
            "history" => Variant::History,
            other => return Err(bad(format!("unknown variant {other:?}"))),
        };
        let keys: Vec<String> = field("keys")?.split('|').map(|k| k.trim().to_string()).collect();
        let action = field("action")?;
        if !keys.iter().any(|k| k == action) {
            return Err(bad(format!("action key {action:?} not among keys {keys:?}")));
        }

        let mut sections = HashMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        for line in lines {
            let trimmed = line.trim_end();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if name.chars().all(|c| c.is_ascii_uppercase()) && !name.is_empty() {
                    if let Some((n, body)) = current.take() {
                        sections.insert(n, body.join("\n").trim().to_string());
                    }
                    current = Some((name.to_string(), Vec::new()));
                    continue;
                }
            }
            match current.as_mut() {
                Some((_, body)) => body.push(trimmed),
                None if trimmed.is_empty() => {}
                None => return Err(bad(format!("text before first section: {trimmed:?}"))),
            }
        }
        if let Some((n, body)) = current.take() {
            sections.insert(n, body.join("\n").trim().to_string());
        }
        for s in variant.required_sections() {
            if sections.get(*s).is_none_or(|b| b.is_empty()) {
                return Err(bad(format!("{game}/{variant} template lacks section [{s}]")));
            }
        }
        Ok(Template {
            game,
            variant,
            schema: ResponseSchema::new(keys, action),
            sections,
        })
    }

    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections.get(name).map(String::as_str)
    }

    /// Substitutes placeholders in one section. Values are inserted verbatim
    /// and never rescanned; an unknown placeholder is an error.
    pub fn render(&self, name: &str, vars: &[(&str, String)]) -> Result<String, PromptError> {
        let body = self
            .section(name)
            .ok_or_else(|| PromptError::Template(format!("{}/{} lacks [{name}]", self.game, self.variant)))?;
        substitute(body, vars)
    }
}

pub(crate) fn substitute(body: &str, vars: &[(&str, String)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PromptError::Template(format!("unclosed placeholder in {body:?}")))?;
        let name = &after[..close];
        let value = vars
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| v)
            .ok_or_else(|| PromptError::UnknownPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// All templates for one locale.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplatePack {
    pub locale: Locale,
    templates: HashMap<(GameKind, Variant), Template>,
}

const GAMES: [GameKind; 2] = [GameKind::BeautyContest, GameKind::SecondPriceAuction];

macro_rules! english_asset {
    ($game:literal, $variant:literal) => {
        (
            concat!($game, "/", $variant),
            include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/templates/en/", $game, "/", $variant, ".txt")),
        )
    };
}

const ENGLISH: [(&str, &str); 8] = [
    english_asset!("beauty_contest", "base"),
    english_asset!("beauty_contest", "rational"),
    english_asset!("beauty_contest", "cot"),
    english_asset!("beauty_contest", "history"),
    english_asset!("second_price_auction", "base"),
    english_asset!("second_price_auction", "rational"),
    english_asset!("second_price_auction", "cot"),
    english_asset!("second_price_auction", "history"),
];

impl TemplatePack {
    /// The built-in English pack.
    pub fn english() -> Self {
        Self::from_texts(Locale::En, ENGLISH.iter().map(|(name, text)| (name.to_string(), text.to_string())))
            .expect("bundled English templates are well-formed")
    }

    /// Loads `<dir>/<game>/<variant>.txt` for every game and variant.
    pub fn from_dir(dir: &Path, locale: Locale) -> Result<Self, PromptError> {
        let mut texts = Vec::new();
        for game in GAMES {
            for variant in Variant::ALL {
                let name = format!("{game}/{variant}");
                let path = dir.join(game.as_str()).join(format!("{variant}.txt"));
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| PromptError::Template(format!("{}: {e}", path.display())))?;
                texts.push((name, text));
            }
        }
        Self::from_texts(locale, texts)
    }

    fn from_texts(locale: Locale, texts: impl IntoIterator<Item = (String, String)>) -> Result<Self, PromptError> {
        let mut templates = HashMap::new();
        for (name, text) in texts {
            let t = Template::parse(&text)?;
            if name != format!("{}/{}", t.game, t.variant) {
                return Err(PromptError::Template(format!(
                    "{name}: header names {}/{}",
                    t.game, t.variant
                )));
            }
            templates.insert((t.game, t.variant), t);
        }
        for game in GAMES {
            for variant in Variant::ALL {
                let t = templates
                    .get(&(game, variant))
                    .ok_or_else(|| PromptError::Template(format!("missing template {game}/{variant}")))?;
                if t.schema.action_key != game.action_key() {
                    return Err(PromptError::Template(format!(
                        "{game}/{variant}: action key {:?}, expected {:?}",
                        t.schema.action_key,
                        game.action_key()
                    )));
                }
            }
        }
        Ok(TemplatePack { locale, templates })
    }

    pub fn get(&self, game: GameKind, variant: Variant) -> &Template {
        // from_texts guarantees completeness.
        &self.templates[&(game, variant)]
    }
}

impl Default for TemplatePack {
    fn default() -> Self {
        TemplatePack::english()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn english_pack_loads_with_schemas() {
        let pack = TemplatePack::english();
        let base = pack.get(GameKind::BeautyContest, Variant::Base);
        assert_eq!(base.schema.keys, ["understanding", "popular answer", "answer", "reason"]);
        assert_eq!(pack.get(GameKind::SecondPriceAuction, Variant::Cot).schema.keys, ["bid"]);
    }

    #[test]
    fn substitution_is_single_pass() {
        let out = substitute("a {x} b", &[("x", "{y}".into())]).unwrap();
        assert_eq!(out, "a {y} b");
        assert_eq!(
            substitute("{nope}", &[]),
            Err(PromptError::UnknownPlaceholder("nope".into()))
        );
    }

    #[test]
    fn malformed_templates_rejected() {
        assert!(Template::parse("[SYSTEM]\nhi").is_err());
        let no_action = "#! game=beauty_contest; variant=base; action=guess; keys=answer\n[SYSTEM]\na\n[RULES]\nb\n[OUTPUT]\nc";
        assert!(Template::parse(no_action).is_err());
        let missing = "#! game=beauty_contest; variant=base; action=answer; keys=answer\n[SYSTEM]\na\n[OUTPUT]\nc";
        assert!(Template::parse(missing).is_err());
    }

    #[test]
    fn custom_pack_from_dir() {
        let dir = std::env::temp_dir().join(format!("arena-templates-{}", std::process::id()));
        for (name, text) in ENGLISH {
            let path = dir.join(format!("{name}.txt"));
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, text.replace("clever game player", "sharp game player")).unwrap();
        }
        let pack = TemplatePack::from_dir(&dir, Locale::Custom("en-x".into())).unwrap();
        assert!(pack
            .get(GameKind::BeautyContest, Variant::Base)
            .section("SYSTEM")
            .unwrap()
            .contains("sharp game player"));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
