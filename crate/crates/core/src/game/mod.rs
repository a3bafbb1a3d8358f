//! Single-round competitive games: the p-beauty contest and the sealed-bid
//! second-price auction.
//!
//! Everything in this module is a pure function of its inputs. Resolution,
//! equilibrium profiles and the payoff oracle all go through the same
//! [`GameSpec::resolve`] entry point so that metrics and tests agree on what a
//! payoff is.

mod auction;
mod beauty;

use serde::{Deserialize, Serialize};
use std::fmt;

pub use auction::resolve_auction;
pub use beauty::{iterated_elimination, resolve_beauty_contest};

/// Absolute tolerance used when deciding whether two beauty-contest distances tie.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error("invalid run: {present} present action(s), at least 2 required")]
    InvalidRun { present: usize },
    #[error("seat {seat} out of range for {players} players")]
    SeatOutOfRange { seat: usize, players: usize },
    #[error("seat {0} has no payoff in this run")]
    NoPayoff(usize),
}

/// Which game a [`GameSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    BeautyContest,
    SecondPriceAuction,
}

impl GameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::BeautyContest => "beauty_contest",
            GameKind::SecondPriceAuction => "second_price_auction",
        }
    }

    /// Name of the numeric key carrying the action in agent responses.
    pub fn action_key(self) -> &'static str {
        match self {
            GameKind::BeautyContest => "answer",
            GameKind::SecondPriceAuction => "bid",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The target multiplier `p`, held as an exact ratio `num / den` with `0 < p < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMultiplier")]
pub struct Multiplier {
    num: u32,
    den: u32,
}

#[derive(Deserialize)]
struct RawMultiplier {
    num: u32,
    den: u32,
}

impl TryFrom<RawMultiplier> for Multiplier {
    type Error = GameError;
    fn try_from(raw: RawMultiplier) -> Result<Self, Self::Error> {
        Multiplier::new(raw.num, raw.den)
    }
}

impl Multiplier {
    pub const TWO_THIRDS: Multiplier = Multiplier { num: 2, den: 3 };

    pub fn new(num: u32, den: u32) -> Result<Self, GameError> {
        if num == 0 || den == 0 || num >= den {
            return Err(GameError::Config(format!(
                "multiplier must satisfy 0 < p < 1, got {num}/{den}"
            )));
        }
        Ok(Multiplier { num, den })
    }

    pub fn num(self) -> u32 {
        self.num
    }

    pub fn den(self) -> u32 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

impl Default for Multiplier {
    fn default() -> Self {
        Multiplier::TWO_THIRDS
    }
}

/// Parameters of a p-beauty contest on `[lower, upper]` with prize `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeautyContest")]
pub struct BeautyContestParams {
    pub lower: f64,
    pub upper: f64,
    pub multiplier: Multiplier,
    pub prize: f64,
}

#[derive(Deserialize)]
struct RawBeautyContest {
    lower: f64,
    upper: f64,
    multiplier: Multiplier,
    prize: f64,
}

impl TryFrom<RawBeautyContest> for BeautyContestParams {
    type Error = GameError;
    fn try_from(raw: RawBeautyContest) -> Result<Self, Self::Error> {
        BeautyContestParams::new(raw.lower, raw.upper, raw.multiplier, raw.prize)
    }
}

impl BeautyContestParams {
    pub fn new(lower: f64, upper: f64, multiplier: Multiplier, prize: f64) -> Result<Self, GameError> {
        if !(lower.is_finite() && upper.is_finite() && 0.0 <= lower && lower < upper) {
            return Err(GameError::Config(format!(
                "beauty contest bounds must satisfy 0 <= lower < upper, got [{lower}, {upper}]"
            )));
        }
        if !(prize.is_finite() && prize > 0.0) {
            return Err(GameError::Config(format!("prize must be positive, got {prize}")));
        }
        Ok(BeautyContestParams { lower, upper, multiplier, prize })
    }

    /// `[0, upper]` with p = 2/3 and a unit prize.
    pub fn standard(upper: f64) -> Result<Self, GameError> {
        Self::new(0.0, upper, Multiplier::TWO_THIRDS, 1.0)
    }
}

/// Per-bidder assets and private values for a second-price auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAuction")]
pub struct AuctionParams {
    pub assets: Vec<f64>,
    pub private_values: Vec<f64>,
    pub entrance_fee: f64,
}

#[derive(Deserialize)]
struct RawAuction {
    assets: Vec<f64>,
    private_values: Vec<f64>,
    entrance_fee: f64,
}

impl TryFrom<RawAuction> for AuctionParams {
    type Error = GameError;
    fn try_from(raw: RawAuction) -> Result<Self, Self::Error> {
        AuctionParams::new(raw.assets, raw.private_values, raw.entrance_fee)
    }
}

impl AuctionParams {
    pub fn new(assets: Vec<f64>, private_values: Vec<f64>, entrance_fee: f64) -> Result<Self, GameError> {
        if assets.len() != private_values.len() {
            return Err(GameError::Config(format!(
                "{} assets given for {} private values",
                assets.len(),
                private_values.len()
            )));
        }
        if assets.len() < 2 {
            return Err(GameError::Config("an auction needs at least 2 bidders".into()));
        }
        for (i, (&a, &v)) in assets.iter().zip(&private_values).enumerate() {
            if !(a.is_finite() && v.is_finite() && v > 0.0 && v <= a) {
                return Err(GameError::Config(format!(
                    "bidder {i}: need 0 < value <= assets, got value {v}, assets {a}"
                )));
            }
        }
        if !(entrance_fee.is_finite() && entrance_fee >= 0.0) {
            return Err(GameError::Config(format!("entrance fee must be >= 0, got {entrance_fee}")));
        }
        Ok(AuctionParams { assets, private_values, entrance_fee })
    }

    pub fn bidders(&self) -> usize {
        self.assets.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Game {
    BeautyContest(BeautyContestParams),
    SecondPriceAuction(AuctionParams),
}

/// A fully parameterized game instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct GameSpec {
    players: usize,
    game: Game,
}

#[derive(Deserialize)]
struct RawSpec {
    players: usize,
    game: Game,
}

impl TryFrom<RawSpec> for GameSpec {
    type Error = GameError;
    fn try_from(raw: RawSpec) -> Result<Self, Self::Error> {
        match raw.game {
            Game::BeautyContest(p) => GameSpec::beauty_contest(raw.players, p),
            Game::SecondPriceAuction(p) => {
                if p.bidders() != raw.players {
                    return Err(GameError::Config(format!(
                        "auction has {} bidders but players = {}",
                        p.bidders(),
                        raw.players
                    )));
                }
                Ok(GameSpec::auction(p))
            }
        }
    }
}

impl GameSpec {
    pub fn beauty_contest(players: usize, params: BeautyContestParams) -> Result<Self, GameError> {
        if players < 2 {
            return Err(GameError::Config(format!("need at least 2 players, got {players}")));
        }
        Ok(GameSpec { players, game: Game::BeautyContest(params) })
    }

    pub fn auction(params: AuctionParams) -> Self {
        GameSpec { players: params.bidders(), game: Game::SecondPriceAuction(params) }
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn kind(&self) -> GameKind {
        match self.game {
            Game::BeautyContest(_) => GameKind::BeautyContest,
            Game::SecondPriceAuction(_) => GameKind::SecondPriceAuction,
        }
    }

    pub fn beauty_params(&self) -> Option<&BeautyContestParams> {
        match &self.game {
            Game::BeautyContest(p) => Some(p),
            Game::SecondPriceAuction(_) => None,
        }
    }

    pub fn auction_params(&self) -> Option<&AuctionParams> {
        match &self.game {
            Game::SecondPriceAuction(p) => Some(p),
            Game::BeautyContest(_) => None,
        }
    }

    fn check_seat(&self, seat: usize) -> Result<(), GameError> {
        if seat >= self.players {
            return Err(GameError::SeatOutOfRange { seat, players: self.players });
        }
        Ok(())
    }

    /// Valid action interval for a seat.
    pub fn action_range(&self, seat: usize) -> (f64, f64) {
        match &self.game {
            Game::BeautyContest(p) => (p.lower, p.upper),
            Game::SecondPriceAuction(p) => (0.0, p.assets[seat]),
        }
    }

    /// Resolves a run. Absent seats are excluded from resolution.
    pub fn resolve(&self, profile: &ActionProfile) -> Result<RunResult, GameError> {
        if profile.len() != self.players {
            return Err(GameError::Config(format!(
                "profile has {} seats, game has {}",
                profile.len(),
                self.players
            )));
        }
        match &self.game {
            Game::BeautyContest(p) => resolve_beauty_contest(p, profile),
            Game::SecondPriceAuction(p) => resolve_auction(p, profile),
        }
    }

    /// The record of a run that could not be resolved.
    pub fn invalid_result(&self) -> RunResult {
        RunResult {
            target: None,
            winners: Vec::new(),
            price_paid: None,
            payoffs: vec![None; self.players],
            ne_actions: nash_profile(self),
            ne_payoffs: ne_payoffs(self),
            deviations: vec![None; self.players],
            valid: false,
            rounds: 1,
        }
    }
}

/// Per-seat actions for one run; `None` marks a seat excluded by a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionProfile(Vec<Option<f64>>);

impl ActionProfile {
    pub fn new(actions: Vec<Option<f64>>) -> Self {
        ActionProfile(actions)
    }

    pub fn full(actions: &[f64]) -> Self {
        ActionProfile(actions.iter().copied().map(Some).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, seat: usize) -> Option<f64> {
        self.0.get(seat).copied().flatten()
    }

    pub fn with_action(&self, seat: usize, action: f64) -> Self {
        let mut next = self.0.clone();
        next[seat] = Some(action);
        ActionProfile(next)
    }

    /// `(seat, action)` pairs for every present seat.
    pub fn present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().enumerate().filter_map(|(i, a)| a.map(|a| (i, a)))
    }

    pub fn present_count(&self) -> usize {
        self.0.iter().filter(|a| a.is_some()).count()
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.0
    }
}

/// Winners, price and payoffs of a resolved profile, before equilibrium
/// reference values are attached.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Settlement {
    pub target: Option<f64>,
    pub winners: Vec<usize>,
    pub price_paid: Option<f64>,
    pub payoffs: Vec<Option<f64>>,
}

impl Settlement {
    fn into_result(self, ne_actions: Vec<f64>, ne_payoffs: Vec<f64>) -> RunResult {
        let n = self.payoffs.len();
        RunResult {
            target: self.target,
            winners: self.winners,
            price_paid: self.price_paid,
            payoffs: self.payoffs,
            ne_actions,
            ne_payoffs,
            deviations: vec![None; n],
            valid: true,
            rounds: 1,
        }
    }
}

/// Resolved outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub target: Option<f64>,
    pub winners: Vec<usize>,
    pub price_paid: Option<f64>,
    /// `None` for seats with no payoff (every seat, when the run is invalid).
    pub payoffs: Vec<Option<f64>>,
    pub ne_actions: Vec<f64>,
    pub ne_payoffs: Vec<f64>,
    pub deviations: Vec<Option<f64>>,
    pub valid: bool,
    pub rounds: u32,
}

impl RunResult {
    pub fn is_winner(&self, seat: usize) -> bool {
        self.winners.contains(&seat)
    }
}

/// Why an action was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ActionViolation {
    NonFinite,
    OutOfRange { lower: f64, upper: f64 },
    OverAssets { assets: f64 },
}

impl fmt::Display for ActionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionViolation::NonFinite => f.write_str("action is not a finite number"),
            ActionViolation::OutOfRange { lower, upper } => {
                write!(f, "action outside [{lower}, {upper}]")
            }
            ActionViolation::OverAssets { assets } => write!(f, "bid exceeds assets {assets}"),
        }
    }
}

/// Checks a seat's action against the game rules.
pub fn validate_action(spec: &GameSpec, seat: usize, action: f64) -> Result<(), ActionViolation> {
    if !action.is_finite() {
        return Err(ActionViolation::NonFinite);
    }
    match spec.game() {
        Game::BeautyContest(p) => {
            if action < p.lower || action > p.upper {
                return Err(ActionViolation::OutOfRange { lower: p.lower, upper: p.upper });
            }
        }
        Game::SecondPriceAuction(p) => {
            let assets = p.assets[seat];
            if action > assets {
                return Err(ActionViolation::OverAssets { assets });
            }
            if action < 0.0 {
                return Err(ActionViolation::OutOfRange { lower: 0.0, upper: assets });
            }
        }
    }
    Ok(())
}

/// The unique pure Nash equilibrium: everyone at the lower bound in the
/// beauty contest, truthful bids in the auction.
pub fn nash_profile(spec: &GameSpec) -> Vec<f64> {
    match spec.game() {
        Game::BeautyContest(p) => vec![p.lower; spec.players()],
        Game::SecondPriceAuction(p) => p.private_values.clone(),
    }
}

/// Payoffs when every seat plays [`nash_profile`].
pub fn ne_payoffs(spec: &GameSpec) -> Vec<f64> {
    match spec.game() {
        Game::BeautyContest(p) => beauty::ne_payoffs(p, spec.players()),
        Game::SecondPriceAuction(p) => auction::ne_payoffs(p),
    }
}

/// Payoff of `seat` under `profile`.
pub fn payoff_of(spec: &GameSpec, profile: &ActionProfile, seat: usize) -> Result<f64, GameError> {
    spec.check_seat(seat)?;
    let result = spec.resolve(profile)?;
    result.payoffs[seat].ok_or(GameError::NoPayoff(seat))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bc(n: usize, upper: f64) -> GameSpec {
        GameSpec::beauty_contest(n, BeautyContestParams::standard(upper).unwrap()).unwrap()
    }

    fn auction3() -> GameSpec {
        GameSpec::auction(AuctionParams::new(vec![100.0; 3], vec![60.0, 50.0, 40.0], 0.0).unwrap())
    }

    #[test]
    fn validate_examples() {
        assert_eq!(validate_action(&bc(5, 100.0), 0, 33.5), Ok(()));
        assert_eq!(
            validate_action(&bc(5, 100.0), 0, -1.0),
            Err(ActionViolation::OutOfRange { lower: 0.0, upper: 100.0 })
        );
        assert_eq!(
            validate_action(&auction3(), 1, 150.0),
            Err(ActionViolation::OverAssets { assets: 100.0 })
        );
        assert_eq!(validate_action(&auction3(), 1, f64::NAN), Err(ActionViolation::NonFinite));
        assert_eq!(validate_action(&bc(5, 100.0), 0, 100.0), Ok(()));
    }

    #[test]
    fn nash_profiles() {
        assert_eq!(nash_profile(&bc(5, 100.0)), vec![0.0; 5]);
        assert_eq!(nash_profile(&bc(5, 10_000.0)), vec![0.0; 5]);
        assert_eq!(nash_profile(&auction3()), vec![60.0, 50.0, 40.0]);
    }

    #[test]
    fn ne_payoff_examples() {
        assert_eq!(ne_payoffs(&bc(5, 100.0)), vec![0.2; 5]);
        assert_eq!(ne_payoffs(&auction3()), vec![110.0, 100.0, 100.0]);
        let tied = GameSpec::auction(AuctionParams::new(vec![100.0; 3], vec![50.0, 50.0, 40.0], 0.0).unwrap());
        assert_eq!(ne_payoffs(&tied), vec![100.0, 100.0, 100.0]);
    }

    #[test]
    fn payoff_of_examples() {
        let spec = auction3();
        let profile = ActionProfile::full(&[60.0, 65.0, 40.0]);
        assert_eq!(payoff_of(&spec, &profile, 1).unwrap(), 90.0);
        assert_eq!(payoff_of(&spec, &profile, 2).unwrap(), 100.0);
        let zeros = ActionProfile::full(&[0.0; 5]);
        assert_eq!(payoff_of(&bc(5, 100.0), &zeros, 3).unwrap(), 0.2);
        assert!(matches!(payoff_of(&spec, &profile, 7), Err(GameError::SeatOutOfRange { .. })));
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(Multiplier::new(1, 1).is_err());
        assert!(Multiplier::new(3, 2).is_err());
        assert!(Multiplier::new(0, 2).is_err());
        assert!(BeautyContestParams::standard(0.0).is_err());
        assert!(BeautyContestParams::new(0.0, 100.0, Multiplier::TWO_THIRDS, 0.0).is_err());
        assert!(AuctionParams::new(vec![100.0, 100.0], vec![120.0, 50.0], 0.0).is_err());
        assert!(AuctionParams::new(vec![100.0, 100.0], vec![0.0, 50.0], 0.0).is_err());
        assert!(AuctionParams::new(vec![100.0], vec![50.0], 0.0).is_err());
        assert!(GameSpec::beauty_contest(1, BeautyContestParams::standard(100.0).unwrap()).is_err());
    }

    #[test]
    fn spec_serde_enforces_invariants() {
        let spec = auction3();
        let json = serde_json::to_string(&spec).unwrap();
        let back: GameSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = json.replace("\"players\":3", "\"players\":4");
        assert!(serde_json::from_str::<GameSpec>(&bad).is_err());
        let bad_mult = r#"{"players":2,"game":{"beauty_contest":{"lower":0,"upper":10,"multiplier":{"num":3,"den":3},"prize":1}}}"#;
        assert!(serde_json::from_str::<GameSpec>(bad_mult).is_err());
    }
}
