//! Game-configuration groups and seed derivation.

use std::fmt;

use econ_arena_core::game::{AuctionParams, BeautyContestParams, GameError, GameSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Scale of a sampled game: beauty-contest upper bounds in `[10, 100)`,
/// `[100, 1000)` or `[1000, 10000)`; auction values around 50, 500 or 5000
/// with assets 100, 1000 or 10000.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    L,
    M,
    H,
}

impl Group {
    pub fn upper_range(self) -> (u32, u32) {
        match self {
            Group::L => (10, 100),
            Group::M => (100, 1000),
            Group::H => (1000, 10000),
        }
    }

    /// `(mean, std, assets)` of the private-value distribution.
    pub fn value_distribution(self) -> (f64, f64, f64) {
        match self {
            Group::L => (50.0, 10.0, 100.0),
            Group::M => (500.0, 100.0, 1000.0),
            Group::H => (5000.0, 1000.0, 10000.0),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::L => "L",
            Group::M => "M",
            Group::H => "H",
        })
    }
}

/// What a session's game is built from before any sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum GameTemplate {
    BeautyContest {
        players: usize,
        params: BeautyContestParams,
    },
    SecondPriceAuction {
        bidders: usize,
        /// Per-seat assets; replaced by the group's assets when sampling.
        assets: Vec<f64>,
        /// Fixed values; when absent, values are drawn from `value_mean` and
        /// `value_std` (or the group's distribution).
        private_values: Option<Vec<f64>>,
        value_mean: Option<f64>,
        value_std: Option<f64>,
        entrance_fee: f64,
    },
}

impl GameTemplate {
    pub fn players(&self) -> usize {
        match self {
            GameTemplate::BeautyContest { players, .. } => *players,
            GameTemplate::SecondPriceAuction { bidders, .. } => *bidders,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            GameTemplate::BeautyContest { .. } => "beauty_contest",
            GameTemplate::SecondPriceAuction { .. } => "second_price_auction",
        }
    }
}

const MAX_VALUE_DRAWS: usize = 100;

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Draws a private value from `N(mean, std)`, rounded to cents and redrawn
/// until it lies in `(0, assets]`.
fn draw_value<R: Rng + ?Sized>(normal: &Normal<f64>, assets: f64, rng: &mut R) -> f64 {
    for _ in 0..MAX_VALUE_DRAWS {
        let v = round2(normal.sample(rng));
        if v > 0.0 && v <= assets {
            return v;
        }
    }
    assets
}

/// Builds the concrete game of one session.
pub fn sample_group_spec<R: Rng + ?Sized>(
    template: &GameTemplate,
    group: Option<Group>,
    rng: &mut R,
) -> Result<GameSpec, GameError> {
    match template {
        GameTemplate::BeautyContest { players, params } => {
            let mut params = params.clone();
            if let Some(g) = group {
                let (lo, hi) = g.upper_range();
                params = BeautyContestParams::new(
                    params.lower,
                    f64::from(rng.random_range(lo..hi)),
                    params.multiplier,
                    params.prize,
                )?;
            }
            GameSpec::beauty_contest(*players, params)
        }
        GameTemplate::SecondPriceAuction { bidders, assets, private_values, value_mean, value_std, entrance_fee } => {
            let (assets, mean_std) = match group {
                Some(g) => {
                    let (mean, std, a) = g.value_distribution();
                    (vec![a; *bidders], Some((mean, std)))
                }
                None => (assets.clone(), value_mean.zip(*value_std)),
            };
            let values = match (private_values, group, mean_std) {
                (Some(v), None, _) => v.clone(),
                (_, _, Some((mean, std))) => {
                    let normal = Normal::new(mean, std).map_err(|e| GameError::Config(e.to_string()))?;
                    assets.iter().map(|&a| draw_value(&normal, a, rng)).collect()
                }
                _ => return Err(GameError::Config("auction needs private_values or a value distribution".into())),
            };
            Ok(GameSpec::auction(AuctionParams::new(assets, values, *entrance_fee)?))
        }
    }
}

/// Seed of session `index`: the first draw of the master generator's stream
/// `index`. Sessions can therefore be run in any order or in parallel.
pub fn session_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.random()
}

/// Generator for spec sampling within a session.
pub fn spec_rng(session_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(session_seed)
}

/// Generator for one seat's draws in one run.
pub fn seat_rng(session_seed: u64, run_index: usize, seat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(session_seed);
    rng.set_stream(1 + (run_index as u64) * 1024 + seat as u64);
    rng
}
