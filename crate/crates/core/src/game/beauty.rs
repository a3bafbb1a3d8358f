use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use super::{ActionProfile, BeautyContestParams, GameError, RunResult, Settlement, TIE_TOLERANCE};

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite action")
}

/// `p * mean(actions)` over the present seats, exact.
fn exact_target(params: &BeautyContestParams, actions: &[(usize, f64)]) -> BigRational {
    let sum = actions.iter().fold(BigRational::from_integer(0.into()), |acc, &(_, a)| acc + exact(a));
    let num = BigInt::from(params.multiplier.num());
    let den = BigInt::from(params.multiplier.den()) * BigInt::from(actions.len());
    sum * BigRational::new(num, den)
}

pub(super) fn settle(params: &BeautyContestParams, profile: &ActionProfile) -> Result<Settlement, GameError> {
    let present: Vec<(usize, f64)> = profile.present().collect();
    if present.len() < 2 {
        return Err(GameError::InvalidRun { present: present.len() });
    }
    let target = exact_target(params, &present);
    let distances: Vec<(usize, f64)> = present
        .iter()
        .map(|&(seat, a)| {
            let d = (exact(a) - &target).abs();
            (seat, d.to_f64().unwrap_or(f64::INFINITY))
        })
        .collect();
    let best = distances.iter().map(|&(_, d)| d).fold(f64::INFINITY, f64::min);
    let winners: Vec<usize> = distances
        .iter()
        .filter(|&&(_, d)| d - best <= TIE_TOLERANCE)
        .map(|&(seat, _)| seat)
        .collect();

    let share = params.prize / winners.len() as f64;
    let payoffs = profile
        .as_slice()
        .iter()
        .enumerate()
        .map(|(seat, _)| Some(if winners.contains(&seat) { share } else { 0.0 }))
        .collect();

    Ok(Settlement {
        target: target.to_f64(),
        winners,
        price_paid: None,
        payoffs,
    })
}

pub(super) fn ne_payoffs(params: &BeautyContestParams, players: usize) -> Vec<f64> {
    vec![params.prize / players as f64; players]
}

/// Resolves a beauty contest: seats closest to `p` times the mean of the
/// present actions split the prize. Absent seats are excluded from the mean,
/// cannot win and receive 0.
pub fn resolve_beauty_contest(params: &BeautyContestParams, profile: &ActionProfile) -> Result<RunResult, GameError> {
    let n = profile.len();
    let settled = settle(params, profile)?;
    Ok(settled.into_result(vec![params.lower; n], ne_payoffs(params, n)))
}

/// Iterated elimination of strictly dominated strategies on the grid
/// `lower, lower + step, ...` for an `players`-seat contest.
///
/// A seat's loss is its distance to the target, which includes its own
/// action: `|s - p (s + O) / n| = (1 - p/n) |s - p O / (n - p)|`, where `O` is
/// the sum of the opponents' actions. Against opponents drawn from the
/// surviving set the best responses therefore fill
/// `[c * min S, c * max S]` with `c = p (n - 1) / (n - p) < 1`, and a grid point
/// outside that interval (clipped to the action range) is strictly dominated
/// by the nearest feasible point inside it.
pub fn iterated_elimination(
    params: &BeautyContestParams,
    players: usize,
    grid_step: f64,
) -> Result<Vec<f64>, GameError> {
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(GameError::Config(format!("grid step must be positive, got {grid_step}")));
    }
    if players < 2 {
        return Err(GameError::Config(format!("need at least 2 players, got {players}")));
    }
    let steps = ((params.upper - params.lower) / grid_step + 1e-9).floor() as usize;
    let mut survivors: Vec<BigRational> = (0..=steps)
        .map(|k| exact(params.lower + k as f64 * grid_step))
        .collect();

    let p = BigRational::new(params.multiplier.num().into(), params.multiplier.den().into());
    let n = BigRational::from_integer(players.into());
    let one = BigRational::from_integer(1.into());
    let c = &p * (&n - &one) / (&n - &p);
    let lower = exact(params.lower);
    let upper = exact(params.upper);

    loop {
        let min = survivors.first().cloned().expect("grid is nonempty");
        let max = survivors.last().cloned().expect("grid is nonempty");
        let reply_lo = std::cmp::min(&c * &min, upper.clone());
        let reply_hi = std::cmp::max(&c * &max, lower.clone());
        let before = survivors.len();
        survivors.retain(|s| *s >= reply_lo && *s <= reply_hi);
        if survivors.len() == before {
            break;
        }
    }
    Ok(survivors.iter().map(|s| s.to_f64().unwrap_or(f64::NAN)).collect())
}
