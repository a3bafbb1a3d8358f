//! Rationality and strategic-reasoning metrics computed from resolved runs.
//!
//! * payoff ratio `r_i`: mean realized payoff over the equilibrium payoff;
//! * deviation distance `d_it` and its grand mean;
//! * rule-break frequency, win rate and a convergence verdict over run series.

use serde::{Deserialize, Serialize};

use crate::game::{payoff_of, ActionProfile, Game, GameError, GameSpec, RunResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("optimal payoff is zero; ratio undefined")]
    ZeroOptimal,
    #[error("equilibrium payoff is zero; deviation undefined")]
    ZeroNePayoff,
    #[error("no observations to aggregate")]
    EmptyInput,
    #[error("series of length {len} is too short for window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("denominator must be positive, got {0}")]
    NonpositiveDenominator(f64),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// `r = mean(payoffs) / optimal`.
pub fn payoff_ratio(payoffs: &[f64], optimal: f64) -> Result<f64, MetricsError> {
    if payoffs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if optimal == 0.0 {
        return Err(MetricsError::ZeroOptimal);
    }
    Ok(mean(payoffs) / optimal)
}

/// Distance of one action from equilibrium play.
///
/// Auctions use `|π(a) / π(a*) - 1|` where `π` is the seat's final asset
/// against the realized opponent bids in `context` (only the seat's own bid is
/// replaced). Beauty contests use the range-normalized gap
/// `|a - a*| / (upper - lower)`, since the ratio form is undefined at `a* = 0`.
pub fn deviation_distance(
    spec: &GameSpec,
    seat: usize,
    action: f64,
    context: &ActionProfile,
) -> Result<f64, MetricsError> {
    if seat >= spec.players() {
        return Err(GameError::SeatOutOfRange { seat, players: spec.players() }.into());
    }
    match spec.game() {
        Game::BeautyContest(p) => Ok((action - p.lower).abs() / (p.upper - p.lower)),
        Game::SecondPriceAuction(p) => {
            let realized = payoff_of(spec, &context.with_action(seat, action), seat)?;
            let truthful = payoff_of(spec, &context.with_action(seat, p.private_values[seat]), seat)?;
            if truthful == 0.0 {
                return Err(MetricsError::ZeroNePayoff);
            }
            Ok((realized / truthful - 1.0).abs())
        }
    }
}

/// Grand mean of a per-agent, per-run deviation matrix; `None` cells
/// (violations) are excluded.
pub fn mean_deviation(cells: &[Vec<Option<f64>>]) -> Result<f64, MetricsError> {
    DeviationStats::from_cells(cells).map(|s| s.mean)
}

/// Deviation samples retained alongside their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationStats {
    pub per_run: Vec<f64>,
    pub mean: f64,
}

impl DeviationStats {
    pub fn from_cells(cells: &[Vec<Option<f64>>]) -> Result<Self, MetricsError> {
        let per_run: Vec<f64> = cells.iter().flatten().filter_map(|d| *d).collect();
        if per_run.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let mean = mean(&per_run);
        Ok(DeviationStats { per_run, mean })
    }
}

/// Resolves `profile`, attaching per-seat deviations. A profile with fewer
/// than two present actions yields an invalid result instead of an error.
pub fn evaluate_run(spec: &GameSpec, profile: &ActionProfile) -> RunResult {
    let mut result = match spec.resolve(profile) {
        Ok(r) => r,
        Err(_) => return spec.invalid_result(),
    };
    result.deviations = (0..spec.players())
        .map(|seat| {
            let action = profile.get(seat)?;
            deviation_distance(spec, seat, action, profile).ok()
        })
        .collect();
    result
}

/// How a seat's turn failed, if it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    /// Unparseable reply or an action that breaks the game rules.
    RuleBreak,
    /// Transport failure or timeout; not the agent's rule break.
    Provider,
}

/// One agent's view of one run: the unit the aggregate metrics count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeatOutcome {
    pub fault: Option<FaultClass>,
    pub run_valid: bool,
    pub action: Option<f64>,
    pub payoff: Option<f64>,
    pub ne_payoff: f64,
    pub deviation: Option<f64>,
    pub won: bool,
}

impl SeatOutcome {
    fn counts(&self) -> bool {
        self.fault.is_none() && self.run_valid
    }
}

/// Percentage of runs with a rule break.
pub fn rule_break_rate(outcomes: &[SeatOutcome]) -> Result<f64, MetricsError> {
    if outcomes.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let breaks = outcomes.iter().filter(|o| o.fault == Some(FaultClass::RuleBreak)).count();
    Ok(100.0 * breaks as f64 / outcomes.len() as f64)
}

/// Fraction of valid, non-violating runs the agent won.
pub fn win_rate(outcomes: &[SeatOutcome]) -> Result<f64, MetricsError> {
    let counted: Vec<&SeatOutcome> = outcomes.iter().filter(|o| o.counts()).collect();
    if counted.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(counted.iter().filter(|o| o.won).count() as f64 / counted.len() as f64)
}

/// Asset over initial assets, and asset over the equilibrium asset.
pub fn asset_and_payoff_fractions(initial: f64, final_asset: f64, ne_asset: f64) -> Result<(f64, f64), MetricsError> {
    if initial.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(MetricsError::NonpositiveDenominator(initial));
    }
    if ne_asset.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(MetricsError::NonpositiveDenominator(ne_asset));
    }
    Ok((final_asset / initial, final_asset / ne_asset))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub series: Vec<f64>,
    pub converged: bool,
    pub settled_at: Option<usize>,
    pub epsilon: f64,
    pub window: usize,
}

/// Converged when the last `window` consecutive steps all move by at most
/// `epsilon`; `settled_at` is the first index after which every step does.
pub fn convergence_verdict(series: &[f64], epsilon: f64, window: usize) -> Result<ConvergenceVerdict, MetricsError> {
    if window == 0 || series.len() < window + 1 {
        return Err(MetricsError::SeriesTooShort { len: series.len(), window });
    }
    let still = |t: usize| (series[t] - series[t - 1]).abs() <= epsilon;
    let n = series.len();
    let converged = (n - window..n).all(still);
    let settled_at = converged.then(|| {
        let mut start = n - 1;
        while start > 0 && still(start) {
            start -= 1;
        }
        start
    });
    Ok(ConvergenceVerdict {
        series: series.to_vec(),
        converged,
        settled_at,
        epsilon,
        window,
    })
}

/// Per-agent aggregate over a set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub agent_name: String,
    pub observations: usize,
    pub mean_payoff: Option<f64>,
    pub payoff_ratio: Option<f64>,
    pub mean_deviation: Option<f64>,
    pub rule_break_pct: f64,
    pub win_rate: Option<f64>,
    pub completed: bool,
    pub convergence: Option<ConvergenceVerdict>,
}

/// Aggregates one agent's outcomes. Violating runs count toward the rule-break
/// rate only; an agent that never completed a run gets no payoff, deviation
/// or win figures.
pub fn summarize(agent_name: &str, outcomes: &[SeatOutcome]) -> Result<MetricsSummary, MetricsError> {
    let rule_break_pct = rule_break_rate(outcomes)?;
    let completed = outcomes.iter().any(|o| o.fault.is_none());
    let counted: Vec<&SeatOutcome> = outcomes.iter().filter(|o| o.counts()).collect();

    let payoffs: Vec<f64> = counted.iter().filter_map(|o| o.payoff).collect();
    let (mean_payoff, ratio) = if payoffs.is_empty() || !completed {
        (None, None)
    } else {
        let optimal = mean(&counted.iter().map(|o| o.ne_payoff).collect::<Vec<_>>());
        (Some(mean(&payoffs)), payoff_ratio(&payoffs, optimal).ok())
    };
    let deviations: Vec<f64> = counted.iter().filter_map(|o| o.deviation).collect();
    let mean_deviation = (!deviations.is_empty() && completed).then(|| mean(&deviations));

    Ok(MetricsSummary {
        agent_name: agent_name.to_string(),
        observations: outcomes.len(),
        mean_payoff,
        payoff_ratio: ratio,
        mean_deviation,
        rule_break_pct,
        win_rate: if completed { win_rate(outcomes).ok() } else { None },
        completed,
        convergence: None,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AuctionParams, BeautyContestParams};

    fn auction() -> GameSpec {
        GameSpec::auction(AuctionParams::new(vec![100.0; 3], vec![60.0, 50.0, 40.0], 0.0).unwrap())
    }

    fn bc(upper: f64) -> GameSpec {
        GameSpec::beauty_contest(5, BeautyContestParams::standard(upper).unwrap()).unwrap()
    }

    fn ok(payoff: f64, ne: f64, won: bool) -> SeatOutcome {
        SeatOutcome {
            fault: None,
            run_valid: true,
            action: Some(0.0),
            payoff: Some(payoff),
            ne_payoff: ne,
            deviation: Some(0.0),
            won,
        }
    }

    fn broken() -> SeatOutcome {
        SeatOutcome {
            fault: Some(FaultClass::RuleBreak),
            run_valid: true,
            action: None,
            payoff: Some(0.0),
            ne_payoff: 0.2,
            deviation: None,
            won: false,
        }
    }

    #[test]
    fn payoff_ratio_examples() {
        assert!((payoff_ratio(&[0.2, 0.2, 0.2], 0.2).unwrap() - 1.0).abs() < 1e-12);
        assert!((payoff_ratio(&[110.0, 110.0], 100.0).unwrap() - 1.1).abs() < 1e-12);
        assert_eq!(payoff_ratio(&[0.0, 0.0, 0.0], 0.2).unwrap(), 0.0);
        assert_eq!(payoff_ratio(&[1.0], 0.0), Err(MetricsError::ZeroOptimal));
        assert_eq!(payoff_ratio(&[], 1.0), Err(MetricsError::EmptyInput));
    }

    /// Brute-force oracle: resolve both profiles explicitly and take the ratio.
    #[test]
    fn auction_deviation_matches_oracle() {
        let spec = auction();
        let realized = ActionProfile::full(&[60.0, 65.0, 40.0]);
        let with_65 = spec.resolve(&realized).unwrap().payoffs[1].unwrap();
        let with_truth = spec.resolve(&ActionProfile::full(&[60.0, 50.0, 40.0])).unwrap().payoffs[1].unwrap();
        assert_eq!((with_65, with_truth), (90.0, 100.0));
        let d = deviation_distance(&spec, 1, 65.0, &realized).unwrap();
        assert!((d - (with_65 / with_truth - 1.0).abs()).abs() < 1e-15);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn deviation_zero_at_equilibrium() {
        let spec = auction();
        let truthful = ActionProfile::full(&[60.0, 50.0, 40.0]);
        for seat in 0..3 {
            assert_eq!(deviation_distance(&spec, seat, [60.0, 50.0, 40.0][seat], &truthful).unwrap(), 0.0);
        }
        assert_eq!(deviation_distance(&bc(100.0), 2, 0.0, &ActionProfile::full(&[0.0; 5])).unwrap(), 0.0);
    }

    #[test]
    fn beauty_deviation_is_range_normalized() {
        let d = deviation_distance(&bc(100.0), 0, 33.5, &ActionProfile::full(&[33.5, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((d - 0.335).abs() < 1e-12);
    }

    #[test]
    fn mean_deviation_examples() {
        assert_eq!(mean_deviation(&[vec![Some(0.0), Some(0.0)]]).unwrap(), 0.0);
        assert!((mean_deviation(&[vec![Some(0.1), Some(0.3)]]).unwrap() - 0.2).abs() < 1e-15);
        let m = mean_deviation(&[vec![Some(0.0), Some(0.2)], vec![Some(0.1), Some(0.1)]]).unwrap();
        assert!((m - 0.1).abs() < 1e-15);
        assert_eq!(mean_deviation(&[vec![None]]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn rule_break_examples() {
        assert_eq!(rule_break_rate(&vec![broken(); 150]).unwrap(), 100.0);
        assert_eq!(rule_break_rate(&vec![ok(0.2, 0.2, true); 150]).unwrap(), 0.0);
        let mut one = vec![ok(0.2, 0.2, true); 149];
        one.push(broken());
        let rate = rule_break_rate(&one).unwrap();
        assert!((rate - 100.0 / 150.0).abs() < 1e-12);
        assert_eq!(format!("{rate:.2}"), "0.67");
        assert_eq!(rule_break_rate(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn provider_faults_are_not_rule_breaks() {
        let mut fault = broken();
        fault.fault = Some(FaultClass::Provider);
        assert_eq!(rule_break_rate(&[fault, ok(0.2, 0.2, true)]).unwrap(), 0.0);
    }

    #[test]
    fn win_rate_examples() {
        assert_eq!(win_rate(&vec![ok(0.2, 0.2, true); 10]).unwrap(), 1.0);
        assert_eq!(win_rate(&vec![ok(0.0, 0.2, false); 10]).unwrap(), 0.0);
        assert_eq!(win_rate(&[broken()]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn convergence_examples() {
        let v = convergence_verdict(&[50.0, 33.0, 22.0, 0.0, 0.0, 0.0], 1e-6, 2).unwrap();
        assert!(v.converged);
        assert_eq!(v.settled_at, Some(3));
        let v = convergence_verdict(&[10.0, 20.0, 10.0, 20.0, 10.0, 20.0], 1e-6, 2).unwrap();
        assert!(!v.converged);
        assert_eq!(v.settled_at, None);
        let v = convergence_verdict(&[33.3, 22.2, 14.8, 14.8, 14.8, 14.8], 0.01, 3).unwrap();
        assert!(v.converged);
        assert_eq!(v.settled_at, Some(2));
        assert_eq!(
            convergence_verdict(&[1.0, 1.0], 0.1, 2),
            Err(MetricsError::SeriesTooShort { len: 2, window: 2 })
        );
    }

    #[test]
    fn constant_series_settles_at_zero_and_flips_on_jump() {
        let mut s = vec![7.0; 5];
        let v = convergence_verdict(&s, 1e-6, 2).unwrap();
        assert_eq!((v.converged, v.settled_at), (true, Some(0)));
        s.push(8.0);
        assert!(!convergence_verdict(&s, 1e-6, 2).unwrap().converged);
    }

    #[test]
    fn fractions() {
        assert_eq!(asset_and_payoff_fractions(100.0, 110.0, 100.0).unwrap(), (1.1, 1.1));
        assert_eq!(asset_and_payoff_fractions(100.0, 100.0, 100.0).unwrap(), (1.0, 1.0));
        assert_eq!(asset_and_payoff_fractions(100.0, 90.0, 100.0).unwrap(), (0.9, 0.9));
        assert!(asset_and_payoff_fractions(0.0, 90.0, 100.0).is_err());
        assert!(asset_and_payoff_fractions(100.0, 90.0, 0.0).is_err());
    }

    #[test]
    fn summary_of_failed_agent() {
        let s = summarize("violator", &vec![broken(); 150]).unwrap();
        assert!(!s.completed);
        assert_eq!(s.rule_break_pct, 100.0);
        assert_eq!((s.mean_payoff, s.payoff_ratio, s.mean_deviation, s.win_rate), (None, None, None, None));
    }

    #[test]
    fn summary_at_equilibrium() {
        let s = summarize("rational", &vec![ok(0.2, 0.2, true); 20]).unwrap();
        assert!(s.completed);
        assert_eq!(s.payoff_ratio, Some(1.0));
        assert_eq!(s.mean_deviation, Some(0.0));
        assert_eq!(s.win_rate, Some(1.0));
        assert_eq!(s.rule_break_pct, 0.0);
    }

    #[test]
    fn evaluate_run_attaches_deviations() {
        let spec = auction();
        let r = evaluate_run(&spec, &ActionProfile::full(&[60.0, 65.0, 40.0]));
        assert!(r.valid);
        assert!((r.deviations[1].unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(r.deviations[0], Some(0.0));
        let invalid = evaluate_run(&spec, &ActionProfile::new(vec![Some(1.0), None, None]));
        assert!(!invalid.valid);
        assert!(invalid.winners.is_empty());
        assert!(invalid.payoffs.iter().all(Option::is_none));
    }
}
