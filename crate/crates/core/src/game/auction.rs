use super::{ActionProfile, AuctionParams, GameError, RunResult, Settlement};

pub(super) fn settle(params: &AuctionParams, profile: &ActionProfile) -> Result<Settlement, GameError> {
    let present: Vec<(usize, f64)> = profile.present().collect();
    if present.len() < 2 {
        return Err(GameError::InvalidRun { present: present.len() });
    }
    // Highest bid wins; among equal highest bids the minimal seat id wins.
    let (winner, _) = present
        .iter()
        .copied()
        .fold(None, |best: Option<(usize, f64)>, (seat, bid)| match best {
            Some((_, top)) if bid <= top => best,
            _ => Some((seat, bid)),
        })
        .expect("at least two bids");
    let price = present
        .iter()
        .filter(|&&(seat, _)| seat != winner)
        .map(|&(_, bid)| bid)
        .fold(f64::NEG_INFINITY, f64::max);

    let payoffs = (0..profile.len())
        .map(|seat| {
            let assets = params.assets[seat];
            Some(if seat == winner {
                assets - price + params.private_values[seat]
            } else if profile.get(seat).is_some() {
                assets
            } else {
                assets - params.entrance_fee
            })
        })
        .collect();

    Ok(Settlement {
        target: None,
        winners: vec![winner],
        price_paid: Some(price),
        payoffs,
    })
}

pub(super) fn ne_payoffs(params: &AuctionParams) -> Vec<f64> {
    let truthful = ActionProfile::full(&params.private_values);
    settle(params, &truthful)
        .expect("truthful profile has every bidder present")
        .payoffs
        .into_iter()
        .map(|u| u.unwrap_or_default())
        .collect()
}

/// Resolves a sealed-bid second-price auction among the present bids.
///
/// The winner's payoff is its final asset `A - price + v`; other bidders keep
/// `A`, and absent (rule-breaking) bidders pay the entrance fee.
pub fn resolve_auction(params: &AuctionParams, profile: &ActionProfile) -> Result<RunResult, GameError> {
    if profile.len() != params.bidders() {
        return Err(GameError::Config(format!(
            "profile has {} seats, auction has {} bidders",
            profile.len(),
            params.bidders()
        )));
    }
    let settled = settle(params, profile)?;
    Ok(settled.into_result(params.private_values.clone(), ne_payoffs(params)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(values: &[f64]) -> AuctionParams {
        AuctionParams::new(vec![100.0; values.len()], values.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn truthful_bids() {
        let p = params(&[60.0, 50.0, 40.0]);
        let r = resolve_auction(&p, &ActionProfile::full(&[60.0, 50.0, 40.0])).unwrap();
        assert_eq!(r.winners, vec![0]);
        assert_eq!(r.price_paid, Some(50.0));
        assert_eq!(r.payoffs, vec![Some(110.0), Some(100.0), Some(100.0)]);
        assert_eq!(r.ne_payoffs, vec![110.0, 100.0, 100.0]);
        assert_eq!(r.ne_actions, vec![60.0, 50.0, 40.0]);
    }

    #[test]
    fn equal_bids_go_to_minimal_id() {
        let p = params(&[60.0, 50.0, 40.0]);
        let r = resolve_auction(&p, &ActionProfile::full(&[50.0, 50.0, 50.0])).unwrap();
        assert_eq!(r.winners, vec![0]);
        assert_eq!(r.price_paid, Some(50.0));
        assert_eq!(r.payoffs[0], Some(110.0));
    }

    #[test]
    fn overbidding_loses_money() {
        let p = params(&[60.0, 50.0, 40.0]);
        let r = resolve_auction(&p, &ActionProfile::full(&[60.0, 65.0, 40.0])).unwrap();
        assert_eq!(r.winners, vec![1]);
        assert_eq!(r.price_paid, Some(60.0));
        assert_eq!(r.payoffs, vec![Some(100.0), Some(90.0), Some(100.0)]);
    }

    #[test]
    fn absent_bidder_pays_entrance_fee() {
        let p = AuctionParams::new(vec![100.0; 3], vec![60.0, 50.0, 40.0], 5.0).unwrap();
        let r = resolve_auction(&p, &ActionProfile::new(vec![None, Some(50.0), Some(40.0)])).unwrap();
        assert_eq!(r.winners, vec![1]);
        assert_eq!(r.price_paid, Some(40.0));
        assert_eq!(r.payoffs, vec![Some(95.0), Some(110.0), Some(100.0)]);
        let lone = ActionProfile::new(vec![None, Some(50.0), None]);
        assert_eq!(resolve_auction(&p, &lone), Err(GameError::InvalidRun { present: 1 }));
    }
}
