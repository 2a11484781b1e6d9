//! Voting power indices that split a unanimity game's payoff equally among
//! its common dictators.

use super::{binary_table, AttributionVector, Coalition, Game};
use crate::error::{Error, Result};

const TABLE_MAX_PLAYERS: usize = 25;

/// Banzhaf swing counts rescaled to sum to `v(N) - v(∅)`.
///
/// Swings are signed marginal contributions, so non-monotone games are
/// handled; when every player's net swing count is zero the result is zero.
pub fn banzhaf_normalized(game: &impl Game) -> Result<AttributionVector> {
    let m = game.players();
    let wins = binary_table(game, TABLE_MAX_PLAYERS)?;
    let mut swings = vec![0i64; m];
    for (bits, &win) in wins.iter().enumerate() {
        let s = Coalition::from_bits(bits as u32);
        for (i, count) in swings.iter_mut().enumerate() {
            if !s.contains(i) {
                *count += wins[s.with(i).bits() as usize] as i64 - win as i64;
            }
        }
    }
    let total: i64 = swings.iter().sum();
    let surplus = wins[wins.len() - 1] as i64 - wins[0] as i64;
    if total == 0 {
        return Ok(AttributionVector::zeros(m));
    }
    Ok(AttributionVector::new(
        swings
            .iter()
            .map(|&c| c as f64 * surplus as f64 / total as f64)
            .collect(),
    ))
}

/// Minimal winning coalitions from a win table: winning coalitions none of
/// whose proper subsets wins. Ascending by bitmask.
pub(crate) fn minimal_winning_from_table(players: usize, wins: &[bool]) -> Vec<Coalition> {
    // below[S]: some proper subset of S wins
    let mut below = vec![false; wins.len()];
    let mut out = Vec::new();
    for bits in 0..wins.len() {
        let s = Coalition::from_bits(bits as u32);
        let mut any = false;
        for i in s.iter() {
            let t = s.without(i).bits() as usize;
            if wins[t] || below[t] {
                any = true;
                break;
            }
        }
        below[bits] = any;
        if wins[bits] && !any {
            out.push(s);
        }
    }
    debug_assert!(out.iter().all(|s| s.span() <= players));
    out
}

pub fn minimal_winning_coalitions(game: &impl Game) -> Result<Vec<Coalition>> {
    let wins = binary_table(game, TABLE_MAX_PLAYERS)?;
    Ok(minimal_winning_from_table(game.players(), &wins))
}

/// Deegan-Packel index: each minimal winning coalition is equally likely and
/// splits its unit payoff equally among its members.
pub fn deegan_packel(game: &impl Game) -> Result<AttributionVector> {
    let mwc = nonempty_mwc(game)?;
    let mut gamma = vec![0.0; game.players()];
    let weight = 1.0 / mwc.len() as f64;
    for s in &mwc {
        // the empty coalition can only be minimal when it wins outright
        if s.is_empty() {
            continue;
        }
        let share = weight / s.len() as f64;
        for i in s.iter() {
            gamma[i] += share;
        }
    }
    Ok(AttributionVector::new(gamma))
}

/// Holler-Packel public good index: minimal winning coalition memberships
/// per player, rescaled to unit sum.
pub fn holler_packel_normalized(game: &impl Game) -> Result<AttributionVector> {
    let mwc = nonempty_mwc(game)?;
    let mut counts = vec![0u64; game.players()];
    for s in &mwc {
        for i in s.iter() {
            counts[i] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(AttributionVector::zeros(game.players()));
    }
    Ok(AttributionVector::new(
        counts.iter().map(|&c| c as f64 / total as f64).collect(),
    ))
}

fn nonempty_mwc(game: &impl Game) -> Result<Vec<Coalition>> {
    let mwc = minimal_winning_coalitions(game)?;
    if mwc.is_empty() {
        return Err(Error::domain("the game has no winning coalition"));
    }
    Ok(mwc)
}

/// The common dictators `C` when the game is exactly `v(S) = 1[S ⊇ C]`.
pub fn unanimity_dictators(game: &impl Game) -> Result<Option<Coalition>> {
    let wins = binary_table(game, TABLE_MAX_PLAYERS)?;
    let mwc = minimal_winning_from_table(game.players(), &wins);
    let [dictators] = mwc[..] else {
        return Ok(None);
    };
    let unanimous = wins
        .iter()
        .enumerate()
        .all(|(bits, &w)| w == dictators.is_subset_of(Coalition::from_bits(bits as u32)));
    Ok(unanimous.then_some(dictators))
}
