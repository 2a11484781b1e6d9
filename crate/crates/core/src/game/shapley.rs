use super::{binary_table, check_players, AttributionVector, Coalition, Game};
use crate::error::{Error, Result};
use crate::Rational;

/// Player ceiling for the factorial-time permutation oracle.
pub const PERMUTATION_ORACLE_MAX_PLAYERS: usize = 8;

/// Exact Shapley values by the subset-sum formula
/// `phi_i = sum_{S not containing i} s!(m-1-s)!/m! * (v(S+i) - v(S))`.
///
/// Coalitions are visited in ascending bitmask order and players in ascending
/// index order, so the floating-point reduction order is fixed.
pub fn shapley(game: &impl Game) -> Result<AttributionVector> {
    let m = game.players();
    check_players("shapley players", Coalition::MAX_PLAYERS, m)?;
    if m == 0 {
        return Ok(AttributionVector::zeros(0));
    }
    let weights = shapley_weights(m);
    let mut phi = vec![0.0; m];
    for bits in 0..1u32 << m {
        let s = Coalition::from_bits(bits);
        let base = game.value(s);
        let w = weights[s.len().min(m - 1)];
        for (i, slot) in phi.iter_mut().enumerate() {
            if !s.contains(i) {
                *slot += w * (game.value(s.with(i)) - base);
            }
        }
    }
    Ok(AttributionVector::new(phi))
}

/// `w(s) = 1 / (m * C(m-1, s))` for `s = 0..m-1`.
fn shapley_weights(m: usize) -> Vec<f64> {
    let mut weights = Vec::with_capacity(m);
    let mut binom = 1.0f64;
    for s in 0..m {
        weights.push(1.0 / (m as f64 * binom));
        binom = binom * (m - 1 - s) as f64 / (s + 1) as f64;
    }
    weights
}

/// Exact rational Shapley values of a voting game (worths in {0, 1}).
pub fn shapley_exact(game: &impl Game) -> Result<Vec<Rational>> {
    let table = binary_table(game, Coalition::MAX_PLAYERS)?;
    Ok(shapley_exact_from_table(game.players(), &table))
}

/// Exact Shapley values from a win table indexed by coalition bitmask.
///
/// Swing counts per coalition size are weighted by `s!(m-1-s)!` and divided by
/// `m!`; with `m <= 30` every intermediate fits in an `i128`.
pub(crate) fn shapley_exact_from_table(m: usize, wins: &[bool]) -> Vec<Rational> {
    debug_assert_eq!(wins.len(), 1 << m);
    if m == 0 {
        return Vec::new();
    }
    let mut swings = vec![vec![0i64; m]; m];
    for (bits, &win) in wins.iter().enumerate() {
        let s = Coalition::from_bits(bits as u32);
        let size = s.len();
        for (i, row) in swings.iter_mut().enumerate() {
            if !s.contains(i) {
                let with = wins[s.with(i).bits() as usize];
                row[size] += with as i64 - win as i64;
            }
        }
    }
    let fact = factorials(m);
    swings
        .iter()
        .map(|row| {
            let numer: i128 = row
                .iter()
                .enumerate()
                .take(m)
                .map(|(s, &count)| count as i128 * fact[s] * fact[m - 1 - s])
                .sum();
            Rational::new(numer, fact[m])
        })
        .collect()
}

fn factorials(m: usize) -> Vec<i128> {
    let mut out = vec![1i128; m + 1];
    for k in 1..=m {
        out[k] = out[k - 1] * k as i128;
    }
    out
}

/// Shapley values as the average marginal contribution over all `m!` player
/// orderings. Independent of [`shapley`]; intended as a test oracle.
pub fn shapley_permutation_oracle(game: &impl Game) -> Result<AttributionVector> {
    let m = game.players();
    if m > PERMUTATION_ORACLE_MAX_PLAYERS {
        return Err(Error::Capacity {
            what: "permutation oracle players",
            limit: PERMUTATION_ORACLE_MAX_PLAYERS,
            got: m,
        });
    }
    let mut totals = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    let mut count = 0u64;
    heap_permutations(&mut order, m, &mut |perm| {
        count += 1;
        let mut s = Coalition::EMPTY;
        let mut prev = game.value(s);
        for &i in perm {
            s = s.with(i);
            let next = game.value(s);
            totals[i] += next - prev;
            prev = next;
        }
    });
    Ok(AttributionVector::new(
        totals
            .into_iter()
            .map(|t| t / count.max(1) as f64)
            .collect(),
    ))
}

fn heap_permutations(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(items);
        return;
    }
    heap_permutations(items, k - 1, visit);
    for i in 0..k - 1 {
        if k.is_multiple_of(2) {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
        heap_permutations(items, k - 1, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{FnGame, TabularGame, UnanimityGame};

    fn toy_game() -> impl Game {
        // players 0..3 stand for features 1..4 of the worked example
        FnGame::new(4, |s: Coalition| {
            let win = s.contains(0) && (s.contains(1) || (s.contains(2) && s.contains(3)));
            win as u8 as f64
        })
    }

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn unanimity_pair_splits_evenly() {
        let g = UnanimityGame {
            players: 2,
            dictators: Coalition::full(2),
        };
        assert_eq!(shapley(&g).unwrap().to_vec(), vec![0.5, 0.5]);
        assert_eq!(shapley_exact(&g).unwrap(), vec![r(1, 2), r(1, 2)]);
        assert_eq!(
            shapley_permutation_oracle(&g).unwrap().to_vec(),
            vec![0.5, 0.5]
        );
    }

    #[test]
    fn additive_game_gives_unit_values() {
        let g = FnGame::new(3, |s: Coalition| s.len() as f64);
        let phi = shapley(&g).unwrap();
        for v in phi.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn worked_example_values() {
        let g = toy_game();
        let expected = vec![r(7, 12), r(3, 12), r(1, 12), r(1, 12)];
        assert_eq!(shapley_exact(&g).unwrap(), expected);
        let oracle = shapley_permutation_oracle(&g).unwrap();
        let fast = shapley(&g).unwrap();
        for ((a, b), e) in oracle.iter().zip(fast.iter()).zip(&expected) {
            let e = *e.numer() as f64 / *e.denom() as f64;
            assert!((a - e).abs() < 1e-12);
            assert!((b - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_players() {
        let g = TabularGame::new(0, vec![0.0]).unwrap();
        assert!(shapley(&g).unwrap().is_empty());
        assert!(shapley_exact(&g).unwrap().is_empty());
    }

    #[test]
    fn oracle_rejects_large_games() {
        let g = FnGame::new(9, |_| 0.0);
        assert!(matches!(
            shapley_permutation_oracle(&g),
            Err(Error::Capacity { limit: 8, .. })
        ));
    }

    #[test]
    fn capacity_error_beyond_thirty_players() {
        let g = FnGame::new(31, |_| 0.0);
        assert!(matches!(shapley(&g), Err(Error::Capacity { .. })));
    }

    #[test]
    fn exact_rejects_non_binary() {
        let g = FnGame::new(2, |s: Coalition| s.len() as f64);
        assert!(matches!(shapley_exact(&g), Err(Error::Domain(_))));
    }

    #[test]
    fn exact_handles_thirty_player_weights_without_overflow() {
        // factorials up to 30! must stay in range
        let f = factorials(30);
        assert!(f[30] > 0);
        assert_eq!(f[30] / f[29], 30);
    }
}
