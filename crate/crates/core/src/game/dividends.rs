use std::collections::BTreeMap;
use std::ops::SubAssign;

use super::{check_players, AttributionVector, Coalition, Game};
use crate::error::{Error, Result};

/// Harsanyi dividends of every coalition of a game.
///
/// `base` is the worth of the empty coalition. For games with `v(∅) = 0`
/// (every voting game built by this crate) it is zero and the dividends satisfy
/// `v(S) = Σ_{∅ ≠ T ⊆ S} Δ_T`; in general `v(S) = base + Σ_{∅ ≠ T ⊆ S} Δ_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DividendTable {
    players: usize,
    base: f64,
    entries: Vec<f64>,
}

impl DividendTable {
    pub const MAX_PLAYERS: usize = 20;

    /// Builds a table from explicit dividends; every nonempty coalition of
    /// `players` must be present.
    pub fn from_entries(players: usize, entries: &BTreeMap<Coalition, f64>) -> Result<Self> {
        check_players("dividend table players", Self::MAX_PLAYERS, players)?;
        let mut dense = vec![0.0; 1 << players];
        for bits in 1..1u32 << players {
            let s = Coalition::from_bits(bits);
            dense[bits as usize] = *entries.get(&s).ok_or_else(|| {
                Error::contract(format!("dividend table is missing coalition {s}"))
            })?;
        }
        if let Some(extra) = entries.keys().find(|s| s.span() > players) {
            return Err(Error::contract(format!(
                "coalition {extra} lies outside {players} players"
            )));
        }
        Ok(DividendTable {
            players,
            base: entries.get(&Coalition::EMPTY).copied().unwrap_or(0.0),
            entries: dense,
        })
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn get(&self, coalition: Coalition) -> f64 {
        if coalition.is_empty() {
            0.0
        } else {
            self.entries[coalition.bits() as usize]
        }
    }

    /// Nonempty coalitions with a nonzero dividend, ascending by bitmask.
    pub fn support(&self) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, d)| **d != 0.0)
            .map(|(bits, d)| (Coalition::from_bits(bits as u32), *d))
    }

    /// Worth of `coalition` rebuilt from the dividends of its subsets.
    pub fn reconstruct(&self, coalition: Coalition) -> f64 {
        self.base
            + coalition
                .subsets()
                .skip(1)
                .map(|t| self.get(t))
                .sum::<f64>()
    }
}

/// Möbius inversion over the subset lattice, in place.
///
/// After the call `values[S] = Σ_{T ⊆ S} (-1)^{|S|-|T|} v(T)`, which equals
/// the recursive `Δ_S = v(S) - Σ_{T ⊊ S} Δ_T` once `v(∅)` is subtracted out.
pub(crate) fn mobius_in_place<T: Copy + SubAssign>(values: &mut [T], players: usize) {
    debug_assert_eq!(values.len(), 1 << players);
    for i in 0..players {
        let bit = 1usize << i;
        for s in 0..values.len() {
            if s & bit != 0 {
                let lower = values[s ^ bit];
                values[s] -= lower;
            }
        }
    }
}

/// Harsanyi dividends of every nonempty coalition.
pub fn harsanyi_dividends(game: &impl Game) -> Result<DividendTable> {
    let m = game.players();
    check_players("dividend players", DividendTable::MAX_PLAYERS, m)?;
    let mut values: Vec<f64> = (0..1u32 << m)
        .map(|bits| game.value(Coalition::from_bits(bits)))
        .collect();
    let base = values[0];
    mobius_in_place(&mut values, m);
    values[0] = 0.0;
    Ok(DividendTable {
        players: m,
        base,
        entries: values,
    })
}

/// Shapley values as equal shares of dividends: `phi_i = Σ_{S ∋ i} Δ_S / |S|`.
pub fn shapley_from_dividends(table: &DividendTable) -> AttributionVector {
    let mut phi = vec![0.0; table.players];
    for (s, d) in table.support() {
        let share = d / s.len() as f64;
        for i in s.iter() {
            phi[i] += share;
        }
    }
    AttributionVector::new(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{shapley, FnGame, UnanimityGame};

    /// Direct recursion `Δ_S = v(S) - Σ_{T ⊊ S} Δ_T`, visiting coalitions by
    /// increasing size.
    fn recursive_dividends(game: &impl Game) -> Vec<f64> {
        let m = game.players();
        let mut order: Vec<u32> = (1..1u32 << m).collect();
        order.sort_by_key(|b| (b.count_ones(), *b));
        let mut delta = vec![0.0; 1 << m];
        for bits in order {
            let s = Coalition::from_bits(bits);
            let lower: f64 = s
                .subsets()
                .filter(|t| !t.is_empty() && *t != s)
                .map(|t| delta[t.bits() as usize])
                .sum();
            delta[bits as usize] = game.value(s) - lower;
        }
        delta
    }

    fn toy_game() -> impl Game {
        FnGame::new(4, |s: Coalition| {
            (s.contains(0) && (s.contains(1) || (s.contains(2) && s.contains(3)))) as u8 as f64
        })
    }

    #[test]
    fn worked_example_dividends() {
        let table = harsanyi_dividends(&toy_game()).unwrap();
        let oracle = recursive_dividends(&toy_game());
        for bits in 1..16u32 {
            assert_eq!(table.get(Coalition::from_bits(bits)), oracle[bits as usize]);
        }
        let support: Vec<_> = table.support().collect();
        assert_eq!(
            support,
            vec![
                (Coalition::from_indices([0, 1]), 1.0),
                (Coalition::from_indices([0, 2, 3]), 1.0),
                (Coalition::from_indices([0, 1, 2, 3]), -1.0),
            ]
        );
        let phi = shapley_from_dividends(&table);
        assert!((phi[0] - 7.0 / 12.0).abs() < 1e-12);
        assert!((phi[1] - 3.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn unanimity_has_single_dividend() {
        let dictators = Coalition::from_indices([0, 2, 3]);
        let g = UnanimityGame {
            players: 5,
            dictators,
        };
        let table = harsanyi_dividends(&g).unwrap();
        assert_eq!(table.support().collect::<Vec<_>>(), vec![(dictators, 1.0)]);
        let phi = shapley_from_dividends(&table);
        assert_eq!(
            phi.to_vec(),
            vec![1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]
        );
    }

    #[test]
    fn additive_game_dividends_are_singletons() {
        let g = FnGame::new(3, |s: Coalition| s.len() as f64);
        let table = harsanyi_dividends(&g).unwrap();
        for bits in 1..8u32 {
            let s = Coalition::from_bits(bits);
            let expected = if s.len() == 1 { 1.0 } else { 0.0 };
            assert_eq!(table.get(s), expected);
        }
    }

    #[test]
    fn nonzero_empty_worth_is_kept_as_base() {
        let g = FnGame::new(2, |s: Coalition| 3.0 + s.len() as f64);
        let table = harsanyi_dividends(&g).unwrap();
        assert_eq!(table.base(), 3.0);
        for bits in 0..4u32 {
            let s = Coalition::from_bits(bits);
            assert_eq!(table.reconstruct(s), g.value(s));
        }
        let phi = shapley_from_dividends(&table);
        let direct = shapley(&g).unwrap();
        assert_eq!(phi.to_vec(), direct.to_vec());
    }

    #[test]
    fn incomplete_table_is_rejected() {
        let mut entries = BTreeMap::new();
        entries.insert(Coalition::singleton(0), 1.0);
        entries.insert(Coalition::singleton(1), 0.0);
        assert!(matches!(
            DividendTable::from_entries(2, &entries),
            Err(Error::Contract(_))
        ));
        entries.insert(Coalition::full(2), -1.0);
        let table = DividendTable::from_entries(2, &entries).unwrap();
        assert_eq!(shapley_from_dividends(&table).to_vec(), vec![0.5, -0.5]);
    }

    #[test]
    fn capacity() {
        let g = FnGame::new(21, |_| 0.0);
        assert!(matches!(
            harsanyi_dividends(&g),
            Err(Error::Capacity { limit: 20, .. })
        ));
    }
}
