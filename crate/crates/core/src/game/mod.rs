//! Exact cooperative-game machinery over at most [`Coalition::MAX_PLAYERS`]
//! players.
//!
//! Every solution concept here enumerates coalitions exhaustively; nothing is
//! sampled. Games are plain characteristic functions behind the [`Game`]
//! trait, so a model-backed game and a tabulated one are interchangeable.

mod coalition;
mod dividends;
mod power;
mod shapley;

use std::ops::Deref;

use serde::{Deserialize, Serialize};

pub use coalition::{Coalition, Subsets};
pub use dividends::{harsanyi_dividends, shapley_from_dividends, DividendTable};
pub use power::{
    banzhaf_normalized, deegan_packel, holler_packel_normalized, minimal_winning_coalitions,
    unanimity_dictators,
};
pub use shapley::{shapley, shapley_exact, shapley_permutation_oracle};

pub(crate) use dividends::mobius_in_place;
pub(crate) use power::minimal_winning_from_table;
pub(crate) use shapley::shapley_exact_from_table;

use crate::error::{Error, Result};

/// A characteristic function over coalitions of `players()` players.
///
/// Implementations must be deterministic: evaluating the same coalition twice
/// yields the same value.
pub trait Game {
    fn players(&self) -> usize;
    fn value(&self, coalition: Coalition) -> f64;
}

impl<G: Game + ?Sized> Game for &G {
    fn players(&self) -> usize {
        (**self).players()
    }

    fn value(&self, coalition: Coalition) -> f64 {
        (**self).value(coalition)
    }
}

/// A game stored as a dense table indexed by coalition bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularGame {
    players: usize,
    values: Vec<f64>,
}

impl TabularGame {
    /// Largest player count that may be tabulated (2^25 entries).
    pub const MAX_PLAYERS: usize = 25;

    pub fn new(players: usize, values: Vec<f64>) -> Result<Self> {
        Error::check_capacity("tabulated game players", Self::MAX_PLAYERS, players)?;
        if values.len() != 1 << players {
            return Err(Error::contract(format!(
                "a {players}-player table needs {} entries, got {}",
                1usize << players,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "non-finite worth for coalition {bad:#b}"
            )));
        }
        Ok(TabularGame { players, values })
    }

    pub fn from_fn(players: usize, mut worth: impl FnMut(Coalition) -> f64) -> Result<Self> {
        Error::check_capacity("tabulated game players", Self::MAX_PLAYERS, players)?;
        let values = (0..1u32 << players)
            .map(|bits| worth(Coalition::from_bits(bits)))
            .collect();
        Self::new(players, values)
    }

    pub fn from_game(game: &impl Game) -> Result<Self> {
        Self::from_fn(game.players(), |s| game.value(s))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Game for TabularGame {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> f64 {
        self.values[coalition.bits() as usize]
    }
}

/// Adapts a closure into a [`Game`].
pub struct FnGame<F> {
    players: usize,
    worth: F,
}

impl<F: Fn(Coalition) -> f64> FnGame<F> {
    pub fn new(players: usize, worth: F) -> Self {
        FnGame { players, worth }
    }
}

impl<F: Fn(Coalition) -> f64> Game for FnGame<F> {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> f64 {
        (self.worth)(coalition)
    }
}

/// The unanimity game won exactly by supersets of `dictators`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnanimityGame {
    pub players: usize,
    pub dictators: Coalition,
}

impl Game for UnanimityGame {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> f64 {
        if self.dictators.is_subset_of(coalition) {
            1.0
        } else {
            0.0
        }
    }
}

/// One attribution per player.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributionVector(Vec<f64>);

impl AttributionVector {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        AttributionVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        AttributionVector(vec![0.0; len])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for AttributionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for AttributionVector {
    fn from(values: Vec<f64>) -> Self {
        AttributionVector::new(values)
    }
}

pub(crate) fn check_players(what: &'static str, limit: usize, players: usize) -> Result<()> {
    Error::check_capacity(what, limit.min(Coalition::MAX_PLAYERS), players)
}

/// Reads a game into a win/lose table, rejecting any worth outside {0, 1}.
pub(crate) fn binary_table(game: &impl Game, limit: usize) -> Result<Vec<bool>> {
    check_players("binary game players", limit, game.players())?;
    (0..1u32 << game.players())
        .map(|bits| {
            let v = game.value(Coalition::from_bits(bits));
            if v == 1.0 {
                Ok(true)
            } else if v == 0.0 {
                Ok(false)
            } else {
                Err(Error::domain(format!(
                    "not a voting game: coalition {bits:#b} has worth {v}"
                )))
            }
        })
        .collect()
}
