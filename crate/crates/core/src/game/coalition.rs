use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A set of players (feature indices) stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(u32);

impl Coalition {
    /// Bitmask width ceiling; also the practical ceiling for 2^m enumeration.
    pub const MAX_PLAYERS: usize = 30;
    pub const EMPTY: Coalition = Coalition(0);

    pub const fn from_bits(bits: u32) -> Self {
        Coalition(bits)
    }

    /// The grand coalition of `players` players.
    pub fn full(players: usize) -> Self {
        assert!(players <= Self::MAX_PLAYERS, "at most 30 players");
        Coalition(((1u64 << players) - 1) as u32)
    }

    pub fn singleton(player: usize) -> Self {
        assert!(
            player < Self::MAX_PLAYERS,
            "player index {player} out of range"
        );
        Coalition(1 << player)
    }

    pub fn from_indices(indices: impl IntoIterator<Item = usize>) -> Self {
        indices
            .into_iter()
            .fold(Coalition::EMPTY, |acc, i| acc.with(i))
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, player: usize) -> bool {
        player < 32 && self.0 & (1 << player) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn with(self, player: usize) -> Self {
        Coalition(self.0 | Self::singleton(player).0)
    }

    pub fn without(self, player: usize) -> Self {
        Coalition(self.0 & !Self::singleton(player).0)
    }

    pub fn union(self, other: Self) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        Coalition(self.0 & !other.0)
    }

    /// Complement within the first `players` players.
    pub fn complement(self, players: usize) -> Self {
        Coalition::full(players).difference(self)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Highest player index plus one (0 for the empty coalition).
    pub fn span(self) -> usize {
        32 - self.0.leading_zeros() as usize
    }

    /// Player indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(i)
        })
    }

    /// All subsets of this coalition, from the empty set up to itself, in
    /// ascending bitmask order.
    pub fn subsets(self) -> Subsets {
        Subsets {
            mask: self.0,
            next: Some(0),
        }
    }

    /// Re-indexes a local coalition over the members of `self` (local player
    /// `k` is the `k`-th smallest member) into global player indices.
    pub fn expand_local(self, local: Coalition) -> Coalition {
        let mut out = 0u32;
        for (k, global) in self.iter().enumerate() {
            if local.0 & (1 << k) != 0 {
                out |= 1 << global;
            }
        }
        Coalition(out)
    }
}

/// Iterator over the subsets of a bitmask.
#[derive(Debug, Clone)]
pub struct Subsets {
    mask: u32,
    next: Option<u32>,
}

impl Iterator for Subsets {
    type Item = Coalition;

    fn next(&mut self) -> Option<Coalition> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            // standard "next subset in increasing order" step
            Some((cur | !self.mask).wrapping_add(1) & self.mask)
        };
        Some(Coalition(cur))
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Coalition::from_indices(iter)
    }
}

impl Serialize for Coalition {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let indices = Vec::<usize>::deserialize(deserializer)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= Coalition::MAX_PLAYERS) {
            return Err(serde::de::Error::custom(format!(
                "player index {bad} exceeds the coalition width"
            )));
        }
        Ok(Coalition::from_indices(indices))
    }
}
