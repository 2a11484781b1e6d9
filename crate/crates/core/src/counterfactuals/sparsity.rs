use crate::error::{check_dims, Error, Result};
use crate::game::{minimal_winning_from_table, mobius_in_place, Coalition};
use crate::models::{changed_features, Model};
use crate::Rational;

/// Cap on `|C|` for the predicates.
const PREDICATE_MAX_CHANGED: usize = 25;
/// Cap on `|C|` for family enumeration and dividend-based checks.
const FAMILY_MAX_CHANGED: usize = 20;

/// The change game of `(x, x′)` tabulated over local coalitions of `C`.
///
/// Local bit `k` stands for the `k`-th smallest changed feature.
#[derive(Debug, Clone)]
pub(crate) struct ChangeGame {
    pub changed: Coalition,
    pub flips: Vec<bool>,
}

impl ChangeGame {
    /// Tabulates `w` after checking that `xp` is a valid counterfactual.
    pub fn new(model: &Model, x: &[f64], xp: &[f64], limit: usize) -> Result<Self> {
        let changed = require_valid(model, x, xp)?;
        Error::check_capacity("changed features", limit, changed.len())?;
        Ok(Self::tabulate(model, x, xp, changed))
    }

    /// Tabulates `w` without any validity check.
    pub fn tabulate(model: &Model, x: &[f64], xp: &[f64], changed: Coalition) -> Self {
        let members: Vec<usize> = changed.iter().collect();
        let c = members.len();
        let fx = model.decide_unchecked(x);
        let mut flips = vec![false; 1 << c];
        let mut point = x.to_vec();
        // Gray-code walk: one coordinate moves per step
        for g in 1usize..1 << c {
            let k = g.trailing_zeros() as usize;
            let f = members[k];
            point[f] = if point[f] == x[f] { xp[f] } else { x[f] };
            let bits = g ^ (g >> 1);
            flips[bits] = model.decide_unchecked(&point) != fx;
        }
        ChangeGame { changed, flips }
    }

    pub fn players(&self) -> usize {
        self.changed.len()
    }

    pub fn full(&self) -> u32 {
        (self.flips.len() - 1) as u32
    }

    pub fn to_global(&self, local: u32) -> Coalition {
        self.changed.expand_local(Coalition::from_bits(local))
    }

    /// Harsanyi dividends of `w`; integral because `w` is 0/1.
    pub fn dividends(&self) -> Vec<i64> {
        let mut d: Vec<i64> = self.flips.iter().map(|&b| b as i64).collect();
        mobius_in_place(&mut d, self.players());
        d
    }

    /// `E[T]`: no member of `T` is a null player of `w` restricted to
    /// subsets of `T`.
    pub fn no_spurious(&self) -> Vec<bool> {
        let c = self.players();
        let n = self.flips.len();
        let mut out = vec![true; n];
        let mut reach = vec![false; n];
        for i in 0..c {
            let bit = 1usize << i;
            for (r, slot) in reach.iter_mut().enumerate() {
                *slot = r & bit == 0 && self.flips[r | bit] != self.flips[r];
            }
            // reach[R] := some R' ⊆ R is a swing for i
            for j in (0..c).filter(|&j| j != i) {
                let b = 1usize << j;
                for r in 0..n {
                    if r & b != 0 && r & bit == 0 && reach[r ^ b] {
                        reach[r] = true;
                    }
                }
            }
            for t in 0..n {
                if t & bit != 0 && !reach[t ^ bit] {
                    out[t] = false;
                }
            }
        }
        out
    }
}

pub(crate) fn require_valid(model: &Model, x: &[f64], xp: &[f64]) -> Result<Coalition> {
    check_dims("counterfactual", x.len(), xp.len())?;
    check_dims("counterfactual", model.n_features(), x.len())?;
    if model.decide_unchecked(x) == model.decide_unchecked(xp) {
        return Err(Error::domain(
            "the counterfactual does not change the decision",
        ));
    }
    changed_features(x, xp)
}

/// Reverting any nonempty subset of the changed features to `x` restores
/// `x`'s decision. Equivalently, no proper subset of `C` flips on its own.
pub fn is_maximally_sparse(model: &Model, x: &[f64], xp: &[f64]) -> Result<bool> {
    let changed = require_valid(model, x, xp)?;
    Error::check_capacity("changed features", PREDICATE_MAX_CHANGED, changed.len())?;
    let fx = model.decide_unchecked(x);
    let mut point = x.to_vec();
    for t in changed.subsets().skip(1).filter(|&t| t != changed) {
        point.copy_from_slice(x);
        for i in t.iter() {
            point[i] = xp[i];
        }
        if model.decide_unchecked(&point) != fx {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every changed feature flips the decision in some context, i.e. no changed
/// feature is spurious.
pub fn is_weakly_maximally_sparse(model: &Model, x: &[f64], xp: &[f64]) -> Result<bool> {
    let g = ChangeGame::new(model, x, xp, PREDICATE_MAX_CHANGED)?;
    Ok(g.no_spurious()[g.full() as usize])
}

/// The MS and WMS families of change sets reachable from `xp` by reverting
/// features to `x`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SparsityFamilies {
    /// Change sets `T ⊆ C` giving maximally sparse counterfactuals.
    pub ms: Vec<Coalition>,
    /// Change sets `T ⊆ C` giving weakly maximally sparse counterfactuals.
    pub wms: Vec<Coalition>,
}

pub fn enumerate_sparsity_families(
    model: &Model,
    x: &[f64],
    xp: &[f64],
) -> Result<SparsityFamilies> {
    let g = ChangeGame::new(model, x, xp, FAMILY_MAX_CHANGED)?;
    let ms = minimal_winning_from_table(g.players(), &g.flips)
        .into_iter()
        .map(|t| g.to_global(t.bits()))
        .collect();
    let wms = g
        .no_spurious()
        .iter()
        .enumerate()
        .filter(|&(t, &e)| e && g.flips[t])
        .map(|(t, _)| g.to_global(t as u32))
        .collect();
    Ok(SparsityFamilies { ms, wms })
}

/// ξ(S): the Harsanyi dividend of `S` in the change game. It is 1 on every
/// MS member and 0 outside the spurious-free family.
pub fn xi(model: &Model, x: &[f64], xp: &[f64], s: Coalition) -> Result<Rational> {
    let changed = require_valid(model, x, xp)?;
    if !s.is_subset_of(changed) {
        return Err(Error::contract(format!(
            "{s} is not a subset of the changed features {changed}"
        )));
    }
    Error::check_capacity("coalition size", FAMILY_MAX_CHANGED, s.len())?;
    // only the subsets of S matter
    let g = ChangeGame::tabulate(model, x, xp, s);
    let d = g.dividends();
    Ok(Rational::from_integer(d[d.len() - 1] as i128))
}

/// `|C| = 1`, or the per-feature sums `Σ_{S ∋ i} ξ(S)/|S|` over the
/// spurious-free family agree for every changed feature (exact comparison).
pub fn is_equally_maximally_sparse(model: &Model, x: &[f64], xp: &[f64]) -> Result<bool> {
    let g = ChangeGame::new(model, x, xp, FAMILY_MAX_CHANGED)?;
    let c = g.players();
    if c == 1 {
        return Ok(true);
    }
    let d = g.dividends();
    let family = g.no_spurious();
    // by_size[i][s]: Σ ξ(S) over family members S ∋ i with |S| = s
    let mut by_size = vec![vec![0i64; c + 1]; c];
    for (t, (&e, &dt)) in family.iter().zip(&d).enumerate().skip(1) {
        if !e || dt == 0 {
            continue;
        }
        let s = t.count_ones() as usize;
        for (i, row) in by_size.iter_mut().enumerate() {
            if t >> i & 1 == 1 {
                row[s] += dt;
            }
        }
    }
    let sums: Vec<Rational> = by_size
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .skip(1)
                .map(|(s, &v)| Rational::new(v as i128, s as i128))
                .sum()
        })
        .collect();
    Ok(sums.iter().all(|s| *s == sums[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CmpOp, Formula};

    pub(crate) fn toy_model() -> Model {
        let on = |f| Formula::atom(f, CmpOp::Gt, 0.5);
        Model::formula(
            6,
            Formula::And(vec![
                on(0),
                Formula::Or(vec![on(1), Formula::And(vec![on(2), on(3)])]),
            ]),
        )
        .unwrap()
    }

    const X: [f64; 6] = [1.0; 6];
    const XP: [f64; 6] = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];

    fn cf(changed: &[usize]) -> Vec<f64> {
        let mut p = X.to_vec();
        for &i in changed {
            p[i] = 0.0;
        }
        p
    }

    fn set(ix: &[usize]) -> Coalition {
        Coalition::from_indices(ix.iter().copied())
    }

    #[test]
    fn change_game_table() {
        let g = ChangeGame::new(&toy_model(), &X, &XP, 25).unwrap();
        assert_eq!(g.changed, set(&[0, 1, 2, 3, 4]));
        for t in 0..32u32 {
            let global = g.to_global(t);
            let p = cf(&global.iter().collect::<Vec<_>>());
            assert_eq!(g.flips[t as usize], !toy_model().decide(&p).unwrap());
        }
    }

    #[test]
    fn maximal_sparsity() {
        let m = toy_model();
        assert!(!is_maximally_sparse(&m, &X, &XP).unwrap());
        // reverting feature 0 alone keeps the flip, so {0,1} is not minimal
        assert!(!is_maximally_sparse(&m, &X, &cf(&[0, 1])).unwrap());
        assert!(is_maximally_sparse(&m, &X, &cf(&[0])).unwrap());
        assert!(is_maximally_sparse(&m, &X, &cf(&[1, 2])).unwrap());
        assert!(matches!(
            is_maximally_sparse(&m, &X, &X),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn weak_maximal_sparsity() {
        let m = toy_model();
        assert!(!is_weakly_maximally_sparse(&m, &X, &XP).unwrap());
        assert!(is_weakly_maximally_sparse(&m, &X, &cf(&[0, 1, 2, 3])).unwrap());
        assert!(is_weakly_maximally_sparse(&m, &X, &cf(&[1, 2])).unwrap());
        // once feature 0 has moved, moving feature 1 never matters
        assert!(!is_weakly_maximally_sparse(&m, &X, &cf(&[0, 1])).unwrap());
    }

    #[test]
    fn families_of_the_worked_example() {
        let f = enumerate_sparsity_families(&toy_model(), &X, &XP).unwrap();
        assert_eq!(f.ms, vec![set(&[0]), set(&[1, 2]), set(&[1, 3])]);
        for s in &f.ms {
            assert!(f.wms.contains(s));
        }
        assert!(f.wms.contains(&set(&[0, 1, 2, 3])));
        assert!(!f.wms.iter().any(|s| s.contains(4)));
    }

    #[test]
    fn xi_values() {
        let m = toy_model();
        assert_eq!(
            xi(&m, &X, &XP, set(&[0])).unwrap(),
            Rational::from_integer(1)
        );
        assert_eq!(
            xi(&m, &X, &XP, set(&[1, 2])).unwrap(),
            Rational::from_integer(1)
        );
        assert_eq!(
            xi(&m, &X, &XP, set(&[0, 1])).unwrap(),
            Rational::from_integer(0)
        );
        assert_eq!(
            xi(&m, &X, &XP, set(&[1, 2, 3])).unwrap(),
            Rational::from_integer(-1)
        );
        assert_eq!(
            xi(&m, &X, &XP, set(&[0, 1, 2, 3])).unwrap(),
            Rational::from_integer(1)
        );
        assert_eq!(
            xi(&m, &X, &XP, set(&[1])).unwrap(),
            Rational::from_integer(0)
        );
        assert!(matches!(
            xi(&m, &X, &cf(&[0, 1]), set(&[2])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn equal_maximal_sparsity() {
        let m = toy_model();
        assert!(!is_equally_maximally_sparse(&m, &X, &XP).unwrap());
        assert!(is_equally_maximally_sparse(&m, &X, &cf(&[0])).unwrap());
        assert!(is_equally_maximally_sparse(&m, &X, &cf(&[1, 2])).unwrap());
    }
}
