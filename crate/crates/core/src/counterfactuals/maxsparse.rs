use std::collections::{BTreeSet, HashMap, HashSet};

use super::{ChangeGame, Counterfactual};
use crate::error::{check_dims, Error, Result};
use crate::game::{minimal_winning_from_table, Coalition};
use crate::models::{Model, QuantileMap};

const EXHAUSTIVE_MAX_CHANGED: usize = 20;
const DEPTH_FIRST_MAX_CHANGED: usize = 25;

/// How [`max_sparse_with`] explores the subsets of the changed features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SearchStrategy {
    /// Tabulate every subset and keep the minimal flipping ones. Always finds
    /// the cheapest maximally sparse reduction.
    #[default]
    Exhaustive,
    /// Depth-first removal of one feature at a time, never expanding a subset
    /// that fails to flip. Cheaper, but on non-monotone models it can miss
    /// maximally sparse subsets that are only reachable through failures.
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxSparseOutcome {
    pub counterfactual: Counterfactual,
    pub cost: f64,
    /// Maximally sparse candidates the cost was minimised over.
    pub candidates: usize,
}

/// Number of changed features.
pub fn uniform_cost(x: &[f64], xp: &[f64]) -> f64 {
    x.iter().zip(xp).filter(|(a, b)| a != b).count() as f64
}

/// `Σ_i |q_i(xp_i) − q_i(x_i)|`.
pub fn total_quantile_shift(qmap: &QuantileMap, x: &[f64], xp: &[f64]) -> Result<f64> {
    qmap.distance(x, xp)
}

/// The cheapest maximally sparse counterfactual obtained from `xp` by
/// reverting some changed features to `x`. Ties go to the smallest
/// change-set bitmask.
pub fn max_sparse(
    model: &Model,
    x: &[f64],
    xp: &[f64],
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<Counterfactual> {
    max_sparse_with(model, x, xp, cost, SearchStrategy::Exhaustive).map(|o| o.counterfactual)
}

pub fn max_sparse_with(
    model: &Model,
    x: &[f64],
    xp: &[f64],
    cost: &dyn Fn(&[f64], &[f64]) -> f64,
    strategy: SearchStrategy,
) -> Result<MaxSparseOutcome> {
    check_dims("counterfactual", x.len(), xp.len())?;
    let candidates = match strategy {
        SearchStrategy::Exhaustive => exhaustive(model, x, xp)?,
        SearchStrategy::DepthFirst => match depth_first(model, x, xp)? {
            found if !found.is_empty() => found,
            _ => exhaustive(model, x, xp)?,
        },
    };
    let mut best: Option<(f64, Coalition)> = None;
    for &t in &candidates {
        let c = cost(x, &point_for(x, xp, t));
        if !c.is_finite() {
            return Err(Error::domain(format!("cost of {t} is not finite")));
        }
        let better = match best {
            None => true,
            Some((bc, bt)) => c < bc || (c == bc && t.bits() < bt.bits()),
        };
        if better {
            best = Some((c, t));
        }
    }
    let (cost, changed) = best.expect("a valid counterfactual has a maximally sparse reduction");
    Ok(MaxSparseOutcome {
        counterfactual: Counterfactual {
            point: point_for(x, xp, changed),
            changed,
            valid: true,
        },
        cost,
        candidates: candidates.len(),
    })
}

fn point_for(x: &[f64], xp: &[f64], changed: Coalition) -> Vec<f64> {
    let mut p = x.to_vec();
    for i in changed.iter() {
        p[i] = xp[i];
    }
    p
}

fn exhaustive(model: &Model, x: &[f64], xp: &[f64]) -> Result<Vec<Coalition>> {
    let g = ChangeGame::new(model, x, xp, EXHAUSTIVE_MAX_CHANGED)?;
    Ok(minimal_winning_from_table(g.players(), &g.flips)
        .into_iter()
        .map(|t| g.to_global(t.bits()))
        .collect())
}

/// Lazily evaluated change game.
struct Probe<'a> {
    model: &'a Model,
    x: &'a [f64],
    xp: &'a [f64],
    fx: bool,
    memo: HashMap<u32, bool>,
}

impl Probe<'_> {
    fn flips(&mut self, t: Coalition) -> bool {
        if let Some(&f) = self.memo.get(&t.bits()) {
            return f;
        }
        let f = self.model.decide_unchecked(&point_for(self.x, self.xp, t)) != self.fx;
        self.memo.insert(t.bits(), f);
        f
    }
}

struct Search {
    succ: BTreeSet<u32>,
    seen_success: HashSet<u32>,
    fail: HashSet<u32>,
}

impl Search {
    fn recurse(&mut self, probe: &mut Probe, cur: Coalition, parent: Option<Coalition>) {
        if !probe.flips(cur) {
            self.fail.insert(cur.bits());
            return;
        }
        if let Some(p) = parent {
            self.succ.remove(&p.bits());
        }
        self.succ.insert(cur.bits());
        self.seen_success.insert(cur.bits());
        for i in cur.iter() {
            let child = cur.without(i);
            if self.seen_success.contains(&child.bits()) {
                // a flipping child was explored from elsewhere; cur is not minimal
                self.succ.remove(&cur.bits());
            } else if !self.fail.contains(&child.bits()) {
                self.recurse(probe, child, Some(cur));
            }
        }
    }
}

fn depth_first(model: &Model, x: &[f64], xp: &[f64]) -> Result<Vec<Coalition>> {
    let changed = super::sparsity_changed(model, x, xp)?;
    Error::check_capacity("changed features", DEPTH_FIRST_MAX_CHANGED, changed.len())?;
    let mut probe = Probe {
        model,
        x,
        xp,
        fx: model.decide_unchecked(x),
        memo: HashMap::new(),
    };
    let mut search = Search {
        succ: BTreeSet::new(),
        seen_success: HashSet::new(),
        fail: HashSet::new(),
    };
    search.recurse(&mut probe, changed, None);
    // a subset can still flip below a layer of failures when the model is
    // not monotone; keep only genuinely minimal survivors
    Ok(search
        .succ
        .into_iter()
        .map(Coalition::from_bits)
        .filter(|&t| t.subsets().filter(|&s| s != t).all(|s| !probe.flips(s)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counterfactuals::is_maximally_sparse;
    use crate::models::{CmpOp, Dataset, Formula};

    fn toy_model() -> Model {
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

    #[test]
    fn worked_example_uniform_cost() {
        let m = toy_model();
        for strategy in [SearchStrategy::Exhaustive, SearchStrategy::DepthFirst] {
            let out = max_sparse_with(&m, &X, &XP, &uniform_cost, strategy).unwrap();
            assert_eq!(out.counterfactual.changed, Coalition::singleton(0));
            assert_eq!(out.cost, 1.0);
            assert_eq!(out.candidates, 3);
            assert!(is_maximally_sparse(&m, &X, &out.counterfactual.point).unwrap());
        }
    }

    #[test]
    fn fixed_point() {
        let m = toy_model();
        let xp = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let out = max_sparse(&m, &X, &xp, &uniform_cost).unwrap();
        assert_eq!(out.point, xp.to_vec());
    }

    #[test]
    fn ties_go_to_smallest_bitmask() {
        // {1,2} and {1,3} both cost 2
        let m = toy_model();
        let xp = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let out = max_sparse(&m, &X, &xp, &uniform_cost).unwrap();
        assert_eq!(out.changed, Coalition::from_indices([1, 2]));
    }

    #[test]
    fn quantile_cost_can_prefer_more_features() {
        // moving feature 0 is a large quantile jump; features 1 and 2 are cheap
        let rows = (0..20)
            .map(|r| {
                let a = if r < 10 { 0.0 } else { 1.0 };
                let b = match r {
                    0 => 0.0,
                    1 => 1.0,
                    _ => 5.0,
                };
                vec![a, b, b, 1.0, 1.0, 1.0]
            })
            .collect();
        let data = Dataset::from_rows(6, rows).unwrap();
        let q = QuantileMap::fit(&data).unwrap();
        let cost = |a: &[f64], b: &[f64]| total_quantile_shift(&q, a, b).unwrap();
        let xp = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let uni = max_sparse(&toy_model(), &X, &xp, &uniform_cost).unwrap();
        let qs = max_sparse(&toy_model(), &X, &xp, &cost).unwrap();
        assert_eq!(uni.changed, Coalition::singleton(0));
        assert_eq!(qs.changed, Coalition::from_indices([1, 2]));
    }

    #[test]
    fn depth_first_can_miss_cheaper_members_of_non_monotone_models() {
        // flips on {0} and {1,2} only; {0,1}, {0,2} do not flip
        let pick = |f: usize| Formula::atom(f, CmpOp::Lt, 0.5);
        let not = |f: usize| Formula::Not(Box::new(pick(f)));
        let model = Model::formula(
            3,
            Formula::Or(vec![
                Formula::And(vec![pick(0), not(1), not(2)]),
                Formula::And(vec![pick(1), pick(2)]),
            ]),
        )
        .unwrap();
        let x = [1.0; 3];
        let xp = [0.0; 3];
        assert!(model.decide(&xp).unwrap());
        let ex =
            max_sparse_with(&model, &x, &xp, &uniform_cost, SearchStrategy::Exhaustive).unwrap();
        let dfs =
            max_sparse_with(&model, &x, &xp, &uniform_cost, SearchStrategy::DepthFirst).unwrap();
        assert_eq!(ex.counterfactual.changed, Coalition::singleton(0));
        assert_eq!(dfs.counterfactual.changed, Coalition::from_indices([1, 2]));
        assert!(is_maximally_sparse(&model, &x, &dfs.counterfactual.point).unwrap());
    }

    #[test]
    fn invalid_input() {
        assert!(matches!(
            max_sparse(&toy_model(), &X, &X, &uniform_cost),
            Err(Error::Domain(_))
        ));
    }
}
