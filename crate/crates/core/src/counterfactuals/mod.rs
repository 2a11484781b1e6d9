//! Counterfactual points, K-NN generation and the sparsity hierarchy.
//!
//! All sparsity notions are read off the *change game* of a pair `(x, x′)`
//! with changed features `C`: for `T ⊆ C`, `w(T) = 1` when moving exactly the
//! features in `T` from `x` to `x′` flips the decision. A counterfactual is
//! maximally sparse when `C` wins in `w` and every proper subset loses.

mod knn;
mod maxsparse;
mod sparsity;

pub use knn::{knn_counterfactuals, CounterfactualIndex, KnnCounterfactuals};
pub use maxsparse::{
    max_sparse, max_sparse_with, total_quantile_shift, uniform_cost, MaxSparseOutcome,
    SearchStrategy,
};
pub use sparsity::{
    enumerate_sparsity_families, is_equally_maximally_sparse, is_maximally_sparse,
    is_weakly_maximally_sparse, xi, SparsityFamilies,
};

pub(crate) use sparsity::{require_valid as sparsity_changed, ChangeGame};

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::game::Coalition;
use crate::models::{changed_features, Model};

/// A candidate counterfactual for a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    pub point: Vec<f64>,
    pub changed: Coalition,
    pub valid: bool,
}

impl Counterfactual {
    pub fn new(model: &Model, x: &[f64], point: Vec<f64>) -> Result<Self> {
        let changed = changed_features(x, &point)?;
        let valid = model.decide(x)? != model.decide(&point)?;
        Ok(Counterfactual {
            point,
            changed,
            valid,
        })
    }
}

/// `F(x) ≠ F(xp)`.
pub fn is_valid(model: &Model, x: &[f64], xp: &[f64]) -> Result<bool> {
    check_dims("counterfactual", x.len(), xp.len())?;
    Ok(model.decide(x)? != model.decide(xp)?)
}

/// A nonempty list of valid counterfactuals for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualSet {
    query: Vec<f64>,
    query_decision: bool,
    items: Vec<Counterfactual>,
}

impl CounterfactualSet {
    /// Validates every point against `model`; an invalid point is a domain
    /// error rather than being silently dropped.
    pub fn new(model: &Model, query: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        let items = points
            .into_iter()
            .map(|p| Counterfactual::new(model, &query, p))
            .collect::<Result<Vec<_>>>()?;
        Self::from_items(model, query, items)
    }

    pub fn from_items(model: &Model, query: Vec<f64>, items: Vec<Counterfactual>) -> Result<Self> {
        let query_decision = model.decide(&query)?;
        if items.is_empty() {
            return Err(Error::domain(
                "a counterfactual set needs at least one member",
            ));
        }
        for (i, cf) in items.iter().enumerate() {
            check_dims("counterfactual", query.len(), cf.point.len())?;
            if cf.changed != changed_features(&query, &cf.point)? {
                return Err(Error::contract(format!(
                    "counterfactual {i} has a stale change set"
                )));
            }
            if model.decide(&cf.point)? == query_decision {
                return Err(Error::domain(format!(
                    "counterfactual {i} does not change the decision"
                )));
            }
        }
        Ok(CounterfactualSet {
            query,
            query_decision,
            items,
        })
    }

    pub fn query(&self) -> &[f64] {
        &self.query
    }

    pub fn query_decision(&self) -> bool {
        self.query_decision
    }

    pub fn items(&self) -> &[Counterfactual] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.items.iter().map(|c| c.point.as_slice())
    }

    /// Replaces each member by its minimum-cost maximally sparse reduction.
    pub fn max_sparse(
        &self,
        model: &Model,
        cost: &dyn Fn(&[f64], &[f64]) -> f64,
    ) -> Result<CounterfactualSet> {
        let items = self
            .items
            .iter()
            .map(|cf| max_sparse(model, &self.query, &cf.point, cost))
            .collect::<Result<Vec<_>>>()?;
        Ok(CounterfactualSet {
            query: self.query.clone(),
            query_decision: self.query_decision,
            items,
        })
    }

    pub fn to_document(&self, model: &Model) -> CounterfactualSetDocument {
        CounterfactualSetDocument {
            query: self.query.clone(),
            counterfactuals: self
                .items
                .iter()
                .map(|cf| CounterfactualDocument {
                    point: cf.point.clone(),
                    changed: cf.changed,
                    valid: cf.valid,
                    maximally_sparse: is_maximally_sparse(model, &self.query, &cf.point).ok(),
                })
                .collect(),
        }
    }
}

/// JSON form of a counterfactual set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSetDocument {
    pub query: Vec<f64>,
    pub counterfactuals: Vec<CounterfactualDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualDocument {
    pub point: Vec<f64>,
    pub changed: Coalition,
    pub valid: bool,
    /// `None` when the change set is too large to check.
    pub maximally_sparse: Option<bool>,
}

impl CounterfactualSetDocument {
    pub fn into_set(self, model: &Model) -> Result<CounterfactualSet> {
        CounterfactualSet::new(
            model,
            self.query,
            self.counterfactuals.into_iter().map(|c| c.point).collect(),
        )
    }
}
