use super::{Counterfactual, CounterfactualSet};
use crate::error::{check_dims, Error, Result};
use crate::models::{changed_features, Dataset, Model, QuantileMap};

/// Dataset rows pre-mapped to quantile space with their decisions, for
/// repeated nearest-counterfactual queries against one model.
pub struct CounterfactualIndex<'a> {
    model: &'a Model,
    data: &'a Dataset,
    qmap: &'a QuantileMap,
    quantiles: Vec<Vec<f64>>,
    decisions: Vec<bool>,
}

/// K-NN counterfactuals, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnCounterfactuals {
    pub set: CounterfactualSet,
    pub rows: Vec<usize>,
    pub distances: Vec<f64>,
    pub requested: usize,
}

impl KnnCounterfactuals {
    /// Fewer opposite-class rows existed than were requested.
    pub fn truncated(&self) -> bool {
        self.set.len() < self.requested
    }
}

impl<'a> CounterfactualIndex<'a> {
    pub fn new(model: &'a Model, data: &'a Dataset, qmap: &'a QuantileMap) -> Result<Self> {
        check_dims("dataset", model.n_features(), data.n_features())?;
        check_dims("quantile map", data.n_features(), qmap.n_features())?;
        let quantiles = data
            .rows()
            .iter()
            .map(|r| qmap.transform(r))
            .collect::<Result<Vec<_>>>()?;
        let decisions = data
            .rows()
            .iter()
            .map(|r| model.decide_unchecked(r))
            .collect();
        Ok(CounterfactualIndex {
            model,
            data,
            qmap,
            quantiles,
            decisions,
        })
    }

    pub fn decisions(&self) -> &[bool] {
        &self.decisions
    }

    /// The `k` rows nearest to `x` (quantile-space Manhattan distance) among
    /// those the model decides differently from `x`. Ties go to the lower
    /// row index.
    pub fn query(&self, x: &[f64], k: usize) -> Result<KnnCounterfactuals> {
        let fx = self.model.decide(x)?;
        let qx = self.qmap.transform(x)?;
        let mut scored: Vec<(f64, usize)> = self
            .quantiles
            .iter()
            .enumerate()
            .filter(|&(r, _)| self.decisions[r] != fx)
            .map(|(r, q)| (q.iter().zip(&qx).map(|(a, b)| (a - b).abs()).sum(), r))
            .collect();
        if scored.is_empty() {
            return Err(Error::domain(
                "no dataset row has the opposite decision to the query",
            ));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        let items = scored
            .iter()
            .map(|&(_, r)| {
                let point = self.data.row(r).to_vec();
                Ok(Counterfactual {
                    changed: changed_features(x, &point)?,
                    point,
                    valid: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(KnnCounterfactuals {
            set: CounterfactualSet::from_items(self.model, x.to_vec(), items)?,
            rows: scored.iter().map(|s| s.1).collect(),
            distances: scored.iter().map(|s| s.0).collect(),
            requested: k,
        })
    }
}

pub fn knn_counterfactuals(
    model: &Model,
    data: &Dataset,
    qmap: &QuantileMap,
    x: &[f64],
    k: usize,
) -> Result<KnnCounterfactuals> {
    if k == 0 {
        return Err(Error::contract("k must be at least 1"));
    }
    CounterfactualIndex::new(model, data, qmap)?.query(x, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (Dataset, QuantileMap) {
        let d = Dataset::from_rows(1, vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]]).unwrap();
        let q = QuantileMap::fit(&d).unwrap();
        (d, q)
    }

    #[test]
    fn single_opposite_row() {
        let (d, q) = line();
        let m = Model::linear(vec![1.0], 0.0, 5.0).unwrap();
        let r = knn_counterfactuals(&m, &d, &q, &[2.0], 1).unwrap();
        assert_eq!(r.set.items()[0].point, vec![10.0]);
        assert!(!r.truncated());
    }

    #[test]
    fn ordered_by_quantile_distance() {
        let (d, q) = line();
        let m = Model::linear(vec![1.0], 0.0, 1.5).unwrap();
        let r = knn_counterfactuals(&m, &d, &q, &[0.0], 2).unwrap();
        assert_eq!(r.rows, vec![2, 3]);
        assert_eq!(r.distances, vec![0.5, 0.75]);
        let r = knn_counterfactuals(&m, &d, &q, &[0.0], 5).unwrap();
        assert_eq!(r.set.len(), 2);
        assert!(r.truncated());
    }

    #[test]
    fn ties_by_row_index() {
        let d = Dataset::from_rows(1, vec![vec![3.0], vec![0.0], vec![3.0]]).unwrap();
        let q = QuantileMap::fit(&d).unwrap();
        let m = Model::linear(vec![1.0], 0.0, 1.0).unwrap();
        let r = knn_counterfactuals(&m, &d, &q, &[0.0], 2).unwrap();
        assert_eq!(r.rows, vec![0, 2]);
    }

    #[test]
    fn no_opposite_rows() {
        let (d, q) = line();
        let m = Model::linear(vec![1.0], 0.0, 50.0).unwrap();
        assert!(matches!(
            knn_counterfactuals(&m, &d, &q, &[0.0], 3),
            Err(Error::Domain(_))
        ));
    }
}
