use super::{Dataset, Model};
use crate::error::{check_dims, Error, Result};

/// Per-feature empirical CDFs fitted on a dataset.
///
/// A value maps to its midrank quantile `(#{u < v} + #{u == v} / 2) / n`,
/// so ties and constant columns are well defined.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileMap {
    columns: Vec<Vec<f64>>,
}

impl QuantileMap {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::domain("cannot fit quantiles on an empty dataset"));
        }
        let columns = (0..data.n_features())
            .map(|j| {
                let mut col: Vec<f64> = data.column(j).collect();
                col.sort_by(f64::total_cmp);
                col
            })
            .collect();
        Ok(QuantileMap { columns })
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn to_quantile(&self, feature: usize, v: f64) -> f64 {
        let col = &self.columns[feature];
        let below = col.partition_point(|&u| u < v);
        let through = col.partition_point(|&u| u <= v);
        (below as f64 + 0.5 * (through - below) as f64) / col.len() as f64
    }

    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims("quantile transform", self.n_features(), x.len())?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.to_quantile(j, v))
            .collect())
    }

    /// Manhattan distance in quantile space.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        check_dims("quantile distance", self.n_features(), a.len())?;
        check_dims("quantile distance", self.n_features(), b.len())?;
        Ok(a.iter()
            .zip(b)
            .enumerate()
            .map(|(j, (&u, &v))| (self.to_quantile(j, u) - self.to_quantile(j, v)).abs())
            .sum())
    }
}

/// Result of [`threshold_from_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFit {
    pub threshold: f64,
    /// All outputs were equal, so no threshold can separate them.
    pub degenerate: bool,
    /// Fraction of rows with output strictly above the threshold.
    pub achieved_rate: f64,
}

/// Picks `t` so that about `positive_rate` of the rows score strictly above
/// it: `t` is the `(k+1)`-th largest output with `k = round(rate · n)`.
pub fn threshold_from_rate(
    model: &Model,
    data: &Dataset,
    positive_rate: f64,
) -> Result<ThresholdFit> {
    if !(positive_rate > 0.0 && positive_rate < 1.0) {
        return Err(Error::contract(format!(
            "positive rate {positive_rate} must lie in (0, 1)"
        )));
    }
    if data.is_empty() {
        return Err(Error::domain("cannot pick a threshold on an empty dataset"));
    }
    let mut outputs = data
        .rows()
        .iter()
        .map(|r| model.output(r))
        .collect::<Result<Vec<_>>>()?;
    outputs.sort_by(|a, b| b.total_cmp(a));
    let n = outputs.len();
    let k = ((positive_rate * n as f64).round() as usize).min(n - 1);
    let threshold = outputs[k];
    let above = outputs.iter().filter(|&&o| o > threshold).count();
    Ok(ThresholdFit {
        threshold,
        degenerate: outputs[0] == outputs[n - 1],
        achieved_rate: above as f64 / n as f64,
    })
}
