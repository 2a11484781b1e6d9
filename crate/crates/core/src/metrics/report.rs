use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{feature_agreement, kendall_tau, rank_agreement, rbo, spearman, RankBy, Ranking};
use crate::error::{Error, Result};

/// A pairwise comparison between two explanations of the same instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairMetric {
    Kendall,
    Spearman,
    FeatureAgreement(usize),
    RankAgreement(usize),
    Rbo(f64),
}

impl PairMetric {
    pub fn name(&self) -> &'static str {
        match self {
            PairMetric::Kendall => "kendall",
            PairMetric::Spearman => "spearman",
            PairMetric::FeatureAgreement(_) => "feature-agreement",
            PairMetric::RankAgreement(_) => "rank-agreement",
            PairMetric::Rbo(_) => "rbo",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match *self {
            PairMetric::FeatureAgreement(k) | PairMetric::RankAgreement(k) => Some(k),
            _ => None,
        }
    }

    /// `None` when the metric is undefined for this pair (a constant vector
    /// under a rank correlation, or `k` beyond the feature count).
    pub fn eval(&self, a: &[f64], b: &[f64], by: RankBy) -> Result<Option<f64>> {
        let ka: Vec<f64> = a.iter().map(|&v| by.key(v)).collect();
        let kb: Vec<f64> = b.iter().map(|&v| by.key(v)).collect();
        let rank = |v: &[f64]| Ranking::new(v, by);
        let out = match *self {
            PairMetric::Kendall | PairMetric::Spearman if ka == kb => Ok(1.0),
            PairMetric::Kendall => kendall_tau(&ka, &kb),
            PairMetric::Spearman => spearman(&ka, &kb),
            PairMetric::FeatureAgreement(k) if k > a.len() => return Ok(None),
            PairMetric::RankAgreement(k) if k > a.len() => return Ok(None),
            PairMetric::FeatureAgreement(k) => feature_agreement(&rank(a), &rank(b), k),
            PairMetric::RankAgreement(k) => rank_agreement(&rank(a), &rank(b), k),
            PairMetric::Rbo(p) => rbo(&rank(a), &rank(b), p),
        };
        match out {
            Ok(v) => Ok(Some(v)),
            Err(Error::Domain(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Mean (and standard deviation) of a pair metric over instances, for every
/// pair of methods. The diagonal is 1 by definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub k: Option<usize>,
    pub methods: Vec<String>,
    pub mean: Vec<Vec<Option<f64>>>,
    pub std: Vec<Vec<Option<f64>>>,
    /// Instances on which the metric was defined.
    pub count: Vec<Vec<usize>>,
}

/// One line of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub method_a: String,
    pub method_b: String,
    pub metric: String,
    pub k: Option<usize>,
    pub value: Option<f64>,
}

impl MetricReport {
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut rows = Vec::new();
        for (i, a) in self.methods.iter().enumerate() {
            for (j, b) in self.methods.iter().enumerate() {
                rows.push(LongRow {
                    method_a: a.clone(),
                    method_b: b.clone(),
                    metric: self.metric.clone(),
                    k: self.k,
                    value: self.mean[i][j],
                });
            }
        }
        rows
    }
}

pub fn write_long_csv(rows: &[LongRow], writer: impl Write) -> Result<()> {
    let io = |e: csv::Error| Error::domain(format!("failed to write CSV: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::domain(format!("failed to write CSV: {e}")))
}

/// Compares every pair of methods instance by instance. `batches[m][i]` is
/// method `m`'s attribution vector for instance `i`.
pub fn pairwise_matrix(
    methods: &[String],
    batches: &[Vec<Vec<f64>>],
    metric: PairMetric,
    by: RankBy,
) -> Result<MetricReport> {
    if methods.len() != batches.len() {
        return Err(Error::contract("one batch per method is required"));
    }
    if let Some(b) = batches.iter().find(|b| b.len() != batches[0].len()) {
        return Err(Error::contract(format!(
            "batch sizes differ: {} vs {} instances",
            batches[0].len(),
            b.len()
        )));
    }
    let n = methods.len();
    let mut mean = vec![vec![Some(1.0); n]; n];
    let mut std = vec![vec![Some(0.0); n]; n];
    let mut count = vec![vec![batches.first().map_or(0, Vec::len); n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let mut values = Vec::new();
            for (a, b) in batches[i].iter().zip(&batches[j]) {
                if let Some(v) = metric.eval(a, b, by)? {
                    values.push(v);
                }
            }
            let (m, s) = mean_std(&values);
            mean[i][j] = m;
            mean[j][i] = m;
            std[i][j] = s;
            std[j][i] = s;
            count[i][j] = values.len();
            count[j][i] = values.len();
        }
    }
    Ok(MetricReport {
        metric: metric.name().to_string(),
        k: metric.k(),
        methods: methods.to_vec(),
        mean,
        std,
        count,
    })
}

pub(crate) fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}
