//! Rank agreement between explanations and explanation-quality rates.

mod quality;
mod report;

pub use quality::{
    counterfactual_ability_improvement, induce_recourse, instance_rng, necessity,
    plausibility_improvement, sufficiency, Action, Recourse, RecourseParams, RecourseTask,
};
pub use report::{pairwise_matrix, write_long_csv, LongRow, MetricReport, PairMetric};

use crate::error::{check_dims, Error, Result};

/// What a ranking sorts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RankBy {
    /// Signed attribution value.
    #[default]
    Value,
    /// Absolute attribution value.
    Magnitude,
}

impl RankBy {
    pub fn key(self, v: f64) -> f64 {
        match self {
            RankBy::Value => v,
            RankBy::Magnitude => v.abs(),
        }
    }
}

/// Feature indices ordered by decreasing key, ties by increasing index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking(Vec<usize>);

impl Ranking {
    pub fn new(values: &[f64], by: RankBy) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&i, &j| {
            by.key(values[j])
                .total_cmp(&by.key(values[i]))
                .then(i.cmp(&j))
        });
        Ranking(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.0[..k.min(self.0.len())]
    }
}

/// Kendall's tau-b. Undefined (domain error) when either side is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims("kendall tau", a.len(), b.len())?;
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 {
                ties_a += 1;
            }
            if db == 0 {
                ties_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (a.len() * a.len().saturating_sub(1) / 2) as i64;
    let denom = ((n0 - ties_a) as f64 * (n0 - ties_b) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::domain(
            "rank correlation is undefined for a constant vector",
        ));
    }
    Ok(((concordant - discordant) as f64 / denom).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, tied values sharing their mean rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let mid = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of midranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims("spearman", a.len(), b.len())?;
    let (ra, rb) = (midranks(a), midranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::domain(
            "rank correlation is undefined for a constant vector",
        ));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::contract(format!("top-k needs 1 ≤ k ≤ {m}, got {k}")));
    }
    Ok(())
}

/// `|top_k(a) ∩ top_k(b)| / k`.
pub fn feature_agreement(a: &Ranking, b: &Ranking, k: usize) -> Result<f64> {
    check_dims("feature agreement", a.len(), b.len())?;
    check_k(k, a.len())?;
    let common = a.top(k).iter().filter(|i| b.top(k).contains(i)).count();
    Ok(common as f64 / k as f64)
}

/// Fraction of the first `k` positions holding the same feature.
pub fn rank_agreement(a: &Ranking, b: &Ranking, k: usize) -> Result<f64> {
    check_dims("rank agreement", a.len(), b.len())?;
    check_k(k, a.len())?;
    let same = a
        .top(k)
        .iter()
        .zip(b.top(k))
        .filter(|(x, y)| x == y)
        .count();
    Ok(same as f64 / k as f64)
}

/// Rank-biased overlap with extrapolation past the last rank:
/// `(1 − p) Σ_{d ≤ m} p^{d−1} A_d + A_m p^m`, where `A_d` is the overlap
/// fraction of the two depth-`d` prefixes.
pub fn rbo(a: &Ranking, b: &Ranking, p: f64) -> Result<f64> {
    check_dims("rbo", a.len(), b.len())?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::contract(format!(
            "rbo persistence {p} must lie in (0, 1)"
        )));
    }
    let m = a.len();
    if m == 0 {
        return Ok(1.0);
    }
    let mut seen_a = vec![false; m];
    let mut seen_b = vec![false; m];
    let mut overlap = 0usize;
    let mut sum = 0.0;
    let mut weight = 1.0;
    let mut agreement = 0.0;
    for d in 0..m {
        let (x, y) = (a.0[d], b.0[d]);
        if x == y {
            overlap += 1;
        } else {
            overlap += seen_b[x] as usize + seen_a[y] as usize;
        }
        seen_a[x] = true;
        seen_b[y] = true;
        agreement = overlap as f64 / (d + 1) as f64;
        sum += weight * agreement;
        weight *= p;
    }
    Ok(((1.0 - p) * sum + agreement * weight).clamp(0.0, 1.0))
}
