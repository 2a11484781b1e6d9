use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{RankBy, Ranking};
use crate::counterfactuals::CounterfactualSet;
use crate::error::{check_dims, Error, Result};
use crate::game::Coalition;
use crate::models::{Dataset, Model, QuantileMap};

const SUBSET_MAX_FEATURES: usize = 20;
const DENSITY_NEIGHBOURS: usize = 5;

fn top_k(values: &[f64], k: usize, by: RankBy) -> Coalition {
    Ranking::new(values, by).top(k).iter().copied().collect()
}

/// Features that may move, evaluated on every subset of `movable` taken from
/// `cf` with the rest at `x`; returns whether any subset flips `F(x)`.
fn any_subset_flips(model: &Model, x: &[f64], cf: &[f64], movable: Coalition) -> Result<bool> {
    Error::check_capacity("top-k changed features", SUBSET_MAX_FEATURES, movable.len())?;
    let fx = model.decide_unchecked(x);
    let mut point = x.to_vec();
    for s in movable.subsets().skip(1) {
        point.copy_from_slice(x);
        for i in s.iter() {
            point[i] = cf[i];
        }
        if model.decide_unchecked(&point) != fx {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether some counterfactual can still flip the decision when only the
/// explanation's top-`k` features may take its values (any subset of them).
pub fn necessity(
    model: &Model,
    x: &[f64],
    values: &[f64],
    cfs: &CounterfactualSet,
    k: usize,
    by: RankBy,
) -> Result<bool> {
    check_dims("explanation", x.len(), values.len())?;
    let top = top_k(values, k, by);
    for cf in cfs.items() {
        if any_subset_flips(model, x, &cf.point, cf.changed.intersection(top))? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Whether freezing the explanation's top-`k` features at `x` blocks every
/// counterfactual: no subset of the remaining changed features flips `F(x)`.
pub fn sufficiency(
    model: &Model,
    x: &[f64],
    values: &[f64],
    cfs: &CounterfactualSet,
    k: usize,
    by: RankBy,
) -> Result<bool> {
    check_dims("explanation", x.len(), values.len())?;
    let top = top_k(values, k, by);
    for cf in cfs.items() {
        if any_subset_flips(model, x, &cf.point, cf.changed.difference(top))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// How far each selected feature moves toward the counterfactual per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Fractions drawn uniformly from (0, 1].
    Random,
    /// Fractions proportional to attribution magnitude, the largest being 1.
    Proportional,
    /// Move straight to the counterfactual's values.
    Full,
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Action::Random),
            "proportional" => Ok(Action::Proportional),
            "full" => Ok(Action::Full),
            _ => Err(Error::contract(format!("unknown recourse action {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recourse {
    pub point: Vec<f64>,
    pub valid: bool,
}

/// Moves the top-`k` features of `x` toward the nearest counterfactual (the
/// first member of `cfs`). Each feature `j` moves by `min(1, s·α_j)` of the
/// gap, with `s = 1, 2, 4, …` until the decision flips or every selected
/// feature has reached the counterfactual.
#[allow(clippy::too_many_arguments)]
pub fn induce_recourse(
    model: &Model,
    x: &[f64],
    values: &[f64],
    cfs: &CounterfactualSet,
    k: usize,
    action: Action,
    by: RankBy,
    rng: &mut impl Rng,
) -> Result<Recourse> {
    check_dims("explanation", x.len(), values.len())?;
    let target = &cfs.items()[0].point;
    let fx = model.decide(x)?;
    let top: Vec<usize> = Ranking::new(values, by).top(k).to_vec();
    let fractions: Vec<f64> = match action {
        Action::Full => vec![1.0; top.len()],
        // 1 - U maps [0, 1) onto (0, 1]
        Action::Random => top.iter().map(|_| 1.0 - rng.gen::<f64>()).collect(),
        Action::Proportional => {
            let max = top.iter().map(|&j| values[j].abs()).fold(0.0, f64::max);
            top.iter()
                .map(|&j| {
                    if max > 0.0 {
                        values[j].abs() / max
                    } else {
                        1.0
                    }
                })
                .collect()
        }
    };
    let mut point = x.to_vec();
    let mut step = 1.0f64;
    loop {
        let mut done = true;
        for (&j, &alpha) in top.iter().zip(&fractions) {
            let t = (step * alpha).min(1.0);
            // exact endpoint once a feature arrives
            point[j] = if t >= 1.0 {
                target[j]
            } else {
                done = false;
                x[j] + t * (target[j] - x[j])
            };
        }
        let valid = model.decide_unchecked(&point) != fx;
        if valid || done {
            return Ok(Recourse { point, valid });
        }
        step *= 2.0;
    }
}

/// Shared settings for improvement-rate comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecourseParams {
    pub k: usize,
    pub action: Action,
    pub seed: u64,
    pub rank_by: RankBy,
}

/// One query with its counterfactuals.
#[derive(Debug, Clone, Copy)]
pub struct RecourseTask<'a> {
    pub x: &'a [f64],
    pub cfs: &'a CounterfactualSet,
}

/// The random stream for instance `index` under master seed `seed`.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Scores the recourse each explanation induces; win 1, tie 1/2, loss 0.
/// An invalid recourse loses to a valid one, and two invalid ones tie.
fn improvement_rate(
    model: &Model,
    tasks: &[RecourseTask],
    method: &[Vec<f64>],
    baseline: &[Vec<f64>],
    params: RecourseParams,
    score: impl Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    if tasks.len() != method.len() || tasks.len() != baseline.len() {
        return Err(Error::contract("one explanation per task is required"));
    }
    if tasks.is_empty() {
        return Err(Error::domain("no instances to compare"));
    }
    let mut total = 0.0;
    for (i, task) in tasks.iter().enumerate() {
        let induce = |values: &[f64]| {
            // both sides draw from the same stream
            let mut rng = instance_rng(params.seed, i);
            induce_recourse(
                model,
                task.x,
                values,
                task.cfs,
                params.k,
                params.action,
                params.rank_by,
                &mut rng,
            )
        };
        let a = induce(&method[i])?;
        let b = induce(&baseline[i])?;
        total += match (a.valid, b.valid) {
            (true, false) => 1.0,
            (false, true) => 0.0,
            (false, false) => 0.5,
            (true, true) => {
                let (sa, sb) = (score(task.x, &a.point)?, score(task.x, &b.point)?);
                if sa > sb {
                    1.0
                } else if sa < sb {
                    0.0
                } else {
                    0.5
                }
            }
        };
    }
    Ok(total / tasks.len() as f64)
}

/// How often `method`'s induced recourse is closer to the query (in total
/// quantile shift) than `baseline`'s.
pub fn counterfactual_ability_improvement(
    model: &Model,
    qmap: &QuantileMap,
    tasks: &[RecourseTask],
    method: &[Vec<f64>],
    baseline: &[Vec<f64>],
    params: RecourseParams,
) -> Result<f64> {
    improvement_rate(model, tasks, method, baseline, params, |x, p| {
        Ok(-qmap.distance(x, p)?)
    })
}

/// How often `method`'s induced recourse lies in a denser region than
/// `baseline`'s, density being the negative mean quantile distance to the
/// 5 nearest dataset rows.
pub fn plausibility_improvement(
    model: &Model,
    data: &Dataset,
    qmap: &QuantileMap,
    tasks: &[RecourseTask],
    method: &[Vec<f64>],
    baseline: &[Vec<f64>],
    params: RecourseParams,
) -> Result<f64> {
    if data.len() < DENSITY_NEIGHBOURS {
        return Err(Error::domain(format!(
            "plausibility needs at least {DENSITY_NEIGHBOURS} dataset rows"
        )));
    }
    let rows = data
        .rows()
        .iter()
        .map(|r| qmap.transform(r))
        .collect::<Result<Vec<_>>>()?;
    let density = |p: &[f64]| -> Result<f64> {
        let q = qmap.transform(p)?;
        let mut d: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum())
            .collect();
        d.select_nth_unstable_by(DENSITY_NEIGHBOURS - 1, f64::total_cmp);
        let mut near = d[..DENSITY_NEIGHBOURS].to_vec();
        near.sort_by(f64::total_cmp);
        Ok(-near.iter().sum::<f64>() / DENSITY_NEIGHBOURS as f64)
    };
    improvement_rate(model, tasks, method, baseline, params, |_, p| density(p))
}
