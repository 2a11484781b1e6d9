//! Randomised and exhaustive property suites for the equivalences between
//! the attribution methods.
//!
//! Every suite is deterministic given its seed: trial `i` draws from
//! [`instance_rng`]`(seed, i)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attributions::{bin_cf_shap, game_attribution, norm_cf_freq, shap, Concept, QueryFn};
use crate::counterfactuals::{
    enumerate_sparsity_families, is_equally_maximally_sparse, is_maximally_sparse,
    is_weakly_maximally_sparse, max_sparse_with, total_quantile_shift, CounterfactualIndex,
    CounterfactualSet, SearchStrategy,
};
use crate::error::{Error, Result};
use crate::game::{
    banzhaf_normalized, deegan_packel, harsanyi_dividends, holler_packel_normalized, shapley,
    shapley_exact, shapley_from_dividends, shapley_permutation_oracle, Coalition, Game,
    TabularGame, UnanimityGame,
};
use crate::metrics::instance_rng;
use crate::models::{Dataset, Model, QuantileMap};
use crate::synthetic::{
    binary_cube, discrete_dataset, random_formula_model, random_linear, random_tree_ensemble,
    truth_table_model,
};
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suite {
    /// Maximally sparse counterfactual sets make binary CF-SHAP equal the
    /// normalised counterfactual frequency.
    MaxSparseEquivalence,
    /// Equal maximal sparsity of a single counterfactual is exactly uniform
    /// binary CF-SHAP on its changed features; sets of such counterfactuals
    /// make the two explanations agree.
    EqualSparsity,
    /// The same equality for every power index on maximally sparse sets.
    PowerIndices,
    /// Maximal ⇒ equal maximal ⇒ weak maximal sparsity, exhaustively.
    SparsityHierarchy,
    /// Efficiency of SHAP, binary CF-SHAP and the normalised frequency.
    Efficiency,
    /// Three independent Shapley computations agree; dividends rebuild the
    /// game; every index is dictators-symmetric.
    Oracles,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::MaxSparseEquivalence,
        Suite::EqualSparsity,
        Suite::PowerIndices,
        Suite::SparsityHierarchy,
        Suite::Efficiency,
        Suite::Oracles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MaxSparseEquivalence => "maxsparse-equivalence",
            Suite::EqualSparsity => "equal-sparsity",
            Suite::PowerIndices => "power-indices",
            Suite::SparsityHierarchy => "sparsity-hierarchy",
            Suite::Efficiency => "efficiency",
            Suite::Oracles => "oracles",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::MaxSparseEquivalence => 500,
            Suite::EqualSparsity => 50,
            Suite::PowerIndices => 200,
            Suite::SparsityHierarchy => 30,
            Suite::Efficiency => 200,
            Suite::Oracles => 100,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown suite {s:?}")))
    }
}

/// Computes the normalised frequency explanation; replaceable so tests can
/// check that a wrong implementation is caught.
pub type NormFn = fn(&[f64], &CounterfactualSet) -> Result<Vec<f64>>;

fn reference_norm(x: &[f64], cfs: &CounterfactualSet) -> Result<Vec<f64>> {
    Ok(norm_cf_freq(x, cfs)?.values.into_inner())
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub trials: usize,
    pub seed: u64,
    pub norm: NormFn,
}

impl VerifyConfig {
    pub fn new(suite: Suite, seed: u64) -> Self {
        VerifyConfig {
            trials: suite.default_trials(),
            seed,
            norm: reference_norm,
        }
    }
}

/// A failed check with enough context to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub trial: usize,
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<serde_json::Value>,
    pub query: Vec<f64>,
    pub counterfactuals: Vec<Vec<f64>>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub checks: u64,
    pub failures: u64,
    /// Failure counts keyed by check name.
    pub failures_by_check: BTreeMap<String, u64>,
    /// The first few failures.
    pub counterexamples: Vec<Counterexample>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

const KEPT_COUNTEREXAMPLES: usize = 5;
const TOLERANCE: f64 = 1e-9;
const ORACLE_TOLERANCE: f64 = 1e-12;

struct Recorder {
    report: SuiteReport,
}

impl Recorder {
    fn check(&mut self, ok: bool, make: impl FnOnce() -> Counterexample) {
        self.report.checks += 1;
        if !ok {
            let ce = make();
            self.report.failures += 1;
            *self
                .report
                .failures_by_check
                .entry(ce.check.clone())
                .or_default() += 1;
            if self.report.counterexamples.len() < KEPT_COUNTEREXAMPLES {
                self.report.counterexamples.push(ce);
            }
        }
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn model_json(model: &Model) -> Option<serde_json::Value> {
    serde_json::from_str(&model.to_json()).ok()
}

fn example(
    trial: usize,
    check: &str,
    model: &Model,
    x: &[f64],
    cfs: &CounterfactualSet,
    left: Vec<f64>,
    right: Vec<f64>,
) -> Counterexample {
    Counterexample {
        trial,
        check: check.to_string(),
        model: model_json(model),
        query: x.to_vec(),
        counterfactuals: cfs.points().map(<[f64]>::to_vec).collect(),
        left,
        right,
    }
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<SuiteReport> {
    let mut rec = Recorder {
        report: SuiteReport {
            suite: suite.name().to_string(),
            seed: config.seed,
            trials: config.trials,
            checks: 0,
            failures: 0,
            failures_by_check: BTreeMap::new(),
            counterexamples: Vec::new(),
        },
    };
    for trial in 0..config.trials {
        let mut rng = instance_rng(config.seed, trial);
        match suite {
            Suite::MaxSparseEquivalence => maxsparse_trial(&mut rec, config, trial, &mut rng)?,
            Suite::EqualSparsity => equal_sparsity_trial(&mut rec, config, trial, &mut rng)?,
            Suite::PowerIndices => power_trial(&mut rec, config, trial, &mut rng)?,
            Suite::SparsityHierarchy => hierarchy_trial(&mut rec, trial, &mut rng)?,
            Suite::Efficiency => efficiency_trial(&mut rec, config, trial, &mut rng)?,
            Suite::Oracles => oracle_trial(&mut rec, trial, &mut rng)?,
        }
    }
    Ok(rec.report)
}

/// A random model with a background dataset, a query row and its K-NN
/// counterfactual set.
struct Scenario {
    model: Model,
    data: Dataset,
    qmap: QuantileMap,
    x: Vec<f64>,
    cfs: CounterfactualSet,
}

fn scenario(rng: &mut impl Rng) -> Result<Scenario> {
    loop {
        let m = rng.gen_range(3..=10);
        let (model, data) = match rng.gen_range(0..3) {
            0 => {
                let levels: Vec<usize> = (0..m).map(|_| rng.gen_range(2..=5)).collect();
                let data = discrete_dataset(rng, 80, &levels);
                let n_trees = rng.gen_range(1..=6);
                let model = random_tree_ensemble(rng, &levels, n_trees, 3);
                (model, data)
            }
            1 => {
                let levels: Vec<usize> = (0..m).map(|_| rng.gen_range(2..=4)).collect();
                (random_linear(rng, m), discrete_dataset(rng, 80, &levels))
            }
            _ => {
                let data = discrete_dataset(rng, 80, &vec![2; m]);
                (random_formula_model(rng, m, 3), data)
            }
        };
        let qmap = QuantileMap::fit(&data)?;
        let index = CounterfactualIndex::new(&model, &data, &qmap)?;
        let row = rng.gen_range(0..data.len());
        let k = rng.gen_range(1..=12);
        let x = data.row(row).to_vec();
        match index.query(&x, k) {
            Ok(knn) => {
                return Ok(Scenario {
                    model,
                    qmap,
                    x,
                    cfs: knn.set,
                    data,
                })
            }
            Err(Error::Domain(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

fn sparse_set(s: &Scenario) -> Result<CounterfactualSet> {
    let cost = |a: &[f64], b: &[f64]| {
        total_quantile_shift(&s.qmap, a, b).expect("dimensions match the quantile map")
    };
    s.cfs.max_sparse(&s.model, &cost)
}

fn efficiency_checks(
    rec: &mut Recorder,
    trial: usize,
    model: &Model,
    x: &[f64],
    cfs: &CounterfactualSet,
    background: &Dataset,
) -> Result<()> {
    let bin = bin_cf_shap(model, x, cfs)?;
    let sum: Rational = bin.exact.as_ref().expect("exact").iter().sum();
    rec.check(sum == Rational::from_integer(1), || {
        example(
            trial,
            "sum of bin-cf-shap is 1",
            model,
            x,
            cfs,
            bin.values.to_vec(),
            vec![1.0],
        )
    });
    let norm = norm_cf_freq(x, cfs)?;
    let nsum: Rational = norm.exact.as_ref().expect("exact").iter().sum();
    rec.check(nsum == Rational::from_integer(1), || {
        example(
            trial,
            "sum of norm-cf-freq is 1",
            model,
            x,
            cfs,
            norm.values.to_vec(),
            vec![1.0],
        )
    });
    let s = shap(model, x, background)?;
    let mean_bg = background
        .rows()
        .iter()
        .map(|r| model.output(r))
        .sum::<Result<f64>>()?
        / background.len() as f64;
    let gap = model.output(x)? - mean_bg;
    rec.check((s.values.sum() - gap).abs() <= TOLERANCE, || {
        example(
            trial,
            "sum of shap is f(x) - E f",
            model,
            x,
            cfs,
            vec![s.values.sum()],
            vec![gap],
        )
    });
    Ok(())
}

fn maxsparse_trial(
    rec: &mut Recorder,
    config: &VerifyConfig,
    trial: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let s = scenario(rng)?;
    let sparse = sparse_set(&s)?;
    for cf in sparse.items() {
        let ms = is_maximally_sparse(&s.model, &s.x, &cf.point)?;
        rec.check(ms, || {
            example(
                trial,
                "max-sparse output is maximally sparse",
                &s.model,
                &s.x,
                &sparse,
                cf.point.clone(),
                vec![],
            )
        });
    }
    // the reduction is the cheapest member of the MS family
    let cf = &s.cfs.items()[0];
    let families = enumerate_sparsity_families(&s.model, &s.x, &cf.point)?;
    let reduced = &sparse.items()[0];
    let cost_of = |t: Coalition| {
        let mut p = s.x.clone();
        for i in t.iter() {
            p[i] = cf.point[i];
        }
        total_quantile_shift(&s.qmap, &s.x, &p)
    };
    let best = families
        .ms
        .iter()
        .map(|&t| cost_of(t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let got = cost_of(reduced.changed)?;
    rec.check(
        families.ms.contains(&reduced.changed) && got == best,
        || {
            example(
                trial,
                "max-sparse is the cheapest MS member",
                &s.model,
                &s.x,
                &s.cfs,
                vec![got],
                vec![best],
            )
        },
    );
    let dfs = max_sparse_with(
        &s.model,
        &s.x,
        &cf.point,
        &|a: &[f64], b: &[f64]| uniform(a, b),
        SearchStrategy::DepthFirst,
    )?;
    rec.check(families.ms.contains(&dfs.counterfactual.changed), || {
        example(
            trial,
            "depth-first result is an MS member",
            &s.model,
            &s.x,
            &s.cfs,
            dfs.counterfactual.point.clone(),
            vec![],
        )
    });

    let bin = bin_cf_shap(&s.model, &s.x, &sparse)?;
    let norm = (config.norm)(&s.x, &sparse)?;
    rec.check(close(&bin.values, &norm, TOLERANCE), || {
        example(
            trial,
            "bin-cf-shap equals norm-cf-freq",
            &s.model,
            &s.x,
            &sparse,
            bin.values.to_vec(),
            norm.clone(),
        )
    });
    efficiency_checks(rec, trial, &s.model, &s.x, &sparse, &s.data)
}

fn uniform(a: &[f64], b: &[f64]) -> f64 {
    crate::counterfactuals::uniform_cost(a, b)
}

fn power_trial(
    rec: &mut Recorder,
    config: &VerifyConfig,
    trial: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let s = scenario(rng)?;
    let sparse = sparse_set(&s)?;
    let norm = (config.norm)(&s.x, &sparse)?;
    for concept in Concept::ALL {
        let g = game_attribution(&s.model, &s.x, &sparse, concept, QueryFn::Decision)?;
        rec.check(close(&g.values, &norm, TOLERANCE), || {
            example(
                trial,
                &format!("{} equals norm-cf-freq", concept.tag()),
                &s.model,
                &s.x,
                &sparse,
                g.values.to_vec(),
                norm.clone(),
            )
        });
    }
    efficiency_checks(rec, trial, &s.model, &s.x, &sparse, &s.data)
}

fn efficiency_trial(
    rec: &mut Recorder,
    _config: &VerifyConfig,
    trial: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let s = scenario(rng)?;
    efficiency_checks(rec, trial, &s.model, &s.x, &s.cfs, &s.data)?;
    let sparse = sparse_set(&s)?;
    efficiency_checks(rec, trial, &s.model, &s.x, &sparse, &s.data)
}

fn boolean_model(rng: &mut impl Rng, m: usize) -> Model {
    if rng.gen_bool(0.5) {
        let density = rng.gen_range(0.1..0.9);
        truth_table_model(rng, m, density)
    } else {
        random_formula_model(rng, m, 3)
    }
}

fn equal_sparsity_trial(
    rec: &mut Recorder,
    config: &VerifyConfig,
    trial: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    let m = rng.gen_range(1..=5);
    let model = boolean_model(rng, m);
    let cube = binary_cube(m);
    let background = Dataset::from_rows(m, cube.clone())?;
    for x in &cube {
        let fx = model.decide(x)?;
        let valid: Vec<&Vec<f64>> = cube
            .iter()
            .filter(|p| model.decide(p).ok() != Some(fx))
            .collect();
        let mut equal = Vec::new();
        for &xp in &valid {
            let set = CounterfactualSet::new(&model, x.clone(), vec![xp.clone()])?;
            let bin = bin_cf_shap(&model, x, &set)?;
            let exact = bin.exact.clone().expect("exact");
            let changed = set.items()[0].changed;
            let share = Rational::new(1, changed.len() as i128);
            let uniform = exact.iter().enumerate().all(|(i, v)| {
                *v == if changed.contains(i) {
                    share
                } else {
                    Rational::from_integer(0)
                }
            });
            let ems = is_equally_maximally_sparse(&model, x, xp)?;
            rec.check(ems == uniform, || {
                example(
                    trial,
                    "equal maximal sparsity iff uniform bin-cf-shap",
                    &model,
                    x,
                    &set,
                    bin.values.to_vec(),
                    vec![ems as u8 as f64],
                )
            });
            let sum: Rational = exact.iter().sum();
            rec.check(sum == Rational::from_integer(1), || {
                example(
                    trial,
                    "sum of bin-cf-shap is 1",
                    &model,
                    x,
                    &set,
                    bin.values.to_vec(),
                    vec![1.0],
                )
            });
            if ems {
                equal.push(xp.clone());
            }
        }
        // sets of equally maximally sparse counterfactuals
        if !equal.is_empty() {
            let take = rng.gen_range(1..=equal.len());
            let set = CounterfactualSet::new(&model, x.clone(), equal[..take].to_vec())?;
            let bin = bin_cf_shap(&model, x, &set)?;
            let norm = (config.norm)(x, &set)?;
            rec.check(close(&bin.values, &norm, TOLERANCE), || {
                example(
                    trial,
                    "equally sparse sets give bin-cf-shap = norm-cf-freq",
                    &model,
                    x,
                    &set,
                    bin.values.to_vec(),
                    norm.clone(),
                )
            });
        }
        if !valid.is_empty() {
            let set = CounterfactualSet::new(&model, x.clone(), vec![valid[0].clone()])?;
            efficiency_checks(rec, trial, &model, x, &set, &background)?;
        }
    }
    Ok(())
}

fn hierarchy_trial(rec: &mut Recorder, trial: usize, rng: &mut impl Rng) -> Result<()> {
    let m = 6;
    let model = boolean_model(rng, m);
    let cube = binary_cube(m);
    for x in &cube {
        let fx = model.decide(x)?;
        for xp in cube.iter().filter(|p| model.decide(p).ok() != Some(fx)) {
            let ms = is_maximally_sparse(&model, x, xp)?;
            let ems = is_equally_maximally_sparse(&model, x, xp)?;
            let wms = is_weakly_maximally_sparse(&model, x, xp)?;
            let set =
                || CounterfactualSet::new(&model, x.clone(), vec![xp.clone()]).expect("valid");
            let flags = vec![ms as u8 as f64, ems as u8 as f64, wms as u8 as f64];
            rec.check(!ms || ems, || {
                example(
                    trial,
                    "maximal implies equal maximal sparsity",
                    &model,
                    x,
                    &set(),
                    flags.clone(),
                    vec![],
                )
            });
            rec.check(!ems || wms, || {
                example(
                    trial,
                    "equal maximal implies weak maximal sparsity",
                    &model,
                    x,
                    &set(),
                    flags.clone(),
                    vec![],
                )
            });
            let fam = enumerate_sparsity_families(&model, x, xp)?;
            rec.check(fam.ms.iter().all(|t| fam.wms.contains(t)), || {
                example(
                    trial,
                    "MS family within WMS family",
                    &model,
                    x,
                    &set(),
                    vec![],
                    vec![],
                )
            });
        }
    }
    Ok(())
}

fn random_game(rng: &mut impl Rng, m: usize) -> Result<TabularGame> {
    let binary = rng.gen_bool(0.5);
    let empty = if rng.gen_bool(0.2) {
        rng.gen_range(-1.0..1.0)
    } else {
        0.0
    };
    TabularGame::from_fn(m, |s| {
        if s.is_empty() && !binary {
            empty
        } else if binary {
            rng.gen_bool(0.5) as u8 as f64
        } else {
            rng.gen_range(-2.0..2.0)
        }
    })
}

fn oracle_trial(rec: &mut Recorder, trial: usize, rng: &mut impl Rng) -> Result<()> {
    let game_example = |check: &str, left: Vec<f64>, right: Vec<f64>| Counterexample {
        trial,
        check: check.to_string(),
        model: None,
        query: vec![],
        counterfactuals: vec![],
        left,
        right,
    };
    let m = rng.gen_range(1..=8);
    let g = random_game(rng, m)?;
    let direct = shapley(&g)?;
    let perm = shapley_permutation_oracle(&g)?;
    let table = harsanyi_dividends(&g)?;
    let div = shapley_from_dividends(&table);
    rec.check(close(&direct, &perm, ORACLE_TOLERANCE), || {
        game_example(
            "subset formula equals permutation oracle",
            direct.to_vec(),
            perm.to_vec(),
        )
    });
    rec.check(close(&direct, &div, ORACLE_TOLERANCE), || {
        game_example(
            "subset formula equals dividend shares",
            direct.to_vec(),
            div.to_vec(),
        )
    });
    let surplus = g.value(Coalition::full(m)) - g.value(Coalition::EMPTY);
    rec.check((direct.sum() - surplus).abs() <= ORACLE_TOLERANCE, || {
        game_example("efficiency", vec![direct.sum()], vec![surplus])
    });

    // reconstruction, up to ten players
    let big = rng.gen_range(1..=10);
    let h = random_game(rng, big)?;
    let t = harsanyi_dividends(&h)?;
    let worst = (0..1u32 << big)
        .map(|b| {
            let s = Coalition::from_bits(b);
            (t.reconstruct(s) - h.value(s)).abs()
        })
        .fold(0.0, f64::max);
    rec.check(worst <= ORACLE_TOLERANCE, || {
        game_example("dividends rebuild the game", vec![worst], vec![0.0])
    });

    // dictators symmetry on a unanimity game
    let mut dictators = Coalition::EMPTY;
    while dictators.is_empty() {
        dictators = Coalition::from_bits(rng.gen_range(0..1u32 << m));
    }
    let u = UnanimityGame {
        players: m,
        dictators,
    };
    let share = 1.0 / dictators.len() as f64;
    let expect: Vec<f64> = (0..m)
        .map(|i| if dictators.contains(i) { share } else { 0.0 })
        .collect();
    let exact = shapley_exact(&u)?;
    let exact_ok = exact.iter().enumerate().all(|(i, v)| {
        *v == if dictators.contains(i) {
            Rational::new(1, dictators.len() as i128)
        } else {
            Rational::from_integer(0)
        }
    });
    rec.check(exact_ok, || {
        game_example("shapley is dictators-symmetric", vec![], expect.clone())
    });
    for (name, values) in [
        ("banzhaf", banzhaf_normalized(&u)?),
        ("deegan-packel", deegan_packel(&u)?),
        ("holler-packel", holler_packel_normalized(&u)?),
    ] {
        rec.check(values.to_vec() == expect, || {
            game_example(
                &format!("{name} is dictators-symmetric"),
                values.to_vec(),
                expect.clone(),
            )
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_a_few_trials() {
        for suite in Suite::ALL {
            let config = VerifyConfig {
                trials: 3,
                ..VerifyConfig::new(suite, 11)
            };
            let report = run_suite(suite, &config).unwrap();
            assert!(report.passed(), "{report:#?}");
            assert!(report.checks > 0);
        }
    }

    #[test]
    fn l2_norm_is_caught() {
        fn l2(x: &[f64], cfs: &CounterfactualSet) -> Result<Vec<f64>> {
            let mut out = vec![0.0; x.len()];
            for cf in cfs.items() {
                let norm = (cf.changed.len() as f64).sqrt();
                for i in cf.changed.iter() {
                    out[i] += 1.0 / norm / cfs.len() as f64;
                }
            }
            Ok(out)
        }
        let config = VerifyConfig {
            trials: 20,
            norm: l2,
            ..VerifyConfig::new(Suite::MaxSparseEquivalence, 0)
        };
        let report = run_suite(Suite::MaxSparseEquivalence, &config).unwrap();
        assert!(!report.passed());
        assert!(!report.counterexamples.is_empty());
        assert!(report.counterexamples[0].model.is_some());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
    }
}
