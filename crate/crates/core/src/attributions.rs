//! SHAP-family and counterfactual-frequency explanations of one query.
//!
//! Every game-based method works reference by reference: the game for a
//! reference `r` only involves the features where `r` differs from the query,
//! so enumeration runs over that changed set and all other features receive
//! exactly zero.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::ToPrimitive;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::counterfactuals::{ChangeGame, CounterfactualSet};
use crate::error::{check_dims, Error, Result};
use crate::game::{
    banzhaf_normalized, deegan_packel, holler_packel_normalized, shapley, shapley_exact_from_table,
    AttributionVector, Coalition, TabularGame,
};
use crate::models::{changed_features, hybrid_into, Dataset, Model};
use crate::Rational;

const REFERENCE_MAX_CHANGED: usize = 20;

/// Solution concept applied to each single-reference game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Concept {
    Shapley,
    Banzhaf,
    DeeganPackel,
    HollerPackel,
}

impl Concept {
    pub const ALL: [Concept; 4] = [
        Concept::Shapley,
        Concept::Banzhaf,
        Concept::DeeganPackel,
        Concept::HollerPackel,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Concept::Shapley => "shapley",
            Concept::Banzhaf => "banzhaf",
            Concept::DeeganPackel => "deegan-packel",
            Concept::HollerPackel => "holler-packel",
        }
    }
}

impl FromStr for Concept {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Concept::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::contract(format!("unknown solution concept {s:?}")))
    }
}

/// Which model function the single-reference games are built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryFn {
    /// The real-valued output `f`.
    Output,
    /// The binary decision `F`.
    Decision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Shap,
    CfShap,
    BinCfShap,
    CfFreq,
    NormCfFreq,
    Game(Concept, QueryFn),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Shap => f.write_str("shap"),
            Method::CfShap => f.write_str("cf-shap"),
            Method::BinCfShap => f.write_str("bin-cf-shap"),
            Method::CfFreq => f.write_str("cf-freq"),
            Method::NormCfFreq => f.write_str("norm-cf-freq"),
            Method::Game(c, QueryFn::Decision) => write!(f, "game:{}", c.tag()),
            Method::Game(c, QueryFn::Output) => write!(f, "game:{}:f", c.tag()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "shap" => Method::Shap,
            "cf-shap" => Method::CfShap,
            "bin-cf-shap" => Method::BinCfShap,
            "cf-freq" => Method::CfFreq,
            "norm-cf-freq" => Method::NormCfFreq,
            _ => {
                let rest = s
                    .strip_prefix("game:")
                    .ok_or_else(|| Error::contract(format!("unknown method {s:?}")))?;
                match rest.split_once(':') {
                    None => Method::Game(rest.parse()?, QueryFn::Decision),
                    Some((c, "F")) => Method::Game(c.parse()?, QueryFn::Decision),
                    Some((c, "f")) => Method::Game(c.parse()?, QueryFn::Output),
                    Some(_) => return Err(Error::contract(format!("unknown method {s:?}"))),
                }
            }
        })
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Per-feature attributions for one query plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_index: Option<usize>,
    pub query: Vec<f64>,
    pub values: AttributionVector,
    /// Exact values, when the method is computed in rational arithmetic.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "rational_strings"
    )]
    pub exact: Option<Vec<Rational>>,
    pub background_size: usize,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Explanation {
    fn new(method: Method, query: &[f64], values: Vec<f64>, background_size: usize) -> Self {
        Explanation {
            method,
            query_index: None,
            query: query.to_vec(),
            values: AttributionVector::new(values),
            exact: None,
            background_size,
            meta: BTreeMap::new(),
        }
    }

    fn exact(method: Method, query: &[f64], exact: Vec<Rational>, background_size: usize) -> Self {
        let values = exact.iter().map(rational_to_f64).collect();
        let mut e = Explanation::new(method, query, values, background_size);
        e.exact = Some(exact);
        e
    }
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("bounded rationals convert to f64")
}

mod rational_strings {
    use super::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Rational>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.collect_seq(v.iter().map(|r| r.to_string())),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Rational>>, D::Error> {
        let raw: Option<Vec<String>> = Option::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|s| s.parse::<Rational>().map_err(serde::de::Error::custom))
                .collect()
        })
        .transpose()
    }
}

/// Interventional SHAP: the mean over background rows `r` of the Shapley
/// values of `v_r(S) = f(⟨x_S, r_S̄⟩)`.
pub fn shap(model: &Model, x: &[f64], background: &Dataset) -> Result<Explanation> {
    let refs: Vec<&[f64]> = background.rows().iter().map(Vec::as_slice).collect();
    let values = mean_output_shapley(model, x, &refs)?;
    Ok(Explanation::new(Method::Shap, x, values, refs.len()))
}

/// SHAP with the counterfactual set as background.
pub fn cf_shap(model: &Model, x: &[f64], cfs: &CounterfactualSet) -> Result<Explanation> {
    check_query(x, cfs)?;
    let refs: Vec<&[f64]> = cfs.points().collect();
    let values = mean_output_shapley(model, x, &refs)?;
    Ok(Explanation::new(Method::CfShap, x, values, refs.len()))
}

fn mean_output_shapley(model: &Model, x: &[f64], refs: &[&[f64]]) -> Result<Vec<f64>> {
    check_dims("query", model.n_features(), x.len())?;
    if refs.is_empty() {
        return Err(Error::domain("the background set is empty"));
    }
    let mut total = vec![0.0; x.len()];
    for r in refs {
        check_dims("background row", x.len(), r.len())?;
        let changed = changed_features(x, r)?;
        Error::check_capacity("changed features", REFERENCE_MAX_CHANGED, changed.len())?;
        let table = output_table(model, x, r, changed);
        let game = TabularGame::new(changed.len(), table)?;
        let local = shapley(&game)?;
        for (k, i) in changed.iter().enumerate() {
            total[i] += local[k];
        }
    }
    let n = refs.len() as f64;
    Ok(total.into_iter().map(|t| t / n).collect())
}

/// `f(⟨x_S, r_S̄⟩)` for every local coalition `S` of the changed set.
fn output_table(model: &Model, x: &[f64], r: &[f64], changed: Coalition) -> Vec<f64> {
    let c = changed.len();
    let mut point = r.to_vec();
    (0..1u32 << c)
        .map(|bits| {
            point.copy_from_slice(r);
            hybrid_into(
                x,
                changed.expand_local(Coalition::from_bits(bits)),
                &mut point,
            );
            model.output_unchecked(&point)
        })
        .collect()
}

/// `v(S) = 1[F(⟨x_S, x′_S̄⟩) = F(x)]` over local coalitions of the changed set.
///
/// Orienting on `F(x)` makes `v(∅) = 0` and `v(C) = 1` whatever the query's
/// class, so the attributions sum to one.
fn decision_table(game: &ChangeGame) -> Vec<bool> {
    let full = game.full() as usize;
    (0..game.flips.len())
        .map(|s| !game.flips[full ^ s])
        .collect()
}

fn reference_games<'a>(
    model: &'a Model,
    x: &'a [f64],
    cfs: &'a CounterfactualSet,
) -> impl Iterator<Item = Result<ChangeGame>> + 'a {
    cfs.points()
        .map(move |p| ChangeGame::new(model, x, p, REFERENCE_MAX_CHANGED))
}

/// Binary CF-SHAP: mean Shapley values of the decision games, in exact
/// rational arithmetic.
pub fn bin_cf_shap(model: &Model, x: &[f64], cfs: &CounterfactualSet) -> Result<Explanation> {
    check_query(x, cfs)?;
    let mut total = vec![Rational::from_integer(0); x.len()];
    for game in reference_games(model, x, cfs) {
        let game = game?;
        let local = shapley_exact_from_table(game.players(), &decision_table(&game));
        for (k, i) in game.changed.iter().enumerate() {
            total[i] += local[k];
        }
    }
    let n = Rational::from_integer(cfs.len() as i128);
    let exact = total.into_iter().map(|t| t / n).collect();
    Ok(Explanation::exact(Method::BinCfShap, x, exact, cfs.len()))
}

/// Fraction of counterfactuals in which each feature differs from `x`.
pub fn cf_freq(x: &[f64], cfs: &CounterfactualSet) -> Result<Explanation> {
    frequency(Method::CfFreq, x, cfs, |_| 1)
}

/// Like [`cf_freq`], with each counterfactual's indicator divided by its
/// number of changed features, so the values sum to one.
pub fn norm_cf_freq(x: &[f64], cfs: &CounterfactualSet) -> Result<Explanation> {
    frequency(Method::NormCfFreq, x, cfs, |c| c.len() as i128)
}

fn frequency(
    method: Method,
    x: &[f64],
    cfs: &CounterfactualSet,
    norm: impl Fn(Coalition) -> i128,
) -> Result<Explanation> {
    check_query(x, cfs)?;
    if cfs.is_empty() {
        return Err(Error::domain("the counterfactual set is empty"));
    }
    let mut total = vec![Rational::from_integer(0); x.len()];
    for cf in cfs.items() {
        if cf.changed.is_empty() {
            return Err(Error::domain("a counterfactual changes no feature"));
        }
        let share = Rational::new(1, norm(cf.changed));
        for i in cf.changed.iter() {
            total[i] += share;
        }
    }
    let n = Rational::from_integer(cfs.len() as i128);
    let exact = total.into_iter().map(|t| t / n).collect();
    Ok(Explanation::exact(method, x, exact, cfs.len()))
}

/// Mean of a solution concept over the single-reference games of a
/// counterfactual set.
///
/// With [`QueryFn::Decision`] the games are the 0/1 decision games used by
/// [`bin_cf_shap`]; with [`QueryFn::Output`] they are the output games of
/// [`cf_shap`], which only the Shapley value accepts.
pub fn game_attribution(
    model: &Model,
    x: &[f64],
    cfs: &CounterfactualSet,
    concept: Concept,
    query_fn: QueryFn,
) -> Result<Explanation> {
    let method = Method::Game(concept, query_fn);
    match (concept, query_fn) {
        (Concept::Shapley, QueryFn::Output) => {
            let mut e = cf_shap(model, x, cfs)?;
            e.method = method;
            return Ok(e);
        }
        (Concept::Shapley, QueryFn::Decision) => {
            let mut e = bin_cf_shap(model, x, cfs)?;
            e.method = method;
            return Ok(e);
        }
        (_, QueryFn::Output) => {
            return Err(Error::domain(format!(
                "{} is defined for voting games only; use the decision query function",
                concept.tag()
            )))
        }
        _ => {}
    }
    check_query(x, cfs)?;
    let mut total = vec![0.0; x.len()];
    for game in reference_games(model, x, cfs) {
        let game = game?;
        let table = decision_table(&game);
        let tab = TabularGame::new(
            game.players(),
            table.iter().map(|&w| w as u8 as f64).collect(),
        )?;
        let local = match concept {
            Concept::Banzhaf => banzhaf_normalized(&tab)?,
            Concept::DeeganPackel => deegan_packel(&tab)?,
            Concept::HollerPackel => holler_packel_normalized(&tab)?,
            Concept::Shapley => unreachable!(),
        };
        for (k, i) in game.changed.iter().enumerate() {
            total[i] += local[k];
        }
    }
    let n = cfs.len() as f64;
    Ok(Explanation::new(
        method,
        x,
        total.into_iter().map(|t| t / n).collect(),
        cfs.len(),
    ))
}

/// Runs any method; `background` is only read by [`Method::Shap`].
pub fn explain(
    method: Method,
    model: &Model,
    x: &[f64],
    cfs: &CounterfactualSet,
    background: &Dataset,
) -> Result<Explanation> {
    match method {
        Method::Shap => shap(model, x, background),
        Method::CfShap => cf_shap(model, x, cfs),
        Method::BinCfShap => bin_cf_shap(model, x, cfs),
        Method::CfFreq => cf_freq(x, cfs),
        Method::NormCfFreq => norm_cf_freq(x, cfs),
        Method::Game(c, q) => game_attribution(model, x, cfs, c, q),
    }
}

fn check_query(x: &[f64], cfs: &CounterfactualSet) -> Result<()> {
    if x != cfs.query() {
        return Err(Error::contract(
            "the counterfactual set was built for a different query",
        ));
    }
    Ok(())
}
