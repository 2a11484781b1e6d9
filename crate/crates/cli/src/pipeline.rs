//! Loading inputs and preparing per-instance counterfactual sets.

use std::fmt;
use std::fs;
use std::str::FromStr;

use cfx_core::attributions::{explain, Explanation, Method};
use cfx_core::counterfactuals::{
    total_quantile_shift, uniform_cost, CounterfactualIndex, CounterfactualSet, KnnCounterfactuals,
};
use cfx_core::models::{Dataset, Model, QuantileMap};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::args::{CostArg, RunArgs};
use crate::error::{CliError, CliResult};

pub struct Inputs {
    pub data: Dataset,
    pub model: Model,
    pub qmap: QuantileMap,
}

pub fn load_inputs(args: &RunArgs) -> CliResult<Inputs> {
    // the CSV reader already names the file in its errors
    let data = Dataset::load_csv(&args.data)?;
    let text = fs::read_to_string(&args.model).map_err(|e| CliError::io(&args.model, e))?;
    let model = Model::from_json(&text).map_err(|e| CliError::input(&args.model, e))?;
    if model.n_features() != data.n_features() {
        return Err(CliError::Usage(format!(
            "{} expects {} features but {} has {}",
            args.model.display(),
            model.n_features(),
            args.data.display(),
            data.n_features()
        )));
    }
    let qmap = QuantileMap::fit(&data)?;
    Ok(Inputs { data, model, qmap })
}

pub fn thread_pool(jobs: usize) -> CliResult<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

/// A method tag, optionally run on maximally sparse counterfactuals (`-ms`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodSpec {
    pub method: Method,
    pub sparse: bool,
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.method, if self.sparse { "-ms" } else { "" })
    }
}

impl FromStr for MethodSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (tag, sparse) = match s.strip_suffix("-ms") {
            Some(tag) => (tag, true),
            None => (s, false),
        };
        let method: Method = tag.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
        if sparse && method == Method::Shap {
            return Err(CliError::Usage(
                "shap uses the dataset as background, so shap-ms is meaningless".into(),
            ));
        }
        Ok(MethodSpec { method, sparse })
    }
}

impl MethodSpec {
    pub fn file_name(&self) -> String {
        format!("explanations/{}.jsonl", self.to_string().replace(':', "_"))
    }
}

/// The requested methods in order, plus the `--concept` game if given.
pub fn method_specs(args: &RunArgs) -> CliResult<Vec<MethodSpec>> {
    let mut specs: Vec<MethodSpec> = Vec::new();
    let mut push = |spec: MethodSpec| {
        if !specs.contains(&spec) {
            specs.push(spec);
        }
    };
    for tag in &args.methods {
        push(tag.trim().parse()?);
    }
    if let Some(concept) = args.concept {
        push(MethodSpec {
            method: Method::Game(concept.into(), args.query_fn.into()),
            sparse: false,
        });
    }
    if specs.is_empty() {
        return Err(CliError::Usage("no methods requested".into()));
    }
    Ok(specs)
}

pub struct Instance {
    pub index: usize,
    pub x: Vec<f64>,
    pub knn: KnnCounterfactuals,
    pub sparse: Option<CounterfactualSet>,
}

impl Instance {
    pub fn set(&self, sparse: bool) -> &CounterfactualSet {
        match (&self.sparse, sparse) {
            (Some(s), true) => s,
            _ => &self.knn.set,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub index: usize,
    pub reason: String,
}

pub fn cost_fn(inputs: &Inputs, cost: CostArg) -> impl Fn(&[f64], &[f64]) -> f64 + Sync + '_ {
    move |a: &[f64], b: &[f64]| match cost {
        CostArg::Uniform => uniform_cost(a, b),
        CostArg::Quantile => {
            total_quantile_shift(&inputs.qmap, a, b).expect("points match the dataset width")
        }
    }
}

/// K-NN counterfactuals for each selected row, reduced to maximally sparse
/// members when `sparse` is set. Rows without any opposite-class neighbour
/// are skipped with a warning.
pub fn prepare(
    inputs: &Inputs,
    args: &RunArgs,
    sparse: bool,
    pool: &ThreadPool,
) -> CliResult<(Vec<Instance>, Vec<Skipped>)> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    let index = CounterfactualIndex::new(&inputs.model, &inputs.data, &inputs.qmap)?;
    let n = args
        .instances
        .map_or(inputs.data.len(), |n| n.min(inputs.data.len()));
    let cost = cost_fn(inputs, args.cost);
    let results: Vec<CliResult<Result<Instance, Skipped>>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let x = inputs.data.row(i).to_vec();
                let knn = match index.query(&x, args.k) {
                    Ok(knn) => knn,
                    Err(cfx_core::Error::Domain(reason)) => {
                        return Ok(Err(Skipped { index: i, reason }))
                    }
                    Err(e) => return Err(e.into()),
                };
                let reduced = if sparse {
                    Some(knn.set.max_sparse(&inputs.model, &cost)?)
                } else {
                    None
                };
                Ok(Ok(Instance {
                    index: i,
                    x,
                    knn,
                    sparse: reduced,
                }))
            })
            .collect()
    });
    let mut instances = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            Ok(inst) => instances.push(inst),
            Err(skip) => {
                eprintln!("warning: skipping row {}: {}", skip.index, skip.reason);
                skipped.push(skip);
            }
        }
    }
    Ok((instances, skipped))
}

/// Up to `n` rows spread evenly over the dataset.
pub fn background(data: &Dataset, n: usize) -> CliResult<Dataset> {
    let n = n.min(data.len());
    if n == 0 {
        return Err(CliError::Usage("--background must be at least 1".into()));
    }
    let rows = (0..n)
        .map(|i| data.row(i * data.len() / n).to_vec())
        .collect();
    Ok(Dataset::new(data.feature_names().to_vec(), rows)?)
}

/// `result[m][i]` is method `m` on instance `i`.
pub fn compute_explanations(
    inputs: &Inputs,
    args: &RunArgs,
    methods: &[MethodSpec],
    instances: &[Instance],
    background: &Dataset,
    pool: &ThreadPool,
) -> CliResult<Vec<Vec<Explanation>>> {
    let per_instance: Vec<Vec<Explanation>> = pool.install(|| {
        instances
            .par_iter()
            .map(|inst| {
                methods
                    .iter()
                    .map(|spec| {
                        let sparse = spec.sparse || args.max_sparse;
                        let set = inst.set(sparse);
                        let mut e = explain(spec.method, &inputs.model, &inst.x, set, background)?;
                        e.query_index = Some(inst.index);
                        if spec.method != Method::Shap {
                            let kind = if sparse { "max-sparse" } else { "k-nn" };
                            e.meta.insert("counterfactuals".into(), kind.into());
                        }
                        e.meta.insert("method".into(), spec.to_string());
                        Ok(e)
                    })
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut out: Vec<Vec<Explanation>> = methods.iter().map(|_| Vec::new()).collect();
    for row in per_instance {
        for (m, e) in row.into_iter().enumerate() {
            out[m].push(e);
        }
    }
    Ok(out)
}
