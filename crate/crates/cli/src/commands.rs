use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cfx_core::attributions::{shap, Explanation, Method};
use cfx_core::counterfactuals::CounterfactualSetDocument;
use cfx_core::metrics::{
    counterfactual_ability_improvement, necessity, pairwise_matrix, plausibility_improvement,
    sufficiency, write_long_csv, MetricReport, PairMetric, RankBy, RecourseParams, RecourseTask,
};
use cfx_core::synthetic::benchmark;
use cfx_core::verify::{run_suite, VerifyConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{MetricsArgs, RunArgs, SynthArgs, VerifyArgs};
use crate::error::{CliError, CliResult};
use crate::output::Output;
use crate::pipeline::{
    background, compute_explanations, cost_fn, load_inputs, method_specs, prepare, thread_pool,
    Instance, MethodSpec,
};

pub fn explain(args: &RunArgs) -> CliResult<()> {
    let inputs = load_inputs(args)?;
    let methods = method_specs(args)?;
    let pool = thread_pool(args.jobs)?;
    let sparse = args.max_sparse || methods.iter().any(|m| m.sparse);
    let (instances, skipped) = prepare(&inputs, args, sparse, &pool)?;
    let bg = background(&inputs.data, args.background)?;
    let explanations = compute_explanations(&inputs, args, &methods, &instances, &bg, &pool)?;
    let mut out = Output::create(&args.out)?;
    for (spec, batch) in methods.iter().zip(&explanations) {
        out.write_lines(&spec.file_name(), batch)?;
    }
    out.write_json("skipped.json", &skipped)?;
    out.finish("explain", args)?;
    Ok(())
}

#[derive(Serialize)]
struct CounterfactualRecord {
    index: usize,
    requested: usize,
    truncated: bool,
    rows: Vec<usize>,
    distances: Vec<f64>,
    set: CounterfactualSetDocument,
}

pub fn gen_cf(args: &RunArgs) -> CliResult<()> {
    let inputs = load_inputs(args)?;
    let pool = thread_pool(args.jobs)?;
    let (instances, skipped) = prepare(&inputs, args, false, &pool)?;
    let records: Vec<CounterfactualRecord> = instances
        .into_iter()
        .map(|inst| {
            if inst.knn.truncated() {
                eprintln!(
                    "warning: row {}: only {} of {} counterfactuals available",
                    inst.index,
                    inst.knn.set.len(),
                    inst.knn.requested
                );
            }
            CounterfactualRecord {
                index: inst.index,
                requested: inst.knn.requested,
                truncated: inst.knn.truncated(),
                set: inst.knn.set.to_document(&inputs.model),
                rows: inst.knn.rows,
                distances: inst.knn.distances,
            }
        })
        .collect();
    let mut out = Output::create(&args.out)?;
    out.write_lines("counterfactuals.jsonl", &records)?;
    out.write_json("skipped.json", &skipped)?;
    out.finish("gen-cf", args)?;
    Ok(())
}

#[derive(Serialize)]
struct MaxSparseRecord {
    index: usize,
    before: CounterfactualSetDocument,
    after: CounterfactualSetDocument,
    cost_before: Vec<f64>,
    cost_after: Vec<f64>,
    /// Total cost after minus total cost before.
    cost_delta: f64,
}

pub fn max_sparse(args: &RunArgs) -> CliResult<()> {
    let inputs = load_inputs(args)?;
    let pool = thread_pool(args.jobs)?;
    let (instances, skipped) = prepare(&inputs, args, true, &pool)?;
    let cost = cost_fn(&inputs, args.cost);
    let records: Vec<MaxSparseRecord> = instances
        .iter()
        .map(|inst| {
            let after = inst.sparse.as_ref().expect("prepared with sparse sets");
            let costs = |set: &cfx_core::counterfactuals::CounterfactualSet| -> Vec<f64> {
                set.points().map(|p| cost(&inst.x, p)).collect()
            };
            let (cost_before, cost_after) = (costs(&inst.knn.set), costs(after));
            MaxSparseRecord {
                index: inst.index,
                before: inst.knn.set.to_document(&inputs.model),
                after: after.to_document(&inputs.model),
                cost_delta: cost_after.iter().sum::<f64>() - cost_before.iter().sum::<f64>(),
                cost_before,
                cost_after,
            }
        })
        .collect();
    let mut out = Output::create(&args.out)?;
    out.write_lines("maxsparse.jsonl", &records)?;
    out.write_json("skipped.json", &skipped)?;
    out.finish("max-sparse", args)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct QualityRow {
    method: String,
    k: usize,
    necessity: f64,
    sufficiency: f64,
    counterfactual_ability: f64,
    plausibility: f64,
}

/// Reads `explain` output for `methods`; every file must cover exactly the
/// prepared instances.
fn load_explanations(
    dir: &Path,
    methods: &[MethodSpec],
    instances: &[Instance],
) -> CliResult<Vec<Vec<Vec<f64>>>> {
    let expected: Vec<usize> = instances.iter().map(|i| i.index).collect();
    methods
        .iter()
        .map(|spec| {
            let path = dir.join(spec.file_name());
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
            let mut indices = Vec::new();
            let mut values = Vec::new();
            for (n, line) in text.lines().enumerate() {
                let e: Explanation = serde_json::from_str(line).map_err(|err| {
                    CliError::Usage(format!("{}: line {}: {err}", path.display(), n + 1))
                })?;
                indices.push(e.query_index.unwrap_or(usize::MAX));
                values.push(e.values.into_inner());
            }
            if indices != expected {
                return Err(CliError::Core(cfx_core::Error::Contract(format!(
                    "{} covers a different instance set than the current run",
                    path.display()
                ))));
            }
            Ok(values)
        })
        .collect()
}

fn pair_metrics(args: &MetricsArgs) -> Vec<PairMetric> {
    let mut metrics = vec![PairMetric::Kendall, PairMetric::Spearman];
    metrics.extend(
        args.run
            .topk
            .iter()
            .map(|&k| PairMetric::FeatureAgreement(k)),
    );
    metrics.extend(args.run.topk.iter().map(|&k| PairMetric::RankAgreement(k)));
    metrics.push(PairMetric::Rbo(args.rbo_p));
    metrics
}

pub fn metrics(args: &MetricsArgs) -> CliResult<()> {
    let run = &args.run;
    let by: RankBy = args.rank_by.into();
    let inputs = load_inputs(run)?;
    let methods = method_specs(run)?;
    let pool = thread_pool(run.jobs)?;
    let sparse = run.max_sparse || methods.iter().any(|m| m.sparse);
    let (instances, skipped) = prepare(&inputs, run, sparse, &pool)?;
    if instances.is_empty() {
        return Err(CliError::Usage("no instance has a counterfactual".into()));
    }
    let bg = background(&inputs.data, run.background)?;
    let batches: Vec<Vec<Vec<f64>>> = match &args.from {
        Some(dir) => load_explanations(dir, &methods, &instances)?,
        None => compute_explanations(&inputs, run, &methods, &instances, &bg, &pool)?
            .into_iter()
            .map(|b| b.into_iter().map(|e| e.values.into_inner()).collect())
            .collect(),
    };
    let names: Vec<String> = methods.iter().map(ToString::to_string).collect();

    let reports = pair_metrics(args)
        .into_iter()
        .map(|m| pairwise_matrix(&names, &batches, m, by))
        .collect::<cfx_core::Result<Vec<MetricReport>>>()?;

    // quality, judged against the K-NN sets and the shap baseline
    let baseline: Vec<Vec<f64>> = match methods
        .iter()
        .position(|m| m.method == Method::Shap && !m.sparse)
    {
        Some(p) => batches[p].clone(),
        None => pool.install(|| {
            instances
                .par_iter()
                .map(|inst| Ok(shap(&inputs.model, &inst.x, &bg)?.values.into_inner()))
                .collect::<CliResult<Vec<_>>>()
        })?,
    };
    let tasks: Vec<RecourseTask> = instances
        .iter()
        .map(|inst| RecourseTask {
            x: &inst.x,
            cfs: &inst.knn.set,
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..methods.len())
        .flat_map(|m| run.topk.iter().map(move |&k| (m, k)))
        .collect();
    let quality: Vec<QualityRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, k)| {
                let values = &batches[m];
                let mut nec = 0usize;
                let mut suf = 0usize;
                for (inst, v) in instances.iter().zip(values) {
                    nec += necessity(&inputs.model, &inst.x, v, &inst.knn.set, k, by)? as usize;
                    suf += sufficiency(&inputs.model, &inst.x, v, &inst.knn.set, k, by)? as usize;
                }
                let params = RecourseParams {
                    k,
                    action: run.action.into(),
                    seed: run.seed,
                    rank_by: by,
                };
                let n = instances.len() as f64;
                Ok(QualityRow {
                    method: names[m].clone(),
                    k,
                    necessity: nec as f64 / n,
                    sufficiency: suf as f64 / n,
                    counterfactual_ability: counterfactual_ability_improvement(
                        &inputs.model,
                        &inputs.qmap,
                        &tasks,
                        values,
                        &baseline,
                        params,
                    )?,
                    plausibility: plausibility_improvement(
                        &inputs.model,
                        &inputs.data,
                        &inputs.qmap,
                        &tasks,
                        values,
                        &baseline,
                        params,
                    )?,
                })
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    let mut out = Output::create(&run.out)?;
    let rows: Vec<_> = reports.iter().flat_map(MetricReport::long_rows).collect();
    let mut csv = Vec::new();
    write_long_csv(&rows, &mut csv)?;
    out.write("pairwise.csv", &csv)?;
    out.write_json("pairwise.json", &reports)?;
    let mut text =
        String::from("method,k,necessity,sufficiency,counterfactual_ability,plausibility\n");
    for q in &quality {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            q.method, q.k, q.necessity, q.sufficiency, q.counterfactual_ability, q.plausibility
        )
        .expect("writing to a string");
    }
    out.write("quality.csv", text.as_bytes())?;
    out.write_json("quality.json", &quality)?;
    let indices: Vec<usize> = instances.iter().map(|i| i.index).collect();
    out.write_json("instances.json", &indices)?;
    out.write_json("skipped.json", &skipped)?;
    out.finish("metrics", args)?;
    Ok(())
}

/// Runs the suites and prints one line per suite; returns whether all passed.
pub fn verify(args: &VerifyArgs) -> CliResult<bool> {
    let mut all = true;
    let mut reports = BTreeMap::new();
    for suite in args.suite.suites() {
        let mut config = VerifyConfig::new(suite, args.seed);
        if let Some(t) = args.trials {
            config.trials = t;
        }
        let report = run_suite(suite, &config)?;
        let status = if report.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {suite}: {} trials, {} checks, {} failures (seed {})",
            report.trials, report.checks, report.failures, report.seed
        );
        for ce in &report.counterexamples {
            println!(
                "{}",
                serde_json::to_string_pretty(ce).expect("serializable")
            );
        }
        all &= report.passed();
        reports.insert(suite.name().to_string(), report);
    }
    if let Some(dir) = &args.out {
        let mut out = Output::create(dir)?;
        for (name, report) in &reports {
            out.write_json(&format!("verify/{name}.json"), report)?;
        }
        #[derive(Serialize)]
        struct Echo<'a> {
            suites: Vec<&'a str>,
            trials: Option<usize>,
            seed: u64,
        }
        let echo = Echo {
            suites: reports.keys().map(String::as_str).collect(),
            trials: args.trials,
            seed: args.seed,
        };
        out.finish("verify", &echo)?;
    }
    Ok(all)
}

pub fn synth(args: &SynthArgs) -> CliResult<()> {
    if args.features == 0 || args.rows == 0 {
        return Err(CliError::Usage(
            "--rows and --features must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let b = benchmark(
        &mut rng,
        args.rows,
        args.features,
        args.trees,
        args.positive_rate,
    )?;
    if b.degenerate_threshold {
        eprintln!(
            "warning: the model output has too few distinct values to hit the requested rate"
        );
    }
    let mut out = Output::create(&args.out)?;
    let mut csv = Vec::new();
    b.data.write_csv(&mut csv)?;
    out.write("data.csv", &csv)?;
    let mut model = b.model.to_json();
    model.push('\n');
    out.write("model.json", model.as_bytes())?;
    out.finish("synth", args)?;
    Ok(())
}
