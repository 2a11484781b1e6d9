use std::path::PathBuf;

use cfx_core::attributions::{Concept, QueryFn};
use cfx_core::metrics::{Action, RankBy};
use cfx_core::verify::Suite;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "cfx",
    version,
    about = "Counterfactual feature attributions and their verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain dataset rows with one or more attribution methods.
    Explain(RunArgs),
    /// Generate K-NN counterfactual sets.
    GenCf(RunArgs),
    /// Reduce K-NN counterfactuals to maximally sparse ones.
    MaxSparse(RunArgs),
    /// Pairwise agreement matrices and explanation-quality rates.
    Metrics(MetricsArgs),
    /// Run randomized property suites.
    Verify(VerifyArgs),
    /// Write a synthetic dataset and tree-ensemble model.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON model document.
    #[arg(long)]
    pub model: PathBuf,
    /// Method tags; a `-ms` suffix runs the method on maximally sparse
    /// counterfactuals.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "shap,cf-shap,bin-cf-shap,cf-freq,norm-cf-freq"
    )]
    pub methods: Vec<String>,
    /// Counterfactuals per query.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Top-k values for the agreement and quality metrics.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
    pub topk: Vec<usize>,
    /// Reduce every counterfactual set to maximally sparse members first.
    #[arg(long)]
    pub max_sparse: bool,
    /// Model function for `--concept` games.
    #[arg(long, value_enum, default_value = "F")]
    pub query_fn: QueryFnArg,
    /// Adds the power-index attribution for this solution concept.
    #[arg(long, value_enum)]
    pub concept: Option<ConceptArg>,
    /// Cost used to choose among maximally sparse reductions.
    #[arg(long, value_enum, default_value = "quantile")]
    pub cost: CostArg,
    /// How recourse moves the selected features.
    #[arg(long, value_enum, default_value = "random")]
    pub action: ActionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Never changes the output.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub jobs: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Only process the first N rows.
    #[arg(long)]
    pub instances: Option<usize>,
    /// Background rows for SHAP, spread evenly over the dataset.
    #[arg(long, default_value_t = 100)]
    pub background: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MetricsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunArgs,
    /// Read explanations written by `explain` instead of computing them.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "value")]
    pub rank_by: RankByArg,
    /// Persistence of rank-biased overlap.
    #[arg(long, default_value_t = 0.9)]
    pub rbo_p: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
    /// Defaults to the suite's own trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write JSON reports here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub features: usize,
    #[arg(long, default_value_t = 20)]
    pub trees: usize,
    #[arg(long, default_value_t = 0.3)]
    pub positive_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum QueryFnArg {
    #[value(name = "f")]
    #[serde(rename = "f")]
    Output,
    #[value(name = "F")]
    #[serde(rename = "F")]
    Decision,
}

impl From<QueryFnArg> for QueryFn {
    fn from(q: QueryFnArg) -> Self {
        match q {
            QueryFnArg::Output => QueryFn::Output,
            QueryFnArg::Decision => QueryFn::Decision,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptArg {
    Shapley,
    Banzhaf,
    DeeganPackel,
    HollerPackel,
}

impl From<ConceptArg> for Concept {
    fn from(c: ConceptArg) -> Self {
        match c {
            ConceptArg::Shapley => Concept::Shapley,
            ConceptArg::Banzhaf => Concept::Banzhaf,
            ConceptArg::DeeganPackel => Concept::DeeganPackel,
            ConceptArg::HollerPackel => Concept::HollerPackel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostArg {
    Quantile,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionArg {
    Random,
    Proportional,
    Full,
}

impl From<ActionArg> for Action {
    fn from(a: ActionArg) -> Self {
        match a {
            ActionArg::Random => Action::Random,
            ActionArg::Proportional => Action::Proportional,
            ActionArg::Full => Action::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankByArg {
    Magnitude,
    Value,
}

impl From<RankByArg> for RankBy {
    fn from(r: RankByArg) -> Self {
        match r {
            RankByArg::Magnitude => RankBy::Magnitude,
            RankByArg::Value => RankBy::Value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    #[value(name = "maxsparse-equivalence")]
    MaxSparseEquivalence,
    #[value(name = "equal-sparsity")]
    EqualSparsity,
    #[value(name = "power-indices")]
    PowerIndices,
    #[value(name = "sparsity-hierarchy")]
    SparsityHierarchy,
    #[value(name = "efficiency")]
    Efficiency,
    #[value(name = "oracles")]
    Oracles,
    /// Every suite in turn.
    #[value(name = "all")]
    All,
}

impl SuiteArg {
    pub fn suites(self) -> Vec<Suite> {
        match self {
            SuiteArg::MaxSparseEquivalence => vec![Suite::MaxSparseEquivalence],
            SuiteArg::EqualSparsity => vec![Suite::EqualSparsity],
            SuiteArg::PowerIndices => vec![Suite::PowerIndices],
            SuiteArg::SparsityHierarchy => vec![Suite::SparsityHierarchy],
            SuiteArg::Efficiency => vec![Suite::Efficiency],
            SuiteArg::Oracles => vec![Suite::Oracles],
            SuiteArg::All => Suite::ALL.to_vec(),
        }
    }
}
