//! Seeded random models and datasets for property suites and demos.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::models::{
    threshold_from_rate, CmpOp, Dataset, Formula, Link, Model, ModelKind, Node, Tree,
};
use crate::Result;

/// Integer-valued features; feature `j` takes values `0..levels[j]`.
///
/// Rows share a latent level so features are positively correlated, and
/// about half of each row's cells are pure noise.
pub fn discrete_dataset(rng: &mut impl Rng, n_rows: usize, levels: &[usize]) -> Dataset {
    let rows = (0..n_rows)
        .map(|_| {
            let z: f64 = rng.gen();
            levels
                .iter()
                .map(|&l| {
                    let top = (l - 1) as f64;
                    if rng.gen_bool(0.5) {
                        // + 0.0 turns a rounded -0.0 into 0.0
                        (z * top + rng.gen_range(-0.6..0.6)).round().clamp(0.0, top) + 0.0
                    } else {
                        rng.gen_range(0..l) as f64
                    }
                })
                .collect()
        })
        .collect();
    Dataset::from_rows(levels.len(), rows).expect("generated rows are well-formed")
}

/// All points of `{0, 1}^m`, in binary counting order.
pub fn binary_cube(m: usize) -> Vec<Vec<f64>> {
    (0..1u32 << m)
        .map(|bits| (0..m).map(|i| (bits >> i & 1) as f64).collect())
        .collect()
}

fn literal(rng: &mut impl Rng, n_features: usize) -> Formula {
    let f = rng.gen_range(0..n_features);
    let op = if rng.gen_bool(0.5) {
        CmpOp::Gt
    } else {
        CmpOp::Lt
    };
    Formula::atom(f, op, 0.5)
}

/// A random and/or/not formula over binary features.
pub fn random_formula(rng: &mut impl Rng, n_features: usize, depth: usize) -> Formula {
    if depth == 0 || rng.gen_bool(0.25) {
        return literal(rng, n_features);
    }
    let arity = rng.gen_range(2..=3);
    let terms = (0..arity)
        .map(|_| random_formula(rng, n_features, depth - 1))
        .collect();
    let node = if rng.gen_bool(0.5) {
        Formula::And(terms)
    } else {
        Formula::Or(terms)
    };
    if rng.gen_bool(0.15) {
        Formula::Not(Box::new(node))
    } else {
        node
    }
}

/// A formula model on binary features.
pub fn random_formula_model(rng: &mut impl Rng, n_features: usize, depth: usize) -> Model {
    Model::formula(n_features, random_formula(rng, n_features, depth))
        .expect("generated features are in range")
}

/// An arbitrary boolean function of `m` binary features, each point of the
/// cube being positive with probability `density`, written as a DNF.
pub fn truth_table_model(rng: &mut impl Rng, n_features: usize, density: f64) -> Model {
    let mut minterms: Vec<Formula> = binary_cube(n_features)
        .into_iter()
        .filter(|_| rng.gen_bool(density))
        .map(|p| {
            Formula::And(
                p.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        Formula::atom(i, if v > 0.5 { CmpOp::Gt } else { CmpOp::Lt }, 0.5)
                    })
                    .collect(),
            )
        })
        .collect();
    if minterms.is_empty() {
        // the constant-false function: x0 > 0.5 and x0 < 0.5
        minterms.push(Formula::And(vec![
            Formula::atom(0, CmpOp::Gt, 0.5),
            Formula::atom(0, CmpOp::Lt, 0.5),
        ]));
    }
    Model::formula(n_features, Formula::Or(minterms)).expect("generated features are in range")
}

/// A random tree of the given depth splitting integer features halfway
/// between levels.
pub fn random_tree(rng: &mut impl Rng, levels: &[usize], depth: usize) -> Tree {
    fn grow(rng: &mut impl Rng, levels: &[usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let splittable: Vec<usize> = (0..levels.len()).filter(|&j| levels[j] > 1).collect();
        if depth == 0 || splittable.is_empty() {
            nodes.push(Node::Leaf(
                (rng.gen_range(-1.0..1.0f64) * 100.0).round() / 100.0,
            ));
            return id;
        }
        let feature = *splittable.choose(rng).expect("nonempty");
        let threshold = rng.gen_range(0..levels[feature] - 1) as f64 + 0.5;
        nodes.push(Node::Leaf(0.0));
        let left = grow(rng, levels, depth - 1, nodes);
        let right = grow(rng, levels, depth - 1, nodes);
        nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
    let mut nodes = Vec::new();
    grow(rng, levels, depth, &mut nodes);
    Tree::new(nodes, levels.len()).expect("generated trees are well-formed")
}

/// An additive ensemble of random trees with identity link and threshold 0.
pub fn random_tree_ensemble(
    rng: &mut impl Rng,
    levels: &[usize],
    n_trees: usize,
    depth: usize,
) -> Model {
    let trees = (0..n_trees)
        .map(|_| random_tree(rng, levels, depth))
        .collect();
    Model::new(
        levels.len(),
        ModelKind::TreeEnsemble {
            base_score: 0.0,
            trees,
        },
        Link::Identity,
        0.0,
    )
    .expect("generated ensembles are valid")
}

/// Integer weights in `[-3, 3]` and a bias, thresholded at 0.
pub fn random_linear(rng: &mut impl Rng, n_features: usize) -> Model {
    let weights = (0..n_features)
        .map(|_| rng.gen_range(-3..=3) as f64)
        .collect();
    Model::linear(weights, rng.gen_range(-2..=2) as f64, 0.0).expect("generated weights are finite")
}

/// A tabular benchmark: integer features, a random tree ensemble and a
/// threshold giving roughly `positive_rate` positives on the data.
pub struct Benchmark {
    pub data: Dataset,
    pub model: Model,
    pub degenerate_threshold: bool,
}

pub fn benchmark(
    rng: &mut impl Rng,
    n_rows: usize,
    n_features: usize,
    n_trees: usize,
    positive_rate: f64,
) -> Result<Benchmark> {
    let levels: Vec<usize> = (0..n_features).map(|_| rng.gen_range(2..=6)).collect();
    let data = discrete_dataset(rng, n_rows, &levels);
    let model = random_tree_ensemble(rng, &levels, n_trees, 3);
    let fit = threshold_from_rate(&model, &data, positive_rate)?;
    Ok(Benchmark {
        model: model.with_threshold(fit.threshold)?,
        data,
        degenerate_threshold: fit.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_under_seed() {
        let make = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let b = benchmark(&mut rng, 200, 6, 5, 0.3).unwrap();
            (b.data, b.model)
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn truth_table_matches_its_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = truth_table_model(&mut rng, 3, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for p in binary_cube(3) {
            assert_eq!(m.decide(&p).unwrap(), rng.gen_bool(0.5));
        }
    }

    #[test]
    fn benchmark_rate_and_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = benchmark(&mut rng, 1000, 10, 20, 0.3).unwrap();
        let pos = b
            .data
            .rows()
            .iter()
            .filter(|r| b.model.decide(r).unwrap())
            .count();
        assert!((200..=400).contains(&pos), "{pos}");
        assert!(!b.degenerate_threshold);
    }
}
