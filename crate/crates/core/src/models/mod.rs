//! Binary-decision models, hybrid points, datasets and the quantile transform.

mod data;
mod document;
mod quantile;

pub use data::Dataset;
pub use document::{ExprDocument, ModelDocument, ModelSpec, NodeDocument};
pub use quantile::{threshold_from_rate, QuantileMap, ThresholdFit};

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::game::Coalition;

/// Squashing applied to the raw score before thresholding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Identity,
    Sigmoid,
}

impl Link {
    pub fn apply(self, raw: f64) -> f64 {
        match self {
            Link::Identity => raw,
            Link::Sigmoid => 1.0 / (1.0 + (-raw).exp()),
        }
    }
}

/// Comparison used by boolean-formula atoms: `x[feature] op constant`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "≤", alias = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "<")]
    Lt,
}

impl CmpOp {
    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Gt => lhs > rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Lt => lhs < rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// A regression tree stored as a node array rooted at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Checks that the nodes form a single tree rooted at 0 over
    /// `n_features` inputs. Errors carry the offending node index.
    pub fn new(nodes: Vec<Node>, n_features: usize) -> Result<Self, (usize, String)> {
        if nodes.is_empty() {
            return Err((0, "tree has no nodes".into()));
        }
        let mut parent = vec![None; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf(v) if !v.is_finite() => {
                    return Err((i, format!("leaf value {v} is not finite")))
                }
                Node::Leaf(_) => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err((
                            i,
                            format!("feature {feature} out of range for {n_features} features"),
                        ));
                    }
                    if !threshold.is_finite() {
                        return Err((i, format!("threshold {threshold} is not finite")));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() {
                            return Err((
                                i,
                                format!("child index {child} out of range ({} nodes)", nodes.len()),
                            ));
                        }
                        if child == 0 || parent[child].is_some() {
                            return Err((i, format!("node {child} has more than one parent")));
                        }
                        parent[child] = Some(i);
                    }
                }
            }
        }
        // with one parent per non-root node, any node cut off from the root
        // sits on a cycle or hangs below one
        let mut reached = vec![false; nodes.len()];
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            reached[i] = true;
            if let Node::Split { left, right, .. } = nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err((i, "node is unreachable from the root".into()));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// Boolean expression over thresholded features.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Atom {
        feature: usize,
        op: CmpOp,
        constant: f64,
    },
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn atom(feature: usize, op: CmpOp, constant: f64) -> Self {
        Formula::Atom {
            feature,
            op,
            constant,
        }
    }

    pub fn eval(&self, x: &[f64]) -> bool {
        match self {
            Formula::Atom {
                feature,
                op,
                constant,
            } => op.eval(x[*feature], *constant),
            Formula::And(terms) => terms.iter().all(|t| t.eval(x)),
            Formula::Or(terms) => terms.iter().any(|t| t.eval(x)),
            Formula::Not(inner) => !inner.eval(x),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Formula::Atom { feature, .. } => Some(*feature),
            Formula::And(terms) | Formula::Or(terms) => {
                terms.iter().filter_map(Formula::max_feature).max()
            }
            Formula::Not(inner) => inner.max_feature(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    TreeEnsemble { base_score: f64, trees: Vec<Tree> },
    Linear { weights: Vec<f64>, bias: f64 },
    BooleanFormula(Formula),
}

/// A scoring function `f` with link and threshold, giving the decision
/// `F(x) = 1[f(x) > t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    n_features: usize,
    kind: ModelKind,
    link: Link,
    threshold: f64,
}

impl Model {
    pub fn new(n_features: usize, kind: ModelKind, link: Link, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::domain(format!(
                "threshold {threshold} is not finite"
            )));
        }
        match &kind {
            ModelKind::TreeEnsemble { base_score, trees } => {
                if !base_score.is_finite() {
                    return Err(Error::domain("base score is not finite"));
                }
                for tree in trees {
                    for node in &tree.nodes {
                        if let Node::Split { feature, .. } = node {
                            check_feature(*feature, n_features)?;
                        }
                    }
                }
            }
            ModelKind::Linear { weights, bias } => {
                check_dims("linear weights", n_features, weights.len())?;
                if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::domain("linear parameters must be finite"));
                }
            }
            ModelKind::BooleanFormula(formula) => {
                if let Some(f) = formula.max_feature() {
                    check_feature(f, n_features)?;
                }
            }
        }
        Ok(Model {
            n_features,
            kind,
            link,
            threshold,
        })
    }

    pub fn linear(weights: Vec<f64>, bias: f64, threshold: f64) -> Result<Self> {
        let m = weights.len();
        Model::new(
            m,
            ModelKind::Linear { weights, bias },
            Link::Identity,
            threshold,
        )
    }

    /// A boolean formula scored 1/0 and thresholded at 0.5.
    pub fn formula(n_features: usize, formula: Formula) -> Result<Self> {
        Model::new(
            n_features,
            ModelKind::BooleanFormula(formula),
            Link::Identity,
            0.5,
        )
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::domain(format!(
                "threshold {threshold} is not finite"
            )));
        }
        self.threshold = threshold;
        Ok(self)
    }

    /// The model output `f(x)`.
    pub fn output(&self, x: &[f64]) -> Result<f64> {
        check_dims("model input", self.n_features, x.len())?;
        Ok(self.output_unchecked(x))
    }

    /// The decision `F(x)`.
    pub fn decide(&self, x: &[f64]) -> Result<bool> {
        check_dims("model input", self.n_features, x.len())?;
        Ok(self.decide_unchecked(x))
    }

    pub(crate) fn output_unchecked(&self, x: &[f64]) -> f64 {
        let raw = match &self.kind {
            ModelKind::TreeEnsemble { base_score, trees } => {
                trees.iter().fold(*base_score, |acc, t| acc + t.eval(x))
            }
            ModelKind::Linear { weights, bias } => {
                weights.iter().zip(x).fold(*bias, |acc, (w, v)| acc + w * v)
            }
            ModelKind::BooleanFormula(formula) => formula.eval(x) as u8 as f64,
        };
        self.link.apply(raw)
    }

    pub(crate) fn decide_unchecked(&self, x: &[f64]) -> bool {
        self.output_unchecked(x) > self.threshold
    }

    pub fn from_json(text: &str) -> Result<Self> {
        ModelDocument::from_json(text)?.into_model()
    }

    pub fn to_json(&self) -> String {
        ModelDocument::from_model(self).to_json()
    }
}

fn check_feature(feature: usize, n_features: usize) -> Result<()> {
    if feature >= n_features {
        return Err(Error::contract(format!(
            "feature {feature} out of range for {n_features} features"
        )));
    }
    Ok(())
}

/// The hybrid point `⟨x_S, xp_S̄⟩`: `x` on `s`, `xp` elsewhere.
pub fn hybrid(x: &[f64], xp: &[f64], s: Coalition) -> Result<Vec<f64>> {
    check_dims("hybrid operands", x.len(), xp.len())?;
    if s.span() > x.len() {
        return Err(Error::contract(format!(
            "coalition {s} lies outside {} features",
            x.len()
        )));
    }
    let mut out = xp.to_vec();
    hybrid_into(x, s, &mut out);
    Ok(out)
}

/// Overwrites the coordinates in `s` of `out` with those of `x`.
pub(crate) fn hybrid_into(x: &[f64], s: Coalition, out: &mut [f64]) {
    for i in s.iter() {
        out[i] = x[i];
    }
}

/// Features whose values differ between two points.
pub fn changed_features(x: &[f64], xp: &[f64]) -> Result<Coalition> {
    check_dims("changed-feature operands", x.len(), xp.len())?;
    Error::check_capacity("features", Coalition::MAX_PLAYERS, x.len())?;
    Ok(x.iter()
        .zip(xp)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(value_right: f64) -> Tree {
        Tree::new(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf(0.0),
                Node::Leaf(value_right),
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn outputs() {
        let lin = Model::linear(vec![1.0, 1.0], 0.0, 0.0).unwrap();
        assert_eq!(lin.output(&[2.0, 3.0]).unwrap(), 5.0);

        let one = Model::new(
            1,
            ModelKind::TreeEnsemble {
                base_score: 0.0,
                trees: vec![stump(1.0)],
            },
            Link::Identity,
            0.5,
        )
        .unwrap();
        assert_eq!(one.output(&[1.0]).unwrap(), 1.0);
        assert_eq!(one.output(&[0.5]).unwrap(), 0.0);

        let two = Model::new(
            1,
            ModelKind::TreeEnsemble {
                base_score: 0.0,
                trees: vec![stump(1.0), stump(1.0)],
            },
            Link::Identity,
            0.5,
        )
        .unwrap();
        assert_eq!(two.output(&[1.0]).unwrap(), 2.0);
        assert!(matches!(two.output(&[1.0, 2.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn strict_decision() {
        let m = Model::linear(vec![1.0], 0.0, 0.5).unwrap();
        assert!(m.decide(&[0.7]).unwrap());
        assert!(!m.decide(&[0.5]).unwrap());
    }

    #[test]
    fn sigmoid_link() {
        let m = Model::new(
            1,
            ModelKind::Linear {
                weights: vec![1.0],
                bias: 0.0,
            },
            Link::Sigmoid,
            0.5,
        )
        .unwrap();
        assert_eq!(m.output(&[0.0]).unwrap(), 0.5);
        assert!(m.decide(&[0.1]).unwrap());
    }

    #[test]
    fn hybrid_points() {
        let x = [1.0; 6];
        let xp = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(hybrid(&x, &xp, Coalition::full(6)).unwrap(), x.to_vec());
        assert_eq!(hybrid(&x, &xp, Coalition::EMPTY).unwrap(), xp.to_vec());
        assert_eq!(
            hybrid(&x, &xp, Coalition::singleton(0)).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert!(hybrid(&x, &xp[..5], Coalition::EMPTY).is_err());
    }

    #[test]
    fn malformed_trees() {
        let cyc = Tree::new(
            vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf(0.0),
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 1,
                },
            ],
            1,
        );
        assert_eq!(cyc.unwrap_err().0, 2);
        let orphan = Tree::new(vec![Node::Leaf(0.0), Node::Leaf(1.0)], 1);
        assert_eq!(orphan.unwrap_err().0, 1);
    }

    #[test]
    fn changed_set() {
        let c = changed_features(&[1.0, 2.0, 3.0], &[1.0, 0.0, -3.0]).unwrap();
        assert_eq!(c, Coalition::from_indices([1, 2]));
    }
}
