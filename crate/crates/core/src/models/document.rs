use serde::{Deserialize, Serialize};

use super::{CmpOp, Formula, Link, Model, ModelKind, Node, Tree};
use crate::error::{Error, Result};

/// The portable JSON form of a [`Model`].
///
/// ```json
/// {"kind": "linear", "threshold": 0.5, "link": "identity",
///  "weights": [1.0, 0.0], "bias": 0.0}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub spec: ModelSpec,
    pub threshold: f64,
    #[serde(default)]
    pub link: Link,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    TreeEnsemble {
        n_features: usize,
        #[serde(default)]
        base_score: f64,
        trees: Vec<Vec<NodeDocument>>,
    },
    Linear {
        weights: Vec<f64>,
        #[serde(default)]
        bias: f64,
    },
    BooleanFormula {
        n_features: usize,
        formula: ExprDocument,
    },
}

/// A tree node: a split `{feature, threshold, left, right}` or a leaf `{value}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// A formula node: exactly one of `and`, `or`, `not`, or an atom
/// `{feature, op, constant}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub and: Option<Vec<ExprDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub or: Option<Vec<ExprDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not: Option<Box<ExprDocument>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<CmpOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }

    pub fn into_model(self) -> Result<Model> {
        if !self.threshold.is_finite() {
            return Err(Error::parse("threshold", "value is not finite"));
        }
        let (n_features, kind) = match self.spec {
            ModelSpec::TreeEnsemble {
                n_features,
                base_score,
                trees,
            } => {
                if !base_score.is_finite() {
                    return Err(Error::parse("base_score", "value is not finite"));
                }
                let trees = trees
                    .into_iter()
                    .enumerate()
                    .map(|(t, nodes)| parse_tree(t, nodes, n_features))
                    .collect::<Result<_>>()?;
                (n_features, ModelKind::TreeEnsemble { base_score, trees })
            }
            ModelSpec::Linear { weights, bias } => {
                if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
                    return Err(Error::parse(format!("weights[{i}]"), "value is not finite"));
                }
                if !bias.is_finite() {
                    return Err(Error::parse("bias", "value is not finite"));
                }
                (weights.len(), ModelKind::Linear { weights, bias })
            }
            ModelSpec::BooleanFormula {
                n_features,
                formula,
            } => {
                let formula = parse_expr(formula, "formula", n_features)?;
                (n_features, ModelKind::BooleanFormula(formula))
            }
        };
        Model::new(n_features, kind, self.link, self.threshold)
    }

    pub fn from_model(model: &Model) -> Self {
        let spec = match &model.kind {
            ModelKind::TreeEnsemble { base_score, trees } => ModelSpec::TreeEnsemble {
                n_features: model.n_features,
                base_score: *base_score,
                trees: trees
                    .iter()
                    .map(|t| t.nodes.iter().map(node_document).collect())
                    .collect(),
            },
            ModelKind::Linear { weights, bias } => ModelSpec::Linear {
                weights: weights.clone(),
                bias: *bias,
            },
            ModelKind::BooleanFormula(f) => ModelSpec::BooleanFormula {
                n_features: model.n_features,
                formula: expr_document(f),
            },
        };
        ModelDocument {
            spec,
            threshold: model.threshold,
            link: model.link,
        }
    }
}

fn parse_tree(t: usize, nodes: Vec<NodeDocument>, n_features: usize) -> Result<Tree> {
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(i, n)| match n {
            NodeDocument {
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                value: None,
            } => Ok(Node::Split {
                feature,
                threshold,
                left,
                right,
            }),
            NodeDocument {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                value: Some(v),
            } => Ok(Node::Leaf(v)),
            _ => Err(Error::parse(
                format!("tree {t}, node {i}"),
                "a node is either {feature, threshold, left, right} or {value}",
            )),
        })
        .collect::<Result<Vec<_>>>()?;
    Tree::new(nodes, n_features)
        .map_err(|(i, msg)| Error::parse(format!("tree {t}, node {i}"), msg))
}

fn parse_expr(e: ExprDocument, path: &str, n_features: usize) -> Result<Formula> {
    let err = |msg: &str| Error::parse(path, msg);
    match e {
        ExprDocument {
            and: Some(terms),
            or: None,
            not: None,
            feature: None,
            op: None,
            constant: None,
        } => parse_terms(terms, path, "and", n_features).map(Formula::And),
        ExprDocument {
            and: None,
            or: Some(terms),
            not: None,
            feature: None,
            op: None,
            constant: None,
        } => parse_terms(terms, path, "or", n_features).map(Formula::Or),
        ExprDocument {
            and: None,
            or: None,
            not: Some(inner),
            feature: None,
            op: None,
            constant: None,
        } => Ok(Formula::Not(Box::new(parse_expr(
            *inner,
            &format!("{path}.not"),
            n_features,
        )?))),
        ExprDocument {
            and: None,
            or: None,
            not: None,
            feature: Some(feature),
            op: Some(op),
            constant: Some(constant),
        } => {
            if feature >= n_features {
                return Err(err(&format!(
                    "feature {feature} out of range for {n_features} features"
                )));
            }
            if !constant.is_finite() {
                return Err(err("constant is not finite"));
            }
            Ok(Formula::atom(feature, op, constant))
        }
        _ => Err(err(
            "expected exactly one of and/or/not or an atom {feature, op, constant}",
        )),
    }
}

fn parse_terms(
    terms: Vec<ExprDocument>,
    path: &str,
    key: &str,
    n_features: usize,
) -> Result<Vec<Formula>> {
    if terms.is_empty() {
        return Err(Error::parse(
            format!("{path}.{key}"),
            "needs at least one operand",
        ));
    }
    terms
        .into_iter()
        .enumerate()
        .map(|(i, t)| parse_expr(t, &format!("{path}.{key}[{i}]"), n_features))
        .collect()
}

fn node_document(node: &Node) -> NodeDocument {
    match *node {
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => NodeDocument {
            feature: Some(feature),
            threshold: Some(threshold),
            left: Some(left),
            right: Some(right),
            value: None,
        },
        Node::Leaf(v) => NodeDocument {
            value: Some(v),
            ..Default::default()
        },
    }
}

fn expr_document(f: &Formula) -> ExprDocument {
    match f {
        Formula::Atom {
            feature,
            op,
            constant,
        } => ExprDocument {
            feature: Some(*feature),
            op: Some(*op),
            constant: Some(*constant),
            ..Default::default()
        },
        Formula::And(terms) => ExprDocument {
            and: Some(terms.iter().map(expr_document).collect()),
            ..Default::default()
        },
        Formula::Or(terms) => ExprDocument {
            or: Some(terms.iter().map(expr_document).collect()),
            ..Default::default()
        },
        Formula::Not(inner) => ExprDocument {
            not: Some(Box::new(expr_document(inner))),
            ..Default::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = r#"{
        "kind": "boolean-formula", "threshold": 0.5, "n_features": 6,
        "formula": {"and": [
            {"feature": 0, "op": ">", "constant": 0.5},
            {"or": [
                {"feature": 1, "op": ">", "constant": 0.5},
                {"and": [
                    {"feature": 2, "op": ">", "constant": 0.5},
                    {"feature": 3, "op": ">", "constant": 0.5}
                ]}
            ]}
        ]}
    }"#;

    #[test]
    fn linear_document() {
        let m = Model::from_json(r#"{"kind":"linear","weights":[1,0],"bias":0,"threshold":0.5}"#)
            .unwrap();
        assert!(m.decide(&[1.0, 0.0]).unwrap());
        assert!(!m.decide(&[0.0, 1.0]).unwrap());
    }

    #[test]
    fn boolean_document() {
        let m = Model::from_json(TOY).unwrap();
        assert!(m.decide(&[1.0; 6]).unwrap());
        assert!(!m.decide(&[0.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap());
        assert!(m.decide(&[1.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap());
        assert!(!m.decide(&[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap());
    }

    #[test]
    fn tree_document_and_round_trip() {
        let doc = r#"{"kind":"tree-ensemble","threshold":0.0,"link":"sigmoid","n_features":2,
            "base_score":-0.25,
            "trees":[[{"feature":1,"threshold":0.5,"left":1,"right":2},{"value":-1},{"value":2}],
                     [{"value":0.5}]]}"#;
        let m = Model::from_json(doc).unwrap();
        let raw: f64 = -0.25 + 2.0 + 0.5;
        assert_eq!(m.output(&[0.0, 1.0]).unwrap(), 1.0 / (1.0 + (-raw).exp()));
        let again = Model::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
        let toy = Model::from_json(TOY).unwrap();
        assert_eq!(Model::from_json(&toy.to_json()).unwrap(), toy);
    }

    #[test]
    fn bad_node_index_names_tree_and_node() {
        let doc = r#"{"kind":"tree-ensemble","threshold":0,"n_features":1,
            "trees":[[{"value":0}],[{"feature":0,"threshold":0,"left":1,"right":7},{"value":1}]]}"#;
        match Model::from_json(doc) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "tree 1, node 0");
                assert!(message.contains('7'), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        for doc in [
            r#"{"kind":"forest","threshold":0}"#,
            r#"{"kind":"linear","weights":[1]}"#,
            r#"{"kind":"linear","weights":[1e400],"threshold":0}"#,
            r#"{"kind":"boolean-formula","threshold":0,"n_features":1,
                "formula":{"feature":3,"op":">","constant":0}}"#,
            r#"{"kind":"boolean-formula","threshold":0,"n_features":1,
                "formula":{"feature":0,"op":"!=","constant":0}}"#,
            r#"{"kind":"boolean-formula","threshold":0,"n_features":1,
                "formula":{"and":[],"feature":0}}"#,
            r#"{"kind":"tree-ensemble","threshold":0,"n_features":1,
                "trees":[[{"feature":0,"value":1}]]}"#,
        ] {
            assert!(
                matches!(Model::from_json(doc), Err(Error::Parse { .. })),
                "{doc}"
            );
        }
    }

    #[test]
    fn ascii_and_unicode_operators() {
        let le = r#"{"kind":"boolean-formula","threshold":0.5,"n_features":1,
            "formula":{"feature":0,"op":"<=","constant":1}}"#;
        let m = Model::from_json(le).unwrap();
        assert!(m.decide(&[1.0]).unwrap());
        assert!(m.to_json().contains("≤"));
    }
}
