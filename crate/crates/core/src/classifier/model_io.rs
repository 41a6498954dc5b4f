//! Plain-text model files.
//!
//! ```text
//! nectar-ml-model v1 <metric> <learner> <n_estimators>
//! # free-form comment lines
//! params max_depth <d> min_samples_split <s> min_samples_leaf <l> fingerprint <hex>
//! tree <i> nodes <k>
//! node <id> feat <f> thr <float> left <id> right <id>
//! leaf <id> p_qe <float> p_wocc <float>
//! ```
//!
//! Floats use the shortest representation that parses back to the same bits.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::tree::{DecisionTree, TreeNode};
use super::{Hyperparams, Learner, ModelEnsemble};
use crate::error::{Error, Result};
use crate::graph::FEATURE_COUNT;
use crate::metrics::MetricKind;

pub const MODEL_MAGIC: &str = "nectar-ml-model";
const VERSION: &str = "v1";

/// Writes `model`, with each line of `comment` emitted as a `#` line
/// after the header.
pub fn write_model<W: Write>(out: &mut W, model: &ModelEnsemble, comment: &[String]) -> std::io::Result<()> {
    let p = &model.params;
    writeln!(
        out,
        "{MODEL_MAGIC} {VERSION} {} {} {}",
        model.metric.as_str(),
        p.learner,
        model.trees.len()
    )?;
    for line in comment {
        writeln!(out, "# {line}")?;
    }
    writeln!(
        out,
        "params max_depth {} min_samples_split {} min_samples_leaf {} fingerprint {}",
        p.max_depth, p.min_samples_split, p.min_samples_leaf, model.train_fingerprint
    )?;
    for (i, tree) in model.trees.iter().enumerate() {
        writeln!(out, "tree {i} nodes {}", tree.nodes.len())?;
        for (id, node) in tree.nodes.iter().enumerate() {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => writeln!(out, "node {id} feat {feature} thr {threshold} left {left} right {right}")?,
                TreeNode::Leaf { p_qe, p_wocc } => writeln!(out, "leaf {id} p_qe {p_qe} p_wocc {p_wocc}")?,
            }
        }
    }
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelEnsemble> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_model(&text).map_err(|e| match e {
        Error::Model(msg) => Error::Model(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-comment line as (line number, tokens).
    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Model(format!("line {line}: {msg}"))
}

/// Checks `tokens` against `keys` at even positions and returns the values
/// at odd positions.
fn keyed<'a>(line: usize, tokens: &[&'a str], keys: &[&str]) -> Result<Vec<&'a str>> {
    if tokens.len() != keys.len() * 2 {
        return Err(bad(line, format!("expected {} tokens", keys.len() * 2)));
    }
    let mut values = Vec::with_capacity(keys.len());
    for (pair, key) in tokens.chunks(2).zip(keys) {
        if pair[0] != *key {
            return Err(bad(line, format!("expected `{key}`, found `{}`", pair[0])));
        }
        values.push(pair[1]);
    }
    Ok(values)
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad(line, format!("invalid number `{s}`")))
}

pub fn read_model(text: &str) -> Result<ModelEnsemble> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (ln, header) = lines.next().ok_or_else(|| bad(1, "empty model file"))?;
    if header.len() != 5 || header[0] != MODEL_MAGIC {
        return Err(bad(ln, "not a model file"));
    }
    if header[1] != VERSION {
        return Err(bad(ln, format!("unsupported version `{}`", header[1])));
    }
    let metric: MetricKind = header[2].parse().map_err(|_| bad(ln, "unknown metric"))?;
    let learner: Learner = header[3].parse().map_err(|_| bad(ln, "unknown learner"))?;
    let n_trees: usize = num(ln, header[4])?;

    let (ln, params) = lines.next().ok_or_else(|| bad(ln, "missing params line"))?;
    if params.first() != Some(&"params") {
        return Err(bad(ln, "expected params line"));
    }
    let v = keyed(
        ln,
        &params[1..],
        &["max_depth", "min_samples_split", "min_samples_leaf", "fingerprint"],
    )?;
    let params = Hyperparams {
        learner,
        n_estimators: n_trees,
        max_depth: num(ln, v[0])?,
        min_samples_split: num(ln, v[1])?,
        min_samples_leaf: num(ln, v[2])?,
    };
    let fingerprint = v[3].to_owned();

    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let (ln, head) = lines.next().ok_or_else(|| bad(0, format!("missing tree {t}")))?;
        let v = keyed(ln, &head, &["tree", "nodes"])?;
        if num::<usize>(ln, v[0])? != t {
            return Err(bad(ln, format!("expected tree {t}")));
        }
        let count: usize = num(ln, v[1])?;
        if count == 0 {
            return Err(bad(ln, "tree has no nodes"));
        }
        let mut nodes = Vec::with_capacity(count);
        for id in 0..count {
            let (ln, tokens) = lines.next().ok_or_else(|| bad(0, format!("tree {t} truncated")))?;
            let node = match tokens.first() {
                Some(&"node") => {
                    let v = keyed(ln, &tokens, &["node", "feat", "thr", "left", "right"])?;
                    let feature: usize = num(ln, v[1])?;
                    if feature >= FEATURE_COUNT {
                        return Err(bad(ln, format!("feature index {feature} out of range")));
                    }
                    let threshold: f64 = num(ln, v[2])?;
                    if !threshold.is_finite() {
                        return Err(bad(ln, "non-finite threshold"));
                    }
                    let left: usize = num(ln, v[3])?;
                    let right: usize = num(ln, v[4])?;
                    if left <= id || right <= id || left >= count || right >= count {
                        return Err(bad(ln, "child ids must point forward within the tree"));
                    }
                    (num::<usize>(ln, v[0])?, TreeNode::Split { feature, threshold, left, right })
                }
                Some(&"leaf") => {
                    let v = keyed(ln, &tokens, &["leaf", "p_qe", "p_wocc"])?;
                    let p_qe: f64 = num(ln, v[1])?;
                    let p_wocc: f64 = num(ln, v[2])?;
                    if !(0.0..=1.0).contains(&p_qe) || !(0.0..=1.0).contains(&p_wocc) || (p_qe + p_wocc - 1.0).abs() > 1e-9 {
                        return Err(bad(ln, "leaf probabilities must sum to 1"));
                    }
                    (num::<usize>(ln, v[0])?, TreeNode::Leaf { p_qe, p_wocc })
                }
                _ => return Err(bad(ln, "expected `node` or `leaf`")),
            };
            if node.0 != id {
                return Err(bad(ln, format!("expected node id {id}")));
            }
            nodes.push(node.1);
        }
        trees.push(DecisionTree { nodes });
    }
    if let Some((ln, _)) = lines.next() {
        return Err(bad(ln, "trailing content after last tree"));
    }
    if trees.is_empty() {
        return Err(bad(0, "model has no trees"));
    }
    Ok(ModelEnsemble {
        metric,
        params,
        trees,
        train_fingerprint: fingerprint,
    })
}
