//! Threshold-rule vs classifier comparison and reproducible output headers.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::classifier::ModelEnsemble;
use crate::dataset::{fmt_score, DatasetRow};
use crate::error::{Error, Result};
use crate::objectives::ObjectiveKind;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// What produced an output file. Rendered as `#` comment lines at the top
/// of every file so a run can be repeated from its own output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    /// Flag/value pairs in the order given; flags without a value use "".
    pub flags: Vec<(String, String)>,
    pub seed: Option<u64>,
    /// Input files, fingerprinted by content.
    pub inputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            ..Default::default()
        }
    }

    pub fn flag(mut self, name: &str, value: impl fmt::Display) -> Self {
        self.flags.push((name.to_owned(), value.to_string()));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, path: impl AsRef<Path>) -> Self {
        self.inputs.push(path.as_ref().display().to_string());
        self
    }

    pub fn lines(&self) -> Result<Vec<String>> {
        let mut out = vec![format!("nectar {TOOL_VERSION} {}", self.subcommand)];
        for (name, value) in &self.flags {
            if value.is_empty() {
                out.push(format!("--{name}"));
            } else {
                out.push(format!("--{name} {value}"));
            }
        }
        if let Some(seed) = self.seed {
            out.push(format!("seed {seed}"));
        }
        for path in &self.inputs {
            out.push(format!("input {path} sha256 {}", file_digest(path)?));
        }
        Ok(out)
    }
}

/// First 16 hex digits of the SHA-256 of a file's contents.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
}

/// Cell key: an LFR `(k, On, Om, mut)` tuple, or the catch-all for rows
/// without complete tags.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellKey {
    Config([String; 4]),
    Untagged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCell {
    pub key: CellKey,
    /// Mean signed weight over the cell's networks, in `[-1, 1]`.
    pub value: f64,
    pub network_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkComparison {
    pub id: String,
    pub key: CellKey,
    pub truth: ObjectiveKind,
    pub threshold_pick: ObjectiveKind,
    pub model_pick: ObjectiveKind,
    pub p_wocc: f64,
    pub weight: f64,
    pub signed_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub cells: Vec<ComparisonCell>,
    pub networks: Vec<NetworkComparison>,
}

/// `+weight` when only the classifier picks the true label, `-weight` when
/// only the threshold rule does, 0 otherwise.
pub fn signed_weight(truth: ObjectiveKind, threshold_pick: ObjectiveKind, model_pick: ObjectiveKind, weight: f64) -> f64 {
    match (model_pick == truth, threshold_pick == truth) {
        (true, false) => weight,
        (false, true) => -weight,
        _ => 0.0,
    }
}

/// Groups per-network signed weights into cells: sum divided by count.
pub fn aggregate_cells(networks: &[NetworkComparison]) -> Vec<ComparisonCell> {
    let mut sums: BTreeMap<&CellKey, (f64, usize)> = BTreeMap::new();
    for n in networks {
        let e = sums.entry(&n.key).or_insert((0.0, 0));
        e.0 += n.signed_weight;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(key, (sum, count))| ComparisonCell {
            key: key.clone(),
            value: sum / count as f64,
            network_count: count,
        })
        .collect()
}

/// Compares the triangle-rate rule against `model` on the rows of the
/// model's metric.
pub fn compare_selectors(rows: &[DatasetRow], model: &ModelEnsemble, tr_rate: f64) -> Result<Comparison> {
    let networks: Vec<NetworkComparison> = rows
        .iter()
        .filter(|r| r.metric == model.metric)
        .map(|r| {
            let threshold_pick = if r.features.average_triangles_rate >= tr_rate {
                ObjectiveKind::Wocc
            } else {
                ObjectiveKind::ExtendedModularity
            };
            let (model_pick, p_wocc) = model.predict(&r.features);
            NetworkComparison {
                id: r.id.clone(),
                key: r.lfr.config_key().map_or(CellKey::Untagged, CellKey::Config),
                truth: r.label,
                threshold_pick,
                model_pick,
                p_wocc,
                weight: r.weight,
                signed_weight: signed_weight(r.label, threshold_pick, model_pick, r.weight),
            }
        })
        .collect();
    if networks.is_empty() {
        return Err(Error::Config(format!(
            "dataset has no rows for metric {}",
            model.metric.as_str()
        )));
    }
    Ok(Comparison {
        cells: aggregate_cells(&networks),
        networks,
    })
}

fn write_comments<W: Write>(out: &mut W, comments: &[String]) -> std::io::Result<()> {
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn key_fields(key: &CellKey) -> [&str; 4] {
    match key {
        CellKey::Config([k, on, om, mu]) => [k, on, om, mu],
        CellKey::Untagged => ["*", "*", "*", "*"],
    }
}

pub fn write_cells<W: Write>(out: &mut W, cells: &[ComparisonCell], comments: &[String]) -> std::io::Result<()> {
    write_comments(out, comments)?;
    writeln!(out, "k\tOn\tOm\tmut\tvalue\tnetworks")?;
    for c in cells {
        let [k, on, om, mu] = key_fields(&c.key);
        writeln!(out, "{k}\t{on}\t{om}\t{mu}\t{}\t{}", fmt_score(c.value), c.network_count)?;
    }
    Ok(())
}

pub fn write_networks<W: Write>(out: &mut W, networks: &[NetworkComparison], comments: &[String]) -> std::io::Result<()> {
    write_comments(out, comments)?;
    writeln!(out, "id\tk\tOn\tOm\tmut\tlabel\tthreshold_pick\tmodel_pick\tp_wocc\tweight\tsigned_weight")?;
    for n in networks {
        let [k, on, om, mu] = key_fields(&n.key);
        writeln!(
            out,
            "{}\t{k}\t{on}\t{om}\t{mu}\t{}\t{}\t{}\t{}\t{}\t{}",
            n.id,
            n.truth,
            n.threshold_pick,
            n.model_pick,
            fmt_score(n.p_wocc),
            fmt_score(n.weight),
            fmt_score(n.signed_weight)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ObjectiveKind::{ExtendedModularity as Qe, Wocc};

    fn net(signed: f64, key: CellKey) -> NetworkComparison {
        NetworkComparison {
            id: String::new(),
            key,
            truth: Qe,
            threshold_pick: Qe,
            model_pick: Qe,
            p_wocc: 0.0,
            weight: signed.abs(),
            signed_weight: signed,
        }
    }

    #[test]
    fn signed_weight_rule() {
        assert_eq!(signed_weight(Wocc, Qe, Wocc, 0.2), 0.2);
        assert_eq!(signed_weight(Wocc, Wocc, Qe, 0.2), -0.2);
        assert_eq!(signed_weight(Wocc, Wocc, Wocc, 0.2), 0.0);
        assert_eq!(signed_weight(Wocc, Qe, Qe, 0.2), 0.0);
    }

    #[test]
    fn cells_average_over_networks() {
        let key = CellKey::Config(["20", "0.1", "2", "0.3"].map(String::from));
        let cells = aggregate_cells(&[net(0.3, key.clone()), net(-0.1, key.clone()), net(0.0, key), net(0.5, CellKey::Untagged)]);
        assert_eq!(cells.len(), 2);
        assert_eq!(fmt_score(cells[0].value), "0.066667");
        assert_eq!(cells[0].network_count, 3);
        assert_eq!(cells[1].key, CellKey::Untagged);
    }

    #[test]
    fn manifest_lines_are_stable() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("g.txt");
        std::fs::write(&input, "1 2\n").unwrap();
        let m = RunManifest::new("detect").flag("beta", 1.1).flag("weighted", "").seed(4).input(&input);
        let lines = m.lines().unwrap();
        assert_eq!(lines[1], "--beta 1.1");
        assert_eq!(lines[2], "--weighted");
        assert_eq!(lines[3], "seed 4");
        assert!(lines[4].ends_with(&file_digest(&input).unwrap()));
        assert_eq!(lines, m.lines().unwrap());
    }
}
