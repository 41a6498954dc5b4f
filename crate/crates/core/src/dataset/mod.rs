//! Labeled-network datasets: run both objectives over a β grid, score them
//! against ground truth, and record which objective wins per metric.

mod generator;

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Deserialize;

use crate::classifier::Sample;
use crate::cover::{read_community_labels, Cover};
use crate::engine::{run_with_objective, EngineConfig};
use crate::error::{Error, Result};
use crate::graph::{extract_features, load_edge_list, FeatureVector, Graph};
use crate::metrics::{score, MetricKind, ScoreReport};
use crate::objectives::ObjectiveKind;

pub use generator::{generate_test_network, toy_corpus, write_corpus, PlantedSpec};

pub const DEFAULT_BETAS: [f64; 10] = [1.01, 1.05, 1.09, 1.1, 1.2, 1.3, 1.4, 1.6, 1.8, 2.0];

/// Networks with more nodes than this go to the test split.
pub const DEFAULT_SPLIT_THRESHOLD: usize = 50_000;

pub const DATASET_COLUMNS: [&str; 19] = [
    "id",
    "gcc",
    "acc",
    "ratio_nodes_in_triangle",
    "avg_degree",
    "avg_triangles_rate",
    "metric",
    "label",
    "weight",
    "split",
    "n",
    "k",
    "maxK",
    "On",
    "Om",
    "mut",
    "best_wocc",
    "best_qe",
    "error",
];

const LFR_COLUMNS: [&str; 6] = ["n", "k", "maxK", "On", "Om", "mut"];

#[derive(Debug, Clone, PartialEq)]
pub struct BetaGrid {
    values: Vec<f64>,
}

impl Default for BetaGrid {
    fn default() -> Self {
        BetaGrid {
            values: DEFAULT_BETAS.to_vec(),
        }
    }
}

impl BetaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("beta grid is empty".into()));
        }
        if let Some(b) = values.iter().find(|b| !(**b >= 1.0) || !b.is_finite()) {
            return Err(Error::Config(format!("beta values must be >= 1, got {b}")));
        }
        Ok(BetaGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl fmt::Display for BetaGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for BetaGrid {
    type Err = Error;

    /// Comma-separated list, e.g. `1.01,1.1,2`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid beta `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        BetaGrid::new(values)
    }
}

/// Generator parameters of a synthetic network, when known.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfrTags {
    pub n: Option<f64>,
    pub k: Option<f64>,
    pub max_k: Option<f64>,
    pub on: Option<f64>,
    pub om: Option<f64>,
    pub mu: Option<f64>,
}

impl LfrTags {
    fn as_array(&self) -> [Option<f64>; 6] {
        [self.n, self.k, self.max_k, self.on, self.om, self.mu]
    }

    fn from_array(a: [Option<f64>; 6]) -> Self {
        LfrTags {
            n: a[0],
            k: a[1],
            max_k: a[2],
            on: a[3],
            om: a[4],
            mu: a[5],
        }
    }

    /// `(k, On, Om, mut)` rendered as text, or `None` if any tag is missing.
    pub fn config_key(&self) -> Option<[String; 4]> {
        Some([
            fmt_tag(self.k?),
            fmt_tag(self.on?),
            fmt_tag(self.om?),
            fmt_tag(self.mu?),
        ])
    }

    /// Whether every present tag lies on the published LFR parameter grid.
    /// Anything else is a custom configuration.
    pub fn on_reference_grid(&self) -> bool {
        fn within(v: Option<f64>, allowed: &[f64]) -> bool {
            v.map_or(true, |v| allowed.contains(&v))
        }
        within(self.k, &[10.0, 20.0, 40.0, 60.0, 80.0])
            && within(self.max_k, &[50.0, 100.0, 120.0])
            && within(self.on, &[0.1, 0.25, 0.5, 0.75])
            && within(self.om, &[2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0])
            && within(self.mu, &[0.1, 0.2, 0.3, 0.4, 0.5])
    }
}

fn fmt_tag(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_tag).unwrap_or_default()
}

/// Score with the fixed precision used in every output table.
pub fn fmt_score(v: f64) -> String {
    format!("{v:.6}")
}

fn stored_score(v: f64) -> f64 {
    fmt_score(v).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRecord {
    pub id: String,
    pub graph_path: PathBuf,
    pub truth_path: PathBuf,
    pub lfr: LfrTags,
}

/// Reads a tab-separated manifest with columns `id`, `graph_path`,
/// `truth_path` and optionally `n`, `k`, `maxK`, `On`, `Om`, `mut`.
/// Relative paths resolve against the manifest's directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<NetworkRecord>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new(""));
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| {
        column(name).ok_or_else(|| Error::parse(path, 1, format!("manifest lacks a `{name}` column")))
    };
    let (id_col, graph_col, truth_col) = (required("id")?, required("graph_path")?, required("truth_path")?);
    let tag_cols: Vec<Option<usize>> = LFR_COLUMNS.iter().map(|c| column(c)).collect();

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for result in reader.records() {
        let row = result?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("").trim();
        let id = field(id_col).to_owned();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(path, line, format!("duplicate id `{id}`")));
        }
        let mut tags = [None; 6];
        for (slot, col) in tags.iter_mut().zip(&tag_cols) {
            if let Some(c) = col {
                let text = field(*c);
                if !text.is_empty() {
                    *slot = Some(
                        text.parse::<f64>()
                            .map_err(|_| Error::parse(path, line, format!("invalid tag value `{text}`")))?,
                    );
                }
            }
        }
        records.push(NetworkRecord {
            id,
            graph_path: base.join(field(graph_col)),
            truth_path: base.join(field(truth_col)),
            lfr: LfrTags::from_array(tags),
        });
    }
    Ok(records)
}

/// Winner and network weight for one metric. Ties go to Q^E; the weight is
/// `|wocc - qe| / max(wocc, qe)`, or 0 when both are 0. Negative scores
/// (Omega below chance) count as 0 so the weight stays in `[0, 1]`.
pub fn label_and_weight(best_wocc: f64, best_qe: f64) -> (ObjectiveKind, f64) {
    let (best_wocc, best_qe) = (best_wocc.max(0.0), best_qe.max(0.0));
    let label = if best_wocc > best_qe {
        ObjectiveKind::Wocc
    } else {
        ObjectiveKind::ExtendedModularity
    };
    let top = best_wocc.max(best_qe);
    let weight = if top > 0.0 { (best_wocc - best_qe).abs() / top } else { 0.0 };
    (label, weight)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricOutcome {
    pub metric: MetricKind,
    pub best_wocc: f64,
    pub best_qe: f64,
    pub label: ObjectiveKind,
    pub weight: f64,
}

impl MetricOutcome {
    /// Builds an outcome from the stored (6-decimal) scores so that label
    /// and weight are reproducible from the written file.
    fn from_scores(metric: MetricKind, wocc: f64, qe: f64) -> Self {
        let (best_wocc, best_qe) = (stored_score(wocc), stored_score(qe));
        let (label, weight) = label_and_weight(best_wocc, best_qe);
        MetricOutcome {
            metric,
            best_wocc,
            best_qe,
            label,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledNetwork {
    pub record: NetworkRecord,
    pub node_count: usize,
    pub features: FeatureVector,
    pub per_metric: Vec<MetricOutcome>,
}

#[derive(Debug, Clone)]
pub struct LabelConfig {
    pub betas: BetaGrid,
    /// Objective mode is ignored; both objectives are forced in turn.
    pub engine: EngineConfig,
    /// Score only the truth communities that best match a detected one.
    pub use_best_match: bool,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            betas: BetaGrid::default(),
            engine: EngineConfig::default(),
            use_best_match: false,
        }
    }
}

/// Loads a graph and its truth cover. Truth nodes that never appear in an
/// edge become isolated nodes.
pub fn load_network(graph_path: &Path, truth_path: &Path) -> Result<(Graph, Cover)> {
    let graph = load_edge_list(graph_path)?;
    let lists = read_community_labels(truth_path)?;
    let graph = graph.with_extra_nodes(lists.iter().flat_map(|(_, l)| l.iter().map(String::as_str)));
    let communities = lists
        .iter()
        .map(|(_, labels)| labels.iter().map(|l| graph.index_of(l).expect("label added above")).collect::<Vec<_>>());
    let truth = Cover::from_communities(graph.node_count(), communities)?;
    Ok((graph, truth))
}

/// Per-metric outcomes for an in-memory network.
pub fn label_graph(g: &Graph, truth: &Cover, config: &LabelConfig) -> Result<Vec<MetricOutcome>> {
    config.engine.validate()?;
    let runs: Vec<(f64, ObjectiveKind)> = config
        .betas
        .values()
        .iter()
        .flat_map(|&b| [(b, ObjectiveKind::ExtendedModularity), (b, ObjectiveKind::Wocc)])
        .collect();
    let scores: Vec<(ObjectiveKind, ScoreReport)> = runs
        .par_iter()
        .map(|&(beta, kind)| {
            let engine = EngineConfig {
                beta,
                ..config.engine.clone()
            };
            let result = run_with_objective(g, &engine, kind);
            let report = score(&result.cover, truth, g.node_count(), config.use_best_match)?;
            Ok((kind, report))
        })
        .collect::<Result<_>>()?;

    Ok(MetricKind::ALL
        .iter()
        .map(|&metric| {
            let best = |kind: ObjectiveKind| {
                scores
                    .iter()
                    .filter(|(k, _)| *k == kind)
                    .map(|(_, r)| r.get(metric))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            MetricOutcome::from_scores(metric, best(ObjectiveKind::Wocc), best(ObjectiveKind::ExtendedModularity))
        })
        .collect())
}

pub fn label_network(record: &NetworkRecord, config: &LabelConfig) -> Result<LabeledNetwork> {
    let (graph, truth) = load_network(&record.graph_path, &record.truth_path)?;
    let per_metric = label_graph(&graph, &truth, config)?;
    Ok(LabeledNetwork {
        record: record.clone(),
        node_count: graph.node_count(),
        features: extract_features(&graph),
        per_metric,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn for_size(node_count: usize, threshold: usize) -> Split {
        if node_count > threshold {
            Split::Test
        } else {
            Split::Train
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// One (network, metric) row of a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub id: String,
    pub features: FeatureVector,
    pub metric: MetricKind,
    pub label: ObjectiveKind,
    pub weight: f64,
    pub split: Split,
    pub lfr: LfrTags,
    pub best_wocc: f64,
    pub best_qe: f64,
}

impl DatasetRow {
    pub fn sample(&self) -> Sample {
        Sample {
            features: self.features.to_array(),
            label: self.label,
            weight: self.weight,
        }
    }

    fn record(&self) -> Vec<String> {
        let f = self.features.to_array();
        let mut out = vec![self.id.clone()];
        out.extend(f.iter().map(|v| format!("{v}")));
        out.push(self.metric.as_str().into());
        out.push(self.label.as_str().into());
        out.push(format!("{}", self.weight));
        out.push(self.split.as_str().into());
        out.extend(self.lfr.as_array().into_iter().map(fmt_opt));
        out.push(fmt_score(self.best_wocc));
        out.push(fmt_score(self.best_qe));
        out.push(String::new());
        out
    }
}

impl LabeledNetwork {
    pub fn rows(&self, split_threshold: usize) -> Vec<DatasetRow> {
        let split = Split::for_size(self.node_count, split_threshold);
        self.per_metric
            .iter()
            .map(|m| DatasetRow {
                id: self.record.id.clone(),
                features: self.features,
                metric: m.metric,
                label: m.label,
                weight: m.weight,
                split,
                lfr: self.record.lfr,
                best_wocc: m.best_wocc,
                best_qe: m.best_qe,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildSummary {
    pub networks: usize,
    pub rows: usize,
    pub failures: usize,
}

/// Labels every record in parallel and writes the dataset in manifest order.
/// A record that fails produces one error row per metric; the rest continue.
pub fn build_dataset<W: Write>(
    records: &[NetworkRecord],
    config: &LabelConfig,
    split_threshold: usize,
    out: W,
    comments: &[String],
) -> Result<BuildSummary> {
    let labeled: Vec<Result<LabeledNetwork>> = records.par_iter().map(|r| label_network(r, config)).collect();
    let mut writer = DatasetWriter::new(out, comments)?;
    let mut summary = BuildSummary {
        networks: records.len(),
        ..Default::default()
    };
    for (record, outcome) in records.iter().zip(labeled) {
        match outcome {
            Ok(net) => {
                for row in net.rows(split_threshold) {
                    writer.write(&row)?;
                    summary.rows += 1;
                }
            }
            Err(e) => {
                log::warn!("network {}: {e}", record.id);
                summary.failures += 1;
                for metric in MetricKind::ALL {
                    writer.write_failure(record, metric, &e.to_string())?;
                    summary.rows += 1;
                }
            }
        }
    }
    writer.finish()?;
    Ok(summary)
}

/// Streams dataset rows as tab-separated text after `#` comment lines.
pub struct DatasetWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> DatasetWriter<W> {
    pub fn new(mut out: W, comments: &[String]) -> Result<Self> {
        for line in comments {
            writeln!(out, "# {line}").map_err(|e| Error::io("<dataset>", e))?;
        }
        let mut inner = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        inner.write_record(DATASET_COLUMNS)?;
        Ok(DatasetWriter { inner })
    }

    pub fn write(&mut self, row: &DatasetRow) -> Result<()> {
        self.inner.write_record(row.record())?;
        Ok(())
    }

    fn write_failure(&mut self, record: &NetworkRecord, metric: MetricKind, message: &str) -> Result<()> {
        let mut fields = vec![String::new(); DATASET_COLUMNS.len()];
        fields[0] = record.id.clone();
        fields[6] = metric.as_str().into();
        for (i, v) in record.lfr.as_array().into_iter().enumerate() {
            fields[10 + i] = fmt_opt(v);
        }
        fields[DATASET_COLUMNS.len() - 1] = message.replace(['\t', '\n'], " ");
        self.inner.write_record(&fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io("<dataset>", e))
    }
}

#[derive(Debug, Deserialize)]
struct RawRow {
    id: String,
    gcc: String,
    acc: String,
    ratio_nodes_in_triangle: String,
    avg_degree: String,
    avg_triangles_rate: String,
    metric: String,
    label: String,
    weight: String,
    split: String,
    n: String,
    k: String,
    #[serde(rename = "maxK")]
    max_k: String,
    #[serde(rename = "On")]
    on: String,
    #[serde(rename = "Om")]
    om: String,
    #[serde(rename = "mut")]
    mu: String,
    best_wocc: String,
    best_qe: String,
    error: String,
}

/// Reads a dataset file, skipping rows that carry an error.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    for result in reader.deserialize::<RawRow>() {
        let raw = result?;
        if !raw.error.is_empty() {
            log::warn!("skipping failed network {} ({})", raw.id, raw.error);
            continue;
        }
        rows.push(parse_row(raw).map_err(|msg| Error::Config(format!("{}: {msg}", path.display())))?);
    }
    Ok(rows)
}

fn parse_row(raw: RawRow) -> std::result::Result<DatasetRow, String> {
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("row {}: invalid number `{s}`", raw.id));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let features = FeatureVector::from_array([
        num(&raw.gcc)?,
        num(&raw.acc)?,
        num(&raw.ratio_nodes_in_triangle)?,
        num(&raw.avg_degree)?,
        num(&raw.avg_triangles_rate)?,
    ]);
    let err = |e: Error| format!("row {}: {e}", raw.id);
    Ok(DatasetRow {
        features,
        metric: raw.metric.parse().map_err(err)?,
        label: raw.label.parse().map_err(err)?,
        weight: num(&raw.weight)?,
        split: raw.split.parse().map_err(err)?,
        lfr: LfrTags::from_array([
            opt(&raw.n)?,
            opt(&raw.k)?,
            opt(&raw.max_k)?,
            opt(&raw.on)?,
            opt(&raw.om)?,
            opt(&raw.mu)?,
        ]),
        best_wocc: num(&raw.best_wocc)?,
        best_qe: num(&raw.best_qe)?,
        id: raw.id,
    })
}

/// Rows for `metric`, optionally restricted to one split.
pub fn select_rows(rows: &[DatasetRow], metric: MetricKind, split: Option<Split>) -> Vec<DatasetRow> {
    rows.iter()
        .filter(|r| r.metric == metric && split.map_or(true, |s| r.split == s))
        .cloned()
        .collect()
}

/// Keeps only nodes that belong to at least one of the first `top`
/// communities (all when `None`) and the edges among them.
pub fn prune_to_truth(g: &Graph, truth: &[(usize, Vec<String>)], top: Option<usize>) -> Graph {
    let mut keep = vec![false; g.node_count()];
    for (_, labels) in truth.iter().take(top.unwrap_or(usize::MAX)) {
        for l in labels {
            if let Some(v) = g.index_of(l) {
                keep[v] = true;
            }
        }
    }
    g.induced(&keep)
}
