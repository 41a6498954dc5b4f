//! Tree-ensemble objective selector: training, prediction, cross-validation
//! and evaluation.

mod analysis;
mod model_io;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{FeatureVector, FEATURE_COUNT};
use crate::metrics::MetricKind;
use crate::objectives::ObjectiveKind;

pub use analysis::{information_gain, BinCount, FeatureGain, DEFAULT_BINS};
pub use model_io::{load_model, read_model, write_model, MODEL_MAGIC};
use tree::{DecisionTree, GrowParams, SplitRule, TrainSet};

/// Accepted values per hyperparameter, shared by both learners.
pub const GRID_N_ESTIMATORS: &[usize] = &[100, 200, 250, 300, 350, 400];
pub const GRID_MAX_DEPTH: &[usize] = &[3, 4, 5, 8, 10, 15, 20, 25, 30, 35, 40];
pub const GRID_MIN_SAMPLES_SPLIT: &[usize] = &[2, 3, 4, 5, 10];
pub const GRID_MIN_SAMPLES_LEAF: &[usize] = &[2, 3, 5, 10];

pub const CV_FOLDS: usize = 5;
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    ExtraTrees,
    RandomForest,
}

impl Learner {
    pub fn as_str(self) -> &'static str {
        match self {
            Learner::ExtraTrees => "extra_trees",
            Learner::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extra_trees" => Ok(Learner::ExtraTrees),
            "random_forest" => Ok(Learner::RandomForest),
            other => Err(Error::Config(format!("unknown learner `{other}`"))),
        }
    }
}

/// Field order defines the tie-break order in grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hyperparams {
    pub learner: Learner,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learner: Learner::ExtraTrees,
            n_estimators: 100,
            max_depth: 8,
            min_samples_split: 2,
            min_samples_leaf: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, usize, &[usize]); 4] = [
            ("n_estimators", self.n_estimators, GRID_N_ESTIMATORS),
            ("max_depth", self.max_depth, GRID_MAX_DEPTH),
            ("min_samples_split", self.min_samples_split, GRID_MIN_SAMPLES_SPLIT),
            ("min_samples_leaf", self.min_samples_leaf, GRID_MIN_SAMPLES_LEAF),
        ];
        for (name, value, allowed) in checks {
            if !allowed.contains(&value) {
                return Err(Error::Config(format!(
                    "{name} = {value} is not one of {allowed:?}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "learner={} n_estimators={} max_depth={} min_samples_split={} min_samples_leaf={}",
            self.learner, self.n_estimators, self.max_depth, self.min_samples_split, self.min_samples_leaf
        )
    }
}

/// Hyperparameter grid as read from a TOML file; every key is a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperparamGrid {
    #[serde(default = "default_learners")]
    pub learner: Vec<Learner>,
    #[serde(default = "default_n_estimators")]
    pub n_estimators: Vec<usize>,
    #[serde(default = "default_max_depth")]
    pub max_depth: Vec<usize>,
    #[serde(default = "default_min_samples_split")]
    pub min_samples_split: Vec<usize>,
    #[serde(default = "default_min_samples_leaf")]
    pub min_samples_leaf: Vec<usize>,
}

fn default_learners() -> Vec<Learner> {
    vec![Learner::ExtraTrees]
}
fn default_n_estimators() -> Vec<usize> {
    vec![Hyperparams::default().n_estimators]
}
fn default_max_depth() -> Vec<usize> {
    vec![Hyperparams::default().max_depth]
}
fn default_min_samples_split() -> Vec<usize> {
    vec![Hyperparams::default().min_samples_split]
}
fn default_min_samples_leaf() -> Vec<usize> {
    vec![Hyperparams::default().min_samples_leaf]
}

impl Default for HyperparamGrid {
    fn default() -> Self {
        HyperparamGrid {
            learner: default_learners(),
            n_estimators: default_n_estimators(),
            max_depth: default_max_depth(),
            min_samples_split: default_min_samples_split(),
            min_samples_leaf: default_min_samples_leaf(),
        }
    }
}

impl HyperparamGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("grid file: {e}")))
    }

    /// Cartesian product, sorted and validated.
    pub fn points(&self) -> Result<Vec<Hyperparams>> {
        let mut out = Vec::new();
        for &learner in &self.learner {
            for &n_estimators in &self.n_estimators {
                for &max_depth in &self.max_depth {
                    for &min_samples_split in &self.min_samples_split {
                        for &min_samples_leaf in &self.min_samples_leaf {
                            let p = Hyperparams {
                                learner,
                                n_estimators,
                                max_depth,
                                min_samples_split,
                                min_samples_leaf,
                            };
                            p.validate()?;
                            out.push(p);
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        Ok(out)
    }
}

/// One labeled network as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: [f64; FEATURE_COUNT],
    pub label: ObjectiveKind,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrainOptions {
    /// Use network weights as sample weights in the impurity.
    pub weighted: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions { weighted: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEnsemble {
    pub metric: MetricKind,
    pub params: Hyperparams,
    pub trees: Vec<DecisionTree>,
    pub train_fingerprint: String,
}

impl ModelEnsemble {
    /// Mean leaf probability of WOCC across trees.
    pub fn p_wocc(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.p_wocc(x)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, features: &FeatureVector) -> (ObjectiveKind, f64) {
        self.predict_array(&features.to_array())
    }

    pub fn predict_array(&self, x: &[f64; FEATURE_COUNT]) -> (ObjectiveKind, f64) {
        let p = self.p_wocc(x);
        let kind = if p > DECISION_THRESHOLD {
            ObjectiveKind::Wocc
        } else {
            ObjectiveKind::ExtendedModularity
        };
        (kind, p)
    }
}

/// Hex digest identifying a training set.
pub fn fingerprint(rows: &[Sample]) -> String {
    let mut h = Sha256::new();
    for r in rows {
        for f in r.features {
            h.update(f.to_bits().to_le_bytes());
        }
        h.update(r.label.as_str().as_bytes());
        h.update(r.weight.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn class_counts(rows: &[Sample]) -> (usize, usize) {
    let wocc = rows.iter().filter(|r| r.label == ObjectiveKind::Wocc).count();
    (rows.len() - wocc, wocc)
}

/// Row indices after duplicating the minority class up to the majority
/// count. Each minority row appears `floor(b/a)` times; the remaining
/// `b mod a` copies go to distinct rows drawn with `rng`.
pub fn oversample<R: Rng>(rows: &[Sample], rng: &mut R) -> Vec<usize> {
    let (qe, wocc): (Vec<usize>, Vec<usize>) =
        (0..rows.len()).partition(|&i| rows[i].label == ObjectiveKind::ExtendedModularity);
    let (minority, majority) = if qe.len() < wocc.len() { (qe, wocc) } else { (wocc, qe) };
    let mut out: Vec<usize> = (0..rows.len()).collect();
    if minority.is_empty() || minority.len() == majority.len() {
        return out;
    }
    let deficit = majority.len() - minority.len();
    let full = deficit / minority.len();
    for _ in 0..full {
        out.extend_from_slice(&minority);
    }
    let mut rest = minority.clone();
    rest.shuffle(rng);
    out.extend_from_slice(&rest[..deficit % minority.len()]);
    out
}

/// Fits an ensemble for one metric.
pub fn train(
    rows: &[Sample],
    metric: MetricKind,
    params: &Hyperparams,
    seed: u64,
    options: TrainOptions,
) -> Result<ModelEnsemble> {
    params.validate()?;
    fit(rows, metric, params, seed, options)
}

fn fit(
    rows: &[Sample],
    metric: MetricKind,
    params: &Hyperparams,
    seed: u64,
    options: TrainOptions,
) -> Result<ModelEnsemble> {
    if rows.is_empty() {
        return Err(Error::Training("no training rows".into()));
    }
    let (qe, wocc) = class_counts(rows);
    if qe == 0 || wocc == 0 {
        return Err(Error::Training("training rows contain a single class".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let index = oversample(rows, &mut rng);
    let x: Vec<[f64; FEATURE_COUNT]> = index.iter().map(|&i| rows[i].features).collect();
    let y: Vec<bool> = index.iter().map(|&i| rows[i].label == ObjectiveKind::Wocc).collect();
    let mut w: Vec<f64> = if options.weighted {
        index.iter().map(|&i| rows[i].weight).collect()
    } else {
        vec![1.0; index.len()]
    };
    if w.iter().all(|&v| v == 0.0) {
        log::warn!("all sample weights are zero; training with uniform weights");
        w.iter_mut().for_each(|v| *v = 1.0);
    }
    let data = TrainSet { x: &x, y: &y, w: &w };
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        rule: match params.learner {
            Learner::ExtraTrees => SplitRule::Random,
            Learner::RandomForest => SplitRule::Best,
        },
    };
    let n = x.len();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let samples = match params.learner {
                Learner::ExtraTrees => (0..n).collect(),
                Learner::RandomForest => (0..n).map(|_| rng.gen_range(0..n)).collect(),
            };
            tree::grow(&data, samples, &grow_params, &mut rng)
        })
        .collect();

    Ok(ModelEnsemble {
        metric,
        params: *params,
        trees,
        train_fingerprint: fingerprint(rows),
    })
}

/// Per-class recall and balanced accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub balanced_accuracy: f64,
    pub recall_qe: Option<f64>,
    pub recall_wocc: Option<f64>,
    pub weighted: bool,
    pub fold_scores: Option<Vec<f64>>,
}

impl EvalReport {
    pub fn fold_std(&self) -> Option<f64> {
        self.fold_scores.as_deref().map(std_dev)
    }
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Two-class confusion matrix with WOCC as the positive class. Entries are
/// reals so weighted tallies fit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Confusion {
    pub true_wocc: f64,
    pub false_qe: f64,
    pub true_qe: f64,
    pub false_wocc: f64,
}

impl Confusion {
    pub fn record(&mut self, truth: ObjectiveKind, predicted: ObjectiveKind, weight: f64) {
        match (truth, predicted) {
            (ObjectiveKind::Wocc, ObjectiveKind::Wocc) => self.true_wocc += weight,
            (ObjectiveKind::Wocc, ObjectiveKind::ExtendedModularity) => self.false_qe += weight,
            (ObjectiveKind::ExtendedModularity, ObjectiveKind::ExtendedModularity) => self.true_qe += weight,
            (ObjectiveKind::ExtendedModularity, ObjectiveKind::Wocc) => self.false_wocc += weight,
        }
    }

    /// True positive rate; `None` when no WOCC mass is present.
    pub fn recall_wocc(&self) -> Option<f64> {
        let total = self.true_wocc + self.false_qe;
        (total > 0.0).then(|| self.true_wocc / total)
    }

    /// True negative rate; `None` when no QE mass is present.
    pub fn recall_qe(&self) -> Option<f64> {
        let total = self.true_qe + self.false_wocc;
        (total > 0.0).then(|| self.true_qe / total)
    }

    /// Mean of the recalls of the classes present; 0 when neither is.
    pub fn balanced_accuracy(&self) -> f64 {
        let present: Vec<f64> = [self.recall_qe(), self.recall_wocc()].into_iter().flatten().collect();
        if present.is_empty() {
            0.0
        } else {
            present.iter().sum::<f64>() / present.len() as f64
        }
    }
}

pub fn evaluate(model: &ModelEnsemble, rows: &[Sample], weighted: bool) -> EvalReport {
    let mut m = Confusion::default();
    for r in rows {
        let (predicted, _) = model.predict_array(&r.features);
        m.record(r.label, predicted, if weighted { r.weight } else { 1.0 });
    }
    EvalReport {
        balanced_accuracy: m.balanced_accuracy(),
        recall_qe: m.recall_qe(),
        recall_wocc: m.recall_wocc(),
        weighted,
        fold_scores: None,
    }
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin.
pub fn stratified_folds(rows: &[Sample], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; rows.len()];
    for class in [ObjectiveKind::ExtendedModularity, ObjectiveKind::Wocc] {
        let mut members: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].label == class).collect();
        members.shuffle(&mut rng);
        for (k, i) in members.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

#[derive(Debug, Clone)]
pub struct GridScore {
    pub params: Hyperparams,
    pub mean_ba: f64,
    pub folds: Vec<EvalReport>,
}

impl GridScore {
    pub fn fold_scores(&self) -> Vec<f64> {
        self.folds.iter().map(|r| r.balanced_accuracy).collect()
    }

    pub fn std_dev(&self) -> f64 {
        std_dev(&self.fold_scores())
    }
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub best: GridScore,
    pub all: Vec<GridScore>,
}

/// Stratified 5-fold search over `grid`, scored by mean unweighted
/// balanced accuracy on the held-out folds.
pub fn cross_validate(
    rows: &[Sample],
    metric: MetricKind,
    grid: &[Hyperparams],
    seed: u64,
    options: TrainOptions,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::Config("hyperparameter grid is empty".into()));
    }
    for p in grid {
        p.validate()?;
    }
    let (qe, wocc) = class_counts(rows);
    if rows.len() < 2 * CV_FOLDS || qe < 2 || wocc < 2 {
        return Err(Error::Training(format!(
            "cross-validation needs at least {} rows and two of each class (got {} QE, {} WOCC)",
            2 * CV_FOLDS,
            qe,
            wocc
        )));
    }
    let assignment = stratified_folds(rows, CV_FOLDS, seed);
    let splits: Vec<(Vec<Sample>, Vec<Sample>)> = (0..CV_FOLDS)
        .map(|f| {
            let (test, train): (Vec<_>, Vec<_>) = rows
                .iter()
                .zip(&assignment)
                .partition(|(_, &a)| a == f);
            (
                train.into_iter().map(|(r, _)| r.clone()).collect(),
                test.into_iter().map(|(r, _)| r.clone()).collect(),
            )
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..CV_FOLDS).map(move |f| (g, f)))
        .collect();
    let reports: Vec<EvalReport> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (train_rows, test_rows) = &splits[f];
            let fold_seed = seed.wrapping_add(1 + f as u64);
            let model = fit(train_rows, metric, &grid[g], fold_seed, options)?;
            Ok(evaluate(&model, test_rows, false))
        })
        .collect::<Result<_>>()?;

    let mut all: Vec<GridScore> = grid
        .iter()
        .enumerate()
        .map(|(g, p)| {
            let folds = reports[g * CV_FOLDS..(g + 1) * CV_FOLDS].to_vec();
            let mean_ba = folds.iter().map(|r| r.balanced_accuracy).sum::<f64>() / CV_FOLDS as f64;
            GridScore {
                params: *p,
                mean_ba,
                folds,
            }
        })
        .collect();
    all.sort_by(|a, b| a.params.cmp(&b.params));
    let best = all
        .iter()
        .fold(None::<&GridScore>, |best, s| match best {
            Some(b) if b.mean_ba >= s.mean_ba => Some(b),
            _ => Some(s),
        })
        .expect("grid is non-empty")
        .clone();
    Ok(CvOutcome { best, all })
}
