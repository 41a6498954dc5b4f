use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use nectar_core::classifier::{self, CvOutcome, HyperparamGrid, Sample, TrainOptions};
use nectar_core::cover::{read_community_labels, read_cover, write_cover};
use nectar_core::dataset::{self, BetaGrid, LabelConfig, Split};
use nectar_core::engine::{self, EngineConfig, InitStrategy, ObjectiveMode};
use nectar_core::graph::write_edge_list;
use nectar_core::metrics::{self, MetricKind};
use nectar_core::report::{self, RunManifest};
use nectar_core::{extract_features, load_edge_list, Graph};

#[derive(Parser)]
#[command(name = "nectar", version, about = "Overlapping community detection with learned objective selection")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect overlapping communities in an edge list.
    Detect(DetectArgs),
    /// Score a detected cover against ground truth.
    Evaluate(EvaluateArgs),
    /// Drop nodes that belong to none of the listed communities.
    Prune(PruneArgs),
    /// Label networks by running both objectives over a beta grid.
    Label(LabelArgs),
    /// Cross-validate a hyperparameter grid and train the selector.
    Train(TrainArgs),
    /// Predict the objective for one graph.
    Predict(PredictArgs),
    /// Balanced accuracy of a model on a dataset.
    Eval(EvalArgs),
    /// Per-feature information gain against the labels.
    FeatureIg(FeatureIgArgs),
    /// Compare the triangle-rate rule with a trained model.
    Compare(CompareArgs),
    /// Write a synthetic corpus with ground truth and a manifest.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Qe,
    Wocc,
    Threshold,
    Model,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Test => "test",
            SplitArg::All => "all",
        }
    }
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = engine::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = engine::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// auto, singletons, neighborhoods or merged-neighborhoods.
    #[arg(long, default_value = "auto")]
    init: InitStrategy,
}

#[derive(Args)]
struct DetectArgs {
    /// Whitespace-separated edge list.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = 1.1)]
    beta: f64,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_enum, default_value = "threshold")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = engine::DEFAULT_TR_RATE)]
    tr_rate: f64,
    /// Trained model, required with `--objective model`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Cover file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    detected: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Score only the truth communities that best match a detected one.
    #[arg(long)]
    best_match: bool,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Keep only the first N communities of the truth file.
    #[arg(long)]
    top: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    /// Tab-separated manifest with id, graph_path and truth_path columns.
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated beta grid.
    #[arg(long, default_value_t = BetaGrid::default())]
    betas: BetaGrid,
    #[command(flatten)]
    engine: EngineArgs,
    /// Score only the truth communities that best match a detected one.
    #[arg(long)]
    best_match: bool,
    /// Networks with more nodes than this go to the test split.
    #[arg(long, default_value_t = dataset::DEFAULT_SPLIT_THRESHOLD)]
    split_threshold: usize,
    /// Dataset file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "average")]
    metric: MetricKind,
    /// TOML grid; the default hyperparameters when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    /// Ignore network weights while growing trees.
    #[arg(long)]
    unweighted_train: bool,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation table; stdout when omitted.
    #[arg(long)]
    cv_out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    weighted: bool,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
}

#[derive(Args)]
struct FeatureIgArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "average")]
    metric: MetricKind,
    #[arg(long, default_value_t = classifier::DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = engine::DEFAULT_TR_RATE)]
    tr_rate: f64,
    #[arg(long, value_enum, default_value = "all")]
    split: SplitArg,
    /// Cell table; stdout when omitted.
    #[arg(long)]
    cells_out: Option<PathBuf>,
    /// Per-network table.
    #[arg(long)]
    networks_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory for graphs/, truth/ and manifest.tsv.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 40)]
    count: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Detect(a) => detect(a, seed),
        Command::Evaluate(a) => evaluate(a),
        Command::Prune(a) => prune(a),
        Command::Label(a) => label(a, seed),
        Command::Train(a) => train(a, seed),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::FeatureIg(a) => feature_ig(a),
        Command::Compare(a) => compare(a),
        Command::Generate(a) => generate(a, seed),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_header(out: &mut dyn Write, manifest: &RunManifest) -> Result<()> {
    for line in manifest.lines()? {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

fn engine_config(beta: f64, args: &EngineArgs, mode: ObjectiveMode, seed: u64) -> Result<EngineConfig> {
    let config = EngineConfig {
        beta,
        alpha: args.alpha,
        max_iter: args.max_iter,
        objective_mode: mode,
        rng_seed: seed,
        init: args.init,
    };
    config.validate()?;
    Ok(config)
}

fn engine_flags(m: RunManifest, args: &EngineArgs) -> RunManifest {
    m.flag("alpha", args.alpha)
        .flag("max-iter", args.max_iter)
        .flag("init", args.init)
}

fn detect(a: DetectArgs, seed: u64) -> Result<()> {
    let g = load_edge_list(&a.graph)?;
    let mode = match a.objective {
        ObjectiveArg::Qe => ObjectiveMode::ForceQe,
        ObjectiveArg::Wocc => ObjectiveMode::ForceWocc,
        ObjectiveArg::Threshold => ObjectiveMode::Threshold { tr_rate: a.tr_rate },
        ObjectiveArg::Model => match &a.model {
            Some(p) => ObjectiveMode::Model(p.clone()),
            None => bail!("--objective model needs --model"),
        },
    };
    let config = engine_config(a.beta, &a.engine, mode, seed)?;
    let model = match &a.model {
        Some(p) if matches!(a.objective, ObjectiveArg::Model) => Some(classifier::load_model(p)?),
        _ => None,
    };
    let result = engine::run(&g, &config, model.as_ref())?;
    info!(
        "objective {} value {:.6} after {} iterations (converged: {}), {} communities",
        result.objective_chosen,
        result.objective_value,
        result.iterations_used,
        result.converged,
        result.cover.len()
    );

    let objective = match a.objective {
        ObjectiveArg::Qe => "qe",
        ObjectiveArg::Wocc => "wocc",
        ObjectiveArg::Threshold => "threshold",
        ObjectiveArg::Model => "model",
    };
    let mut manifest = engine_flags(RunManifest::new("detect").flag("beta", a.beta), &a.engine)
        .flag("objective", objective);
    if matches!(a.objective, ObjectiveArg::Threshold) {
        manifest = manifest.flag("tr-rate", a.tr_rate);
    }
    manifest = manifest.seed(seed).input(&a.graph);
    if let (Some(p), ObjectiveArg::Model) = (&a.model, a.objective) {
        manifest = manifest.input(p);
    }
    let mut out = open_output(a.output.as_deref())?;
    write_header(&mut out, &manifest)?;
    writeln!(out, "# objective {}", result.objective_chosen)?;
    write_cover(&mut out, &result.cover, &g)?;
    out.flush()?;
    Ok(())
}

/// The graph plus any node named only in the community files.
fn graph_with_cover_nodes(graph: &Path, covers: &[&Path]) -> Result<Graph> {
    let g = load_edge_list(graph)?;
    let mut extra = Vec::new();
    for path in covers {
        for (_, labels) in read_community_labels(path)? {
            extra.extend(labels);
        }
    }
    Ok(g.with_extra_nodes(extra.iter().map(String::as_str)))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let g = graph_with_cover_nodes(&a.graph, &[&a.truth, &a.detected])?;
    let truth = read_cover(&a.truth, &g)?;
    let detected = read_cover(&a.detected, &g)?;
    let report = metrics::score(&detected, &truth, g.node_count(), a.best_match)?;

    let sep = match a.format {
        Format::Csv => ",",
        Format::Tsv => "\t",
    };
    let mut manifest = RunManifest::new("evaluate");
    if a.best_match {
        manifest = manifest.flag("best-match", "");
    }
    let manifest = manifest.input(&a.graph).input(&a.truth).input(&a.detected);
    let mut out = open_output(a.output.as_deref())?;
    write_header(&mut out, &manifest)?;
    writeln!(out, "{}", ["onmi", "omega", "avg_f1", "metrics_average", "onmi_variant"].join(sep))?;
    let fields = [
        dataset::fmt_score(report.onmi),
        dataset::fmt_score(report.omega),
        dataset::fmt_score(report.avg_f1),
        dataset::fmt_score(report.metrics_average),
        report.onmi_variant().to_owned(),
    ];
    writeln!(out, "{}", fields.join(sep))?;
    out.flush()?;
    Ok(())
}

fn prune(a: PruneArgs) -> Result<()> {
    let g = load_edge_list(&a.graph)?;
    let truth = read_community_labels(&a.truth)?;
    let pruned = dataset::prune_to_truth(&g, &truth, a.top);
    info!(
        "kept {} of {} nodes, {} of {} edges",
        pruned.node_count(),
        g.node_count(),
        pruned.edge_count(),
        g.edge_count()
    );
    let mut manifest = RunManifest::new("prune");
    if let Some(top) = a.top {
        manifest = manifest.flag("top", top);
    }
    let manifest = manifest.input(&a.graph).input(&a.truth);
    let mut out = open_output(a.output.as_deref())?;
    write_header(&mut out, &manifest)?;
    write_edge_list(&mut out, &pruned)?;
    out.flush()?;
    Ok(())
}

fn label(a: LabelArgs, seed: u64) -> Result<()> {
    let records = dataset::read_manifest(&a.manifest)?;
    let engine = engine_config(1.0, &a.engine, ObjectiveMode::ForceQe, seed)?;
    let config = LabelConfig {
        betas: a.betas.clone(),
        engine,
        use_best_match: a.best_match,
    };
    let mut manifest = engine_flags(RunManifest::new("label").flag("betas", &a.betas), &a.engine)
        .flag("split-threshold", a.split_threshold);
    if a.best_match {
        manifest = manifest.flag("best-match", "");
    }
    let mut manifest = manifest.seed(seed).input(&a.manifest);
    for r in &records {
        manifest = manifest.input(&r.graph_path).input(&r.truth_path);
    }
    let out = open_output(Some(&a.out))?;
    let summary = dataset::build_dataset(&records, &config, a.split_threshold, out, &manifest.lines()?)?;
    info!(
        "labeled {} networks into {} rows ({} failed)",
        summary.networks, summary.rows, summary.failures
    );
    if summary.failures == summary.networks && summary.networks > 0 {
        bail!("every network failed to label");
    }
    Ok(())
}

fn samples(path: &Path, metric: MetricKind, split: SplitArg) -> Result<Vec<Sample>> {
    let rows = dataset::load_dataset(path)?;
    let rows = dataset::select_rows(&rows, metric, split.split());
    if rows.is_empty() {
        bail!(
            "{} has no {} rows for metric {}",
            path.display(),
            split.as_str(),
            metric.as_str()
        );
    }
    Ok(rows.iter().map(|r| r.sample()).collect())
}

fn train(a: TrainArgs, seed: u64) -> Result<()> {
    let rows = samples(&a.dataset, a.metric, a.split)?;
    let grid = match &a.grid {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            HyperparamGrid::from_toml(&text)?
        }
        None => HyperparamGrid::default(),
    };
    let points = grid.points()?;
    let options = TrainOptions {
        weighted: !a.unweighted_train,
    };
    let CvOutcome { best, all } = classifier::cross_validate(&rows, a.metric, &points, seed, options)?;
    info!(
        "best {} with mean balanced accuracy {:.4} (fold std {:.4})",
        best.params,
        best.mean_ba,
        best.std_dev()
    );
    let model = classifier::train(&rows, a.metric, &best.params, seed, options)?;

    let mut manifest = RunManifest::new("train")
        .flag("metric", a.metric.as_str())
        .flag("split", a.split.as_str());
    if a.unweighted_train {
        manifest = manifest.flag("unweighted-train", "");
    }
    let mut manifest = manifest.seed(seed).input(&a.dataset);
    if let Some(g) = &a.grid {
        manifest = manifest.input(g);
    }
    let mut comments = manifest.lines()?;
    comments.push(format!(
        "cv mean_ba {} fold_std {}",
        dataset::fmt_score(best.mean_ba),
        dataset::fmt_score(best.std_dev())
    ));
    let mut out = open_output(Some(&a.out))?;
    classifier::write_model(&mut out, &model, &comments)?;
    out.flush()?;

    let mut cv = open_output(a.cv_out.as_deref())?;
    write_header(&mut cv, &manifest)?;
    writeln!(
        cv,
        "learner\tn_estimators\tmax_depth\tmin_samples_split\tmin_samples_leaf\tmean_ba\tfold_std\tfolds\tbest"
    )?;
    for s in &all {
        let p = &s.params;
        let folds: Vec<String> = s.fold_scores().iter().map(|&f| dataset::fmt_score(f)).collect();
        writeln!(
            cv,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            p.learner,
            p.n_estimators,
            p.max_depth,
            p.min_samples_split,
            p.min_samples_leaf,
            dataset::fmt_score(s.mean_ba),
            dataset::fmt_score(s.std_dev()),
            folds.join(","),
            u8::from(s.params == best.params)
        )?;
    }
    cv.flush()?;
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = classifier::load_model(&a.model)?;
    let g = load_edge_list(&a.graph)?;
    let features = extract_features(&g);
    let (kind, p_wocc) = model.predict(&features);
    let manifest = RunManifest::new("predict").input(&a.model).input(&a.graph);
    let mut out = open_output(None)?;
    write_header(&mut out, &manifest)?;
    writeln!(out, "objective\tp_wocc\tgcc\tacc\tratio_nodes_in_triangle\tavg_degree\tavg_triangles_rate")?;
    let f: Vec<String> = features.to_array().iter().map(f64::to_string).collect();
    writeln!(out, "{kind}\t{}\t{}", dataset::fmt_score(p_wocc), f.join("\t"))?;
    out.flush()?;
    Ok(())
}

fn opt_score(v: Option<f64>) -> String {
    v.map_or_else(|| "---".to_owned(), dataset::fmt_score)
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = classifier::load_model(&a.model)?;
    let rows = samples(&a.dataset, model.metric, a.split)?;
    let report = classifier::evaluate(&model, &rows, a.weighted);
    let mut manifest = RunManifest::new("eval").flag("split", a.split.as_str());
    if a.weighted {
        manifest = manifest.flag("weighted", "");
    }
    let manifest = manifest.input(&a.model).input(&a.dataset);
    let mut out = open_output(None)?;
    write_header(&mut out, &manifest)?;
    writeln!(out, "metric\tweighted\trows\tbalanced_accuracy\trecall_qe\trecall_wocc")?;
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}",
        model.metric.as_str(),
        a.weighted,
        rows.len(),
        dataset::fmt_score(report.balanced_accuracy),
        opt_score(report.recall_qe),
        opt_score(report.recall_wocc)
    )?;
    out.flush()?;
    Ok(())
}

fn feature_ig(a: FeatureIgArgs) -> Result<()> {
    let rows = samples(&a.dataset, a.metric, SplitArg::All)?;
    let gains = classifier::information_gain(&rows, a.bins)?;
    let manifest = RunManifest::new("feature-ig")
        .flag("metric", a.metric.as_str())
        .flag("bins", a.bins)
        .input(&a.dataset);
    let mut out = open_output(a.output.as_deref())?;
    write_header(&mut out, &manifest)?;
    writeln!(out, "feature\tinformation_gain")?;
    for g in &gains {
        writeln!(out, "{}\t{}", g.feature, dataset::fmt_score(g.gain))?;
    }
    out.flush()?;
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let model = classifier::load_model(&a.model)?;
    let rows = dataset::load_dataset(&a.dataset)?;
    let rows = dataset::select_rows(&rows, model.metric, a.split.split());
    let comparison = report::compare_selectors(&rows, &model, a.tr_rate)?;
    let manifest = RunManifest::new("compare")
        .flag("tr-rate", a.tr_rate)
        .flag("split", a.split.as_str())
        .input(&a.dataset)
        .input(&a.model);
    let comments = manifest.lines()?;
    let mut out = open_output(a.cells_out.as_deref())?;
    report::write_cells(&mut out, &comparison.cells, &comments)?;
    out.flush()?;
    if let Some(p) = &a.networks_out {
        let mut out = open_output(Some(p))?;
        report::write_networks(&mut out, &comparison.networks, &comments)?;
        out.flush()?;
    }
    Ok(())
}

fn generate(a: GenerateArgs, seed: u64) -> Result<()> {
    if a.count == 0 {
        bail!("--count must be positive");
    }
    let specs = dataset::toy_corpus(a.count, seed);
    let manifest = RunManifest::new("generate").flag("count", a.count).seed(seed);
    let path = dataset::write_corpus(&a.out_dir, &specs, &manifest.lines()?)?;
    info!("wrote {} networks, manifest {}", specs.len(), path.display());
    Ok(())
}
