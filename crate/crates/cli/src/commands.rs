use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use klrf::eval::{evaluate, predict_all, usefulness_summary, EvalOptions, UsefulnessSummary};
use klrf::forest::QualityChoice;
use klrf::io::{load_dataset, load_model, model_digest, save_dataset, save_model, synth_generate, Dataset, SynthConfig};
use klrf::learning::StageTimings;
use klrf::{train_baseline, train_klrf, ActionSequence, KlrfConfig, KlrfError, Result, TrainedModel, TrainingMode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{ConfigArgs, EvalArgs, FilterArgs, InspectArgs, PredictArgs, SynthArgs, TrainArgs};

fn read_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| KlrfError::io(path, e))?;
    toml::from_str(&text).map_err(|e| KlrfError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| KlrfError::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| KlrfError::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| KlrfError::Serialization(e.to_string()))
}

fn training_config(args: &ConfigArgs) -> Result<KlrfConfig> {
    let mut config: KlrfConfig = read_toml(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(t) = args.trees {
        config.num_trees = t;
    }
    if args.reference_trees.is_some() {
        config.reference_trees = args.reference_trees;
    }
    if args.cross_view {
        config.cross_view_mode = true;
    }
    if let Some(p) = args.qv_prob {
        config.qv_switch_prob = p;
    }
    if args.augment {
        config.augmentation.enabled = true;
    }
    config.validate()?;
    Ok(config)
}

fn view_dir_name(deg: f64) -> String {
    format!("test_{}", format!("{deg}").replace(['.', '-'], "_"))
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut config: SynthConfig = read_toml(args.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(v) = args.views {
        config.views = v;
    }
    if let Some(n) = args.sequences_per_class {
        config.sequences_per_class = n;
    }
    if let Some(n) = args.frames {
        config.frames_per_sequence = n;
    }
    let data = synth_generate(&config)?;
    let path = save_dataset(&args.out.join("train"), "manifest.json", &Dataset::from_sequences("synth-train", data.train))?;
    println!("train\t{}", path.display());
    for (deg, seqs) in data.tests {
        let name = view_dir_name(deg);
        let path = save_dataset(&args.out.join(&name), "manifest.json", &Dataset::from_sequences(format!("synth-{name}"), seqs))?;
        println!("view {deg}\t{}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    mode: TrainingMode,
    config: KlrfConfig,
    class_names: Vec<String>,
    training_sequences: usize,
    model_digest: String,
    usefulness: Vec<UsefulnessSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage_seconds: Option<BTreeMap<String, f64>>,
}

fn print_usefulness(summary: &[UsefulnessSummary]) {
    println!("usefulness per class (bins over [-1, 1]):");
    for s in summary {
        let bins: Vec<String> = s.histogram.iter().map(usize::to_string).collect();
        println!("  {:<16} n={:<6} mean={:+.3}  [{}]", s.class_name, s.count, s.mean, bins.join(" "));
    }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let config = training_config(&args.config)?;
    let start = Instant::now();
    let dataset = load_dataset(&args.data)?;
    let load_time = start.elapsed();
    let (model, mut timings) = if args.baseline {
        train_baseline(&dataset.sequences, &config)?
    } else {
        train_klrf(&dataset.sequences, &config)?
    };
    timings.stages.insert(0, ("load", load_time));
    let model = if args.keep_reference { model } else { model.without_reference() };

    print_timings(&timings);
    let summary = usefulness_summary(&model.usefulness, model.labels(), args.bins);
    if !model.usefulness.is_empty() {
        print_usefulness(&summary);
    }
    save_model(&model, &args.out)?;
    let digest = model_digest(&model)?;
    println!("model\t{}\t{digest}", args.out.display());

    if let Some(path) = &args.report {
        let report = TrainSummary {
            mode: model.mode,
            config: model.config().clone(),
            class_names: model.labels().names().to_vec(),
            training_sequences: dataset.sequences.len(),
            model_digest: digest,
            usefulness: summary,
            stage_seconds: args
                .timings
                .then(|| timings.stages.iter().map(|(n, d)| (n.to_string(), d.as_secs_f64())).collect()),
        };
        write_json(path, &report)?;
    }
    Ok(())
}

fn print_timings(timings: &StageTimings) {
    for (name, d) in &timings.stages {
        println!("stage {name:<20} {:>9.3} s", d.as_secs_f64());
    }
}

/// Test sequences from every manifest, stripped to appearance only.
fn test_sequences(paths: &[std::path::PathBuf], filter: &FilterArgs) -> Result<Vec<ActionSequence>> {
    let mut out = Vec::new();
    for path in paths {
        out.extend(load_dataset(path)?.sequences.iter().map(ActionSequence::strip_privileged));
    }
    if let Some(views) = &filter.views {
        out.retain(|s| views.contains(&s.view));
    }
    if out.is_empty() {
        return Err(KlrfError::InvalidInput("no test sequences left after filtering".into()));
    }
    Ok(out)
}

fn options(filter: &FilterArgs) -> EvalOptions {
    EvalOptions { kcf: filter.kcf, temporal_offsets: filter.kcf_offsets }
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let sequences = test_sequences(&args.data, &args.filter)?;
    let start = Instant::now();
    let (mut report, _) = evaluate(&model, &sequences, &options(&args.filter))?;
    if args.timings {
        report.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    }
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("mean accuracy {:.4} over {} sequences", report.mean_accuracy, sequences.len());
            for (view, acc) in &report.per_view_accuracy {
                println!("  view {view:<8} {acc:.4}");
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| KlrfError::Serialization(e.to_string()))?),
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    view: &'a str,
    predicted: &'a str,
    probs: &'a [f64],
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let sequences = test_sequences(&args.data, &args.filter)?;
    let dists = predict_all(&model, &sequences, &options(&args.filter))?;
    for (s, d) in sequences.iter().zip(&dists) {
        let line = PredictionLine {
            id: &s.id,
            view: &s.view,
            predicted: model.labels().name(d.argmax()),
            probs: &d.probs,
        };
        println!("{}", to_json(&line)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct DepthStats {
    min: usize,
    mean: f64,
    max: usize,
}

#[derive(Serialize)]
struct LeafBin {
    from: usize,
    to: usize,
    trees: usize,
}

#[derive(Serialize)]
struct ModelSummary {
    mode: TrainingMode,
    class_names: Vec<String>,
    trees: usize,
    has_reference_forests: bool,
    feature_dim: usize,
    depth: DepthStats,
    quality_choices: BTreeMap<&'static str, usize>,
    leaves_per_tree: Vec<LeafBin>,
    model_digest: String,
    config: KlrfConfig,
}

/// Equal-width histogram of leaves per tree; inclusive bin bounds.
fn leaf_histogram(counts: &[usize], bins: usize) -> Vec<LeafBin> {
    let (Some(&lo), Some(&hi)) = (counts.iter().min(), counts.iter().max()) else { return Vec::new() };
    let width = (hi - lo) / bins + 1;
    let mut out: Vec<LeafBin> = (0..bins)
        .map(|b| LeafBin { from: lo + b * width, to: lo + (b + 1) * width - 1, trees: 0 })
        .take_while(|b| b.from <= hi)
        .collect();
    for &c in counts {
        out[(c - lo) / width].trees += 1;
    }
    out
}

fn summarize(model: &TrainedModel) -> Result<ModelSummary> {
    let trees = &model.forest.trees;
    let depths: Vec<usize> = trees.iter().map(|t| t.depth()).collect();
    let mut quality_choices: BTreeMap<&'static str, usize> =
        QualityChoice::ALL.iter().map(|q| (q.short_name(), 0)).collect();
    for q in trees.iter().flat_map(|t| t.split_choices()) {
        *quality_choices.entry(q.short_name()).or_default() += 1;
    }
    let leaves: Vec<usize> = trees.iter().map(|t| t.leaves().count()).collect();
    Ok(ModelSummary {
        mode: model.mode,
        class_names: model.labels().names().to_vec(),
        trees: trees.len(),
        has_reference_forests: model.reference.is_some(),
        feature_dim: model.forest.feature_dim,
        depth: DepthStats {
            min: depths.iter().copied().min().unwrap_or(0),
            mean: depths.iter().sum::<usize>() as f64 / depths.len().max(1) as f64,
            max: depths.iter().copied().max().unwrap_or(0),
        },
        quality_choices,
        leaves_per_tree: leaf_histogram(&leaves, 10),
        model_digest: model_digest(model)?,
        config: model.config().clone(),
    })
}

pub fn inspect(args: InspectArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let s = summarize(&model)?;
    if args.json {
        println!("{}", to_json(&s)?);
        return Ok(());
    }
    println!("mode            {:?}", s.mode);
    println!("classes         {}", s.class_names.join(", "));
    println!("trees           {}", s.trees);
    println!("reference       {}", if s.has_reference_forests { "kept" } else { "stripped" });
    println!("feature dim     {}", s.feature_dim);
    println!("depth           min {} / mean {:.2} / max {}", s.depth.min, s.depth.mean, s.depth.max);
    let total: usize = s.quality_choices.values().sum();
    println!("split terms     {total} splits");
    for (name, n) in &s.quality_choices {
        println!("  {name:<5} {n:>8}  {:>6.2}%", 100.0 * *n as f64 / total.max(1) as f64);
    }
    println!("leaves per tree");
    for b in &s.leaves_per_tree {
        println!("  {:>6}..={:<6} {}", b.from, b.to, b.trees);
    }
    println!("digest          {}", s.model_digest);
    Ok(())
}
