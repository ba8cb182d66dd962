use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use checktrim_core::classifiers::{
    fit_classifier, rebalance, FeatureSet, ModelFile, PassProbability, RebalanceSpec, TrainConfig,
};
use checktrim_core::corpus::{
    load_checks, load_events, load_jsonl, save_jsonl, split_train_test, synthesize_corpus, synthesize_events, CheckRecord,
    Format, LabelMode, Stratify, SynthConfig,
};
use checktrim_core::dedup::{find_duplicates, DuplicatePair, TierBounds};
use checktrim_core::metrics::{evaluate, feature_ablation, format_ablation, format_reports, AblationConfig};
use checktrim_core::severity::{Aggregation, SeverityConfig, SeverityModel};
use checktrim_core::textprep::TextPipeline;
use checktrim_core::triage::{
    excluded_duplicates, score_checks, summary_report, triage_scored, whatif_sweep, ScoredCheck, TriageConfig,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "checktrim", version, about = "Audit checklist deduplication, throttling and prioritization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic check corpus, optionally with severity events.
    Synth(SynthArgs),
    /// Find near-duplicate pairs within asset type, vendor and site blocks.
    Dedup(DedupArgs),
    /// Train a pass-probability model and report held-out metrics.
    Train(TrainArgs),
    /// Compare feature subsets by held-out AUC.
    Ablate(AblateArgs),
    /// Cluster severity events and save the scoring model.
    Severity(SeverityArgs),
    /// Throttle verdicts, priorities and what-if sweeps.
    Triage {
        #[command(subcommand)]
        command: TriageCommand,
    },
    /// Serve the review API over a data directory.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 1.0 / 16.0)]
    fail_fraction: f64,
    #[arg(long, default_value_t = 0)]
    duplicates: usize,
    #[arg(long, default_value_t = 0)]
    paraphrases: usize,
    #[arg(long, default_value_t = 8)]
    themes: usize,
    #[arg(long, default_value_t = 1.0)]
    cue_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the planted ground truth as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Also write severity events here.
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    n_events: usize,
}

#[derive(Args)]
struct DedupArgs {
    #[arg(long)]
    checks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.85)]
    identical_min: f64,
    #[arg(long, default_value_t = 0.60)]
    high_min: f64,
    #[arg(long, default_value_t = 0.35)]
    moderate_min: f64,
    /// One stopword per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    checks: PathBuf,
    #[arg(long, default_value = "blazing")]
    kind: String,
    #[arg(long, default_value = "throttled")]
    label: String,
    /// Comma-separated feature names.
    #[arg(long)]
    features: Option<String>,
    /// JSON training config; flags override its kind, label, features and seed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Majority records kept per minority record in the training split.
    #[arg(long)]
    ratio: Option<f64>,
    /// With --ratio, weight the minority class up to the kept majority.
    #[arg(long)]
    upweight: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the evaluation report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    checks: PathBuf,
    #[arg(long, default_value = "forest")]
    kind: String,
    #[arg(long, default_value = "throttled")]
    label: String,
    /// Subsets separated by ';', features within a subset by ','.
    #[arg(long)]
    subsets: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SeverityArgs {
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Fixed number of clusters; otherwise chosen by the elbow of the inertia curve.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    #[arg(long, default_value = "max")]
    aggregation: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the inertia curve as CSV.
    #[arg(long)]
    elbow_csv: Option<PathBuf>,
    /// Write centroids in text form.
    #[arg(long)]
    centroids: Option<PathBuf>,
    /// Score these checks and write the scores as JSONL to --scores-out.
    #[arg(long, requires = "scores_out")]
    checks: Option<PathBuf>,
    #[arg(long)]
    scores_out: Option<PathBuf>,
}

#[derive(Args)]
struct TriageInputs {
    /// JSON triage config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checks: PathBuf,
    /// Duplicate pairs; accepted ones remove their larger id.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Model files, one per label mode; replaces the config's model_path.
    #[arg(long = "model")]
    models: Vec<PathBuf>,
    #[arg(long)]
    severity_model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TriageCommand {
    /// Decide every check and write decisions as JSONL.
    Run {
        #[command(flatten)]
        inputs: TriageInputs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-check model scores, the input of the review service.
        #[arg(long)]
        scores_out: Option<PathBuf>,
        /// Write the summary report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Trimmed, blocked and failed shares over a grid of severity thresholds.
    Sweep {
        #[command(flatten)]
        inputs: TriageInputs,
        /// Comma-separated thresholds.
        #[arg(long, default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        t: String,
        /// Comma-separated label modes; defaults to every mode with a model.
        #[arg(long)]
        labels: Option<String>,
        #[arg(long)]
        pass_threshold: Option<f64>,
        /// Trimmed percentage only, one column per label mode.
        #[arg(long)]
        matrix: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "CHECKTRIM_DATA")]
    data: PathBuf,
    #[arg(long, env = "CHECKTRIM_PORT", default_value_t = 8080)]
    port: u16,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn read_checks(path: &Path) -> Result<Vec<CheckRecord>> {
    let loaded = load_checks(path, Format::from_path(path)).with_context(|| format!("reading {}", path.display()))?;
    Ok(loaded.records)
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|e| anyhow::anyhow!("{x:?}: {e}")))
        .collect()
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_checks: a.n,
        fail_fraction: a.fail_fraction,
        n_duplicate_pairs: a.duplicates,
        n_paraphrase_pairs: a.paraphrases,
        vocab_themes: a.themes,
        cue_noise: a.cue_noise,
        seed: a.seed,
    };
    let (records, truth) = synthesize_corpus(&cfg)?;
    save_jsonl(&records, &a.out)?;
    if let Some(p) = &a.truth {
        write_json(p, &truth)?;
    }
    if let Some(p) = &a.events {
        save_jsonl(&synthesize_events(a.n_events, a.themes, a.seed.wrapping_add(1))?, p)?;
    }
    eprintln!("wrote {} checks to {}", records.len(), a.out.display());
    Ok(())
}

fn dedup(a: DedupArgs) -> Result<()> {
    let records = read_checks(&a.checks)?;
    let bounds = TierBounds { identical_min: a.identical_min, high_min: a.high_min, moderate_min: a.moderate_min };
    let mut pipeline = TextPipeline::default();
    if let Some(p) = &a.stopwords {
        pipeline = pipeline.load_stopwords(p)?;
    }
    let result = find_duplicates(&records, &bounds, &pipeline)?;
    let mut w = create(&a.out)?;
    result.write_pairs_jsonl(&mut w)?;
    w.flush()?;
    print!("{}", result.report().to_table());
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut config: TrainConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => TrainConfig::default(),
    };
    config.kind = a.kind.parse()?;
    config.label_mode = a.label.parse().map_err(anyhow::Error::msg)?;
    config.seed = a.seed;
    if let Some(f) = &a.features {
        let names: Vec<&str> = f.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        config.features = FeatureSet::parse(&names)?;
    }
    Ok(config)
}

fn train(a: TrainArgs) -> Result<()> {
    let config = train_config(&a)?;
    let records = read_checks(&a.checks)?;
    let split = split_train_test(&records, a.train_fraction, a.seed, Stratify::ByIoq)?;
    let (train_set, weights) = match a.ratio {
        Some(r) => {
            let (recs, w, plan) = rebalance(&split.train, &RebalanceSpec::new(r, a.upweight, a.seed), config.label_mode)?;
            if let Some(msg) = &plan.warning {
                log::warn!("{msg}");
            }
            (recs, Some(w))
        }
        None => (split.train.clone(), None),
    };
    let start = Instant::now();
    let model = fit_classifier(&train_set, weights.as_deref(), &config)?;
    let secs = start.elapsed().as_secs_f64();

    let test: Vec<&CheckRecord> = split.test.iter().filter(|r| r.label(config.label_mode).is_some()).collect();
    let scores: Vec<f64> = test.iter().map(|r| model.predict_proba(r)).collect();
    let labels: Vec<_> = test.iter().map(|r| r.label(config.label_mode).expect("filtered")).collect();
    let report = evaluate(config.kind.as_str(), &scores, &labels, 0.5, secs)?;
    print!("{}", format_reports(std::slice::from_ref(&report)));
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    ModelFile::new(model, &config).save(&a.out)?;
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let records = read_checks(&a.checks)?;
    let mut train = TrainConfig::new(a.kind.parse()?, a.seed);
    train.label_mode = a.label.parse().map_err(anyhow::Error::msg)?;
    let config = AblationConfig { train, split_seed: a.seed, ..AblationConfig::default() };
    let subsets: Vec<Vec<String>> = a
        .subsets
        .split(';')
        .map(|s| s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())
        .filter(|v: &Vec<String>| !v.is_empty())
        .collect();
    if subsets.is_empty() {
        bail!("no feature subsets given");
    }
    print!("{}", format_ablation(&feature_ablation(&records, &subsets, &config)?));
    Ok(())
}

fn severity(a: SeverityArgs) -> Result<()> {
    let events = load_events(&a.events)?;
    let config = SeverityConfig {
        k_min: a.k_min,
        k_max: a.k_max,
        fixed_k: a.k,
        aggregation: a.aggregation.parse::<Aggregation>()?,
        seed: a.seed,
        ..SeverityConfig::default()
    };
    let model = SeverityModel::fit(&events, &config)?;
    model.save(&a.out)?;
    if let Some(p) = &a.elbow_csv {
        std::fs::write(p, model.inertia_csv())?;
    }
    if let Some(p) = &a.centroids {
        let mut w = create(p)?;
        model.write_centroids(&mut w)?;
        w.flush()?;
    }
    if let (Some(checks), Some(out)) = (&a.checks, &a.scores_out) {
        save_jsonl(&model.score_all(&read_checks(checks)?), out)?;
    }
    eprintln!("k = {} over {} events", model.k, events.len());
    Ok(())
}

struct TriageData {
    config: TriageConfig,
    records: Vec<CheckRecord>,
    pairs: Vec<DuplicatePair>,
    scores: BTreeMap<LabelMode, Vec<ScoredCheck>>,
}

fn load_triage(inputs: &TriageInputs) -> Result<TriageData> {
    let config: TriageConfig = match &inputs.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => TriageConfig::default(),
    };
    config.validate()?;
    let records = read_checks(&inputs.checks)?;
    let pairs: Vec<DuplicatePair> = match &inputs.pairs {
        Some(p) => load_jsonl(p)?,
        None => Vec::new(),
    };
    let severity_path = inputs
        .severity_model
        .clone()
        .or_else(|| config.severity_model_path.as_ref().map(PathBuf::from))
        .context("no severity model: pass --severity-model or set severity_model_path")?;
    let severity = SeverityModel::load(&severity_path).with_context(|| format!("reading {}", severity_path.display()))?;
    let mut model_paths = inputs.models.clone();
    if model_paths.is_empty() {
        model_paths.extend(config.model_path.as_ref().map(PathBuf::from));
    }
    if model_paths.is_empty() {
        bail!("no classifier: pass --model or set model_path");
    }
    let mut scores = BTreeMap::new();
    for p in &model_paths {
        let file = ModelFile::load(p).with_context(|| format!("reading {}", p.display()))?;
        if scores.contains_key(&file.label_mode) {
            bail!("two models for label mode {}", file.label_mode);
        }
        if inputs.models.is_empty() && file.kind != config.classifier {
            log::warn!("config names classifier {} but {} holds {}", config.classifier, p.display(), file.kind);
        }
        scores.insert(file.label_mode, score_checks(&records, file.label_mode, &file.model, &severity));
    }
    Ok(TriageData { config, records, pairs, scores })
}

fn triage_run(inputs: TriageInputs, out: PathBuf, scores_out: Option<PathBuf>, report: Option<PathBuf>) -> Result<()> {
    let data = load_triage(&inputs)?;
    let ids: HashSet<&str> = data.records.iter().map(|r| r.id.as_str()).collect();
    let excluded = excluded_duplicates(&data.pairs, &ids)?;
    let scored = data
        .scores
        .get(&data.config.label_mode)
        .with_context(|| format!("no model for label mode {}", data.config.label_mode))?;
    let decisions = triage_scored(scored, &excluded, &data.config);
    save_jsonl(&decisions, &out)?;
    if let Some(p) = &scores_out {
        let all: Vec<ScoredCheck> = data.scores.values().flatten().cloned().collect();
        save_jsonl(&all, p)?;
    }
    let dedup = (!data.pairs.is_empty())
        .then(|| checktrim_core::dedup::dedup_report(data.records.len(), &data.pairs));
    let summary = summary_report(&decisions, dedup.as_ref());
    print!("{}", summary.to_text());
    if let Some(p) = &report {
        write_json(p, &summary)?;
    }
    Ok(())
}

fn triage_sweep(
    inputs: TriageInputs,
    t: String,
    labels: Option<String>,
    pass_threshold: Option<f64>,
    matrix: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let data = load_triage(&inputs)?;
    let ids: HashSet<&str> = data.records.iter().map(|r| r.id.as_str()).collect();
    let excluded = excluded_duplicates(&data.pairs, &ids)?;
    let t_values: Vec<f64> = parse_list(&t)?;
    let modes: Vec<LabelMode> = match labels {
        Some(l) => parse_list(&l)?,
        None => data.scores.keys().copied().collect(),
    };
    let pt = pass_threshold.unwrap_or(data.config.pass_threshold);
    let result = whatif_sweep(&data.scores, &excluded, pt, &t_values, &modes)?;
    let csv = if matrix { result.to_matrix_csv() } else { result.to_csv() };
    match out {
        Some(p) => std::fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Dedup(a) => dedup(a),
        Command::Train(a) => train(a),
        Command::Ablate(a) => ablate(a),
        Command::Severity(a) => severity(a),
        Command::Triage { command } => match command {
            TriageCommand::Run { inputs, out, scores_out, report } => triage_run(inputs, out, scores_out, report),
            TriageCommand::Sweep { inputs, t, labels, pass_threshold, matrix, out } => {
                triage_sweep(inputs, t, labels, pass_threshold, matrix, out)
            }
        },
        Command::Serve(a) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(checktrim_service::serve(&a.data, a.port))?;
            Ok(())
        }
    }
}
