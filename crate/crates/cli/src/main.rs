mod commands;
mod manifest;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use pathsift::eval::LabelConfig;
use pathsift::labeler::FilterConfig;
use pathsift::logistic::LogisticConfig;
use pathsift::pra::PraConfig;
use pathsift::synth::SynthSpec;
use pathsift::walk::PathSearch;

use manifest::Manifest;
use summary::{default_summary_path, Stage};

#[derive(Parser)]
#[command(name = "pathsift", version, about = "Filter false negatives from distantly supervised relation data with learned KB paths")]
struct Cli {
    /// Where to write the stage summary (defaults to `<output>.summary.json`).
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print triple, entity and per-relation counts of a kb file.
    KgStats {
        #[arg(long)]
        kb: PathBuf,
        /// Also write the statistics as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Learn weighted relation paths for one target relation.
    PraTrain {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        relation: String,
        #[command(flatten)]
        pra: PraArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Show a trained path model, highest weight first.
    PraPaths {
        #[arg(long)]
        model: PathBuf,
        /// Only paths with positive weight.
        #[arg(long)]
        positive: bool,
    },
    /// Flag negative pairs connected by a positive-weight path.
    FnDetect {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Distantly label a corpus and apply the heuristic filters.
    Label {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        relation: String,
        #[command(flatten)]
        labeling: LabelArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write the removed examples with the criteria that fired.
        #[arg(long)]
        removed: Option<PathBuf>,
    },
    /// Drop every example whose pair a fn-detect report flagged.
    Reduce {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Drop random negatives until the dataset matches a reference's size and bias.
    RandomReduce {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subsample negatives down to `ratio` negatives per positive.
    AdjustBias {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = pathsift::eval::DEFAULT_BIAS_RATIO)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sentence-level extractor, optionally scoring a test set.
    TrainExtractor {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = pathsift::extractor::DEFAULT_EXTRACTOR_L2)]
        l2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Labeled dataset to score with the trained model.
        #[arg(long, requires = "predictions")]
        predict: Option<PathBuf>,
        /// CSV of pair predictions for `--predict`.
        #[arg(long, requires = "predict")]
        predictions: Option<PathBuf>,
    },
    /// Run the held-out comparison of the three training sets.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Generate a synthetic benchmark directory with a ready manifest.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        planted: Option<usize>,
        #[arg(long)]
        decoys: Option<usize>,
        #[arg(long)]
        negative_pairs: Option<usize>,
        #[arg(long)]
        noise_rate: Option<f64>,
        #[arg(long)]
        sentences_per_pair: Option<usize>,
        /// Full generator spec as JSON; flags above override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Every enabled stage of the manifest in order, stopping at the first failure.
    RunAll {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct PraArgs {
    #[arg(long, default_value_t = pathsift::walk::DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long, default_value_t = pathsift::walk::DEFAULT_MIN_SUPPORT)]
    min_support: usize,
    #[arg(long, default_value_t = pathsift::walk::DEFAULT_FANOUT_CAP)]
    fanout_cap: usize,
    #[arg(long, default_value_t = pathsift::logistic::DEFAULT_L2)]
    l2: f64,
    #[arg(long, default_value_t = pathsift::pra::DEFAULT_NEG_RATIO)]
    neg_ratio: f64,
    #[arg(long, default_value_t = 0, env = "PATHSIFT_PRA_SEED")]
    seed: u64,
}

impl PraArgs {
    fn config(&self) -> PraConfig {
        PraConfig {
            search: PathSearch {
                max_len: self.max_len,
                min_support: self.min_support,
                fanout_cap: self.fanout_cap,
                held_out_relation: None,
            },
            logistic: LogisticConfig { l2: self.l2, ..LogisticConfig::default() },
            neg_ratio: self.neg_ratio,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long, default_value_t = pathsift::labeler::DEFAULT_MAX_GAP)]
    max_gap: usize,
    #[arg(long, default_value_t = pathsift::labeler::DEFAULT_COMMON_PAIR_MAX)]
    common_pair_max: usize,
    /// Cap on negative pairs; all admissible pairs when absent.
    #[arg(long)]
    negative_pairs: Option<usize>,
    #[arg(long, default_value_t = 0, env = "PATHSIFT_LABEL_SEED")]
    seed: u64,
}

impl LabelArgs {
    fn config(&self) -> LabelConfig {
        LabelConfig {
            filter: FilterConfig { max_gap: self.max_gap, common_pair_max: self.common_pair_max },
            negative_pairs: self.negative_pairs,
            seed: self.seed,
        }
    }
}

/// Runs one stage and writes its summary; errors carry the stage name.
fn stage<T>(name: &str, summary: &Path, body: impl FnOnce(&mut Stage) -> Result<T>) -> Result<T> {
    let mut st = Stage::new(name);
    let value = body(&mut st).with_context(|| format!("stage {name} failed"))?;
    st.finish(summary).with_context(|| format!("stage {name} failed"))?;
    Ok(value)
}

fn run_all(m: &Manifest) -> Result<()> {
    let sums = m.run_dir.join("summaries");
    let s = &m.stages;
    if s.kg_stats {
        let stats = stage("kg-stats", &sums.join("kg-stats.json"), |st| {
            commands::kg_stats(st, &m.kb, Some(&m.run_dir.join("kg_stats.json")))
        })?;
        eprintln!("kg-stats: {} triples, {} entities", stats.triples, stats.entities);
    }
    for rel in &m.relations {
        let dir = m.run_dir.join(rel);
        let model = dir.join("pra_model.txt");
        let labeled = dir.join("labeled.jsonl");
        if s.pra_train {
            stage("pra-train", &sums.join(format!("pra-train.{rel}.json")), |st| {
                commands::pra_train(st, &m.kb, rel, &m.pra_config(), &model, Some(&dir.join("pra_paths.txt")))
            })?;
            eprintln!("pra-train: {rel}");
        }
        if s.label {
            stage("label", &sums.join(format!("label.{rel}.json")), |st| {
                commands::label(st, &m.kb, &m.corpus, rel, &m.label_config(), &labeled, Some(&dir.join("removed.jsonl")))
            })?;
            eprintln!("label: {rel}");
        }
        if s.fn_detect && s.pra_train && s.label {
            let report = stage("fn-detect", &sums.join(format!("fn-detect.{rel}.json")), |st| {
                commands::fn_detect(st, &m.kb, &model, &labeled, &dir.join("fn_report.json"))
            })?;
            eprintln!("fn-detect: {rel}: {} pairs flagged", report.flagged.len());
        }
    }
    if s.evaluate {
        let report = stage("evaluate", &sums.join("evaluate.json"), |st| commands::evaluate(st, m))?;
        print!("{}", report.to_table());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let summary_for = |out: &Path| cli.summary.clone().unwrap_or_else(|| default_summary_path(out));
    match &cli.command {
        Command::KgStats { kb, out } => {
            let path = cli.summary.clone().or_else(|| out.as_deref().map(default_summary_path));
            let mut st = Stage::new("kg-stats");
            let stats = commands::kg_stats(&mut st, kb, out.as_deref()).context("stage kg-stats failed")?;
            if let Some(p) = path {
                st.finish(&p)?;
            }
            print!("{stats}");
        }
        Command::PraTrain { kb, relation, pra, out } => {
            stage("pra-train", &summary_for(out), |st| commands::pra_train(st, kb, relation, &pra.config(), out, None))?;
        }
        Command::PraPaths { model, positive } => {
            let mut st = Stage::new("pra-paths");
            let text = commands::pra_paths(&mut st, model, *positive).context("stage pra-paths failed")?;
            if let Some(p) = &cli.summary {
                st.finish(p)?;
            }
            print!("{text}");
        }
        Command::FnDetect { kb, model, dataset, out } => {
            let report = stage("fn-detect", &summary_for(out), |st| commands::fn_detect(st, kb, model, dataset, out))?;
            eprintln!("{} pairs flagged", report.flagged.len());
        }
        Command::Label { kb, corpus, relation, labeling, out, removed } => {
            stage("label", &summary_for(out), |st| {
                commands::label(st, kb, corpus, relation, &labeling.config(), out, removed.as_deref())
            })?;
        }
        Command::Reduce { kb, dataset, report, out } => {
            stage("reduce", &summary_for(out), |st| commands::reduce(st, kb, dataset, report, out))?;
        }
        Command::RandomReduce { kb, dataset, reference, seed, out } => {
            stage("random-reduce", &summary_for(out), |st| commands::random_reduce(st, kb, dataset, reference, *seed, out))?;
        }
        Command::AdjustBias { kb, dataset, ratio, seed, out } => {
            stage("adjust-bias", &summary_for(out), |st| commands::adjust_bias(st, kb, dataset, *ratio, *seed, out))?;
        }
        Command::TrainExtractor { kb, dataset, l2, seed, out, predict, predictions } => {
            let cfg = LogisticConfig { l2: *l2, ..LogisticConfig::default() };
            let predict = predict.as_deref().zip(predictions.as_deref());
            stage("train-extractor", &summary_for(out), |st| {
                commands::train_extractor(st, kb, dataset, &cfg, *seed, out, predict)
            })?;
        }
        Command::Evaluate { manifest } => {
            let m = Manifest::load(manifest).context("stage evaluate failed")?;
            let path = cli.summary.clone().unwrap_or_else(|| m.run_dir.join("summaries").join("evaluate.json"));
            let report = stage("evaluate", &path, |st| commands::evaluate(st, &m))?;
            print!("{}", report.to_table());
        }
        Command::Synth { out_dir, seed, planted, decoys, negative_pairs, noise_rate, sentences_per_pair, spec } => {
            let mut s = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(p).with_context(|| format!("stage synth failed: cannot read spec file {}", p.display()))?;
                    let mut s: SynthSpec = serde_json::from_str(&text).with_context(|| format!("stage synth failed: invalid spec file {}", p.display()))?;
                    s.seed = *seed;
                    s
                }
                None => SynthSpec::standard(*seed),
            };
            if let Some(v) = planted {
                s.planted = *v;
            }
            if let Some(v) = decoys {
                s.decoys = *v;
            }
            if let Some(v) = negative_pairs {
                s.negative_pairs = *v;
            }
            if let Some(v) = noise_rate {
                s.noise_rate = *v;
            }
            if let Some(v) = sentences_per_pair {
                s.sentences_per_pair = *v;
            }
            let path = cli.summary.clone().unwrap_or_else(|| out_dir.join("synth.summary.json"));
            stage("synth", &path, |st| commands::synth(st, &s, out_dir))?;
        }
        Command::RunAll { manifest } => {
            let m = Manifest::load(manifest).context("stage run-all failed")?;
            run_all(&m)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
