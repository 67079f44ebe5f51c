//! Stage implementations shared by the individual subcommands and `run-all`.

use std::fmt::Write as _;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use pathsift::eval::{self, DatasetConfig, EvalReport, LabelConfig};
use pathsift::extractor::{self, ExtractorModel};
use pathsift::filter::{self, ReductionReport};
use pathsift::kg::{self, GraphStats};
use pathsift::labeler::{self, Criterion, Label};
use pathsift::logistic::LogisticConfig;
use pathsift::pra::{self, PathModel, PraConfig};
use pathsift::synth::{self, SynthSpec};
use pathsift::{KnowledgeGraph, LabeledDataset, Sentence};

use crate::manifest::Manifest;
use crate::summary::Stage;

pub fn load_kb(st: &mut Stage, path: &Path) -> Result<KnowledgeGraph> {
    let text = st.read("kb", path)?;
    kg::read_triples(Cursor::new(text)).with_context(|| format!("invalid kb file {}", path.display()))
}

fn load_corpus(st: &mut Stage, path: &Path) -> Result<Vec<Sentence>> {
    let text = st.read("corpus", path)?;
    labeler::read_corpus(Cursor::new(text)).with_context(|| format!("invalid corpus file {}", path.display()))
}

fn load_dataset(st: &mut Stage, g: &KnowledgeGraph, path: &Path) -> Result<LabeledDataset> {
    let text = st.read("dataset", path)?;
    LabeledDataset::read_jsonl(g, "", Cursor::new(text)).with_context(|| format!("invalid dataset file {}", path.display()))
}

fn load_model(st: &mut Stage, path: &Path) -> Result<PathModel<f64>> {
    let text = st.read("model", path)?;
    PathModel::from_text(&text).with_context(|| format!("invalid model file {}", path.display()))
}

fn write_dataset(st: &mut Stage, g: &KnowledgeGraph, ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    ds.write_jsonl(g, &mut buf)?;
    st.write(path, &buf)
}

fn dataset_counts(st: &mut Stage, prefix: &str, ds: &LabeledDataset) {
    st.count(&format!("{prefix}positives"), ds.positives());
    st.count(&format!("{prefix}negatives"), ds.negatives());
}

pub fn kg_stats(st: &mut Stage, kb: &Path, out: Option<&Path>) -> Result<GraphStats> {
    let g = load_kb(st, kb)?;
    let stats = g.stats();
    st.count("triples", stats.triples).count("entities", stats.entities).count("relations", stats.relations.len());
    st.count("self_loops", stats.self_loops);
    if let Some(out) = out {
        let mut text = serde_json::to_string_pretty(&stats)?;
        text.push('\n');
        st.write(out, text.as_bytes())?;
    }
    Ok(stats)
}

pub fn pra_train(st: &mut Stage, kb: &Path, relation: &str, cfg: &PraConfig, out: &Path, paths_out: Option<&Path>) -> Result<()> {
    let g = load_kb(st, kb)?;
    st.relation(relation).seed(cfg.seed);
    st.param("max_len", cfg.search.max_len).param("min_support", cfg.search.min_support);
    st.param("fanout_cap", cfg.search.fanout_cap).param("l2", cfg.logistic.l2).param("neg_ratio", cfg.neg_ratio);
    let outcome = pra::train_path_model::<f64>(&g, relation, cfg)?;
    st.count("positives", outcome.positives).count("negatives", outcome.negatives);
    st.count("negative_shortfall", outcome.negative_shortfall).count("candidate_paths", outcome.candidate_paths);
    st.count("truncated_frontiers", outcome.truncated_frontiers).count("iterations", outcome.iterations);
    st.count("converged", outcome.converged).count("features", outcome.model.entries.len());
    st.count("positive_paths", pra::select_positive_paths(&outcome.model).len());
    st.write(out, outcome.model.to_text().as_bytes())?;
    if let Some(p) = paths_out {
        st.write(p, render_paths(&outcome.model, false).as_bytes())?;
    }
    Ok(())
}

/// Learned paths, highest weight first, in logical notation.
pub fn render_paths(model: &PathModel<f64>, positive_only: bool) -> String {
    let mut out = String::new();
    writeln!(out, "Relation: {}", model.relation).unwrap();
    writeln!(out, "{:>10}  Path", "Weight").unwrap();
    for (path, w) in &model.entries {
        if positive_only && *w <= 0.0 {
            continue;
        }
        writeln!(out, "{w:>10.2}  {path}").unwrap();
    }
    out
}

pub fn pra_paths(st: &mut Stage, model: &Path, positive_only: bool) -> Result<String> {
    let m = load_model(st, model)?;
    st.relation(&m.relation).count("paths", m.entries.len());
    Ok(render_paths(&m, positive_only))
}

pub fn label(
    st: &mut Stage,
    kb: &Path,
    corpus: &Path,
    relation: &str,
    cfg: &LabelConfig,
    out: &Path,
    removed_out: Option<&Path>,
) -> Result<()> {
    let g = load_kb(st, kb)?;
    let sentences = load_corpus(st, corpus)?;
    st.relation(relation).seed(cfg.seed);
    st.param("max_gap", cfg.filter.max_gap).param("common_pair_max", cfg.filter.common_pair_max);
    st.param("negative_pairs", cfg.negative_pairs);
    let outcome = eval::distant_labels(&g, relation, &sentences, cfg)?;
    st.count("sentences", sentences.len());
    dataset_counts(st, "", &outcome.kept);
    st.count("bias", outcome.kept.bias()).count("removed", outcome.removed.len());
    for c in [Criterion::RepeatedPositivePair, Criterion::MixedPolarity, Criterion::WideGap, Criterion::CommonPair] {
        let key = serde_json::to_value(c)?.as_str().unwrap_or_default().to_owned();
        st.count(&format!("removed.{key}"), outcome.removed_by(c));
    }
    write_dataset(st, &g, &outcome.kept, out)?;
    if let Some(p) = removed_out {
        let removed = LabeledDataset::new(relation, outcome.removed);
        write_dataset(st, &g, &removed, p)?;
    }
    Ok(())
}

pub fn fn_detect(st: &mut Stage, kb: &Path, model: &Path, dataset: &Path, out: &Path) -> Result<ReductionReport> {
    let g = load_kb(st, kb)?;
    let m = load_model(st, model)?;
    let ds = load_dataset(st, &g, dataset)?;
    st.relation(&m.relation);
    let paths: Vec<_> = pra::select_positive_paths(&m).into_iter().map(|(p, _)| p).collect();
    let mut report = filter::detect_false_negatives(&g, &paths, &ds.pairs_with(Label::Negative));
    let reduced = filter::pra_reduce_recorded(&ds, &mut report);
    st.count("paths", paths.len()).count("negative_pairs", ds.pairs_with(Label::Negative).len());
    st.count("flagged_pairs", report.flagged.len()).count("flagged_examples", report.removed_examples);
    st.count("bias_after_removal", reduced.bias());
    if let Some(w) = &report.warning {
        st.count("warning", w);
    }
    let mut text = serde_json::to_string_pretty(&report.to_json(&g))?;
    text.push('\n');
    st.write(out, text.as_bytes())?;
    Ok(report)
}

pub fn reduce(st: &mut Stage, kb: &Path, dataset: &Path, report: &Path, out: &Path) -> Result<()> {
    let g = load_kb(st, kb)?;
    let ds = load_dataset(st, &g, dataset)?;
    let text = st.read("report", report)?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("invalid report file {}", report.display()))?;
    let report = ReductionReport::from_json(&g, &value)?;
    let reduced = filter::pra_reduce(&ds, &report);
    st.relation(&ds.relation);
    dataset_counts(st, "before.", &ds);
    dataset_counts(st, "after.", &reduced);
    write_dataset(st, &g, &reduced, out)
}

pub fn random_reduce(st: &mut Stage, kb: &Path, dataset: &Path, reference: &Path, seed: u64, out: &Path) -> Result<()> {
    let g = load_kb(st, kb)?;
    let ds = load_dataset(st, &g, dataset)?;
    let reference = load_dataset(st, &g, reference)?;
    st.relation(&ds.relation).seed(seed);
    let reduced = filter::random_reduce(&ds, &reference, seed)?;
    dataset_counts(st, "before.", &ds);
    dataset_counts(st, "after.", &reduced);
    write_dataset(st, &g, &reduced, out)
}

pub fn adjust_bias(st: &mut Stage, kb: &Path, dataset: &Path, ratio: f64, seed: u64, out: &Path) -> Result<()> {
    let g = load_kb(st, kb)?;
    let ds = load_dataset(st, &g, dataset)?;
    st.relation(&ds.relation).seed(seed).param("ratio", ratio);
    let adjusted = filter::adjust_bias(&ds, ratio, seed)?;
    dataset_counts(st, "before.", &ds);
    dataset_counts(st, "after.", &adjusted);
    write_dataset(st, &g, &adjusted, out)
}

pub fn train_extractor(
    st: &mut Stage,
    kb: &Path,
    dataset: &Path,
    cfg: &LogisticConfig,
    seed: u64,
    out: &Path,
    predict: Option<(&Path, &Path)>,
) -> Result<()> {
    let g = load_kb(st, kb)?;
    let ds = load_dataset(st, &g, dataset)?;
    st.relation(&ds.relation).seed(seed).param("l2", cfg.l2);
    let model: ExtractorModel<f64> = extractor::train_extractor_with(&ds, cfg, seed)?;
    dataset_counts(st, "", &ds);
    st.count("features", model.weights.len()).count("iterations", model.iterations).count("converged", model.converged);
    st.write(out, model.to_text().as_bytes())?;
    if let Some((test, preds_out)) = predict {
        let test = load_dataset(st, &g, test)?;
        let preds = extractor::predict_pairs(&model, &test);
        st.count("predicted_pairs", preds.len()).count("predicted_positive", preds.iter().filter(|p| p.label).count());
        let mut buf = Vec::new();
        extractor::write_predictions_csv(&g, &preds, &mut buf)?;
        st.write(preds_out, &buf)?;
    }
    Ok(())
}

/// Output locations of an evaluation under the run directory.
pub struct EvalPaths {
    pub report: PathBuf,
    pub table: PathBuf,
    pub curves: PathBuf,
}

impl EvalPaths {
    pub fn under(run_dir: &Path) -> Self {
        let dir = run_dir.join("eval");
        Self { report: dir.join("report.json"), table: dir.join("table.txt"), curves: dir.join("curves") }
    }
}

pub fn evaluate(st: &mut Stage, m: &Manifest) -> Result<EvalReport> {
    let g = load_kb(st, &m.kb)?;
    let corpus = load_corpus(st, &m.corpus)?;
    let cfg = m.eval_config();
    st.seed(cfg.seed).param("relations", &m.relations).param("folds", cfg.folds);
    st.param("bias_ratio", cfg.bias_ratio).param("average", cfg.average).param("disable_pra", cfg.disable_pra);
    st.param("pra_seed", cfg.pra.seed).param("label_seed", cfg.labeling.seed).param("extractor_l2", cfg.extractor.l2);
    for r in &m.relations {
        if !g.has_relation(r) {
            bail!("relation {r} has no edges in the kb");
        }
    }
    let report = eval::run_comparison(&g, &corpus, &m.relations, &cfg)?;
    let paths = EvalPaths::under(&m.run_dir);
    let mut json = report.to_json_pretty();
    json.push('\n');
    st.write(&paths.report, json.as_bytes())?;
    st.write(&paths.table, report.to_table().as_bytes())?;
    for r in &report.relations {
        for (config, res) in &r.results {
            let file = paths.curves.join(format!("{}.{}.csv", r.relation, config.slug()));
            st.write(&file, eval::write_curve_csv(&res.pr_curve).as_bytes())?;
        }
    }
    st.count("relations_evaluated", report.relations.len()).count("relations_skipped", report.skipped.len());
    for c in DatasetConfig::ALL {
        let o = &report.overall[&c];
        st.count(&format!("{}.f1", c.slug()), o.f1);
        st.count(&format!("{}.false_negatives", c.slug()), o.false_negatives);
    }
    Ok(report)
}

pub fn synth(st: &mut Stage, spec: &SynthSpec, out_dir: &Path) -> Result<()> {
    st.seed(spec.seed).relation(&spec.target);
    st.param("planted", spec.planted).param("decoys", spec.decoys).param("noise_rate", spec.noise_rate);
    let inst = synth::generate(spec)?;
    let mut corpus = Vec::new();
    labeler::write_corpus(&inst.corpus, &mut corpus)?;
    st.write(&out_dir.join("kb.tsv"), inst.graph.to_triple_string().as_bytes())?;
    st.write(&out_dir.join("corpus.jsonl"), &corpus)?;
    let mut truth = inst.truth.to_json_pretty();
    truth.push('\n');
    st.write(&out_dir.join("truth.json"), truth.as_bytes())?;
    let mut spec_json = serde_json::to_string_pretty(spec)?;
    spec_json.push('\n');
    st.write(&out_dir.join("spec.json"), spec_json.as_bytes())?;
    let manifest = Manifest::for_synth(&spec.target, spec.seed);
    st.write(&out_dir.join("manifest.toml"), manifest.to_toml().as_bytes())?;
    st.count("triples", inst.graph.len()).count("entities", inst.graph.num_entities());
    st.count("sentences", inst.corpus.len()).count("planted", inst.truth.planted.len());
    st.count("planted_witnessed", inst.truth.planted_witnessed.len()).count("decoys", inst.truth.decoys.len());
    st.count("background", inst.truth.background.len()).count("positives", inst.truth.positives.len());
    Ok(())
}
