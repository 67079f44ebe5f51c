//! Held-out evaluation: k-fold splits over entity pairs, entity-level
//! precision/recall, PR curves, and the three-way dataset comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{self, PairPrediction};
use crate::filter::{self, ReductionReport};
use crate::kg::{KnowledgeGraph, Pair};
use crate::labeler::{self, FilterConfig, Label, LabeledDataset, Sentence};
use crate::logistic::LogisticConfig;
use crate::path::RelationPath;
use crate::pra::{self, PraConfig};
use crate::sampling;
use crate::scalar::Real;

pub const DEFAULT_FOLDS: usize = 4;
pub const DEFAULT_BIAS_RATIO: f64 = 2.0;
/// Relations with fewer labelled pairs than this are skipped.
pub const MIN_RELATION_PAIRS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignments: BTreeMap<Pair, usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn fold_of(&self, pair: &Pair) -> Option<usize> {
        self.assignments.get(pair).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn members(&self, fold: usize) -> BTreeSet<Pair> {
        self.assignments.iter().filter(|(_, &f)| f == fold).map(|(&p, _)| p).collect()
    }
}

/// Seeded balanced partition of `pairs` into `k` folds.
pub fn make_folds(pairs: &BTreeSet<Pair>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k == 0 || pairs.len() < k {
        return Err(Error::InvalidArgument(format!("cannot split {} pairs into {k} folds", pairs.len())));
    }
    let mut order: Vec<Pair> = pairs.iter().copied().collect();
    order.shuffle(&mut sampling::rng(seed));
    let assignments = order.into_iter().enumerate().map(|(i, p)| (p, i % k)).collect();
    Ok(FoldPlan { assignments, k, seed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Nothing predicted positive, or an empty gold set.
    pub degenerate: bool,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn prf_from_counts(correct: usize, predicted: usize, gold: usize) -> Prf {
    let precision = if predicted == 0 { 0.0 } else { correct as f64 / predicted as f64 };
    let recall = if gold == 0 { 0.0 } else { correct as f64 / gold as f64 };
    Prf { precision, recall, f1: f1(precision, recall), degenerate: predicted == 0 || gold == 0 }
}

/// Entity-level scores of the positively labelled predictions.
pub fn entity_prf<T: Real>(predictions: &[PairPrediction<T>], gold: &BTreeSet<Pair>) -> Prf {
    let predicted: BTreeSet<Pair> = predictions.iter().filter(|p| p.label).map(|p| p.pair).collect();
    prf_from_counts(predicted.intersection(gold).count(), predicted.len(), gold.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
}

/// One point per distinct probability, swept from high to low; tied
/// predictions enter together.
pub fn pr_curve<T: Real>(predictions: &[PairPrediction<T>], gold: &BTreeSet<Pair>) -> Vec<CurvePoint> {
    let mut best: BTreeMap<Pair, T> = BTreeMap::new();
    for p in predictions {
        best.entry(p.pair).and_modify(|b| *b = b.max(p.probability)).or_insert(p.probability);
    }
    let mut scored: Vec<(T, bool)> = best.into_iter().map(|(pair, prob)| (prob, gold.contains(&pair))).collect();
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite probabilities"));

    let mut points = Vec::new();
    let (mut predicted, mut correct) = (0, 0);
    let mut i = 0;
    while i < scored.len() {
        let t = scored[i].0;
        while i < scored.len() && scored[i].0 == t {
            predicted += 1;
            correct += usize::from(scored[i].1);
            i += 1;
        }
        let prf = prf_from_counts(correct, predicted, gold.len());
        points.push(CurvePoint { threshold: t.as_f64(), recall: prf.recall, precision: prf.precision });
    }
    points
}

pub fn write_curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("threshold,recall,precision\n");
    for p in points {
        writeln!(out, "{},{},{}", p.threshold, p.recall, p.precision).unwrap();
    }
    out
}

/// The three training configurations compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetConfig {
    Unfiltered,
    RandomReduced,
    PraReduced,
}

impl DatasetConfig {
    pub const ALL: [DatasetConfig; 3] = [DatasetConfig::Unfiltered, DatasetConfig::RandomReduced, DatasetConfig::PraReduced];

    pub fn title(self) -> &'static str {
        match self {
            DatasetConfig::Unfiltered => "Unfiltered",
            DatasetConfig::RandomReduced => "Random-reduced",
            DatasetConfig::PraReduced => "PRA-reduced",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            DatasetConfig::Unfiltered => "unfiltered",
            DatasetConfig::RandomReduced => "random_reduced",
            DatasetConfig::PraReduced => "pra_reduced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelConfig {
    pub filter: FilterConfig,
    /// Negative pairs to draw; `None` takes every admissible combination.
    pub negative_pairs: Option<usize>,
    pub seed: u64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { filter: FilterConfig::default(), negative_pairs: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub pra: PraConfig,
    pub labeling: LabelConfig,
    pub extractor: LogisticConfig,
    pub folds: usize,
    /// Negatives per positive after adjustment; `None` leaves the bias alone.
    pub bias_ratio: Option<f64>,
    pub average: Average,
    pub seed: u64,
    /// Forces an empty path list, making the PRA filter a no-op.
    pub disable_pra: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pra: PraConfig::default(),
            labeling: LabelConfig::default(),
            extractor: LogisticConfig { l2: extractor::DEFAULT_EXTRACTOR_L2, ..LogisticConfig::default() },
            folds: DEFAULT_FOLDS,
            bias_ratio: Some(DEFAULT_BIAS_RATIO),
            average: Average::Macro,
            seed: 0,
            disable_pra: false,
        }
    }
}

/// Distantly labelled, filtered examples for one relation.
pub fn distant_labels(kb: &KnowledgeGraph, relation: &str, corpus: &[Sentence], cfg: &LabelConfig) -> Result<labeler::FilterOutcome> {
    let positives = labeler::extract_positive_pairs(kb, relation)?;
    let every_edge: BTreeSet<Pair> = kb.edges_of(relation).into_iter().collect();
    let negatives = labeler::generate_negative_pairs_excluding(&positives, &every_edge, cfg.negative_pairs.unwrap_or(usize::MAX), cfg.seed);
    let labeled = labeler::label_corpus(kb, relation, corpus, &positives, &negatives);
    labeler::filter_examples(&labeled, &cfg.filter)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    pub positives: usize,
    pub negatives: usize,
}

impl From<&LabeledDataset> for Sizes {
    fn from(ds: &LabeledDataset) -> Self {
        Sizes { positives: ds.positives(), negatives: ds.negatives() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub base: Sizes,
    pub sizes: BTreeMap<DatasetConfig, Sizes>,
    pub paths_used: Vec<String>,
    pub flagged_pairs: usize,
    pub removed_examples: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
    pub predicted_positive: usize,
    /// Gold pairs predicted negative.
    pub false_negatives: usize,
    pub pr_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation: String,
    pub pairs: usize,
    pub gold_pairs: usize,
    pub results: BTreeMap<DatasetConfig, ConfigResult>,
    pub folds: Vec<FoldRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub average: Average,
    pub folds: usize,
    pub bias_ratio: Option<f64>,
    pub relations: Vec<RelationReport>,
    pub skipped: BTreeMap<String, String>,
    pub overall: BTreeMap<DatasetConfig, OverallResult>,
}

impl EvalReport {
    pub fn relation(&self, name: &str) -> Option<&RelationReport> {
        self.relations.iter().find(|r| r.relation == name)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table: one row per relation plus the overall row.
    pub fn to_table(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.relations.iter().map(|r| r.relation.len()).max().unwrap_or(0).max(8);
        write!(f, "{:>width$} |", "")?;
        for c in DatasetConfig::ALL {
            write!(f, " {:^23} |", c.title())?;
        }
        writeln!(f)?;
        write!(f, "{:>width$} |", "")?;
        for _ in DatasetConfig::ALL {
            write!(f, " {:>7}{:>8}{:>8} |", "Prec.", "Rec.", "F1")?;
        }
        writeln!(f)?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, vals: Vec<(f64, f64, f64)>| -> fmt::Result {
            write!(f, "{name:>width$} |")?;
            for (p, r, f1) in vals {
                write!(f, " {:>7.2}{:>8.2}{:>8.2} |", 100.0 * p, 100.0 * r, 100.0 * f1)?;
            }
            writeln!(f)
        };
        let overall = DatasetConfig::ALL
            .iter()
            .map(|c| self.overall.get(c).map(|o| (o.precision, o.recall, o.f1)).unwrap_or_default())
            .collect();
        row(f, "Overall", overall)?;
        for r in &self.relations {
            let vals = DatasetConfig::ALL
                .iter()
                .map(|c| r.results.get(c).map(|o| (o.precision, o.recall, o.f1)).unwrap_or_default())
                .collect();
            row(f, &r.relation, vals)?;
        }
        for (name, why) in &self.skipped {
            writeln!(f, "skipped {name}: {why}")?;
        }
        Ok(())
    }
}

/// Paths the filter follows for one fold: positive-weight PRA paths learned on `view`.
fn learned_paths(view: &KnowledgeGraph, relation: &str, cfg: &EvalConfig, fold: usize) -> Result<Vec<RelationPath>> {
    if cfg.disable_pra {
        return Ok(Vec::new());
    }
    let pra_cfg = PraConfig { seed: cfg.pra.seed.wrapping_add(fold as u64), ..cfg.pra.clone() };
    let outcome = pra::train_path_model::<f64>(view, relation, &pra_cfg)?;
    Ok(pra::select_positive_paths(&outcome.model).into_iter().map(|(p, _)| p).collect())
}

struct FoldResult {
    record: FoldRecord,
    predictions: BTreeMap<DatasetConfig, Vec<PairPrediction<f64>>>,
}

fn run_fold(
    kb: &KnowledgeGraph,
    relation: &str,
    data: &LabeledDataset,
    plan: &FoldPlan,
    fold: usize,
    cfg: &EvalConfig,
) -> Result<FoldResult> {
    let test_pairs = plan.members(fold);
    let split = |held_out: bool| {
        LabeledDataset::new(
            relation,
            data.examples.iter().filter(|e| test_pairs.contains(&e.pair) == held_out).cloned().collect(),
        )
    };
    let (train, test) = (split(false), split(true));
    let mut notes = Vec::new();

    // Held-out pairs' target edges are hidden from both path learning and filtering.
    let view = kb.remove_relation_edges(relation, &test_pairs);
    let paths = learned_paths(&view, relation, cfg, fold).map_err(|e| e.in_stage("pra-train"))?;
    if paths.is_empty() {
        notes.push("no positive-weight paths".to_owned());
    }

    let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(fold as u64);
    let unfiltered = match cfg.bias_ratio {
        Some(r) if train.positives() > 0 && train.bias() >= r => {
            filter::adjust_bias(&train, r, seed).map_err(|e| e.in_stage("adjust-bias"))?
        }
        Some(r) => {
            notes.push(format!("bias 1:{:.3} already below 1:{r}; left unadjusted", train.bias()));
            train.clone()
        }
        None => train.clone(),
    };
    let negatives = unfiltered.pairs_with(Label::Negative);
    let mut report: ReductionReport = filter::detect_false_negatives(&view, &paths, &negatives);
    let pra_reduced = filter::pra_reduce_recorded(&unfiltered, &mut report);
    let random_reduced =
        filter::random_reduce(&unfiltered, &pra_reduced, seed ^ 0x9e37_79b9).map_err(|e| e.in_stage("random-reduce"))?;

    let datasets = [
        (DatasetConfig::Unfiltered, &unfiltered),
        (DatasetConfig::RandomReduced, &random_reduced),
        (DatasetConfig::PraReduced, &pra_reduced),
    ];
    let mut predictions = BTreeMap::new();
    let mut sizes = BTreeMap::new();
    for (config, ds) in datasets {
        sizes.insert(config, Sizes::from(ds));
        let model = extractor::train_extractor_with::<f64>(ds, &cfg.extractor, seed).map_err(|e| e.in_stage("train-extractor"))?;
        predictions.insert(config, extractor::predict_pairs(&model, &test));
    }

    Ok(FoldResult {
        record: FoldRecord {
            fold,
            train_pairs: plan.assignments.len() - test_pairs.len(),
            test_pairs: test_pairs.len(),
            base: Sizes::from(&train),
            sizes,
            paths_used: paths.iter().map(ToString::to_string).collect(),
            flagged_pairs: report.flagged.len(),
            removed_examples: report.removed_examples,
            notes,
        },
        predictions,
    })
}

/// Evaluates one relation; `Ok(Err(reason))` when it is skipped as degenerate.
pub fn evaluate_relation(
    kb: &KnowledgeGraph,
    relation: &str,
    corpus: &[Sentence],
    cfg: &EvalConfig,
) -> Result<std::result::Result<RelationReport, String>> {
    let labeled = distant_labels(kb, relation, corpus, &cfg.labeling).map_err(|e| e.in_stage("label"))?;
    let data = labeled.kept;
    let pairs = data.pairs();
    if pairs.len() < MIN_RELATION_PAIRS.max(cfg.folds) {
        return Ok(Err(format!("only {} labelled pairs", pairs.len())));
    }
    let plan = make_folds(&pairs, cfg.folds, cfg.seed).map_err(|e| e.in_stage("folds"))?;
    let folds: Vec<FoldResult> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| run_fold(kb, relation, &data, &plan, f, cfg))
        .collect::<Result<_>>()?;

    let gold = data.pairs_with(Label::Positive);
    let mut results = BTreeMap::new();
    for config in DatasetConfig::ALL {
        let preds: Vec<PairPrediction<f64>> = folds.iter().flat_map(|f| f.predictions[&config].iter().copied()).collect();
        let prf = entity_prf(&preds, &gold);
        let predicted_positive = preds.iter().filter(|p| p.label).count();
        let hits = preds.iter().filter(|p| p.label && gold.contains(&p.pair)).count();
        results.insert(
            config,
            ConfigResult {
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                degenerate: prf.degenerate,
                predicted_positive,
                false_negatives: gold.len() - hits,
                pr_curve: pr_curve(&preds, &gold),
            },
        );
    }
    Ok(Ok(RelationReport {
        relation: relation.to_owned(),
        pairs: pairs.len(),
        gold_pairs: gold.len(),
        results,
        folds: folds.into_iter().map(|f| f.record).collect(),
    }))
}

/// Runs the full comparison for every relation and aggregates the results.
pub fn run_comparison(kb: &KnowledgeGraph, corpus: &[Sentence], relations: &[String], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut reports = Vec::new();
    let mut skipped = BTreeMap::new();
    for relation in relations {
        match evaluate_relation(kb, relation, corpus, cfg)? {
            Ok(r) => reports.push(r),
            Err(why) => {
                skipped.insert(relation.clone(), why);
            }
        }
    }
    let overall = DatasetConfig::ALL.iter().map(|&c| (c, aggregate(&reports, c, cfg.average))).collect();
    Ok(EvalReport { average: cfg.average, folds: cfg.folds, bias_ratio: cfg.bias_ratio, relations: reports, skipped, overall })
}

fn aggregate(reports: &[RelationReport], config: DatasetConfig, average: Average) -> OverallResult {
    let results: Vec<(&RelationReport, &ConfigResult)> = reports.iter().map(|r| (r, &r.results[&config])).collect();
    let false_negatives = results.iter().map(|(_, c)| c.false_negatives).sum();
    if results.is_empty() {
        return OverallResult { precision: 0.0, recall: 0.0, f1: 0.0, false_negatives };
    }
    match average {
        Average::Macro => {
            let n = results.len() as f64;
            OverallResult {
                precision: results.iter().map(|(_, c)| c.precision).sum::<f64>() / n,
                recall: results.iter().map(|(_, c)| c.recall).sum::<f64>() / n,
                f1: results.iter().map(|(_, c)| c.f1).sum::<f64>() / n,
                false_negatives,
            }
        }
        Average::Micro => {
            let gold: usize = results.iter().map(|(r, _)| r.gold_pairs).sum();
            let predicted: usize = results.iter().map(|(_, c)| c.predicted_positive).sum();
            let correct: usize = results.iter().map(|(r, c)| r.gold_pairs - c.false_negatives).sum();
            let prf = prf_from_counts(correct, predicted, gold);
            OverallResult { precision: prf.precision, recall: prf.recall, f1: prf.f1, false_negatives }
        }
    }
}
