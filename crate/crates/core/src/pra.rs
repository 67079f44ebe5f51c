//! Per-relation PRA training: sample a link-prediction training set, discover
//! connecting paths, compute walk features and fit the path weights.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Pair, RelationId};
use crate::logistic::{self, LogisticConfig};
use crate::path::RelationPath;
use crate::sampling::sample_cross_product;
use crate::scalar::Real;
use crate::walk::{self, FeatureMatrix, PathSearch};

pub const DEFAULT_NEG_RATIO: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PraTrainingSet {
    pub relation: String,
    pub positives: Vec<Pair>,
    pub negatives: Vec<Pair>,
    pub seed: u64,
    pub neg_ratio: f64,
    /// Requested negatives that could not be drawn.
    pub shortfall: usize,
}

/// Positives are every edge of `relation`; negatives are drawn from
/// (sources of positives) × (objects of positives) minus the positives.
pub fn build_pra_training_set(g: &KnowledgeGraph, relation: &str, neg_ratio: f64, seed: u64) -> Result<PraTrainingSet> {
    if !(neg_ratio > 0.0 && neg_ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("neg_ratio must be positive, got {neg_ratio}")));
    }
    let positives = g.edges_of(relation);
    if positives.is_empty() {
        return Err(Error::UnknownRelation(relation.to_owned()));
    }
    let sources: BTreeSet<EntityId> = positives.iter().map(|p| p.0).collect();
    let objects: BTreeSet<EntityId> = positives.iter().map(|p| p.1).collect();
    let excluded: HashSet<Pair> = positives.iter().copied().collect();
    let wanted = (neg_ratio * positives.len() as f64).ceil() as usize;
    let (negatives, _) = sample_cross_product(&sources, &objects, &excluded, wanted, seed);
    Ok(PraTrainingSet {
        relation: relation.to_owned(),
        shortfall: wanted - negatives.len(),
        negatives: negatives.into_iter().collect(),
        positives,
        seed,
        neg_ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub max_len: usize,
    pub min_support: usize,
    pub l2: f64,
    pub seed: u64,
}

/// Learned path weights for one target relation, sorted by descending weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PathModel<T> {
    pub relation: String,
    pub entries: Vec<(RelationPath, T)>,
    pub bias: T,
    pub meta: ModelMeta,
}

impl<T: Real> PathModel<T> {
    pub fn new(relation: impl Into<String>, mut entries: Vec<(RelationPath, T)>, bias: T, meta: ModelMeta) -> Self {
        entries.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite weights").then_with(|| a.0.cmp(&b.0)));
        Self { relation: relation.into(), entries, bias, meta }
    }

    /// Text form; floats carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let m = &self.meta;
        writeln!(out, "relation: {}", self.relation).unwrap();
        writeln!(out, "bias: {}", fmt_float(self.bias.as_f64())).unwrap();
        writeln!(out, "meta: max_len={} min_support={} l2={} seed={}", m.max_len, m.min_support, fmt_float(m.l2), m.seed).unwrap();
        for (path, w) in &self.entries {
            writeln!(out, "{}\t{}", fmt_float(w.as_f64()), path.to_machine()).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut relation = None;
        let mut bias = None;
        let mut meta = None;
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(v) = line.strip_prefix("relation: ") {
                relation = Some(v.trim().to_owned());
            } else if let Some(v) = line.strip_prefix("bias: ") {
                bias = Some(parse_float::<T>(v).ok_or_else(|| err(format!("bad bias `{v}`")))?);
            } else if let Some(v) = line.strip_prefix("meta: ") {
                meta = Some(parse_meta(v).ok_or_else(|| err(format!("bad meta `{v}`")))?);
            } else {
                let (w, p) = line.split_once('\t').ok_or_else(|| err("expected `<weight>\\t<path>`".into()))?;
                let w = parse_float::<T>(w).ok_or_else(|| err(format!("bad weight `{w}`")))?;
                let p = RelationPath::parse_machine(p).map_err(|e| err(e.to_string()))?;
                entries.push((p, w));
            }
        }
        let missing = |what: &str| Error::Parse { line: 0, message: format!("missing `{what}` header") };
        Ok(Self::new(
            relation.ok_or_else(|| missing("relation"))?,
            entries,
            bias.ok_or_else(|| missing("bias"))?,
            meta.ok_or_else(|| missing("meta"))?,
        ))
    }
}

pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn parse_float<T: Real>(s: &str) -> Option<T> {
    s.trim().parse::<f64>().ok().and_then(T::from_f64)
}

fn parse_meta(v: &str) -> Option<ModelMeta> {
    let mut meta = ModelMeta { max_len: 0, min_support: 0, l2: 0.0, seed: 0 };
    for kv in v.split_whitespace() {
        let (k, val) = kv.split_once('=')?;
        match k {
            "max_len" => meta.max_len = val.parse().ok()?,
            "min_support" => meta.min_support = val.parse().ok()?,
            "l2" => meta.l2 = val.parse().ok()?,
            "seed" => meta.seed = val.parse().ok()?,
            _ => {}
        }
    }
    Some(meta)
}

/// Model fitted from a feature matrix, with optimizer diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PathModelFit<T> {
    pub model: PathModel<T>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: T,
}

/// Fits path weights to `features` (one column per path).
pub fn train_logistic<T: Real>(
    relation: &str,
    features: &FeatureMatrix<T>,
    labels: &[bool],
    cfg: &LogisticConfig,
    meta: ModelMeta,
) -> Result<PathModelFit<T>> {
    let fit = logistic::fit(features, labels, cfg)?;
    let entries = features.paths().iter().cloned().zip(fit.weights.iter().copied()).collect();
    Ok(PathModelFit {
        model: PathModel::new(relation, entries, fit.bias, meta),
        iterations: fit.iterations,
        converged: fit.converged,
        objective: fit.objective,
    })
}

/// Entries with strictly positive weight, order preserved.
pub fn select_positive_paths<T: Real>(model: &PathModel<T>) -> Vec<(RelationPath, T)> {
    model.entries.iter().filter(|(_, w)| *w > T::zero()).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PraConfig {
    pub search: PathSearch,
    pub logistic: LogisticConfig,
    pub neg_ratio: f64,
    pub seed: u64,
}

impl Default for PraConfig {
    fn default() -> Self {
        Self {
            search: PathSearch::default(),
            logistic: LogisticConfig::default(),
            neg_ratio: DEFAULT_NEG_RATIO,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PraOutcome<T> {
    pub model: PathModel<T>,
    pub positives: usize,
    pub negatives: usize,
    pub negative_shortfall: usize,
    pub candidate_paths: usize,
    pub truncated_frontiers: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Full PRA training for one target relation on `g`.
///
/// Each training pair's own target edge is hidden while discovering paths and
/// computing its features; the bare one-step target path is never a feature.
pub fn train_path_model<T: Real>(g: &KnowledgeGraph, relation: &str, cfg: &PraConfig) -> Result<PraOutcome<T>> {
    let ts = build_pra_training_set(g, relation, cfg.neg_ratio, cfg.seed)?;
    let search = PathSearch { held_out_relation: Some(relation.to_owned()), ..cfg.search.clone() };
    let discovery = walk::discover_paths(g, &ts.positives, &search)?;
    let bare = RelationPath::single(RelationId::new(relation)?);
    let candidates: Vec<RelationPath> = discovery.paths.into_iter().filter(|p| *p != bare).collect();
    let meta = ModelMeta {
        max_len: cfg.search.max_len,
        min_support: cfg.search.min_support,
        l2: cfg.logistic.l2,
        seed: cfg.seed,
    };
    let mut outcome = PraOutcome {
        model: PathModel::new(relation, Vec::new(), T::zero(), meta.clone()),
        positives: ts.positives.len(),
        negatives: ts.negatives.len(),
        negative_shortfall: ts.shortfall,
        candidate_paths: candidates.len(),
        truncated_frontiers: discovery.truncated,
        iterations: 0,
        converged: true,
    };
    if candidates.is_empty() || ts.negatives.is_empty() {
        return Ok(outcome);
    }

    let pairs: Vec<Pair> = ts.positives.iter().chain(&ts.negatives).copied().collect();
    let labels: Vec<bool> = (0..pairs.len()).map(|i| i < ts.positives.len()).collect();
    let features = walk::build_feature_matrix_excluding::<T>(g, &pairs, &candidates, Some(relation))?;
    let fit = train_logistic(relation, &features, &labels, &cfg.logistic, meta)?;
    outcome.model = fit.model;
    outcome.iterations = fit.iterations;
    outcome.converged = fit.converged;
    Ok(outcome)
}
