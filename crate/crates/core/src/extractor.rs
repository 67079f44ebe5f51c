//! Lightweight sentence-level relation classifier with pair-level max
//! aggregation: a pair is as likely as its most confident sentence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Pair};
use crate::labeler::{Label, LabeledDataset, LabeledExample};
use crate::logistic::{self, LogisticConfig, SparseMatrix};
use crate::pra::{fmt_float, parse_float};
use crate::scalar::Real;

pub const DEFAULT_EXTRACTOR_L2: f64 = 0.03;

const BOS: &str = "<s>";
const EOS: &str = "</s>";

fn gap_bucket(gap: isize) -> &'static str {
    match gap {
        g if g < 0 => "overlap",
        0 => "0",
        1 => "1",
        2 => "2",
        3..=5 => "3-5",
        _ => "6+",
    }
}

/// Binary feature names for one example.
///
/// Between-mention material uses stems when the sentence carries them.
pub fn featurize(example: &LabeledExample) -> BTreeSet<String> {
    let s = &example.sentence;
    let words: &[String] = s.stems.as_deref().unwrap_or(&s.tokens);
    let word = |i: isize| -> &str {
        if i < 0 {
            BOS
        } else {
            words.get(i as usize).map(String::as_str).unwrap_or(EOS)
        }
    };
    let (a, b) = example.spans;
    let (earlier, later) = if a.0 <= b.0 { (a, b) } else { (b, a) };

    let mut f = BTreeSet::new();
    let between: Vec<&str> = if later.0 > earlier.1 + 1 {
        words[earlier.1 + 1..later.0].iter().map(String::as_str).collect()
    } else {
        Vec::new()
    };
    for w in &between {
        f.insert(format!("btw:{w}"));
    }
    for w in between.windows(2) {
        f.insert(format!("bi:{}_{}", w[0], w[1]));
    }
    f.insert(format!("order:{}", if example.in_pair_order() { "fwd" } else { "rev" }));
    f.insert(format!("gap:{}", gap_bucket(example.gap())));
    for (tag, span) in [("first", a), ("second", b)] {
        f.insert(format!("{tag}-1:{}", word(span.0 as isize - 1)));
        f.insert(format!("{tag}+1:{}", word(span.1 as isize + 1)));
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorModel<T> {
    pub weights: BTreeMap<String, T>,
    pub bias: T,
    pub l2: f64,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> ExtractorModel<T> {
    pub fn sentence_probability(&self, example: &LabeledExample) -> T {
        let z = featurize(example)
            .iter()
            .filter_map(|name| self.weights.get(name))
            .fold(self.bias, |acc, &w| acc + w);
        logistic::sigmoid(z)
    }

    /// Same text family as path models: headers, then `<weight>\t<feature>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "model: extractor").unwrap();
        writeln!(out, "bias: {}", fmt_float(self.bias.as_f64())).unwrap();
        writeln!(out, "meta: l2={} seed={} iterations={} converged={}", fmt_float(self.l2), self.seed, self.iterations, self.converged).unwrap();
        for (name, w) in &self.weights {
            writeln!(out, "{}\t{}", fmt_float(w.as_f64()), name).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut model = Self {
            weights: BTreeMap::new(),
            bias: T::zero(),
            l2: 0.0,
            seed: 0,
            iterations: 0,
            converged: false,
        };
        let mut saw_header = false;
        for (idx, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse { line: idx + 1, message };
            if line.trim().is_empty() || line == "model: extractor" {
                saw_header |= line == "model: extractor";
                continue;
            }
            if let Some(v) = line.strip_prefix("bias: ") {
                model.bias = parse_float(v).ok_or_else(|| err(format!("bad bias `{v}`")))?;
            } else if let Some(v) = line.strip_prefix("meta: ") {
                for kv in v.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("l2", x)) => model.l2 = x.parse().map_err(|_| err(format!("bad l2 `{x}`")))?,
                        Some(("seed", x)) => model.seed = x.parse().map_err(|_| err(format!("bad seed `{x}`")))?,
                        Some(("iterations", x)) => model.iterations = x.parse().unwrap_or(0),
                        Some(("converged", x)) => model.converged = x == "true",
                        _ => {}
                    }
                }
            } else {
                let (w, name) = line.split_once('\t').ok_or_else(|| err("expected `<weight>\\t<feature>`".into()))?;
                let w = parse_float(w).ok_or_else(|| err(format!("bad weight `{w}`")))?;
                model.weights.insert(name.to_owned(), w);
            }
        }
        if !saw_header {
            return Err(Error::Parse { line: 1, message: "missing `model: extractor` header".into() });
        }
        Ok(model)
    }
}

pub fn train_extractor<T: Real>(ds: &LabeledDataset, l2: f64, seed: u64) -> Result<ExtractorModel<T>> {
    train_extractor_with(ds, &LogisticConfig { l2, ..LogisticConfig::default() }, seed)
}

pub fn train_extractor_with<T: Real>(ds: &LabeledDataset, cfg: &LogisticConfig, seed: u64) -> Result<ExtractorModel<T>> {
    let features: Vec<BTreeSet<String>> = ds.examples.par_iter().map(featurize).collect();
    let vocab: BTreeMap<&str, usize> = features
        .iter()
        .flatten()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, n)| (n, i))
        .collect();
    let mut x = SparseMatrix::new(vocab.len());
    for f in &features {
        x.push_row(f.iter().map(|n| (vocab[n.as_str()], T::one())));
    }
    let labels: Vec<bool> = ds.examples.iter().map(|e| e.label == Label::Positive).collect();
    let fit = logistic::fit(&x, &labels, cfg)?;
    let weights = vocab.keys().map(|n| n.to_string()).zip(fit.weights).collect();
    Ok(ExtractorModel { weights, bias: fit.bias, l2: cfg.l2, seed, iterations: fit.iterations, converged: fit.converged })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction<T> {
    pub pair: Pair,
    pub probability: T,
    pub label: bool,
}

/// One prediction per distinct pair of `ds`, in pair order.
pub fn predict_pairs<T: Real>(model: &ExtractorModel<T>, ds: &LabeledDataset) -> Vec<PairPrediction<T>> {
    let probs: Vec<T> = ds.examples.par_iter().map(|e| model.sentence_probability(e)).collect();
    let mut best: BTreeMap<Pair, T> = BTreeMap::new();
    for (e, p) in ds.examples.iter().zip(probs) {
        best.entry(e.pair).and_modify(|b| *b = b.max(p)).or_insert(p);
    }
    let half = T::of(0.5);
    best.into_iter()
        .map(|(pair, probability)| PairPrediction { pair, probability, label: probability >= half })
        .collect()
}

/// CSV with header `pair_first,pair_second,probability,label`.
pub fn write_predictions_csv<T: Real, W: Write>(g: &KnowledgeGraph, preds: &[PairPrediction<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "pair_first,pair_second,probability,label")?;
    for p in preds {
        writeln!(
            w,
            "{},{},{},{}",
            g.entity_name(p.pair.0),
            g.entity_name(p.pair.1),
            fmt_float(p.probability.as_f64()),
            u8::from(p.label)
        )?;
    }
    Ok(())
}
