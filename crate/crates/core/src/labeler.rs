//! Distant-supervision labeling: knowledge-base pairs are projected onto an
//! annotated corpus, and the resulting sentence examples are filtered.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Pair};
use crate::sampling::sample_cross_product;

pub const DEFAULT_MAX_GAP: usize = 5;
pub const DEFAULT_COMMON_PAIR_MAX: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub cui: String,
    pub start: usize,
    /// Inclusive.
    pub end: usize,
}

/// One pre-tokenized, concept-annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<Mention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stems: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
}

impl Sentence {
    pub fn validate(&self) -> std::result::Result<(), String> {
        for m in &self.mentions {
            if m.start > m.end {
                return Err(format!("mention `{}` has start {} after end {}", m.cui, m.start, m.end));
            }
            if m.end >= self.tokens.len() {
                return Err(format!("mention `{}` ends at {} beyond {} tokens", m.cui, m.end, self.tokens.len()));
            }
            if m.cui.is_empty() {
                return Err("mention with empty cui".into());
            }
        }
        for (name, ann) in [("stems", &self.stems), ("pos", &self.pos)] {
            if let Some(a) = ann {
                if a.len() != self.tokens.len() {
                    return Err(format!("{name} has {} entries for {} tokens", a.len(), self.tokens.len()));
                }
            }
        }
        Ok(())
    }
}

/// Reads a JSON-lines corpus, one sentence per line.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: idx + 1, message };
        let s: Sentence = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        s.validate().map_err(parse_err)?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(sentences: &[Sentence], mut w: W) -> Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// Inclusive token span.
pub type Span = (usize, usize);

/// Why an example was filtered out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// The sentence holds some positive pair more than once.
    RepeatedPositivePair,
    /// The sentence holds both a positive and a negative pair.
    MixedPolarity,
    /// More than the allowed number of tokens separate the two mentions.
    WideGap,
    /// The pair occurs in too many sentences.
    CommonPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub sentence_id: usize,
    pub sentence: Arc<Sentence>,
    pub pair: Pair,
    /// Spans of `pair.0` and `pair.1`, in that order.
    pub spans: (Span, Span),
    pub label: Label,
    pub removed: BTreeSet<Criterion>,
}

impl LabeledExample {
    /// Tokens strictly between the two mentions; negative when they overlap.
    pub fn gap(&self) -> isize {
        token_gap(self.spans.0, self.spans.1)
    }

    /// True when the first pair element is mentioned before the second.
    pub fn in_pair_order(&self) -> bool {
        self.spans.0 .0 <= self.spans.1 .0
    }
}

/// `start(later) − end(earlier) − 1`.
pub fn token_gap(a: Span, b: Span) -> isize {
    let (earlier, later) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    later.0 as isize - earlier.1 as isize - 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub relation: String,
    pub examples: Vec<LabeledExample>,
}

impl LabeledDataset {
    pub fn new(relation: impl Into<String>, examples: Vec<LabeledExample>) -> Self {
        Self { relation: relation.into(), examples }
    }

    pub fn positives(&self) -> usize {
        self.examples.iter().filter(|e| e.label == Label::Positive).count()
    }

    pub fn negatives(&self) -> usize {
        self.examples.len() - self.positives()
    }

    /// Negatives per positive, i.e. `r` in a `1:r` bias.
    pub fn bias(&self) -> f64 {
        self.negatives() as f64 / self.positives() as f64
    }

    pub fn pairs(&self) -> BTreeSet<Pair> {
        self.examples.iter().map(|e| e.pair).collect()
    }

    pub fn pairs_with(&self, label: Label) -> BTreeSet<Pair> {
        self.examples.iter().filter(|e| e.label == label).map(|e| e.pair).collect()
    }

    /// Writes one JSON object per example, sentence included.
    pub fn write_jsonl<W: Write>(&self, g: &KnowledgeGraph, mut w: W) -> Result<()> {
        for e in &self.examples {
            let rec = ExampleRecord {
                relation: self.relation.clone(),
                sentence_id: e.sentence_id,
                sentence: (*e.sentence).clone(),
                pair: [g.entity_name(e.pair.0).to_owned(), g.entity_name(e.pair.1).to_owned()],
                spans: [[e.spans.0 .0, e.spans.0 .1], [e.spans.1 .0, e.spans.1 .1]],
                label: e.label,
                removed: e.removed.iter().copied().collect(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads [`LabeledDataset::write_jsonl`] output. Entities must exist in `g`.
    pub fn read_jsonl<R: BufRead>(g: &KnowledgeGraph, relation: &str, reader: R) -> Result<Self> {
        let mut sentences: HashMap<usize, Arc<Sentence>> = HashMap::new();
        let mut examples = Vec::new();
        let mut name = relation.to_owned();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let rec: ExampleRecord = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
            let lookup = |n: &str| g.entity(n).ok_or_else(|| err(format!("entity `{n}` not in the knowledge graph")));
            let pair = (lookup(&rec.pair[0])?, lookup(&rec.pair[1])?);
            if name.is_empty() {
                name = rec.relation.clone();
            }
            let sentence = sentences.entry(rec.sentence_id).or_insert_with(|| Arc::new(rec.sentence)).clone();
            examples.push(LabeledExample {
                sentence_id: rec.sentence_id,
                sentence,
                pair,
                spans: ((rec.spans[0][0], rec.spans[0][1]), (rec.spans[1][0], rec.spans[1][1])),
                label: rec.label,
                removed: rec.removed.into_iter().collect(),
            });
        }
        Ok(Self::new(name, examples))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ExampleRecord {
    relation: String,
    sentence_id: usize,
    sentence: Sentence,
    pair: [String; 2],
    spans: [[usize; 2]; 2],
    label: Label,
    #[serde(default)]
    removed: Vec<Criterion>,
}

/// Edges of `relation` that are not also an edge of any other relation in
/// the same direction.
pub fn extract_positive_pairs(kb: &KnowledgeGraph, relation: &str) -> Result<BTreeSet<Pair>> {
    let key = kb
        .relation_key(relation)
        .filter(|_| kb.has_relation(relation))
        .ok_or_else(|| Error::UnknownRelation(relation.to_owned()))?;
    let others: Vec<_> = kb.relation_keys().filter(|&k| k != key).collect();
    Ok(kb
        .edges_of(relation)
        .into_iter()
        .filter(|&(s, o)| !others.iter().any(|&k| kb.has_edge(s, k, o)))
        .collect())
}

/// Up to `count` pairs drawn from (firsts of positives) × (seconds of positives)
/// minus the positives, without replacement.
pub fn generate_negative_pairs(positives: &BTreeSet<Pair>, count: usize, seed: u64) -> BTreeSet<Pair> {
    generate_negative_pairs_excluding(positives, &BTreeSet::new(), count, seed)
}

/// As [`generate_negative_pairs`], also avoiding `exclude`.
pub fn generate_negative_pairs_excluding(
    positives: &BTreeSet<Pair>,
    exclude: &BTreeSet<Pair>,
    count: usize,
    seed: u64,
) -> BTreeSet<Pair> {
    let firsts: BTreeSet<EntityId> = positives.iter().map(|p| p.0).collect();
    let seconds: BTreeSet<EntityId> = positives.iter().map(|p| p.1).collect();
    let excluded: HashSet<Pair> = positives.iter().chain(exclude).copied().collect();
    sample_cross_product(&firsts, &seconds, &excluded, count, seed).0
}

/// One example per (sentence, mention of first, mention of second) whose
/// entity pair is a positive or negative pair. Surface order is free.
pub fn label_corpus(
    kb: &KnowledgeGraph,
    relation: &str,
    corpus: &[Sentence],
    positives: &BTreeSet<Pair>,
    negatives: &BTreeSet<Pair>,
) -> LabeledDataset {
    let mut examples = Vec::new();
    for (sentence_id, s) in corpus.iter().enumerate() {
        let resolved: Vec<(EntityId, Span)> = s
            .mentions
            .iter()
            .filter_map(|m| kb.entity(&m.cui).map(|id| (id, (m.start, m.end))))
            .collect();
        if resolved.len() < 2 {
            continue;
        }
        let shared = Arc::new(s.clone());
        for (i, &(a, span_a)) in resolved.iter().enumerate() {
            for (j, &(b, span_b)) in resolved.iter().enumerate() {
                if i == j || a == b {
                    continue;
                }
                let label = if positives.contains(&(a, b)) {
                    Label::Positive
                } else if negatives.contains(&(a, b)) {
                    Label::Negative
                } else {
                    continue;
                };
                examples.push(LabeledExample {
                    sentence_id,
                    sentence: Arc::clone(&shared),
                    pair: (a, b),
                    spans: (span_a, span_b),
                    label,
                    removed: BTreeSet::new(),
                });
            }
        }
    }
    LabeledDataset::new(relation, examples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub max_gap: usize,
    pub common_pair_max: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { max_gap: DEFAULT_MAX_GAP, common_pair_max: DEFAULT_COMMON_PAIR_MAX }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: LabeledDataset,
    /// Removed examples, each tagged with every criterion that fired.
    pub removed: Vec<LabeledExample>,
}

impl FilterOutcome {
    pub fn removed_by(&self, c: Criterion) -> usize {
        self.removed.iter().filter(|e| e.removed.contains(&c)).count()
    }
}

/// Criteria that fire for each example of `ds`, aligned with `ds.examples`.
pub fn evaluate_criteria(ds: &LabeledDataset, cfg: &FilterConfig) -> Vec<BTreeSet<Criterion>> {
    let mut per_sentence: BTreeMap<usize, (BTreeMap<Pair, usize>, bool, bool)> = BTreeMap::new();
    let mut pair_sentences: HashMap<Pair, BTreeSet<usize>> = HashMap::new();
    for e in &ds.examples {
        let entry = per_sentence.entry(e.sentence_id).or_default();
        match e.label {
            Label::Positive => {
                *entry.0.entry(e.pair).or_insert(0) += 1;
                entry.1 = true;
            }
            Label::Negative => entry.2 = true,
        }
        pair_sentences.entry(e.pair).or_default().insert(e.sentence_id);
    }
    ds.examples
        .iter()
        .map(|e| {
            let (pos_counts, has_pos, has_neg) = &per_sentence[&e.sentence_id];
            let mut fired = BTreeSet::new();
            if pos_counts.values().any(|&c| c > 1) {
                fired.insert(Criterion::RepeatedPositivePair);
            }
            if *has_pos && *has_neg {
                fired.insert(Criterion::MixedPolarity);
            }
            if e.gap() > cfg.max_gap as isize {
                fired.insert(Criterion::WideGap);
            }
            if pair_sentences[&e.pair].len() > cfg.common_pair_max {
                fired.insert(Criterion::CommonPair);
            }
            fired
        })
        .collect()
}

/// Drops every example for which any criterion fires.
pub fn filter_examples(ds: &LabeledDataset, cfg: &FilterConfig) -> Result<FilterOutcome> {
    if cfg.common_pair_max == 0 {
        return Err(Error::InvalidArgument("common-pair threshold must be ≥ 1".into()));
    }
    let verdicts = evaluate_criteria(ds, cfg);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (e, fired) in ds.examples.iter().zip(verdicts) {
        if fired.is_empty() {
            kept.push(e.clone());
        } else {
            let mut e = e.clone();
            e.removed = fired;
            removed.push(e);
        }
    }
    Ok(FilterOutcome { kept: LabeledDataset::new(ds.relation.clone(), kept), removed })
}
