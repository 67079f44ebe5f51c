//! False-negative detection with learned paths, and construction of the
//! Unfiltered / PRA-reduced / Random-reduced training sets.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Pair};
use crate::labeler::{Label, LabeledDataset};
use crate::path::RelationPath;
use crate::sampling::choose_indices;
use crate::walk::path_exists;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReductionReport {
    /// Flagged negative pairs with every path that connects them.
    pub flagged: BTreeMap<Pair, Vec<RelationPath>>,
    pub removed_examples: usize,
    pub bias_before: Option<f64>,
    pub bias_after: Option<f64>,
    pub warning: Option<String>,
}

impl ReductionReport {
    pub fn is_flagged(&self, pair: &Pair) -> bool {
        self.flagged.contains_key(pair)
    }

    pub fn flagged_pairs(&self) -> BTreeSet<Pair> {
        self.flagged.keys().copied().collect()
    }

    pub fn to_json(&self, g: &KnowledgeGraph) -> serde_json::Value {
        #[derive(Serialize)]
        struct Flag<'a> {
            first: &'a str,
            second: &'a str,
            witnesses: Vec<String>,
            paths: Vec<String>,
        }
        let flagged: Vec<Flag> = self
            .flagged
            .iter()
            .map(|(p, w)| Flag {
                first: g.entity_name(p.0),
                second: g.entity_name(p.1),
                witnesses: w.iter().map(ToString::to_string).collect(),
                paths: w.iter().map(RelationPath::to_machine).collect(),
            })
            .collect();
        serde_json::json!({
            "flagged": flagged,
            "flagged_pairs": self.flagged.len(),
            "removed_examples": self.removed_examples,
            "bias_before": self.bias_before,
            "bias_after": self.bias_after,
            "warning": self.warning,
        })
    }

    /// Reads the flags back from [`ReductionReport::to_json`] output.
    pub fn from_json(g: &KnowledgeGraph, value: &serde_json::Value) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("reduction report: {m}"));
        let flags = value.get("flagged").and_then(|f| f.as_array()).ok_or_else(|| bad("missing `flagged` list".into()))?;
        let mut flagged = BTreeMap::new();
        for f in flags {
            let name = |k: &str| f.get(k).and_then(|v| v.as_str()).ok_or_else(|| bad(format!("flag without `{k}`")));
            let entity = |k: &str| {
                let n = name(k)?;
                g.entity(n).ok_or_else(|| bad(format!("entity `{n}` not in the knowledge graph")))
            };
            let pair = (entity("first")?, entity("second")?);
            let paths = match f.get("paths").and_then(|p| p.as_array()) {
                Some(list) => list
                    .iter()
                    .map(|p| RelationPath::parse_machine(p.as_str().unwrap_or_default()))
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            flagged.insert(pair, paths);
        }
        Ok(Self {
            flagged,
            removed_examples: value.get("removed_examples").and_then(|v| v.as_u64()).unwrap_or(0) as usize,
            bias_before: value.get("bias_before").and_then(|v| v.as_f64()),
            bias_after: value.get("bias_after").and_then(|v| v.as_f64()),
            warning: value.get("warning").and_then(|v| v.as_str()).map(str::to_owned),
        })
    }
}

/// Flags each negative pair connected by at least one of `paths`.
pub fn detect_false_negatives(g: &KnowledgeGraph, paths: &[RelationPath], negatives: &BTreeSet<Pair>) -> ReductionReport {
    if paths.is_empty() {
        return ReductionReport {
            warning: Some("no positive-weight paths; nothing can be flagged".into()),
            ..Default::default()
        };
    }
    let candidates: Vec<Pair> = negatives.iter().copied().collect();
    let flagged = candidates
        .par_iter()
        .filter_map(|&(s, t)| {
            let witnesses: Vec<RelationPath> = paths.iter().filter(|p| path_exists(g, p, s, t)).cloned().collect();
            (!witnesses.is_empty()).then_some(((s, t), witnesses))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    ReductionReport { flagged, ..Default::default() }
}

/// Removes every negative example whose pair is flagged.
pub fn pra_reduce(ds: &LabeledDataset, report: &ReductionReport) -> LabeledDataset {
    let examples = ds
        .examples
        .iter()
        .filter(|e| !(e.label == Label::Negative && report.is_flagged(&e.pair)))
        .cloned()
        .collect();
    LabeledDataset::new(ds.relation.clone(), examples)
}

/// [`pra_reduce`] that also records counts and bias in `report`.
pub fn pra_reduce_recorded(ds: &LabeledDataset, report: &mut ReductionReport) -> LabeledDataset {
    let out = pra_reduce(ds, report);
    report.removed_examples = ds.examples.len() - out.examples.len();
    report.bias_before = Some(ds.bias());
    report.bias_after = Some(out.bias());
    out
}

fn keep_negatives(ds: &LabeledDataset, count: usize, seed: u64) -> LabeledDataset {
    let negatives: Vec<usize> = ds
        .examples
        .iter()
        .enumerate()
        .filter(|(_, e)| e.label == Label::Negative)
        .map(|(i, _)| i)
        .collect();
    let keep: BTreeSet<usize> = choose_indices(negatives.len(), count, seed).into_iter().map(|k| negatives[k]).collect();
    let examples = ds
        .examples
        .iter()
        .enumerate()
        .filter(|(i, e)| e.label == Label::Positive || keep.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    LabeledDataset::new(ds.relation.clone(), examples)
}

/// Subsamples negatives to `⌊ratio × positives⌋`. Never oversamples.
pub fn adjust_bias(ds: &LabeledDataset, ratio: f64, seed: u64) -> Result<LabeledDataset> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidArgument(format!("bias ratio must be positive, got {ratio}")));
    }
    let positives = ds.positives();
    if positives == 0 {
        return Err(Error::InvalidArgument("dataset has no positive examples".into()));
    }
    // The epsilon keeps products such as 2.3 × 100 from flooring to 229.
    let target = (ratio * positives as f64 + 1e-9).floor() as usize;
    if ds.negatives() < target {
        return Err(Error::InsufficientNegatives { current: ds.bias(), requested: ratio });
    }
    Ok(keep_negatives(ds, target, seed))
}

/// Removes random negatives from `ds` until it matches `reference` in size and bias.
pub fn random_reduce(ds: &LabeledDataset, reference: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    if ds.positives() != reference.positives() {
        return Err(Error::InvalidArgument(format!(
            "positive counts differ: {} vs reference {}",
            ds.positives(),
            reference.positives()
        )));
    }
    if ds.negatives() < reference.negatives() {
        return Err(Error::InvalidArgument(format!(
            "{} negatives cannot be reduced to {}",
            ds.negatives(),
            reference.negatives()
        )));
    }
    Ok(keep_negatives(ds, reference.negatives(), seed))
}

/// Precision and recall of a flag set against known false negatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlagScore {
    pub precision: f64,
    pub recall: f64,
    pub flagged: usize,
    pub correct: usize,
}

pub fn score_flags(flagged: &BTreeSet<Pair>, truth: &BTreeSet<Pair>) -> FlagScore {
    let correct = flagged.intersection(truth).count();
    FlagScore {
        precision: if flagged.is_empty() { 1.0 } else { correct as f64 / flagged.len() as f64 },
        recall: if truth.is_empty() { 1.0 } else { correct as f64 / truth.len() as f64 },
        flagged: flagged.len(),
        correct,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::GraphBuilder;
    use crate::labeler::{LabeledExample, Mention, Sentence};
    use std::sync::Arc;

    fn graph(lines: &[(&str, &str, &str)]) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        for (s, r, o) in lines {
            b.add(s, r, o).unwrap();
        }
        b.build()
    }

    fn p(text: &str) -> RelationPath {
        RelationPath::parse_machine(text).unwrap()
    }

    fn dataset(positives: usize, negatives: usize, neg_pairs: &[Pair]) -> LabeledDataset {
        let s = Arc::new(Sentence {
            doc: "d".into(),
            tokens: vec!["a".into(), "b".into()],
            mentions: vec![Mention { cui: "A".into(), start: 0, end: 0 }],
            stems: None,
            pos: None,
        });
        let ex = |i: usize, pair: Pair, label| LabeledExample {
            sentence_id: i,
            sentence: Arc::clone(&s),
            pair,
            spans: ((0, 0), (1, 1)),
            label,
            removed: BTreeSet::new(),
        };
        let mut examples: Vec<_> = (0..positives).map(|i| ex(i, (crate::EntityId(0), crate::EntityId(1)), Label::Positive)).collect();
        for i in 0..negatives {
            let pair = neg_pairs.get(i % neg_pairs.len().max(1)).copied().unwrap_or((crate::EntityId(2), crate::EntityId(3)));
            examples.push(ex(positives + i, pair, Label::Negative));
        }
        LabeledDataset::new("r", examples)
    }

    #[test]
    fn table_path_flags_the_pair() {
        let g = graph(&[("x", "gene-encodes-gene-product", "a"), ("y", "gene-plays-role-in-process", "a"), ("z", "other", "w")]);
        let (x, y) = (g.entity("x").unwrap(), g.entity("y").unwrap());
        let path = p("gene-encodes-gene-product,_gene-plays-role-in-process");
        let negatives: BTreeSet<Pair> = [(x, y), (g.entity("z").unwrap(), g.entity("w").unwrap())].into();
        let report = detect_false_negatives(&g, &[path.clone()], &negatives);
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.flagged[&(x, y)], vec![path]);
    }

    #[test]
    fn disconnected_negatives_are_not_flagged() {
        let g = graph(&[("a", "r", "b"), ("c", "r", "d")]);
        let negatives: BTreeSet<Pair> = [(g.entity("a").unwrap(), g.entity("d").unwrap())].into();
        assert!(detect_false_negatives(&g, &[p("r"), p("r,_r")], &negatives).flagged.is_empty());
        let empty = detect_false_negatives(&g, &[], &negatives);
        assert!(empty.flagged.is_empty() && empty.warning.is_some());
    }

    #[test]
    fn reduce_identity_and_total() {
        use crate::EntityId;
        let ds = dataset(3, 6, &[(EntityId(2), EntityId(3)), (EntityId(4), EntityId(5))]);
        let none = ReductionReport::default();
        assert_eq!(pra_reduce(&ds, &none), ds);

        let mut all = ReductionReport::default();
        all.flagged.insert((EntityId(2), EntityId(3)), vec![p("r")]);
        all.flagged.insert((EntityId(4), EntityId(5)), vec![p("r")]);
        let out = pra_reduce_recorded(&ds, &mut all);
        assert_eq!(out.negatives(), 0);
        assert_eq!(out.positives(), 3);
        assert_eq!(all.removed_examples, 6);
    }

    #[test]
    fn bias_scenario_from_five_point_one_to_two_point_three() {
        use crate::EntityId;
        // 100 positives, 510 negatives spread over 51 pairs of 10 sentences;
        // flagging 28 pairs leaves 230 negatives.
        let pairs: Vec<Pair> = (0..51).map(|i| (EntityId(10 + i), EntityId(100 + i))).collect();
        let ds = dataset(100, 510, &pairs);
        assert!((ds.bias() - 5.1).abs() < 1e-12);
        let mut report = ReductionReport::default();
        for &pr in &pairs[..28] {
            report.flagged.insert(pr, vec![p("r")]);
        }
        let out = pra_reduce_recorded(&ds, &mut report);
        assert!((out.bias() - 2.3).abs() < 1e-12);
        assert_eq!(report.bias_after, Some(out.bias()));
    }

    #[test]
    fn adjust_bias_counts() {
        let ds = dataset(100, 510, &[]);
        let out = adjust_bias(&ds, 2.0, 11).unwrap();
        assert_eq!(out.negatives(), 200);
        assert_eq!(out.positives(), 100);
        assert_eq!(out, adjust_bias(&ds, 2.0, 11).unwrap());

        let at_two = dataset(10, 20, &[]);
        assert_eq!(adjust_bias(&at_two, 2.0, 1).unwrap(), at_two);
        assert!(matches!(adjust_bias(&at_two, 2.5, 1), Err(Error::InsufficientNegatives { .. })));
        assert_eq!(adjust_bias(&dataset(100, 300, &[]), 2.3, 1).unwrap().negatives(), 230);
    }

    #[test]
    fn random_reduce_matches_reference_counts() {
        let ds = dataset(10, 40, &[]);
        let same = random_reduce(&ds, &ds, 3).unwrap();
        assert_eq!(same, ds);
        let half = dataset(10, 20, &[]);
        for seed in 0..20 {
            let out = random_reduce(&ds, &half, seed).unwrap();
            assert_eq!(out.negatives(), 20);
            assert_eq!(out.positives(), 10);
        }
        assert!(random_reduce(&half, &ds, 0).is_err());
        assert!(random_reduce(&ds, &dataset(9, 20, &[]), 0).is_err());
    }

    #[test]
    fn flag_scores() {
        use crate::EntityId;
        let a = (EntityId(0), EntityId(1));
        let b = (EntityId(2), EntityId(3));
        let s = score_flags(&[a].into(), &[a, b].into());
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
    }
}
