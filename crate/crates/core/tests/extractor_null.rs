use std::collections::BTreeSet;

use pathsift::eval::{self, LabelConfig};
use pathsift::extractor;
use pathsift::labeler::{Label, LabeledDataset};
use pathsift::synth::{self, SynthSpec};
use pathsift::{ExtractorModel, Pair, PairPrediction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mann-Whitney AUC over pairs, ties counted as half.
fn auc(preds: &[PairPrediction], gold: &BTreeSet<Pair>) -> f64 {
    let pos: Vec<f64> = preds.iter().filter(|p| gold.contains(&p.pair)).map(|p| p.probability).collect();
    let neg: Vec<f64> = preds.iter().filter(|p| !gold.contains(&p.pair)).map(|p| p.probability).collect();
    let mut wins = 0.0;
    for a in &pos {
        for b in &neg {
            wins += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn split(seed: u64) -> (LabeledDataset, LabeledDataset) {
    let inst = synth::generate(&SynthSpec::standard(seed)).unwrap();
    let data = eval::distant_labels(&inst.graph, &inst.truth.target, &inst.corpus, &LabelConfig::default()).unwrap().kept;
    let plan = eval::make_folds(&data.pairs(), 2, seed).unwrap();
    let part = |f| {
        let ex = data.examples.iter().filter(|e| plan.fold_of(&e.pair) == Some(f)).cloned().collect();
        LabeledDataset::new(data.relation.clone(), ex)
    };
    (part(0), part(1))
}

fn held_out_auc(model: &ExtractorModel, test: &LabeledDataset) -> f64 {
    auc(&extractor::predict_pairs(model, test), &test.pairs_with(Label::Positive))
}

#[test]
fn permuted_labels_carry_no_signal() {
    let mut real = Vec::new();
    let mut null = Vec::new();
    for seed in 0..4 {
        let (train, test) = split(seed);
        let model = extractor::train_extractor::<f64>(&train, extractor::DEFAULT_EXTRACTOR_L2, seed).unwrap();
        real.push(held_out_auc(&model, &test));

        let mut labels: Vec<Label> = train.examples.iter().map(|e| e.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut shuffled = train.clone();
        for (e, l) in shuffled.examples.iter_mut().zip(labels) {
            e.label = l;
        }
        let model = extractor::train_extractor::<f64>(&shuffled, extractor::DEFAULT_EXTRACTOR_L2, seed).unwrap();
        null.push(held_out_auc(&model, &test));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&real) > 0.75, "real-label AUC {real:?}");
    assert!((mean(&null) - 0.5).abs() < 0.1, "permuted-label AUC {null:?}");
}

#[test]
fn model_text_round_trips() {
    let (train, test) = split(1);
    let model = extractor::train_extractor::<f64>(&train, 0.1, 3).unwrap();
    let back = ExtractorModel::from_text(&model.to_text()).unwrap();
    assert_eq!(back.to_text(), model.to_text());
    let a = extractor::predict_pairs(&model, &test);
    let b = extractor::predict_pairs(&back, &test);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.pair, y.pair);
        assert!((x.probability - y.probability).abs() < 1e-12);
    }
}

#[test]
fn pair_score_is_the_max_over_its_sentences() {
    let (train, test) = split(2);
    let model = extractor::train_extractor::<f64>(&train, 0.1, 0).unwrap();
    for p in extractor::predict_pairs(&model, &test) {
        let best = test
            .examples
            .iter()
            .filter(|e| e.pair == p.pair)
            .map(|e| model.sentence_probability(e))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(p.probability, best);
        assert_eq!(p.label, best >= 0.5);
    }
}

#[test]
fn single_class_training_is_rejected() {
    let (train, _) = split(0);
    let only_pos = LabeledDataset::new(
        train.relation.clone(),
        train.examples.iter().filter(|e| e.label == Label::Positive).cloned().collect(),
    );
    assert!(extractor::train_extractor::<f64>(&only_pos, 0.1, 0).is_err());
}
