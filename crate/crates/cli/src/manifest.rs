//! Run manifest: one TOML file naming the inputs, relations and tunables.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pathsift::eval::{Average, EvalConfig, LabelConfig};
use pathsift::labeler::FilterConfig;
use pathsift::logistic::LogisticConfig;
use pathsift::pra::PraConfig;
use pathsift::walk::PathSearch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    /// Every output lands under this directory.
    pub run_dir: PathBuf,
    pub kb: PathBuf,
    pub corpus: PathBuf,
    pub relations: Vec<String>,
    #[serde(default)]
    pub pra: PraSection,
    #[serde(default)]
    pub labeling: LabelingSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub stages: Stages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PraSection {
    pub max_len: usize,
    pub min_support: usize,
    pub fanout_cap: usize,
    pub l2: f64,
    pub neg_ratio: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PraSection {
    fn default() -> Self {
        let search = PathSearch::default();
        let fit = LogisticConfig::default();
        Self {
            max_len: search.max_len,
            min_support: search.min_support,
            fanout_cap: search.fanout_cap,
            l2: fit.l2,
            neg_ratio: pathsift::pra::DEFAULT_NEG_RATIO,
            max_iters: fit.max_iters,
            tolerance: fit.tolerance,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingSection {
    pub max_gap: usize,
    pub common_pair_max: usize,
    /// Cap on sampled negative pairs; absent means all admissible pairs.
    pub negative_pairs: Option<usize>,
    pub seed: u64,
}

impl Default for LabelingSection {
    fn default() -> Self {
        let f = FilterConfig::default();
        Self { max_gap: f.max_gap, common_pair_max: f.common_pair_max, negative_pairs: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub folds: usize,
    /// Negatives per positive after adjustment; 0 disables adjustment.
    pub bias_ratio: f64,
    pub extractor_l2: f64,
    pub average: Average,
    pub disable_pra: bool,
    pub seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            folds: pathsift::eval::DEFAULT_FOLDS,
            bias_ratio: pathsift::eval::DEFAULT_BIAS_RATIO,
            extractor_l2: pathsift::extractor::DEFAULT_EXTRACTOR_L2,
            average: Average::Macro,
            disable_pra: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub kg_stats: bool,
    pub pra_train: bool,
    pub label: bool,
    pub fn_detect: bool,
    pub evaluate: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self { kg_stats: true, pra_train: true, label: true, fn_detect: true, evaluate: true }
    }
}

/// Seed overrides read from the environment.
pub const SEED_ENV: [(&str, SeedSlot); 4] = [
    ("PATHSIFT_SEED", SeedSlot::All),
    ("PATHSIFT_PRA_SEED", SeedSlot::Pra),
    ("PATHSIFT_LABEL_SEED", SeedSlot::Label),
    ("PATHSIFT_EVAL_SEED", SeedSlot::Eval),
];

#[derive(Debug, Clone, Copy)]
pub enum SeedSlot {
    All,
    Pra,
    Label,
    Eval,
}

impl Manifest {
    /// Parses, resolves relative paths against the manifest's directory,
    /// applies seed overrides and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let mut m: Manifest = toml::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut m.run_dir, &mut m.kb, &mut m.corpus] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        m.apply_env(|k| std::env::var(k).ok())?;
        m.validate()?;
        Ok(m)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        for (var, slot) in SEED_ENV {
            let Some(v) = get(var) else { continue };
            let seed: u64 = v.trim().parse().with_context(|| format!("{var}={v} is not an unsigned integer"))?;
            match slot {
                SeedSlot::All => {
                    self.pra.seed = seed;
                    self.labeling.seed = seed;
                    self.eval.seed = seed;
                }
                SeedSlot::Pra => self.pra.seed = seed,
                SeedSlot::Label => self.labeling.seed = seed,
                SeedSlot::Eval => self.eval.seed = seed,
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [("kb", &self.kb), ("corpus", &self.corpus)] {
            if !p.is_file() {
                bail!("{what} file {} does not exist", p.display());
            }
        }
        if self.relations.is_empty() {
            bail!("manifest lists no relations");
        }
        let p = &self.pra;
        if !(1..=6).contains(&p.max_len) {
            bail!("pra.max_len = {} outside 1..=6", p.max_len);
        }
        if p.min_support == 0 {
            bail!("pra.min_support must be ≥ 1");
        }
        if p.fanout_cap == 0 {
            bail!("pra.fanout_cap must be ≥ 1");
        }
        for (name, v) in [("pra.l2", p.l2), ("eval.extractor_l2", self.eval.extractor_l2)] {
            if !(v.is_finite() && v >= 0.0) {
                bail!("{name} = {v} must be finite and ≥ 0");
            }
        }
        if !(p.neg_ratio.is_finite() && p.neg_ratio > 0.0) {
            bail!("pra.neg_ratio = {} must be > 0", p.neg_ratio);
        }
        if !(p.tolerance.is_finite() && p.tolerance > 0.0) || p.max_iters == 0 {
            bail!("pra.tolerance must be > 0 and pra.max_iters ≥ 1");
        }
        if self.labeling.common_pair_max == 0 {
            bail!("labeling.common_pair_max must be ≥ 1");
        }
        if self.eval.folds < 2 {
            bail!("eval.folds = {} must be ≥ 2", self.eval.folds);
        }
        if !(self.eval.bias_ratio.is_finite() && self.eval.bias_ratio >= 0.0) {
            bail!("eval.bias_ratio = {} must be finite and ≥ 0", self.eval.bias_ratio);
        }
        Ok(())
    }

    pub fn pra_config(&self) -> PraConfig {
        let p = &self.pra;
        PraConfig {
            search: PathSearch { max_len: p.max_len, min_support: p.min_support, fanout_cap: p.fanout_cap, held_out_relation: None },
            logistic: LogisticConfig { l2: p.l2, max_iters: p.max_iters, tolerance: p.tolerance },
            neg_ratio: p.neg_ratio,
            seed: p.seed,
        }
    }

    pub fn label_config(&self) -> LabelConfig {
        LabelConfig {
            filter: FilterConfig { max_gap: self.labeling.max_gap, common_pair_max: self.labeling.common_pair_max },
            negative_pairs: self.labeling.negative_pairs,
            seed: self.labeling.seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            pra: self.pra_config(),
            labeling: self.label_config(),
            extractor: LogisticConfig { l2: self.eval.extractor_l2, ..LogisticConfig::default() },
            folds: self.eval.folds,
            bias_ratio: (self.eval.bias_ratio > 0.0).then_some(self.eval.bias_ratio),
            average: self.eval.average,
            seed: self.eval.seed,
            disable_pra: self.eval.disable_pra,
        }
    }

    /// Manifest text for a freshly generated benchmark directory.
    pub fn for_synth(relation: &str, seed: u64) -> Self {
        Self {
            run_dir: "run".into(),
            kb: "kb.tsv".into(),
            corpus: "corpus.jsonl".into(),
            relations: vec![relation.to_owned()],
            pra: PraSection { seed, ..PraSection::default() },
            labeling: LabelingSection { seed, ..LabelingSection::default() },
            eval: EvalSection { seed, ..EvalSection::default() },
            stages: Stages::default(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest::for_synth("treats", 1)
    }

    #[test]
    fn env_overrides_seeds() {
        let mut m = manifest();
        m.apply_env(|k| (k == "PATHSIFT_SEED").then(|| "7".to_owned())).unwrap();
        assert_eq!((m.pra.seed, m.labeling.seed, m.eval.seed), (7, 7, 7));
        m.apply_env(|k| (k == "PATHSIFT_EVAL_SEED").then(|| "9".to_owned())).unwrap();
        assert_eq!((m.pra.seed, m.eval.seed), (7, 9));
        assert!(m.apply_env(|k| (k == "PATHSIFT_PRA_SEED").then(|| "x".to_owned())).is_err());
    }

    #[test]
    fn toml_round_trips() {
        let m = manifest();
        let back: Manifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "run_dir='r'\nkb='k'\ncorpus='c'\nrelations=['a']\n[pra]\nmax_length=3\n";
        assert!(toml::from_str::<Manifest>(text).is_err());
    }
}
