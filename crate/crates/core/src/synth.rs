//! Seeded synthetic knowledge bases and corpora with planted false negatives.
//!
//! A target relation is given a set of supporting path templates. Most
//! target edges receive a template witness; planted pairs get witnesses but
//! no target edge, so distant supervision labels them negative while they are
//! related in the ground truth. Decoys, and every other negative, have no
//! path at all within the search radius.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EntityId, GraphBuilder, KnowledgeGraph, Pair};
use crate::labeler::{Mention, Sentence};
use crate::path::RelationPath;
use crate::sampling;
use crate::walk::{self, DEFAULT_MAX_LEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityType {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub domain: String,
    pub range: String,
}

/// Token statistics of the templated sentences. "Related" covers target
/// edges and planted pairs; "unrelated" covers decoys and other negatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextModel {
    pub trigger_related: f64,
    pub trigger_unrelated: f64,
    pub contrast_related: f64,
    pub contrast_unrelated: f64,
    /// Probability the first argument is mentioned before the second.
    pub forward_related: f64,
    pub forward_unrelated: f64,
    /// Share of sentences whose argument gap exceeds five tokens.
    pub wide_gap_rate: f64,
}

impl Default for TextModel {
    fn default() -> Self {
        Self {
            trigger_related: 0.2,
            trigger_unrelated: 0.02,
            contrast_related: 0.02,
            contrast_unrelated: 0.2,
            forward_related: 0.75,
            forward_unrelated: 0.5,
            wide_gap_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub entity_types: Vec<EntityType>,
    pub relations: Vec<RelationSchema>,
    pub target: String,
    /// Forward relation sequences that imply the target.
    pub support_templates: Vec<Vec<String>>,
    /// Fraction of target edges given one template witness.
    pub support_rate: f64,
    pub target_edges: usize,
    /// Template witnesses added per planted pair.
    pub witnesses_per_planted: usize,
    pub planted: usize,
    pub decoys: usize,
    /// Negative pairs realized in the corpus, planted and decoys included.
    pub negative_pairs: usize,
    /// Extra random edges per relation, outside any witness.
    pub background_edges: BTreeMap<String, usize>,
    pub sentences_per_pair: usize,
    /// Probability that each witness edge is rewired to a random object.
    pub noise_rate: f64,
    /// Decoys have no path of at most this many steps to their object.
    pub max_len: usize,
    pub text: TextModel,
    pub seed: u64,
}

impl SynthSpec {
    /// 2,000 entities, 6 relations, 300 target edges, 50 planted pairs and
    /// 150 decoys, realized three times each at roughly 1:5 bias.
    pub fn standard(seed: u64) -> Self {
        let types = [("process", 500), ("gene", 450), ("product", 450), ("function", 300), ("anatomy", 300)];
        let rels = [
            ("process_involves_product", "process", "product"),
            ("process_involves_gene", "process", "gene"),
            ("gene_encodes_product", "gene", "product"),
            ("isa", "process", "process"),
            ("product_has_function", "product", "function"),
            ("gene_located_in", "gene", "anatomy"),
        ];
        let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        Self {
            entity_types: types.iter().map(|&(n, c)| EntityType { name: n.into(), count: c }).collect(),
            relations: rels
                .iter()
                .map(|&(n, d, r)| RelationSchema { name: n.into(), domain: d.into(), range: r.into() })
                .collect(),
            target: "process_involves_product".into(),
            support_templates: vec![
                strs(&["process_involves_gene", "gene_encodes_product"]),
                strs(&["isa", "process_involves_product"]),
                strs(&["isa", "process_involves_gene", "gene_encodes_product"]),
            ],
            support_rate: 0.7,
            target_edges: 300,
            witnesses_per_planted: 2,
            planted: 50,
            decoys: 150,
            negative_pairs: 1530,
            background_edges: [
                ("product_has_function", 450),
                ("gene_located_in", 400),
                ("isa", 120),
                ("process_involves_gene", 60),
                ("gene_encodes_product", 60),
            ]
            .iter()
            .map(|&(r, n)| (r.to_string(), n))
            .collect(),
            sentences_per_pair: 3,
            noise_rate: 0.0,
            max_len: DEFAULT_MAX_LEN,
            text: TextModel::default(),
            seed,
        }
    }

    fn type_index(&self, name: &str) -> Option<usize> {
        self.entity_types.iter().position(|t| t.name == name)
    }

    fn relation(&self, name: &str) -> Option<&RelationSchema> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.planted + self.decoys > self.negative_pairs {
            return bad(format!(
                "planted ({}) + decoys ({}) exceeds negative pairs ({})",
                self.planted, self.decoys, self.negative_pairs
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return bad(format!("noise rate {} outside [0, 1)", self.noise_rate));
        }
        if !(0.0..=1.0).contains(&self.support_rate) {
            return bad(format!("support rate {} outside [0, 1]", self.support_rate));
        }
        if self.sentences_per_pair == 0 {
            return bad("sentences per pair must be ≥ 1".into());
        }
        for r in &self.relations {
            crate::kg::RelationId::new(&r.name)?;
            for t in [&r.domain, &r.range] {
                if self.type_index(t).is_none() {
                    return bad(format!("relation {} uses unknown type {t}", r.name));
                }
            }
        }
        let Some(target) = self.relation(&self.target) else {
            return bad(format!("target relation {} not in schema", self.target));
        };
        for tpl in &self.support_templates {
            if tpl.is_empty() || tpl.len() > self.max_len {
                return bad(format!("support template {tpl:?} must have 1..={} steps", self.max_len));
            }
            if tpl.len() == 1 && tpl[0] == self.target {
                return bad("the bare target relation is not a support template".into());
            }
            let mut at = target.domain.as_str();
            for step in tpl {
                let Some(r) = self.relation(step) else {
                    return bad(format!("support template uses unknown relation {step}"));
                };
                if r.domain != at {
                    return bad(format!("support template {tpl:?} is not type-consistent at {step}"));
                }
                at = &r.range;
            }
            if at != target.range {
                return bad(format!("support template {tpl:?} does not end at type {}", target.range));
            }
        }
        if self.planted > 0 && (self.support_templates.is_empty() || self.witnesses_per_planted == 0) {
            return bad("planted pairs need at least one support template and witness".into());
        }
        for (r, _) in &self.background_edges {
            if self.relation(r).is_none() {
                return bad(format!("background edges for unknown relation {r}"));
            }
        }
        for (name, v) in [
            ("trigger_related", self.text.trigger_related),
            ("trigger_unrelated", self.text.trigger_unrelated),
            ("contrast_related", self.text.contrast_related),
            ("contrast_unrelated", self.text.contrast_unrelated),
            ("forward_related", self.text.forward_related),
            ("forward_unrelated", self.text.forward_unrelated),
            ("wide_gap_rate", self.text.wide_gap_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("text.{name} = {v} outside [0, 1]"));
            }
        }
        if self.text.trigger_related + self.text.contrast_related > 1.0
            || self.text.trigger_unrelated + self.text.contrast_unrelated > 1.0
        {
            return bad("trigger + contrast rates exceed 1".into());
        }
        Ok(())
    }
}

/// Generated pairs by role, as entity names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub target: String,
    pub positives: Vec<(String, String)>,
    pub planted: Vec<(String, String)>,
    /// Planted pairs still connected by a template after noise.
    pub planted_witnessed: Vec<(String, String)>,
    pub decoys: Vec<(String, String)>,
    pub background: Vec<(String, String)>,
    /// Target edges plus planted pairs.
    pub true_instances: Vec<(String, String)>,
}

impl GroundTruth {
    pub fn resolve(g: &KnowledgeGraph, pairs: &[(String, String)]) -> BTreeSet<Pair> {
        pairs
            .iter()
            .filter_map(|(a, b)| Some((g.entity(a)?, g.entity(b)?)))
            .collect()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub graph: KnowledgeGraph,
    pub corpus: Vec<Sentence>,
    pub truth: GroundTruth,
}

const TRIGGERS: [&str; 8] = ["activates", "regulates", "produces", "requires", "mediates", "induces", "drives", "involves"];
const CONTRASTS: [&str; 8] = ["without", "unlike", "despite", "versus", "except", "not", "independent", "absent"];
const NEUTRAL: [&str; 14] = [
    "the", "of", "in", "and", "with", "a", "during", "cells", "levels", "observed", "was", "by", "that", "expression",
];

type Edge = (usize, usize, usize); // relation, subject, object (global entity index)

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
    names: Vec<String>,
    /// Global index range of each type.
    spans: Vec<(usize, usize)>,
    used: Vec<bool>,
    edges: BTreeSet<Edge>,
    /// Witness edges in creation order; these are what noise rewires.
    support: Vec<Edge>,
    rel_index: HashMap<String, usize>,
}

impl<'a> Builder<'a> {
    fn new(spec: &'a SynthSpec) -> Self {
        let mut names = Vec::new();
        let mut spans = Vec::new();
        for t in &spec.entity_types {
            let start = names.len();
            names.extend((0..t.count).map(|i| format!("{}_{i:04}", t.name)));
            spans.push((start, names.len()));
        }
        let used = vec![false; names.len()];
        let rel_index = spec.relations.iter().enumerate().map(|(i, r)| (r.name.clone(), i)).collect();
        Self {
            spec,
            rng: sampling::rng(spec.seed),
            names,
            spans,
            used,
            edges: BTreeSet::new(),
            support: Vec::new(),
            rel_index,
        }
    }

    fn span_of(&self, type_name: &str) -> (usize, usize) {
        self.spans[self.spec.type_index(type_name).expect("validated type")]
    }

    fn rel(&self, name: &str) -> usize {
        self.rel_index[name]
    }

    fn random_of(&mut self, type_name: &str) -> Result<usize> {
        let (a, b) = self.span_of(type_name);
        if a == b {
            return Err(Error::Infeasible(format!("type {type_name} has no entities")));
        }
        Ok(self.rng.gen_range(a..b))
    }

    /// An entity of the type not yet touched by any edge, if one remains.
    fn fresh_of(&mut self, type_name: &str) -> Result<usize> {
        let (a, b) = self.span_of(type_name);
        let free: Vec<usize> = (a..b).filter(|&i| !self.used[i]).collect();
        let pick = match free.choose(&mut self.rng) {
            Some(&i) => i,
            None => self.random_of(type_name)?,
        };
        self.used[pick] = true;
        Ok(pick)
    }

    fn add_edge(&mut self, rel: usize, s: usize, o: usize, witness: bool) {
        self.used[s] = true;
        self.used[o] = true;
        if self.edges.insert((rel, s, o)) && witness {
            self.support.push((rel, s, o));
        }
    }

    fn target_sources_into(&self, y: usize) -> Vec<usize> {
        let t = self.rel(&self.spec.target);
        self.edges.iter().filter(|&&(r, _, o)| r == t && o == y).map(|&(_, s, _)| s).collect()
    }

    fn target_out_degree(&self, x: usize) -> usize {
        let t = self.rel(&self.spec.target);
        self.edges.iter().filter(|&&(r, s, _)| r == t && s == x).count()
    }

    /// Adds one instance of `template` from `x` to `y`. A final target step
    /// reuses an existing target edge into `y`, preferring sources with no
    /// other target edges. Returns false when the template cannot be placed.
    fn witness(&mut self, template: &[String], x: usize, y: usize) -> Result<bool> {
        let target = self.spec.target.clone();
        let last = template.len() - 1;
        let mut nodes = vec![x];
        for (i, step) in template.iter().enumerate() {
            let range = self.spec.relation(step).expect("validated").range.clone();
            let next = if i == last {
                y
            } else if i + 1 == last && template[last] == target {
                let mut sources: Vec<usize> = self.target_sources_into(y).into_iter().filter(|&p| p != x).collect();
                if sources.is_empty() {
                    return Ok(false);
                }
                sources.sort_by_key(|&p| (self.target_out_degree(p) > 1, p));
                let single: Vec<usize> = sources.iter().copied().filter(|&p| self.target_out_degree(p) == 1).collect();
                let pool = if single.is_empty() { &sources } else { &single };
                *pool.choose(&mut self.rng).expect("non-empty")
            } else {
                self.fresh_of(&range)?
            };
            nodes.push(next);
        }
        for (i, step) in template.iter().enumerate() {
            if *step == target && i == last && template.len() > 1 {
                continue; // the reused target edge already exists
            }
            let r = self.rel(step);
            self.add_edge(r, nodes[i], nodes[i + 1], true);
        }
        Ok(true)
    }

    fn graph(&self) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        for &(r, s, o) in &self.edges {
            b.add(&self.names[s], &self.spec.relations[r].name, &self.names[o]).expect("valid names");
        }
        b.build()
    }
}

fn template_paths(spec: &SynthSpec) -> Result<Vec<RelationPath>> {
    spec.support_templates.iter().map(|t| RelationPath::parse_machine(&t.join(","))).collect()
}

fn witnessed(g: &KnowledgeGraph, templates: &[RelationPath], x: EntityId, y: EntityId) -> bool {
    templates.iter().any(|p| walk::path_exists(g, p, x, y))
}

/// Entities within `radius` undirected steps of `source`.
fn ball(g: &KnowledgeGraph, source: EntityId, radius: usize) -> BTreeSet<EntityId> {
    let mut seen = BTreeSet::from([source]);
    let mut queue = VecDeque::from([(source, 0)]);
    while let Some((n, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for (_, _, next) in g.steps_from(n) {
            for &m in next {
                if seen.insert(m) {
                    queue.push_back((m, d + 1));
                }
            }
        }
    }
    seen
}

fn sample_pairs(rng: &mut ChaCha8Rng, candidates: &[(usize, usize)], count: usize) -> Vec<(usize, usize)> {
    let seed = rng.gen();
    sampling::choose_indices(candidates.len(), count, seed).into_iter().map(|i| candidates[i]).collect()
}

pub fn generate(spec: &SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let mut b = Builder::new(spec);
    let target = spec.relation(&spec.target).expect("validated").clone();
    let t_rel = b.rel(&spec.target);

    // Target edges; a tenth of the objects absorb about a third of the edges.
    let (dom, ran) = (b.span_of(&target.domain), b.span_of(&target.range));
    let hubs = ((ran.1 - ran.0) / 10).max(1);
    let capacity = (dom.1 - dom.0) * (ran.1 - ran.0);
    if spec.target_edges > capacity / 2 {
        return Err(Error::Infeasible(format!(
            "target edges: {} requested but only {capacity} domain × range pairs",
            spec.target_edges
        )));
    }
    let mut targets = BTreeSet::new();
    while targets.len() < spec.target_edges {
        let x = b.rng.gen_range(dom.0..dom.1);
        let y = if b.rng.gen_bool(0.35) { ran.0 + b.rng.gen_range(0..hubs) } else { b.rng.gen_range(ran.0..ran.1) };
        if x != y && targets.insert((x, y)) {
            b.add_edge(t_rel, x, y, false);
        }
    }

    // Witnesses for most target edges.
    let target_list: Vec<(usize, usize)> = targets.iter().copied().collect();
    let n_templates = spec.support_templates.len();
    for &(x, y) in &target_list {
        if n_templates == 0 || !b.rng.gen_bool(spec.support_rate) {
            continue;
        }
        let first = b.rng.gen_range(0..n_templates);
        for k in 0..n_templates {
            let tpl = spec.support_templates[(first + k) % n_templates].clone();
            if b.witness(&tpl, x, y)? {
                break;
            }
        }
    }

    let firsts: BTreeSet<usize> = targets.iter().map(|p| p.0).collect();
    let seconds: BTreeSet<usize> = targets.iter().map(|p| p.1).collect();
    let templates = template_paths(spec)?;

    // Planted pairs: unconnected to begin with, then given witnesses.
    let mut planted: Vec<(usize, usize)> = Vec::new();
    if spec.planted > 0 {
        let g = b.graph();
        let id = |i: usize| g.entity(&b.names[i]);
        let mut candidates: Vec<(usize, usize)> = firsts
            .iter()
            .flat_map(|&x| seconds.iter().map(move |&y| (x, y)))
            .filter(|&(x, y)| x != y && !targets.contains(&(x, y)))
            .filter(|&(x, y)| match (id(x), id(y)) {
                (Some(a), Some(c)) => !witnessed(&g, &templates, a, c),
                _ => true,
            })
            .collect();
        candidates.shuffle(&mut b.rng);
        let mut planted_sources = BTreeSet::new();
        for (x, y) in candidates {
            if planted.len() == spec.planted {
                break;
            }
            // One planted pair per source keeps witnesses from stacking up.
            if planted_sources.contains(&x) {
                continue;
            }
            let mut placed = 0;
            for w in 0..spec.witnesses_per_planted {
                let start = if w == 0 { 0 } else { b.rng.gen_range(0..n_templates) };
                for k in 0..n_templates {
                    let tpl = spec.support_templates[(start + k) % n_templates].clone();
                    if b.witness(&tpl, x, y)? {
                        placed += 1;
                        break;
                    }
                }
            }
            if placed > 0 {
                planted_sources.insert(x);
                planted.push((x, y));
            }
        }
        if planted.len() < spec.planted {
            return Err(Error::Infeasible(format!(
                "planted: only {} of {} requested pairs could be given a support path",
                planted.len(),
                spec.planted
            )));
        }
    }

    // Background edges outside any witness.
    for (rel, &count) in &spec.background_edges {
        let schema = spec.relation(rel).expect("validated").clone();
        let r = b.rel(rel);
        let mut added = 0;
        let mut attempts = 0;
        while added < count {
            attempts += 1;
            if attempts > 100 * count + 1000 {
                return Err(Error::Infeasible(format!("background edges for {rel}: only {added} of {count} placed")));
            }
            let s = b.random_of(&schema.domain)?;
            let o = b.random_of(&schema.range)?;
            if s == o || (r == t_rel) || b.edges.contains(&(r, s, o)) {
                continue;
            }
            b.add_edge(r, s, o, false);
            added += 1;
        }
    }

    // Noise: rewire witness edges to random objects of the same type.
    if spec.noise_rate > 0.0 {
        let support = b.support.clone();
        for (r, s, o) in support {
            if b.rng.gen_bool(spec.noise_rate) {
                let range = spec.relations[r].range.clone();
                let o2 = b.random_of(&range)?;
                if o2 != o && o2 != s && !b.edges.contains(&(r, s, o2)) {
                    b.edges.remove(&(r, s, o));
                    b.edges.insert((r, s, o2));
                }
            }
        }
    }

    let g = b.graph();
    let gid = |i: usize| g.entity(&b.names[i]);
    let id_pair = |&(x, y): &(usize, usize)| -> Option<Pair> { Some((gid(x)?, gid(y)?)) };
    let planted_witnessed: Vec<(usize, usize)> = planted
        .iter()
        .copied()
        .filter(|p| id_pair(p).is_some_and(|(a, c)| witnessed(&g, &templates, a, c)))
        .collect();
    if spec.noise_rate == 0.0 && planted_witnessed.len() != planted.len() {
        return Err(Error::Infeasible("planted: a witness path was lost during generation".into()));
    }

    // Decoys: nothing within max_len steps in either direction.
    let taken: BTreeSet<(usize, usize)> = targets.iter().chain(&planted).copied().collect();
    let mut decoy_pool = Vec::new();
    for &x in &firsts {
        let Some(xi) = gid(x) else { continue };
        let near = ball(&g, xi, spec.max_len);
        for &y in &seconds {
            if x == y || taken.contains(&(x, y)) {
                continue;
            }
            if gid(y).is_some_and(|yi| !near.contains(&yi)) {
                decoy_pool.push((x, y));
            }
        }
    }
    if decoy_pool.len() < spec.decoys {
        return Err(Error::Infeasible(format!(
            "decoys: {} requested but only {} pairs have no path of length ≤ {}",
            spec.decoys,
            decoy_pool.len(),
            spec.max_len
        )));
    }
    let decoys = sample_pairs(&mut b.rng, &decoy_pool, spec.decoys);
    // Other negatives come from the same unconnected pool, so with nothing
    // planted no learned path can flag any of them.
    let decoy_set: BTreeSet<(usize, usize)> = decoys.iter().copied().collect();
    let background_pool: Vec<(usize, usize)> = decoy_pool.iter().copied().filter(|p| !decoy_set.contains(p)).collect();
    let n_background = spec.negative_pairs - spec.planted - spec.decoys;
    if background_pool.len() < n_background {
        return Err(Error::Infeasible(format!(
            "negative pairs: {} background pairs requested but only {} remain with no path of length ≤ {}",
            n_background,
            background_pool.len(),
            spec.max_len
        )));
    }
    let background = sample_pairs(&mut b.rng, &background_pool, n_background);

    // Corpus.
    let mut corpus = Vec::new();
    let groups: [(&[(usize, usize)], bool); 4] =
        [(&target_list, true), (&planted, true), (&decoys, false), (&background, false)];
    for (pairs, related) in groups {
        for &(x, y) in pairs {
            for _ in 0..spec.sentences_per_pair {
                let s = sentence(&mut b.rng, &spec.text, &b.names[x], &b.names[y], related);
                corpus.push(s);
            }
        }
    }
    corpus.shuffle(&mut b.rng);
    for (i, s) in corpus.iter_mut().enumerate() {
        s.doc = format!("doc{i:06}");
    }

    let named = |pairs: &[(usize, usize)]| -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = pairs.iter().map(|&(x, y)| (b.names[x].clone(), b.names[y].clone())).collect();
        v.sort();
        v
    };
    let mut true_instances = target_list.clone();
    true_instances.extend(&planted);
    let truth = GroundTruth {
        target: spec.target.clone(),
        positives: named(&target_list),
        planted: named(&planted),
        planted_witnessed: named(&planted_witnessed),
        decoys: named(&decoys),
        background: named(&background),
        true_instances: named(&true_instances),
    };
    Ok(SynthInstance { graph: g, corpus, truth })
}

fn sentence(rng: &mut ChaCha8Rng, text: &TextModel, first: &str, second: &str, related: bool) -> Sentence {
    let (trigger, contrast, forward) = if related {
        (text.trigger_related, text.contrast_related, text.forward_related)
    } else {
        (text.trigger_unrelated, text.contrast_unrelated, text.forward_unrelated)
    };
    let neutral = |rng: &mut ChaCha8Rng| NEUTRAL.choose(rng).expect("non-empty").to_string();
    let gap = if rng.gen_bool(text.wide_gap_rate) {
        rng.gen_range(6..=7)
    } else {
        *[0, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 5].choose(rng).expect("non-empty")
    };
    let mut tokens: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| neutral(rng)).collect();
    let (a, b) = if rng.gen_bool(forward) { (first, second) } else { (second, first) };
    let a_at = tokens.len();
    tokens.push(a.to_string());
    for _ in 0..gap {
        let u: f64 = rng.gen();
        let w = if u < trigger {
            TRIGGERS.choose(rng).expect("non-empty").to_string()
        } else if u < trigger + contrast {
            CONTRASTS.choose(rng).expect("non-empty").to_string()
        } else {
            neutral(rng)
        };
        tokens.push(w);
    }
    let b_at = tokens.len();
    tokens.push(b.to_string());
    tokens.extend((0..rng.gen_range(0..=2)).map(|_| neutral(rng)));
    tokens.push(".".into());
    Sentence {
        doc: String::new(),
        tokens,
        mentions: vec![
            Mention { cui: a.to_string(), start: a_at, end: a_at },
            Mention { cui: b.to_string(), start: b_at, end: b_at },
        ],
        stems: None,
        pos: None,
    }
}

/// `count` distinct random triples over `entities` names and `relations`
/// relation names; for loader scale tests.
pub fn random_triples(count: usize, entities: usize, relations: usize, seed: u64) -> Result<String> {
    if entities < 2 || relations == 0 || count > entities * (entities - 1) * relations {
        return Err(Error::Infeasible(format!(
            "cannot draw {count} distinct triples over {entities} entities and {relations} relations"
        )));
    }
    let mut rng = sampling::rng(seed);
    let mut seen = std::collections::HashSet::with_capacity(count);
    let mut out = String::with_capacity(count * 24);
    while seen.len() < count {
        let s = rng.gen_range(0..entities);
        let o = rng.gen_range(0..entities);
        let r = rng.gen_range(0..relations);
        if s != o && seen.insert((s, r, o)) {
            out.push_str(&format!("C{s:07}\trel{r}\tC{o:07}\n"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        let mut s = SynthSpec::standard(seed);
        s.planted = 30;
        s.decoys = 170;
        s
    }

    #[test]
    fn counts_match_spec() {
        let spec = small(3);
        let inst = generate(&spec).unwrap();
        assert_eq!(inst.truth.planted.len(), 30);
        assert_eq!(inst.truth.decoys.len(), 170);
        assert_eq!(inst.truth.positives.len(), spec.target_edges);
        assert_eq!(inst.truth.background.len(), spec.negative_pairs - 200);
        assert_eq!(inst.corpus.len(), 3 * (spec.target_edges + spec.negative_pairs));
        assert_eq!(inst.graph.edge_count(&spec.target), spec.target_edges);
    }

    #[test]
    fn planted_witnessed_and_decoys_isolated() {
        let spec = small(5);
        let inst = generate(&spec).unwrap();
        let g = &inst.graph;
        let templates = template_paths(&spec).unwrap();
        let t = g.relation_key(&spec.target).unwrap();
        for (a, b) in GroundTruth::resolve(g, &inst.truth.planted) {
            assert!(witnessed(g, &templates, a, b));
            assert!(!g.has_edge(a, t, b));
        }
        for (a, b) in GroundTruth::resolve(g, &inst.truth.decoys) {
            assert!(!ball(g, a, spec.max_len).contains(&b));
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&SynthSpec::standard(11)).unwrap();
        let b = generate(&SynthSpec::standard(11)).unwrap();
        assert_eq!(a.graph.to_triple_string(), b.graph.to_triple_string());
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.corpus, b.corpus);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = SynthSpec::standard(0);
        s.planted = 1000;
        s.decoys = 1000;
        assert!(matches!(generate(&s), Err(Error::InvalidArgument(_))));
        let mut s = SynthSpec::standard(0);
        s.noise_rate = 1.0;
        assert!(generate(&s).is_err());
        let mut s = SynthSpec::standard(0);
        s.support_templates.push(vec!["gene_encodes_product".into()]);
        assert!(generate(&s).is_err());
    }

    #[test]
    fn too_many_decoys_is_infeasible() {
        let mut s = SynthSpec::standard(0);
        s.planted = 0;
        s.decoys = 60_000;
        s.negative_pairs = 60_000;
        match generate(&s) {
            Err(Error::Infeasible(m)) => assert!(m.starts_with("decoys")),
            other => panic!("expected infeasible decoys, got {other:?}"),
        }
    }
}
