//! Path discovery and random-walk path features.
//!
//! Feature values are exact path-constrained random-walk probabilities: at
//! every step the walker picks uniformly among the neighbors reachable under
//! that step's relation, and dies where none exist. Discovery enumerates
//! every relation sequence up to a length bound breadth-first.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, Pair, RelKey, RelationId, Triple};
use crate::path::RelationPath;
use crate::scalar::Probability;

pub const DEFAULT_MAX_LEN: usize = 3;
pub const DEFAULT_MIN_SUPPORT: usize = 2;
pub const DEFAULT_FANOUT_CAP: usize = 10_000;

type Step = (RelKey, bool);

/// Neighbors of `node` under `step`, minus the endpoint of `excluded` if the
/// traversal would cross that edge.
fn step_neighbors<'g>(
    g: &'g KnowledgeGraph,
    node: EntityId,
    (key, inverted): Step,
    excluded: Option<Triple>,
) -> std::borrow::Cow<'g, [EntityId]> {
    let nbrs = g.neighbors_by_key(node, key, inverted);
    match excluded {
        Some(t) if t.relation == key => {
            let (from, to) = if inverted { (t.object, t.subject) } else { (t.subject, t.object) };
            if from == node && nbrs.binary_search(&to).is_ok() {
                nbrs.iter().copied().filter(|&n| n != to).collect::<Vec<_>>().into()
            } else {
                nbrs.into()
            }
        }
        _ => nbrs.into(),
    }
}

/// Distribution over walk endpoints for `path` started at `source`.
pub fn rw_probability<T: Probability>(
    g: &KnowledgeGraph,
    path: &RelationPath,
    source: EntityId,
) -> BTreeMap<EntityId, T> {
    rw_probability_excluding(g, path, source, None)
}

/// As [`rw_probability`], with one edge treated as absent.
pub fn rw_probability_excluding<T: Probability>(
    g: &KnowledgeGraph,
    path: &RelationPath,
    source: EntityId,
    excluded: Option<Triple>,
) -> BTreeMap<EntityId, T> {
    if source.0 as usize >= g.num_entities() {
        return BTreeMap::new();
    }
    let Some(steps) = path.resolve(g) else {
        return BTreeMap::new();
    };
    let mut mass = BTreeMap::from([(source, T::one())]);
    for &step in &steps {
        let mut next: BTreeMap<EntityId, T> = BTreeMap::new();
        for (node, m) in mass {
            let nbrs = step_neighbors(g, node, step, excluded);
            if nbrs.is_empty() {
                continue;
            }
            let share = m / T::from_usize(nbrs.len()).expect("neighbor count fits the scalar");
            for &n in nbrs.iter() {
                let slot = next.entry(n).or_insert_with(T::zero);
                *slot = slot.clone() + share.clone();
            }
        }
        if next.is_empty() {
            return next;
        }
        mass = next;
    }
    mass
}

/// True iff some walk instantiates `path` from `source` to `target`.
pub fn path_exists(g: &KnowledgeGraph, path: &RelationPath, source: EntityId, target: EntityId) -> bool {
    match path.resolve(g) {
        Some(steps) => reachable(g, &steps, source, target, None),
        None => false,
    }
}

fn reachable(g: &KnowledgeGraph, steps: &[Step], source: EntityId, target: EntityId, excluded: Option<Triple>) -> bool {
    if source.0 as usize >= g.num_entities() {
        return false;
    }
    let (last, init) = steps.split_last().expect("paths are non-empty");
    let mut frontier = BTreeSet::from([source]);
    for &step in init {
        frontier = frontier
            .iter()
            .flat_map(|&n| step_neighbors(g, n, step, excluded).into_owned())
            .collect();
        if frontier.is_empty() {
            return false;
        }
    }
    frontier
        .iter()
        .any(|&n| step_neighbors(g, n, *last, excluded).binary_search(&target).is_ok())
}

/// Breadth-first path discovery settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSearch {
    pub max_len: usize,
    pub min_support: usize,
    /// Cap on the node set reached by one prefix from one source.
    pub fanout_cap: usize,
    /// Each pair's own edge of this relation is ignored while searching from it.
    pub held_out_relation: Option<String>,
}

impl Default for PathSearch {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            min_support: DEFAULT_MIN_SUPPORT,
            fanout_cap: DEFAULT_FANOUT_CAP,
            held_out_relation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathDiscovery {
    pub paths: Vec<RelationPath>,
    /// Number of pairs each path connects, aligned with `paths`.
    pub support: Vec<usize>,
    /// Prefix frontiers cut at `fanout_cap`.
    pub truncated: usize,
}

/// Every path of length ≤ `max_len` connecting at least `min_support` pairs.
pub fn enumerate_paths(g: &KnowledgeGraph, pairs: &[Pair], max_len: usize, min_support: usize) -> Vec<RelationPath> {
    let search = PathSearch { max_len, min_support, ..PathSearch::default() };
    discover_paths(g, pairs, &search).map(|d| d.paths).unwrap_or_default()
}

pub fn discover_paths(g: &KnowledgeGraph, pairs: &[Pair], search: &PathSearch) -> Result<PathDiscovery> {
    if search.max_len == 0 || search.min_support == 0 || search.fanout_cap == 0 {
        return Err(Error::InvalidArgument("max_len, min_support and fanout_cap must be ≥ 1".into()));
    }
    let held_out = search.held_out_relation.as_deref().and_then(|r| g.relation_key(r));
    let per_pair: Vec<(BTreeSet<Vec<Step>>, usize)> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let excluded = held_out.map(|relation| Triple { subject: s, relation, object: t });
            connecting_paths(g, s, t, search.max_len, search.fanout_cap, excluded)
        })
        .collect();

    let mut support: BTreeMap<Vec<Step>, usize> = BTreeMap::new();
    let mut truncated = 0;
    for (paths, cut) in per_pair {
        truncated += cut;
        for p in paths {
            *support.entry(p).or_insert(0) += 1;
        }
    }
    let mut found: Vec<(RelationPath, usize)> = support
        .into_iter()
        .filter(|&(_, c)| c >= search.min_support)
        .map(|(steps, c)| (to_relation_path(g, &steps), c))
        .collect();
    found.sort_by(|a, b| a.0.cmp(&b.0));
    let (paths, support) = found.into_iter().unzip();
    Ok(PathDiscovery { paths, support, truncated })
}

fn to_relation_path(g: &KnowledgeGraph, steps: &[Step]) -> RelationPath {
    let rels = steps
        .iter()
        .map(|&(k, inv)| {
            let r = RelationId::new(g.relation_name(k)).expect("stored relation names are valid");
            if inv { r.inverse() } else { r }
        })
        .collect();
    RelationPath::new(rels).expect("discovered paths are non-empty")
}

fn connecting_paths(
    g: &KnowledgeGraph,
    source: EntityId,
    target: EntityId,
    max_len: usize,
    cap: usize,
    excluded: Option<Triple>,
) -> (BTreeSet<Vec<Step>>, usize) {
    let mut found = BTreeSet::new();
    let mut truncated = 0;
    if source.0 as usize >= g.num_entities() {
        return (found, truncated);
    }
    let mut frontier: BTreeMap<Vec<Step>, BTreeSet<EntityId>> = BTreeMap::from([(Vec::new(), BTreeSet::from([source]))]);
    for depth in 1..=max_len {
        let mut next: BTreeMap<Vec<Step>, BTreeSet<EntityId>> = BTreeMap::new();
        for (prefix, nodes) in &frontier {
            for &node in nodes {
                for (key, inverted, _) in g.steps_from(node) {
                    let step = (key, inverted);
                    let nbrs = step_neighbors(g, node, step, excluded);
                    if nbrs.is_empty() {
                        continue;
                    }
                    let mut path = prefix.clone();
                    path.push(step);
                    next.entry(path).or_default().extend(nbrs.iter().copied());
                }
            }
        }
        for (path, nodes) in next.iter_mut() {
            if nodes.contains(&target) {
                found.insert(path.clone());
            }
            if nodes.len() > cap {
                truncated += 1;
                *nodes = std::mem::take(nodes).into_iter().take(cap).collect();
            }
        }
        if depth == max_len {
            break;
        }
        frontier = next;
    }
    (found, truncated)
}

/// Pair-by-path matrix of walk probabilities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pairs: Vec<Pair>,
    paths: Vec<RelationPath>,
    values: Vec<T>,
}

impl<T: Probability> FeatureMatrix<T> {
    /// Builds a matrix directly; used for tests and for externally computed features.
    pub fn from_rows(pairs: Vec<Pair>, paths: Vec<RelationPath>, rows: Vec<Vec<T>>) -> Result<Self> {
        if pairs.len() != rows.len() {
            return Err(Error::InvalidArgument("row labels and rows differ in length".into()));
        }
        if rows.iter().any(|r| r.len() != paths.len()) {
            return Err(Error::InvalidArgument("row width differs from path count".into()));
        }
        Ok(Self { pairs, paths, values: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.pairs.len()
    }

    pub fn cols(&self) -> usize {
        self.paths.len()
    }

    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub fn paths(&self) -> &[RelationPath] {
        &self.paths
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.values[row * self.paths.len() + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        let w = self.paths.len();
        &self.values[row * w..(row + 1) * w]
    }

    fn drop_zero_columns(self) -> Self {
        let w = self.paths.len();
        let keep: Vec<bool> = (0..w)
            .map(|j| (0..self.pairs.len()).any(|i| !self.values[i * w + j].is_zero()))
            .collect();
        if keep.iter().all(|&k| k) {
            return self;
        }
        let paths = self.paths.into_iter().zip(&keep).filter(|(_, &k)| k).map(|(p, _)| p).collect();
        let values = self
            .values
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep[i % w])
            .map(|(_, v)| v)
            .collect();
        Self { pairs: self.pairs, paths, values }
    }
}

/// Cell `(i, j)` is the probability that a walk along `paths[j]` from
/// `pairs[i].0` ends at `pairs[i].1`. All-zero columns are dropped along
/// with their paths.
pub fn build_feature_matrix<T: Probability>(
    g: &KnowledgeGraph,
    pairs: &[Pair],
    paths: &[RelationPath],
) -> Result<FeatureMatrix<T>> {
    build_feature_matrix_excluding(g, pairs, paths, None)
}

/// As [`build_feature_matrix`], ignoring each pair's own edge of `held_out`.
pub fn build_feature_matrix_excluding<T: Probability>(
    g: &KnowledgeGraph,
    pairs: &[Pair],
    paths: &[RelationPath],
    held_out: Option<&str>,
) -> Result<FeatureMatrix<T>> {
    if paths.is_empty() {
        return Err(Error::InvalidArgument("feature matrix needs at least one path".into()));
    }
    let held_out = held_out.and_then(|r| g.relation_key(r));
    let rows: Vec<Vec<T>> = pairs
        .par_iter()
        .map(|&(s, t)| {
            let excluded = held_out
                .map(|relation| Triple { subject: s, relation, object: t })
                .filter(|tr| g.has_edge(tr.subject, tr.relation, tr.object));
            paths
                .iter()
                .map(|p| rw_probability_excluding::<T>(g, p, s, excluded).remove(&t).unwrap_or_else(T::zero))
                .collect()
        })
        .collect();
    Ok(FeatureMatrix::from_rows(pairs.to_vec(), paths.to_vec(), rows)?.drop_zero_columns())
}
