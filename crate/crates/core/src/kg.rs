//! Typed knowledge graph built from `subject<TAB>relation<TAB>object` triples.
//!
//! Entities and relation names are interned; ids follow first-appearance
//! order, and every neighbor list is sorted by id so that walks and path
//! enumeration are reproducible. Once built, a graph is immutable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interned entity identifier. Ordering follows interning order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

/// Interned (non-inverted) relation label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelKey(pub u32);

/// Ordered entity pair `(first, second)`.
pub type Pair = (EntityId, EntityId);

/// A relation label with a traversal direction.
///
/// The inverse of `r` renders as `_r`. Names starting with `_` are reserved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId {
    name: String,
    inverted: bool,
}

impl RelationId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        validate_relation_name(&name)?;
        Ok(Self { name, inverted: false })
    }

    /// Parses the textual form, where a leading underscore marks inversion.
    pub fn parse(text: &str) -> Result<Self> {
        match text.strip_prefix('_') {
            Some(base) => Ok(Self::new(base)?.inverse()),
            None => Self::new(text),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    pub fn inverse(&self) -> Self {
        Self { name: self.name.clone(), inverted: !self.inverted }
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "_{}", self.name)
        } else {
            f.write_str(&self.name)
        }
    }
}

fn validate_relation_name(name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::InvalidArgument("empty relation name".into()));
    }
    if name.starts_with('_') {
        return Err(Error::InvalidArgument(format!(
            "relation `{name}` starts with `_`, which is reserved for inversion"
        )));
    }
    Ok(())
}

/// Stored edge. The relation is always in its forward direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelKey,
    pub object: EntityId,
}

#[derive(Debug, Default, Clone)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("fewer than 2^32 symbols");
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

type Adjacency = Vec<BTreeMap<RelKey, Vec<EntityId>>>;

/// Accumulates triples; [`GraphBuilder::build`] produces the indexed graph.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    entities: Interner,
    relations: Interner,
    triples: BTreeSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> Result<EntityId> {
        if name.is_empty() {
            return Err(Error::InvalidArgument("empty entity identifier".into()));
        }
        Ok(EntityId(self.entities.intern(name)))
    }

    pub fn add(&mut self, subject: &str, relation: &str, object: &str) -> Result<()> {
        validate_relation_name(relation)?;
        let subject = self.entity(subject)?;
        let object = self.entity(object)?;
        let relation = RelKey(self.relations.intern(relation));
        self.triples.insert(Triple { subject, relation, object });
        Ok(())
    }

    pub fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(Arc::new(self.entities), Arc::new(self.relations), self.triples)
    }
}

/// Immutable, indexed typed multigraph.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Arc<Interner>,
    relations: Arc<Interner>,
    triples: BTreeSet<Triple>,
    forward: Adjacency,
    backward: Adjacency,
    edge_counts: BTreeMap<RelKey, usize>,
    self_loops: usize,
}

impl KnowledgeGraph {
    fn from_parts(entities: Arc<Interner>, relations: Arc<Interner>, triples: BTreeSet<Triple>) -> Self {
        let n = entities.len();
        let mut forward: Adjacency = vec![BTreeMap::new(); n];
        let mut backward: Adjacency = vec![BTreeMap::new(); n];
        let mut edge_counts = BTreeMap::new();
        let mut self_loops = 0;
        for t in &triples {
            forward[t.subject.0 as usize].entry(t.relation).or_default().push(t.object);
            backward[t.object.0 as usize].entry(t.relation).or_default().push(t.subject);
            *edge_counts.entry(t.relation).or_insert(0) += 1;
            if t.subject == t.object {
                self_loops += 1;
            }
        }
        // Forward lists arrive sorted from the ordered triple set; backward ones do not.
        for lists in backward.iter_mut() {
            for list in lists.values_mut() {
                list.sort_unstable();
            }
        }
        Self { entities, relations, triples, forward, backward, edge_counts, self_loops }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn entity(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relation_key(&self, name: &str) -> Option<RelKey> {
        self.relations.get(name).map(RelKey)
    }

    pub fn relation_name(&self, key: RelKey) -> &str {
        self.relations.name(key.0)
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn self_loops(&self) -> usize {
        self.self_loops
    }

    /// Relation catalog: `(name, edge count)` for every relation with at least one edge.
    pub fn relations(&self) -> impl Iterator<Item = (&str, usize)> {
        self.edge_counts.iter().map(|(&k, &c)| (self.relation_name(k), c))
    }

    pub fn relation_keys(&self) -> impl Iterator<Item = RelKey> + '_ {
        self.edge_counts.keys().copied()
    }

    pub fn edge_count(&self, relation: &str) -> usize {
        self.relation_key(relation)
            .and_then(|k| self.edge_counts.get(&k).copied())
            .unwrap_or(0)
    }

    pub fn has_relation(&self, relation: &str) -> bool {
        self.edge_count(relation) > 0
    }

    pub fn has_edge(&self, subject: EntityId, relation: RelKey, object: EntityId) -> bool {
        self.triples.contains(&Triple { subject, relation, object })
    }

    /// `(subject, object)` pairs of every edge labelled `relation`, in triple order.
    pub fn edges_of(&self, relation: &str) -> Vec<Pair> {
        let Some(key) = self.relation_key(relation) else {
            return Vec::new();
        };
        self.triples
            .iter()
            .filter(|t| t.relation == key)
            .map(|t| (t.subject, t.object))
            .collect()
    }

    /// Neighbors of `node` under `rel`; inverted relations read the backward index.
    pub fn neighbors(&self, node: EntityId, rel: &RelationId) -> &[EntityId] {
        match self.relation_key(rel.name()) {
            Some(key) => self.neighbors_by_key(node, key, rel.is_inverted()),
            None => &[],
        }
    }

    pub fn neighbors_by_key(&self, node: EntityId, key: RelKey, inverted: bool) -> &[EntityId] {
        let index = if inverted { &self.backward } else { &self.forward };
        index
            .get(node.0 as usize)
            .and_then(|m| m.get(&key))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Every `(relation, inverted, neighbors)` step available from `node`,
    /// forward relations first, each group in relation-id order.
    pub fn steps_from(&self, node: EntityId) -> impl Iterator<Item = (RelKey, bool, &[EntityId])> {
        let i = node.0 as usize;
        let fwd = self.forward.get(i).into_iter().flatten().map(|(&k, v)| (k, false, v.as_slice()));
        let bwd = self.backward.get(i).into_iter().flatten().map(|(&k, v)| (k, true, v.as_slice()));
        fwd.chain(bwd)
    }

    /// Copy of the graph without the listed `(subject, relation, object)` edges.
    ///
    /// Entity and relation ids are shared with `self`.
    pub fn remove_relation_edges(&self, relation: &str, pairs: &BTreeSet<Pair>) -> KnowledgeGraph {
        let Some(key) = self.relation_key(relation) else {
            return self.clone();
        };
        if pairs.is_empty() {
            return self.clone();
        }
        let triples = self
            .triples
            .iter()
            .filter(|t| !(t.relation == key && pairs.contains(&(t.subject, t.object))))
            .copied()
            .collect();
        Self::from_parts(Arc::clone(&self.entities), Arc::clone(&self.relations), triples)
    }

    /// Writes the triple file form, one line per triple in stored order.
    pub fn write_triples<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.triples {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entity_name(t.subject),
                self.relation_name(t.relation),
                self.entity_name(t.object)
            )?;
        }
        Ok(())
    }

    pub fn to_triple_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_triples(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("names are UTF-8")
    }

    /// Triples as owned strings, for comparisons across graphs.
    pub fn named_triples(&self) -> BTreeSet<(String, String, String)> {
        self.triples
            .iter()
            .map(|t| {
                (
                    self.entity_name(t.subject).to_owned(),
                    self.relation_name(t.relation).to_owned(),
                    self.entity_name(t.object).to_owned(),
                )
            })
            .collect()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            triples: self.len(),
            entities: self.num_entities(),
            relations: self.relations().map(|(n, c)| (n.to_owned(), c)).collect(),
            self_loops: self.self_loops,
        }
    }
}

/// Parses triple-file content. Blank lines and `#` comments are skipped.
pub fn load_triples(source: &str) -> Result<KnowledgeGraph> {
    read_triples(source.as_bytes())
}

pub fn read_triples<R: BufRead>(reader: R) -> Result<KnowledgeGraph> {
    let mut builder = GraphBuilder::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        builder
            .add(fields[0], fields[1], fields[2])
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
    }
    Ok(builder.build())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    pub triples: usize,
    pub entities: usize,
    pub relations: BTreeMap<String, usize>,
    pub self_loops: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "triples: {}", self.triples)?;
        writeln!(f, "entities: {}", self.entities)?;
        writeln!(f, "relations: {}", self.relations.len())?;
        writeln!(f, "self_loops: {}", self.self_loops)?;
        for (name, count) in &self.relations {
            writeln!(f, "relation.{name}: {count}")?;
        }
        Ok(())
    }
}
