use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, RelKey, RelationId};

/// A composition of relation steps. The first argument of the first step is
/// the walk source; the second argument of the last step is the target.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RelationPath {
    steps: Vec<RelationId>,
}

impl RelationPath {
    pub fn new(steps: Vec<RelationId>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidPath(String::new()));
        }
        Ok(Self { steps })
    }

    pub fn single(rel: RelationId) -> Self {
        Self { steps: vec![rel] }
    }

    pub fn steps(&self) -> &[RelationId] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same relation read from target to source.
    pub fn reversed(&self) -> Self {
        Self { steps: self.steps.iter().rev().map(RelationId::inverse).collect() }
    }

    /// Machine form: `rel1,_rel2`.
    pub fn to_machine(&self) -> String {
        self.steps.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    }

    pub fn parse_machine(text: &str) -> Result<Self> {
        let text = text.trim();
        let steps = text
            .split(',')
            .map(|s| RelationId::parse(s.trim()))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::InvalidPath(text.to_owned()))?;
        Self::new(steps).map_err(|_| Error::InvalidPath(text.to_owned()))
    }

    /// Maps each step onto graph keys; `None` when some relation is unknown.
    pub(crate) fn resolve(&self, g: &KnowledgeGraph) -> Option<Vec<(RelKey, bool)>> {
        self.steps
            .iter()
            .map(|s| g.relation_key(s.name()).map(|k| (k, s.is_inverted())))
            .collect()
    }

    fn sort_key(&self) -> (usize, Vec<String>) {
        (self.steps.len(), self.steps.iter().map(ToString::to_string).collect())
    }
}

impl Ord for RelationPath {
    /// Shorter paths first, then lexicographic on rendered step names.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for RelationPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Intermediate variable names: a, b, c, ... then v<i>.
fn variable(i: usize, last: usize) -> String {
    if i == 0 {
        "x".into()
    } else if i == last {
        "y".into()
    } else if i <= 24 {
        char::from(b'a' + (i - 1) as u8).to_string()
    } else {
        format!("v{i}")
    }
}

impl fmt::Display for RelationPath {
    /// Report form, e.g. `gene-encodes(x,a) ∧ _plays-role(a,y)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.steps.len();
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(f, "{}({},{})", step, variable(i, last), variable(i + 1, last))?;
        }
        Ok(())
    }
}
