//! Path Ranking Algorithm over typed knowledge graphs, and its use for
//! removing likely false negatives from distantly supervised
//! relation-extraction training data.
//!
//! The numeric core is generic over the scalar type: walk probabilities
//! accept any [`scalar::Probability`] (including exact rationals) and the
//! optimizer any [`scalar::Real`]. The aliases below fix `f64`, which the
//! pipeline uses throughout.

pub mod error;
pub mod eval;
pub mod extractor;
pub mod filter;
pub mod kg;
pub mod labeler;
pub mod logistic;
pub mod path;
pub mod pra;
pub mod sampling;
pub mod scalar;
pub mod synth;
pub mod walk;

pub use error::{Error, Result};
pub use kg::{load_triples, EntityId, KnowledgeGraph, Pair, RelationId};
pub use labeler::{LabeledDataset, Sentence};
pub use path::RelationPath;

pub type FeatureMatrix = walk::FeatureMatrix<f64>;
pub type PathModel = pra::PathModel<f64>;
pub type LogisticFit = logistic::LogisticFit<f64>;
pub type ExtractorModel = extractor::ExtractorModel<f64>;
pub type PairPrediction = extractor::PairPrediction<f64>;
