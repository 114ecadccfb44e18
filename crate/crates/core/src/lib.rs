//! Keyword annotation for web images.
//!
//! Pages are parsed into source-tagged keywords, the most frequent keywords
//! become candidates, same-frequency candidates are ordered by their
//! correlation rank over a rule knowledge base, and every image is indexed
//! under its ranked keywords.

pub mod annotation_index;
pub mod fraction;
pub mod frequency;
pub mod importance_rank;
pub mod knowledge_base;
pub mod pipeline;
pub mod text_ingest;

pub use fraction::Fraction;
