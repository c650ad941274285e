//! Knowledge graphs from named-entity-annotated speech transcripts, and the
//! graph neural networks (SAGE, GCN, GAT, SuperGAT) trained on them for node
//! classification and link prediction.

pub mod autodiff;
pub mod embed;
pub mod error;
pub mod graph;
pub mod layers;
pub mod metrics;
pub mod synth;
pub mod tasks;

pub use error::{Error, Result};
