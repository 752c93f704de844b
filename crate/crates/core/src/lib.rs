//! Communication-triplet scoring for industrial control networks.
//!
//! Connection logs become `(server, relation, client)` triplets, a relational
//! graph autoencoder learns embeddings for them, and unseen triplets are
//! scored against the learned whitelist.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod numeric;
pub mod optim;
pub mod scorer;
pub mod scoring;
pub mod snapshot;
pub mod synthgen;

pub use error::{Error, Result};
