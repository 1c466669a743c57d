//! Graph-aligned probabilistic latent semantic indexing.
//!
//! Estimates document-topic mixtures `W` and topic-word distributions `A`
//! from a document-term frequency matrix and a document similarity graph.
//! The left singular subspace of the frequency matrix is denoised with a
//! graph total-variation penalty whose strength is picked by cross-validation
//! over spanning-tree folds; topics are then recovered by vertex hunting.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod corpus;
pub mod decomposition;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod simplex;
pub mod tv;

pub use error::{GplsiError, Result};
