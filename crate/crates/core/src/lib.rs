//! Geometry of three-axis pattern scores over symptom and herb spaces.
//!
//! The pipeline covers per-axis score variance, the abstraction index with
//! permutation tests, cross-conditional generalization performance (CCGP)
//! of a linear SVM, multi-output regression trees from symptoms to herbs,
//! and classical MDS colour coding of herb vectors.

pub mod ccgp;
pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod geometry;
pub mod herbtree;
pub mod report;

pub use error::{Error, Result};
