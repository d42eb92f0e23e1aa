//! Core algorithms for a two-part breast-pathology pre-diagnosis system.
//!
//! The chatbot half is a retrieval matcher: sentences are normalized,
//! stripped of stopwords, stemmed and paired into bigram keys
//! ([`text`]), candidate statements are pulled from a response graph by
//! shared bigrams ([`knowledge`]) and the best one is picked by
//! Levenshtein similarity ([`matcher`]). [`dialogue`] drives a
//! consultation session on top of that and collects risk slots.
//!
//! The classifier half is a small float64 autodiff-free network toolkit
//! ([`nn`]) with the ACON-C activation, used to train the top layers of
//! a transfer-learning head over frozen backbone features ([`classifier`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the HTTP service live in the `prediag` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod dialogue;
pub mod knowledge;
pub mod matcher;
pub mod nn;
pub mod text;

pub use knowledge::{KnowledgeGraph, Statement, StatementId};
pub use matcher::{MatchResult, ResponsePolicy, SimilarityScore};
pub use text::{Preprocessor, ProcessedText};
