//! Reference-free evaluation of acquired knowledge.
//!
//! This crate holds the pure part of the engine: the domain types, sentence
//! segmentation, the [`Backend`] contract every model service satisfies, a
//! closed-form [`MockBackend`], the intrinsic and extrinsic metrics, the
//! knowledge-quality score used for demonstration and candidate selection,
//! and the ordinal statistics used to validate metrics against human ratings.
//!
//! It is `no_std` and only needs `alloc`. Transport, caching, file formats and
//! the command line live in the `conner` crate.

#![no_std]

extern crate alloc;

pub mod backend;
pub mod error;
pub mod extrinsic;
pub mod intrinsic;
pub mod selection;
pub mod stats;
pub mod template;
pub mod text;
pub mod types;

pub use backend::{Backend, Endpoint, MockBackend, Passage, TokenLogprobs};
pub use error::{Error, Result};
pub use types::{
    Answer, AnswerKind, EvalItem, Evidence, FactualityMode, FactualityScore, HumanRatings,
    Knowledge, NliVector, Provenance, Query, ScoreCard, Sentence, TaskKind,
};
