//! Algorithmic core for detecting whether a follow-up query is directed at a
//! voice assistant.
//!
//! Everything in this crate is a pure function over in-memory data and builds
//! without `std` (an allocator is required). File formats, the HTTP backend
//! and the command line live in the `ddsd` crate.
//!
//! * [`lattice`]: ASR word lattices, 1-best and n-best extraction.
//! * [`promptgen`]: task and utterance prompt rendering.
//! * [`backend`]: the LLM abstraction, answer parsing and a deterministic mock.
//! * [`classifier`]: linear head, cross-entropy training and low-rank adapters.
//! * [`eval`]: FAR/FRR, DET curves, EER, operating points and paired t-tests.
//! * [`corpus`]: dataset records, speaker-disjoint splits and a synthetic generator.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backend;
pub mod classifier;
pub mod corpus;
pub mod eval;
pub mod lattice;
pub mod promptgen;
pub mod vocab;

mod hash;

pub use backend::{parse_answer, Backend, BackendConfig, BackendError, MockBackend, ParsedAnswer};
pub use classifier::{LinearHead, LoraAdapter, TrainConfig, TrainedModel};
pub use corpus::{DatasetRecord, Split, SynthConfig};
pub use eval::{DetCurve, MetricsReport, ScoredExample};
pub use lattice::{Hypothesis, Lattice};
pub use promptgen::{ContextMode, FollowupMode, PromptConfig, UtterancePair};
