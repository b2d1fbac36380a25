//! Word alignment for small parallel corpora by subword sampling.
//!
//! A bitext is segmented at many byte-pair-encoding granularities, each view is
//! aligned with an IBM-style aligner, subword links are projected back to words
//! and the per-view word alignments are combined by a threshold vote. Which
//! granularities to combine is chosen by a greedy Bayesian-optimization loop
//! against gold alignments, and the chosen settings can be replayed on a new
//! language pair without supervision.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the external
//! aligner adapter and the command-line tool live in the `subalign` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod aligner;
pub mod bpe;
pub mod corpus;
mod error;
pub mod linkops;
pub mod metrics;
pub mod optimizer;
pub mod synthetic;

pub use crate::error::{Error, Result};

pub(crate) type FxHashMap<K, V> = hashbrown::HashMap<K, V, rustc_hash::FxBuildHasher>;
