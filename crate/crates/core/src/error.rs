use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid sentence pair {pair}: {reason}")]
    InvalidSentence { pair: usize, reason: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("gold alignment references sentence {sentence} but the evaluation corpus has {len} sentences")]
    GoldOutOfRange { sentence: usize, len: usize },

    #[error("invalid gold alignment: {0}")]
    InvalidGold(String),

    #[error("invalid merge table: {0}")]
    InvalidMergeTable(String),

    /// A subword link points outside the word map it is projected through,
    /// which means the alignment and the segmentation come from different schemes.
    #[error("integrity error in sentence {sentence}: {reason}")]
    Integrity { sentence: usize, reason: String },

    #[error("search space exhausted: every cell has already been selected")]
    SpaceExhausted,

    #[error("aligner backend failed: {0}")]
    Backend(String),
}
