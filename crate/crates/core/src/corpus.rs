//! Parallel corpora, alignment links and gold standards.
//!
//! Indices are 0-based everywhere. Input is taken as already tokenized on
//! whitespace; tokens are stored byte-for-byte.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SentencePair {
    pair_id: usize,
    source: Vec<String>,
    target: Vec<String>,
}

impl SentencePair {
    pub fn new(pair_id: usize, source: Vec<String>, target: Vec<String>) -> Result<Self> {
        for (side, tokens) in [("source", &source), ("target", &target)] {
            if tokens.is_empty() {
                return Err(Error::InvalidSentence { pair: pair_id, reason: format!("{side} side is empty") });
            }
            if let Some(tok) = tokens.iter().find(|t| t.is_empty() || t.chars().any(char::is_whitespace)) {
                return Err(Error::InvalidSentence {
                    pair: pair_id,
                    reason: format!("{side} token {tok:?} is empty or contains whitespace"),
                });
            }
        }
        Ok(Self { pair_id, source, target })
    }

    pub fn pair_id(&self) -> usize {
        self.pair_id
    }

    pub fn source(&self) -> &[String] {
        &self.source
    }

    pub fn target(&self) -> &[String] {
        &self.target
    }
}

/// An immutable sequence of sentence pairs whose ids are `0..len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    /// Builds a corpus from token sequences, numbering pairs in order.
    pub fn from_token_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<String>, Vec<String>)>,
    {
        let pairs = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (s, t))| SentencePair::new(id, s, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs })
    }

    /// Convenience constructor splitting each side on whitespace.
    pub fn from_strs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        Self::from_token_pairs(pairs.into_iter().map(|(s, t)| (split_tokens(s), split_tokens(t))))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[SentencePair] {
        &self.pairs
    }

    pub fn get(&self, id: usize) -> Option<&SentencePair> {
        self.pairs.get(id)
    }

    pub fn source_sentences(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|p| p.source())
    }

    pub fn target_sentences(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|p| p.target())
    }

    /// Swaps the source and target side of every pair.
    pub fn reversed(&self) -> Self {
        let pairs = self
            .pairs
            .iter()
            .map(|p| SentencePair { pair_id: p.pair_id, source: p.target.clone(), target: p.source.clone() })
            .collect();
        Self { pairs }
    }

    fn renumbered(pairs: impl IntoIterator<Item = SentencePair>) -> Self {
        let pairs = pairs.into_iter().enumerate().map(|(id, p)| SentencePair { pair_id: id, ..p }).collect();
        Self { pairs }
    }
}

pub(crate) fn split_tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(String::from).collect()
}

/// Draws `n` pairs uniformly without replacement, keeping their original order.
///
/// Returns the corpus unchanged when `n >= corpus.len()`.
pub fn subsample(corpus: &ParallelCorpus, n: usize, seed: u64) -> Result<ParallelCorpus> {
    if n == 0 {
        return Err(Error::InvalidArgument("subsample size must be at least 1".into()));
    }
    if n >= corpus.len() {
        return Ok(corpus.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, corpus.len(), n).into_vec();
    picked.sort_unstable();
    Ok(ParallelCorpus::renumbered(picked.into_iter().map(|i| corpus.pairs[i].clone())))
}

/// Appends an evaluation corpus to a training corpus and shifts the gold
/// standard so it indexes the combined corpus.
pub fn attach_evaluation_set(
    train: &ParallelCorpus,
    eval: &ParallelCorpus,
    gold: &GoldAlignment,
) -> Result<(ParallelCorpus, GoldAlignment)> {
    if let Some(&max) = gold.covered.iter().next_back() {
        if max >= eval.len() {
            return Err(Error::GoldOutOfRange { sentence: max, len: eval.len() });
        }
    }
    let combined = ParallelCorpus::renumbered(train.pairs.iter().chain(eval.pairs.iter()).cloned());
    Ok((combined, gold.shifted(train.len())))
}

/// One alignment edge between a source and a target word of a sentence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Link {
    pub sentence: usize,
    pub source: usize,
    pub target: usize,
}

impl Link {
    pub const fn new(sentence: usize, source: usize, target: usize) -> Self {
        Self { sentence, source, target }
    }

    pub const fn transposed(self) -> Self {
        Self { sentence: self.sentence, source: self.target, target: self.source }
    }
}

/// A set of links, ordered by (sentence, source, target).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlignmentSet {
    links: BTreeSet<Link>,
}

impl AlignmentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, link: Link) -> bool {
        self.links.insert(link)
    }

    pub fn contains(&self, link: &Link) -> bool {
        self.links.contains(link)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Link> + '_ {
        self.links.iter()
    }

    /// Links of one sentence, in (source, target) order.
    pub fn sentence(&self, sentence: usize) -> impl Iterator<Item = &Link> + '_ {
        self.links.range(Link::new(sentence, 0, 0)..=Link::new(sentence, usize::MAX, usize::MAX))
    }

    /// Distinct sentence ids that carry at least one link, ascending.
    pub fn sentence_ids(&self) -> BTreeSet<usize> {
        self.links.iter().map(|l| l.sentence).collect()
    }

    /// Links grouped per sentence.
    pub fn by_sentence(&self) -> BTreeMap<usize, Vec<Link>> {
        let mut out: BTreeMap<usize, Vec<Link>> = BTreeMap::new();
        for l in &self.links {
            out.entry(l.sentence).or_default().push(*l);
        }
        out
    }

    pub fn is_subset(&self, other: &AlignmentSet) -> bool {
        self.links.is_subset(&other.links)
    }

    pub fn intersection(&self, other: &AlignmentSet) -> AlignmentSet {
        self.links.intersection(&other.links).copied().collect()
    }

    pub fn union(&self, other: &AlignmentSet) -> AlignmentSet {
        self.links.union(&other.links).copied().collect()
    }

    pub fn transposed(&self) -> AlignmentSet {
        self.links.iter().map(|l| l.transposed()).collect()
    }

    pub fn retain(&mut self, f: impl FnMut(&Link) -> bool) {
        self.links.retain(f)
    }
}

impl FromIterator<Link> for AlignmentSet {
    fn from_iter<I: IntoIterator<Item = Link>>(iter: I) -> Self {
        Self { links: iter.into_iter().collect() }
    }
}

impl Extend<Link> for AlignmentSet {
    fn extend<I: IntoIterator<Item = Link>>(&mut self, iter: I) {
        self.links.extend(iter)
    }
}

impl<'a> IntoIterator for &'a AlignmentSet {
    type Item = &'a Link;
    type IntoIter = alloc::collections::btree_set::Iter<'a, Link>;

    fn into_iter(self) -> Self::IntoIter {
        self.links.iter()
    }
}

/// Gold standard with sure and possible edges. Every sure edge is also possible.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GoldAlignment {
    sure: AlignmentSet,
    possible: AlignmentSet,
    covered: BTreeSet<usize>,
}

impl GoldAlignment {
    /// Builds a gold standard, closing `possible` under `sure` and
    /// `covered` under the sentences that carry edges.
    pub fn new(sure: AlignmentSet, mut possible: AlignmentSet, mut covered: BTreeSet<usize>) -> Self {
        possible.extend(sure.iter().copied());
        covered.extend(possible.iter().map(|l| l.sentence));
        Self { sure, possible, covered }
    }

    pub fn sure(&self) -> &AlignmentSet {
        &self.sure
    }

    pub fn possible(&self) -> &AlignmentSet {
        &self.possible
    }

    pub fn covered_sentences(&self) -> &BTreeSet<usize> {
        &self.covered
    }

    /// Checks every edge against the sentence lengths of `corpus` and returns
    /// the edges that fall outside them.
    pub fn out_of_range(&self, corpus: &ParallelCorpus) -> Vec<Link> {
        self.possible
            .iter()
            .filter(|l| match corpus.get(l.sentence) {
                Some(p) => l.source >= p.source().len() || l.target >= p.target().len(),
                None => true,
            })
            .copied()
            .collect()
    }

    fn shifted(&self, offset: usize) -> Self {
        let shift = |set: &AlignmentSet| {
            set.iter().map(|l| Link::new(l.sentence + offset, l.source, l.target)).collect::<AlignmentSet>()
        };
        Self {
            sure: shift(&self.sure),
            possible: shift(&self.possible),
            covered: self.covered.iter().map(|s| s + offset).collect(),
        }
    }
}
