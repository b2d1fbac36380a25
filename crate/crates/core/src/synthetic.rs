//! Synthetic bitexts with known gold alignments.
//!
//! The source language is a sequence of content words, some preceded by a
//! function word. The target language translates content words one-to-one
//! into stems, but glues each function word onto the following stem as a
//! suffix, and fuses some pairs of adjacent content words into one compound.
//! Every source word links to the target word that carries its translation,
//! so compounds and suffixed words have several sure links.
//!
//! Word-level aligners see many rare fused types; splitting them into
//! subwords exposes the shared stems and suffixes.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{attach_evaluation_set, AlignmentSet, GoldAlignment, Link, ParallelCorpus};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticConfig {
    /// Training pairs without gold.
    pub train_pairs: usize,
    /// Pairs with gold, appended after the training pairs.
    pub eval_pairs: usize,
    pub content_words: usize,
    pub function_words: usize,
    /// Inclusive range of content words per sentence.
    pub sentence_len: (usize, usize),
    /// Exponent of the Zipf distribution over content words.
    pub zipf_exponent: f64,
    /// Probability that a content word is preceded by a function word.
    pub function_word_rate: f64,
    /// Probability that two adjacent content words fuse into a compound.
    pub compound_rate: f64,
    /// Probability of swapping two adjacent target words.
    pub swap_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train_pairs: 5000,
            eval_pairs: 500,
            content_words: 1500,
            function_words: 8,
            sentence_len: (3, 7),
            zipf_exponent: 1.0,
            function_word_rate: 0.3,
            compound_rate: 0.3,
            swap_rate: 0.05,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBitext {
    /// Training pairs followed by the evaluation pairs.
    pub corpus: ParallelCorpus,
    /// Gold alignment of the evaluation pairs, indexed into `corpus`.
    pub gold: GoldAlignment,
    /// Gold alignment of every pair in `corpus`.
    pub full_gold: GoldAlignment,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn random_word<R: Rng>(rng: &mut R, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
        if rng.gen_bool(0.3) {
            w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
        }
    }
    w
}

fn lexicon<R: Rng>(rng: &mut R, n: usize, syllables: (usize, usize), taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syl = rng.gen_range(syllables.0..=syllables.1);
        let w = random_word(rng, syl);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

struct Zipf {
    cumulative: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..n)
            .map(|r| {
                acc += 1.0 / libm::pow(r as f64 + 1.0, exponent);
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Generates a bitext and its gold alignment.
pub fn generate(config: &SyntheticConfig) -> Result<SyntheticBitext> {
    if config.content_words == 0 || config.sentence_len.0 == 0 || config.sentence_len.0 > config.sentence_len.1 {
        return Err(Error::InvalidArgument("synthetic config needs content words and a valid length range".into()));
    }
    if config.eval_pairs == 0 {
        return Err(Error::InvalidArgument("synthetic config needs at least one evaluation pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut taken = BTreeSet::new();
    let src_content = lexicon(&mut rng, config.content_words, (1, 3), &mut taken);
    let src_function = lexicon(&mut rng, config.function_words, (1, 1), &mut taken);
    let mut taken_tgt = BTreeSet::new();
    let tgt_stems = lexicon(&mut rng, config.content_words, (2, 3), &mut taken_tgt);
    let mut suffix_set = BTreeSet::new();
    let tgt_suffixes = lexicon(&mut rng, config.function_words, (1, 1), &mut suffix_set);
    let zipf = Zipf::new(config.content_words, config.zipf_exponent);

    let total = config.train_pairs + config.eval_pairs;
    let mut pairs = Vec::with_capacity(total);
    let mut sure = AlignmentSet::new();
    for s in 0..total {
        let len = rng.gen_range(config.sentence_len.0..=config.sentence_len.1);
        let mut source: Vec<String> = Vec::new();
        // Target words as (surface, source positions it translates).
        let mut target: Vec<(String, Vec<usize>)> = Vec::new();
        let mut k = 0;
        while k < len {
            let mut word = String::new();
            let mut links = Vec::new();
            let mut parts = 1;
            if k + 1 < len && rng.gen_bool(config.compound_rate) {
                parts = 2;
            }
            let mut suffix: Option<(usize, usize)> = None;
            for part in 0..parts {
                if config.function_words > 0 && rng.gen_bool(config.function_word_rate) {
                    let f = rng.gen_range(0..config.function_words);
                    links.push(source.len());
                    source.push(src_function[f].clone());
                    // A compound carries a single suffix slot; the last function word wins.
                    suffix = Some((f, part));
                }
                let c = zipf.sample(&mut rng);
                links.push(source.len());
                source.push(src_content[c].clone());
                word.push_str(&tgt_stems[c]);
            }
            if let Some((f, _)) = suffix {
                word.push_str(&tgt_suffixes[f]);
            }
            target.push((word, links));
            k += parts;
        }
        for t in 0..target.len().saturating_sub(1) {
            if rng.gen_bool(config.swap_rate) {
                target.swap(t, t + 1);
            }
        }
        for (j, (_, links)) in target.iter().enumerate() {
            for &i in links {
                sure.insert(Link::new(s, i, j));
            }
        }
        pairs.push((source, target.into_iter().map(|(w, _)| w).collect::<Vec<_>>()));
    }

    let corpus = ParallelCorpus::from_token_pairs(pairs)?;
    let full_gold = GoldAlignment::new(sure, AlignmentSet::new(), (0..total).collect());
    let eval_gold = GoldAlignment::new(
        full_gold
            .sure()
            .iter()
            .filter(|l| l.sentence >= config.train_pairs)
            .map(|l| Link::new(l.sentence - config.train_pairs, l.source, l.target))
            .collect(),
        AlignmentSet::new(),
        (0..config.eval_pairs).collect(),
    );
    let train = ParallelCorpus::from_token_pairs(
        corpus.pairs()[..config.train_pairs].iter().map(|p| (p.source().to_vec(), p.target().to_vec())),
    )?;
    let eval = ParallelCorpus::from_token_pairs(
        corpus.pairs()[config.train_pairs..].iter().map(|p| (p.source().to_vec(), p.target().to_vec())),
    )?;
    let (corpus, gold) = attach_evaluation_set(&train, &eval, &eval_gold)?;
    Ok(SyntheticBitext { corpus, gold, full_gold })
}

/// A corpus whose true alignment is the identity: target word `i` translates
/// source word `i`, with a vocabulary of `vocab` words per side.
pub fn diagonal(pairs: usize, vocab: usize, len: (usize, usize), seed: u64) -> Result<(ParallelCorpus, AlignmentSet)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gold = AlignmentSet::new();
    let mut out = Vec::with_capacity(pairs);
    for s in 0..pairs {
        let n = rng.gen_range(len.0..=len.1);
        let words: Vec<usize> = (0..n).map(|_| rng.gen_range(0..vocab)).collect();
        let src = words.iter().map(|w| alloc::format!("s{w}")).collect();
        let tgt = words.iter().map(|w| alloc::format!("t{w}")).collect();
        for i in 0..n {
            gold.insert(Link::new(s, i, i));
        }
        out.push((src, tgt));
    }
    Ok((ParallelCorpus::from_token_pairs(out)?, gold))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_consistent() {
        let cfg = SyntheticConfig { train_pairs: 50, eval_pairs: 20, ..SyntheticConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.corpus.len(), 70);
        assert!(a.gold.covered_sentences().iter().all(|&s| (50..70).contains(&s)));
        assert!(a.gold.out_of_range(&a.corpus).is_empty());
        assert!(a.full_gold.out_of_range(&a.corpus).is_empty());
        // Every source word is linked exactly once.
        for (s, p) in a.corpus.pairs().iter().enumerate() {
            let n = a.full_gold.sure().sentence(s).count();
            assert_eq!(n, p.source().len());
        }
    }

    #[test]
    fn different_seed_different_lexicon() {
        let a = generate(&SyntheticConfig { train_pairs: 10, eval_pairs: 5, seed: 1, ..SyntheticConfig::default() })
            .unwrap();
        let b = generate(&SyntheticConfig { train_pairs: 10, eval_pairs: 5, seed: 2, ..SyntheticConfig::default() })
            .unwrap();
        assert_ne!(a.corpus, b.corpus);
    }
}
