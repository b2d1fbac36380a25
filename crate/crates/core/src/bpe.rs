//! Byte-pair encoding over whitespace-delimited words.
//!
//! Merges are learned per language side and never cross word boundaries. The
//! first `k` merges of a [`MergeTable`] define one segmentation granularity; a
//! pair of granularities, one per side, is a [`SegmentationScheme`].
//!
//! During learning each word carries an end-of-word symbol so that suffixes
//! and word-internal pieces are distinct. Segmented output drops it and marks
//! every non-final subword with [`CONTINUATION`] instead. Projection back to
//! words goes through [`SegmentedSentence::word_of_token`], so the marker
//! strings never influence alignment.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;

use crate::corpus::ParallelCorpus;
use crate::{Error, FxHashMap, Result};

pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION: &str = "@@";

/// Granularity of one side of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VocabSize {
    /// Number of merge steps applied.
    Merges(u32),
    /// Unsegmented words.
    Word,
}

impl VocabSize {
    pub fn merges(self) -> Option<u32> {
        match self {
            VocabSize::Merges(k) => Some(k),
            VocabSize::Word => None,
        }
    }

    /// Clamps a merge count to `max`; `Word` is left alone.
    pub fn clamped(self, max: u32) -> Self {
        match self {
            VocabSize::Merges(k) => VocabSize::Merges(k.min(max)),
            VocabSize::Word => VocabSize::Word,
        }
    }
}

impl fmt::Display for VocabSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VocabSize::Merges(k) => write!(f, "{k}"),
            VocabSize::Word => f.write_str("WORD"),
        }
    }
}

impl core::str::FromStr for VocabSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("word") {
            return Ok(VocabSize::Word);
        }
        s.parse::<u32>()
            .map(VocabSize::Merges)
            .map_err(|_| Error::InvalidArgument(format!("vocabulary size {s:?} is neither WORD nor a merge count")))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for VocabSize {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            VocabSize::Merges(k) => serializer.serialize_u32(*k),
            VocabSize::Word => serializer.serialize_str("WORD"),
        }
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for VocabSize {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = VocabSize;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a merge count or \"WORD\"")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<VocabSize, E> {
                u32::try_from(v).map(VocabSize::Merges).map_err(E::custom)
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<VocabSize, E> {
                u32::try_from(v).map(VocabSize::Merges).map_err(E::custom)
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<VocabSize, E> {
                v.parse().map_err(E::custom)
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

/// One cell of the granularity grid: a (source, target) pair of vocabulary sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SegmentationScheme {
    pub source: VocabSize,
    pub target: VocabSize,
}

impl SegmentationScheme {
    pub const WORD: Self = Self { source: VocabSize::Word, target: VocabSize::Word };

    pub const fn new(source: VocabSize, target: VocabSize) -> Self {
        Self { source, target }
    }

    pub const fn merges(source: u32, target: u32) -> Self {
        Self { source: VocabSize::Merges(source), target: VocabSize::Merges(target) }
    }

    pub fn validate(&self, source_table: &MergeTable, target_table: &MergeTable) -> Result<()> {
        for (size, table, side) in [(self.source, source_table, "source"), (self.target, target_table, "target")] {
            if let VocabSize::Merges(k) = size {
                if k > table.max_merges() {
                    return Err(Error::InvalidArgument(format!(
                        "{side} merge count {k} exceeds the {} learned merges",
                        table.max_merges()
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SegmentationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.source, self.target)
    }
}

/// Ordered BPE merges of one language side.
#[derive(Debug, Clone)]
pub struct MergeTable {
    merges: Vec<(String, String)>,
    affected: Vec<u32>,
    index: MergeIndex,
}

impl PartialEq for MergeTable {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges && self.affected == other.affected
    }
}

impl Eq for MergeTable {}

#[derive(Debug, Clone, Default)]
struct MergeIndex {
    symbols: FxHashMap<String, u32>,
    /// (left, right) -> (rank, merged symbol)
    ranks: FxHashMap<(u32, u32), (u32, u32)>,
}

const UNKNOWN_SYMBOL: u32 = u32::MAX;

impl MergeTable {
    /// Builds a table from merges and their affected-sentence counts.
    ///
    /// `affected` may be empty when counts are unknown (e.g. a table read
    /// from a merges-only file); otherwise it must have one entry per merge.
    pub fn new(merges: Vec<(String, String)>, affected: Vec<u32>) -> Result<Self> {
        if !affected.is_empty() && affected.len() != merges.len() {
            return Err(Error::InvalidMergeTable(format!(
                "{} merges but {} affected counts",
                merges.len(),
                affected.len()
            )));
        }
        if let Some(k) = affected.iter().position(|&a| a == 0) {
            return Err(Error::InvalidMergeTable(format!("merge {} affects no sentence", k + 1)));
        }
        let mut index = MergeIndex::default();
        let mut known: hashbrown::HashSet<String, rustc_hash::FxBuildHasher> = Default::default();
        known.insert(String::from(END_OF_WORD));
        for (rank, (left, right)) in merges.iter().enumerate() {
            for part in [left, right] {
                let atomic = part.chars().count() == 1 || part == END_OF_WORD;
                if !atomic && !known.contains(part.as_str()) {
                    return Err(Error::InvalidMergeTable(format!(
                        "merge {}: symbol {part:?} is not produced by an earlier merge",
                        rank + 1
                    )));
                }
            }
            let merged = format!("{left}{right}");
            let l = index.intern(left);
            let r = index.intern(right);
            let m = index.intern(&merged);
            if index.ranks.insert((l, r), (rank as u32, m)).is_some() {
                return Err(Error::InvalidMergeTable(format!("duplicate merge {left:?} {right:?}")));
            }
            known.insert(merged);
        }
        Ok(Self { merges, affected, index })
    }

    pub fn empty() -> Self {
        Self { merges: Vec::new(), affected: Vec::new(), index: MergeIndex::default() }
    }

    /// Number of learned merges (the largest usable `k`).
    pub fn max_merges(&self) -> u32 {
        self.merges.len() as u32
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn affected(&self) -> &[u32] {
        &self.affected
    }

    pub fn len(&self) -> usize {
        self.merges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }
}

impl MergeIndex {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.symbols.get(s) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.insert(String::from(s), id);
        id
    }

    fn lookup(&self, s: &str) -> u32 {
        self.symbols.get(s).copied().unwrap_or(UNKNOWN_SYMBOL)
    }
}

/// Per-merge affected-sentence counts as `(k, count)` with `k` starting at 1.
pub fn affected_curve(table: &MergeTable) -> Vec<(u32, u32)> {
    table.affected.iter().enumerate().map(|(i, &a)| (i as u32 + 1, a)).collect()
}

#[derive(PartialEq, Eq)]
struct Candidate {
    count: i64,
    left: Rc<str>,
    right: Rc<str>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    // Highest count first; among equal counts the lexicographically smallest pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| Reverse((&self.left, &self.right)).cmp(&Reverse((&other.left, &other.right))))
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct WordType {
    symbols: Vec<u32>,
    freq: i64,
    sentences: Vec<u32>,
}

/// Learns up to `max_merges` merges from one side of a corpus.
///
/// Each word starts as its characters followed by an end-of-word symbol. The
/// most frequent adjacent pair (weighted by word frequency) is merged until
/// `max_merges` is reached or no pair occurs at least twice. Ties go to the
/// lexicographically smallest `(left, right)`.
pub fn learn_bpe<W, S>(sentences: &[W], max_merges: u32) -> Result<MergeTable>
where
    W: AsRef<[S]>,
    S: AsRef<str>,
{
    if sentences.iter().all(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptyCorpus);
    }

    let mut names: Vec<Rc<str>> = Vec::new();
    let mut ids: FxHashMap<Rc<str>, u32> = FxHashMap::default();
    let mut intern = |s: &str, names: &mut Vec<Rc<str>>| -> u32 {
        if let Some(&id) = ids.get(s) {
            return id;
        }
        let rc: Rc<str> = Rc::from(s);
        let id = names.len() as u32;
        names.push(rc.clone());
        ids.insert(rc, id);
        id
    };

    let end = intern(END_OF_WORD, &mut names);
    let mut words: Vec<WordType> = Vec::new();
    let mut word_ids: FxHashMap<&str, usize> = FxHashMap::default();
    let mut buf = [0u8; 4];
    for (sid, sentence) in sentences.iter().enumerate() {
        for tok in sentence.as_ref() {
            let tok = tok.as_ref();
            let w = *word_ids.entry(tok).or_insert_with(|| {
                let mut symbols: Vec<u32> = tok.chars().map(|c| intern(c.encode_utf8(&mut buf), &mut names)).collect();
                symbols.push(end);
                words.push(WordType { symbols, freq: 0, sentences: Vec::new() });
                words.len() - 1
            });
            let word = &mut words[w];
            word.freq += 1;
            if word.sentences.last() != Some(&(sid as u32)) {
                word.sentences.push(sid as u32);
            }
        }
    }

    let mut counts: FxHashMap<(u32, u32), i64> = FxHashMap::default();
    let mut occurs: FxHashMap<(u32, u32), Vec<u32>> = FxHashMap::default();
    for (w, word) in words.iter().enumerate() {
        for p in word.symbols.windows(2) {
            *counts.entry((p[0], p[1])).or_insert(0) += word.freq;
            let list = occurs.entry((p[0], p[1])).or_default();
            if list.last() != Some(&(w as u32)) {
                list.push(w as u32);
            }
        }
    }

    let mut heap: BinaryHeap<Candidate> = counts
        .iter()
        .map(|(&pair, &count)| Candidate {
            count,
            left: names[pair.0 as usize].clone(),
            right: names[pair.1 as usize].clone(),
            pair,
        })
        .collect();

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut affected: Vec<u32> = Vec::new();
    let mut sentence_stamp: Vec<u32> = vec![u32::MAX; sentences.len()];
    let mut word_stamp: Vec<u32> = vec![u32::MAX; words.len()];
    let mut changed: Vec<(u32, u32)> = Vec::new();

    while (merges.len() as u32) < max_merges {
        let Some(best) = heap.pop() else { break };
        if counts.get(&best.pair).copied() != Some(best.count) {
            continue; // stale entry
        }
        if best.count < 2 {
            break;
        }
        let (a, b) = best.pair;
        let merged_name = format!("{}{}", best.left, best.right);
        let merged = intern(&merged_name, &mut names);
        let step = merges.len() as u32;
        let mut touched_sentences = 0u32;
        changed.clear();

        let candidates = occurs.remove(&best.pair).unwrap_or_default();
        for &w in &candidates {
            if word_stamp[w as usize] == step {
                continue;
            }
            word_stamp[w as usize] = step;
            let word = &mut words[w as usize];
            if !word.symbols.windows(2).any(|p| p[0] == a && p[1] == b) {
                continue;
            }
            let mut next = Vec::with_capacity(word.symbols.len());
            let mut i = 0;
            while i < word.symbols.len() {
                if i + 1 < word.symbols.len() && word.symbols[i] == a && word.symbols[i + 1] == b {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(word.symbols[i]);
                    i += 1;
                }
            }
            for p in word.symbols.windows(2) {
                *counts.get_mut(&(p[0], p[1])).expect("pair counted") -= word.freq;
                changed.push((p[0], p[1]));
            }
            for p in next.windows(2) {
                *counts.entry((p[0], p[1])).or_insert(0) += word.freq;
                changed.push((p[0], p[1]));
                if p[0] == merged || p[1] == merged {
                    let list = occurs.entry((p[0], p[1])).or_default();
                    if list.last() != Some(&w) {
                        list.push(w);
                    }
                }
            }
            word.symbols = next;
            for &s in &word.sentences {
                if sentence_stamp[s as usize] != step {
                    sentence_stamp[s as usize] = step;
                    touched_sentences += 1;
                }
            }
        }

        changed.sort_unstable();
        changed.dedup();
        for &pair in &changed {
            match counts.get(&pair).copied() {
                Some(c) if c > 0 => heap.push(Candidate {
                    count: c,
                    left: names[pair.0 as usize].clone(),
                    right: names[pair.1 as usize].clone(),
                    pair,
                }),
                Some(_) => {
                    counts.remove(&pair);
                    occurs.remove(&pair);
                }
                None => {}
            }
        }

        merges.push((String::from(&*best.left), String::from(&*best.right)));
        affected.push(touched_sentences);
    }

    MergeTable::new(merges, affected)
}

/// A sentence split into subwords, with the index of the word each subword came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedSentence {
    pub tokens: Vec<String>,
    pub word_of_token: Vec<usize>,
}

impl SegmentedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Reassembles the words by stripping continuation markers.
    pub fn words(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (pos, (tok, &w)) in self.tokens.iter().zip(&self.word_of_token).enumerate() {
            let last_of_word = self.word_of_token.get(pos + 1) != Some(&w);
            let piece = if last_of_word { tok.as_str() } else { tok.strip_suffix(CONTINUATION).unwrap_or(tok) };
            if w == out.len() {
                out.push(String::new());
            }
            out[w].push_str(piece);
        }
        out
    }
}

/// Splits one word into subword spans (byte ranges) after the first `k` merges.
fn segment_word(word: &str, table: &MergeTable, k: u32) -> Vec<(usize, usize)> {
    // (symbol id, start, end); the end-of-word symbol is the empty span at word.len().
    let mut buf = [0u8; 4];
    let mut symbols: Vec<(u32, usize, usize)> =
        word.char_indices().map(|(i, c)| (table.index.lookup(c.encode_utf8(&mut buf)), i, i + c.len_utf8())).collect();
    symbols.push((table.index.lookup(END_OF_WORD), word.len(), word.len()));

    if k > 0 {
        loop {
            let mut best: Option<(u32, u32, u32, u32)> = None; // rank, merged, left, right
            for p in symbols.windows(2) {
                if let Some(&(rank, merged)) = table.index.ranks.get(&(p[0].0, p[1].0)) {
                    if rank < k && best.is_none_or(|b| rank < b.0) {
                        best = Some((rank, merged, p[0].0, p[1].0));
                    }
                }
            }
            let Some((_, merged, left, right)) = best else { break };
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i].0 == left && symbols[i + 1].0 == right {
                    next.push((merged, symbols[i].1, symbols[i + 1].2));
                    i += 2;
                } else {
                    next.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = next;
        }
    }

    symbols.into_iter().filter(|&(_, s, e)| e > s).map(|(_, s, e)| (s, e)).collect()
}

/// Segments a sentence with the first `k` merges of `table`, or keeps whole
/// words for [`VocabSize::Word`].
pub fn segment<S: AsRef<str>>(sentence: &[S], table: &MergeTable, k: VocabSize) -> Result<SegmentedSentence> {
    let mut cache = FxHashMap::default();
    segment_cached(sentence, table, k, &mut cache)
}

fn segment_cached<S: AsRef<str>>(
    sentence: &[S],
    table: &MergeTable,
    k: VocabSize,
    cache: &mut FxHashMap<String, Vec<(usize, usize)>>,
) -> Result<SegmentedSentence> {
    let k = match k {
        VocabSize::Word => {
            return Ok(SegmentedSentence {
                tokens: sentence.iter().map(|w| String::from(w.as_ref())).collect(),
                word_of_token: (0..sentence.len()).collect(),
            })
        }
        VocabSize::Merges(k) if k > table.max_merges() => {
            return Err(Error::InvalidArgument(format!(
                "merge count {k} exceeds the {} learned merges",
                table.max_merges()
            )))
        }
        VocabSize::Merges(k) => k,
    };

    let mut tokens = Vec::new();
    let mut word_of_token = Vec::new();
    for (w, word) in sentence.iter().enumerate() {
        let word = word.as_ref();
        let spans = match cache.get(word) {
            Some(spans) => spans,
            None => cache.entry(String::from(word)).or_insert_with(|| segment_word(word, table, k)),
        };
        let last = spans.len().saturating_sub(1);
        for (i, &(s, e)) in spans.iter().enumerate() {
            let mut tok = String::from(&word[s..e]);
            if i < last {
                tok.push_str(CONTINUATION);
            }
            tokens.push(tok);
            word_of_token.push(w);
        }
    }
    Ok(SegmentedSentence { tokens, word_of_token })
}

/// A parallel corpus segmented under one scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedCorpus {
    pub scheme: SegmentationScheme,
    pub pairs: Vec<(SegmentedSentence, SegmentedSentence)>,
}

impl SegmentedCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Token sequences of both sides, without word maps.
    pub fn token_pairs(&self) -> impl Iterator<Item = (&[String], &[String])> {
        self.pairs.iter().map(|(s, t)| (s.tokens.as_slice(), t.tokens.as_slice()))
    }
}

/// Segments both sides of every pair under `scheme`.
pub fn segment_corpus(
    corpus: &ParallelCorpus,
    scheme: SegmentationScheme,
    source_table: &MergeTable,
    target_table: &MergeTable,
) -> Result<SegmentedCorpus> {
    scheme.validate(source_table, target_table)?;
    let mut source_cache = FxHashMap::default();
    let mut target_cache = FxHashMap::default();
    let pairs = corpus
        .pairs()
        .iter()
        .map(|p| {
            Ok((
                segment_cached(p.source(), source_table, scheme.source, &mut source_cache)?,
                segment_cached(p.target(), target_table, scheme.target, &mut target_cache)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SegmentedCorpus { scheme, pairs })
}
