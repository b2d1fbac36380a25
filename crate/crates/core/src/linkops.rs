//! Symmetrization, subword-to-word projection and multi-scheme voting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bpe::{SegmentationScheme, SegmentedCorpus, SegmentedSentence};
use crate::corpus::{AlignmentSet, Link};
use crate::{Error, FxHashMap, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SymmetrizationMethod {
    #[default]
    Intersection,
    Union,
    /// grow-diag-final-and
    Gdfa,
}

impl fmt::Display for SymmetrizationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymmetrizationMethod::Intersection => "intersection",
            SymmetrizationMethod::Union => "union",
            SymmetrizationMethod::Gdfa => "gdfa",
        })
    }
}

impl FromStr for SymmetrizationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intersection" | "intersect" => Ok(Self::Intersection),
            "union" => Ok(Self::Union),
            "gdfa" | "grow-diag-final-and" => Ok(Self::Gdfa),
            other => Err(Error::InvalidArgument(format!("unknown symmetrization method {other:?}"))),
        }
    }
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];

/// Combines forward and reverse alignments of the same corpus.
pub fn symmetrize(forward: &AlignmentSet, reverse: &AlignmentSet, method: SymmetrizationMethod) -> AlignmentSet {
    match method {
        SymmetrizationMethod::Intersection => forward.intersection(reverse),
        SymmetrizationMethod::Union => forward.union(reverse),
        SymmetrizationMethod::Gdfa => {
            let fwd = forward.by_sentence();
            let rev = reverse.by_sentence();
            let sentences: BTreeSet<usize> = fwd.keys().chain(rev.keys()).copied().collect();
            let empty = Vec::new();
            let mut out = AlignmentSet::new();
            for s in sentences {
                let f = fwd.get(&s).unwrap_or(&empty);
                let r = rev.get(&s).unwrap_or(&empty);
                out.extend(grow_diag_final_and(f, r).into_iter().map(|(i, j)| Link::new(s, i, j)));
            }
            out
        }
    }
}

/// Moses grow-diag-final-and on one sentence.
fn grow_diag_final_and(forward: &[Link], reverse: &[Link]) -> BTreeSet<(usize, usize)> {
    let f: BTreeSet<(usize, usize)> = forward.iter().map(|l| (l.source, l.target)).collect();
    let r: BTreeSet<(usize, usize)> = reverse.iter().map(|l| (l.source, l.target)).collect();
    let union: BTreeSet<(usize, usize)> = f.union(&r).copied().collect();
    let mut alignment: BTreeSet<(usize, usize)> = f.intersection(&r).copied().collect();
    let (rows, cols) = union.iter().fold((0, 0), |(a, b), &(i, j)| (a.max(i + 1), b.max(j + 1)));
    let mut src_aligned = alloc::vec![false; rows];
    let mut tgt_aligned = alloc::vec![false; cols];
    for &(i, j) in &alignment {
        src_aligned[i] = true;
        tgt_aligned[j] = true;
    }

    // grow-diag
    loop {
        let mut added = false;
        for i in 0..rows {
            for j in 0..cols {
                if !alignment.contains(&(i, j)) {
                    continue;
                }
                for (di, dj) in NEIGHBORS {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 {
                        continue;
                    }
                    let (ni, nj) = (ni as usize, nj as usize);
                    if ni >= rows || nj >= cols {
                        continue;
                    }
                    if (!src_aligned[ni] || !tgt_aligned[nj]) && union.contains(&(ni, nj)) && alignment.insert((ni, nj))
                    {
                        src_aligned[ni] = true;
                        tgt_aligned[nj] = true;
                        added = true;
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    // final-and, forward then reverse
    for direction in [&f, &r] {
        for &(i, j) in direction.iter() {
            if !src_aligned[i] && !tgt_aligned[j] {
                alignment.insert((i, j));
                src_aligned[i] = true;
                tgt_aligned[j] = true;
            }
        }
    }
    alignment
}

/// Maps subword links to word links through the segmentation's word maps.
pub fn project_to_words(subword: &AlignmentSet, corpus: &SegmentedCorpus) -> Result<AlignmentSet> {
    project_with_maps(subword, |s| corpus.pairs.get(s).map(|(a, b)| (a, b)))
}

/// Like [`project_to_words`] with explicit per-sentence word maps.
pub fn project_to_words_with_maps(
    subword: &AlignmentSet,
    source_maps: &[Vec<usize>],
    target_maps: &[Vec<usize>],
) -> Result<AlignmentSet> {
    let mut out = AlignmentSet::new();
    for l in subword {
        let lookup = |maps: &[Vec<usize>], idx: usize, side: &str| {
            maps.get(l.sentence).and_then(|m| m.get(idx)).copied().ok_or_else(|| Error::Integrity {
                sentence: l.sentence,
                reason: format!("{side} subword index {idx} has no word mapping"),
            })
        };
        out.insert(Link::new(
            l.sentence,
            lookup(source_maps, l.source, "source")?,
            lookup(target_maps, l.target, "target")?,
        ));
    }
    Ok(out)
}

fn project_with_maps<'a>(
    subword: &AlignmentSet,
    sentence: impl Fn(usize) -> Option<(&'a SegmentedSentence, &'a SegmentedSentence)>,
) -> Result<AlignmentSet> {
    let mut out = AlignmentSet::new();
    for l in subword {
        let (src, tgt) = sentence(l.sentence).ok_or_else(|| Error::Integrity {
            sentence: l.sentence,
            reason: "sentence is not part of the segmented corpus".into(),
        })?;
        let i = src.word_of_token.get(l.source).ok_or_else(|| Error::Integrity {
            sentence: l.sentence,
            reason: format!("source subword index {} out of range ({} subwords)", l.source, src.len()),
        })?;
        let j = tgt.word_of_token.get(l.target).ok_or_else(|| Error::Integrity {
            sentence: l.sentence,
            reason: format!("target subword index {} out of range ({} subwords)", l.target, tgt.len()),
        })?;
        out.insert(Link::new(l.sentence, *i, *j));
    }
    Ok(out)
}

/// Word-level alignment produced under one segmentation scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeAlignment {
    pub scheme: SegmentationScheme,
    pub word_links: AlignmentSet,
}

/// For every link, how many of `total` schemes contain it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteTally {
    pub counts: BTreeMap<Link, u32>,
    pub total: u32,
}

impl VoteTally {
    pub fn new<'a, I>(alignments: I) -> Self
    where
        I: IntoIterator<Item = &'a AlignmentSet>,
    {
        Self::filtered(alignments, |_| true)
    }

    /// Tally restricted to links accepted by `keep`.
    pub fn filtered<'a, I>(alignments: I, keep: impl Fn(&Link) -> bool) -> Self
    where
        I: IntoIterator<Item = &'a AlignmentSet>,
    {
        let mut counts: FxHashMap<Link, u32> = FxHashMap::default();
        let mut total = 0;
        for set in alignments {
            total += 1;
            for l in set.iter().filter(|l| keep(l)) {
                *counts.entry(*l).or_insert(0) += 1;
            }
        }
        Self { counts: counts.into_iter().collect(), total }
    }

    /// Links whose vote share reaches `lambda`.
    pub fn threshold(&self, lambda: f64) -> AlignmentSet {
        let t = self.total as f64;
        self.counts.iter().filter(|(_, &c)| c >= 1 && c as f64 / t >= lambda).map(|(l, _)| *l).collect()
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must lie in [0, 1]")));
    }
    Ok(())
}

/// Keeps every word link supported by at least a `lambda` share of the schemes.
pub fn aggregate(alignments: &[SchemeAlignment], lambda: f64) -> Result<AlignmentSet> {
    aggregate_sets(alignments.iter().map(|a| &a.word_links), lambda)
}

/// [`aggregate`] over bare alignment sets.
pub fn aggregate_sets<'a, I>(alignments: I, lambda: f64) -> Result<AlignmentSet>
where
    I: IntoIterator<Item = &'a AlignmentSet>,
{
    check_lambda(lambda)?;
    let tally = VoteTally::new(alignments);
    if tally.total == 0 {
        return Err(Error::InvalidArgument("aggregation needs at least one scheme".into()));
    }
    Ok(tally.threshold(lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn set(links: &[(usize, usize, usize)]) -> AlignmentSet {
        links.iter().map(|&(s, i, j)| Link::new(s, i, j)).collect()
    }

    #[test]
    fn intersection_and_union() {
        let f = set(&[(0, 0, 0), (0, 1, 1)]);
        let r = set(&[(0, 0, 0)]);
        assert_eq!(symmetrize(&f, &r, SymmetrizationMethod::Intersection), set(&[(0, 0, 0)]));
        assert_eq!(symmetrize(&f, &r, SymmetrizationMethod::Union), set(&[(0, 0, 0), (0, 1, 1)]));
    }

    #[test]
    fn gdfa_grows_along_diagonal() {
        let f = set(&[(0, 0, 0), (0, 1, 2)]);
        let r = set(&[(0, 0, 0), (0, 1, 1)]);
        assert_eq!(symmetrize(&f, &r, SymmetrizationMethod::Gdfa), set(&[(0, 0, 0), (0, 1, 1), (0, 1, 2)]));
    }

    #[test]
    fn gdfa_final_and_adds_isolated_points() {
        // No intersection; (2,2) is not adjacent to anything and both ends are free.
        let f = set(&[(0, 2, 2)]);
        let r = set(&[(0, 0, 0)]);
        assert_eq!(symmetrize(&f, &r, SymmetrizationMethod::Gdfa), set(&[(0, 0, 0), (0, 2, 2)]));
    }

    #[test]
    fn gdfa_does_not_grow_into_doubly_aligned_points() {
        let f = set(&[(0, 0, 0), (0, 1, 1), (0, 0, 1)]);
        let r = set(&[(0, 0, 0), (0, 1, 1)]);
        // (0,1) has both ends aligned already.
        assert_eq!(symmetrize(&f, &r, SymmetrizationMethod::Gdfa), set(&[(0, 0, 0), (0, 1, 1)]));
    }

    #[test]
    fn projection_maps_and_dedups() {
        let sub = set(&[(0, 1, 0)]);
        let w = project_to_words_with_maps(&sub, &[vec![0, 0, 1]], &[vec![0]]).unwrap();
        assert_eq!(w, set(&[(0, 0, 0)]));
        let sub = set(&[(0, 0, 0), (0, 1, 0)]);
        let w = project_to_words_with_maps(&sub, &[vec![0, 0]], &[vec![0]]).unwrap();
        assert_eq!(w, set(&[(0, 0, 0)]));
    }

    #[test]
    fn projection_out_of_range_is_integrity_error() {
        let sub = set(&[(0, 5, 0)]);
        let err = project_to_words_with_maps(&sub, &[vec![0, 1]], &[vec![0]]).unwrap_err();
        assert!(matches!(err, Error::Integrity { sentence: 0, .. }));
    }

    #[test]
    fn vote_thresholds() {
        let a = set(&[(0, 0, 0)]);
        let b = set(&[(0, 0, 0)]);
        let c = set(&[(0, 1, 1)]);
        let all = [a.clone(), b, c];
        assert!(aggregate_sets(&all, 0.5).unwrap().contains(&Link::new(0, 0, 0)));
        assert!(!aggregate_sets(&all, 0.7).unwrap().contains(&Link::new(0, 0, 0)));
        let ab = set(&[(0, 0, 0), (0, 1, 1)]);
        assert_eq!(aggregate_sets([&a, &ab], 1.0).unwrap(), a);
    }

    #[test]
    fn aggregate_rejects_bad_input() {
        let none: [AlignmentSet; 0] = [];
        assert!(aggregate_sets(&none, 0.5).is_err());
        assert!(aggregate_sets(&[AlignmentSet::new()], 1.5).is_err());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("grow-diag-final-and".parse::<SymmetrizationMethod>().unwrap(), SymmetrizationMethod::Gdfa);
        assert!("sideways".parse::<SymmetrizationMethod>().is_err());
    }
}
