//! Greedy selection of segmentation schemes and vote threshold.
//!
//! Each iteration runs a small Bayesian-optimization search over one new
//! cell of the granularity grid plus the threshold `lambda`, scoring every
//! candidate together with the cells already selected. The best candidate is
//! appended to the history and the loop continues while some iteration in the
//! last `early_stop` improved on its predecessor.
//!
//! Vocabulary sizes are drawn log-uniformly: early merges touch most
//! sentences and later ones very few, so small merge counts deserve most of
//! the prior mass.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aligner::Aligner;
use crate::bpe::{segment_corpus, MergeTable, SegmentationScheme, VocabSize};
use crate::corpus::{AlignmentSet, GoldAlignment, ParallelCorpus};
use crate::linkops::{project_to_words, symmetrize, SymmetrizationMethod, VoteTally};
use crate::metrics::{score, Metrics};
use crate::{Error, Result};

/// Allowed values on one side of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SideRange {
    /// Inclusive merge-count range, if any merge counts are allowed.
    pub merges: Option<(u32, u32)>,
    pub word: bool,
}

impl SideRange {
    pub fn full(table: &MergeTable) -> Self {
        Self { merges: Some((0, table.max_merges())), word: true }
    }

    pub fn word_only() -> Self {
        Self { merges: None, word: true }
    }

    fn merge_count(&self) -> u64 {
        self.merges.map_or(0, |(lo, hi)| u64::from(hi - lo) + 1)
    }

    /// Number of grid values on this side.
    pub fn cell_count(&self) -> u64 {
        self.merge_count() + u64::from(self.word)
    }

    pub fn contains(&self, v: VocabSize) -> bool {
        match v {
            VocabSize::Word => self.word,
            VocabSize::Merges(k) => self.merges.is_some_and(|(lo, hi)| (lo..=hi).contains(&k)),
        }
    }

    /// Log-uniform over merge counts, `Word` with probability `1 / (range size + 1)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> VocabSize {
        let Some((lo, hi)) = self.merges else { return VocabSize::Word };
        if self.word && rng.gen_range(0..=self.merge_count()) == 0 {
            return VocabSize::Word;
        }
        let a = libm::log(f64::from(lo) + 1.0);
        let b = libm::log(f64::from(hi) + 2.0);
        let u = rng.gen_range(a..b);
        let v = libm::floor(libm::exp(u)) - 1.0;
        VocabSize::Merges((v.max(f64::from(lo)) as u32).min(hi))
    }

    /// Position on a log scale in [0, 1]; `Word` maps to 1.
    fn feature(&self, v: VocabSize) -> f64 {
        let hi = self.merges.map_or(0, |(_, hi)| hi);
        let top = libm::log(f64::from(hi) + 2.0);
        match v {
            VocabSize::Word => 1.0,
            VocabSize::Merges(k) => libm::log(f64::from(k) + 1.0) / top,
        }
    }

    fn values(&self) -> impl Iterator<Item = VocabSize> + '_ {
        let merges = self.merges.into_iter().flat_map(|(lo, hi)| (lo..=hi).map(VocabSize::Merges));
        merges.chain(self.word.then_some(VocabSize::Word))
    }

    fn validate(&self, table: &MergeTable, side: &str) -> Result<()> {
        if let Some((lo, hi)) = self.merges {
            if lo > hi {
                return Err(Error::InvalidArgument(format!("{side} range [{lo}, {hi}] is empty")));
            }
            if hi > table.max_merges() {
                return Err(Error::InvalidArgument(format!(
                    "{side} range upper bound {hi} exceeds the {} learned merges",
                    table.max_merges()
                )));
            }
        }
        if self.cell_count() == 0 {
            return Err(Error::InvalidArgument(format!("{side} range has no values")));
        }
        Ok(())
    }
}

/// The grid of candidate cells plus the threshold range.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchSpace {
    pub source: SideRange,
    pub target: SideRange,
    pub lambda: (f64, f64),
}

impl SearchSpace {
    pub fn full(source_table: &MergeTable, target_table: &MergeTable) -> Self {
        Self { source: SideRange::full(source_table), target: SideRange::full(target_table), lambda: (0.0, 1.0) }
    }

    pub fn validate(&self, source_table: &MergeTable, target_table: &MergeTable) -> Result<()> {
        self.source.validate(source_table, "source")?;
        self.target.validate(target_table, "target")?;
        let (lo, hi) = self.lambda;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidArgument(format!("lambda range [{lo}, {hi}] must lie within [0, 1]")));
        }
        Ok(())
    }

    pub fn contains(&self, scheme: &SegmentationScheme) -> bool {
        self.source.contains(scheme.source) && self.target.contains(scheme.target)
    }

    pub fn cell_count(&self) -> u64 {
        self.source.cell_count().saturating_mul(self.target.cell_count())
    }

    fn features(&self, scheme: &SegmentationScheme, lambda: f64) -> [f64; 3] {
        [self.source.feature(scheme.source), self.target.feature(scheme.target), lambda]
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Candidate {
        let scheme = SegmentationScheme::new(self.source.sample(rng), self.target.sample(rng));
        Candidate { scheme, lambda: self.sample_lambda(rng) }
    }

    fn sample_lambda<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.lambda;
        if hi > lo {
            rng.gen_range(lo..=hi)
        } else {
            lo
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub scheme: SegmentationScheme,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trial {
    pub iteration: usize,
    pub scheme: SegmentationScheme,
    pub lambda: f64,
    pub f1: f64,
}

/// Everything the greedy loop has decided so far. Serializable, and enough to
/// resume a run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerState {
    pub seed: u64,
    /// F1 of the unsegmented (WORD, WORD) alignment, when that cell is in the space.
    pub baseline_f1: Option<f64>,
    pub xi_history: Vec<SegmentationScheme>,
    pub lambda_history: Vec<f64>,
    pub f1_trace: Vec<f64>,
    pub best_prefix_len: usize,
    pub all_trials: Vec<Trial>,
}

impl OptimizerState {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn iterations(&self) -> usize {
        self.xi_history.len()
    }

    /// Improvement of every iteration over the one before it (the first over
    /// the baseline, or over 0 without one).
    pub fn deltas(&self) -> Vec<f64> {
        let mut prev = self.baseline_f1.unwrap_or(0.0);
        self.f1_trace
            .iter()
            .map(|&f| {
                let d = f - prev;
                prev = f;
                d
            })
            .collect()
    }

    /// True once none of the last `early_stop` iterations improved. Fewer
    /// than `early_stop` iterations never count as converged.
    pub fn converged(&self, early_stop: usize) -> bool {
        let deltas = self.deltas();
        deltas.len() >= early_stop && deltas[deltas.len() - early_stop..].iter().all(|&d| d <= 0.0)
    }

    /// Selected cells and threshold of the best prefix.
    pub fn best(&self) -> Option<(&[SegmentationScheme], f64)> {
        (self.best_prefix_len > 0)
            .then(|| (&self.xi_history[..self.best_prefix_len], self.lambda_history[self.best_prefix_len - 1]))
    }

    /// Best-so-far F1 after each iteration.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.f1_trace
            .iter()
            .map(|&f| {
                best = best.max(f);
                best
            })
            .collect()
    }

    fn trials_of(&self, iteration: usize) -> impl Iterator<Item = &Trial> {
        self.all_trials.iter().filter(move |t| t.iteration == iteration)
    }

    fn refresh_best_prefix(&mut self) {
        let mut best = 0;
        for (i, &f) in self.f1_trace.iter().enumerate() {
            if best == 0 || f > self.f1_trace[best - 1] {
                best = i + 1;
            }
        }
        self.best_prefix_len = best;
    }
}

/// Score model used to rank candidates once random initialization is done.
pub trait Surrogate {
    /// Fits on `(features, f1)` observations.
    fn fit(&mut self, observations: &[([f64; 3], f64)]);
    /// Larger is more promising.
    fn acquisition(&self, x: &[f64; 3]) -> f64;
}

/// Tree-structured Parzen estimator: ranks points by the density ratio of the
/// best `gamma` fraction of observations to the rest.
#[derive(Debug, Clone)]
pub struct Tpe {
    pub gamma: f64,
    good: Vec<[f64; 3]>,
    bad: Vec<[f64; 3]>,
    good_bw: [f64; 3],
    bad_bw: [f64; 3],
}

impl Default for Tpe {
    fn default() -> Self {
        Self { gamma: 0.25, good: Vec::new(), bad: Vec::new(), good_bw: [1.0; 3], bad_bw: [1.0; 3] }
    }
}

impl Tpe {
    fn bandwidth(points: &[[f64; 3]]) -> [f64; 3] {
        let n = points.len().max(1) as f64;
        let mut bw = [0.0; 3];
        for (d, b) in bw.iter_mut().enumerate() {
            let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
            let var = points.iter().map(|p| (p[d] - mean) * (p[d] - mean)).sum::<f64>() / n;
            // Scott's rule with a floor so a single point still spreads.
            *b = (1.06 * libm::sqrt(var) * libm::pow(n, -0.2)).clamp(0.05, 1.0);
        }
        bw
    }

    /// Parzen density on the unit cube, mixed with a uniform prior component.
    fn density(points: &[[f64; 3]], bw: &[f64; 3], x: &[f64; 3]) -> f64 {
        const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
        let mut sum = 1.0;
        for p in points {
            let mut k = 1.0;
            for d in 0..3 {
                let z = (x[d] - p[d]) / bw[d];
                k *= INV_SQRT_2PI / bw[d] * libm::exp(-0.5 * z * z);
            }
            sum += k;
        }
        sum / (points.len() as f64 + 1.0)
    }
}

impl Surrogate for Tpe {
    fn fit(&mut self, observations: &[([f64; 3], f64)]) {
        let mut order: Vec<usize> = (0..observations.len()).collect();
        // Stable sort keeps earlier observations first among equal scores.
        order.sort_by(|&a, &b| observations[b].1.total_cmp(&observations[a].1));
        let n_good = (libm::ceil(self.gamma * observations.len() as f64) as usize).clamp(1, observations.len().max(1));
        self.good = order.iter().take(n_good).map(|&i| observations[i].0).collect();
        self.bad = order.iter().skip(n_good).map(|&i| observations[i].0).collect();
        self.good_bw = Self::bandwidth(&self.good);
        self.bad_bw = Self::bandwidth(&self.bad);
    }

    fn acquisition(&self, x: &[f64; 3]) -> f64 {
        Self::density(&self.good, &self.good_bw, x) / Self::density(&self.bad, &self.bad_bw, x)
    }
}

/// Number of prior samples scored by the acquisition function per proposal.
pub const ACQUISITION_SAMPLES: usize = 1000;

/// Grids up to this size are enumerated when rejection sampling cannot find an unused cell.
const ENUMERATION_LIMIT: u64 = 1 << 20;

fn unused_cells(space: &SearchSpace, used: &BTreeSet<SegmentationScheme>) -> Vec<SegmentationScheme> {
    let mut out = Vec::new();
    for s in space.source.values() {
        for t in space.target.values() {
            let cell = SegmentationScheme::new(s, t);
            if !used.contains(&cell) {
                out.push(cell);
            }
        }
    }
    out
}

fn used_in_space(state: &OptimizerState, space: &SearchSpace) -> BTreeSet<SegmentationScheme> {
    state.xi_history.iter().filter(|c| space.contains(c)).copied().collect()
}

/// Draws one cell from the prior that is not in `used`.
fn sample_unused<R: Rng + ?Sized>(
    space: &SearchSpace,
    used: &BTreeSet<SegmentationScheme>,
    rng: &mut R,
) -> Result<Candidate> {
    let free = space.cell_count() - used.len() as u64;
    if free == 0 {
        return Err(Error::SpaceExhausted);
    }
    if free == 1 && space.cell_count() <= ENUMERATION_LIMIT {
        let cell = unused_cells(space, used)[0];
        return Ok(Candidate { scheme: cell, lambda: space.sample_lambda(rng) });
    }
    for _ in 0..256 {
        let c = space.sample(rng);
        if !used.contains(&c.scheme) {
            return Ok(c);
        }
    }
    if space.cell_count() <= ENUMERATION_LIMIT {
        let cells = unused_cells(space, used);
        let cell = cells[rng.gen_range(0..cells.len())];
        return Ok(Candidate { scheme: cell, lambda: space.sample_lambda(rng) });
    }
    Err(Error::SpaceExhausted)
}

/// Proposes the next candidate for the current iteration.
///
/// The first `random_init` trials of an iteration are prior samples; after
/// that the surrogate is fitted on the iteration's trials and the best of
/// [`ACQUISITION_SAMPLES`] prior samples is returned. Cells already selected
/// in earlier iterations are never proposed.
pub fn propose_next<R: Rng + ?Sized, S: Surrogate>(
    state: &OptimizerState,
    space: &SearchSpace,
    random_init: usize,
    surrogate: &mut S,
    rng: &mut R,
) -> Result<Candidate> {
    let used = used_in_space(state, space);
    let iteration = state.iterations();
    let observations: Vec<([f64; 3], f64)> = state
        .trials_of(iteration)
        .filter(|t| space.contains(&t.scheme))
        .map(|t| (space.features(&t.scheme, t.lambda), t.f1))
        .collect();

    if observations.len() < random_init || space.cell_count() - used.len() as u64 <= 1 {
        return sample_unused(space, &used, rng);
    }

    surrogate.fit(&observations);
    let mut best: Option<(f64, Candidate)> = None;
    for _ in 0..ACQUISITION_SAMPLES {
        let c = space.sample(rng);
        if used.contains(&c.scheme) {
            continue;
        }
        let a = surrogate.acquisition(&space.features(&c.scheme, c.lambda));
        if best.is_none_or(|(b, _)| a > b) {
            best = Some((a, c));
        }
    }
    match best {
        Some((_, c)) => Ok(c),
        None => sample_unused(space, &used, rng),
    }
}

/// A batch of `budget` proposals without intermediate evaluations.
pub fn propose_trials(
    state: &OptimizerState,
    space: &SearchSpace,
    budget: usize,
    random_init: usize,
    seed: u64,
) -> Result<Vec<Candidate>> {
    if random_init < 1 || budget < random_init {
        return Err(Error::InvalidArgument(format!(
            "need budget >= random_init >= 1, got budget {budget} and random_init {random_init}"
        )));
    }
    let mut rng = iteration_rng(seed, state.iterations());
    let mut tpe = Tpe::default();
    (0..budget).map(|_| propose_next(state, space, random_init, &mut tpe, &mut rng)).collect()
}

fn iteration_rng(seed: u64, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    rng
}

/// Produces the word-level alignment of a corpus under one scheme.
pub trait SchemeAligner {
    fn align_scheme(&self, scheme: SegmentationScheme) -> Result<AlignmentSet>;

    /// Aligns several schemes; implementations may run them concurrently but
    /// must return results in input order.
    fn align_schemes(&self, schemes: &[SegmentationScheme]) -> Vec<Result<AlignmentSet>> {
        schemes.iter().map(|&s| self.align_scheme(s)).collect()
    }
}

/// segment → align both directions → symmetrize → project to words.
pub struct SchemePipeline<'a, A> {
    pub corpus: &'a ParallelCorpus,
    pub source_table: &'a MergeTable,
    pub target_table: &'a MergeTable,
    pub aligner: A,
    pub method: SymmetrizationMethod,
}

impl<'a, A: Aligner> SchemePipeline<'a, A> {
    pub fn new(
        corpus: &'a ParallelCorpus,
        source_table: &'a MergeTable,
        target_table: &'a MergeTable,
        aligner: A,
    ) -> Self {
        Self { corpus, source_table, target_table, aligner, method: SymmetrizationMethod::Intersection }
    }

    pub fn with_method(mut self, method: SymmetrizationMethod) -> Self {
        self.method = method;
        self
    }
}

impl<A: Aligner> SchemeAligner for SchemePipeline<'_, A> {
    fn align_scheme(&self, scheme: SegmentationScheme) -> Result<AlignmentSet> {
        let segmented = segment_corpus(self.corpus, scheme, self.source_table, self.target_table)?;
        let directional = self.aligner.align(&segmented)?;
        let sym = symmetrize(&directional.forward, &directional.reverse, self.method);
        project_to_words(&sym, &segmented)
    }
}

impl<T: SchemeAligner + ?Sized> SchemeAligner for &T {
    fn align_scheme(&self, scheme: SegmentationScheme) -> Result<AlignmentSet> {
        (**self).align_scheme(scheme)
    }

    fn align_schemes(&self, schemes: &[SegmentationScheme]) -> Vec<Result<AlignmentSet>> {
        (**self).align_schemes(schemes)
    }
}

/// Scores scheme combinations, aligning every scheme at most once.
pub struct Evaluator<S> {
    aligner: S,
    cache: BTreeMap<SegmentationScheme, AlignmentSet>,
}

impl<S: SchemeAligner> Evaluator<S> {
    pub fn new(aligner: S) -> Self {
        Self { aligner, cache: BTreeMap::new() }
    }

    pub fn aligner(&self) -> &S {
        &self.aligner
    }

    /// Schemes aligned so far.
    pub fn cached(&self) -> impl Iterator<Item = (&SegmentationScheme, &AlignmentSet)> {
        self.cache.iter()
    }

    /// Aligns every scheme not yet cached, in one batch.
    pub fn prefetch(&mut self, schemes: &[SegmentationScheme]) -> Result<()> {
        let mut missing: Vec<SegmentationScheme> =
            schemes.iter().filter(|s| !self.cache.contains_key(s)).copied().collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            return Ok(());
        }
        for (scheme, result) in missing.iter().zip(self.aligner.align_schemes(&missing)) {
            self.cache.insert(*scheme, result?);
        }
        Ok(())
    }

    pub fn scheme_alignment(&mut self, scheme: SegmentationScheme) -> Result<&AlignmentSet> {
        if !self.cache.contains_key(&scheme) {
            let a = self.aligner.align_scheme(scheme)?;
            self.cache.insert(scheme, a);
        }
        Ok(&self.cache[&scheme])
    }

    /// Per-link vote counts over `schemes`.
    pub fn tally(&mut self, schemes: &[SegmentationScheme]) -> Result<VoteTally> {
        if schemes.is_empty() {
            return Err(Error::InvalidArgument("at least one scheme is required".into()));
        }
        self.prefetch(schemes)?;
        Ok(VoteTally::new(schemes.iter().map(|s| &self.cache[s])))
    }

    /// Word alignment aggregated over `schemes` at threshold `lambda`.
    pub fn aggregate(&mut self, schemes: &[SegmentationScheme], lambda: f64) -> Result<AlignmentSet> {
        check_lambda(lambda)?;
        Ok(self.tally(schemes)?.threshold(lambda))
    }

    /// Scores the aggregate of `schemes` at `lambda` against `gold`.
    pub fn evaluate(&mut self, schemes: &[SegmentationScheme], lambda: f64, gold: &GoldAlignment) -> Result<Metrics> {
        check_lambda(lambda)?;
        if schemes.is_empty() {
            return Err(Error::InvalidArgument("at least one scheme is required".into()));
        }
        self.prefetch(schemes)?;
        let covered = gold.covered_sentences();
        let tally = VoteTally::filtered(schemes.iter().map(|s| &self.cache[s]), |l| covered.contains(&l.sentence));
        score(&tally.threshold(lambda), gold)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must lie in [0, 1]")));
    }
    Ok(())
}

/// Convenience wrapper: runs the full pipeline for `schemes` and scores it.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_configuration<A: Aligner>(
    corpus: &ParallelCorpus,
    gold: &GoldAlignment,
    source_table: &MergeTable,
    target_table: &MergeTable,
    schemes: &[SegmentationScheme],
    lambda: f64,
    aligner: A,
) -> Result<Metrics> {
    Evaluator::new(SchemePipeline::new(corpus, source_table, target_table, aligner)).evaluate(schemes, lambda, gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizerConfig {
    /// Trials per iteration (B).
    pub budget: usize,
    /// Prior samples before the surrogate takes over (R).
    pub random_init: usize,
    /// Stop once this many consecutive iterations fail to improve (E).
    pub early_stop: usize,
    pub seed: u64,
    /// Hard cap on the total number of iterations, counting resumed ones.
    pub max_iterations: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { budget: 30, random_init: 10, early_stop: 3, seed: 0, max_iterations: None }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.random_init < 1 || self.budget < self.random_init {
            return Err(Error::InvalidArgument(format!(
                "need budget >= random_init >= 1, got budget {} and random_init {}",
                self.budget, self.random_init
            )));
        }
        if self.early_stop < 1 {
            return Err(Error::InvalidArgument("early stopping patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// Runs the greedy selection loop, optionally continuing `resume`.
///
/// Returns the final state and the alignment of the best-scoring prefix of
/// the selected cells at that prefix's threshold. When (WORD, WORD) is part
/// of the space it is scored first and serves as the reference the first
/// iteration must beat; it is also the first trial of iteration 0.
pub fn run_iterative_sampling<S: SchemeAligner>(
    evaluator: &mut Evaluator<S>,
    gold: &GoldAlignment,
    space: &SearchSpace,
    config: &OptimizerConfig,
    resume: Option<OptimizerState>,
) -> Result<(OptimizerState, AlignmentSet)> {
    config.validate()?;
    let mut state = resume.unwrap_or_else(|| OptimizerState::new(config.seed));
    let word_cell = space.contains(&SegmentationScheme::WORD);
    if word_cell && state.baseline_f1.is_none() {
        state.baseline_f1 = Some(evaluator.evaluate(&[SegmentationScheme::WORD], 1.0, gold)?.f1);
    }
    let mut tpe = Tpe::default();

    loop {
        if state.converged(config.early_stop) {
            break;
        }
        if config.max_iterations.is_some_and(|cap| state.iterations() >= cap) {
            break;
        }
        let iteration = state.iterations();
        let mut rng = iteration_rng(state.seed, iteration);
        let used = used_in_space(&state, space);
        if space.cell_count() <= used.len() as u64 {
            break;
        }

        let mut queued: Vec<Candidate> = Vec::new();
        if iteration == 0 && word_cell {
            queued.push(Candidate { scheme: SegmentationScheme::WORD, lambda: space.lambda.1 });
        }
        while queued.len() < config.random_init.min(config.budget) {
            queued.push(sample_unused(space, &used, &mut rng)?);
        }
        let prefix = state.xi_history.clone();
        let with_prefix = |c: &Candidate| {
            let mut schemes = prefix.clone();
            schemes.push(c.scheme);
            schemes
        };
        evaluator.prefetch(&queued.iter().map(|c| c.scheme).collect::<Vec<_>>())?;

        for b in 0..config.budget {
            let candidate = match queued.get(b) {
                Some(c) => *c,
                None => propose_next(&state, space, config.random_init, &mut tpe, &mut rng)?,
            };
            let metrics = evaluator.evaluate(&with_prefix(&candidate), candidate.lambda, gold)?;
            state.all_trials.push(Trial {
                iteration,
                scheme: candidate.scheme,
                lambda: candidate.lambda,
                f1: metrics.f1,
            });
        }

        let mut best: Option<&Trial> = None;
        for t in state.trials_of(iteration) {
            if best.is_none_or(|b| t.f1 > b.f1) {
                best = Some(t);
            }
        }
        let best = *best.expect("budget >= 1");
        state.xi_history.push(best.scheme);
        state.lambda_history.push(best.lambda);
        state.f1_trace.push(best.f1);
        state.refresh_best_prefix();
    }

    state.refresh_best_prefix();
    let alignment = match state.best() {
        Some((schemes, lambda)) => {
            let schemes = schemes.to_vec();
            evaluator.aggregate(&schemes, lambda)?
        }
        None => AlignmentSet::new(),
    };
    Ok((state, alignment))
}

/// Result of replaying learned settings on another corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub alignment: AlignmentSet,
    /// The cells actually used, after clamping and deduplication.
    pub schemes: Vec<SegmentationScheme>,
    /// Cells whose merge counts had to be clamped: (requested, used).
    pub clamped: Vec<(SegmentationScheme, SegmentationScheme)>,
}

/// Clamps each cell to the merge tables of the new corpus and removes
/// duplicates, keeping first occurrences.
pub fn clamp_schemes(
    schemes: &[SegmentationScheme],
    source_table: &MergeTable,
    target_table: &MergeTable,
) -> (Vec<SegmentationScheme>, Vec<(SegmentationScheme, SegmentationScheme)>) {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut clamped = Vec::new();
    for &s in schemes {
        let c = SegmentationScheme::new(
            s.source.clamped(source_table.max_merges()),
            s.target.clamped(target_table.max_merges()),
        );
        if c != s {
            clamped.push((s, c));
        }
        if seen.insert(c) {
            out.push(c);
        }
    }
    (out, clamped)
}

/// Applies selected cells and threshold to a corpus without gold alignments.
pub fn apply_transfer<S: SchemeAligner>(
    evaluator: &mut Evaluator<S>,
    source_table: &MergeTable,
    target_table: &MergeTable,
    xi_star: &[SegmentationScheme],
    lambda_star: f64,
) -> Result<Transfer> {
    if xi_star.is_empty() {
        return Err(Error::InvalidArgument("no cells to transfer".into()));
    }
    let (schemes, clamped) = clamp_schemes(xi_star, source_table, target_table);
    let alignment = evaluator.aggregate(&schemes, lambda_star)?;
    Ok(Transfer { alignment, schemes, clamped })
}
